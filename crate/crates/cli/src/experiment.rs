//! In-memory experiment steps shared by the subcommands and the tests.

use carryscan_core::classes::Labels;
use carryscan_core::decision::{multi_shot_vote, single_shot_decide, ClassProbabilities, DecisionPolicy};
use carryscan_core::eval::{compute_metrics, threshold_sweep_all, uniform_thresholds, ClassCounts, MetricSet, SweepPoint};
use carryscan_core::preprocess::{Preprocessor, RaeCube};
use carryscan_nn::train::{sample_from_cube, train, TrainReport, TrainingSample};
use carryscan_nn::{Network, NnError};

use crate::config::ExperimentConfig;
use crate::dataset::{training_set, tracked_sequences, LabeledCube, TrackedSequence};
use crate::error::CliError;

pub fn preprocessor(cfg: &ExperimentConfig) -> Result<Preprocessor, CliError> {
    Ok(Preprocessor::new(&cfg.radar, &cfg.geometry, cfg.preprocess.clone())?)
}

pub fn generate_training(cfg: &ExperimentConfig) -> Result<Vec<LabeledCube>, CliError> {
    training_set(&cfg.radar, &cfg.geometry, &preprocessor(cfg)?, &cfg.dataset, cfg.seed)
}

pub fn generate_sequences(cfg: &ExperimentConfig) -> Result<Vec<TrackedSequence>, CliError> {
    tracked_sequences(&cfg.radar, &cfg.geometry, &preprocessor(cfg)?, &cfg.dataset, &cfg.tracker, cfg.seed.wrapping_add(1))
}

pub fn train_network(cfg: &ExperimentConfig, data: &[LabeledCube], log: impl FnMut(&carryscan_nn::train::EpochLog)) -> Result<(Network, TrainReport), CliError> {
    let samples: Vec<TrainingSample> = data.iter().map(|c| TrainingSample::from_cube(&c.cube, c.labels)).collect();
    let mut net = Network::new(cfg.network.clone());
    let report = train(&mut net, &samples, &cfg.train, log)?;
    Ok((net, report))
}

pub fn predict_cubes(net: &Network, cubes: &[RaeCube]) -> Result<Vec<ClassProbabilities>, NnError> {
    cubes.iter().map(|c| net.predict(&sample_from_cube(c))).collect()
}

/// Per-frame scores and truth of every tracked subject.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSequence {
    pub labels: Labels,
    pub probabilities: Vec<ClassProbabilities>,
}

pub fn score_sequences(net: &Network, seqs: &[TrackedSequence]) -> Result<Vec<ScoredSequence>, CliError> {
    seqs.iter()
        .map(|s| {
            Ok(ScoredSequence {
                labels: s.labels,
                probabilities: predict_cubes(net, &s.cubes)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub single: MetricSet,
    pub multi: MetricSet,
    pub single_counts: ClassCounts,
    pub multi_counts: ClassCounts,
    /// Single-shot false-alarm and missing rates per class.
    pub sweep: [Vec<SweepPoint>; 3],
}

/// Every tracked frame gets a single-shot decision and a vote over the
/// track's last `n` scores up to and including that frame.
pub fn evaluate(scored: &[ScoredSequence], policy: &DecisionPolicy, sweep_points: usize) -> Result<Evaluation, CliError> {
    let mut single = ClassCounts::default();
    let mut multi = ClassCounts::default();
    let mut scores = Vec::new();
    let mut truth = Vec::new();
    for s in scored {
        for k in 0..s.probabilities.len() {
            single.add(s.labels, single_shot_decide(&s.probabilities[k], policy));
            multi.add(s.labels, multi_shot_vote(&s.probabilities[..=k], policy));
            scores.push(s.probabilities[k]);
            truth.push(s.labels);
        }
    }
    Ok(Evaluation {
        single: compute_metrics(&single),
        multi: compute_metrics(&multi),
        single_counts: single,
        multi_counts: multi,
        sweep: threshold_sweep_all(&scores, &truth, &uniform_thresholds(sweep_points))?,
    })
}
