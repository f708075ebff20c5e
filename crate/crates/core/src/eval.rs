//! Detection metrics, threshold sweeps, range-binned breakdowns and
//! latency statistics.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::classes::{Labels, ObjectClass};
use crate::decision::ClassProbabilities;
use crate::error::EvalError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn add(&mut self, truth: bool, predicted: bool) {
        match (truth, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Counts for all three classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts(pub [ConfusionCounts; 3]);

impl ClassCounts {
    pub fn add(&mut self, truth: Labels, predicted: Labels) {
        for c in 0..3 {
            self.0[c].add(truth.0[c], predicted.0[c]);
        }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a Labels, &'a Labels)>) -> Self {
        let mut counts = Self::default();
        for (t, p) in pairs {
            counts.add(*t, *p);
        }
        counts
    }
}

/// Rates for one class. `None` marks a zero denominator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Metrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub missing: Option<f64>,
    pub false_alarm: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Harmonic mean of precision and recall.
pub fn f1_score(precision: f64, recall: f64) -> Option<f64> {
    let s = precision + recall;
    (s > 0.0).then(|| 2.0 * precision * recall / s)
}

impl Metrics {
    pub fn from_counts(c: &ConfusionCounts) -> Self {
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) => f1_score(p, r),
            _ => None,
        };
        Self {
            precision,
            recall,
            missing: recall.map(|r| 1.0 - r),
            false_alarm: ratio(c.fp, c.fp + c.tn),
            f1,
        }
    }
}

/// Per-class metrics plus their macro average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSet {
    pub per_class: [Metrics; 3],
    /// Mean of each per-class metric over the classes where it is defined.
    pub average: Metrics,
}

fn macro_mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

pub fn compute_metrics(counts: &ClassCounts) -> MetricSet {
    let per_class = counts.0.map(|c| Metrics::from_counts(&c));
    let avg = |f: fn(&Metrics) -> Option<f64>| macro_mean(per_class.iter().map(f));
    MetricSet {
        average: Metrics {
            precision: avg(|m| m.precision),
            recall: avg(|m| m.recall),
            missing: avg(|m| m.missing),
            false_alarm: avg(|m| m.false_alarm),
            f1: avg(|m| m.f1),
        },
        per_class,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub threshold: f64,
    pub false_alarm: f64,
    pub missing: f64,
    pub counts: ConfusionCounts,
}

/// Decision counts at every threshold for one class, using the same
/// strict `score > threshold` rule as the decision module.
pub fn threshold_sweep(
    scores: &[f64],
    labels: &[bool],
    thresholds: &[f64],
    class: ObjectClass,
) -> Result<Vec<SweepPoint>, EvalError> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(EvalError::DegenerateLabels { class: class.name() });
    }
    Ok(thresholds
        .iter()
        .map(|&t| {
            let mut counts = ConfusionCounts::default();
            for (&s, &l) in scores.iter().zip(labels) {
                counts.add(l, s > t);
            }
            SweepPoint {
                threshold: t,
                false_alarm: counts.fp as f64 / (counts.fp + counts.tn) as f64,
                missing: counts.fn_ as f64 / (counts.tp + counts.fn_) as f64,
                counts,
            }
        })
        .collect())
}

/// Sweep for each class of a multi-label score table.
pub fn threshold_sweep_all(
    probs: &[ClassProbabilities],
    labels: &[Labels],
    thresholds: &[f64],
) -> Result<[Vec<SweepPoint>; 3], EvalError> {
    let mut out: [Vec<SweepPoint>; 3] = Default::default();
    for class in ObjectClass::ALL {
        let c = class.index();
        let s: Vec<f64> = probs.iter().map(|p| p[c]).collect();
        let l: Vec<bool> = labels.iter().map(|l| l.0[c]).collect();
        out[c] = threshold_sweep(&s, &l, thresholds, class)?;
    }
    Ok(out)
}

/// `n` evenly spaced thresholds covering [0, 1].
pub fn uniform_thresholds(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Threshold where false-alarm and missing rates are closest, the corner
/// of the trade-off curve.
pub fn equal_error_threshold(curve: &[SweepPoint]) -> Option<f64> {
    curve
        .iter()
        .min_by(|a, b| (a.false_alarm - a.missing).abs().total_cmp(&(b.false_alarm - b.missing).abs()))
        .map(|p| p.threshold)
}

/// One evaluated sample with its measured range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangedResult {
    pub range_m: f64,
    pub truth: Labels,
    pub predicted: Labels,
}

pub const DEFAULT_RANGE_EDGES: [f64; 5] = [0.0, 2.0, 4.0, 6.0, 8.0];

#[derive(Debug, Clone, PartialEq)]
pub struct RangeBin {
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
    pub metrics: MetricSet,
}

/// Metrics per range interval `[edges[i], edges[i+1])`; the last interval
/// also includes its upper edge.
pub fn range_binned_metrics(results: &[RangedResult], edges: &[f64]) -> Result<Vec<RangeBin>, EvalError> {
    assert!(edges.len() >= 2 && edges.windows(2).all(|w| w[0] < w[1]), "edges must increase");
    let nb = edges.len() - 1;
    let mut counts = vec![ClassCounts::default(); nb];
    let mut samples = vec![0usize; nb];
    for r in results {
        let bin = (0..nb)
            .find(|&b| r.range_m >= edges[b] && (r.range_m < edges[b + 1] || (b == nb - 1 && r.range_m == edges[nb])))
            .ok_or(EvalError::Unbinned(r.range_m))?;
        counts[bin].add(r.truth, r.predicted);
        samples[bin] += 1;
    }
    Ok((0..nb)
        .map(|b| RangeBin {
            lo: edges[b],
            hi: edges[b + 1],
            samples: samples[b],
            metrics: compute_metrics(&counts[b]),
        })
        .collect())
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}

pub const REPORT_HEADER: &str = "method\tclass\tprecision\trecall\tmissing\tfalse_alarm\tf1";

/// Tab-separated rows `method, class, precision, recall, missing,
/// false_alarm, f1`, one per class plus an `average` row per method.
pub fn format_report(rows: &[(&str, MetricSet)]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for (method, set) in rows {
        let named = ObjectClass::ALL.iter().map(|c| (c.name(), set.per_class[c.index()]));
        for (name, m) in named.chain(std::iter::once(("average", set.average))) {
            let _ = writeln!(
                out,
                "{method}\t{name}\t{}\t{}\t{}\t{}\t{}",
                cell(m.precision),
                cell(m.recall),
                cell(m.missing),
                cell(m.false_alarm),
                cell(m.f1)
            );
        }
    }
    out
}

/// Two-column `false_alarm missing` text for external plotting.
pub fn format_curve(curve: &[SweepPoint]) -> String {
    let mut out = String::from("# threshold\tfalse_alarm\tmissing\n");
    for p in curve {
        let _ = writeln!(out, "{:.4}\t{:.6}\t{:.6}", p.threshold, p.false_alarm, p.missing);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub runs: usize,
    pub mean: Duration,
    pub median: Duration,
    pub min: Duration,
    pub max: Duration,
}

impl LatencyStats {
    pub fn from_samples(samples: &[Duration]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2
        };
        Some(Self {
            runs: n,
            mean: sorted.iter().sum::<Duration>() / n as u32,
            median,
            min: sorted[0],
            max: sorted[n - 1],
        })
    }
}

/// Times `runs` calls of `f` after `warmup` untimed ones.
pub fn benchmark(mut f: impl FnMut(), warmup: usize, runs: usize) -> Option<LatencyStats> {
    for _ in 0..warmup {
        f();
    }
    let samples: Vec<Duration> = (0..runs)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed()
        })
        .collect();
    LatencyStats::from_samples(&samples)
}
