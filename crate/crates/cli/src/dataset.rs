//! Simulated training cubes and tracked evaluation sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use carryscan_core::classes::{Labels, ObjectClass};
use carryscan_core::preprocess::{ChirpMode, FrameResult, Preprocessor, RaeCube};
use carryscan_core::radar::{ArrayGeometry, RadarConfig};
use carryscan_core::sim::{make_labeled_scene_with, polar_to_xy, simulate_trajectory, EchoSimulator, Motion, Placement, SubjectParams};
use carryscan_core::tracking::{Measurement, Tracker, TrackerParams};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub placement: Placement,
    pub train_scenes: usize,
    pub test_subjects: usize,
    pub frames_per_subject: usize,
    pub max_speed: f64,
    /// Cubes further than this from the true subject centre are not used.
    pub association_radius: f64,
    pub subject: SubjectParams,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            placement: Placement::Open,
            train_scenes: 640,
            test_subjects: 48,
            frames_per_subject: 10,
            max_speed: 1.0,
            association_radius: 0.75,
            subject: SubjectParams::default(),
        }
    }
}

/// One of the eight carry combinations, cycling so every combination is
/// equally frequent.
pub fn combination(index: usize) -> Vec<ObjectClass> {
    ObjectClass::ALL.iter().enumerate().filter(|(k, _)| index >> k & 1 == 1).map(|(_, &c)| c).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCube {
    pub cube: RaeCube,
    pub labels: Labels,
    pub scene: u64,
}

/// Cube of the cluster closest to the reference position, if any lies
/// within `radius` metres.
pub fn nearest_cube(out: &FrameResult, reference: (f64, f64), radius: f64) -> Option<RaeCube> {
    let (rx, ry) = polar_to_xy(reference.0, reference.1);
    out.cubes
        .iter()
        .map(|c| {
            let (x, y) = polar_to_xy(c.center_range_m, c.center_azimuth_deg);
            ((x - rx).hypot(y - ry), c)
        })
        .filter(|(d, _)| *d <= radius)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c.clone())
}

fn random_motion(rng: &mut ChaCha8Rng, max_speed: f64) -> Motion {
    Motion {
        speed: rng.random_range(0.0..=max_speed),
        heading_deg: rng.random_range(0.0..360.0),
    }
}

/// Single frames of moving subjects, each cube formed from one randomly
/// chosen chirp. Scenes without a usable detection are skipped.
pub fn training_set(
    config: &RadarConfig,
    geometry: &ArrayGeometry,
    pre: &Preprocessor,
    data: &DatasetConfig,
    seed: u64,
) -> Result<Vec<LabeledCube>, CliError> {
    let sim = EchoSimulator::new(config, geometry)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(data.train_scenes);
    for i in 0..data.train_scenes {
        let scene_seed = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        let labeled = make_labeled_scene_with(&combination(i % 8), data.placement, scene_seed, &data.subject);
        let motion = random_motion(&mut rng, data.max_speed);
        let scene = labeled.scene_at(labeled.center_xy(), motion.velocity());
        let frame = sim.simulate_frame(&scene, 0).frame;
        let chirp = rng.random_range(0..config.chirps_per_frame);
        let result = pre.process(&frame, ChirpMode::Single(chirp), i as u64);
        if let Some(cube) = nearest_cube(&result, labeled.subject_center, data.association_radius) {
            out.push(LabeledCube {
                cube,
                labels: labeled.labels,
                scene: scene_seed,
            });
        }
    }
    Ok(out)
}

/// Cubes collected along the longest confirmed track of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedSequence {
    pub labels: Labels,
    pub subject: u64,
    pub cubes: Vec<RaeCube>,
}

/// Walks each test subject through `frames_per_subject` frames, tracks the
/// clusters and keeps the cubes of the longest confirmed track. Cubes use
/// all chirps.
pub fn tracked_sequences(
    config: &RadarConfig,
    geometry: &ArrayGeometry,
    pre: &Preprocessor,
    data: &DatasetConfig,
    tracker: &TrackerParams,
    seed: u64,
) -> Result<Vec<TrackedSequence>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e57);
    let mut out = Vec::with_capacity(data.test_subjects);
    for i in 0..data.test_subjects {
        let subject_seed = (seed ^ 0x7e57_0000).wrapping_mul(999_983).wrapping_add(i as u64);
        let labeled = make_labeled_scene_with(&combination(i % 8), data.placement, subject_seed, &data.subject);
        let motion = random_motion(&mut rng, data.max_speed);
        let traj = simulate_trajectory(&labeled, motion, data.frames_per_subject, config, geometry)?;
        let mut t: Tracker<RaeCube> = Tracker::new(*tracker);
        for (k, f) in traj.frames().enumerate() {
            let result = pre.process(&f.frame, ChirpMode::AverageAll, k as u64);
            let meas = result
                .cubes
                .into_iter()
                .map(|c| {
                    let m = Measurement {
                        range_m: c.center_range_m,
                        azimuth_deg: c.center_azimuth_deg,
                    };
                    (m, c)
                })
                .collect();
            t.step(meas, config.frame_period)?;
        }
        let cubes = t
            .tracks()
            .iter()
            .filter(|tr| tr.confirmed)
            .max_by_key(|tr| tr.history.len())
            .map(|tr| tr.history.clone())
            .unwrap_or_default();
        out.push(TrackedSequence {
            labels: labeled.labels,
            subject: subject_seed,
            cubes,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_cover_every_label_set() {
        let mut seen: Vec<String> = (0..8).map(|i| Labels::from_classes(&combination(i)).code()).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 8);
        assert!(combination(0).is_empty());
        assert_eq!(combination(7).len(), 3);
    }
}
