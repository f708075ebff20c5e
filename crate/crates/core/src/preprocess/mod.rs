//! Raw frame to detections, cluster centres and cropped RAE cubes.
//!
//! ```text
//! RawFrame ─ range FFT ─┬─ velocity FFT ─ |·| sum ─ CFAR(D) ∧ CFAR(R) ─ peak grouping
//!                       │                                        └─ TDM comp. ─ azimuth FFT ─ Detection
//!                       └─ azimuth FFT ─ elevation FFT ─ |·| ─ RAE map ─ crop(cluster centres)
//! ```

mod angle;
pub mod cfar;
mod cluster;
mod crop;
mod spectrum;

use std::sync::Arc;

use num_complex::Complex32;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

pub use angle::{doppler_phase_of_bin, estimate_azimuth, ra_image, rae_image, tdm_compensate, ArrayLayout, RaMap, RaeMap};
pub use cfar::{ca_cfar_1d, detect_targets, peak_group, CfarHit, CfarParams};
pub use cluster::{cluster_detections, ClusterCenter, ClusterParams};
pub use crop::{crop_cubes, CubeShape, RaeCube};
pub use spectrum::{noncoherent_integrate, range_velocity_transform, RangeProfiles, RvCube, RvMap};

use crate::error::SimError;
use crate::radar::{virtual_array, ArrayGeometry, RadarConfig, VirtualArray};
use crate::sim::RawFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f32> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann if n <= 1 => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| (0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()) as f32)
                .collect(),
        }
    }
}

/// Which chirps of a frame feed the angle imaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChirpMode {
    Single(usize),
    AverageAll,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessParams {
    pub range_fft: usize,
    pub velocity_fft: usize,
    pub azimuth_fft: usize,
    pub elevation_fft: usize,
    pub range_window: Window,
    pub velocity_window: Window,
    pub cfar: CfarParams,
    pub cluster: ClusterParams,
    pub cube: CubeShape,
    pub normalization: f64,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self {
            range_fft: 256,
            velocity_fft: 64,
            azimuth_fft: 86,
            elevation_fft: 16,
            range_window: Window::Hann,
            velocity_window: Window::Hann,
            cfar: CfarParams::default(),
            cluster: ClusterParams::default(),
            cube: CubeShape::default(),
            normalization: 1e5,
        }
    }
}

/// Target hypothesis with bin indices and physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub range_bin: usize,
    pub velocity_bin: usize,
    pub azimuth_bin: usize,
    pub range_m: f64,
    pub velocity_mps: f64,
    pub azimuth_deg: f64,
    pub amplitude: f64,
}

/// Everything the chain produces for one frame.
#[derive(Debug, Clone)]
pub struct FrameResult {
    pub detections: Vec<Detection>,
    pub clusters: Vec<ClusterCenter>,
    pub cubes: Vec<RaeCube>,
}

pub(crate) struct Plans {
    pub range: Arc<dyn Fft<f32>>,
    pub velocity: Arc<dyn Fft<f32>>,
    pub azimuth: Arc<dyn Fft<f32>>,
    pub elevation: Arc<dyn Fft<f32>>,
}

/// Bin/unit conversions for a configuration and FFT sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinScale {
    pub range_bin_width: f64,
    pub velocity_bin_width: f64,
    pub velocity_fft: usize,
    pub azimuth_fft: usize,
    pub elevation_fft: usize,
}

impl BinScale {
    pub fn range_m(&self, bin: f64) -> f64 {
        bin * self.range_bin_width
    }

    pub fn range_bin(&self, range_m: f64) -> f64 {
        range_m / self.range_bin_width
    }

    /// Velocity of an FFT-shifted bin; the centre bin is zero velocity.
    pub fn velocity_mps(&self, bin: f64) -> f64 {
        (bin - (self.velocity_fft / 2) as f64) * self.velocity_bin_width
    }

    /// Azimuth of an FFT-shifted bin via `sinθ = 2 (bin - N/2) / N`.
    pub fn azimuth_deg(&self, bin: f64) -> f64 {
        let n = self.azimuth_fft as f64;
        (2.0 * (bin - (self.azimuth_fft / 2) as f64) / n).clamp(-1.0, 1.0).asin().to_degrees()
    }

    pub fn azimuth_bin(&self, azimuth_deg: f64) -> f64 {
        let n = self.azimuth_fft as f64;
        (self.azimuth_fft / 2) as f64 + n * azimuth_deg.to_radians().sin() / 2.0
    }

    pub fn elevation_deg(&self, bin: f64) -> f64 {
        let n = self.elevation_fft as f64;
        (2.0 * (bin - (self.elevation_fft / 2) as f64) / n).clamp(-1.0, 1.0).asin().to_degrees()
    }
}

/// The full preprocessing chain bound to one radar setup.
pub struct Preprocessor {
    config: RadarConfig,
    array: VirtualArray,
    layout: ArrayLayout,
    params: PreprocessParams,
    plans: Plans,
    range_window: Vec<f32>,
    velocity_window: Vec<f32>,
}

impl Preprocessor {
    pub fn new(config: &RadarConfig, geometry: &ArrayGeometry, params: PreprocessParams) -> Result<Self, SimError> {
        config.validate()?;
        geometry.validate_for(config)?;
        let array = virtual_array(geometry);
        let layout = ArrayLayout::new(&array);
        assert!(params.range_fft >= config.samples_per_chirp, "range FFT shorter than a chirp");
        assert!(params.velocity_fft >= config.chirps_per_frame, "velocity FFT shorter than a frame");
        assert!(params.azimuth_fft >= layout.cols, "azimuth FFT shorter than the virtual row");
        assert!(params.elevation_fft >= layout.rows, "elevation FFT shorter than the virtual column");
        let mut planner = FftPlanner::new();
        let plans = Plans {
            range: planner.plan_fft_forward(params.range_fft),
            velocity: planner.plan_fft_forward(params.velocity_fft),
            azimuth: planner.plan_fft_forward(params.azimuth_fft),
            elevation: planner.plan_fft_forward(params.elevation_fft),
        };
        Ok(Self {
            range_window: params.range_window.coefficients(config.samples_per_chirp),
            velocity_window: params.velocity_window.coefficients(config.chirps_per_frame),
            config: config.clone(),
            array,
            layout,
            params,
            plans,
        })
    }

    pub fn config(&self) -> &RadarConfig {
        &self.config
    }

    pub fn params(&self) -> &PreprocessParams {
        &self.params
    }

    pub fn array(&self) -> &VirtualArray {
        &self.array
    }

    pub fn layout(&self) -> &ArrayLayout {
        &self.layout
    }

    pub fn scale(&self) -> BinScale {
        BinScale {
            range_bin_width: self.config.range_bin_width(self.params.range_fft),
            velocity_bin_width: self.config.velocity_bin_width(self.params.velocity_fft),
            velocity_fft: self.params.velocity_fft,
            azimuth_fft: self.params.azimuth_fft,
            elevation_fft: self.params.elevation_fft,
        }
    }

    pub fn range_profiles(&self, frame: &RawFrame) -> RangeProfiles {
        spectrum::range_profiles(frame, &self.range_window, &self.plans.range)
    }

    pub fn range_velocity(&self, profiles: &RangeProfiles) -> RvCube {
        spectrum::velocity_transform(profiles, &self.velocity_window, &self.plans.velocity)
    }

    /// Range FFT, velocity FFT and non-coherent integration in one call.
    pub fn rv_map(&self, frame: &RawFrame) -> (RvCube, RvMap) {
        let rv = self.range_velocity(&self.range_profiles(frame));
        let map = noncoherent_integrate(&rv);
        (rv, map)
    }

    /// Azimuth of one range-velocity cell, with or without TDM Doppler
    /// compensation.
    pub fn cell_azimuth(&self, rv: &RvCube, range_bin: usize, velocity_bin: usize, compensate: bool) -> (usize, f64) {
        let snapshot = rv.snapshot(range_bin, velocity_bin);
        let offset = velocity_bin as i64 - (self.params.velocity_fft / 2) as i64;
        let values = if compensate {
            tdm_compensate(&snapshot, &self.array, doppler_phase_of_bin(offset, self.params.velocity_fft))
        } else {
            snapshot
        };
        let bin = angle::azimuth_spectrum_peak(&values, &self.layout, &self.plans.azimuth);
        (bin, self.scale().azimuth_deg(bin as f64))
    }

    /// CFAR detection, peak grouping and compensated azimuth estimation.
    pub fn detect(&self, frame: &RawFrame) -> Vec<Detection> {
        let (rv, map) = self.rv_map(frame);
        self.detect_in(&rv, &map)
    }

    pub fn detect_in(&self, rv: &RvCube, map: &RvMap) -> Vec<Detection> {
        let scale = self.scale();
        let hits = peak_group(&detect_targets(map, &self.params.cfar));
        hits.iter()
            .map(|h| {
                let (azimuth_bin, azimuth_deg) = self.cell_azimuth(rv, h.range_bin, h.velocity_bin, true);
                Detection {
                    range_bin: h.range_bin,
                    velocity_bin: h.velocity_bin,
                    azimuth_bin,
                    range_m: scale.range_m(h.range_bin as f64),
                    velocity_mps: scale.velocity_mps(h.velocity_bin as f64),
                    azimuth_deg,
                    amplitude: h.amplitude,
                }
            })
            .collect()
    }

    pub fn rae_image(&self, frame: &RawFrame, mode: ChirpMode) -> RaeMap {
        let profiles = self.range_profiles(frame);
        self.rae_from_profiles(&profiles, mode, 0..self.params.range_fft)
    }

    /// RAE magnitudes for a subset of range bins; other bins stay zero.
    pub fn rae_from_profiles(
        &self,
        profiles: &RangeProfiles,
        mode: ChirpMode,
        range_bins: std::ops::Range<usize>,
    ) -> RaeMap {
        angle::rae_from_profiles(profiles, &self.layout, mode, range_bins, &self.plans)
    }

    pub fn ra_image(&self, frame: &RawFrame, mode: ChirpMode) -> RaMap {
        let profiles = self.range_profiles(frame);
        angle::ra_from_profiles(&profiles, &self.layout, mode, &self.plans)
    }

    /// Full chain for one frame: detections, clusters and normalized cubes.
    pub fn process(&self, frame: &RawFrame, mode: ChirpMode, frame_index: u64) -> FrameResult {
        let profiles = self.range_profiles(frame);
        let rv = self.range_velocity(&profiles);
        let map = noncoherent_integrate(&rv);
        let detections = self.detect_in(&rv, &map);
        let clusters = cluster_detections(&detections, &self.params.cluster, &self.scale());
        let cubes = if clusters.is_empty() {
            Vec::new()
        } else {
            let half = self.params.cube.range / 2;
            let lo = clusters.iter().map(|c| c.range_bin.round() as usize).min().unwrap_or(0).saturating_sub(half);
            let hi = clusters
                .iter()
                .map(|c| c.range_bin.round() as usize + self.params.cube.range)
                .max()
                .unwrap_or(0)
                .min(self.params.range_fft);
            let rae = self.rae_from_profiles(&profiles, mode, lo..hi);
            crop_cubes(&rae, &clusters, &self.params.cube, self.params.normalization, frame_index)
        };
        FrameResult {
            detections,
            clusters,
            cubes,
        }
    }
}

pub(crate) fn fft_shift_index(k: usize, n: usize) -> usize {
    (k + n / 2) % n
}

pub(crate) fn zero() -> Complex32 {
    Complex32::new(0.0, 0.0)
}
