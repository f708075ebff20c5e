use std::sync::Arc;

use num_complex::Complex32;
use rustfft::{Fft, FftPlanner};

use super::{fft_shift_index, zero, PreprocessParams};
use crate::sim::RawFrame;

/// Range FFT output per (chirp, channel), channel = `tx * num_rx + rx`.
#[derive(Debug, Clone)]
pub struct RangeProfiles {
    pub num_chirps: usize,
    pub num_channels: usize,
    pub range_bins: usize,
    pub data: Vec<Complex32>,
}

impl RangeProfiles {
    #[inline]
    pub fn get(&self, chirp: usize, channel: usize, bin: usize) -> Complex32 {
        self.data[(chirp * self.num_channels + channel) * self.range_bins + bin]
    }

    pub fn profile(&self, chirp: usize, channel: usize) -> &[Complex32] {
        let start = (chirp * self.num_channels + channel) * self.range_bins;
        &self.data[start..start + self.range_bins]
    }
}

/// Complex range-velocity spectra per virtual channel, laid out
/// (channel, range bin, velocity bin) with zero velocity at the centre bin.
#[derive(Debug, Clone)]
pub struct RvCube {
    pub num_channels: usize,
    pub range_bins: usize,
    pub velocity_bins: usize,
    pub data: Vec<Complex32>,
}

impl RvCube {
    #[inline]
    pub fn get(&self, channel: usize, range_bin: usize, velocity_bin: usize) -> Complex32 {
        self.data[(channel * self.range_bins + range_bin) * self.velocity_bins + velocity_bin]
    }

    pub fn channel_map(&self, channel: usize) -> &[Complex32] {
        let n = self.range_bins * self.velocity_bins;
        &self.data[channel * n..(channel + 1) * n]
    }

    /// Values of one cell across all channels.
    pub fn snapshot(&self, range_bin: usize, velocity_bin: usize) -> Vec<Complex32> {
        (0..self.num_channels).map(|ch| self.get(ch, range_bin, velocity_bin)).collect()
    }
}

/// Non-negative range-velocity map, laid out (range bin, velocity bin).
#[derive(Debug, Clone, PartialEq)]
pub struct RvMap {
    pub range_bins: usize,
    pub velocity_bins: usize,
    pub values: Vec<f64>,
}

impl RvMap {
    pub fn zeros(range_bins: usize, velocity_bins: usize) -> Self {
        Self {
            range_bins,
            velocity_bins,
            values: vec![0.0; range_bins * velocity_bins],
        }
    }

    #[inline]
    pub fn get(&self, range_bin: usize, velocity_bin: usize) -> f64 {
        self.values[range_bin * self.velocity_bins + velocity_bin]
    }

    pub fn argmax(&self) -> (usize, usize) {
        let i = (0..self.values.len())
            .max_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
            .unwrap_or(0);
        (i / self.velocity_bins, i % self.velocity_bins)
    }
}

pub(crate) fn range_profiles(frame: &RawFrame, window: &[f32], plan: &Arc<dyn Fft<f32>>) -> RangeProfiles {
    let n = plan.len();
    let channels = frame.num_channels();
    let mut data = vec![zero(); frame.num_chirps * channels * n];
    let mut scratch = vec![zero(); plan.get_inplace_scratch_len()];
    for c in 0..frame.num_chirps {
        for ch in 0..channels {
            let (tx, rx) = (ch / frame.num_rx, ch % frame.num_rx);
            let out = &mut data[(c * channels + ch) * n..(c * channels + ch + 1) * n];
            for ((o, s), w) in out.iter_mut().zip(frame.chirp(c, tx, rx)).zip(window) {
                *o = s * *w;
            }
            plan.process_with_scratch(out, &mut scratch);
        }
    }
    RangeProfiles {
        num_chirps: frame.num_chirps,
        num_channels: channels,
        range_bins: n,
        data,
    }
}

pub(crate) fn velocity_transform(profiles: &RangeProfiles, window: &[f32], plan: &Arc<dyn Fft<f32>>) -> RvCube {
    let nv = plan.len();
    let (channels, nr) = (profiles.num_channels, profiles.range_bins);
    let mut data = vec![zero(); channels * nr * nv];
    let mut buf = vec![zero(); nv];
    let mut scratch = vec![zero(); plan.get_inplace_scratch_len()];
    for ch in 0..channels {
        for r in 0..nr {
            buf.iter_mut().for_each(|z| *z = zero());
            for (c, w) in window.iter().enumerate().take(profiles.num_chirps) {
                buf[c] = profiles.get(c, ch, r) * *w;
            }
            plan.process_with_scratch(&mut buf, &mut scratch);
            let out = &mut data[(ch * nr + r) * nv..(ch * nr + r + 1) * nv];
            for (k, z) in buf.iter().enumerate() {
                out[fft_shift_index(k, nv)] = *z;
            }
        }
    }
    RvCube {
        num_channels: channels,
        range_bins: nr,
        velocity_bins: nv,
        data,
    }
}

/// Range FFT along fast time then zero-padded velocity FFT along chirps,
/// per (tx, rx) channel.
pub fn range_velocity_transform(frame: &RawFrame, params: &PreprocessParams) -> RvCube {
    let mut planner = FftPlanner::new();
    let range_plan = planner.plan_fft_forward(params.range_fft);
    let velocity_plan = planner.plan_fft_forward(params.velocity_fft);
    let profiles = range_profiles(frame, &params.range_window.coefficients(frame.num_samples), &range_plan);
    velocity_transform(
        &profiles,
        &params.velocity_window.coefficients(frame.num_chirps),
        &velocity_plan,
    )
}

/// Sums the magnitude spectra of every channel.
pub fn noncoherent_integrate(rv: &RvCube) -> RvMap {
    let mut map = RvMap::zeros(rv.range_bins, rv.velocity_bins);
    for ch in 0..rv.num_channels {
        for (acc, z) in map.values.iter_mut().zip(rv.channel_map(ch)) {
            *acc += z.norm() as f64;
        }
    }
    map
}
