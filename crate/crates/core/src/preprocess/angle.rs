//! TDM phase compensation, azimuth estimation and angle imaging over the
//! 2D virtual array.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex32;
use rustfft::{Fft, FftPlanner};

use super::spectrum::RangeProfiles;
use super::{fft_shift_index, zero, ChirpMode, Plans, PreprocessParams};
use crate::radar::VirtualArray;
use crate::sim::RawFrame;

/// Virtual elements arranged on a (row, column) grid. Cells covered by
/// several elements average them; uncovered cells are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayLayout {
    pub h_min: i32,
    pub v_min: i32,
    pub cols: usize,
    pub rows: usize,
    /// Element indices per cell, row-major.
    pub cells: Vec<Vec<usize>>,
    /// Grid row holding the longest horizontal line.
    pub azimuth_row: usize,
    /// Rows that contain at least one element.
    pub occupied_rows: Vec<usize>,
}

impl ArrayLayout {
    pub fn new(array: &VirtualArray) -> Self {
        let h_min = array.elements.iter().map(|e| e.position.h).min().unwrap_or(0);
        let v_min = array.elements.iter().map(|e| e.position.v).min().unwrap_or(0);
        let cols = array.horizontal_extent();
        let rows = array.vertical_extent();
        let mut cells = vec![Vec::new(); rows * cols];
        for (i, e) in array.elements.iter().enumerate() {
            let r = (e.position.v - v_min) as usize;
            let c = (e.position.h - h_min) as usize;
            cells[r * cols + c].push(i);
        }
        let occupied_rows = (0..rows).filter(|r| cells[r * cols..(r + 1) * cols].iter().any(|c| !c.is_empty())).collect();
        Self {
            h_min,
            v_min,
            cols,
            rows,
            cells,
            azimuth_row: (array.azimuth_row() - v_min) as usize,
            occupied_rows,
        }
    }

    #[inline]
    fn cell_value(&self, row: usize, col: usize, value: impl Fn(usize) -> Complex32) -> Complex32 {
        let members = &self.cells[row * self.cols + col];
        if members.is_empty() {
            return zero();
        }
        let sum: Complex32 = members.iter().map(|&i| value(i)).sum();
        sum / members.len() as f32
    }
}

/// Doppler phase advance per chirp period of an FFT-shifted velocity bin
/// offset (bin minus the zero-velocity centre bin).
pub fn doppler_phase_of_bin(bin_offset: i64, velocity_fft: usize) -> f64 {
    2.0 * PI * bin_offset as f64 / velocity_fft as f64
}

/// Removes the motion-induced TDM phase: the element transmitted in slot
/// `m` of `N_T` is rotated by `-m·Δφ_v/N_T`. For two transmitters this is
/// the familiar half-Doppler correction of the second one.
pub fn tdm_compensate(values: &[Complex32], array: &VirtualArray, doppler_phase: f64) -> Vec<Complex32> {
    let nt = array.num_tx as f64;
    values
        .iter()
        .zip(&array.elements)
        .map(|(z, e)| {
            let phase = -(e.tx as f64) * doppler_phase / nt;
            z * Complex32::from_polar(1.0, phase as f32)
        })
        .collect()
}

/// FFT-shifted azimuth spectrum across the horizontal row.
pub(crate) fn azimuth_spectrum(values: &[Complex32], layout: &ArrayLayout, plan: &Arc<dyn Fft<f32>>) -> Vec<f32> {
    let n = plan.len();
    let mut buf = vec![zero(); n];
    for (col, b) in buf.iter_mut().enumerate().take(layout.cols) {
        *b = layout.cell_value(layout.azimuth_row, col, |i| values[i]);
    }
    plan.process(&mut buf);
    let mut out = vec![0.0; n];
    for (k, z) in buf.iter().enumerate() {
        out[fft_shift_index(k, n)] = z.norm();
    }
    out
}

pub(crate) fn azimuth_spectrum_peak(values: &[Complex32], layout: &ArrayLayout, plan: &Arc<dyn Fft<f32>>) -> usize {
    let spec = azimuth_spectrum(values, layout, plan);
    (0..spec.len()).max_by(|&a, &b| spec[a].total_cmp(&spec[b])).unwrap_or(0)
}

/// Azimuth bin and angle from compensated element values using an
/// `fft_len`-point FFT over the horizontal row.
pub fn estimate_azimuth(values: &[Complex32], layout: &ArrayLayout, fft_len: usize) -> (usize, f64) {
    let plan = FftPlanner::new().plan_fft_forward(fft_len);
    let bin = azimuth_spectrum_peak(values, layout, &plan);
    let s = (2.0 * (bin as f64 - (fft_len / 2) as f64) / fft_len as f64).clamp(-1.0, 1.0);
    (bin, s.asin().to_degrees())
}

/// Range x azimuth x elevation magnitudes, laid out (range, azimuth,
/// elevation), both angle axes FFT-shifted.
#[derive(Debug, Clone, PartialEq)]
pub struct RaeMap {
    pub range_bins: usize,
    pub azimuth_bins: usize,
    pub elevation_bins: usize,
    pub values: Vec<f32>,
}

impl RaeMap {
    #[inline]
    pub fn index(&self, r: usize, a: usize, e: usize) -> usize {
        (r * self.azimuth_bins + a) * self.elevation_bins + e
    }

    #[inline]
    pub fn get(&self, r: usize, a: usize, e: usize) -> f32 {
        self.values[self.index(r, a, e)]
    }

    pub fn argmax(&self) -> (usize, usize, usize) {
        let i = (0..self.values.len())
            .max_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
            .unwrap_or(0);
        let e = i % self.elevation_bins;
        let a = (i / self.elevation_bins) % self.azimuth_bins;
        (i / (self.elevation_bins * self.azimuth_bins), a, e)
    }
}

/// Range x azimuth magnitudes with one channel per vertical row of the
/// virtual array, laid out (range, azimuth, row).
#[derive(Debug, Clone, PartialEq)]
pub struct RaMap {
    pub range_bins: usize,
    pub azimuth_bins: usize,
    pub channels: usize,
    pub values: Vec<f32>,
}

impl RaMap {
    #[inline]
    pub fn get(&self, r: usize, a: usize, ch: usize) -> f32 {
        self.values[(r * self.azimuth_bins + a) * self.channels + ch]
    }
}

fn chirp_list(mode: ChirpMode, num_chirps: usize) -> Vec<usize> {
    match mode {
        ChirpMode::Single(c) => {
            assert!(c < num_chirps, "chirp {c} out of range ({num_chirps} chirps)");
            vec![c]
        }
        ChirpMode::AverageAll => (0..num_chirps).collect(),
    }
}

pub(crate) fn rae_from_profiles(
    profiles: &RangeProfiles,
    layout: &ArrayLayout,
    mode: ChirpMode,
    range_bins: std::ops::Range<usize>,
    plans: &Plans,
) -> RaeMap {
    let na = plans.azimuth.len();
    let ne = plans.elevation.len();
    let nr = profiles.range_bins;
    let mut map = RaeMap {
        range_bins: nr,
        azimuth_bins: na,
        elevation_bins: ne,
        values: vec![0.0; nr * na * ne],
    };
    let chirps = chirp_list(mode, profiles.num_chirps);
    let weight = 1.0 / chirps.len() as f32;
    // az_spec[row * na + shifted azimuth bin]
    let mut az_spec = vec![zero(); layout.rows * na];
    let mut az_buf = vec![zero(); na];
    let mut el_buf = vec![zero(); ne];
    let mut az_scratch = vec![zero(); plans.azimuth.get_inplace_scratch_len()];
    let mut el_scratch = vec![zero(); plans.elevation.get_inplace_scratch_len()];
    for r in range_bins.start..range_bins.end.min(nr) {
        for &c in &chirps {
            az_spec.iter_mut().for_each(|z| *z = zero());
            for &row in &layout.occupied_rows {
                az_buf.iter_mut().for_each(|z| *z = zero());
                for (col, b) in az_buf.iter_mut().enumerate().take(layout.cols) {
                    *b = layout.cell_value(row, col, |i| profiles.get(c, i, r));
                }
                plans.azimuth.process_with_scratch(&mut az_buf, &mut az_scratch);
                for (k, z) in az_buf.iter().enumerate() {
                    az_spec[row * na + fft_shift_index(k, na)] = *z;
                }
            }
            for a in 0..na {
                el_buf.iter_mut().for_each(|z| *z = zero());
                for (row, b) in el_buf.iter_mut().enumerate().take(layout.rows) {
                    *b = az_spec[row * na + a];
                }
                plans.elevation.process_with_scratch(&mut el_buf, &mut el_scratch);
                let base = map.index(r, a, 0);
                for (k, z) in el_buf.iter().enumerate() {
                    map.values[base + fft_shift_index(k, ne)] += z.norm() * weight;
                }
            }
        }
    }
    map
}

pub(crate) fn ra_from_profiles(profiles: &RangeProfiles, layout: &ArrayLayout, mode: ChirpMode, plans: &Plans) -> RaMap {
    let na = plans.azimuth.len();
    let nr = profiles.range_bins;
    let channels = layout.occupied_rows.len();
    let mut map = RaMap {
        range_bins: nr,
        azimuth_bins: na,
        channels,
        values: vec![0.0; nr * na * channels],
    };
    let chirps = chirp_list(mode, profiles.num_chirps);
    let weight = 1.0 / chirps.len() as f32;
    let mut buf = vec![zero(); na];
    let mut scratch = vec![zero(); plans.azimuth.get_inplace_scratch_len()];
    for r in 0..nr {
        for &c in &chirps {
            for (ch, &row) in layout.occupied_rows.iter().enumerate() {
                buf.iter_mut().for_each(|z| *z = zero());
                for (col, b) in buf.iter_mut().enumerate().take(layout.cols) {
                    *b = layout.cell_value(row, col, |i| profiles.get(c, i, r));
                }
                plans.azimuth.process_with_scratch(&mut buf, &mut scratch);
                for (k, z) in buf.iter().enumerate() {
                    let a = fft_shift_index(k, na);
                    map.values[(r * na + a) * channels + ch] += z.norm() * weight;
                }
            }
        }
    }
    map
}

fn plans_for(params: &PreprocessParams) -> Plans {
    let mut planner = FftPlanner::new();
    Plans {
        range: planner.plan_fft_forward(params.range_fft),
        velocity: planner.plan_fft_forward(params.velocity_fft),
        azimuth: planner.plan_fft_forward(params.azimuth_fft),
        elevation: planner.plan_fft_forward(params.elevation_fft),
    }
}

/// Full RAE magnitude map of one frame (no Doppler compensation).
pub fn rae_image(frame: &RawFrame, array: &VirtualArray, params: &PreprocessParams, mode: ChirpMode) -> RaeMap {
    let plans = plans_for(params);
    let layout = ArrayLayout::new(array);
    let window = params.range_window.coefficients(frame.num_samples);
    let profiles = super::spectrum::range_profiles(frame, &window, &plans.range);
    rae_from_profiles(&profiles, &layout, mode, 0..params.range_fft, &plans)
}

/// Range-azimuth magnitudes per vertical row, without the elevation FFT.
pub fn ra_image(frame: &RawFrame, array: &VirtualArray, params: &PreprocessParams, mode: ChirpMode) -> RaMap {
    let plans = plans_for(params);
    let layout = ArrayLayout::new(array);
    let window = params.range_window.coefficients(frame.num_samples);
    let profiles = super::spectrum::range_profiles(frame, &window, &plans.range);
    ra_from_profiles(&profiles, &layout, mode, &plans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radar::{virtual_array, ArrayGeometry, Position, RadarConfig};
    use crate::sim::{EchoSimulator, Scatterer, Scene};
    use num_complex::Complex64;

    fn default_array() -> VirtualArray {
        virtual_array(&ArrayGeometry::default())
    }

    /// Ideal far-field snapshot on the virtual array.
    fn steering(array: &VirtualArray, az_deg: f64) -> Vec<Complex32> {
        let s = az_deg.to_radians().sin();
        array
            .elements
            .iter()
            .map(|e| Complex32::from_polar(1.0, (PI * e.position.h as f64 * s) as f32))
            .collect()
    }

    /// Brute-force DFT magnitude over the horizontal row at shifted bin `b`.
    fn row_dft(values: &[Complex32], layout: &ArrayLayout, n: usize, b: usize) -> f64 {
        let k = (b + n - n / 2) % n;
        (0..layout.cols)
            .map(|col| {
                let v = layout.cell_value(layout.azimuth_row, col, |i| values[i]);
                Complex64::new(v.re as f64, v.im as f64) * Complex64::from_polar(1.0, -2.0 * PI * (k * col) as f64 / n as f64)
            })
            .sum::<Complex64>()
            .norm()
    }

    #[test]
    fn layout_of_default_array() {
        let layout = ArrayLayout::new(&default_array());
        assert_eq!((layout.rows, layout.cols, layout.azimuth_row), (6, 86, 0));
        assert_eq!(layout.occupied_rows, vec![0, 1, 2, 3, 4, 5]);
        let covered = (0..86).filter(|&c| !layout.cells[c].is_empty()).count();
        assert_eq!(covered, 86);
        assert_eq!(layout.cells[75].len(), 2); // TX 4 and TX 5 overlap
    }

    #[test]
    fn broadside_peaks_at_centre() {
        let array = default_array();
        let layout = ArrayLayout::new(&array);
        let (bin, deg) = estimate_azimuth(&steering(&array, 0.0), &layout, 86);
        assert_eq!(bin, 43);
        assert_eq!(deg, 0.0);
    }

    #[test]
    fn thirty_degrees_lands_on_a_bin_tie() {
        // 86·sin30°/2 = 21.5: bins 43±21 and 43±22 are equally strong.
        let array = default_array();
        let layout = ArrayLayout::new(&array);
        for (az, pair) in [(30.0, [64usize, 65]), (-30.0, [21, 22])] {
            let v = steering(&array, az);
            let (bin, _) = estimate_azimuth(&v, &layout, 86);
            assert!(pair.contains(&bin), "{az}: {bin}");
            let (a, b) = (row_dft(&v, &layout, 86, pair[0]), row_dft(&v, &layout, 86, pair[1]));
            assert!((a - b).abs() < 1e-6 * a, "{a} {b}");
        }
    }

    #[test]
    fn off_tie_angles_match_brute_force_argmax() {
        let array = default_array();
        let layout = ArrayLayout::new(&array);
        for az in [-47.0, -31.0, -12.5, 3.0, 29.0, 31.0, 55.0] {
            let v = steering(&array, az);
            let (bin, deg) = estimate_azimuth(&v, &layout, 86);
            let oracle = (0..86).max_by(|&a, &b| row_dft(&v, &layout, 86, a).total_cmp(&row_dft(&v, &layout, 86, b))).unwrap();
            assert_eq!(bin, oracle, "{az}");
            let expected = (43.0 + 86.0 * az.to_radians().sin() / 2.0).round() as usize;
            assert_eq!(bin, expected, "{az}");
            assert!((deg - az).abs() < 2.0);
        }
        // mirror symmetry
        let p = estimate_azimuth(&steering(&array, 31.0), &layout, 86).0;
        let m = estimate_azimuth(&steering(&array, -31.0), &layout, 86).0;
        assert_eq!(p - 43, 43 - m);
    }

    #[test]
    fn zero_doppler_compensation_is_identity() {
        let array = default_array();
        let v = steering(&array, 12.0);
        assert_eq!(tdm_compensate(&v, &array, 0.0), v);
    }

    #[test]
    fn two_tx_half_doppler_rule() {
        let g = ArrayGeometry {
            tx_positions: vec![Position::new(0, 0), Position::new(4, 0)],
            rx_positions: (0..4).map(|h| Position::new(h, 0)).collect(),
        };
        let array = virtual_array(&g);
        let ones = vec![Complex32::new(1.0, 0.0); array.len()];
        let out = tdm_compensate(&ones, &array, 0.2);
        for (z, e) in out.iter().zip(&array.elements) {
            let expected = if e.tx == 1 { -0.1 } else { 0.0 };
            assert!((z.arg() as f64 - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn rae_peak_for_boresight_target() {
        let cfg = RadarConfig::default();
        let g = ArrayGeometry::default();
        let sim = EchoSimulator::new(&cfg, &g).unwrap();
        let scene = Scene {
            scatterers: vec![Scatterer::new(1.0, 0.0, 0.0, 0.0, 1.0)],
            noise_std: 0.0,
            rng_seed: 0,
        };
        let frame = sim.simulate_frame(&scene, 0).frame;
        let params = PreprocessParams::default();
        let array = virtual_array(&g);
        let avg = rae_image(&frame, &array, &params, ChirpMode::AverageAll);
        assert_eq!((avg.range_bins, avg.azimuth_bins, avg.elevation_bins), (256, 86, 16));
        assert_eq!(avg.argmax(), (17, 43, 8));
        let one = rae_image(&frame, &array, &params, ChirpMode::Single(7));
        for (a, b) in avg.values.iter().zip(&one.values) {
            assert!((a - b).abs() <= 1e-4 * a.abs().max(1.0), "{a} {b}");
        }
    }

    #[test]
    fn elevated_target_moves_off_centre_row() {
        let cfg = RadarConfig::default();
        let g = ArrayGeometry::default();
        let sim = EchoSimulator::new(&cfg, &g).unwrap();
        let scene = Scene {
            scatterers: vec![Scatterer::new(3.0, 0.0, 0.0, 30.0, 1.0)],
            noise_std: 0.0,
            rng_seed: 0,
        };
        let frame = sim.simulate_frame(&scene, 0).frame;
        let map = rae_image(&frame, &virtual_array(&g), &PreprocessParams::default(), ChirpMode::Single(0));
        let (_, _, e) = map.argmax();
        // sin30° = 0.5 -> 16·0.5/2 = 4 bins above centre
        assert_eq!(e, 12);
    }

    #[test]
    fn ra_variant_shape_and_agreement() {
        let cfg = RadarConfig::default();
        let g = ArrayGeometry::default();
        let sim = EchoSimulator::new(&cfg, &g).unwrap();
        let array = virtual_array(&g);
        let params = PreprocessParams::default();
        let scene = Scene {
            scatterers: vec![Scatterer::new(2.5, 0.0, -8.0, 0.0, 1.0)],
            noise_std: 0.5,
            rng_seed: 4,
        };
        let frame = sim.simulate_frame(&scene, 0).frame;
        let ra = ra_image(&frame, &array, &params, ChirpMode::Single(0));
        assert_eq!((ra.range_bins, ra.azimuth_bins, ra.channels), (256, 86, 6));
        let rae = rae_image(&frame, &array, &params, ChirpMode::Single(0));

        // Pearson correlation of the elevation-summed RAE and channel-summed RA.
        let n = 256 * 86;
        let x: Vec<f64> = (0..n).map(|i| (0..16).map(|e| rae.values[i * 16 + e] as f64).sum()).collect();
        let y: Vec<f64> = (0..n).map(|i| (0..6).map(|c| ra.values[i * 6 + c] as f64).sum()).collect();
        let mx = x.iter().sum::<f64>() / n as f64;
        let my = y.iter().sum::<f64>() / n as f64;
        let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        let corr = cov / (vx * vy).sqrt();
        assert!(corr > 0.9, "{corr}");
    }
}
