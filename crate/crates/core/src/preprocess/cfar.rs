//! One-dimensional cell-averaging CFAR applied separately along the Doppler
//! and range axes of the range-velocity map.

use serde::{Deserialize, Serialize};

use super::RvMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfarParams {
    pub p_fa: f64,
    /// Training cells on each side of the cell under test.
    pub training_cells: usize,
    /// Guard cells on each side of the cell under test.
    pub guard_cells: usize,
}

impl Default for CfarParams {
    fn default() -> Self {
        Self {
            p_fa: 1e-4,
            training_cells: 16,
            guard_cells: 4,
        }
    }
}

impl CfarParams {
    pub fn is_valid(&self) -> bool {
        self.p_fa > 0.0 && self.p_fa < 1.0 && self.training_cells >= 1
    }

    /// Threshold multiplier on the training-cell mean for `n` training cells:
    /// `n · (p_fa^(-1/n) - 1)`. Exact for exponentially distributed
    /// (square-law) noise cells.
    pub fn scale(&self, n: usize) -> f64 {
        let n = n as f64;
        n * (self.p_fa.powf(-1.0 / n) - 1.0)
    }
}

/// Candidate cell from the two CFAR passes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfarHit {
    pub range_bin: usize,
    pub velocity_bin: usize,
    pub amplitude: f64,
}

/// Runs CA-CFAR along a single profile. With `circular` the window wraps
/// around the ends (Doppler axis); otherwise cells near the edges use the
/// training cells that exist and the threshold multiplier is recomputed for
/// that count.
pub fn ca_cfar_1d(values: &[f64], params: &CfarParams, circular: bool) -> Vec<bool> {
    let n = values.len();
    let t = params.training_cells;
    let g = params.guard_cells;
    let mut out = vec![false; n];
    if n == 0 {
        return out;
    }
    if circular {
        // Windows overlapping themselves would double-count cells.
        if 2 * (t + g) + 1 > n {
            return out;
        }
        let alpha = params.scale(2 * t);
        for (i, hit) in out.iter_mut().enumerate() {
            let mut sum = 0.0;
            for off in (g + 1)..=(g + t) {
                sum += values[(i + off) % n] + values[(i + n - off) % n];
            }
            let mean = sum / (2 * t) as f64;
            *hit = values[i] > alpha * mean;
        }
    } else {
        for (i, hit) in out.iter_mut().enumerate() {
            let mut sum = 0.0;
            let mut count = 0usize;
            for off in (g + 1)..=(g + t) {
                if i >= off {
                    sum += values[i - off];
                    count += 1;
                }
                if i + off < n {
                    sum += values[i + off];
                    count += 1;
                }
            }
            if count == 0 {
                continue;
            }
            let mean = sum / count as f64;
            *hit = values[i] > params.scale(count) * mean;
        }
    }
    out
}

/// Cells that pass both the Doppler-axis and the range-axis CFAR.
pub fn detect_targets(map: &RvMap, params: &CfarParams) -> Vec<CfarHit> {
    let (nr, nv) = (map.range_bins, map.velocity_bins);
    let mut doppler_pass = vec![false; nr * nv];
    for r in 0..nr {
        let row = &map.values[r * nv..(r + 1) * nv];
        for (v, hit) in ca_cfar_1d(row, params, true).into_iter().enumerate() {
            doppler_pass[r * nv + v] = hit;
        }
    }
    let mut hits = Vec::new();
    let mut column = vec![0.0; nr];
    for v in 0..nv {
        for (r, c) in column.iter_mut().enumerate() {
            *c = map.values[r * nv + v];
        }
        for (r, hit) in ca_cfar_1d(&column, params, false).into_iter().enumerate() {
            if hit && doppler_pass[r * nv + v] {
                hits.push(CfarHit {
                    range_bin: r,
                    velocity_bin: v,
                    amplitude: map.get(r, v),
                });
            }
        }
    }
    hits.sort_by_key(|h| (h.range_bin, h.velocity_bin));
    hits
}

/// Keeps a hit unless another hit inside its 3x3 range-velocity
/// neighbourhood is strictly stronger. Equal neighbours are both kept.
pub fn peak_group(hits: &[CfarHit]) -> Vec<CfarHit> {
    use std::collections::HashMap;
    let index: HashMap<(usize, usize), f64> = hits.iter().map(|h| ((h.range_bin, h.velocity_bin), h.amplitude)).collect();
    hits.iter()
        .filter(|h| {
            for dr in -1i64..=1 {
                for dv in -1i64..=1 {
                    if dr == 0 && dv == 0 {
                        continue;
                    }
                    let r = h.range_bin as i64 + dr;
                    let v = h.velocity_bin as i64 + dv;
                    if r < 0 || v < 0 {
                        continue;
                    }
                    if let Some(&a) = index.get(&(r as usize, v as usize)) {
                        if a > h.amplitude {
                            return false;
                        }
                    }
                }
            }
            true
        })
        .copied()
        .collect()
}
