use serde::{Deserialize, Serialize};

use super::{ClusterCenter, RaeMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeShape {
    pub range: usize,
    pub azimuth: usize,
    pub elevation: usize,
}

impl Default for CubeShape {
    fn default() -> Self {
        Self {
            range: 24,
            azimuth: 24,
            elevation: 10,
        }
    }
}

impl CubeShape {
    pub fn len(&self) -> usize {
        self.range * self.azimuth * self.elevation
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Normalized RAE window around one cluster centre, laid out (range,
/// azimuth, elevation).
#[derive(Debug, Clone, PartialEq)]
pub struct RaeCube {
    pub shape: CubeShape,
    pub values: Vec<f32>,
    pub center_range_m: f64,
    pub center_azimuth_deg: f64,
    pub center_range_bin: usize,
    pub center_azimuth_bin: usize,
    pub frame_index: u64,
}

impl RaeCube {
    #[inline]
    pub fn get(&self, r: usize, a: usize, e: usize) -> f32 {
        self.values[(r * self.shape.azimuth + a) * self.shape.elevation + e]
    }

    pub fn argmax(&self) -> (usize, usize, usize) {
        let i = (0..self.values.len())
            .max_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
            .unwrap_or(0);
        let s = self.shape;
        (i / (s.azimuth * s.elevation), (i / s.elevation) % s.azimuth, i % s.elevation)
    }
}

/// Crops one cube per centre. The centre voxel sits at index `size/2` in
/// range and azimuth and at the zero-elevation bin; voxels outside the map
/// are zero. Values are divided by `normalization`.
pub fn crop_cubes(
    rae: &RaeMap,
    centers: &[ClusterCenter],
    shape: &CubeShape,
    normalization: f64,
    frame_index: u64,
) -> Vec<RaeCube> {
    let inv = (1.0 / normalization) as f32;
    let e_centre = (rae.elevation_bins / 2) as i64;
    centers
        .iter()
        .map(|c| {
            let rc = c.range_bin.round() as i64;
            let ac = c.azimuth_bin.round() as i64;
            let (r0, a0, e0) = (
                rc - (shape.range / 2) as i64,
                ac - (shape.azimuth / 2) as i64,
                e_centre - (shape.elevation / 2) as i64,
            );
            let mut values = vec![0.0f32; shape.len()];
            for r in 0..shape.range {
                let rr = r0 + r as i64;
                if rr < 0 || rr >= rae.range_bins as i64 {
                    continue;
                }
                for a in 0..shape.azimuth {
                    let aa = a0 + a as i64;
                    if aa < 0 || aa >= rae.azimuth_bins as i64 {
                        continue;
                    }
                    for e in 0..shape.elevation {
                        let ee = e0 + e as i64;
                        if ee < 0 || ee >= rae.elevation_bins as i64 {
                            continue;
                        }
                        values[(r * shape.azimuth + a) * shape.elevation + e] =
                            rae.get(rr as usize, aa as usize, ee as usize) * inv;
                    }
                }
            }
            RaeCube {
                shape: *shape,
                values,
                center_range_m: c.range_m,
                center_azimuth_deg: c.azimuth_deg,
                center_range_bin: rc.max(0) as usize,
                center_azimuth_bin: ac.max(0) as usize,
                frame_index,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_map() -> RaeMap {
        let (nr, na, ne) = (256, 86, 16);
        RaeMap {
            range_bins: nr,
            azimuth_bins: na,
            elevation_bins: ne,
            values: (0..nr * na * ne).map(|i| i as f32).collect(),
        }
    }

    fn center(r: f64, a: f64) -> ClusterCenter {
        ClusterCenter {
            range_bin: r,
            velocity_bin: 32.0,
            azimuth_bin: a,
            range_m: r * 0.06,
            velocity_mps: 0.0,
            azimuth_deg: 0.0,
            amplitude: 1.0,
            members: Vec::new(),
        }
    }

    #[test]
    fn interior_crop_indices() {
        let map = ramp_map();
        let cubes = crop_cubes(&map, &[center(100.0, 43.0)], &CubeShape::default(), 1e5, 9);
        let c = &cubes[0];
        let inv = (1.0f64 / 1e5) as f32;
        assert_eq!(c.values.len(), 24 * 24 * 10);
        assert_eq!(c.frame_index, 9);
        // elevation 3..=12 with the zero-elevation bin 8 at cube index 5
        assert_eq!(c.get(12, 12, 5), map.get(100, 43, 8) * inv);
        assert_eq!(c.get(0, 0, 0), map.get(88, 31, 3) * inv);
        assert_eq!(c.get(23, 23, 9), map.get(111, 54, 12) * inv);
    }

    #[test]
    fn edge_crop_is_zero_padded() {
        let map = ramp_map();
        let c = &crop_cubes(&map, &[center(2.0, 84.0)], &CubeShape::default(), 1.0, 0)[0];
        assert_eq!(c.values.len(), 24 * 24 * 10);
        assert_eq!(c.get(0, 12, 5), 0.0); // range -10
        assert_eq!(c.get(12, 23, 5), 0.0); // azimuth 95
        assert_eq!(c.get(12, 12, 5), map.get(2, 84, 8));
        assert!(c.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn half_bin_centres_round() {
        let map = ramp_map();
        let c = &crop_cubes(&map, &[center(41.5, 20.4)], &CubeShape::default(), 1.0, 0)[0];
        assert_eq!(c.center_range_bin, 42);
        assert_eq!(c.center_azimuth_bin, 20);
    }
}
