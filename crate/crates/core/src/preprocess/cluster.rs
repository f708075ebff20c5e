use serde::{Deserialize, Serialize};

use super::{BinScale, Detection};

/// Neighbour thresholds in bins per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub range: usize,
    pub velocity: usize,
    pub azimuth: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            range: 10,
            velocity: 8,
            azimuth: 8,
        }
    }
}

/// Mean location of one connected group of detections.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCenter {
    pub range_bin: f64,
    pub velocity_bin: f64,
    pub azimuth_bin: f64,
    pub range_m: f64,
    pub velocity_mps: f64,
    pub azimuth_deg: f64,
    /// Sum of member amplitudes.
    pub amplitude: f64,
    pub members: Vec<Detection>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn neighbours(a: &Detection, b: &Detection, p: &ClusterParams) -> bool {
    a.range_bin.abs_diff(b.range_bin) <= p.range
        && a.velocity_bin.abs_diff(b.velocity_bin) <= p.velocity
        && a.azimuth_bin.abs_diff(b.azimuth_bin) <= p.azimuth
}

/// Connected components under the per-dimension neighbour relation. The
/// output is sorted by (range, velocity, azimuth) of the centres and does
/// not depend on input order.
pub fn cluster_detections(detections: &[Detection], params: &ClusterParams, scale: &BinScale) -> Vec<ClusterCenter> {
    let mut sorted = detections.to_vec();
    sorted.sort_by(|a, b| {
        (a.range_bin, a.velocity_bin, a.azimuth_bin)
            .cmp(&(b.range_bin, b.velocity_bin, b.azimuth_bin))
            .then(a.amplitude.total_cmp(&b.amplitude))
    });
    let n = sorted.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            // sorted by range, so later entries only get farther away
            if sorted[j].range_bin - sorted[i].range_bin > params.range {
                break;
            }
            if neighbours(&sorted[i], &sorted[j], params) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<Detection>> = Default::default();
    for (i, d) in sorted.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(*d);
    }
    let mut centers: Vec<ClusterCenter> = groups
        .into_values()
        .map(|members| {
            let k = members.len() as f64;
            let range_bin = members.iter().map(|d| d.range_bin as f64).sum::<f64>() / k;
            let velocity_bin = members.iter().map(|d| d.velocity_bin as f64).sum::<f64>() / k;
            let azimuth_bin = members.iter().map(|d| d.azimuth_bin as f64).sum::<f64>() / k;
            ClusterCenter {
                range_bin,
                velocity_bin,
                azimuth_bin,
                range_m: scale.range_m(range_bin),
                velocity_mps: scale.velocity_mps(velocity_bin),
                azimuth_deg: scale.azimuth_deg(azimuth_bin),
                amplitude: members.iter().map(|d| d.amplitude).sum(),
                members,
            }
        })
        .collect();
    centers.sort_by(|a, b| {
        a.range_bin
            .total_cmp(&b.range_bin)
            .then(a.velocity_bin.total_cmp(&b.velocity_bin))
            .then(a.azimuth_bin.total_cmp(&b.azimuth_bin))
    });
    centers
}
