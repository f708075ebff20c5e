//! Central-difference check of every parameter kind of a network.

use std::collections::BTreeMap;

use rand::Rng;

use crate::loss::FocalParams;
use crate::network::{Network, Sample};

/// Parameter kinds compared separately.
pub fn parameter_kind(name: &str) -> Option<&'static str> {
    let mut parts = name.rsplit('.');
    let last = parts.next()?;
    let layer = parts.next()?;
    let in_block = name.starts_with("conv") && name.contains('_');
    Some(match (layer, last) {
        ("proj", "weight") => "projection",
        ("conv2", "weight") if in_block => "conv3x3x3",
        ("conv1" | "conv3", "weight") if in_block => "conv1x1x1",
        ("conv1", "weight") => "stem",
        (_, "bias") if name.starts_with("conv") => "conv_bias",
        (_, "weight") if name.starts_with("location") => "location_fc",
        (_, "weight") if name.starts_with("head") => "head_fc",
        (_, "bias") => "fc_bias",
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KindResult {
    pub checked: usize,
    pub worst_relative_error: f64,
    /// Draws skipped because a ReLU or max-pool switch fell inside the
    /// difference interval.
    pub kinks: usize,
}

/// Compares analytic gradients of the summed focal loss against central
/// differences for up to `per_kind` random parameters of each kind. Draws
/// whose gradient is below `1e-6` are skipped.
///
/// Biases should be non-zero: with zero biases voxels whose inputs are all
/// zero sit exactly on a ReLU kink.
pub fn check_gradients(
    net: &mut Network,
    sample: &Sample,
    labels: [bool; 3],
    focal: &FocalParams,
    per_kind: usize,
    rng: &mut impl Rng,
) -> BTreeMap<&'static str, KindResult> {
    net.zero_grad();
    let trace = net.forward(sample).expect("sample matches the network input");
    net.backward(&trace, labels, focal, 1.0);
    let loss = |n: &Network| n.loss(&n.forward(sample).unwrap(), labels, focal);
    let kinds: Vec<(Option<&'static str>, usize)> = net.params().iter().map(|p| (parameter_kind(&p.name), p.len())).collect();
    let mut out: BTreeMap<&'static str, KindResult> = BTreeMap::new();
    let h = 1e-6;
    for _ in 0..4 * per_kind {
        for (pi, &(kind, len)) in kinds.iter().enumerate() {
            let Some(kind) = kind else { continue };
            if out.get(kind).is_some_and(|r| r.checked >= per_kind) {
                continue;
            }
            let j = rng.random_range(0..len);
            let analytic = net.params()[pi].grad[j];
            if analytic.abs() < 1e-6 {
                continue;
            }
            let mut central = |h: f64| {
                let orig = net.params()[pi].value[j];
                net.params_mut()[pi].value[j] = orig + h;
                let up = loss(net);
                net.params_mut()[pi].value[j] = orig - h;
                let down = loss(net);
                net.params_mut()[pi].value[j] = orig;
                (up - down) / (2.0 * h)
            };
            let (coarse, numeric) = (central(4.0 * h), central(h));
            let entry = out.entry(kind).or_default();
            if (coarse - numeric).abs() > 1e-4 * numeric.abs() {
                entry.kinks += 1;
                continue;
            }
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
            entry.checked += 1;
            entry.worst_relative_error = entry.worst_relative_error.max(rel);
        }
    }
    out
}

/// Gives every bias a small random value and scales the output layers so
/// the heads are not flat; used before a gradient check.
pub fn perturb_for_check(net: &mut Network, rng: &mut impl Rng) {
    for p in net.params_mut() {
        if p.name.ends_with("bias") {
            p.value.iter_mut().for_each(|v| *v = rng.random_range(-0.05..0.05));
        } else if p.name.ends_with("fc4.weight") {
            p.value.iter_mut().for_each(|v| *v *= 50.0);
        }
    }
}
