//! Per-class thresholding of one cube (single-shot) or of the mean
//! probability over the most recent in-track cubes (multi-shot vote).

use serde::{Deserialize, Serialize};

use crate::classes::Labels;

/// Per-class probabilities in laptop, phone, knife order.
pub type ClassProbabilities = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecisionPolicy {
    pub p_thr: f64,
    /// Number of most recent in-track cubes to vote over.
    pub n: usize,
}

impl Default for DecisionPolicy {
    fn default() -> Self {
        Self { p_thr: 0.5, n: 10 }
    }
}

impl DecisionPolicy {
    pub fn is_valid(&self) -> bool {
        self.p_thr > 0.0 && self.p_thr < 1.0 && self.n >= 1
    }
}

pub fn single_shot_decide(probs: &ClassProbabilities, policy: &DecisionPolicy) -> Labels {
    Labels(probs.map(|p| p > policy.p_thr))
}

/// Mean probability per class over the last `policy.n` entries (or all of
/// them for shorter tracks). Panics on an empty sequence.
pub fn vote_mean(sequence: &[ClassProbabilities], policy: &DecisionPolicy) -> ClassProbabilities {
    assert!(!sequence.is_empty(), "vote over an empty sequence");
    let recent = &sequence[sequence.len().saturating_sub(policy.n)..];
    let mut mean = [0.0; 3];
    for p in recent {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    mean.map(|m| m / recent.len() as f64)
}

pub fn multi_shot_vote(sequence: &[ClassProbabilities], policy: &DecisionPolicy) -> Labels {
    single_shot_decide(&vote_mean(sequence, policy), policy)
}
