use serde::{Deserialize, Serialize};

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const PROB_CLAMP: f64 = 1e-7;

/// Focusing exponent and `(w1, w2)` weights per class, laptop, phone, knife.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalParams {
    pub alpha: f64,
    pub weights: [[f64; 2]; 3],
}

impl FocalParams {
    pub fn open_carry() -> Self {
        Self::from_flat(2.0, [1.0, 1.0, 20.0, 1.0, 1.0, 1.0])
    }

    pub fn concealed() -> Self {
        Self::from_flat(2.0, [2.0, 1.0, 20.0, 1.0, 1.0, 1.0])
    }

    /// Plain binary cross-entropy on every head.
    pub fn cross_entropy() -> Self {
        Self::from_flat(0.0, [1.0; 6])
    }

    /// `[w1_laptop, w2_laptop, w1_phone, w2_phone, w1_knife, w2_knife]`.
    pub fn from_flat(alpha: f64, w: [f64; 6]) -> Self {
        Self {
            alpha,
            weights: [[w[0], w[1]], [w[2], w[3]], [w[4], w[5]]],
        }
    }

    pub fn is_valid(&self) -> bool {
        self.alpha >= 0.0 && self.weights.iter().flatten().all(|&w| w > 0.0)
    }
}

impl Default for FocalParams {
    fn default() -> Self {
        Self::open_carry()
    }
}

/// `σ(d)` without overflow for large `|d|`.
pub fn sigmoid(d: f64) -> f64 {
    if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    }
}

/// Two-logit softmax probability of the first logit.
pub fn softmax_first(o1: f64, o2: f64) -> f64 {
    sigmoid(o1 - o2)
}

/// `FL(p) = -w1·y·(1-p)^α·log p - w2·(1-y)·p^α·log(1-p)` and `dFL/dp`,
/// both evaluated at the clamped probability.
pub fn focal_loss(p: f64, y: bool, w1: f64, w2: f64, alpha: f64) -> (f64, f64) {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    if y {
        let q = 1.0 - p;
        let m = q.powf(alpha);
        let loss = -w1 * m * p.ln();
        let dm = if alpha == 0.0 { 0.0 } else { -alpha * q.powf(alpha - 1.0) };
        (loss, -w1 * (dm * p.ln() + m / p))
    } else {
        let q = 1.0 - p;
        let m = p.powf(alpha);
        let loss = -w2 * m * q.ln();
        let dm = if alpha == 0.0 { 0.0 } else { alpha * p.powf(alpha - 1.0) };
        (loss, -w2 * (dm * q.ln() - m / q))
    }
}

/// Loss and its gradient with respect to the logit difference `o1 - o2`.
pub fn focal_loss_logit(diff: f64, y: bool, w1: f64, w2: f64, alpha: f64) -> (f64, f64) {
    let p = sigmoid(diff).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let (loss, dp) = focal_loss(p, y, w1, w2, alpha);
    (loss, dp * p * (1.0 - p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_weights() {
        let o = FocalParams::open_carry();
        assert_eq!(o.alpha, 2.0);
        assert_eq!(o.weights, [[1.0, 1.0], [20.0, 1.0], [1.0, 1.0]]);
        assert_eq!(FocalParams::concealed().weights[0], [2.0, 1.0]);
        assert!(o.is_valid());
    }

    #[test]
    fn softmax_edge_cases() {
        assert_eq!(softmax_first(0.3, 0.3), 0.5);
        let p = softmax_first(20.0, 0.0);
        assert!(p >= 1.0 - 1e-8 && p <= 1.0);
        assert!(softmax_first(800.0, -800.0).is_finite());
        assert!(softmax_first(-800.0, 800.0) >= 0.0);
    }

    #[test]
    fn confident_correct_is_near_zero() {
        assert!(focal_loss(1.0, true, 1.0, 1.0, 2.0).0 < 1e-12);
        assert!(focal_loss(0.0, false, 1.0, 1.0, 2.0).0 < 1e-12);
        assert!(focal_loss(0.999999, true, 1.0, 1.0, 0.0).0 < 1e-5);
    }

    #[test]
    fn saturated_wrong_prediction_still_has_gradient() {
        let (_, g) = focal_loss_logit(-40.0, true, 1.0, 1.0, 2.0);
        assert!(g < -0.5);
    }

    proptest! {
        #[test]
        fn alpha_zero_is_cross_entropy(p in 1e-6f64..(1.0 - 1e-6), y in any::<bool>()) {
            let (fl, _) = focal_loss(p, y, 1.0, 1.0, 0.0);
            let bce = if y { -p.ln() } else { -(1.0 - p).ln() };
            prop_assert!((fl - bce).abs() <= 1e-9);
        }

        #[test]
        fn nonnegative(p in 0.0f64..=1.0, y in any::<bool>(), alpha in 0.0f64..5.0, w1 in 0.01f64..30.0, w2 in 0.01f64..30.0) {
            prop_assert!(focal_loss(p, y, w1, w2, alpha).0 >= 0.0);
        }

        #[test]
        fn gradient_matches_difference(p in 0.01f64..0.99, y in any::<bool>(), alpha in 0.0f64..4.0) {
            let h = 1e-6;
            let (_, g) = focal_loss(p, y, 2.0, 3.0, alpha);
            let num = (focal_loss(p + h, y, 2.0, 3.0, alpha).0 - focal_loss(p - h, y, 2.0, 3.0, alpha).0) / (2.0 * h);
            prop_assert!((g - num).abs() <= 1e-5 * num.abs().max(1.0));
            let d = (p / (1.0 - p)).ln();
            let (_, gd) = focal_loss_logit(d, y, 2.0, 3.0, alpha);
            let numd = (focal_loss_logit(d + h, y, 2.0, 3.0, alpha).0 - focal_loss_logit(d - h, y, 2.0, 3.0, alpha).0) / (2.0 * h);
            prop_assert!((gd - numd).abs() <= 1e-5 * numd.abs().max(1.0));
        }

        #[test]
        fn shift_invariant(o1 in -50.0f64..50.0, o2 in -50.0f64..50.0, c in -100.0f64..100.0) {
            prop_assert!((softmax_first(o1, o2) - softmax_first(o1 + c, o2 + c)).abs() < 1e-12);
        }
    }
}
