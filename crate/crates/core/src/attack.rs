//! Closed-form worst-case perturbations for linear models under squared,
//! logistic and hinge losses.
//!
//! All three reduce to maximising or minimising `w⊺Δ` over the ball, whose
//! solution is `±ε·v/‖v‖` with `v ∈ ∂‖w‖*`.

use nalgebra::DVector;

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::norms::{dual_subgradient, scale_to_budget, NormBall};

/// A feature vector with its label (real for regression, `±1` for classification).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub x: DVector<f64>,
    pub y: f64,
}

impl LabeledSample {
    pub fn new(x: DVector<f64>, y: f64) -> Self {
        Self { x, y }
    }

    /// Builds a classification sample, rejecting labels other than `±1`.
    pub fn classification(x: DVector<f64>, y: f64) -> Result<Self> {
        check_label(y)?;
        Ok(Self { x, y })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn perturbed(&self, delta: &DVector<f64>) -> Self {
        Self {
            x: &self.x + delta,
            y: self.y,
        }
    }
}

pub(crate) fn check_label(y: f64) -> Result<()> {
    if y == 1.0 || y == -1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("classification label must be +1 or -1, got {y}")))
    }
}

/// `x ↦ w⊺x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub w: DVector<f64>,
}

impl LinearModel {
    pub fn new(w: DVector<f64>) -> Self {
        Self { w }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { w: DVector::zeros(dim) }
    }

    pub fn predict(&self, x: &DVector<f64>) -> f64 {
        self.w.dot(x)
    }
}

/// The outcome of a single-sample attack.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub delta: DVector<f64>,
    /// Loss at the perturbed sample.
    pub objective: f64,
    /// Hinge only: whether the perturbed sample still has positive loss.
    pub active: bool,
    /// The loss was constant in `Δ` (e.g. `w = 0`), so `Δ = 0` was returned.
    pub degenerate: bool,
}

pub fn squared_loss(w: &DVector<f64>, s: &LabeledSample) -> f64 {
    let r = w.dot(&s.x) - s.y;
    r * r
}

/// `log(1 + exp(-y·w⊺x))`, evaluated without overflow.
pub fn logistic_loss(w: &DVector<f64>, s: &LabeledSample) -> f64 {
    softplus(-s.y * w.dot(&s.x))
}

pub fn hinge_loss(w: &DVector<f64>, s: &LabeledSample) -> f64 {
    (1.0 - s.y * w.dot(&s.x)).max(0.0)
}

/// `log(1 + e^t)`.
pub(crate) fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `1 / (1 + e^{-t})`.
pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn validate(s: &LabeledSample, m: &LinearModel) -> Result<()> {
    ensure_dim(m.w.len(), s.x.len())?;
    ensure_finite(s.x.as_slice(), "sample")?;
    ensure_finite(m.w.as_slice(), "weights")?;
    if !s.y.is_finite() {
        return Err(Error::InvalidInput("label is not finite".into()));
    }
    Ok(())
}

/// The unit-budget step `v/‖v‖`, or `None` when the budget is zero or `w = 0`.
fn budget_direction(w: &DVector<f64>, ball: &NormBall) -> Result<Option<DVector<f64>>> {
    if ball.radius == 0.0 || w.iter().all(|&x| x == 0.0) {
        return Ok(None);
    }
    let dir = dual_subgradient(w, ball.norm)?;
    Ok(Some(scale_to_budget(&dir.v, ball)?))
}

/// Worst case of `(w⊺(x+Δ) − y)²`.
///
/// The sign follows the residual; at zero residual both signs are optimal and
/// `+ε·v/‖v‖` is returned.
pub fn attack_squared(s: &LabeledSample, m: &LinearModel, ball: &NormBall) -> Result<AttackResult> {
    validate(s, m)?;
    let residual = m.predict(&s.x) - s.y;
    let (delta, degenerate) = match budget_direction(&m.w, ball)? {
        None => (DVector::zeros(s.dim()), m.w.iter().all(|&x| x == 0.0)),
        Some(step) if residual < 0.0 => (-step, false),
        Some(step) => (step, false),
    };
    let objective = squared_loss(&m.w, &s.perturbed(&delta));
    Ok(AttackResult {
        delta,
        objective,
        active: true,
        degenerate,
    })
}

/// Worst case of `log(1 + exp(−y·w⊺(x+Δ)))`: `Δ = −ε·y·v/‖v‖`.
pub fn attack_logistic(s: &LabeledSample, m: &LinearModel, ball: &NormBall) -> Result<AttackResult> {
    validate(s, m)?;
    check_label(s.y)?;
    let (delta, degenerate) = margin_attack(s, m, ball)?;
    let objective = logistic_loss(&m.w, &s.perturbed(&delta));
    Ok(AttackResult {
        delta,
        objective,
        active: true,
        degenerate,
    })
}

/// Worst case of `max(0, 1 − y·w⊺(x+Δ))`: same direction as the logistic attack.
///
/// `active` reports whether the attacked margin is still below one; when it is
/// not, every point of the ball gives zero loss.
pub fn attack_hinge(s: &LabeledSample, m: &LinearModel, ball: &NormBall) -> Result<AttackResult> {
    validate(s, m)?;
    check_label(s.y)?;
    let (delta, degenerate) = margin_attack(s, m, ball)?;
    let attacked = s.perturbed(&delta);
    let margin = s.y * m.predict(&attacked.x);
    Ok(AttackResult {
        objective: (1.0 - margin).max(0.0),
        active: margin < 1.0,
        delta,
        degenerate,
    })
}

fn margin_attack(s: &LabeledSample, m: &LinearModel, ball: &NormBall) -> Result<(DVector<f64>, bool)> {
    Ok(match budget_direction(&m.w, ball)? {
        None => (DVector::zeros(s.dim()), m.w.iter().all(|&x| x == 0.0)),
        Some(step) => (step * (-s.y), false),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::NormKind;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn close(a: &DVector<f64>, b: &DVector<f64>, tol: f64) -> bool {
        (a - b).amax() <= tol
    }

    /// Largest value of `f` over a fine grid of the L2 circle of radius `eps`.
    fn circle_max(eps: f64, f: impl Fn(&DVector<f64>) -> f64) -> f64 {
        (0..100_000)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 100_000.0;
                f(&v(&[eps * t.cos(), eps * t.sin()]))
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn squared_l2_example() {
        let s = LabeledSample::new(v(&[1.0, 0.0]), 2.0);
        let m = LinearModel::new(v(&[3.0, 4.0]));
        let ball = NormBall::new(NormKind::L2, 0.5).unwrap();
        let r = attack_squared(&s, &m, &ball).unwrap();
        assert!(close(&r.delta, &v(&[0.3, 0.4]), 1e-15));
        assert!((r.objective - 12.25).abs() < 1e-12);
        let brute = circle_max(0.5, |d| squared_loss(&m.w, &s.perturbed(d)));
        assert!(brute <= r.objective + 1e-12 && brute > r.objective - 1e-6);
    }

    #[test]
    fn squared_linf_example() {
        let s = LabeledSample::new(v(&[0.0, 0.0]), -1.0);
        let m = LinearModel::new(v(&[1.0, -2.0]));
        let ball = NormBall::new(NormKind::Linf, 1.0).unwrap();
        let r = attack_squared(&s, &m, &ball).unwrap();
        assert_eq!(r.delta, v(&[1.0, -1.0]));
        assert_eq!(r.objective, 16.0);
        let mut best = 0.0_f64;
        for a in [-1.0, 1.0] {
            for b in [-1.0, 1.0] {
                best = best.max(squared_loss(&m.w, &s.perturbed(&v(&[a, b]))));
            }
        }
        assert_eq!(best, 16.0);
    }

    #[test]
    fn zero_budget_returns_clean_loss() {
        let s = LabeledSample::new(v(&[1.0, 2.0]), 1.0);
        let m = LinearModel::new(v(&[0.5, -1.0]));
        let ball = NormBall::new(NormKind::L2, 0.0).unwrap();
        for r in [
            attack_squared(&s, &m, &ball).unwrap(),
            attack_logistic(&s, &m, &ball).unwrap(),
            attack_hinge(&s, &m, &ball).unwrap(),
        ] {
            assert_eq!(r.delta, v(&[0.0, 0.0]));
        }
        assert_eq!(attack_squared(&s, &m, &ball).unwrap().objective, squared_loss(&m.w, &s));
    }

    #[test]
    fn zero_residual_uses_positive_sign() {
        let s = LabeledSample::new(v(&[1.0, 1.0]), 7.0);
        let m = LinearModel::new(v(&[3.0, 4.0]));
        let ball = NormBall::new(NormKind::L2, 1.0).unwrap();
        let r = attack_squared(&s, &m, &ball).unwrap();
        assert!(close(&r.delta, &v(&[0.6, 0.8]), 1e-15));
        assert!((r.objective - 25.0).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_are_degenerate_not_errors() {
        let s = LabeledSample::new(v(&[1.0, 1.0]), 1.0);
        let m = LinearModel::zeros(2);
        let ball = NormBall::new(NormKind::L1, 1.0).unwrap();
        let r = attack_logistic(&s, &m, &ball).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.delta, v(&[0.0, 0.0]));
        assert!((r.objective - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn logistic_examples() {
        let m = LinearModel::new(v(&[0.0, 5.0]));
        let ball = NormBall::new(NormKind::L2, 1.0).unwrap();
        let pos = LabeledSample::new(v(&[1.0, 1.0]), 1.0);
        let r = attack_logistic(&pos, &m, &ball).unwrap();
        assert!(close(&r.delta, &v(&[0.0, -1.0]), 1e-15));
        assert!((r.objective - 2f64.ln()).abs() < 1e-12);
        let brute = circle_max(1.0, |d| logistic_loss(&m.w, &pos.perturbed(d)));
        assert!(brute <= r.objective + 1e-12);

        let neg = LabeledSample::new(v(&[1.0, 1.0]), -1.0);
        let r = attack_logistic(&neg, &m, &ball).unwrap();
        assert!(close(&r.delta, &v(&[0.0, 1.0]), 1e-15));
    }

    #[test]
    fn hinge_examples() {
        let ball = NormBall::new(NormKind::L2, 0.5).unwrap();
        let m = LinearModel::new(v(&[0.0, 5.0]));
        let s = LabeledSample::new(v(&[1.0, 1.0]), 1.0);
        let r = attack_hinge(&s, &m, &ball).unwrap();
        assert!(close(&r.delta, &v(&[0.0, -0.5]), 1e-15));
        assert!(!r.active);
        assert_eq!(r.objective, 0.0);
        assert_eq!(circle_max(0.5, |d| hinge_loss(&m.w, &s.perturbed(d))), 0.0);

        let m = LinearModel::new(v(&[1.0, 0.0]));
        let s = LabeledSample::new(v(&[1.0, 0.0]), 1.0);
        let r = attack_hinge(&s, &m, &ball).unwrap();
        assert!(close(&r.delta, &v(&[-0.5, 0.0]), 1e-15));
        assert!(r.active);
        assert!((r.objective - 0.5).abs() < 1e-15);
        let brute = circle_max(0.5, |d| hinge_loss(&m.w, &s.perturbed(d)));
        assert!(brute <= 0.5 + 1e-12 && brute > 0.5 - 1e-6);
    }

    #[test]
    fn logistic_and_hinge_share_direction() {
        let m = LinearModel::new(v(&[0.3, -1.2, 2.0]));
        let s = LabeledSample::new(v(&[1.0, 0.5, -0.5]), -1.0);
        for norm in [NormKind::L1, NormKind::L2, NormKind::Linf, NormKind::Lp(3.0)] {
            let ball = NormBall::new(norm, 0.4).unwrap();
            assert_eq!(
                attack_logistic(&s, &m, &ball).unwrap().delta,
                attack_hinge(&s, &m, &ball).unwrap().delta
            );
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let ball = NormBall::new(NormKind::L2, 1.0).unwrap();
        let m = LinearModel::new(v(&[1.0, 1.0]));
        let bad_label = LabeledSample::new(v(&[1.0, 1.0]), 0.5);
        assert!(attack_logistic(&bad_label, &m, &ball).is_err());
        assert!(attack_hinge(&bad_label, &m, &ball).is_err());
        let short = LabeledSample::new(v(&[1.0]), 1.0);
        assert!(matches!(
            attack_squared(&short, &m, &ball),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(LabeledSample::classification(v(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn stable_logistic_for_large_margins() {
        let m = LinearModel::new(v(&[1000.0]));
        let s = LabeledSample::new(v(&[1.0]), -1.0);
        assert!((logistic_loss(&m.w, &s) - 1000.0).abs() < 1e-9);
        let s = LabeledSample::new(v(&[1.0]), 1.0);
        assert!(logistic_loss(&m.w, &s) >= 0.0);
    }
}
