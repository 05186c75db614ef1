//! Vector norms, their duals, and the dual-norm subgradient directions that the
//! closed-form attacks are built from.
//!
//! For a perturbation budget `‖Δ‖ ≤ ε`, a linear functional `w⊺Δ` is maximised
//! by `ε·v/‖v‖` for any `v ∈ ∂‖w‖*`, and the maximum equals `ε‖w‖*` (Hölder).
//! Every closed-form attack in this crate reduces to that fact.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{ensure_finite, Error, Result};

/// Relative slack used when checking that a vector lies inside a ball.
pub const BALL_SLACK: f64 = 1e-10;

/// The norm measuring the size of a perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L1,
    L2,
    Linf,
    /// General `ℓp` norm with `1 < p < ∞`.
    Lp(f64),
}

impl NormKind {
    /// Builds an `ℓp` norm, folding `p = 1, 2, ∞` onto the named variants.
    pub fn lp(p: f64) -> Result<Self> {
        if p == 1.0 {
            Ok(NormKind::L1)
        } else if p == 2.0 {
            Ok(NormKind::L2)
        } else if p == f64::INFINITY {
            Ok(NormKind::Linf)
        } else if p.is_finite() && p > 1.0 {
            Ok(NormKind::Lp(p))
        } else {
            Err(Error::InvalidInput(format!("lp norm needs p > 1, got {p}")))
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NormKind::Lp(p) if !(p.is_finite() && p > 1.0) => {
                Err(Error::InvalidInput(format!("lp norm needs 1 < p < inf, got {p}")))
            }
            _ => Ok(()),
        }
    }

    /// The exponent `p` of this norm (`∞` for `Linf`).
    pub fn exponent(&self) -> f64 {
        match *self {
            NormKind::L1 => 1.0,
            NormKind::L2 => 2.0,
            NormKind::Linf => f64::INFINITY,
            NormKind::Lp(p) => p,
        }
    }

    /// The dual norm: `ℓ1 ↔ ℓ∞`, `ℓ2` self-dual, `ℓp ↔ ℓq` with `1/p + 1/q = 1`.
    pub fn dual(&self) -> NormKind {
        match *self {
            NormKind::L1 => NormKind::Linf,
            NormKind::L2 => NormKind::L2,
            NormKind::Linf => NormKind::L1,
            NormKind::Lp(p) => NormKind::Lp(p / (p - 1.0)),
        }
    }
}

impl std::fmt::Display for NormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NormKind::L1 => write!(f, "l1"),
            NormKind::L2 => write!(f, "l2"),
            NormKind::Linf => write!(f, "linf"),
            NormKind::Lp(p) => write!(f, "lp:{p}"),
        }
    }
}

/// The feasible set `{Δ : ‖Δ‖ ≤ radius}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBall {
    pub norm: NormKind,
    pub radius: f64,
}

impl NormBall {
    pub fn new(norm: NormKind, radius: f64) -> Result<Self> {
        norm.validate()?;
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "ball radius must be finite and nonnegative, got {radius}"
            )));
        }
        Ok(Self { norm, radius })
    }

    pub fn contains(&self, delta: &DVector<f64>) -> bool {
        lp_norm(delta.as_slice(), self.norm.exponent()) <= self.radius * (1.0 + BALL_SLACK) + 1e-300
    }

    /// Euclidean projection onto the ball.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        project_onto_ball(x, self)
    }

    /// Draws a point on the sphere `‖Δ‖ = radius`.
    ///
    /// `ℓ2`: normalised Gaussian (uniform). `ℓ∞`: uniform coordinates with one
    /// coordinate pushed to `±radius`. `ℓ1`: Dirichlet(1) magnitudes with random
    /// signs. `ℓp`: Gaussian rescaled in the `ℓp` norm.
    pub fn sample_surface<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> DVector<f64> {
        if dim == 0 || self.radius == 0.0 {
            return DVector::zeros(dim);
        }
        let eps = self.radius;
        match self.norm {
            NormKind::Linf => {
                let mut v = DVector::from_fn(dim, |_, _| rng.random_range(-eps..=eps));
                let k = rng.random_range(0..dim);
                v[k] = if rng.random_bool(0.5) { eps } else { -eps };
                v
            }
            NormKind::L1 => {
                let mags: Vec<f64> = (0..dim).map(|_| Exp1.sample(rng)).collect();
                let total: f64 = mags.iter().sum();
                DVector::from_fn(dim, |i, _| {
                    let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    s * eps * mags[i] / total
                })
            }
            NormKind::L2 | NormKind::Lp(_) => loop {
                let g = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
                let n = lp_norm(g.as_slice(), self.norm.exponent());
                if n > 1e-300 {
                    break g * (eps / n);
                }
            },
        }
    }

    /// Draws a point inside the ball (uniform for `ℓ1`, `ℓ2`, `ℓ∞`).
    pub fn sample_interior<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> DVector<f64> {
        if dim == 0 || self.radius == 0.0 {
            return DVector::zeros(dim);
        }
        match self.norm {
            NormKind::Linf => {
                let eps = self.radius;
                DVector::from_fn(dim, |_, _| rng.random_range(-eps..=eps))
            }
            _ => {
                let u: f64 = rng.random();
                self.sample_surface(dim, rng) * u.powf(1.0 / dim as f64)
            }
        }
    }
}

/// A subgradient `v ∈ ∂‖w‖*` of the dual norm.
#[derive(Debug, Clone, PartialEq)]
pub struct DualDirection {
    pub v: DVector<f64>,
    /// Set when the subdifferential was not a singleton and a choice was made.
    pub tie_broken: bool,
}

fn lp_norm(x: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        // scaled to avoid overflow for huge entries
        let m = x.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if m == 0.0 {
            return 0.0;
        }
        m * x.iter().map(|v| (v / m) * (v / m)).sum::<f64>().sqrt()
    } else if p == f64::INFINITY {
        x.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    } else {
        let m = x.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if m == 0.0 {
            return 0.0;
        }
        m * x.iter().map(|v| (v.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `‖x‖` for the given norm.
pub fn norm_value(x: &DVector<f64>, norm: NormKind) -> Result<f64> {
    norm.validate()?;
    ensure_finite(x.as_slice(), "vector")?;
    Ok(lp_norm(x.as_slice(), norm.exponent()))
}

/// `‖x‖* = sup{x⊺u : ‖u‖ ≤ 1}` where `norm` is the primal norm.
pub fn dual_norm_value(x: &DVector<f64>, norm: NormKind) -> Result<f64> {
    norm_value(x, norm.dual())
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Returns `v ∈ ∂‖w‖*` with `v⊺w = ‖w‖*` and `‖v‖ ≤ 1` in the primal norm.
///
/// Ties are broken deterministically: for the `ℓ1` ball the lowest index among
/// the largest `|w_i|` wins; for the `ℓ∞` ball zero coordinates get `sign(0) = 0`.
pub fn dual_subgradient(w: &DVector<f64>, norm: NormKind) -> Result<DualDirection> {
    norm.validate()?;
    ensure_finite(w.as_slice(), "weight vector")?;
    if w.iter().all(|&x| x == 0.0) {
        return Err(Error::DegenerateDirection("dual subgradient of the zero vector"));
    }
    let d = w.len();
    let dir = match norm {
        NormKind::L2 => {
            let n = lp_norm(w.as_slice(), 2.0);
            DualDirection {
                v: w / n,
                tie_broken: false,
            }
        }
        NormKind::Linf => DualDirection {
            v: w.map(sign),
            tie_broken: w.iter().any(|&x| x == 0.0),
        },
        NormKind::L1 => {
            let mut best = 0;
            let mut count = 0;
            let top = w.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
            for (i, x) in w.iter().enumerate() {
                if x.abs() == top {
                    if count == 0 {
                        best = i;
                    }
                    count += 1;
                }
            }
            let mut v = DVector::zeros(d);
            v[best] = sign(w[best]);
            DualDirection {
                v,
                tie_broken: count > 1,
            }
        }
        NormKind::Lp(p) => {
            let q = p / (p - 1.0);
            // v_i = sign(w_i)|w_i|^{q-1} / ‖w‖_q^{q-1}, computed on w/max|w| for range safety
            let m = w.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
            let scaled = w / m;
            let nq = lp_norm(scaled.as_slice(), q);
            let v = scaled.map(|x| sign(x) * (x.abs() / nq).powf(q - 1.0));
            DualDirection { v, tie_broken: false }
        }
    };
    Ok(dir)
}

/// Scales a direction to the boundary of the ball: `ε·v/‖v‖`.
pub fn scale_to_budget(v: &DVector<f64>, ball: &NormBall) -> Result<DVector<f64>> {
    if ball.radius == 0.0 {
        return Ok(DVector::zeros(v.len()));
    }
    let n = norm_value(v, ball.norm)?;
    if n == 0.0 {
        return Err(Error::DegenerateDirection("cannot scale the zero vector to a positive budget"));
    }
    Ok(v * (ball.radius / n))
}

/// Euclidean projection of `x` onto `ball`.
///
/// `ℓ2`: radial scaling. `ℓ∞`: clipping. `ℓ1`: sort-based simplex projection.
/// `ℓp`: nested bisection on the KKT multiplier.
pub fn project_onto_ball(x: &DVector<f64>, ball: &NormBall) -> DVector<f64> {
    let eps = ball.radius;
    if eps == 0.0 {
        return DVector::zeros(x.len());
    }
    match ball.norm {
        NormKind::L2 => {
            let n = lp_norm(x.as_slice(), 2.0);
            if n <= eps {
                x.clone()
            } else {
                x * (eps / n)
            }
        }
        NormKind::Linf => x.map(|v| v.clamp(-eps, eps)),
        NormKind::L1 => project_l1(x, eps),
        NormKind::Lp(p) => project_lp(x, eps, p),
    }
}

fn project_l1(x: &DVector<f64>, eps: f64) -> DVector<f64> {
    let total: f64 = x.iter().map(|v| v.abs()).sum();
    if total <= eps {
        return x.clone();
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &m) in mags.iter().enumerate() {
        cumsum += m;
        let t = (cumsum - eps) / (k as f64 + 1.0);
        if m > t {
            theta = t;
        } else {
            break;
        }
    }
    x.map(|v| sign(v) * (v.abs() - theta).max(0.0))
}

fn project_lp(x: &DVector<f64>, eps: f64, p: f64) -> DVector<f64> {
    if lp_norm(x.as_slice(), p) <= eps {
        return x.clone();
    }
    // Each coordinate solves t + λ p t^{p-1} = |x_i| for t in [0, |x_i|].
    let shrink = |a: f64, lambda: f64| -> f64 {
        let (mut lo, mut hi) = (0.0, a);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if mid + lambda * p * mid.powf(p - 1.0) > a {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mass = |lambda: f64| -> f64 { x.iter().map(|v| shrink(v.abs(), lambda).powf(p)).sum() };
    let target = eps.powf(p);
    let mut hi = 1.0;
    while mass(hi) > target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = x.map(|v| sign(v) * shrink(v.abs(), hi));
    // land exactly inside despite bisection slack
    let n = lp_norm(y.as_slice(), p);
    if n > eps {
        y * (eps / n)
    } else {
        y
    }
}
