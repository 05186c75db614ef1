//! Worst-case perturbations for the Gaussian graphical model loss
//! `−log det Ω + (x+Δ)⊺Ω(x+Δ)`.
//!
//! Only the quadratic term depends on `Δ`. For the `ℓ2` ball the attack is a
//! trust-region subproblem solved through its one-dimensional dual; for the
//! `ℓ∞` ball it goes through a semidefinite relaxation (see [`sdp`]).

pub mod sdp;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::attack::AttackResult;
use crate::error::{ensure_dim, ensure_finite, Error, Result};

pub use sdp::{ggm_attack_linf, psd_project, SdpOptions, SdpSolution};

/// A symmetric positive definite matrix with its eigendecomposition cached.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionMatrix {
    omega: DMatrix<f64>,
    /// Ascending.
    eigvals: DVector<f64>,
    /// Column `i` belongs to `eigvals[i]`.
    eigvecs: DMatrix<f64>,
}

impl PrecisionMatrix {
    pub fn new(omega: DMatrix<f64>) -> Result<Self> {
        let p = omega.nrows();
        if p == 0 || omega.ncols() != p {
            return Err(Error::InvalidInput(format!(
                "precision matrix must be square and non-empty, got {}x{}",
                omega.nrows(),
                omega.ncols()
            )));
        }
        ensure_finite(omega.as_slice(), "precision matrix")?;
        let scale = omega.amax().max(1.0);
        let asym = (&omega - omega.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::InvalidInput(format!("precision matrix is not symmetric (gap {asym:e})")));
        }
        let omega = (&omega + omega.transpose()) * 0.5;
        let (eigvals, eigvecs) = sorted_eigen(&omega);
        if eigvals[0] <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!("smallest eigenvalue {:e}", eigvals[0])));
        }
        Ok(Self { omega, eigvals, eigvecs })
    }

    pub fn identity(p: usize) -> Self {
        Self::new(DMatrix::identity(p, p)).expect("identity is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn eigvals(&self) -> &DVector<f64> {
        &self.eigvals
    }

    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigvals[self.dim() - 1]
    }

    pub fn log_det(&self) -> f64 {
        self.eigvals.iter().map(|l| l.ln()).sum()
    }

    /// `x⊺Ωx`.
    pub fn quadratic(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.omega * x))
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
pub(crate) fn sorted_eigen(s: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(s.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(s.nrows(), order.len());
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// The dual multiplier of the `ℓ2` attack.
#[derive(Debug, Clone, PartialEq)]
pub struct DualScalarSolution {
    /// `μ* ≥ λ_max(Ω)`; infinite when the budget is zero.
    pub mu: f64,
    /// `g(μ*) = −½(Ωx)⊺(μ*I − Ω)⁺Ωx − μ*ε²/2`.
    pub dual_value: f64,
    /// Upper bound on the attacked quadratic implied by the dual: `x⊺Ωx − 2g(μ*)`.
    pub bound: f64,
    /// `μ* = λ_max` and the budget was filled along the top eigenvector.
    pub hard_case: bool,
}

/// Maximizes `(x+Δ)⊺Ω(x+Δ)` over `‖Δ‖₂ ≤ ε`.
///
/// With `c = Q⊺Ωx` in the eigenbasis, `‖Δ(μ)‖² = Σ c_i²/(μ−λ_i)²` is decreasing
/// in `μ > λ_max`, so the multiplier is found by bisection and
/// `Δ* = (μ*I − Ω)⁻¹Ωx`.
pub fn ggm_attack_l2(x: &DVector<f64>, omega: &PrecisionMatrix, eps: f64) -> Result<(AttackResult, DualScalarSolution)> {
    ensure_dim(omega.dim(), x.len())?;
    ensure_finite(x.as_slice(), "sample")?;
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidInput(format!("budget must be finite and nonnegative, got {eps}")));
    }
    let p = omega.dim();
    let base = omega.quadratic(x);
    if eps == 0.0 {
        let res = AttackResult {
            delta: DVector::zeros(p),
            objective: base,
            active: true,
            degenerate: false,
        };
        let dual = DualScalarSolution {
            mu: f64::INFINITY,
            dual_value: -0.0,
            bound: base,
            hard_case: false,
        };
        return Ok((res, dual));
    }

    let lam = omega.eigvals();
    let q = omega.eigvecs();
    let lmax = omega.lambda_max();
    let b = omega.matrix() * x;
    let c = q.transpose() * &b;
    let eps2 = eps * eps;
    let norm2 = |mu: f64| -> f64 { c.iter().zip(lam.iter()).map(|(ci, li)| ci * ci / ((mu - li) * (mu - li))).sum() };

    let top_tol = 1e-12 * lmax.max(1.0);
    let lo0 = lmax + top_tol;
    let (mu, hard_case) = if norm2(lo0) < eps2 {
        (lmax, true)
    } else {
        let (mut lo, mut hi) = (lo0, lmax + b.norm() / eps + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if norm2(mid) > eps2 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi.abs().max(1.0) {
                break;
            }
        }
        (0.5 * (lo + hi), false)
    };

    // Coordinates in the eigenbasis; the top eigenspace is left out in the hard case.
    let on_top = |i: usize| hard_case && lmax - lam[i] <= top_tol;
    let mut coords = DVector::from_fn(p, |i, _| if on_top(i) { 0.0 } else { c[i] / (mu - lam[i]) });
    if hard_case {
        let top = (0..p).rev().find(|&i| on_top(i)).expect("the largest eigenvalue is on top");
        let fill = (eps2 - coords.norm_squared()).max(0.0).sqrt();
        coords[top] = if c[top] >= 0.0 { fill } else { -fill };
    }
    let delta = q * &coords;

    let gap_sum: f64 = (0..p)
        .filter(|&i| !on_top(i))
        .map(|i| c[i] * c[i] / (mu - lam[i]))
        .sum();
    let dual_value = -0.5 * gap_sum - 0.5 * mu * eps2;
    let objective = omega.quadratic(&(x + &delta));
    Ok((
        AttackResult {
            delta,
            objective,
            active: true,
            degenerate: false,
        },
        DualScalarSolution {
            mu,
            dual_value,
            bound: base - 2.0 * dual_value,
            hard_case,
        },
    ))
}
