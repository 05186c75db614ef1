//! `ℓ∞` attack on the GGM quadratic through a semidefinite relaxation.
//!
//! With `M = [Ω, Ωx; (Ωx)⊺, 0]` and `Y = [Δ;1][Δ;1]⊺`, the attacked quadratic is
//! `x⊺Ωx + ⟨M, Y⟩`. Dropping `rank Y = 1` leaves
//! `max ⟨M, Y⟩ s.t. Y ⪰ 0, Y_{p+1,p+1} = 1, |Y_ij| ≤ ε² (i, j ≤ p)`,
//! solved here by ADMM. A feasible `Δ` is then recovered by rounding.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{sorted_eigen, PrecisionMatrix};
use crate::attack::AttackResult;
use crate::error::{ensure_dim, ensure_finite, Error, Result};

/// Nearest positive semidefinite matrix in Frobenius norm.
pub fn psd_project(s: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (s + s.transpose()) * 0.5;
    let (vals, vecs) = sorted_eigen(&sym);
    let clipped = vals.map(|l| l.max(0.0));
    let out = &vecs * DMatrix::from_diagonal(&clipped) * vecs.transpose();
    (&out + out.transpose()) * 0.5
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpOptions {
    pub rho: f64,
    pub max_iter: usize,
    /// Stop once both the primal and the dual residual fall below this.
    pub tol: f64,
    /// Random hyperplane roundings of the relaxed solution.
    pub roundings: usize,
    pub seed: u64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iter: 5000,
            tol: 1e-6,
            roundings: 64,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    /// Feasible `(p+1)×(p+1)` point of the relaxation.
    pub y: DMatrix<f64>,
    /// `⟨M, Y⟩`; an upper bound on `max (Δ⊺ΩΔ + 2Δ⊺Ωx)` over the box when certified.
    pub primal_objective: f64,
    /// `‖Y − Z‖_F` between the PSD and box iterates at exit.
    pub primal_residual: f64,
    /// `ρ‖Z_k − Z_{k−1}‖_F` at exit.
    pub dual_residual: f64,
    pub iterations: usize,
    /// Both residuals ended below `1e-4`.
    pub certified: bool,
}

fn lifted_cost(omega: &PrecisionMatrix, x: &DVector<f64>) -> DMatrix<f64> {
    let p = omega.dim();
    let b = omega.matrix() * x;
    let mut m = DMatrix::zeros(p + 1, p + 1);
    m.view_mut((0, 0), (p, p)).copy_from(omega.matrix());
    for i in 0..p {
        m[(i, p)] = b[i];
        m[(p, i)] = b[i];
    }
    m
}

fn box_project(y: &DMatrix<f64>, eps2: f64) -> DMatrix<f64> {
    let n = y.nrows();
    let p = n - 1;
    let mut z = y.clone();
    for j in 0..p {
        for i in 0..p {
            z[(i, j)] = z[(i, j)].clamp(-eps2, eps2);
        }
    }
    z[(p, p)] = 1.0;
    z
}

/// Moves a box-feasible `Z` toward `diag(ε², …, ε², 1)` just far enough to be PSD.
/// Both points satisfy the box and the anchor, so the blend does too.
fn restore_psd(z: &DMatrix<f64>, eps2: f64) -> DMatrix<f64> {
    let n = z.nrows();
    let sym = (z + z.transpose()) * 0.5;
    let (vals, _) = sorted_eigen(&sym);
    let low = vals[0];
    if low >= 0.0 {
        return sym;
    }
    let mut anchor = DMatrix::from_diagonal_element(n, n, eps2);
    anchor[(n - 1, n - 1)] = 1.0;
    let floor = eps2.min(1.0);
    let t = (-low / (-low + floor) * (1.0 + 1e-9)).min(1.0);
    sym * (1.0 - t) + anchor * t
}

/// Solves the relaxation with scaled ADMM:
/// `Y ← Π_PSD(Z − U + M/ρ)`, `Z ← Π_box(Y + U)`, `U ← U + Y − Z`.
pub fn solve_relaxation(omega: &PrecisionMatrix, x: &DVector<f64>, eps: f64, opts: &SdpOptions) -> SdpSolution {
    let p = omega.dim();
    let m = lifted_cost(omega, x);
    let eps2 = eps * eps;
    let n = p + 1;
    let mut z = DMatrix::from_diagonal_element(n, n, eps2);
    z[(p, p)] = 1.0;
    let mut u = DMatrix::zeros(n, n);
    let (mut r_prim, mut r_dual) = (f64::INFINITY, f64::INFINITY);
    let mut iterations = 0;
    for k in 1..=opts.max_iter {
        iterations = k;
        let y = psd_project(&(&z - &u + &m / opts.rho));
        let z_prev = z;
        z = box_project(&(&y + &u), eps2);
        let gap = &y - &z;
        u += &gap;
        r_prim = gap.norm();
        r_dual = opts.rho * (&z - &z_prev).norm();
        if r_prim < opts.tol && r_dual < opts.tol {
            break;
        }
    }
    let feasible = restore_psd(&z, eps2);
    SdpSolution {
        primal_objective: m.dot(&feasible),
        y: feasible,
        primal_residual: r_prim,
        dual_residual: r_dual,
        iterations,
        certified: r_prim <= 1e-4 && r_dual <= 1e-4,
    }
}

fn sign_corner(v: &DVector<f64>, eps: f64) -> DVector<f64> {
    v.map(|t| if t < 0.0 { -eps } else { eps })
}

/// Flips single coordinates of a corner while the quadratic increases.
fn flip_search(omega: &DMatrix<f64>, x: &DVector<f64>, mut corner: DVector<f64>) -> DVector<f64> {
    let p = corner.len();
    let mut grad = omega * (x + &corner);
    loop {
        // Flipping coordinate i changes the quadratic by −4Δ_i·g_i + 4Δ_i²·Ω_ii.
        let mut best = (0.0, None);
        for i in 0..p {
            let d = corner[i];
            let change = -4.0 * d * grad[i] + 4.0 * d * d * omega[(i, i)];
            if change > best.0 + 1e-14 * grad[i].abs().max(1.0) {
                best = (change, Some(i));
            }
        }
        let Some(i) = best.1 else { break };
        let step = -2.0 * corner[i];
        corner[i] = -corner[i];
        grad += omega.column(i) * step;
    }
    corner
}

/// Maximizes `(x+Δ)⊺Ω(x+Δ)` over `‖Δ‖∞ ≤ ε`.
///
/// The relaxed solution's last column gives `Δ̂`; candidates are `Δ̂` clipped to
/// the box, its sign corner, and random-hyperplane corners from a factor of `Y`,
/// each corner improved by single flips. The best candidate is returned.
pub fn ggm_attack_linf(x: &DVector<f64>, omega: &PrecisionMatrix, eps: f64) -> Result<(AttackResult, SdpSolution)> {
    ggm_attack_linf_with(x, omega, eps, &SdpOptions::default())
}

pub fn ggm_attack_linf_with(
    x: &DVector<f64>,
    omega: &PrecisionMatrix,
    eps: f64,
    opts: &SdpOptions,
) -> Result<(AttackResult, SdpSolution)> {
    ensure_dim(omega.dim(), x.len())?;
    ensure_finite(x.as_slice(), "sample")?;
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidInput(format!("budget must be finite and nonnegative, got {eps}")));
    }
    if !(opts.rho > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidInput("ADMM needs rho > 0 and max_iter >= 1".into()));
    }
    let p = omega.dim();
    let sol = solve_relaxation(omega, x, eps, opts);
    if eps == 0.0 {
        let res = AttackResult {
            delta: DVector::zeros(p),
            objective: omega.quadratic(x),
            active: true,
            degenerate: false,
        };
        return Ok((res, sol));
    }

    let om = omega.matrix();
    let value = |d: &DVector<f64>| omega.quadratic(&(x + d));
    let hat = DVector::from_fn(p, |i, _| sol.y[(i, p)].clamp(-eps, eps));
    let mut best = hat.clone();
    let mut best_val = value(&hat);
    let mut consider = |d: DVector<f64>| {
        let v = value(&d);
        if v > best_val {
            best_val = v;
            best = d;
        }
    };
    consider(flip_search(om, x, sign_corner(&hat, eps)));
    consider(flip_search(om, x, sign_corner(&(om * x), eps)));

    let (vals, vecs) = sorted_eigen(&sol.y);
    let factor = vecs * DMatrix::from_diagonal(&vals.map(|l| l.max(0.0).sqrt()));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.roundings {
        let g = DVector::from_fn(p + 1, |_, _| StandardNormal.sample(&mut rng));
        let t = &factor * g;
        let side = if t[p] < 0.0 { -1.0 } else { 1.0 };
        consider(flip_search(om, x, sign_corner(&(t.rows(0, p) * side), eps)));
    }

    Ok((
        AttackResult {
            delta: best,
            objective: best_val,
            active: true,
            degenerate: false,
        },
        sol,
    ))
}
