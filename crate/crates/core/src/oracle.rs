//! Brute-force maximization over a norm ball and finite-difference gradient
//! checks, used to falsify the analytic solvers.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::norms::{NormBall, NormKind};

/// Largest dimension for which all `2^d` corners of an `ℓ∞` ball are evaluated.
pub const MAX_VERTEX_DIM: usize = 20;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    pub n_samples: usize,
    /// Rounds of projected coordinate search from the best sample.
    pub refine_steps: usize,
    pub seed: u64,
    /// Fraction of the samples drawn inside the ball rather than on its surface.
    pub interior_fraction: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            refine_steps: 50,
            seed: 0,
            interior_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub best_delta: DVector<f64>,
    pub best_value: f64,
    /// Objective evaluations spent on samples and vertices.
    pub samples_used: usize,
    pub analytic_value: f64,
    /// `analytic_value − best_value`; negative means the oracle beat the solver.
    pub gap: f64,
}

fn better(a: (DVector<f64>, f64), b: (DVector<f64>, f64)) -> (DVector<f64>, f64) {
    if b.1 > a.1 {
        b
    } else {
        a
    }
}

fn split_seed(seed: u64, chunk: u64) -> u64 {
    let mut z = seed.wrapping_add(chunk.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Best value of `objective` over random ball points, the ball's vertices
/// (`ℓ∞` up to [`MAX_VERTEX_DIM`] dimensions, `ℓ1` always), and a final
/// projected coordinate search.
pub fn brute_force_ball_max<F>(
    objective: F,
    dim: usize,
    ball: &NormBall,
    opts: &OracleOptions,
    analytic_value: f64,
) -> OracleReport
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    let zero = DVector::zeros(dim);
    let start = (zero.clone(), objective(&zero));
    let n = opts.n_samples.max(1);
    let chunks = n.div_ceil(CHUNK);
    let interior = opts.interior_fraction.clamp(0.0, 1.0);

    let sampled = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(opts.seed, c as u64));
            let count = CHUNK.min(n - c * CHUNK);
            let mut best = (DVector::zeros(dim), f64::NEG_INFINITY);
            for k in 0..count {
                let d = if (k as f64) < interior * count as f64 {
                    ball.sample_interior(dim, &mut rng)
                } else {
                    ball.sample_surface(dim, &mut rng)
                };
                let v = objective(&d);
                if v > best.1 {
                    best = (d, v);
                }
            }
            best
        })
        .reduce(|| (DVector::zeros(dim), f64::NEG_INFINITY), better);
    let mut used = n;

    let eps = ball.radius;
    let vertices = match ball.norm {
        NormKind::Linf if dim <= MAX_VERTEX_DIM && eps > 0.0 => {
            let total = 1u64 << dim;
            (0..total.div_ceil(CHUNK as u64))
                .into_par_iter()
                .map(|c| {
                    // Gray-code order: consecutive corners differ in one coordinate.
                    let lo = c * CHUNK as u64;
                    let hi = (lo + CHUNK as u64).min(total);
                    let gray = lo ^ (lo >> 1);
                    let mut d = DVector::from_fn(dim, |i, _| if gray >> i & 1 == 1 { eps } else { -eps });
                    let mut best = (d.clone(), objective(&d));
                    for k in lo + 1..hi {
                        let i = k.trailing_zeros() as usize;
                        d[i] = -d[i];
                        let v = objective(&d);
                        if v > best.1 {
                            best = (d.clone(), v);
                        }
                    }
                    best
                })
                .reduce(|| (DVector::zeros(dim), f64::NEG_INFINITY), better)
        }
        NormKind::L1 if eps > 0.0 => (0..2 * dim)
            .map(|k| {
                let mut d = DVector::zeros(dim);
                d[k / 2] = if k % 2 == 0 { eps } else { -eps };
                let v = objective(&d);
                (d, v)
            })
            .fold((DVector::zeros(dim), f64::NEG_INFINITY), better),
        _ => (DVector::zeros(dim), f64::NEG_INFINITY),
    };
    used += match ball.norm {
        NormKind::Linf if dim <= MAX_VERTEX_DIM && eps > 0.0 => 1 << dim,
        NormKind::L1 if eps > 0.0 => 2 * dim,
        _ => 0,
    };

    let (mut best_delta, mut best_value) = better(better(start, sampled), vertices);
    if eps > 0.0 && dim > 0 {
        let mut step = eps * 0.25;
        for _ in 0..opts.refine_steps {
            let mut improved = false;
            for i in 0..dim {
                for s in [step, -step] {
                    let mut cand = best_delta.clone();
                    cand[i] += s;
                    let cand = ball.project(&cand);
                    let v = objective(&cand);
                    if v > best_value {
                        best_value = v;
                        best_delta = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
    }
    OracleReport {
        best_delta,
        best_value,
        samples_used: used,
        analytic_value,
        gap: analytic_value - best_value,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientCheck {
    /// `max_k |fd_k − g_k| / max(‖g‖∞, 1e-8)`.
    Checked(f64),
    /// The point sits on a kink; no derivative to compare.
    Skipped,
}

impl GradientCheck {
    pub fn passes(&self, tol: f64) -> bool {
        match self {
            GradientCheck::Checked(e) => *e <= tol,
            GradientCheck::Skipped => true,
        }
    }
}

/// Central differences of `f` at `point` against `grad`, which returns `None`
/// at points where `f` is not differentiable.
pub fn finite_diff_check<F, G>(f: F, grad: G, point: &DVector<f64>, h: f64) -> GradientCheck
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> Option<DVector<f64>>,
{
    let Some(g) = grad(point) else {
        return GradientCheck::Skipped;
    };
    let scale = g.amax().max(1e-8);
    let mut worst = 0.0f64;
    for k in 0..point.len() {
        let mut up = point.clone();
        let mut down = point.clone();
        up[k] += h;
        down[k] -= h;
        let fd = (f(&up) - f(&down)) / (2.0 * h);
        worst = worst.max((fd - g[k]).abs());
    }
    GradientCheck::Checked(worst / scale)
}
