//! Worst-case perturbation of a two-layer network by DC programming.
//!
//! The attack minimizes `f(Δ) = y·v⊺σ(W(x+Δ))` over the ball. Each unit's
//! weight `a_i = y·v_i` decides which convex part of `σ` lands in `g` and which
//! in `h`, so that `f = g − h` with both convex.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::activation::{dc_decompose, ActivationKind, DcPair};
use crate::attack::{check_label, softplus, AttackResult, LabeledSample};
use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::norms::{dual_subgradient, project_onto_ball, scale_to_budget, NormBall};

/// `x ↦ v⊺σ(Wx)` with `W` of shape `h × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerNet {
    pub w: DMatrix<f64>,
    pub v: DVector<f64>,
    pub activation: ActivationKind,
}

impl TwoLayerNet {
    pub fn new(w: DMatrix<f64>, v: DVector<f64>, activation: ActivationKind) -> Result<Self> {
        if w.nrows() == 0 || w.ncols() == 0 {
            return Err(Error::InvalidInput("network needs at least one unit and one input".into()));
        }
        ensure_dim(w.nrows(), v.len())?;
        ensure_finite(w.as_slice(), "first-layer weights")?;
        ensure_finite(v.as_slice(), "output weights")?;
        activation.validate()?;
        Ok(Self { w, v, activation })
    }

    pub fn hidden(&self) -> usize {
        self.w.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    /// `v⊺σ(Wx)`.
    pub fn score(&self, x: &DVector<f64>) -> f64 {
        let z = &self.w * x;
        z.iter().zip(self.v.iter()).map(|(&zi, &vi)| vi * self.activation.value(zi)).sum()
    }

    /// `log(1 + exp(−y·v⊺σ(Wx)))`.
    pub fn loss(&self, s: &LabeledSample) -> f64 {
        softplus(-s.y * self.score(&s.x))
    }
}

/// Iterates of one DCA run.
#[derive(Debug, Clone, PartialEq)]
pub struct DcaTrace {
    /// `(Δ_k, f(Δ_k))`, starting with the initial point.
    pub iterates: Vec<(DVector<f64>, f64)>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcaOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Projected subgradient steps per convex subproblem.
    pub inner_steps: usize,
    /// Also start from the budget-scaled descent direction of the linearization at `Δ = 0`.
    pub linear_restart: bool,
    /// Further starts: the points `±ε·e_i` and this many seeded surface samples.
    pub surface_starts: usize,
    pub seed: u64,
}

impl Default for DcaOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100,
            inner_steps: 500,
            linear_restart: true,
            surface_starts: 64,
            seed: 0x0dca,
        }
    }
}

/// Evaluates `g`, `h` and their gradients for one sample.
struct DcObjective<'a> {
    net: &'a TwoLayerNet,
    pair: DcPair,
    x: &'a DVector<f64>,
    /// `a_i = y·v_i`.
    a: DVector<f64>,
}

struct DcEval {
    g: f64,
    h: f64,
    grad_g: DVector<f64>,
    grad_h: DVector<f64>,
}

impl<'a> DcObjective<'a> {
    fn new(net: &'a TwoLayerNet, s: &'a LabeledSample) -> Result<Self> {
        check_label(s.y)?;
        ensure_dim(net.input_dim(), s.dim())?;
        ensure_finite(s.x.as_slice(), "sample")?;
        Ok(Self {
            net,
            pair: dc_decompose(net.activation)?,
            x: &s.x,
            a: &net.v * s.y,
        })
    }

    fn eval(&self, delta: &DVector<f64>) -> DcEval {
        let z = &self.net.w * (self.x + delta);
        let (mut g, mut h) = (0.0, 0.0);
        let mut cg = DVector::zeros(z.len());
        let mut ch = DVector::zeros(z.len());
        for (i, &zi) in z.iter().enumerate() {
            let a = self.a[i];
            if a == 0.0 {
                continue;
            }
            let (s1, s2, d1, d2) = self.pair.eval(zi);
            if a > 0.0 {
                g += a * s1;
                h += a * s2;
                cg[i] = a * d1;
                ch[i] = a * d2;
            } else {
                let m = -a;
                g += m * s2;
                h += m * s1;
                cg[i] = m * d2;
                ch[i] = m * d1;
            }
        }
        let wt = self.net.w.transpose();
        DcEval {
            g,
            h,
            grad_g: &wt * cg,
            grad_h: &wt * ch,
        }
    }

    fn f(&self, delta: &DVector<f64>) -> f64 {
        let e = self.eval(delta);
        e.g - e.h
    }
}

/// `(f, g, h)` at `Δ`, where `f = g − h = y·v⊺σ(W(x+Δ))`.
pub fn nn_attack_objective(delta: &DVector<f64>, net: &TwoLayerNet, s: &LabeledSample) -> Result<(f64, f64, f64)> {
    let obj = DcObjective::new(net, s)?;
    ensure_dim(net.input_dim(), delta.len())?;
    ensure_finite(delta.as_slice(), "perturbation")?;
    let e = obj.eval(delta);
    Ok((e.g - e.h, e.g, e.h))
}

/// Radius of the Euclidean ball enclosing `ball` in `dim` dimensions.
fn euclidean_reach(ball: &NormBall, dim: usize) -> f64 {
    let p = ball.norm.exponent();
    let expo = if p.is_infinite() { 0.5 } else { (0.5 - 1.0 / p).max(0.0) };
    ball.radius * (dim as f64).powf(expo)
}

/// `min_{Δ ∈ ball} g(Δ) − u⊺Δ` by normalized projected subgradient steps `c/√t`,
/// started at `start` and returning the best iterate seen.
fn solve_convex_part(
    obj: &DcObjective,
    u: &DVector<f64>,
    ball: &NormBall,
    start: &DVector<f64>,
    step: f64,
    steps: usize,
) -> DVector<f64> {
    let value = |d: &DVector<f64>, e: &DcEval| e.g - u.dot(d);
    let mut cur = start.clone();
    let mut e = obj.eval(&cur);
    let mut best = cur.clone();
    let mut best_val = value(&cur, &e);
    for t in 1..=steps {
        let grad = &e.grad_g - u;
        let gn = grad.norm();
        if gn == 0.0 {
            break;
        }
        let next = project_onto_ball(&(&cur - grad * (step / (t as f64).sqrt() / gn)), ball);
        cur = next;
        e = obj.eval(&cur);
        let val = value(&cur, &e);
        if val < best_val {
            best_val = val;
            best = cur.clone();
        }
    }
    best
}

fn run_dca(obj: &DcObjective, ball: &NormBall, start: DVector<f64>, opts: &DcaOptions) -> DcaTrace {
    let reach = euclidean_reach(ball, start.len());
    let mut cur = start;
    let mut f_cur = obj.f(&cur);
    let mut iterates = vec![(cur.clone(), f_cur)];
    let mut converged = false;
    let mut iterations = 0;
    for k in 0..opts.max_iter {
        iterations = k + 1;
        let u = obj.eval(&cur).grad_h;
        // Later subproblems start near their solution, so they get shorter steps.
        let step = reach * 0.5f64.powi(k.min(40) as i32).max(1e-3);
        let next = solve_convex_part(obj, &u, ball, &cur, step, opts.inner_steps);
        let f_next = obj.f(&next);
        let (next, f_next) = if f_next <= f_cur { (next, f_next) } else { (cur.clone(), f_cur) };
        let change = (f_cur - f_next).abs();
        cur = next;
        f_cur = f_next;
        iterates.push((cur.clone(), f_cur));
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    DcaTrace {
        iterates,
        converged,
        iterations,
    }
}

/// Minimizes `y·v⊺σ(W(x+Δ))` over the ball with DCA, which maximizes the
/// logistic loss of the network on the perturbed sample.
pub fn dca_attack(
    net: &TwoLayerNet,
    s: &LabeledSample,
    ball: &NormBall,
    tol: f64,
    max_iter: usize,
) -> Result<(AttackResult, DcaTrace)> {
    let opts = DcaOptions {
        tol,
        max_iter,
        ..DcaOptions::default()
    };
    dca_attack_with(net, s, ball, &opts)
}

pub fn dca_attack_with(
    net: &TwoLayerNet,
    s: &LabeledSample,
    ball: &NormBall,
    opts: &DcaOptions,
) -> Result<(AttackResult, DcaTrace)> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidInput("DCA needs tol > 0 and max_iter >= 1".into()));
    }
    let obj = DcObjective::new(net, s)?;
    let d = s.dim();
    let zero = DVector::zeros(d);

    if ball.radius == 0.0 {
        let f0 = obj.f(&zero);
        let trace = DcaTrace {
            iterates: vec![(zero.clone(), f0), (zero.clone(), f0)],
            converged: true,
            iterations: 1,
        };
        return Ok((finish(zero, f0, false), trace));
    }

    let mut best = run_dca(&obj, ball, zero.clone(), opts);
    if opts.linear_restart {
        let e = obj.eval(&zero);
        let slope = e.grad_g - e.grad_h;
        if slope.iter().any(|&x| x != 0.0) {
            let dir = dual_subgradient(&slope, ball.norm)?;
            let start = -scale_to_budget(&dir.v, ball)?;
            let other = run_dca(&obj, ball, start, opts);
            if final_value(&other) < final_value(&best) {
                best = other;
            }
        }
    }
    if opts.surface_starts > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let axes = (0..2 * d).map(|k| {
            let mut e = DVector::zeros(d);
            e[k / 2] = if k % 2 == 0 { ball.radius } else { -ball.radius };
            e
        });
        let samples: Vec<DVector<f64>> = (0..opts.surface_starts).map(|_| ball.sample_surface(d, &mut rng)).collect();
        for start in axes.chain(samples) {
            let other = run_dca(&obj, ball, start, opts);
            if final_value(&other) < final_value(&best) {
                best = other;
            }
        }
    }
    let (delta, f) = best.iterates.last().cloned().expect("trace is never empty");
    let flat = obj.a.iter().all(|&a| a == 0.0);
    Ok((finish(delta, f, flat), best))
}

fn final_value(t: &DcaTrace) -> f64 {
    t.iterates.last().map(|p| p.1).unwrap_or(f64::INFINITY)
}

fn finish(delta: DVector<f64>, f: f64, degenerate: bool) -> AttackResult {
    AttackResult {
        delta,
        objective: softplus(-f),
        active: true,
        degenerate,
    }
}
