//! The plug-in robust training loop: attack every sample with the current
//! parameters, then take a full-batch gradient step on the attacked samples.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::attack::{
    attack_hinge, attack_logistic, attack_squared, check_label, sigmoid, softplus, LabeledSample, LinearModel,
};
use crate::error::{ensure_dim, Error, Result};
use crate::ggm::{ggm_attack_l2, ggm_attack_linf, sorted_eigen, PrecisionMatrix};
use crate::mc::{
    maxmargin_attack_fro, maxmargin_attack_linf, mc_attack_fro, mc_attack_linf, PartialMatrix, SparsePerturbation,
};
use crate::nn::{dca_attack_with, ActivationKind, DcaOptions, TwoLayerNet};
use crate::norms::{NormBall, NormKind};

/// Eigenvalue floor applied to the precision matrix after every step.
pub const PD_FLOOR: f64 = 1e-8;
/// A robust loss above this aborts training.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// DCA settings inside the training loop: looser and with fewer starts than a
/// standalone attack, since it runs once per sample per step.
fn training_dca() -> DcaOptions {
    DcaOptions {
        tol: 1e-6,
        max_iter: 50,
        inner_steps: 200,
        linear_restart: true,
        surface_starts: 4,
        seed: 0x0dca,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    SquaredRegression,
    Logistic,
    Hinge,
    TwoLayerNN { activation: ActivationKind, hidden: usize },
    Ggm,
    MatrixCompletion,
    MaxMarginMC,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::SquaredRegression => "regression",
            Family::Logistic => "logistic",
            Family::Hinge => "hinge",
            Family::TwoLayerNN { .. } => "nn",
            Family::Ggm => "ggm",
            Family::MatrixCompletion => "mc",
            Family::MaxMarginMC => "maxmargin",
        }
    }

    fn is_matrix(&self) -> bool {
        matches!(self, Family::MatrixCompletion | Family::MaxMarginMC)
    }
}

/// A problem family together with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    pub family: Family,
}

impl ProblemSpec {
    pub fn new(family: Family) -> Self {
        Self { family }
    }

    /// Checks that `ball` is one the family has an attack for.
    ///
    /// GGM takes `ℓ2` or `ℓ∞`; the matrix families take Frobenius (`L2`) or
    /// entrywise (`Linf`).
    pub fn check_ball(&self, ball: &NormBall) -> Result<()> {
        let ok = match self.family {
            Family::Ggm => matches!(ball.norm, NormKind::L2 | NormKind::Linf),
            f if f.is_matrix() => matches!(ball.norm, NormKind::L2 | NormKind::Linf),
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{} has no attack for the {} ball",
                self.family.name(),
                ball.norm
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    NoError,
    Random,
    Proposed,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::NoError, Mode::Random, Mode::Proposed];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::NoError => "no_error",
            Mode::Random => "random",
            Mode::Proposed => "proposed",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "no_error" | "noerror" | "none" => Ok(Mode::NoError),
            "random" => Ok(Mode::Random),
            "proposed" => Ok(Mode::Proposed),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub eta: f64,
    pub ball: NormBall,
    pub mode: Mode,
    pub seed: u64,
    /// Trace-norm weight for the matrix families, `ℓ1` weight for GGM.
    pub reg_c: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("T must be at least 1".into()));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.reg_c.is_finite() && self.reg_c >= 0.0) {
            return Err(Error::Config(format!("reg_c must be nonnegative, got {}", self.reg_c)));
        }
        Ok(())
    }
}

/// Training or test data for one family.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    /// Regression, classification and network samples.
    Labeled(Vec<LabeledSample>),
    /// Unlabeled observations for GGM.
    Points(Vec<DVector<f64>>),
    /// Observed entries for the matrix families.
    Matrix(PartialMatrix),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Labeled(v) => v.len(),
            Dataset::Points(v) => v.len(),
            Dataset::Matrix(m) => usize::from(!m.is_empty()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sample(&self, i: usize) -> Sample<'_> {
        match self {
            Dataset::Labeled(v) => Sample::Labeled(&v[i]),
            Dataset::Points(v) => Sample::Point(&v[i]),
            Dataset::Matrix(m) => Sample::Matrix(m),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Sample<'a> {
    Labeled(&'a LabeledSample),
    Point(&'a DVector<f64>),
    Matrix(&'a PartialMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Perturbed {
    Labeled(LabeledSample),
    Point(DVector<f64>),
    Matrix(PartialMatrix),
}

/// Model parameters; gradients use the same shape.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Linear(LinearModel),
    Net(TwoLayerNet),
    /// Precision matrix `Ω`.
    Precision(DMatrix<f64>),
    /// Completed matrix `Y`.
    Completion(DMatrix<f64>),
}

impl Params {
    /// A parameter-shaped zero.
    pub fn zeros_like(&self) -> Params {
        match self {
            Params::Linear(m) => Params::Linear(LinearModel::zeros(m.w.len())),
            Params::Net(n) => Params::Net(TwoLayerNet {
                w: DMatrix::zeros(n.w.nrows(), n.w.ncols()),
                v: DVector::zeros(n.v.len()),
                activation: n.activation,
            }),
            Params::Precision(m) => Params::Precision(DMatrix::zeros(m.nrows(), m.ncols())),
            Params::Completion(m) => Params::Completion(DMatrix::zeros(m.nrows(), m.ncols())),
        }
    }

    /// All coordinates, in a fixed order.
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Params::Linear(m) => m.w.as_slice().to_vec(),
            Params::Net(n) => n.w.as_slice().iter().chain(n.v.as_slice()).copied().collect(),
            Params::Precision(m) | Params::Completion(m) => m.as_slice().to_vec(),
        }
    }

    /// Rebuilds parameters of this shape from [`Params::to_vec`] output.
    pub fn with_values(&self, values: &[f64]) -> Params {
        match self {
            Params::Linear(_) => Params::Linear(LinearModel::new(DVector::from_column_slice(values))),
            Params::Net(n) => {
                let k = n.w.len();
                Params::Net(TwoLayerNet {
                    w: DMatrix::from_column_slice(n.w.nrows(), n.w.ncols(), &values[..k]),
                    v: DVector::from_column_slice(&values[k..]),
                    activation: n.activation,
                })
            }
            Params::Precision(m) => Params::Precision(DMatrix::from_column_slice(m.nrows(), m.ncols(), values)),
            Params::Completion(m) => Params::Completion(DMatrix::from_column_slice(m.nrows(), m.ncols(), values)),
        }
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Params::Linear(m) => vec![m.w.as_mut_slice()],
            Params::Net(n) => vec![n.w.as_mut_slice(), n.v.as_mut_slice()],
            Params::Precision(m) | Params::Completion(m) => vec![m.as_mut_slice()],
        }
    }

    fn slices(&self) -> Vec<&[f64]> {
        match self {
            Params::Linear(m) => vec![m.w.as_slice()],
            Params::Net(n) => vec![n.w.as_slice(), n.v.as_slice()],
            Params::Precision(m) | Params::Completion(m) => vec![m.as_slice()],
        }
    }

    /// `self += other`, coordinate by coordinate.
    fn accumulate(&mut self, other: &Params) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    /// `self − scale·grad`, coordinate by coordinate.
    fn stepped(&self, grad: &Params, scale: f64) -> Params {
        let mut out = self.clone();
        for (a, b) in out.slices_mut().into_iter().zip(grad.slices()) {
            for (x, g) in a.iter_mut().zip(b) {
                *x -= scale * g;
            }
        }
        out
    }
}

fn ball_for_matrix(ball: &NormBall) -> Result<bool> {
    match ball.norm {
        NormKind::L2 => Ok(true),
        NormKind::Linf => Ok(false),
        other => Err(Error::Config(format!("matrix attacks take Frobenius or entrywise balls, not {other}"))),
    }
}

fn mismatch(what: &str) -> Error {
    Error::InvalidInput(format!("parameters and data do not fit the family ({what})"))
}

/// Draws a surface point of the budget for `len` coordinates (the comparison baseline).
fn random_delta<R: Rng + ?Sized>(ball: &NormBall, len: usize, rng: &mut R) -> DVector<f64> {
    ball.sample_surface(len, rng)
}

/// The worst-case (or random, or zero) perturbation of one sample under `mode`.
///
/// Proposed mode dispatches to the family's attack. For GGM the caller may pass
/// a prepared [`PrecisionMatrix`] to avoid one eigendecomposition per sample.
pub fn perturb<R: Rng + ?Sized>(
    spec: &ProblemSpec,
    params: &Params,
    sample: Sample<'_>,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<Perturbed> {
    perturb_with(spec, params, sample, config, None, rng)
}

fn perturb_with<R: Rng + ?Sized>(
    spec: &ProblemSpec,
    params: &Params,
    sample: Sample<'_>,
    config: &TrainConfig,
    precision: Option<&PrecisionMatrix>,
    rng: &mut R,
) -> Result<Perturbed> {
    let ball = &config.ball;
    match sample {
        Sample::Labeled(s) => {
            let delta = match config.mode {
                Mode::NoError => return Ok(Perturbed::Labeled(s.clone())),
                Mode::Random => random_delta(ball, s.dim(), rng),
                Mode::Proposed => match (spec.family, params) {
                    (Family::SquaredRegression, Params::Linear(m)) => attack_squared(s, m, ball)?.delta,
                    (Family::Logistic, Params::Linear(m)) => attack_logistic(s, m, ball)?.delta,
                    (Family::Hinge, Params::Linear(m)) => attack_hinge(s, m, ball)?.delta,
                    (Family::TwoLayerNN { .. }, Params::Net(n)) => dca_attack_with(n, s, ball, &training_dca())?.0.delta,
                    _ => return Err(mismatch("labeled sample")),
                },
            };
            Ok(Perturbed::Labeled(s.perturbed(&delta)))
        }
        Sample::Point(x) => {
            let delta = match config.mode {
                Mode::NoError => return Ok(Perturbed::Point(x.clone())),
                Mode::Random => random_delta(ball, x.len(), rng),
                Mode::Proposed => {
                    let Params::Precision(om) = params else {
                        return Err(mismatch("point sample"));
                    };
                    let owned;
                    let pm = match precision {
                        Some(pm) => pm,
                        None => {
                            owned = PrecisionMatrix::new(om.clone())?;
                            &owned
                        }
                    };
                    match ball.norm {
                        NormKind::L2 => ggm_attack_l2(x, pm, ball.radius)?.0.delta,
                        NormKind::Linf => ggm_attack_linf(x, pm, ball.radius)?.0.delta,
                        other => return Err(Error::Config(format!("ggm has no attack for the {other} ball"))),
                    }
                }
            };
            Ok(Perturbed::Point(x + delta))
        }
        Sample::Matrix(m) => {
            let frobenius = ball_for_matrix(ball)?;
            let delta = match config.mode {
                Mode::NoError => return Ok(Perturbed::Matrix(m.clone())),
                Mode::Random => {
                    let d = random_delta(ball, m.len(), rng);
                    SparsePerturbation {
                        rows: m.rows(),
                        cols: m.cols(),
                        entries: m.entries().iter().zip(d.iter()).map(|(&(i, j, _), &v)| (i, j, v)).collect(),
                    }
                }
                Mode::Proposed => {
                    let Params::Completion(y) = params else {
                        return Err(mismatch("matrix sample"));
                    };
                    match (spec.family, frobenius) {
                        (Family::MatrixCompletion, true) => mc_attack_fro(m, y, ball.radius)?,
                        (Family::MatrixCompletion, false) => mc_attack_linf(m, y, ball.radius)?,
                        (Family::MaxMarginMC, true) => maxmargin_attack_fro(m, y, ball.radius)?,
                        (Family::MaxMarginMC, false) => maxmargin_attack_linf(m, y, ball.radius)?,
                        _ => return Err(mismatch("matrix sample")),
                    }
                }
            };
            Ok(Perturbed::Matrix(m.perturbed(&delta)))
        }
    }
}

/// `−log det Ω` and `Ω⁻¹` through a Cholesky factorization.
fn logdet_and_inverse(omega: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    let chol = omega.clone().cholesky().ok_or(Error::Singular)?;
    let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    if !logdet.is_finite() {
        return Err(Error::Singular);
    }
    Ok((-logdet, chol.inverse()))
}

/// Loss of one (attacked) sample and its gradient in the parameters.
///
/// - regression: `(w⊺x − y)²`
/// - logistic: `log(1 + exp(−y·w⊺x))`
/// - hinge: `max(0, 1 − y·w⊺x)`, gradient 0 at the kink
/// - network: `log(1 + exp(−y·v⊺σ(Wx)))`
/// - GGM: `−log det Ω + x⊺Ωx + c·Σ|Ω_ij|`, subgradient 0 where `Ω_ij = 0`
/// - completion: mean over `P` of `(X + Δ − Y)²`
/// - max-margin: mean over `P` of `max(0, 1 − (X + Δ)·Y)`
pub fn loss_and_grad(spec: &ProblemSpec, params: &Params, sample: &Perturbed, reg_c: f64) -> Result<(f64, Params)> {
    match (spec.family, params, sample) {
        (Family::SquaredRegression | Family::Logistic | Family::Hinge, Params::Linear(m), Perturbed::Labeled(s)) => {
            ensure_dim(m.w.len(), s.dim())?;
            let t = m.predict(&s.x);
            let (loss, coef) = match spec.family {
                Family::SquaredRegression => {
                    let r = t - s.y;
                    (r * r, 2.0 * r)
                }
                Family::Logistic => {
                    check_label(s.y)?;
                    (softplus(-s.y * t), -s.y * sigmoid(-s.y * t))
                }
                _ => {
                    check_label(s.y)?;
                    let slack = 1.0 - s.y * t;
                    if slack > 0.0 {
                        (slack, -s.y)
                    } else {
                        (0.0, 0.0)
                    }
                }
            };
            Ok((loss, Params::Linear(LinearModel::new(&s.x * coef))))
        }
        (Family::TwoLayerNN { .. }, Params::Net(n), Perturbed::Labeled(s)) => {
            check_label(s.y)?;
            ensure_dim(n.input_dim(), s.dim())?;
            let z = &n.w * &s.x;
            let act = z.map(|zi| n.activation.value(zi));
            let score = n.v.dot(&act);
            let loss = softplus(-s.y * score);
            let dscore = -s.y * sigmoid(-s.y * score);
            let slope = DVector::from_fn(z.len(), |i, _| n.v[i] * n.activation.derivative(z[i]));
            let gw = (&slope * s.x.transpose()) * dscore;
            let gv = act * dscore;
            Ok((
                loss,
                Params::Net(TwoLayerNet {
                    w: gw,
                    v: gv,
                    activation: n.activation,
                }),
            ))
        }
        (Family::Ggm, Params::Precision(om), Perturbed::Point(x)) => {
            ensure_dim(om.nrows(), x.len())?;
            let (neg_logdet, inv) = logdet_and_inverse(om)?;
            let quad = x.dot(&(om * x));
            let l1: f64 = om.iter().map(|v| v.abs()).sum();
            let loss = neg_logdet + quad + reg_c * l1;
            let grad = -inv + x * x.transpose() + om.map(|v| reg_c * sign0(v));
            Ok((loss, Params::Precision(grad)))
        }
        (Family::MatrixCompletion | Family::MaxMarginMC, Params::Completion(y), Perturbed::Matrix(m)) => {
            if y.nrows() != m.rows() || y.ncols() != m.cols() {
                return Err(mismatch("matrix shape"));
            }
            let n = m.len().max(1) as f64;
            let mut grad = DMatrix::zeros(y.nrows(), y.ncols());
            let mut loss = 0.0;
            for &(i, j, v) in m.entries() {
                if spec.family == Family::MatrixCompletion {
                    let r = v - y[(i, j)];
                    loss += r * r;
                    grad[(i, j)] = -2.0 * r / n;
                } else {
                    let slack = 1.0 - v * y[(i, j)];
                    if slack > 0.0 {
                        loss += slack;
                        grad[(i, j)] = -v / n;
                    }
                }
            }
            Ok((loss / n, Params::Completion(grad)))
        }
        _ => Err(mismatch("loss")),
    }
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Singular-value soft-thresholding: the proximal map of `τ‖·‖_tr`.
pub fn svt_prox(y: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    if tau <= 0.0 || y.is_empty() {
        return y.clone();
    }
    let svd = y.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let shrunk = svd.singular_values.map(|s| (s - tau).max(0.0));
    u * DMatrix::from_diagonal(&shrunk) * vt
}

/// Symmetrizes and floors the eigenvalues at [`PD_FLOOR`].
pub fn project_pd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let (vals, vecs) = sorted_eigen(&sym);
    if vals[0] >= PD_FLOOR {
        return sym;
    }
    let floored = vals.map(|l| l.max(PD_FLOOR));
    let out = &vecs * DMatrix::from_diagonal(&floored) * vecs.transpose();
    (&out + out.transpose()) * 0.5
}

/// Starting parameters: zeros for linear and matrix models, `I` for GGM, and a
/// seeded Gaussian draw for networks.
pub fn init_params(spec: &ProblemSpec, data: &Dataset, seed: u64) -> Result<Params> {
    match (spec.family, data) {
        (Family::SquaredRegression | Family::Logistic | Family::Hinge, Dataset::Labeled(v)) => {
            let d = v.first().ok_or(Error::EmptyDataset)?.dim();
            Ok(Params::Linear(LinearModel::zeros(d)))
        }
        (Family::TwoLayerNN { activation, hidden }, Dataset::Labeled(v)) => {
            let d = v.first().ok_or(Error::EmptyDataset)?.dim();
            if hidden == 0 {
                return Err(Error::Config("hidden must be at least 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            let wd = Normal::new(0.0, 1.0 / (d as f64).sqrt()).expect("positive scale");
            let vd = Normal::new(0.0, 1.0 / (hidden as f64).sqrt()).expect("positive scale");
            let w = DMatrix::from_fn(hidden, d, |_, _| wd.sample(&mut rng));
            let v = DVector::from_fn(hidden, |_, _| vd.sample(&mut rng));
            Ok(Params::Net(TwoLayerNet::new(w, v, activation)?))
        }
        (Family::Ggm, Dataset::Points(v)) => {
            let p = v.first().ok_or(Error::EmptyDataset)?.len();
            Ok(Params::Precision(DMatrix::identity(p, p)))
        }
        (Family::MatrixCompletion | Family::MaxMarginMC, Dataset::Matrix(m)) => {
            Ok(Params::Completion(DMatrix::zeros(m.rows(), m.cols())))
        }
        _ => Err(mismatch("dataset")),
    }
}

/// Fitted parameters and the mean attacked loss before each step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: Params,
    pub history: Vec<f64>,
}

/// Seed for the random draws of sample `index` at iteration `iter`.
fn stream_seed(seed: u64, iter: usize, index: usize) -> u64 {
    let mut z = seed ^ (iter as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (index as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One pass over the data: mean attacked loss and the summed gradient.
///
/// Samples run in parallel; results are summed in index order so the outcome
/// does not depend on scheduling.
fn attacked_gradient(
    spec: &ProblemSpec,
    params: &Params,
    data: &Dataset,
    config: &TrainConfig,
    iter: usize,
) -> Result<(f64, Params)> {
    let precision = match (spec.family, params, config.mode) {
        (Family::Ggm, Params::Precision(om), Mode::Proposed) => Some(PrecisionMatrix::new(om.clone())?),
        _ => None,
    };
    let n = data.len();
    let parts: Vec<Result<(f64, Params)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, iter, i));
            let attacked = perturb_with(spec, params, data.sample(i), config, precision.as_ref(), &mut rng)?;
            loss_and_grad(spec, params, &attacked, config.reg_c)
        })
        .collect();
    let mut total = params.zeros_like();
    let mut loss = 0.0;
    for part in parts {
        let (l, g) = part?;
        loss += l;
        total.accumulate(&g);
    }
    Ok((loss / n as f64, total))
}

/// Runs `T` full-batch iterations of attack-then-step.
///
/// The step is `w ← w − (η/n)·Σ_i ∇l(x_i + Δ_i)`. GGM iterates are projected to
/// `λ_min ≥ 1e-8`, and a step that leaves `Ω` numerically singular is retried
/// with half the step size. Matrix models get the trace-norm prox with threshold
/// `η·c` after every step.
pub fn train(spec: &ProblemSpec, data: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    let init = init_params(spec, data, config.seed)?;
    train_from(spec, data, config, init)
}

pub fn train_from(spec: &ProblemSpec, data: &Dataset, config: &TrainConfig, init: Params) -> Result<TrainOutcome> {
    config.validate()?;
    spec.check_ball(&config.ball)?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.len() as f64;
    let mut params = init;
    let mut history = Vec::with_capacity(config.iterations);
    for iter in 0..config.iterations {
        let (loss, grad) = attacked_gradient(spec, &params, data, config, iter)?;
        if !loss.is_finite() || loss > DIVERGENCE_LIMIT {
            return Err(Error::Diverged { iteration: iter, loss });
        }
        history.push(loss);
        params = match &params {
            Params::Precision(_) => ggm_step(&params, &grad, config.eta / n)?,
            Params::Completion(_) => match params.stepped(&grad, config.eta / n) {
                Params::Completion(y) => Params::Completion(svt_prox(&y, config.eta * config.reg_c)),
                _ => unreachable!("step keeps the parameter shape"),
            },
            _ => params.stepped(&grad, config.eta / n),
        };
    }
    Ok(TrainOutcome { params, history })
}

fn ggm_step(params: &Params, grad: &Params, scale: f64) -> Result<Params> {
    let mut scale = scale;
    for _ in 0..60 {
        if let Params::Precision(next) = params.stepped(grad, scale) {
            let next = project_pd(&next);
            if logdet_and_inverse(&next).is_ok() {
                return Ok(Params::Precision(next));
            }
        }
        scale *= 0.5;
    }
    Err(Error::Singular)
}

/// A test-set score and whether larger is better.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    pub name: &'static str,
    pub value: f64,
    pub higher_is_better: bool,
}

impl Metric {
    /// `self` is at least as good as `other`.
    pub fn no_worse_than(&self, other: &Metric) -> bool {
        if self.higher_is_better {
            self.value >= other.value
        } else {
            self.value <= other.value
        }
    }
}

/// MSE for regression and completion, accuracy for the classifiers and for
/// max-margin sign recovery, and `log det Ω − mean x⊺Ωx` for GGM.
pub fn evaluate(spec: &ProblemSpec, params: &Params, test: &Dataset) -> Result<Metric> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let accuracy = |correct: usize, total: usize| Metric {
        name: "accuracy",
        value: correct as f64 / total as f64,
        higher_is_better: true,
    };
    match (spec.family, params, test) {
        (Family::SquaredRegression, Params::Linear(m), Dataset::Labeled(v)) => {
            let mse = v.iter().map(|s| (m.predict(&s.x) - s.y).powi(2)).sum::<f64>() / v.len() as f64;
            Ok(Metric {
                name: "mse",
                value: mse,
                higher_is_better: false,
            })
        }
        (Family::Logistic | Family::Hinge, Params::Linear(m), Dataset::Labeled(v)) => {
            let correct = v.iter().filter(|s| label_of(m.predict(&s.x)) == s.y).count();
            Ok(accuracy(correct, v.len()))
        }
        (Family::TwoLayerNN { .. }, Params::Net(n), Dataset::Labeled(v)) => {
            let correct = v.iter().filter(|s| label_of(n.score(&s.x)) == s.y).count();
            Ok(accuracy(correct, v.len()))
        }
        (Family::Ggm, Params::Precision(om), Dataset::Points(v)) => {
            let (neg_logdet, _) = logdet_and_inverse(om)?;
            let mean_quad = v.iter().map(|x| x.dot(&(om * x))).sum::<f64>() / v.len() as f64;
            Ok(Metric {
                name: "log_likelihood",
                value: -neg_logdet - mean_quad,
                higher_is_better: true,
            })
        }
        (Family::MatrixCompletion, Params::Completion(y), Dataset::Matrix(m)) => {
            let mse = m.entries().iter().map(|&(i, j, v)| (y[(i, j)] - v).powi(2)).sum::<f64>() / m.len() as f64;
            Ok(Metric {
                name: "mse",
                value: mse,
                higher_is_better: false,
            })
        }
        (Family::MaxMarginMC, Params::Completion(y), Dataset::Matrix(m)) => {
            let correct = m.entries().iter().filter(|&&(i, j, v)| label_of(y[(i, j)]) == v).count();
            Ok(accuracy(correct, m.len()))
        }
        _ => Err(mismatch("evaluation")),
    }
}

fn label_of(score: f64) -> f64 {
    if score >= 0.0 {
        1.0
    } else {
        -1.0
    }
}
