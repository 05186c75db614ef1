//! Seeded synthetic train/test pairs with a distribution shift at test time.
//!
//! - regression: fixed sparse `w_true`, train `x ~ N(0, I)`, test
//!   `x ~ N(shift·1, I)`, label noise `noise`.
//! - classification (logistic, hinge, networks): `x | y ~ N(y·m, I)` with a
//!   sparse mean `m`; at test time both class means move `shift` toward the
//!   decision boundary.
//! - GGM: train from a chain precision `Ω_A`, test from `Ω_B`, which toggles
//!   10% of the possible edges.
//! - completion: a rank-`rank` truth; a fraction `observed` of the entries is
//!   the training set with noise `noise`, the rest is the test set with
//!   `N(0, 0.25)` noise. Max-margin uses the signs of the same values.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::attack::LabeledSample;
use crate::error::{Error, Result};
use crate::mc::PartialMatrix;
use crate::trainer::{Dataset, Family};

/// Standard deviation of the noise on held-out matrix entries.
pub const TEST_ENTRY_STD: f64 = 0.5;

/// Fraction of GGM edges that differ between the train and test precision.
pub const EDGE_CHANGE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_train: usize,
    pub n_test: usize,
    /// Features, GGM variables, or matrix rows.
    pub dim: usize,
    /// Matrix columns.
    pub cols: usize,
    pub rank: usize,
    /// Fraction of matrix entries used for training.
    pub observed: f64,
    pub noise: f64,
    pub shift: f64,
}

impl SynthConfig {
    pub fn defaults_for(family: Family) -> Self {
        let base = Self {
            n_train: 200,
            n_test: 1000,
            dim: 10,
            cols: 20,
            rank: 2,
            observed: 0.3,
            noise: 0.1,
            shift: 0.5,
        };
        match family {
            Family::Ggm => Self { dim: 8, ..base },
            Family::MatrixCompletion | Family::MaxMarginMC => Self { dim: 20, ..base },
            _ => base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_train == 0 || self.n_test == 0 {
            return bad("n_train and n_test must be positive");
        }
        if self.dim == 0 || self.cols == 0 {
            return bad("dim and cols must be positive");
        }
        if self.rank == 0 || self.rank > self.dim.min(self.cols) {
            return bad("rank must be between 1 and min(dim, cols)");
        }
        if !(self.observed > 0.0 && self.observed < 1.0) {
            return bad("observed must lie strictly between 0 and 1");
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return bad("noise must be nonnegative");
        }
        if !self.shift.is_finite() {
            return bad("shift must be finite");
        }
        Ok(())
    }
}

/// Train and test sets for `family`, fully determined by `seed`.
pub fn generate(family: Family, cfg: &SynthConfig, seed: u64) -> Result<(Dataset, Dataset)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match family {
        Family::SquaredRegression => Ok(regression(cfg, &mut rng)),
        Family::Logistic | Family::Hinge | Family::TwoLayerNN { .. } => Ok(classification(cfg, &mut rng)),
        Family::Ggm => ggm(cfg, &mut rng),
        Family::MatrixCompletion => completion(cfg, &mut rng, false),
        Family::MaxMarginMC => completion(cfg, &mut rng, true),
    }
}

fn gaussian(dim: usize, mean: &DVector<f64>, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(dim, |i, _| {
        let z: f64 = StandardNormal.sample(rng);
        mean[i] + z
    })
}

/// Alternating `±1` on the first half of the coordinates.
pub fn regression_truth(dim: usize) -> DVector<f64> {
    let k = dim.div_ceil(2);
    DVector::from_fn(dim, |i, _| if i >= k { 0.0 } else if i % 2 == 0 { 1.0 } else { -1.0 })
}

fn regression(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> (Dataset, Dataset) {
    let w = regression_truth(cfg.dim);
    let noise = Normal::new(0.0, cfg.noise).expect("validated");
    let draw = |n: usize, mean: &DVector<f64>, rng: &mut ChaCha8Rng| -> Vec<LabeledSample> {
        (0..n)
            .map(|_| {
                let x = gaussian(cfg.dim, mean, rng);
                let y = w.dot(&x) + noise.sample(rng);
                LabeledSample::new(x, y)
            })
            .collect()
    };
    let train = draw(cfg.n_train, &DVector::zeros(cfg.dim), rng);
    let test = draw(cfg.n_test, &DVector::from_element(cfg.dim, cfg.shift), rng);
    (Dataset::Labeled(train), Dataset::Labeled(test))
}

/// Class mean: `1` on the first `⌈dim/3⌉` coordinates.
pub fn class_mean(dim: usize) -> DVector<f64> {
    let k = dim.div_ceil(3);
    DVector::from_fn(dim, |i, _| if i < k { 1.0 } else { 0.0 })
}

fn classification(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> (Dataset, Dataset) {
    let m = class_mean(cfg.dim);
    let toward_boundary = &m * (cfg.shift / m.norm());
    let draw = |n: usize, mean: &DVector<f64>, rng: &mut ChaCha8Rng| -> Vec<LabeledSample> {
        (0..n)
            .map(|_| {
                let y = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let x = gaussian(cfg.dim, &(mean * y), rng);
                LabeledSample::new(x, y)
            })
            .collect()
    };
    let train = draw(cfg.n_train, &m, rng);
    let test = draw(cfg.n_test, &(&m - toward_boundary), rng);
    (Dataset::Labeled(train), Dataset::Labeled(test))
}

/// Unit diagonal with `0.4` on the first off-diagonal.
pub fn chain_precision(p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else if i.abs_diff(j) == 1 {
            0.4
        } else {
            0.0
        }
    })
}

/// Toggles a `fraction` of the possible edges: present edges are removed,
/// absent ones get weight `±0.3`. The diagonal is raised if needed so the
/// smallest eigenvalue stays at least `0.1`.
pub fn perturb_edges(omega: &DMatrix<f64>, fraction: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let p = omega.nrows();
    let mut pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();
    let mut out = omega.clone();
    if pairs.is_empty() {
        return out;
    }
    let changes = ((fraction * pairs.len() as f64).round() as usize).max(1);
    pairs.shuffle(rng);
    for &(i, j) in &pairs[..changes] {
        let v = if out[(i, j)] != 0.0 {
            0.0
        } else if rng.random::<bool>() {
            0.3
        } else {
            -0.3
        };
        out[(i, j)] = v;
        out[(j, i)] = v;
    }
    let lmin = out.symmetric_eigenvalues().min();
    if lmin < 0.1 {
        for i in 0..p {
            out[(i, i)] += 0.1 - lmin;
        }
    }
    out
}

/// `n` draws from `N(0, Ω⁻¹)`.
pub fn sample_gaussian(omega: &DMatrix<f64>, n: usize, rng: &mut impl Rng) -> Result<Vec<DVector<f64>>> {
    let p = omega.nrows();
    let l = omega
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("sampling precision".into()))?
        .l();
    let lt = l.transpose();
    (0..n)
        .map(|_| {
            let z = DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
            lt.solve_upper_triangular(&z).ok_or(Error::Singular)
        })
        .collect()
}

fn ggm(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<(Dataset, Dataset)> {
    let omega_a = chain_precision(cfg.dim);
    let omega_b = perturb_edges(&omega_a, EDGE_CHANGE_FRACTION, rng);
    let train = sample_gaussian(&omega_a, cfg.n_train, rng)?;
    let test = sample_gaussian(&omega_b, cfg.n_test, rng)?;
    Ok((Dataset::Points(train), Dataset::Points(test)))
}

fn completion(cfg: &SynthConfig, rng: &mut ChaCha8Rng, signs: bool) -> Result<(Dataset, Dataset)> {
    let (r, c, k) = (cfg.dim, cfg.cols, cfg.rank);
    let factor = Normal::new(0.0, (k as f64).powf(-0.25)).expect("positive scale");
    let u = DMatrix::from_fn(r, k, |_, _| factor.sample(rng));
    let v = DMatrix::from_fn(c, k, |_, _| factor.sample(rng));
    let truth = &u * v.transpose();

    let mut cells: Vec<(usize, usize)> = (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).collect();
    cells.shuffle(rng);
    let n_obs = ((cfg.observed * cells.len() as f64).round() as usize).clamp(1, cells.len() - 1);
    let (obs, held) = cells.split_at(n_obs);

    let train_noise = Normal::new(0.0, cfg.noise).expect("validated");
    let test_noise = Normal::new(0.0, TEST_ENTRY_STD).expect("positive scale");
    let label = |v: f64| if signs { if v >= 0.0 { 1.0 } else { -1.0 } } else { v };
    let train: Vec<_> = obs
        .iter()
        .map(|&(i, j)| (i, j, label(truth[(i, j)] + train_noise.sample(rng))))
        .collect();
    let test: Vec<_> = held
        .iter()
        .map(|&(i, j)| (i, j, label(truth[(i, j)] + test_noise.sample(rng))))
        .collect();
    Ok((
        Dataset::Matrix(PartialMatrix::new(r, c, train)?),
        Dataset::Matrix(PartialMatrix::new(r, c, test)?),
    ))
}
