//! Worst-case perturbations of observed entries for matrix completion.
//!
//! Squared-loss completion `Σ_P (X_ij + Δ_ij − Y_ij)²` and max-margin completion
//! `Σ_P max(0, 1 − (X_ij + Δ_ij)·Y_ij)`, each under a Frobenius or an entrywise
//! budget on `Δ` restricted to the observed set `P`.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::attack::check_label;
use crate::error::{ensure_finite, Error, Result};

/// Observed entries of a `rows × cols` matrix, kept in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl PartialMatrix {
    pub fn new(rows: usize, cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for &(i, j, v) in &entries {
            if i >= rows || j >= cols {
                return Err(Error::IndexOutOfRange {
                    row: i as i64,
                    col: j as i64,
                    rows,
                    cols,
                });
            }
            if !seen.insert((i, j)) {
                return Err(Error::DuplicateEntry(i, j));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("entry ({i}, {j}) is not finite")));
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        Ok(Self { rows, cols, entries })
    }

    /// Every entry of `m` observed.
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        let entries = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j, m[(i, j)])))
            .collect();
        Self::new(m.nrows(), m.ncols(), entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// The observed value at `(i, j)`, if any.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries
            .binary_search_by(|&(a, b, _)| (a, b).cmp(&(i, j)))
            .ok()
            .map(|k| self.entries[k].2)
    }

    /// Errors unless every observed value is `±1`.
    pub fn require_labels(&self) -> Result<()> {
        self.entries.iter().try_for_each(|&(_, _, v)| check_label(v))
    }

    /// The same support with `Δ` added.
    pub fn perturbed(&self, delta: &SparsePerturbation) -> Self {
        let mut out = self.clone();
        for (e, d) in out.entries.iter_mut().zip(delta.aligned(self)) {
            e.2 += d;
        }
        out
    }

    fn check_shape(&self, y: &DMatrix<f64>) -> Result<()> {
        if y.nrows() != self.rows || y.ncols() != self.cols {
            return Err(Error::InvalidInput(format!(
                "model is {}x{} but the data is {}x{}",
                y.nrows(),
                y.ncols(),
                self.rows,
                self.cols
            )));
        }
        ensure_finite(y.as_slice(), "model matrix")
    }
}

/// `Δ` on (a subset of) the observed entries, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePerturbation {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparsePerturbation {
    pub fn zeros_like(x: &PartialMatrix) -> Self {
        Self {
            rows: x.rows,
            cols: x.cols,
            entries: x.entries.iter().map(|&(i, j, _)| (i, j, 0.0)).collect(),
        }
    }

    fn from_values(x: &PartialMatrix, values: impl IntoIterator<Item = f64>) -> Self {
        Self {
            rows: x.rows,
            cols: x.cols,
            entries: x.entries.iter().zip(values).map(|(&(i, j, _), d)| (i, j, d)).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.2.abs()))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries
            .binary_search_by_key(&(i, j), |&(r, c, _)| (r, c))
            .map(|k| self.entries[k].2)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for &(i, j, d) in &self.entries {
            m[(i, j)] = d;
        }
        m
    }

    /// Values lined up with the observed entries of `x` (0 where absent).
    fn aligned<'a>(&'a self, x: &'a PartialMatrix) -> impl Iterator<Item = f64> + 'a {
        x.entries.iter().map(move |&(i, j, _)| self.get(i, j))
    }
}

fn check_budget(eps: f64) -> Result<()> {
    if eps.is_finite() && eps >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("budget must be finite and nonnegative, got {eps}")))
    }
}

fn residuals(x: &PartialMatrix, y: &DMatrix<f64>) -> Vec<f64> {
    x.entries.iter().map(|&(i, j, v)| v - y[(i, j)]).collect()
}

/// `Σ_P (X_ij + Δ_ij − Y_ij)²`.
pub fn mc_loss(x: &PartialMatrix, y: &DMatrix<f64>, delta: &SparsePerturbation) -> f64 {
    x.entries
        .iter()
        .zip(delta.aligned(x))
        .map(|(&(i, j, v), d)| (v + d - y[(i, j)]).powi(2))
        .sum()
}

/// `Σ_P max(0, 1 − (X_ij + Δ_ij)·Y_ij)`.
pub fn maxmargin_loss(x: &PartialMatrix, y: &DMatrix<f64>, delta: &SparsePerturbation) -> f64 {
    x.entries
        .iter()
        .zip(delta.aligned(x))
        .map(|(&(i, j, v), d)| (1.0 - (v + d) * y[(i, j)]).max(0.0))
        .sum()
}

/// Frobenius-budget attack on squared completion: `Δ = ε·R/‖R‖_F` with `R = X − Y` on `P`.
/// A zero residual spreads the budget evenly, `ε/√|P|` per entry.
pub fn mc_attack_fro(x: &PartialMatrix, y: &DMatrix<f64>, eps: f64) -> Result<SparsePerturbation> {
    x.check_shape(y)?;
    check_budget(eps)?;
    if x.is_empty() || eps == 0.0 {
        return Ok(SparsePerturbation::zeros_like(x));
    }
    let r = residuals(x, y);
    let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        let share = eps / (x.len() as f64).sqrt();
        return Ok(SparsePerturbation::from_values(x, r.iter().map(|_| share)));
    }
    Ok(SparsePerturbation::from_values(x, r.iter().map(|v| eps * v / norm)))
}

/// The Lagrange multiplier `λ* = 1 + ‖R‖_F/ε` of the Frobenius attack, for which
/// `Δ = R/(λ* − 1)`. `None` when `ε = 0` or `R = 0`.
pub fn mc_dual_multiplier(x: &PartialMatrix, y: &DMatrix<f64>, eps: f64) -> Result<Option<f64>> {
    x.check_shape(y)?;
    check_budget(eps)?;
    let norm = residuals(x, y).iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok((eps > 0.0 && norm > 0.0).then(|| 1.0 + norm / eps))
}

/// Entrywise attack on squared completion: `Δ_ij = ε·sign(R_ij)`, `+ε` at zero residual.
pub fn mc_attack_linf(x: &PartialMatrix, y: &DMatrix<f64>, eps: f64) -> Result<SparsePerturbation> {
    x.check_shape(y)?;
    check_budget(eps)?;
    if eps == 0.0 {
        return Ok(SparsePerturbation::zeros_like(x));
    }
    let r = residuals(x, y);
    Ok(SparsePerturbation::from_values(x, r.iter().map(|&v| if v < 0.0 { -eps } else { eps })))
}

/// Entrywise attack on max-margin completion: `Δ_ij = −ε·Y_ij`.
pub fn maxmargin_attack_linf(x: &PartialMatrix, y: &DMatrix<f64>, eps: f64) -> Result<SparsePerturbation> {
    x.check_shape(y)?;
    x.require_labels()?;
    check_budget(eps)?;
    Ok(SparsePerturbation::from_values(
        x,
        x.entries.iter().map(|&(i, j, _)| if eps == 0.0 { 0.0 } else { -eps * y[(i, j)] }),
    ))
}

/// Outcome of the support search behind [`maxmargin_attack_fro`].
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSearch {
    /// Positions into the observed entries, ascending.
    pub support: Vec<usize>,
    /// `Σ_{S}(1 − Z_i) + ε‖Y_S‖ + Σ_{i∉S} max(0, 1 − Z_i)` at the returned support.
    pub value: f64,
    /// Branch and bound finished within its node budget, so the support is optimal.
    pub proven: bool,
    pub nodes: usize,
}

const NODE_BUDGET: usize = 2_000_000;

/// Finds the support `S` maximizing `Σ_S (1 − Z_i) + ε·sqrt(Σ_S Y_i²)`, `Z_i = X_i·Y_i`.
///
/// Spending the whole budget on `S` along `−Y_S/‖Y_S‖` gives the hinge sum above
/// whenever every entry of `S` stays active, and no perturbation does better.
/// Entries with `Z_i ≤ 1` always belong to an optimal `S`. The other entries only
/// pay off through the concave square-root term, so their marginal gains shrink as
/// `S` grows; that gives both a pruning rule and an upper bound for branch and bound.
pub fn maxmargin_support(z: &[f64], a: &[f64], eps: f64) -> SupportSearch {
    let n = z.len();
    let b: Vec<f64> = z.iter().map(|zi| 1.0 - zi).collect();
    let base: Vec<usize> = (0..n).filter(|&i| b[i] >= 0.0).collect();
    let b0: f64 = base.iter().map(|&i| b[i]).sum();
    let a0: f64 = base.iter().map(|&i| a[i]).sum();
    let gain = |i: usize, acc: f64| b[i] + eps * ((acc + a[i]).sqrt() - acc.sqrt());

    // Entries that can never pay off, even added first, are dropped.
    let mut cand: Vec<usize> = (0..n).filter(|&i| b[i] < 0.0 && gain(i, a0) > 0.0).collect();
    cand.sort_by(|&p, &q| gain(q, a0).total_cmp(&gain(p, a0)).then(p.cmp(&q)));

    let f = |bs: f64, acc: f64| bs + eps * acc.sqrt();
    let mut search = Bnb {
        cand: &cand,
        a,
        eps,
        gain: &gain,
        best_val: f(b0, a0),
        best_pick: Vec::new(),
        pick: Vec::new(),
        nodes: 0,
    };
    // Greedy incumbent: add candidates in order while each one pays off.
    let (mut gb, mut ga) = (b0, a0);
    let mut greedy = Vec::new();
    for &i in &cand {
        if gain(i, ga) > 0.0 {
            gb += b[i];
            ga += a[i];
            greedy.push(i);
        }
    }
    if f(gb, ga) > search.best_val {
        search.best_val = f(gb, ga);
        search.best_pick = greedy;
    }
    search.dfs(0, b0, a0, f(b0, a0));
    let proven = search.nodes < NODE_BUDGET;

    let mut support = base;
    support.extend(search.best_pick.iter().copied());
    support.sort_unstable();
    SupportSearch {
        value: search.best_val,
        support,
        proven,
        nodes: search.nodes,
    }
}

struct Bnb<'a, G: Fn(usize, f64) -> f64> {
    cand: &'a [usize],
    a: &'a [f64],
    eps: f64,
    gain: &'a G,
    best_val: f64,
    best_pick: Vec<usize>,
    pick: Vec<usize>,
    nodes: usize,
}

impl<G: Fn(usize, f64) -> f64> Bnb<'_, G> {
    fn dfs(&mut self, k: usize, bs: f64, acc: f64, val: f64) {
        self.nodes += 1;
        if self.nodes >= NODE_BUDGET {
            return;
        }
        if val > self.best_val * (1.0 + 1e-15) + 1e-300 {
            self.best_val = val;
            self.best_pick = self.pick.clone();
        }
        // Square-root increments are subadditive, so single gains bound any completion.
        let bound: f64 = val + self.cand[k..].iter().map(|&i| (self.gain)(i, acc).max(0.0)).sum::<f64>();
        if bound <= self.best_val + 1e-13 * self.best_val.abs().max(1.0) {
            return;
        }
        let Some(pos) = (k..self.cand.len()).find(|&j| (self.gain)(self.cand[j], acc) > 0.0) else {
            return;
        };
        let i = self.cand[pos];
        let gi = (self.gain)(i, acc);
        self.pick.push(i);
        let ai = self.a[i];
        self.dfs(pos + 1, bs + gi - self.eps * ((acc + ai).sqrt() - acc.sqrt()), acc + ai, val + gi);
        self.pick.pop();
        self.dfs(pos + 1, bs, acc, val);
    }
}

/// Frobenius-budget attack on max-margin completion.
///
/// Picks the support `S` with [`maxmargin_support`] and sets
/// `Δ_S = −ε·Y_S/‖Y_S‖_F`; with unit `|Y|` on `S` this is `−ε·Y_ij/√|S|`.
/// Returns `Δ = 0` when no entry gains from the budget.
pub fn maxmargin_attack_fro(x: &PartialMatrix, y: &DMatrix<f64>, eps: f64) -> Result<SparsePerturbation> {
    x.check_shape(y)?;
    x.require_labels()?;
    check_budget(eps)?;
    if eps == 0.0 || x.is_empty() {
        return Ok(SparsePerturbation::zeros_like(x));
    }
    let coef: Vec<f64> = x.entries.iter().map(|&(i, j, _)| y[(i, j)]).collect();
    let z: Vec<f64> = x.entries.iter().zip(&coef).map(|(e, c)| e.2 * c).collect();
    let a: Vec<f64> = coef.iter().map(|c| c * c).collect();
    let found = maxmargin_support(&z, &a, eps);
    let norm = found.support.iter().map(|&k| a[k]).sum::<f64>().sqrt();
    let mut values = vec![0.0; x.len()];
    if norm > 0.0 {
        for &k in &found.support {
            values[k] = -eps * coef[k] / norm;
        }
    }
    Ok(SparsePerturbation::from_values(x, values))
}
