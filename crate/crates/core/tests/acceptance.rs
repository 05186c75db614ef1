//! Acceptance checks A1–A9. Each prints one `PASS`/`FAIL` line and a final
//! summary line names any failed gating criteria. With `ACCEPTANCE_STRICT=1`
//! the process also exits nonzero on a gating failure.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use worstcase_core::mc::{maxmargin_loss, mc_dual_multiplier};
use worstcase_core::trainer::{init_params, project_pd};
use worstcase_core::*;

struct Outcome {
    id: &'static str,
    pass: bool,
    gating: bool,
    detail: String,
    seconds: f64,
}

fn run(id: &'static str, gating: bool, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = f();
    let o = Outcome {
        id,
        pass,
        gating,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    };
    let tag = match (o.pass, o.gating) {
        (true, _) => "PASS",
        (false, true) => "FAIL",
        (false, false) => "FAIL (informational)",
    };
    println!("{} {tag} [{:.1}s] {}", o.id, o.seconds, o.detail);
    o
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

fn gauss_vec(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| gauss(rng))
}

fn random_pd(p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(p, p, |_, _| gauss(rng));
    a.transpose() * &a + DMatrix::identity(p, p) * 0.1
}

fn in_ball(delta: &DVector<f64>, ball: &NormBall) -> bool {
    norm_value(delta, ball.norm).unwrap() <= ball.radius * (1.0 + 1e-9) + 1e-12
}

const NORMS: [NormKind; 3] = [NormKind::L1, NormKind::L2, NormKind::Linf];

fn a1() -> (bool, String) {
    let mut worst_gap = f64::INFINITY;
    let mut infeasible = 0;
    let mut cases = 0;
    for (li, loss) in ["squared", "logistic", "hinge"].iter().enumerate() {
        for (ni, &norm) in NORMS.iter().enumerate() {
            for &d in &[2usize, 5, 20] {
                let results: Vec<(f64, bool)> = (0..200u64)
                    .into_par_iter()
                    .map(|k| {
                        let seed = 1_000_000 * li as u64 + 10_000 * ni as u64 + 100 * d as u64 + k;
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        let w = gauss_vec(d, &mut rng);
                        let x = gauss_vec(d, &mut rng);
                        let y = if *loss == "squared" {
                            gauss(&mut rng)
                        } else if rng.random::<bool>() {
                            1.0
                        } else {
                            -1.0
                        };
                        let ball = NormBall::new(norm, rng.random_range(0.05..1.0)).unwrap();
                        let s = LabeledSample::new(x.clone(), y);
                        let m = LinearModel::new(w.clone());
                        let res = match *loss {
                            "squared" => attack_squared(&s, &m, &ball),
                            "logistic" => attack_logistic(&s, &m, &ball),
                            _ => attack_hinge(&s, &m, &ball),
                        }
                        .unwrap();
                        let wx = w.dot(&x);
                        let objective = |delta: &DVector<f64>| {
                            let t = wx + w.dot(delta);
                            match *loss {
                                "squared" => (t - y).powi(2),
                                "logistic" => (-y * t).exp().ln_1p().max(-y * t),
                                _ => (1.0 - y * t).max(0.0),
                            }
                        };
                        let analytic = objective(&res.delta);
                        let opts = OracleOptions {
                            n_samples: 2000,
                            refine_steps: 20,
                            seed,
                            interior_fraction: 0.1,
                        };
                        let rep = brute_force_ball_max(objective, d, &ball, &opts, analytic);
                        (rep.gap, in_ball(&res.delta, &ball))
                    })
                    .collect();
                for (gap, ok) in results {
                    worst_gap = worst_gap.min(gap);
                    infeasible += usize::from(!ok);
                    cases += 1;
                }
            }
        }
    }
    (
        worst_gap >= -1e-8 && infeasible == 0,
        format!("{cases} instances; min(analytic - brute force) = {worst_gap:.3e} (need >= -1e-8); infeasible = {infeasible}"),
    )
}

fn a2() -> (bool, String) {
    let grid: Vec<f64> = (0..1000).map(|k| -10.0 + 20.0 * k as f64 / 999.0).collect();
    let mut worst_identity = 0.0f64;
    let mut worst_convexity = 0.0f64;
    let mut failing = Vec::new();
    for kind in ActivationKind::catalog() {
        let pair = dc_decompose(kind).unwrap();
        let tol = if matches!(kind, ActivationKind::Gelu | ActivationKind::Silu) { 1e-2 } else { 1e-7 };
        let ident = grid
            .iter()
            .map(|&z| (pair.sigma1(z) - pair.sigma2(z) - kind.value(z)).abs())
            .fold(0.0, f64::max);
        let mut conv = 0.0f64;
        for f in [|p: &DcPair, z: f64| p.sigma1(z), |p: &DcPair, z: f64| p.sigma2(z)] {
            for (i, &a) in grid.iter().enumerate() {
                for &b in grid[i + 1..].iter().step_by(7) {
                    conv = conv.max(f(&pair, 0.5 * (a + b)) - 0.5 * (f(&pair, a) + f(&pair, b)));
                }
            }
        }
        if ident > tol || conv > 1e-9 {
            failing.push(format!("{kind:?}"));
        }
        worst_identity = worst_identity.max(if tol > 1e-7 { 0.0 } else { ident });
        worst_convexity = worst_convexity.max(conv);
    }
    (
        failing.is_empty(),
        format!(
            "{} rows; max |s1 - s2 - s| (exact rows) = {worst_identity:.2e}; max midpoint violation = {worst_convexity:.2e}; failing: {failing:?}",
            ActivationKind::catalog().len()
        ),
    )
}

fn a3() -> (bool, String) {
    let catalog = ActivationKind::catalog();
    let results: Vec<(bool, f64, bool)> = (0..100u64)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(3_000 + k);
            let d = rng.random_range(1..=3usize);
            let h = rng.random_range(1..=3usize);
            let activation = catalog[rng.random_range(0..catalog.len())];
            let w = DMatrix::from_fn(h, d, |_, _| gauss(&mut rng));
            let v = gauss_vec(h, &mut rng);
            let net = TwoLayerNet::new(w, v, activation).unwrap();
            let x = gauss_vec(d, &mut rng);
            let y = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let s = LabeledSample::new(x.clone(), y);
            let ball = NormBall::new(NORMS[rng.random_range(0..3)], rng.random_range(0.1..1.5)).unwrap();

            let (res, trace) = dca_attack_with(&net, &s, &ball, &DcaOptions::default()).unwrap();
            let monotone = trace.iterates.windows(2).all(|p| p[1].1 <= p[0].1 + 1e-12);
            let f_dca = nn_attack_objective(&res.delta, &net, &s).unwrap().0;

            let neg_f = |delta: &DVector<f64>| -y * net.score(&(&x + delta));
            let opts = OracleOptions {
                n_samples: 1_000_000,
                refine_steps: 60,
                seed: 77 + k,
                interior_fraction: 0.5,
            };
            let rep = brute_force_ball_max(neg_f, d, &ball, &opts, -f_dca);
            let excess = f_dca - (-rep.best_value);
            (monotone, excess, in_ball(&res.delta, &ball))
        })
        .collect();
    let non_monotone = results.iter().filter(|r| !r.0).count();
    let worst = results.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let misses = results.iter().filter(|r| r.1 > 1e-3).count();
    let infeasible = results.iter().filter(|r| !r.2).count();
    (
        non_monotone == 0 && misses == 0 && infeasible == 0,
        format!(
            "100 instances; non-monotone = {non_monotone}; max(f_dca - brute-force min) = {worst:.3e} (need <= 1e-3, misses = {misses}); infeasible = {infeasible}"
        ),
    )
}

fn a4() -> (bool, String) {
    let results: Vec<(f64, f64, f64)> = (0..100u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(4_000 + k);
            let p = rng.random_range(1..=6usize);
            let om = random_pd(p, &mut rng);
            let x = gauss_vec(p, &mut rng);
            let eps = rng.random_range(0.05..2.0);
            let pm = PrecisionMatrix::new(om.clone()).unwrap();
            let (res, dual) = ggm_attack_l2(&x, &pm, eps).unwrap();
            let primal = (&x + &res.delta).dot(&(&om * (&x + &res.delta)));
            let duality = (primal - dual.bound).abs() / primal.abs();
            let radius = (res.delta.norm() - eps).abs() / eps;
            let ball = NormBall::new(NormKind::L2, eps).unwrap();
            let opts = OracleOptions {
                n_samples: 20_000,
                refine_steps: 60,
                seed: k,
                interior_fraction: 0.0,
            };
            let rep = brute_force_ball_max(|d| (&x + d).dot(&(&om * (&x + d))), p, &ball, &opts, primal);
            (duality, radius, (rep.best_value - primal) / primal.abs())
        })
        .collect();
    let dual = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let rad = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let win = results.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    (
        dual < 1e-6 && rad < 1e-6 && win <= 1e-6,
        format!("100 instances; max rel duality gap = {dual:.2e}; max rel |‖Δ‖ - ε| = {rad:.2e}; max rel brute-force win = {win:.2e}"),
    )
}

fn a5() -> (bool, String) {
    let results: Vec<(f64, bool)> = (0..50u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(5_000 + k);
            let p = rng.random_range(1..=4usize);
            let om = random_pd(p, &mut rng);
            let x = gauss_vec(p, &mut rng);
            let eps = rng.random_range(0.05..1.5);
            let pm = PrecisionMatrix::new(om.clone()).unwrap();
            let (res, sol) = ggm_attack_linf(&x, &pm, eps).unwrap();
            let value = |d: &DVector<f64>| (&x + d).dot(&(&om * (&x + d)));
            let corners = (0u32..1 << p)
                .map(|mask| value(&DVector::from_fn(p, |i, _| if mask >> i & 1 == 1 { eps } else { -eps })))
                .fold(f64::NEG_INFINITY, f64::max);
            let rel = (value(&res.delta) - corners).abs() / corners.abs();
            let y = &sol.y;
            let psd = y.clone().symmetric_eigenvalues().min() >= -1e-9 * y.amax().max(1.0);
            let anchor = (y[(p, p)] - 1.0).abs() <= 1e-12;
            let boxed = (0..p).all(|i| y[(i, i)] <= eps * eps * (1.0 + 1e-12));
            let feasible = res.delta.amax() <= eps * (1.0 + 1e-12);
            (rel, psd && anchor && boxed && feasible)
        })
        .collect();
    let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let broken = results.iter().filter(|r| !r.1).count();
    (
        worst <= 1e-5 && broken == 0,
        format!("50 instances (p <= 4); max rel gap to corner enumeration = {worst:.2e}; invariant violations = {broken}"),
    )
}

fn a6() -> (bool, String) {
    let mut fro_err = 0.0f64;
    for k in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(6_000 + k);
        let (r, c) = (rng.random_range(1..6usize), rng.random_range(1..6usize));
        let entries: Vec<_> = (0..r)
            .flat_map(|i| (0..c).map(move |j| (i, j)))
            .filter(|_| rng.random::<f64>() < 0.6)
            .collect::<Vec<_>>()
            .into_iter()
            .map(|(i, j)| (i, j, gauss(&mut rng)))
            .collect();
        if entries.is_empty() {
            continue;
        }
        let x = PartialMatrix::new(r, c, entries).unwrap();
        let y = DMatrix::from_fn(r, c, |_, _| gauss(&mut rng));
        let eps = rng.random_range(0.05..3.0);
        let delta = mc_attack_fro(&x, &y, eps).unwrap();
        let lambda = mc_dual_multiplier(&x, &y, eps).unwrap().unwrap();
        for &(i, j, v) in x.entries() {
            let reconstructed = (v - y[(i, j)]) / (lambda - 1.0);
            fro_err = fro_err.max((delta.get(i, j) - reconstructed).abs());
        }
    }

    let mut mm_err = 0.0f64;
    let mut mm_infeasible = 0;
    for k in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(6_500 + k);
        let n = rng.random_range(1..=8usize);
        let cols = 3;
        let cells: Vec<(usize, usize)> = (0..n).map(|t| (t / cols, t % cols)).collect();
        let rows = n.div_ceil(cols);
        let x = PartialMatrix::new(
            rows,
            cols,
            cells.iter().map(|&(i, j)| (i, j, if rng.random::<bool>() { 1.0 } else { -1.0 })).collect(),
        )
        .unwrap();
        let y = DMatrix::from_fn(rows, cols, |_, _| 1.5 * gauss(&mut rng));
        let eps = rng.random_range(0.05..2.5);
        let delta = maxmargin_attack_fro(&x, &y, eps).unwrap();
        let got = maxmargin_loss(&x, &y, &delta);
        // Σ max(0, a_i) = max over S of Σ_S a_i; each a_i is affine in Δ, so the
        // inner maximum over the ball is Σ_S (1 − Z_i) + ε‖Y_S‖.
        let items: Vec<(f64, f64)> = x.entries().iter().map(|&(i, j, v)| (v * y[(i, j)], y[(i, j)])).collect();
        let best = (0u32..1 << items.len())
            .map(|mask| {
                let chosen = items.iter().enumerate().filter(|(t, _)| mask >> t & 1 == 1);
                let (lin, sq) = chosen.fold((0.0, 0.0), |(l, s), (_, &(z, yv))| (l + 1.0 - z, s + yv * yv));
                lin + eps * f64::sqrt(sq)
            })
            .fold(0.0, f64::max);
        mm_err = mm_err.max((got - best).abs());
        mm_infeasible += usize::from(delta.frobenius_norm() > eps * (1.0 + 1e-12));
    }
    (
        fro_err <= 1e-10 && mm_err <= 1e-9 && mm_infeasible == 0,
        format!(
            "Frobenius MC vs dual reconstruction max err = {fro_err:.2e}; max-margin vs support enumeration max err = {mm_err:.2e}; infeasible = {mm_infeasible}"
        ),
    )
}

fn tiny_problem(family: Family, seed: u64) -> (ProblemSpec, Dataset, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = ProblemSpec::new(family);
    let labeled = |rng: &mut ChaCha8Rng, n: usize, d: usize, cls: bool| {
        (0..n)
            .map(|_| {
                let x = gauss_vec(d, rng);
                let y = if cls { if rng.random::<bool>() { 1.0 } else { -1.0 } } else { gauss(rng) };
                LabeledSample::new(x, y)
            })
            .collect::<Vec<_>>()
    };
    match family {
        Family::SquaredRegression => (spec, Dataset::Labeled(labeled(&mut rng, 12, 4, false)), 0.0),
        Family::Logistic | Family::Hinge | Family::TwoLayerNN { .. } => (spec, Dataset::Labeled(labeled(&mut rng, 12, 4, true)), 0.0),
        Family::Ggm => (spec, Dataset::Points((0..12).map(|_| gauss_vec(3, &mut rng)).collect()), 0.05),
        Family::MatrixCompletion | Family::MaxMarginMC => {
            let signs = family == Family::MaxMarginMC;
            let e = (0..5)
                .flat_map(|i| (0..4).map(move |j| (i, j)))
                .filter(|&(i, j)| (i + 2 * j) % 3 != 0)
                .map(|(i, j)| {
                    let v = gauss(&mut rng);
                    (i, j, if signs { v.signum() } else { v })
                })
                .collect();
            (spec, Dataset::Matrix(PartialMatrix::new(5, 4, e).unwrap()), 0.05)
        }
    }
}

/// Plain full-batch gradient descent on the unperturbed data.
fn reference_gd(spec: &ProblemSpec, data: &Dataset, eta: f64, reg_c: f64, iters: usize, init: &Params) -> Vec<f64> {
    let n = data.len();
    let mut theta = init.to_vec();
    for _ in 0..iters {
        let params = init.with_values(&theta);
        let mut total = vec![0.0; theta.len()];
        for i in 0..n {
            let sample = match data {
                Dataset::Labeled(v) => Perturbed::Labeled(v[i].clone()),
                Dataset::Points(v) => Perturbed::Point(v[i].clone()),
                Dataset::Matrix(m) => Perturbed::Matrix(m.clone()),
            };
            let g = loss_and_grad(spec, &params, &sample, reg_c).unwrap().1.to_vec();
            for (t, gk) in total.iter_mut().zip(g) {
                *t += gk;
            }
        }
        let scale = eta / n as f64;
        for (t, g) in theta.iter_mut().zip(&total) {
            *t -= scale * g;
        }
        match init {
            Params::Precision(m) => {
                let stepped = DMatrix::from_column_slice(m.nrows(), m.ncols(), &theta);
                theta = project_pd(&stepped).as_slice().to_vec();
            }
            Params::Completion(m) => {
                let stepped = DMatrix::from_column_slice(m.nrows(), m.ncols(), &theta);
                theta = svt_prox(&stepped, eta * reg_c).as_slice().to_vec();
            }
            _ => {}
        }
    }
    theta
}

fn families() -> Vec<Family> {
    vec![
        Family::SquaredRegression,
        Family::Logistic,
        Family::Hinge,
        Family::TwoLayerNN {
            activation: ActivationKind::Tanh,
            hidden: 3,
        },
        Family::Ggm,
        Family::MatrixCompletion,
        Family::MaxMarginMC,
    ]
}

fn a7() -> (bool, String) {
    let mut mismatched = Vec::new();
    for family in families() {
        let (spec, data, reg_c) = tiny_problem(family, 70);
        let norm = if matches!(family, Family::Ggm | Family::MatrixCompletion | Family::MaxMarginMC) {
            NormKind::L2
        } else {
            NormKind::Linf
        };
        let init = init_params(&spec, &data, 11).unwrap();
        let eta = if matches!(family, Family::MatrixCompletion | Family::MaxMarginMC) { 5.0 } else { 0.05 };
        let reference = reference_gd(&spec, &data, eta, reg_c, 25, &init);
        for mode in Mode::ALL {
            let cfg = TrainConfig {
                iterations: 25,
                eta,
                ball: NormBall::new(norm, 0.0).unwrap(),
                mode,
                seed: 11,
                reg_c,
            };
            let got = train(&spec, &data, &cfg).unwrap().params.to_vec();
            let same = got.len() == reference.len() && got.iter().zip(&reference).all(|(a, b)| a.to_bits() == b.to_bits());
            if !same {
                mismatched.push(format!("{}/{mode}", family.name()));
            }
        }
    }

    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut skipped = 0;
    let mut failing = Vec::new();
    for family in families() {
        for k in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(7_000 + k);
            let (spec, data, reg_c) = tiny_problem(family, 7_100 + k);
            let base = init_params(&spec, &data, k).unwrap();
            let sample = match &data {
                Dataset::Labeled(v) => Perturbed::Labeled(v[k as usize % v.len()].clone()),
                Dataset::Points(v) => Perturbed::Point(v[k as usize % v.len()].clone()),
                Dataset::Matrix(m) => Perturbed::Matrix(m.clone()),
            };
            // Ω is symmetric, so it is parametrized by its lower triangle and the
            // entry gradient folds to g_ij + g_ji off the diagonal.
            let ggm = matches!(base, Params::Precision(_));
            let lower: Vec<(usize, usize)> = (0..3).flat_map(|j| (j..3).map(move |i| (i, j))).collect();
            let to_params = |t: &DVector<f64>| -> Params {
                if ggm {
                    let mut m = DMatrix::zeros(3, 3);
                    for (&(i, j), &v) in lower.iter().zip(t.iter()) {
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                    Params::Precision(m)
                } else {
                    base.with_values(t.as_slice())
                }
            };
            let theta0: Vec<f64> = if ggm {
                let m = random_pd(3, &mut rng);
                lower.iter().map(|&(i, j)| m[(i, j)]).collect()
            } else {
                base.to_vec().iter().map(|_| gauss(&mut rng)).collect()
            };
            let loss = |t: &DVector<f64>| loss_and_grad(&spec, &to_params(t), &sample, reg_c).unwrap().0;
            let kink_free = |t: &DVector<f64>| -> bool {
                match (&to_params(t), &sample) {
                    (Params::Linear(m), Perturbed::Labeled(s)) if family == Family::Hinge => (1.0 - s.y * m.predict(&s.x)).abs() > 1e-3,
                    (Params::Completion(y), Perturbed::Matrix(m)) if family == Family::MaxMarginMC => {
                        m.entries().iter().all(|&(i, j, v)| (1.0 - v * y[(i, j)]).abs() > 1e-3)
                    }
                    (Params::Precision(om), _) => om.iter().all(|v| v.abs() > 1e-3),
                    _ => true,
                }
            };
            let grad = |t: &DVector<f64>| {
                kink_free(t).then(|| match loss_and_grad(&spec, &to_params(t), &sample, reg_c).unwrap().1 {
                    Params::Precision(g) => DVector::from_iterator(
                        lower.len(),
                        lower.iter().map(|&(i, j)| if i == j { g[(i, i)] } else { g[(i, j)] + g[(j, i)] }),
                    ),
                    g => DVector::from_vec(g.to_vec()),
                })
            };
            match finite_diff_check(loss, grad, &DVector::from_vec(theta0), 1e-6) {
                GradientCheck::Checked(e) => {
                    checked += 1;
                    worst = worst.max(e);
                    if e > 1e-4 {
                        failing.push(format!("{}#{k}", family.name()));
                    }
                }
                GradientCheck::Skipped => skipped += 1,
            }
        }
    }
    (
        mismatched.is_empty() && failing.is_empty(),
        format!(
            "eps=0 vs reference GD: {} family/mode runs, mismatches {mismatched:?}; finite differences: {checked} points, {skipped} at kinks, worst rel err {worst:.2e}, failing {failing:?}",
            families().len() * 3
        ),
    )
}

/// Hyperparameters frozen before looking at seeds 0–9.
const A8_CONFIGS: [&str; 5] = [
    "family = regression\nnorm = linf\nepsilon = 0.02\neta = 0.1\nT = 200\nn_train = 20\ndim = 20",
    "family = logistic\nnorm = linf\nepsilon = 0.3\neta = 0.5\nT = 200",
    "family = hinge\nnorm = linf\nepsilon = 0.2\neta = 0.5\nT = 200",
    "family = ggm\nnorm = l2\nepsilon = 0.2\neta = 0.1\nT = 200",
    "family = mc\nnorm = fro\nepsilon = 1\neta = 30\nT = 300\nreg_c = 0.01",
];

fn a8_a9() -> (Outcome, Outcome) {
    let mut lines = Vec::new();
    let mut all_pass = true;
    let mut timing: Vec<(&'static str, f64, f64)> = Vec::new();
    let start = Instant::now();
    for text in A8_CONFIGS {
        let mut wins = 0;
        let mut aborted = 0;
        let (mut t_prop, mut t_none) = (0.0, 0.0);
        let mut family = "";
        for seed in 0..10u64 {
            let cfg = RunConfig::parse(&format!("{text}\nseed = {seed}")).unwrap();
            family = cfg.spec.family.name();
            let (tr, te) = generate(cfg.spec.family, &cfg.synth, seed).unwrap();
            let rep = run_modes(&cfg, &tr, &te);
            if !rep.is_complete() {
                aborted += 1;
                continue;
            }
            let p = rep.result(Mode::Proposed).unwrap();
            let n = rep.result(Mode::NoError).unwrap();
            wins += usize::from(p.metric.no_worse_than(&n.metric));
            t_prop += p.seconds;
            t_none += n.seconds;
        }
        all_pass &= wins >= 8 && aborted == 0;
        lines.push(format!("{family} {wins}/10"));
        timing.push((family, t_prop, t_none));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let a8 = Outcome {
        id: "A8",
        pass: all_pass && elapsed < 600.0,
        gating: true,
        detail: format!("proposed no worse than no_error: {}", lines.join(", ")),
        seconds: elapsed,
    };
    let ratios: Vec<String> = timing.iter().map(|(f, p, n)| format!("{f} {:.2}x", p / n)).collect();
    let a9 = Outcome {
        id: "A9",
        pass: timing.iter().all(|(_, p, n)| p / n <= 3.0),
        gating: false,
        detail: format!("proposed/no_error wall clock: {}", ratios.join(", ")),
        seconds: 0.0,
    };
    for o in [&a8, &a9] {
        let tag = match (o.pass, o.gating) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "FAIL (informational)",
        };
        println!("{} {tag} [{:.1}s] {}", o.id, o.seconds, o.detail);
    }
    (a8, a9)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let limits = [60.0, 10.0, 300.0, 60.0, 120.0, 60.0, 60.0];
    let mut outcomes = vec![
        run("A1", true, a1),
        run("A2", true, a2),
        run("A3", true, a3),
        run("A4", true, a4),
        run("A5", true, a5),
        run("A6", true, a6),
        run("A7", true, a7),
    ];
    for (o, limit) in outcomes.iter().zip(limits) {
        if o.seconds > limit {
            println!("note: {} took {:.1}s, over its {limit}s budget", o.id, o.seconds);
        }
    }
    let (a8, a9) = a8_a9();
    outcomes.push(a8);
    outcomes.push(a9);
    let failed: Vec<&str> = outcomes.iter().filter(|o| o.gating && !o.pass).map(|o| o.id).collect();
    if failed.is_empty() {
        println!("acceptance: all gating criteria passed");
    } else {
        println!("acceptance: failed {failed:?}");
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
