//! `worstcase`: train, evaluate, attack and verify from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use worstcase_core::experiment::load_datasets;
use worstcase_core::io::{self, load_params, save_params};
use worstcase_core::mc::{maxmargin_loss, mc_loss};
use worstcase_core::*;

#[derive(Parser)]
#[command(name = "worstcase", version, about = "Worst-case perturbations and robust training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model in the configured mode and save it.
    Train(TrainArgs),
    /// Score a saved model on a test set.
    Eval(EvalArgs),
    /// Compute the worst-case perturbation of one sample.
    Attack(AttackArgs),
    /// Compare an attack against a brute-force search of the ball.
    Verify(VerifyArgs),
    /// Train all three modes and write a comparison report.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Training data; the family's synthetic generator is used when omitted.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test data; required together with --train.
    #[arg(long)]
    test: Option<PathBuf>,
    /// CSV inputs start with a header row.
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Where to write the fitted parameters.
    #[arg(long)]
    model_out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated sample: features then label, or a GGM point.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "sample_file")]
    sample: Option<String>,
    /// Observed-entry triplets for the matrix families.
    #[arg(long)]
    sample_file: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    sample: SampleArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    sample: SampleArgs,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest amount by which the search may beat the attack.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Report CSV; the summary and timing files are written next to it.
    #[arg(long)]
    out: PathBuf,
}

/// A failure and the exit code it maps to.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Singular
            | Error::Diverged { .. }
            | Error::NotPositiveDefinite(_)
            | Error::DegenerateDirection(_) => 2,
            _ => 1,
        };
        Failure { code, msg: e.to_string() }
    }
}

fn user_error(msg: impl Into<String>) -> Failure {
    Failure { code: 1, msg: msg.into() }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Attack(a) => attack_cmd(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(path: &Path) -> CliResult<RunConfig> {
    RunConfig::load(path).map_err(|e| user_error(format!("{}: {e}", path.display())))
}

fn datasets(cfg: &RunConfig, data: &DataArgs) -> CliResult<(Dataset, Dataset)> {
    match (&data.train, &data.test) {
        (Some(tr), Some(te)) => Ok(load_datasets(cfg.spec.family, tr, te, data.header)?),
        (None, None) => Ok(generate(cfg.spec.family, &cfg.synth, cfg.train.seed)?),
        _ => Err(user_error("--train and --test go together")),
    }
}

fn train_cmd(a: TrainArgs) -> CliResult<()> {
    let cfg = load_config(&a.config)?;
    let (train_set, _) = datasets(&cfg, &a.data)?;
    let outcome = train(&cfg.spec, &train_set, &cfg.train)?;
    save_params(&a.model_out, &outcome.params)?;
    println!(
        "trained {} ({}) for {} iterations; final attacked loss {}",
        cfg.spec.family.name(),
        cfg.train.mode,
        outcome.history.len(),
        outcome.history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> CliResult<()> {
    let cfg = load_config(&a.config)?;
    let params = load_params(&a.model, cfg.spec.family)?;
    let (_, test_set) = datasets(&cfg, &a.data)?;
    let m = evaluate(&cfg.spec, &params, &test_set)?;
    println!("{} {}", m.name, m.value);
    Ok(())
}

fn sig12(v: f64) -> String {
    format!("{v:.11e}")
}

fn parse_values(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|f| {
            let v: f64 = f.trim().parse().map_err(|_| user_error(format!("--sample: not a number: {f:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(user_error(format!("--sample: non-finite value {f:?}")))
            }
        })
        .collect()
}

/// One sample as the family's attack expects it.
enum Input {
    Labeled(LabeledSample),
    Point(DVector<f64>),
    Matrix(PartialMatrix),
}

struct Loaded {
    cfg: RunConfig,
    params: Params,
    input: Input,
}

fn load_attack_inputs(a: &SampleArgs) -> CliResult<Loaded> {
    let cfg = load_config(&a.config)?;
    let params = load_params(&a.model, cfg.spec.family)?;
    let input = match (&params, &a.sample, &a.sample_file) {
        (Params::Linear(_) | Params::Net(_), Some(text), None) => {
            let mut v = parse_values(text)?;
            if v.len() < 2 {
                return Err(user_error("--sample needs features followed by a label"));
            }
            let y = v.pop().expect("checked length");
            Input::Labeled(LabeledSample::new(DVector::from_vec(v), y))
        }
        (Params::Precision(_), Some(text), None) => Input::Point(DVector::from_vec(parse_values(text)?)),
        (Params::Completion(y), None, Some(path)) => Input::Matrix(io::load_sparse(path, Some((y.nrows(), y.ncols())))?),
        (Params::Completion(_), _, _) => return Err(user_error("matrix families take --sample-file")),
        _ => return Err(user_error("this family takes --sample")),
    };
    Ok(Loaded { cfg, params, input })
}

/// The attack's perturbation as a flat vector, its loss, and `μ*` for GGM `ℓ2`.
struct Attacked {
    delta: Vec<f64>,
    loss: f64,
    mu: Option<f64>,
}

fn run_attack(l: &Loaded) -> CliResult<Attacked> {
    let ball = &l.cfg.train.ball;
    let eps = ball.radius;
    let out = match (&l.params, &l.input, l.cfg.spec.family) {
        (Params::Linear(m), Input::Labeled(s), fam) => {
            let r = match fam {
                Family::SquaredRegression => attack_squared(s, m, ball)?,
                Family::Logistic => attack_logistic(s, m, ball)?,
                _ => attack_hinge(s, m, ball)?,
            };
            Attacked {
                delta: r.delta.as_slice().to_vec(),
                loss: r.objective,
                mu: None,
            }
        }
        (Params::Net(n), Input::Labeled(s), _) => {
            let (r, _) = dca_attack_with(n, s, ball, &DcaOptions::default())?;
            Attacked {
                delta: r.delta.as_slice().to_vec(),
                loss: r.objective,
                mu: None,
            }
        }
        (Params::Precision(om), Input::Point(x), _) => {
            let pm = PrecisionMatrix::new(om.clone())?;
            if ball.norm == NormKind::L2 {
                let (r, dual) = ggm_attack_l2(x, &pm, eps)?;
                Attacked {
                    delta: r.delta.as_slice().to_vec(),
                    loss: r.objective,
                    mu: Some(dual.mu),
                }
            } else {
                let (r, _) = ggm_attack_linf(x, &pm, eps)?;
                Attacked {
                    delta: r.delta.as_slice().to_vec(),
                    loss: r.objective,
                    mu: None,
                }
            }
        }
        (Params::Completion(y), Input::Matrix(x), fam) => {
            let fro = ball.norm == NormKind::L2;
            let d = match (fam, fro) {
                (Family::MatrixCompletion, true) => mc_attack_fro(x, y, eps)?,
                (Family::MatrixCompletion, false) => mc_attack_linf(x, y, eps)?,
                (_, true) => maxmargin_attack_fro(x, y, eps)?,
                (_, false) => maxmargin_attack_linf(x, y, eps)?,
            };
            let loss = if fam == Family::MatrixCompletion { mc_loss(x, y, &d) } else { maxmargin_loss(x, y, &d) };
            Attacked {
                delta: d.entries.iter().map(|e| e.2).collect(),
                loss,
                mu: None,
            }
        }
        _ => return Err(user_error("model and sample do not match the family")),
    };
    Ok(out)
}

fn attack_cmd(a: AttackArgs) -> CliResult<()> {
    let loaded = load_attack_inputs(&a.sample)?;
    let r = run_attack(&loaded)?;
    match &loaded.input {
        Input::Matrix(x) => {
            println!("delta:");
            for (&(i, j, _), d) in x.entries().iter().zip(&r.delta) {
                println!("{i} {j} {}", sig12(*d));
            }
        }
        _ => println!("delta: {}", r.delta.iter().map(|v| sig12(*v)).collect::<Vec<_>>().join(",")),
    }
    println!("loss: {}", sig12(r.loss));
    if let Some(mu) = r.mu {
        println!("mu: {}", sig12(mu));
    }
    Ok(())
}

/// The family's loss as a function of a flat perturbation vector.
fn loss_of_delta<'a>(l: &'a Loaded) -> Box<dyn Fn(&DVector<f64>) -> f64 + Sync + 'a> {
    match (&l.params, &l.input) {
        (Params::Linear(m), Input::Labeled(s)) => {
            let fam = l.cfg.spec.family;
            Box::new(move |d| {
                let p = s.perturbed(d);
                match fam {
                    Family::SquaredRegression => squared_loss(&m.w, &p),
                    Family::Logistic => logistic_loss(&m.w, &p),
                    _ => hinge_loss(&m.w, &p),
                }
            })
        }
        (Params::Net(n), Input::Labeled(s)) => Box::new(move |d| n.loss(&s.perturbed(d))),
        (Params::Precision(om), Input::Point(x)) => Box::new(move |d| {
            let z = x + d;
            z.dot(&(om * &z))
        }),
        (Params::Completion(y), Input::Matrix(x)) => {
            let squared = l.cfg.spec.family == Family::MatrixCompletion;
            Box::new(move |d| {
                let delta = mc::SparsePerturbation {
                    rows: x.rows(),
                    cols: x.cols(),
                    entries: x.entries().iter().zip(d.iter()).map(|(&(i, j, _), &v)| (i, j, v)).collect(),
                };
                if squared {
                    mc_loss(x, y, &delta)
                } else {
                    maxmargin_loss(x, y, &delta)
                }
            })
        }
        _ => Box::new(|_| f64::NAN),
    }
}

fn verify_cmd(a: VerifyArgs) -> CliResult<()> {
    let loaded = load_attack_inputs(&a.sample)?;
    let r = run_attack(&loaded)?;
    let f = loss_of_delta(&loaded);
    let analytic = f(&DVector::from_column_slice(&r.delta));
    let opts = OracleOptions {
        n_samples: a.samples,
        seed: a.seed,
        ..OracleOptions::default()
    };
    let rep = brute_force_ball_max(&f, r.delta.len(), &loaded.cfg.train.ball, &opts, analytic);
    println!("attack loss: {}", sig12(analytic));
    println!("search best: {}", sig12(rep.best_value));
    println!("gap: {}", sig12(rep.gap));
    println!("evaluations: {}", rep.samples_used);
    if rep.gap < -a.tol {
        println!("verdict: search beat the attack");
        return Err(Failure {
            code: 2,
            msg: format!("brute force exceeded the attack by {}", -rep.gap),
        });
    }
    println!("verdict: attack not beaten");
    Ok(())
}

fn experiment_cmd(a: ExperimentArgs) -> CliResult<()> {
    let cfg = load_config(&a.config)?;
    let data = match (&a.data.train, &a.data.test) {
        (Some(tr), Some(te)) => Some((tr.as_path(), te.as_path(), a.data.header)),
        (None, None) => None,
        _ => return Err(user_error("--train and --test go together")),
    };
    let report = run_experiment(&cfg, data, &a.out)?;
    print!("{}", report.summary());
    if let Some((mode, err)) = &report.aborted {
        return Err(Failure {
            code: 2,
            msg: format!("training aborted in mode {mode}: {err}; partial report written"),
        });
    }
    Ok(())
}
