//! Three-way comparison of training modes on one train/test split.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::RunConfig;
use crate::error::Result;
use crate::io;
use crate::synth;
use crate::trainer::{evaluate, train, Dataset, Family, Metric, Mode, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ModeResult {
    pub mode: Mode,
    pub metric: Metric,
    /// Mean attacked training loss at the last iteration.
    pub final_train_loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub family: &'static str,
    pub seed: u64,
    pub config_echo: String,
    /// In the order [`Mode::ALL`]; shorter when a run aborted.
    pub results: Vec<ModeResult>,
    /// The mode whose training failed, with the error.
    pub aborted: Option<(Mode, String)>,
}

impl ExperimentReport {
    pub fn is_complete(&self) -> bool {
        self.aborted.is_none() && self.results.len() == Mode::ALL.len()
    }

    pub fn result(&self, mode: Mode) -> Option<&ModeResult> {
        self.results.iter().find(|r| r.mode == mode)
    }

    /// The metric table. Contains no timings, so equal inputs give equal bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("family,mode,metric,value,higher_is_better,final_train_loss,seed,status\n");
        for r in &self.results {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},ok",
                self.family, r.mode, r.metric.name, r.metric.value, r.metric.higher_is_better, r.final_train_loss, self.seed
            );
        }
        if let Some((mode, _)) = &self.aborted {
            let _ = writeln!(out, "{},{},,,,,{},aborted", self.family, mode, self.seed);
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("mode,seconds\n");
        for r in &self.results {
            let _ = writeln!(out, "{},{:.6}", r.mode, r.seconds);
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "family: {}", self.family);
        let _ = writeln!(out, "seed: {}", self.seed);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<10} {:>16} {:>18} {:>10}", "mode", "test metric", "final train loss", "seconds");
        for r in &self.results {
            let _ = writeln!(
                out,
                "{:<10} {:>16.6} {:>18.6} {:>10.3}",
                r.mode.to_string(),
                r.metric.value,
                r.final_train_loss,
                r.seconds
            );
        }
        if let Some(first) = self.results.first() {
            let dir = if first.metric.higher_is_better { "higher" } else { "lower" };
            let _ = writeln!(out, "\nmetric: {} ({dir} is better)", first.metric.name);
        }
        if let (Some(p), Some(n)) = (self.result(Mode::Proposed), self.result(Mode::NoError)) {
            let verdict = if p.metric.no_worse_than(&n.metric) { "no worse than" } else { "worse than" };
            let _ = writeln!(out, "proposed is {verdict} no_error on the test set");
        }
        if let Some((mode, err)) = &self.aborted {
            let _ = writeln!(out, "\nABORTED in mode {mode}: {err}");
        }
        let _ = writeln!(out, "\nconfiguration:\n{}", self.config_echo);
        out
    }
}

/// Trains every mode with the same seed and data and scores each on `test`.
/// Stops at the first training failure and records it in the report.
pub fn run_modes(cfg: &RunConfig, train_set: &Dataset, test_set: &Dataset) -> ExperimentReport {
    let mut report = ExperimentReport {
        family: cfg.spec.family.name(),
        seed: cfg.train.seed,
        config_echo: cfg.to_text(),
        results: Vec::new(),
        aborted: None,
    };
    for mode in Mode::ALL {
        let config = TrainConfig { mode, ..cfg.train.clone() };
        let start = Instant::now();
        let outcome = train(&cfg.spec, train_set, &config)
            .and_then(|o| evaluate(&cfg.spec, &o.params, test_set).map(|m| (o, m)));
        let seconds = start.elapsed().as_secs_f64();
        match outcome {
            Ok((o, metric)) => report.results.push(ModeResult {
                mode,
                metric,
                final_train_loss: o.history.last().copied().unwrap_or(f64::NAN),
                seconds,
            }),
            Err(e) => {
                report.aborted = Some((mode, e.to_string()));
                break;
            }
        }
    }
    report
}

/// Reads a train/test pair in the format the family uses: labeled CSV,
/// point CSV, or sparse triplets (the test matrix takes the train shape).
pub fn load_datasets(family: Family, train_path: &Path, test_path: &Path, has_header: bool) -> Result<(Dataset, Dataset)> {
    match family {
        Family::SquaredRegression | Family::Logistic | Family::Hinge | Family::TwoLayerNN { .. } => Ok((
            Dataset::Labeled(io::load_dense(train_path, has_header)?),
            Dataset::Labeled(io::load_dense(test_path, has_header)?),
        )),
        Family::Ggm => Ok((
            Dataset::Points(io::load_points(train_path, has_header)?),
            Dataset::Points(io::load_points(test_path, has_header)?),
        )),
        Family::MatrixCompletion | Family::MaxMarginMC => {
            let tr = io::load_sparse(train_path, None)?;
            let te = io::load_sparse(test_path, Some((tr.rows(), tr.cols())))?;
            Ok((Dataset::Matrix(tr), Dataset::Matrix(te)))
        }
    }
}

/// Paths of the three report files for the CSV path `out`.
pub fn report_paths(out: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let stem = out.with_extension("");
    let with = |suffix: &str| {
        let mut s = stem.clone().into_os_string();
        s.push(suffix);
        PathBuf::from(s)
    };
    (out.to_path_buf(), with(".summary.txt"), with(".timing.csv"))
}

pub fn write_report(report: &ExperimentReport, out: &Path) -> Result<()> {
    let (csv, summary, timing) = report_paths(out);
    std::fs::write(csv, report.to_csv())?;
    std::fs::write(summary, report.summary())?;
    std::fs::write(timing, report.timing_csv())?;
    Ok(())
}

/// Runs the comparison on the given data, or on the synthetic generator for
/// the family when `data` is `None`, and writes the report next to `out`.
pub fn run_experiment(cfg: &RunConfig, data: Option<(&Path, &Path, bool)>, out: &Path) -> Result<ExperimentReport> {
    let (train_set, test_set) = match data {
        Some((tr, te, header)) => load_datasets(cfg.spec.family, tr, te, header)?,
        None => synth::generate(cfg.spec.family, &cfg.synth, cfg.train.seed)?,
    };
    let report = run_modes(cfg, &train_set, &test_set);
    write_report(&report, out)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(extra: &str) -> RunConfig {
        RunConfig::parse(&format!("family = regression\nT = 20\nn_train = 40\nn_test = 40\ndim = 4\n{extra}")).unwrap()
    }

    #[test]
    fn zero_budget_makes_modes_identical() {
        let cfg = config("epsilon = 0\nnorm = l2\neta = 0.1");
        let (tr, te) = synth::generate(cfg.spec.family, &cfg.synth, 1).unwrap();
        let rep = run_modes(&cfg, &tr, &te);
        assert!(rep.is_complete());
        let v: Vec<u64> = rep.results.iter().map(|r| r.metric.value.to_bits()).collect();
        assert!(v.iter().all(|&b| b == v[0]));
    }

    #[test]
    fn csv_is_deterministic() {
        let cfg = config("epsilon = 0.2\nnorm = linf\nseed = 4\neta = 0.1");
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        run_experiment(&cfg, None, &a).unwrap();
        run_experiment(&cfg, None, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let (_, summary, timing) = report_paths(&a);
        assert!(summary.exists() && timing.exists());
        assert_eq!(std::fs::read_to_string(&a).unwrap().lines().count(), 4);
    }

    #[test]
    fn divergence_is_flagged() {
        let cfg = config("epsilon = 0.1\neta = 100");
        let (tr, te) = synth::generate(cfg.spec.family, &cfg.synth, 1).unwrap();
        let rep = run_modes(&cfg, &tr, &te);
        assert!(!rep.is_complete());
        assert_eq!(rep.aborted.as_ref().unwrap().0, Mode::NoError);
        assert!(rep.to_csv().contains("aborted"));
        assert!(rep.summary().contains("ABORTED"));
    }

    #[test]
    fn missing_data_file_is_an_error() {
        let cfg = config("");
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.csv");
        let r = run_experiment(&cfg, Some((&missing, &missing, false)), &dir.path().join("r.csv"));
        assert!(matches!(r, Err(crate::Error::Io(_) | crate::Error::Csv(_))));
    }
}
