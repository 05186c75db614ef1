//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! family = logistic
//! norm = linf
//! epsilon = 0.1
//! eta = 0.5
//! T = 200
//! mode = proposed
//! seed = 3
//! ```
//!
//! Unknown keys are rejected.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::ActivationKind;
use crate::norms::{NormBall, NormKind};
use crate::synth::SynthConfig;
use crate::trainer::{Family, Mode, ProblemSpec, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: ProblemSpec,
    pub train: TrainConfig,
    pub synth: SynthConfig,
    /// The budget norm as written, echoed in reports.
    pub norm_name: String,
}

const KEYS: &[&str] = &[
    "family",
    "norm",
    "epsilon",
    "eta",
    "T",
    "mode",
    "seed",
    "reg_c",
    "activation",
    "hidden",
    "n_train",
    "n_test",
    "dim",
    "cols",
    "rank",
    "observed",
    "noise",
    "shift",
];

/// `l1`, `l2`, `linf`, `lp:<p>`, and for matrices `fro` (= `l2`) and `entrywise` (= `linf`).
pub fn parse_norm(s: &str) -> Result<NormKind> {
    let s = s.trim().to_ascii_lowercase();
    match s.as_str() {
        "l1" => Ok(NormKind::L1),
        "l2" | "fro" | "frobenius" => Ok(NormKind::L2),
        "linf" | "entrywise" => Ok(NormKind::Linf),
        other => match other.strip_prefix("lp:") {
            Some(p) => {
                let p: f64 = p.parse().map_err(|_| Error::Config(format!("bad norm exponent in {other:?}")))?;
                NormKind::lp(p).map_err(|e| Error::Config(e.to_string()))
            }
            None => Err(Error::Config(format!("unknown norm {other:?}"))),
        },
    }
}

fn parse_family(name: &str, activation: ActivationKind, hidden: usize) -> Result<Family> {
    Ok(match name.trim().to_ascii_lowercase().as_str() {
        "regression" | "squared" => Family::SquaredRegression,
        "logistic" => Family::Logistic,
        "hinge" => Family::Hinge,
        "nn" | "two_layer_nn" => Family::TwoLayerNN { activation, hidden },
        "ggm" => Family::Ggm,
        "mc" | "matrix_completion" => Family::MatrixCompletion,
        "maxmargin" | "max_margin_mc" => Family::MaxMarginMC,
        other => return Err(Error::Config(format!("unknown family {other:?}"))),
    })
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", k + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key {key:?}", k + 1)));
            }
            if pairs.iter().any(|(seen, _)| seen == key) {
                return Err(Error::Config(format!("line {}: {key} given twice", k + 1)));
            }
            pairs.push((key.to_string(), value.trim().to_string()));
        }
        let get = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());

        let activation = match get("activation") {
            Some(a) => a.parse()?,
            None => ActivationKind::RELU,
        };
        let hidden = get("hidden").map(|v| number("hidden", v)).transpose()?.unwrap_or(8);
        let family = parse_family(get("family").ok_or_else(|| Error::Config("family is required".into()))?, activation, hidden)?;
        let norm_name = get("norm").unwrap_or("l2").to_string();
        let norm = parse_norm(&norm_name)?;
        let eps: f64 = get("epsilon").map(|v| number("epsilon", v)).transpose()?.unwrap_or(0.0);
        let ball = NormBall::new(norm, eps).map_err(|e| Error::Config(e.to_string()))?;
        let train = TrainConfig {
            iterations: get("T").map(|v| number("T", v)).transpose()?.unwrap_or(100),
            eta: get("eta").map(|v| number("eta", v)).transpose()?.unwrap_or(0.1),
            ball,
            mode: get("mode").map(str::parse).transpose()?.unwrap_or(Mode::Proposed),
            seed: get("seed").map(|v| number("seed", v)).transpose()?.unwrap_or(0),
            reg_c: get("reg_c").map(|v| number("reg_c", v)).transpose()?.unwrap_or(0.0),
        };
        train.validate()?;
        let spec = ProblemSpec::new(family);
        spec.check_ball(&train.ball)?;

        let mut synth = SynthConfig::defaults_for(family);
        if let Some(v) = get("n_train") {
            synth.n_train = number("n_train", v)?;
        }
        if let Some(v) = get("n_test") {
            synth.n_test = number("n_test", v)?;
        }
        if let Some(v) = get("dim") {
            synth.dim = number("dim", v)?;
        }
        if let Some(v) = get("cols") {
            synth.cols = number("cols", v)?;
        }
        if let Some(v) = get("rank") {
            synth.rank = number("rank", v)?;
        }
        if let Some(v) = get("observed") {
            synth.observed = number("observed", v)?;
        }
        if let Some(v) = get("noise") {
            synth.noise = number("noise", v)?;
        }
        if let Some(v) = get("shift") {
            synth.shift = number("shift", v)?;
        }
        synth.validate()?;
        Ok(Self {
            spec,
            train,
            synth,
            norm_name,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The configuration in the same `key = value` form it is read from.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let t = &self.train;
        let s = &self.synth;
        let _ = writeln!(out, "family = {}", self.spec.family.name());
        if let Family::TwoLayerNN { activation, hidden } = self.spec.family {
            let _ = writeln!(out, "activation = {}", activation_name(activation));
            let _ = writeln!(out, "hidden = {hidden}");
        }
        let _ = writeln!(out, "norm = {}", self.norm_name);
        let _ = writeln!(out, "epsilon = {}", t.ball.radius);
        let _ = writeln!(out, "eta = {}", t.eta);
        let _ = writeln!(out, "T = {}", t.iterations);
        let _ = writeln!(out, "mode = {}", t.mode);
        let _ = writeln!(out, "seed = {}", t.seed);
        let _ = writeln!(out, "reg_c = {}", t.reg_c);
        let _ = writeln!(out, "n_train = {}", s.n_train);
        let _ = writeln!(out, "n_test = {}", s.n_test);
        let _ = writeln!(out, "dim = {}", s.dim);
        let _ = writeln!(out, "cols = {}", s.cols);
        let _ = writeln!(out, "rank = {}", s.rank);
        let _ = writeln!(out, "observed = {}", s.observed);
        let _ = writeln!(out, "noise = {}", s.noise);
        let _ = writeln!(out, "shift = {}", s.shift);
        out
    }
}

/// The name [`ActivationKind::from_str`](std::str::FromStr) reads back.
pub fn activation_name(a: ActivationKind) -> String {
    match a {
        ActivationKind::Linear => "linear".into(),
        ActivationKind::Softplus => "softplus".into(),
        ActivationKind::Relu { slope_neg, shift } if shift == 0.0 && slope_neg == 0.0 => "relu".into(),
        ActivationKind::Relu { slope_neg, shift } if shift == 0.0 => format!("leaky_relu:{slope_neg}"),
        ActivationKind::Relu { slope_neg, shift } if slope_neg == 0.0 => format!("shifted_relu:{shift}"),
        ActivationKind::Relu { slope_neg, shift } => format!("leaky_relu:{slope_neg} (shift {shift})"),
        ActivationKind::BentIdentity => "bent_identity".into(),
        ActivationKind::Isrlu { a } => format!("isrlu:{a}"),
        ActivationKind::Tanh => "tanh".into(),
        ActivationKind::Arctan => "arctan".into(),
        ActivationKind::Sigmoid => "sigmoid".into(),
        ActivationKind::Erf => "erf".into(),
        ActivationKind::Gelu => "gelu".into(),
        ActivationKind::Isru { a } => format!("isru:{a}"),
        ActivationKind::Silu => "silu".into(),
        ActivationKind::Elu { alpha } => format!("elu:{alpha}"),
        ActivationKind::ClippedRelu { a } => format!("clipped_relu:{a}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let cfg = RunConfig::parse(
            "# robust logistic\nfamily = logistic\nnorm = linf\nepsilon = 0.25\neta = 0.5\nT = 20\nmode = random\nseed = 9\nreg_c = 0\n",
        )
        .unwrap();
        assert_eq!(cfg.spec.family, Family::Logistic);
        assert_eq!(cfg.train.ball, NormBall::new(NormKind::Linf, 0.25).unwrap());
        assert_eq!(cfg.train.iterations, 20);
        assert_eq!(cfg.train.mode, Mode::Random);
        assert_eq!(cfg.train.seed, 9);
        let again = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_pairs() {
        assert!(matches!(RunConfig::parse("family = mc\nlearning_rate = 1"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("family = ggm\nnorm = l1\nepsilon = 1"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("norm = l2"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("family = mc\nT = 0"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("family = mc\nT = 1\nT = 2"), Err(Error::Config(_))));
    }

    #[test]
    fn norm_names() {
        assert_eq!(parse_norm("fro").unwrap(), NormKind::L2);
        assert_eq!(parse_norm("entrywise").unwrap(), NormKind::Linf);
        assert_eq!(parse_norm("lp:3").unwrap(), NormKind::Lp(3.0));
        assert!(parse_norm("lp:0.5").is_err());
        assert!(parse_norm("nuclear").is_err());
    }

    #[test]
    fn network_settings_round_trip() {
        let cfg = RunConfig::parse("family = nn\nactivation = elu:1.5\nhidden = 4\n").unwrap();
        assert_eq!(
            cfg.spec.family,
            Family::TwoLayerNN {
                activation: ActivationKind::Elu { alpha: 1.5 },
                hidden: 4
            }
        );
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}
