//! Activation functions written as a difference of two convex functions,
//! `σ = σ1 − σ2`.
//!
//! Functions with one curvature change are split at that point; the convex
//! side keeps `σ` and the concave side is linearised. GELU and SiLU change
//! curvature twice and use tangent lines at both inflection points.

use std::f64::consts::{FRAC_2_SQRT_PI, SQRT_2};
use std::str::FromStr;

use crate::attack::{sigmoid, softplus};
use crate::error::{Error, Result};

/// Inflection point of `z·sigmoid(z)`: root of `2 + z(1 − 2·sigmoid(z)) = 0`.
pub const SILU_INFLECTION: f64 = 2.399_357_280_515_468;

/// Inflection point of `z·Φ(z)`.
pub const GELU_INFLECTION: f64 = SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    Linear,
    Softplus,
    /// `max(z − shift, slope_neg·(z − shift))`; plain ReLU is `slope_neg = 0, shift = 0`.
    Relu { slope_neg: f64, shift: f64 },
    BentIdentity,
    /// Inverse square root linear unit.
    Isrlu { a: f64 },
    Tanh,
    Arctan,
    Sigmoid,
    Erf,
    Gelu,
    /// Inverse square root unit.
    Isru { a: f64 },
    Silu,
    Elu { alpha: f64 },
    ClippedRelu { a: f64 },
}

impl ActivationKind {
    pub const RELU: ActivationKind = ActivationKind::Relu {
        slope_neg: 0.0,
        shift: 0.0,
    };

    /// Every kind with representative parameters.
    pub fn catalog() -> Vec<ActivationKind> {
        use ActivationKind::*;
        vec![
            Linear,
            Softplus,
            Self::RELU,
            Relu {
                slope_neg: 0.1,
                shift: 0.5,
            },
            BentIdentity,
            Isrlu { a: 1.0 },
            Tanh,
            Arctan,
            Sigmoid,
            Erf,
            Gelu,
            Isru { a: 0.5 },
            Silu,
            Elu { alpha: 1.0 },
            Elu { alpha: 1.7 },
            Elu { alpha: 0.5 },
            ClippedRelu { a: 1.5 },
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("activation {self:?}: {what}")));
        match *self {
            ActivationKind::Relu { slope_neg, shift } => {
                if !(slope_neg.is_finite() && slope_neg >= 0.0 && shift.is_finite()) {
                    return bad("needs slope_neg >= 0 and a finite shift");
                }
            }
            ActivationKind::Isrlu { a } | ActivationKind::Isru { a } | ActivationKind::ClippedRelu { a } => {
                if !(a.is_finite() && a > 0.0) {
                    return bad("parameter must be positive");
                }
            }
            ActivationKind::Elu { alpha } => {
                if !(alpha.is_finite() && alpha > 0.0) {
                    return bad("alpha must be positive");
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// `σ(z)` from its textbook definition (independent of the decomposition).
    pub fn value(&self, z: f64) -> f64 {
        match *self {
            ActivationKind::Linear => z,
            ActivationKind::Softplus => softplus(z),
            ActivationKind::Relu { slope_neg, shift } => (z - shift).max(slope_neg * (z - shift)),
            ActivationKind::BentIdentity => ((z * z + 1.0).sqrt() - 1.0) / 2.0 + z,
            ActivationKind::Isrlu { a } => {
                if z < 0.0 {
                    isru(z, a)
                } else {
                    z
                }
            }
            ActivationKind::Tanh => z.tanh(),
            ActivationKind::Arctan => z.atan(),
            ActivationKind::Sigmoid => sigmoid(z),
            ActivationKind::Erf => libm::erf(z),
            ActivationKind::Gelu => gelu(z),
            ActivationKind::Isru { a } => isru(z, a),
            ActivationKind::Silu => z * sigmoid(z),
            ActivationKind::Elu { alpha } => {
                if z < 0.0 {
                    alpha * z.exp_m1()
                } else {
                    z
                }
            }
            ActivationKind::ClippedRelu { a } => z.clamp(0.0, a),
        }
    }

    /// A derivative (right derivative at kinks), used by the training gradients.
    pub fn derivative(&self, z: f64) -> f64 {
        let p = DcPair { kind: *self, breakpoints: Vec::new() };
        p.sigma1_subgradient(z) - p.sigma2_subgradient(z)
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    /// Parses names like `relu`, `leaky_relu:0.1`, `elu:1.0`, `clipped_relu:6`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let param = |default: f64| -> Result<f64> {
            match arg {
                None => Ok(default),
                Some(a) => a
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad activation parameter in {s:?}"))),
            }
        };
        let kind = match name.trim().to_ascii_lowercase().as_str() {
            "linear" => ActivationKind::Linear,
            "softplus" => ActivationKind::Softplus,
            "relu" => ActivationKind::RELU,
            "leaky_relu" => ActivationKind::Relu {
                slope_neg: param(0.01)?,
                shift: 0.0,
            },
            "shifted_relu" => ActivationKind::Relu {
                slope_neg: 0.0,
                shift: param(0.0)?,
            },
            "bent_identity" => ActivationKind::BentIdentity,
            "isrlu" => ActivationKind::Isrlu { a: param(1.0)? },
            "tanh" => ActivationKind::Tanh,
            "arctan" => ActivationKind::Arctan,
            "sigmoid" => ActivationKind::Sigmoid,
            "erf" => ActivationKind::Erf,
            "gelu" => ActivationKind::Gelu,
            "isru" => ActivationKind::Isru { a: param(1.0)? },
            "silu" => ActivationKind::Silu,
            "elu" => ActivationKind::Elu { alpha: param(1.0)? },
            "clipped_relu" => ActivationKind::ClippedRelu { a: param(1.0)? },
            other => return Err(Error::Config(format!("unknown activation {other:?}"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

fn isru(z: f64, a: f64) -> f64 {
    z / (1.0 + a * z * z).sqrt()
}

fn isru_slope(z: f64, a: f64) -> f64 {
    (1.0 + a * z * z).powf(-1.5)
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn gelu(z: f64) -> f64 {
    z * std_normal_cdf(z)
}

fn gelu_slope(z: f64) -> f64 {
    std_normal_cdf(z) + z * std_normal_pdf(z)
}

fn silu_slope(z: f64) -> f64 {
    let s = sigmoid(z);
    s + z * s * (1.0 - s)
}

/// Tangent line of `f` at `at`, as `(slope, intercept)`.
fn tangent(f: fn(f64) -> f64, df: fn(f64) -> f64, at: f64) -> (f64, f64) {
    let slope = df(at);
    (slope, f(at) - slope * at)
}

/// `σ = σ1 − σ2` with both parts convex, plus the abscissae where the pieces meet.
#[derive(Debug, Clone, PartialEq)]
pub struct DcPair {
    kind: ActivationKind,
    pub breakpoints: Vec<f64>,
}

/// The decomposition of an activation. Piecewise rows use the right piece at a breakpoint.
pub fn dc_decompose(kind: ActivationKind) -> Result<DcPair> {
    kind.validate()?;
    let breakpoints = match kind {
        ActivationKind::Linear | ActivationKind::Softplus | ActivationKind::BentIdentity => vec![],
        ActivationKind::Relu { shift, .. } => vec![shift],
        ActivationKind::Gelu => vec![-GELU_INFLECTION, GELU_INFLECTION],
        ActivationKind::Silu => vec![-SILU_INFLECTION, SILU_INFLECTION],
        ActivationKind::ClippedRelu { a } => vec![0.0, a],
        _ => vec![0.0],
    };
    Ok(DcPair { kind, breakpoints })
}

impl DcPair {
    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    /// `σ(z) = σ1(z) − σ2(z)`.
    pub fn sigma(&self, z: f64) -> f64 {
        self.sigma1(z) - self.sigma2(z)
    }

    pub fn sigma1(&self, z: f64) -> f64 {
        self.eval(z).0
    }

    pub fn sigma2(&self, z: f64) -> f64 {
        self.eval(z).1
    }

    pub fn sigma1_subgradient(&self, z: f64) -> f64 {
        self.eval(z).2
    }

    pub fn sigma2_subgradient(&self, z: f64) -> f64 {
        self.eval(z).3
    }

    /// `(σ1, σ2, σ1', σ2')` at `z`.
    pub fn eval(&self, z: f64) -> (f64, f64, f64, f64) {
        use ActivationKind::*;
        match self.kind {
            Linear => (z, 0.0, 1.0, 0.0),
            Softplus => (softplus(z), 0.0, sigmoid(z), 0.0),
            Relu { slope_neg, shift } => {
                let t = z - shift;
                if t >= 0.0 {
                    (t, 0.0, 1.0, 0.0)
                } else {
                    (slope_neg * t, 0.0, slope_neg, 0.0)
                }
            }
            BentIdentity => {
                let r = (z * z + 1.0).sqrt();
                ((r - 1.0) / 2.0 + z, 0.0, z / (2.0 * r) + 1.0, 0.0)
            }
            Isrlu { a } => {
                if z < 0.0 {
                    (isru(z, a), 0.0, isru_slope(z, a), 0.0)
                } else {
                    (z, 0.0, 1.0, 0.0)
                }
            }
            Tanh => {
                let t = z.tanh();
                if z < 0.0 {
                    (t - z, -z, -t * t, -1.0)
                } else {
                    (z, z - t, 1.0, t * t)
                }
            }
            Arctan => {
                let t = z.atan();
                let s = 1.0 / (1.0 + z * z);
                if z < 0.0 {
                    (t - z, -z, s - 1.0, -1.0)
                } else {
                    (z, z - t, 1.0, 1.0 - s)
                }
            }
            Sigmoid => {
                let t = (z / 2.0).tanh();
                if z < 0.0 {
                    (0.5 * (t + 1.0 - z / 2.0), -z / 4.0, -0.25 * t * t, -0.25)
                } else {
                    (0.5 * (z / 2.0 + 1.0), 0.5 * (z / 2.0 - t), 0.25, 0.25 * t * t)
                }
            }
            Erf => {
                let c = FRAC_2_SQRT_PI;
                let e = libm::erf(z);
                let g = c * (-z * z).exp();
                if z < 0.0 {
                    (e - c * z, -c * z, g - c, -c)
                } else {
                    (c * z, c * z - e, c, c - g)
                }
            }
            Gelu => outer_tangents(z, GELU_INFLECTION, gelu, gelu_slope),
            Silu => outer_tangents(z, SILU_INFLECTION, |z| z * sigmoid(z), silu_slope),
            Isru { a } => {
                let s = isru(z, a);
                let ds = isru_slope(z, a);
                if z < 0.0 {
                    (s - z, -z, ds - 1.0, -1.0)
                } else {
                    (z, z - s, 1.0, 1.0 - ds)
                }
            }
            Elu { alpha } => {
                let k = alpha.max(1.0);
                if z < 0.0 {
                    (alpha * z.exp_m1(), 0.0, alpha * z.exp(), 0.0)
                } else {
                    (k * z, (k - 1.0) * z, k, k - 1.0)
                }
            }
            ClippedRelu { a } => {
                let (s1, d1) = if z >= 0.0 { (z, 1.0) } else { (0.0, 0.0) };
                let (s2, d2) = if z >= a { (z - a, 1.0) } else { (0.0, 0.0) };
                (s1, s2, d1, d2)
            }
        }
    }
}

/// Convex on `[-seam, seam]`, concave outside: continue with the tangent lines.
fn outer_tangents(z: f64, seam: f64, f: fn(f64) -> f64, df: fn(f64) -> f64) -> (f64, f64, f64, f64) {
    if z < -seam || z > seam {
        let at = if z < 0.0 { -seam } else { seam };
        let (slope, icpt) = tangent(f, df, at);
        let line = slope * z + icpt;
        (line, line - f(z), slope, slope - df(z))
    } else {
        (f(z), 0.0, df(z), 0.0)
    }
}
