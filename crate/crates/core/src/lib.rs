//! Worst-case adversarial perturbations for common losses, and a training loop
//! that plugs them in.

pub mod attack;
pub mod config;
pub mod error;
pub mod experiment;
pub mod mc;
pub mod ggm;
pub mod io;
pub mod nn;
pub mod norms;
pub mod oracle;
pub mod synth;
pub mod trainer;

pub use attack::{
    attack_hinge, attack_logistic, attack_squared, hinge_loss, logistic_loss, squared_loss, AttackResult,
    LabeledSample, LinearModel,
};
pub use error::{Error, Result};
pub use nn::{
    dc_decompose, dca_attack, dca_attack_with, nn_attack_objective, ActivationKind, DcPair, DcaOptions, DcaTrace, TwoLayerNet,
};
pub use norms::{
    dual_norm_value, dual_subgradient, norm_value, project_onto_ball, scale_to_budget, DualDirection, NormBall,
    NormKind,
};
pub use ggm::{ggm_attack_l2, ggm_attack_linf, psd_project, DualScalarSolution, PrecisionMatrix, SdpSolution};
pub use mc::{
    maxmargin_attack_fro, maxmargin_attack_linf, mc_attack_fro, mc_attack_linf, PartialMatrix, SparsePerturbation,
};
pub use oracle::{brute_force_ball_max, finite_diff_check, GradientCheck, OracleOptions, OracleReport};
pub use trainer::{
    evaluate, loss_and_grad, perturb, svt_prox, train, Dataset, Family, Metric, Mode, Params, Perturbed, ProblemSpec,
    Sample, TrainConfig, TrainOutcome,
};
pub use config::RunConfig;
pub use experiment::{run_experiment, run_modes, ExperimentReport, ModeResult};
pub use synth::{generate, SynthConfig};
