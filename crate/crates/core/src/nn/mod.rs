//! Two-layer networks and their difference-of-convex attack.

pub mod activation;
pub mod dca;

pub use activation::{dc_decompose, ActivationKind, DcPair};
pub use dca::{dca_attack, dca_attack_with, nn_attack_objective, DcaOptions, DcaTrace, TwoLayerNet};
