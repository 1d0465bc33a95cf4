//! Likelihood-ratio sensitivity analysis for stochastic dynamics.
//!
//! Reaction networks are simulated exactly (SSA), diffusions with
//! Euler–Maruyama. Path scores, Fisher information and the LR, centered LR,
//! truncated LR and finite-difference sensitivity estimators are computed
//! from replica ensembles. Everything is generic over the scalar type; the
//! `*64` and `*32` aliases below fix it.

// `!(x > 0)` is how NaN gets rejected along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffusion;
pub mod ensemble;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod models;
pub mod network;
pub mod params;
pub mod rng;
pub mod rxn;
mod scalar;
pub mod score;
pub mod simulate;
pub mod stats;

pub use diffusion::{DiffusionModel, DriftedBrownian, Logistic};
pub use ensemble::{Coupling, Ensemble, EnsembleConfig, PairEnsemble, PairSpec, Perturbation};
pub use error::{Error, Result};
pub use estimators::{Centering, CovarianceLr, EstimatorKind, Screening, SensitivityReport};
pub use linalg::Matrix;
pub use network::{RateTerm, Reaction, ReactionNetwork};
pub use params::ParameterVector;
pub use rng::RngStream;
pub use rxn::{parse_model, serialize_model, ModelDocument};
pub use scalar::Real;
pub use score::{ctmc_score, euler_score, iid_score, ScoreRecord, SignConvention};
pub use simulate::{GridTrajectory, JumpTrajectory, Observables};

pub type ReactionNetwork64 = ReactionNetwork<f64>;
pub type ReactionNetwork32 = ReactionNetwork<f32>;
pub type Logistic64 = Logistic<f64>;
pub type Logistic32 = Logistic<f32>;
pub type Ensemble64 = Ensemble<f64>;
pub type Ensemble32 = Ensemble<f32>;
pub type PairEnsemble64 = PairEnsemble<f64>;
pub type Matrix64 = Matrix<f64>;
pub type SensitivityReport64 = SensitivityReport<f64>;
pub type SensitivityReport32 = SensitivityReport<f32>;
