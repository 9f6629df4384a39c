//! Design-based causal inference under network interference.
//!
//! Assignment designs ([`design`]), interference structures ([`graph`]),
//! potential-outcome tables ([`outcomes`]) and estimators ([`estimators`])
//! combine into exact, enumeration-based analyses ([`exact`],
//! [`feasibility`]) and Erdős–Rényi sweeps ([`er`]).

pub mod cli;
pub mod config;
pub mod design;
pub mod er;
pub mod error;
pub mod estimators;
pub mod exact;
pub mod feasibility;
pub mod graph;
pub mod numeric;
pub mod outcomes;
pub mod parallel;

pub use design::{Arm, Assignment, Design};
pub use error::{LabError, Result};
pub use estimators::{Estimator, TabularEstimator, YKey};
pub use graph::{Graph, InterferenceStructure, NeighborhoodIndex};
pub use outcomes::{Bounds, Estimand, LinearFunctional, PotentialOutcomeTable};
