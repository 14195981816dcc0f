//! Multi-fidelity Kriging surrogate modelling.
//!
//! This crate fits conventional (ordinary/universal) and Hierarchical
//! Kriging models to possibly noisy simulator output, sweeps the full grid
//! of kernel/trend/estimator/optimizer combinations, and selects the best
//! surrogate by validation error.
//!
//! The main pieces:
//! - [`kernel`]: stationary correlation families and correlation matrices
//! - [`trend`]: ordinary/polynomial trend bases and the information matrix
//! - [`gp`]: parameter estimation (MLE / leave-one-out CV) and prediction
//! - [`optimize`]: box-constrained BFGS, hybrid GA and hybrid self-adaptive DE
//! - [`hierarchical`]: Hierarchical Kriging (low-fidelity mean as trend)
//! - [`selection`]: the 600-combination parametric sweep and Q2/MAE scoring
//! - [`data`]: CSV ingestion, replication aggregation, standardization and
//!   the built-in Forrester and synthetic 3-D benchmarks
//!
//! See the `examples/` directory for runnable walkthroughs of each
//! capability, and the `mfkrig` binary for the command-line front end.

pub mod cli;
pub mod data;
pub mod error;
pub mod gp;
pub mod hierarchical;
pub mod kernel;
pub mod optimize;
pub mod selection;
pub mod trend;

pub use data::{Dataset, FidelityPair};
pub use error::{Error, Result};
pub use gp::{Estimation, KrigingModel, Prediction};
pub use hierarchical::HierarchicalModel;
pub use kernel::{CorrelationFamily, CorrelationSpec, CorrelationStructure, HyperParams};
pub use optimize::{Method, OptimResult, OptimizerSpec};
pub use selection::{CombinationGrid, SelectionCriterion, SweepMode, SweepResult};
pub use trend::TrendSpec;
