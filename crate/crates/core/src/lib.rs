//! Zeroth-order optimization toolkit.
//!
//! The crate is organised bottom-up:
//!
//! * [`sampling`]: seeded perturbation directions and small vector helpers.
//! * [`objectives`]: the synthetic benchmark functions and their oracles.
//! * [`estimators`]: finite-difference, REINFORCE, importance-sampled and
//!   history-reusing (ZoAR, ZoHS) gradient estimators.
//! * [`optimizers`]: SGD, Adam-style and R-AdaZO update rules and the
//!   optimization loop.
//! * [`bench`]: multi-seed experiments, aggregation, speedups, CSV and SVG.
//! * [`verify`]: statistical and exact checks of the estimator identities.

pub mod bench;
pub mod error;
pub mod estimators;
pub mod objectives;
pub mod optimizers;
mod par;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
pub use estimators::{EstimatorConfig, EstimatorKind, HistoryBuffer, QueryRecord, Route};
pub use objectives::{Objective, ObjectiveKind, ObjectiveSpec};
pub use optimizers::{OptimizerConfig, UpdateRule};
pub use sampling::{DirectionSpec, DistTag, ParamVector};
