//! Learning uncertainty sets from data for robust optimization.
//!
//! The pipeline has two steps: learn a box `U` of plausible values for `m`
//! future labels from a training sample ([`usets`]), then solve the robust
//! decision problem against `U` ([`robust`]). [`validate`] computes the
//! probabilistic feasibility guarantees for each construction and checks
//! them by Monte Carlo.

pub mod complexity;
pub mod dist;
pub mod error;
pub mod learners;
mod linalg;
pub mod lp;
pub mod model;
pub mod problem;
pub mod robust;
pub mod usets;
pub mod validate;

pub use error::{Error, Result};
pub use learners::{FitConfig, LossKind, StepRule};
pub use model::{BoxUncertaintySet, Dataset, IntervalFunction, LinearModel, QueryBatch};
pub use problem::{portfolio_feasible, DecisionProblem, PortfolioProblem};
pub use nalgebra::{DMatrix, DVector};
