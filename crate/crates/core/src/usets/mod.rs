//! Uncertainty-set construction.
//!
//! Methods 1 and 2 map fitted interval or quantile models straight to a box.
//! Methods 3 and 4 extremize predictions over a good-model set and pad by
//! the residual support half-width.

mod builders;
mod extremize;
mod gi;
mod good_set;
mod pacbayes;

pub use builders::{build_method1, build_method2, build_method3, build_method4, Method, SetDiagnostics};
pub use extremize::{
    extremize_prediction, extremize_prediction_with, prediction_ranges, ExtremizeOptions, PredictionRange,
};
pub use gi::{build_gi_baseline, GiDiagnostics};
pub use good_set::{
    finite_class_slack, finite_erm, finite_good_set, good_set_threshold_finite, good_set_threshold_population,
    good_set_threshold_rademacher, population_rademacher_slack, rademacher_slack, GoodModelSet, ResidualSupport,
    MEMBERSHIP_SLACK,
};
pub use pacbayes::{build_pacbayes_set, pacbayes_threshold};
