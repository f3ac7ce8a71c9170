//! Condition numbers, sample-size planners, discretization bounds and
//! ensemble statistics.

mod bounds;
mod condition;
mod distance;
mod planner;
mod summary;

pub use bounds::{
    geometric_sum, kl_discretization_bound, max_drift_norm, ou_coupled_check, strongly_convex_expansiveness,
    w2_discretization_bound, BoundParams, CoupledCheck,
};
pub use condition::{condition_numbers, condition_numbers_fixed_v, envelope_grid, ConditionReport};
pub use distance::{empirical_distance, ks_critical_value, ks_two_sample, w2_1d, DistanceReport};
pub use planner::{plan_nonconvex, plan_strongly_convex, stable_ceil, PlannerInputs, PlannerOutput};
pub use summary::{ensemble_summary, fit_slope, log_error_series, quantile_sorted, Band, LogErrorSeries, LOG_FLOOR};
