//! Model-free volatility forecasting for financial return series.
//!
//! The crate is organized around the NoVaS (normalizing and
//! variance-stabilizing) transformation family: return series are mapped to
//! approximately i.i.d. standard-normal innovations by a calibrated
//! transform, and forecasts of future squared returns are obtained by
//! simulating innovations and inverting the transform path by path.
//!
//! Modules:
//! - [`series`]: log-return construction, trailing moments, kurtosis and
//!   rolling windows.
//! - [`transform`]: coefficient construction for every NoVaS family
//!   (exponential-decay and GARCH-derived weights, with and without the
//!   contemporaneous term) plus kurtosis-target grid calibration.
//! - [`predict`]: transform inversion, Monte-Carlo / bootstrap path
//!   simulation and L1/L2-optimal multi-step predictors.
//! - [`garch`]: the GARCH(1,1) quasi-maximum-likelihood benchmark.
//! - [`sim`]: seeded generators for eight GARCH-type data-generating
//!   processes used in evaluation studies.
//! - [`eval`]: rolling pseudo-out-of-sample harness, the aggregated
//!   squared-error metric, relative-performance tables and the Clark-West
//!   test of predictive accuracy.

pub mod error;
pub mod eval;
pub mod garch;
pub mod predict;
pub mod rng;
pub mod series;
pub mod sim;
pub mod transform;

pub use error::{Error, Result};
pub use eval::{
    cw_test, metric_p, relative_table, run_poos, AggregatedForecastSeries, CwTestResult,
    EvalMethod, MethodSeries, PerformanceReport, PoosConfig, SelectionSpec, WindowPlan,
};
pub use garch::{fit_garch11, forecast_sq_returns, GarchFit, GarchParams};
pub use predict::{
    forecast_best_of, inverse_step, optimal_predictor, simulate_paths, FixedVariant,
    ForecastRequest, InnovationMode, InnovationSource, LagState, PathEnsemble, PointForecast,
    RiskCriterion, SelectionMode,
};
pub use series::{
    rolling_windows, sample_kurtosis, to_log_returns, trailing_stats, PriceSeries, ReturnSeries,
    TrailingStats,
};
pub use sim::{generate, SimModelSpec};
pub use transform::{
    build_exponential_coeffs, build_ga_coeffs, calibrate, forward_transform, CalibratedTransform,
    CalibrationGrids, CoefficientVector, GaFreeParams, MethodKind,
};
