//! Multivariate simple exponential smoothing, written as the integrated
//! VMA(1) `Δy_t = u_t − Θu_{t−1}`.
//!
//! The main entry point is [`meta::meta_fit`], which estimates `(Θ, Σ_u)` by
//! fitting scalar MA(1) models to a fixed set of linear aggregates of the
//! differenced series and assembling their autocovariances. A Gaussian
//! likelihood baseline ([`ml::ml_fit`]), a sample-moment estimator
//! ([`meta::mom_fit`]), a simulator for the local-level model, a one-step
//! EWMA forecaster and a Monte Carlo benchmark are included.
//!
//! ```
//! use meta_smooth::{difference, meta_fit, preset, simulate, SimulationSpec};
//!
//! let levels = simulate(&SimulationSpec::new(preset(1).unwrap(), 400, 42)).unwrap();
//! let report = meta_fit(&difference(&levels).unwrap()).unwrap();
//! assert_eq!(report.reduced.theta.nrows(), 2);
//! ```

pub mod bench;
pub mod error;
pub mod estimator;
pub mod forecast;
pub mod linalg;
pub mod meta;
pub mod ml;
pub mod model;
pub mod optimize;
pub mod scalar;
pub mod series;
pub mod simulate;

pub use bench::{rmse, run_benchmark, BenchmarkConfig, BenchmarkResult, BenchmarkRow, ModelSpec, Target};
pub use error::{Error, Result, Stage};
pub use estimator::Estimator;
pub use forecast::{forecast_after, forecast_experiment, forecast_next, ForecastExperimentConfig, ForecastState};
pub use linalg::Matrix;
pub use meta::{meta_fit, mom_fit, sample_autocov, MetaFitReport};
pub use ml::{ml_fit, vma_nll, MlConfig, MlFit, MlInit};
pub use model::{
    autocov_to_reduced, params_to_autocov, reduced_to_structural, structural_to_reduced, AutocovPair, ReducedParams,
    StructuralParams,
};
pub use series::{SeriesKind, SeriesMatrix};
pub use simulate::{child_seed, difference, preset, simulate, SimulationSpec};
