//! Likelihood-free Bayesian inference with Gibbs posteriors, plus the GPS
//! algorithm that picks the loss scale ω so posterior credible intervals
//! attain their nominal frequentist coverage.
//!
//! A Gibbs posterior replaces the likelihood with a user-chosen loss:
//! `Π(dθ) ∝ exp(-ω·n·Rₙ(θ)) π(θ)`, where `Rₙ` is the empirical risk. The
//! scale ω controls the posterior spread and is not identified by the data;
//! [`gps::gps_calibrate`] solves the empirical calibration equation
//! `ĉ(ω) = 1 - α` for it by bootstrap + MCMC + stochastic approximation.
//!
//! ```
//! use gibbs_gps_core::{
//!     gps_calibrate, Dataset, GpsConfig, LossModel, Prior,
//! };
//!
//! // Median regression on a tiny synthetic dataset.
//! let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![1.0, (i as f64) / 10.0]).collect();
//! let ys: Vec<f64> = xs.iter().map(|x| 1.0 + 2.0 * x[1]).collect();
//! let data = Dataset::from_regression(xs, ys).unwrap();
//! let loss = LossModel::check(0.5, 2).unwrap();
//! let cfg = GpsConfig {
//!     bootstrap_samples: 10,
//!     posterior_draws: 200,
//!     max_iter: 2,
//!     warm_start: true,
//!     ..GpsConfig::default()
//! };
//! let result = gps_calibrate(&data, &loss, &Prior::flat(), &cfg).unwrap();
//! assert!(result.omega_n > 0.0);
//! ```

// Validation guards use `!(x > 0.0)` so NaN fails alongside out-of-range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod credible;
pub mod data;
pub mod error;
pub mod experiments;
pub mod gps;
pub mod loss;
pub mod math;
pub mod mestimator;
pub mod prior;
pub mod rng;
pub mod sampler;
pub mod target;

pub use credible::{coverage_event, equal_tailed_interval, quantile, CoverageMode, CredibleInterval};
pub use data::{Dataset, Observation, ParamVector, Response};
pub use error::{Error, Result};
pub use experiments::{
    asymptotic_omega_oracle, fixed_omega_study, generate, run_coverage_study, ScenarioKind,
    ScenarioSpec, StudyReport,
};
pub use gps::{
    bootstrap_resample, empirical_coverage, gps_calibrate, sa_step, GpsConfig, GpsResult,
    GpsTraceRow,
};
pub use loss::{check_loss, empirical_risk, misclassification_loss, squared_error_loss, LossKind, LossModel};
pub use mestimator::{bias_corrected_estimate, minimize_risk, MEstimate, OptimizerConfig};
pub use prior::Prior;
pub use sampler::{effective_sample_size, mh_sample, PosteriorSample, SamplerConfig};
pub use target::GibbsTarget;
