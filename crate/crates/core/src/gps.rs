//! The GPS (Gibbs Posterior Scaling) algorithm.
//!
//! GPS tunes the scale ω so that Gibbs posterior credible intervals hit their
//! nominal frequentist coverage. The empirical calibration equation
//! `ĉ(ω) = 1 - α` is solved by stochastic approximation:
//!
//! 1. draw B bootstrap resamples of the data, once;
//! 2. sample the ω-Gibbs posterior on every resample by MCMC;
//! 3. iterate: estimate the empirical coverage ĉ of the M-estimator anchor
//!    `θ̂ₙ` by the per-resample credible intervals, update
//!    `ω ← max(ω_min, ω + κ_t·(ĉ - (1-α)))` with `κ_t = κ₀·t^{-b}`, and
//!    re-sample the chains at the new ω, until `|ĉ - (1-α)| ≤ ε` or the
//!    iteration cap.
//!
//! The bootstrap sets are drawn once and stay fixed across iterations, the
//! anchor is computed once on the original data, and the stopping test reads
//! ĉ at the *current* ω while the returned value is the post-update one.

use std::io;

use rayon::prelude::*;

use crate::credible::{coverage_event, equal_tailed_interval, CoverageMode, CredibleInterval};
use crate::data::{Dataset, ParamVector};
use crate::error::{Error, Result};
use crate::loss::{LossKind, LossModel};
use crate::math;
use crate::mestimator::{minimize_risk, OptimizerConfig};
use crate::prior::Prior;
use crate::rng::{derive_seed, substream};
use crate::sampler::{mh_sample, PosteriorSample, SamplerConfig};
use crate::target::GibbsTarget;

/// Fraction of bootstrap chains allowed to degenerate before the coverage
/// estimate is considered unusable.
const MAX_DEGENERATE_FRACTION: f64 = 0.2;

/// Burn-in divisor for warm-started re-entry chains (`warm_start = true`).
const WARM_BURN_DIVISOR: usize = 5;

#[derive(Clone, Debug)]
pub struct GpsConfig {
    /// Credible level complement; intervals target coverage `1 - alpha`.
    pub alpha: f64,
    /// Number of bootstrap resamples (B).
    pub bootstrap_samples: usize,
    /// Retained posterior draws per chain (M).
    pub posterior_draws: usize,
    pub omega_init: f64,
    /// Step-size scale κ₀ in `κ_t = κ₀·t^{-kappa_exponent}`.
    pub kappa0: f64,
    /// Exponent in (1/2, 1]; this range gives Σκ_t = ∞ with Σκ_t² < ∞.
    pub kappa_exponent: f64,
    /// Stop once `|ĉ - (1-α)|` falls below this tolerance.
    pub eps_tol: f64,
    pub max_iter: usize,
    /// Lower clamp keeping the iterate strictly positive.
    pub omega_min: f64,
    pub coverage_mode: CoverageMode,
    /// When set, chains after the first iteration re-enter from their
    /// previous state with a fifth of the burn-in. Off by default: every
    /// iteration then re-samples with full burn-in, still re-entering at the
    /// previous state and step scale.
    pub warm_start: bool,
    pub seed: u64,
}

impl Default for GpsConfig {
    fn default() -> Self {
        GpsConfig {
            alpha: 0.05,
            bootstrap_samples: 100,
            posterior_draws: 2000,
            omega_init: 1.0,
            kappa0: 1.0,
            kappa_exponent: 0.75,
            eps_tol: 0.01,
            max_iter: 50,
            omega_min: 1e-8,
            coverage_mode: CoverageMode::PerCoordinateAverage,
            warm_start: false,
            seed: 0,
        }
    }
}

impl GpsConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::invalid(format!("alpha = {} must lie in (0, 0.5)", self.alpha)));
        }
        if self.bootstrap_samples == 0 || self.posterior_draws == 0 || self.max_iter == 0 {
            return Err(Error::invalid("bootstrap_samples, posterior_draws, max_iter must be positive"));
        }
        if !(self.kappa_exponent > 0.5 && self.kappa_exponent <= 1.0) {
            return Err(Error::invalid(format!(
                "kappa_exponent = {} must lie in (1/2, 1]",
                self.kappa_exponent
            )));
        }
        if !(self.kappa0 > 0.0) {
            return Err(Error::invalid("kappa0 must be positive"));
        }
        if !(self.omega_min > 0.0) {
            return Err(Error::invalid("omega_min must be positive"));
        }
        if self.omega_init < self.omega_min {
            return Err(Error::invalid(format!(
                "omega_init = {} below omega_min = {}",
                self.omega_init, self.omega_min
            )));
        }
        if !(self.eps_tol > 0.0) {
            return Err(Error::invalid("eps_tol must be positive"));
        }
        Ok(())
    }
}

/// One SA iteration of the trace: the iterate, the coverage estimated at it,
/// and the step size used to leave it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GpsTraceRow {
    pub t: usize,
    pub omega: f64,
    pub c_hat: f64,
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GpsResult {
    /// Calibrated scale ωₙ (the post-update iterate, per the algorithm's
    /// stopping rule).
    pub omega_n: f64,
    pub trace: Vec<GpsTraceRow>,
    pub converged: bool,
    pub iterations: usize,
    /// M-estimator anchor used for the coverage events.
    pub theta_hat: ParamVector,
}

impl GpsResult {
    /// CSV dump with columns `t,omega,c_hat,kappa`.
    pub fn write_trace_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["t", "omega", "c_hat", "kappa"])?;
        for row in &self.trace {
            wtr.write_record(&[
                row.t.to_string(),
                row.omega.to_string(),
                row.c_hat.to_string(),
                row.kappa.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Draw `count` bootstrap resamples of size n (uniform, with replacement).
/// Deterministic given `seed`; resample `b` uses the stream `(seed, b)`.
pub fn bootstrap_resample(data: &Dataset, count: usize, seed: u64) -> Result<Vec<Dataset>> {
    if count == 0 {
        return Err(Error::invalid("bootstrap resample count must be >= 1"));
    }
    let n = data.n();
    (0..count)
        .map(|b| {
            let mut rng = substream(seed, &[b as u64]);
            let indices: Vec<usize> = (0..n).map(|_| rand::Rng::gen_range(&mut rng, 0..n)).collect();
            data.resample(&indices)
        })
        .collect()
}

/// One stochastic-approximation update:
/// `max(omega_min, ω_t + κ_t·(ĉ - (1-α)))` with `κ_t = κ₀·t^{-b}`.
pub fn sa_step(omega_t: f64, c_hat: f64, t: usize, cfg: &GpsConfig) -> f64 {
    let kappa = cfg.kappa0 * (t as f64).powf(-cfg.kappa_exponent);
    (omega_t + kappa * (c_hat - (1.0 - cfg.alpha))).max(cfg.omega_min)
}

/// Per-chain outcome inside one coverage sweep.
struct ChainOutcome {
    coverage: Option<f64>,
    state: ParamVector,
    step_scale: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn sample_and_score(
    boot_set: &Dataset,
    loss: &LossModel,
    prior: &Prior,
    omega: f64,
    anchor: &ParamVector,
    alpha: f64,
    mode: CoverageMode,
    cfg: &SamplerConfig,
) -> Result<ChainOutcome> {
    let target = GibbsTarget::new(boot_set, loss, prior, omega)?;
    let sample = mh_sample(&target, cfg)?;
    let coverage = if sample.degenerate {
        None
    } else {
        let intervals = per_coordinate_intervals(&sample, alpha)?;
        Some(coverage_event(&intervals, anchor, mode)?)
    };
    Ok(ChainOutcome { coverage, state: sample.final_state, step_scale: sample.final_step_scale })
}

/// Equal-tailed interval for every coordinate of a posterior sample.
pub fn per_coordinate_intervals(sample: &PosteriorSample, alpha: f64) -> Result<Vec<CredibleInterval>> {
    (0..sample.param_dim()).map(|k| equal_tailed_interval(&sample.column(k), alpha)).collect()
}

/// Monte-Carlo/bootstrap estimate `ĉ_{α,Pₙ}(ω)`: the fraction of bootstrap
/// posteriors whose `100(1-α)%` intervals cover the anchor `θ̂ₙ`.
///
/// Degenerate chains are dropped from the average with a warning; if more
/// than 20% degenerate the estimate is refused.
#[allow(clippy::too_many_arguments)]
pub fn empirical_coverage(
    omega: f64,
    boot_sets: &[Dataset],
    anchor: &ParamVector,
    alpha: f64,
    loss: &LossModel,
    prior: &Prior,
    sampler_cfg: &SamplerConfig,
    mode: CoverageMode,
) -> Result<f64> {
    if boot_sets.is_empty() {
        return Err(Error::invalid("empirical coverage needs at least one bootstrap set"));
    }
    let outcomes: Vec<Result<ChainOutcome>> = boot_sets
        .par_iter()
        .enumerate()
        .map(|(b, set)| {
            let cfg = SamplerConfig {
                seed: derive_seed(sampler_cfg.seed, &[b as u64]),
                init: anchor.clone(),
                ..sampler_cfg.clone()
            };
            sample_and_score(set, loss, prior, omega, anchor, alpha, mode, &cfg)
        })
        .collect();
    average_coverage(outcomes).map(|(c, _)| c)
}

/// Deterministic in-order fold of per-chain outcomes; errors propagate,
/// degenerate chains are counted and capped.
fn average_coverage(outcomes: Vec<Result<ChainOutcome>>) -> Result<(f64, Vec<ChainOutcome>)> {
    let total = outcomes.len();
    let mut covers = Vec::with_capacity(total);
    let mut kept = Vec::with_capacity(total);
    let mut degenerate = 0usize;
    for outcome in outcomes {
        let outcome = outcome?;
        match outcome.coverage {
            Some(c) => covers.push(c),
            None => degenerate += 1,
        }
        kept.push(outcome);
    }
    if (degenerate as f64) > MAX_DEGENERATE_FRACTION * total as f64 {
        return Err(Error::DegenerateChains { degenerate, total });
    }
    if degenerate > 0 {
        log::warn!("excluded {degenerate} of {total} degenerate chains from coverage estimate");
    }
    Ok((math::mean(&covers), kept))
}

/// Data-driven initial proposal scale, one entry per parameter coordinate.
/// Only the order of magnitude matters; burn-in adaptation does the rest.
pub(crate) fn initial_step_scale(data: &Dataset, loss: &LossModel) -> Vec<f64> {
    let n = data.n() as f64;
    let spread = |column: &[f64]| -> f64 {
        let s = math::sd(column);
        if s > 1e-12 {
            s
        } else {
            let rms = (column.iter().map(|v| v * v).sum::<f64>() / column.len() as f64).sqrt();
            rms.max(1.0)
        }
    };
    match loss.kind() {
        LossKind::SquaredError => {
            let y_sd = data.real_responses().map(spread).unwrap_or(1.0);
            vec![(y_sd / n.sqrt()).max(1e-6)]
        }
        LossKind::Check { .. } => {
            let y_sd = data.real_responses().map(spread).unwrap_or(1.0);
            (0..data.covariate_dim())
                .map(|k| {
                    let col: Vec<f64> = (0..data.n()).map(|i| data.covariates(i)[k]).collect();
                    (y_sd / (spread(&col) * n.sqrt())).max(1e-6)
                })
                .collect()
        }
        LossKind::Misclassification { j } => {
            // The risk is piecewise constant; near the optimum the plateau
            // spacing in the intercept direction is about (margin spread)/n,
            // and slope coordinates see it shrunk by the covariate
            // magnitude.
            let d = data.covariate_dim();
            let col = |k: usize| -> Vec<f64> { (0..data.n()).map(|i| data.covariates(i)[k]).collect() };
            let rms = |column: &[f64]| -> f64 {
                (column.iter().map(|v| v * v).sum::<f64>() / column.len() as f64).sqrt()
            };
            let sj = spread(&col(j));
            let base = (2.0 * sj / n).max(1e-6);
            let mut scale = vec![base];
            for k in 0..d {
                if k != j {
                    scale.push((base / rms(&col(k)).max(1e-6)).max(1e-6));
                }
            }
            scale
        }
    }
}

/// Run the full GPS calibration on a dataset.
///
/// Chains warm-start across SA iterations: each bootstrap set keeps its final
/// state and adapted step scale and re-enters there when ω is updated. With
/// `warm_start` disabled (default) every iteration still runs a full burn-in;
/// enabling it cuts re-entry burn-in to a fifth.
pub fn gps_calibrate(data: &Dataset, loss: &LossModel, prior: &Prior, cfg: &GpsConfig) -> Result<GpsResult> {
    cfg.validate()?;
    loss.validate(loss.param_dim(), data)?;
    if data.n() < loss.param_dim() {
        return Err(Error::invalid(format!(
            "need n >= param_dim = {}, got n = {}",
            loss.param_dim(),
            data.n()
        )));
    }

    let opt_cfg = OptimizerConfig::default_for(loss.param_dim()).with_seed(derive_seed(cfg.seed, &[1]));
    let anchor = minimize_risk(data, loss, &opt_cfg)?.theta_hat;
    let boot_sets = bootstrap_resample(data, cfg.bootstrap_samples, derive_seed(cfg.seed, &[2]))?;

    let step0 = initial_step_scale(data, loss);
    let mut states: Vec<(ParamVector, Vec<f64>)> =
        vec![(anchor.clone(), step0); cfg.bootstrap_samples];

    let mut omega = cfg.omega_init;
    let mut trace = Vec::new();
    let target_coverage = 1.0 - cfg.alpha;

    for t in 1..=cfg.max_iter {
        let burn_in = if t == 1 || !cfg.warm_start {
            cfg.posterior_draws
        } else {
            (cfg.posterior_draws / WARM_BURN_DIVISOR).max(1)
        };
        let omega_t = omega;
        let outcomes: Vec<Result<ChainOutcome>> = boot_sets
            .par_iter()
            .enumerate()
            .map(|(b, set)| {
                let scfg = SamplerConfig {
                    retained: cfg.posterior_draws,
                    burn_in,
                    init: states[b].0.clone(),
                    step_scale: states[b].1.clone(),
                    adapt: true,
                    target_accept: 0.3,
                    seed: derive_seed(cfg.seed, &[3, t as u64, b as u64]),
                };
                sample_and_score(set, loss, prior, omega_t, &anchor, cfg.alpha, cfg.coverage_mode, &scfg)
            })
            .collect();
        let (c_hat, kept) = average_coverage(outcomes)?;
        for (b, outcome) in kept.into_iter().enumerate() {
            states[b] = (outcome.state, outcome.step_scale);
        }

        let kappa = cfg.kappa0 * (t as f64).powf(-cfg.kappa_exponent);
        trace.push(GpsTraceRow { t, omega, c_hat, kappa });
        let omega_next = sa_step(omega, c_hat, t, cfg);

        if (c_hat - target_coverage).abs() <= cfg.eps_tol {
            return Ok(GpsResult { omega_n: omega_next, trace, converged: true, iterations: t, theta_hat: anchor });
        }
        omega = omega_next;
    }

    Ok(GpsResult { omega_n: omega, trace, converged: false, iterations: cfg.max_iter, theta_hat: anchor })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal_data(n: usize, seed: u64) -> Dataset {
        let mut rng = substream(seed, &[50]);
        Dataset::from_responses((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).unwrap()
    }

    #[test]
    fn bootstrap_single_row_reproduces_dataset() {
        let data = Dataset::from_responses(vec![4.2]).unwrap();
        let sets = bootstrap_resample(&data, 5, 1).unwrap();
        assert!(sets.iter().all(|s| *s == data));
    }

    #[test]
    fn bootstrap_same_seed_identical() {
        let data = normal_data(40, 3);
        let a = bootstrap_resample(&data, 10, 77).unwrap();
        let b = bootstrap_resample(&data, 10, 77).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_resample(&data, 10, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bootstrap_sizes_preserved() {
        let data = normal_data(17, 4);
        let sets = bootstrap_resample(&data, 3, 5).unwrap();
        assert!(sets.iter().all(|s| s.n() == 17));
        assert!(bootstrap_resample(&data, 0, 5).is_err());
    }

    #[test]
    fn sa_step_examples() {
        let cfg = GpsConfig { alpha: 0.05, kappa0: 1.0, kappa_exponent: 0.75, omega_min: 1e-8, ..GpsConfig::default() };
        // kappa_1 = 1, residual 0.04
        assert!((sa_step(1.0, 0.99, 1, &cfg) - 1.04).abs() < 1e-15);
        // residual zero leaves omega unchanged
        assert_eq!(sa_step(0.7, 0.95, 3, &cfg), 0.7);
        // clamped at omega_min
        let clamped = GpsConfig { omega_min: 0.5, ..cfg };
        assert_eq!(sa_step(0.5, 0.80, 2, &clamped), 0.5);
    }

    #[test]
    fn sa_step_uses_power_schedule() {
        let cfg = GpsConfig { alpha: 0.05, kappa0: 2.0, kappa_exponent: 0.75, ..GpsConfig::default() };
        let kappa4 = 2.0 * (4.0f64).powf(-0.75);
        assert!((sa_step(1.0, 1.0, 4, &cfg) - (1.0 + kappa4 * 0.05)).abs() < 1e-15);
    }

    #[test]
    fn coverage_single_set_indicator() {
        // B = 1 bootstrap set whose posterior surely covers the anchor.
        let data = normal_data(60, 6);
        let loss = LossModel::squared_error();
        let prior = Prior::flat();
        let anchor = ParamVector::from_slice(&[math::mean(data.real_responses().unwrap())]);
        let boot = bootstrap_resample(&data, 1, 9).unwrap();
        let scfg = SamplerConfig::new(500, anchor.clone())
            .with_step_scale(initial_step_scale(&data, &loss))
            .with_seed(10);
        // Tiny omega: intervals are enormous, coverage is certain.
        let c = empirical_coverage(
            1e-4,
            &boot,
            &anchor,
            0.05,
            &loss,
            &prior,
            &scfg,
            CoverageMode::PerCoordinateAverage,
        )
        .unwrap();
        assert_eq!(c, 1.0);
    }

    #[test]
    fn coverage_decreases_in_omega() {
        let data = normal_data(120, 7);
        let loss = LossModel::squared_error();
        let prior = Prior::flat();
        let anchor = ParamVector::from_slice(&[math::mean(data.real_responses().unwrap())]);
        let boot = bootstrap_resample(&data, 60, 11).unwrap();
        let scfg = SamplerConfig::new(400, anchor.clone())
            .with_step_scale(initial_step_scale(&data, &loss))
            .with_seed(12);
        let lo = empirical_coverage(0.02, &boot, &anchor, 0.05, &loss, &prior, &scfg, CoverageMode::PerCoordinateAverage).unwrap();
        let hi = empirical_coverage(5.0, &boot, &anchor, 0.05, &loss, &prior, &scfg, CoverageMode::PerCoordinateAverage).unwrap();
        assert!(lo > hi, "coverage at omega=0.02 ({lo}) should exceed coverage at omega=5 ({hi})");
    }

    #[test]
    fn conjugate_coverage_near_nominal_at_ideal_omega() {
        // At omega = 1/(2*sigma_hat^2) the conjugate intervals cover the
        // anchor with probability ~ 1 - alpha; tolerance 2/sqrt(B).
        let data = normal_data(200, 8);
        let ys = data.real_responses().unwrap();
        let sigma2 = math::variance(ys);
        let omega = 1.0 / (2.0 * sigma2);
        let loss = LossModel::squared_error();
        let prior = Prior::flat();
        let anchor = ParamVector::from_slice(&[math::mean(ys)]);
        let boot = bootstrap_resample(&data, 100, 13).unwrap();
        let scfg = SamplerConfig::new(1_000, anchor.clone())
            .with_step_scale(initial_step_scale(&data, &loss))
            .with_seed(14);
        let c = empirical_coverage(omega, &boot, &anchor, 0.05, &loss, &prior, &scfg, CoverageMode::PerCoordinateAverage).unwrap();
        assert!((c - 0.95).abs() <= 2.0 / (100.0f64).sqrt(), "coverage {c}");
    }

    #[test]
    fn gps_deterministic_and_trace_clamped() {
        let data = normal_data(60, 15);
        let loss = LossModel::squared_error();
        let prior = Prior::flat();
        let cfg = GpsConfig {
            bootstrap_samples: 20,
            posterior_draws: 300,
            max_iter: 5,
            eps_tol: 1e-6, // force the full iteration budget
            seed: 42,
            ..GpsConfig::default()
        };
        let a = gps_calibrate(&data, &loss, &prior, &cfg).unwrap();
        let b = gps_calibrate(&data, &loss, &prior, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(!a.converged);
        assert_eq!(a.trace.len(), 5);
        assert!(a.trace.iter().all(|r| r.omega >= cfg.omega_min));
        assert!(a.omega_n >= cfg.omega_min);
    }

    #[test]
    fn gps_converged_result_within_tolerance() {
        let data = normal_data(100, 16);
        let loss = LossModel::squared_error();
        let prior = Prior::flat();
        let cfg = GpsConfig {
            bootstrap_samples: 40,
            posterior_draws: 500,
            eps_tol: 0.02,
            seed: 5,
            ..GpsConfig::default()
        };
        let res = gps_calibrate(&data, &loss, &prior, &cfg).unwrap();
        if res.converged {
            let last = res.trace.last().unwrap();
            assert!((last.c_hat - 0.95).abs() <= cfg.eps_tol);
            assert_eq!(last.t, res.iterations);
        }
        assert!(!res.trace.is_empty());
        assert!(res.trace.len() <= cfg.max_iter);
    }

    #[test]
    fn omega_min_clamp_respected_in_calibration() {
        // omega_min close to omega_init and data that pushes omega down hard
        // (tiny variance -> ideal omega far above; use inverted: huge
        // variance -> ideal omega near zero so SA walks into the clamp).
        let mut rng = substream(17, &[0]);
        let ys: Vec<f64> = (0..50).map(|_| 50.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let data = Dataset::from_responses(ys).unwrap();
        let loss = LossModel::squared_error();
        let prior = Prior::flat();
        let cfg = GpsConfig {
            bootstrap_samples: 15,
            posterior_draws: 200,
            omega_init: 1.0,
            omega_min: 0.9,
            max_iter: 8,
            eps_tol: 1e-9,
            seed: 3,
            ..GpsConfig::default()
        };
        let res = gps_calibrate(&data, &loss, &prior, &cfg).unwrap();
        assert!(res.trace.iter().all(|r| r.omega >= 0.9));
        assert_eq!(res.omega_n, 0.9);
    }

    #[test]
    fn trace_csv_schema() {
        let res = GpsResult {
            omega_n: 0.5,
            trace: vec![GpsTraceRow { t: 1, omega: 1.0, c_hat: 0.9, kappa: 1.0 }],
            converged: true,
            iterations: 1,
            theta_hat: ParamVector::from_slice(&[0.0]),
        };
        let mut buf = Vec::new();
        res.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,omega,c_hat,kappa");
        assert_eq!(text.lines().nth(1).unwrap(), "1,1,0.9,1");
    }
}
