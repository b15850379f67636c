//! Random-walk Metropolis–Hastings sampling of a Gibbs target.
//!
//! The proposal is an independent Gaussian step per coordinate. While
//! burn-in runs with `adapt` enabled, the step-scale vector is multiplied by
//! `exp(±0.05)` after every batch of 50 iterations, pushing the acceptance
//! rate toward `target_accept`; the scale is frozen once burn-in ends so the
//! retained chain satisfies detailed balance. Nothing here needs gradients;
//! the bundled check loss is nonsmooth and the misclassification risk is
//! piecewise constant.

use std::io;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::ParamVector;
use crate::error::{Error, Result};
use crate::math;
use crate::rng::substream;
use crate::target::GibbsTarget;

const ADAPT_BATCH: usize = 50;
const ADAPT_LOG_STEP: f64 = 0.05;
/// Floor keeping adaptation from collapsing the proposal on flat plateaus.
const STEP_SCALE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct SamplerConfig {
    /// Number of retained draws (M).
    pub retained: usize,
    pub burn_in: usize,
    pub init: ParamVector,
    /// Per-coordinate Gaussian proposal scale.
    pub step_scale: Vec<f64>,
    pub adapt: bool,
    pub target_accept: f64,
    pub seed: u64,
}

impl SamplerConfig {
    /// Defaults: burn-in equal to `retained` (half the chain discarded),
    /// unit step scale, adaptation on, target acceptance 0.3.
    pub fn new(retained: usize, init: ParamVector) -> Self {
        let dim = init.dim();
        SamplerConfig {
            retained,
            burn_in: retained,
            init,
            step_scale: vec![1.0; dim],
            adapt: true,
            target_accept: 0.3,
            seed: 0,
        }
    }

    pub fn with_step_scale(mut self, step_scale: Vec<f64>) -> Self {
        self.step_scale = step_scale;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.retained == 0 {
            return Err(Error::invalid("retained draw count must be positive"));
        }
        if self.init.dim() != dim {
            return Err(Error::invalid(format!(
                "init dimension {} does not match target dimension {dim}",
                self.init.dim()
            )));
        }
        if self.step_scale.len() != dim {
            return Err(Error::invalid(format!(
                "step_scale length {} does not match target dimension {dim}",
                self.step_scale.len()
            )));
        }
        if self.step_scale.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("step_scale entries must be positive"));
        }
        if !(self.target_accept > 0.1 && self.target_accept < 0.6) {
            return Err(Error::invalid(format!(
                "target_accept = {} must lie in (0.1, 0.6)",
                self.target_accept
            )));
        }
        Ok(())
    }
}

/// Retained draws plus the state needed to warm-start a follow-up chain.
#[derive(Clone, Debug)]
pub struct PosteriorSample {
    pub draws: Vec<ParamVector>,
    /// Unnormalized log posterior at each retained draw.
    pub log_densities: Vec<f64>,
    /// Acceptance rate over the retained (post-burn-in) phase.
    pub accept_rate: f64,
    pub final_state: ParamVector,
    pub final_step_scale: Vec<f64>,
    /// Set when the whole run accepted nothing; such a chain carries no
    /// information and callers should discard it.
    pub degenerate: bool,
}

impl PosteriorSample {
    pub fn retained(&self) -> usize {
        self.draws.len()
    }

    pub fn param_dim(&self) -> usize {
        self.final_state.dim()
    }

    /// Draws of coordinate `k` as a flat chain.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[k]).collect()
    }

    /// Posterior mean per coordinate.
    pub fn mean(&self) -> Vec<f64> {
        let dim = self.param_dim();
        (0..dim).map(|k| math::mean(&self.column(k))).collect()
    }

    /// CSV dump with columns `iter,theta_0..theta_p,log_density`.
    pub fn write_chain_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let dim = self.param_dim();
        let mut header = vec!["iter".to_string()];
        header.extend((0..dim).map(|k| format!("theta_{k}")));
        header.push("log_density".to_string());
        wtr.write_record(&header)?;
        for (i, draw) in self.draws.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(draw.as_slice().iter().map(|v| v.to_string()));
            rec.push(self.log_densities[i].to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Run a random-walk Metropolis–Hastings chain against `target`.
///
/// Deterministic given `cfg.seed`. Draws are taken after `cfg.burn_in`
/// iterations; adaptation (when enabled) only ever touches the burn-in phase.
pub fn mh_sample(target: &GibbsTarget<'_>, cfg: &SamplerConfig) -> Result<PosteriorSample> {
    let dim = target.param_dim();
    cfg.validate(dim)?;

    let mut lp = target.log_density(&cfg.init)?;
    if !lp.is_finite() {
        return Err(Error::invalid("initial state has non-finite log-density"));
    }

    let mut rng = substream(cfg.seed, &[]);
    let mut state: Vec<f64> = cfg.init.as_slice().to_vec();
    let mut step = cfg.step_scale.clone();
    let mut proposal = vec![0.0f64; dim];

    let total = cfg.burn_in + cfg.retained;
    let mut draws = Vec::with_capacity(cfg.retained);
    let mut log_densities = Vec::with_capacity(cfg.retained);
    let mut accepted_total = 0usize;
    let mut accepted_kept = 0usize;
    let mut batch_accepts = 0usize;
    let mut batch_len = 0usize;

    for it in 0..total {
        for k in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            proposal[k] = state[k] + step[k] * z;
        }
        let lp_prop = target.log_density_slice(&proposal)?;
        let delta = lp_prop - lp;
        let accept = delta >= 0.0 || rng.gen::<f64>() < delta.exp();
        if accept {
            state.copy_from_slice(&proposal);
            lp = lp_prop;
            accepted_total += 1;
        }

        let burning = it < cfg.burn_in;
        if burning && cfg.adapt {
            if accept {
                batch_accepts += 1;
            }
            batch_len += 1;
            if batch_len == ADAPT_BATCH {
                let rate = batch_accepts as f64 / ADAPT_BATCH as f64;
                let factor = if rate > cfg.target_accept { ADAPT_LOG_STEP.exp() } else { (-ADAPT_LOG_STEP).exp() };
                for s in step.iter_mut() {
                    *s = (*s * factor).max(STEP_SCALE_FLOOR);
                }
                batch_accepts = 0;
                batch_len = 0;
            }
        }

        if !burning {
            if accept {
                accepted_kept += 1;
            }
            draws.push(ParamVector::new(state.clone()).expect("accepted states are finite"));
            log_densities.push(lp);
        }
    }

    let degenerate = accepted_total == 0 && total > 1;
    if degenerate {
        log::warn!("degenerate chain: zero acceptances over {} iterations", total);
    }

    Ok(PosteriorSample {
        draws,
        log_densities,
        accept_rate: accepted_kept as f64 / cfg.retained as f64,
        final_state: ParamVector::new(state).expect("finite state"),
        final_step_scale: step,
        degenerate,
    })
}

/// Effective sample size of a scalar chain by Geyer's initial positive
/// sequence: autocorrelations are summed while consecutive pairs stay
/// positive, and `ESS = m / (1 + 2·Σρ_k)`, clamped to `(0, m]`.
///
/// A constant chain returns 0 (degenerate, no information).
pub fn effective_sample_size(chain: &[f64]) -> Result<f64> {
    let m = chain.len();
    if m < 10 {
        return Err(Error::invalid(format!("chain length {m} too short for ESS (need >= 10)")));
    }
    let mean = math::mean(chain);
    let var = chain.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / m as f64;
    if var <= 0.0 || !var.is_finite() {
        return Ok(0.0);
    }

    let acf = |k: usize| -> f64 {
        let mut acc = 0.0;
        for i in 0..m - k {
            acc += (chain[i] - mean) * (chain[i + k] - mean);
        }
        acc / (m as f64 * var)
    };

    // Geyer pairs Γ_t = ρ_{2t+1} + ρ_{2t+2}; sum while positive.
    let mut rho_sum = 0.0;
    let mut k = 1;
    while k + 1 < m {
        let pair = acf(k) + acf(k + 1);
        if pair <= 0.0 {
            break;
        }
        rho_sum += pair;
        k += 2;
    }
    let tau = 1.0 + 2.0 * rho_sum;
    Ok((m as f64 / tau).min(m as f64).max(f64::MIN_POSITIVE))
}

/// Kolmogorov–Smirnov statistic of a sample against a reference CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut stat: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let lo = (f - i as f64 / n).abs();
        let hi = ((i + 1) as f64 / n - f).abs();
        stat = stat.max(lo).max(hi);
    }
    stat
}
