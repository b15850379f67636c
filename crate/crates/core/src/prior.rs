//! Prior distributions on the parameter vector.

use crate::data::ParamVector;
use crate::error::{Error, Result};

/// Either an improper flat prior (log-density identically 0) or an
/// independent Gaussian per coordinate.
///
/// The flat prior is permitted everywhere; posterior propriety is the
/// caller's responsibility. With the bundled check and squared-error losses
/// the scaled risk grows without bound along every parameter ray once
/// `n >= param_dim`, so the Gibbs posterior is proper under a flat prior.
/// The misclassification risk is bounded, so the classification experiments
/// default to a proper Gaussian prior instead.
#[derive(Clone, Debug, PartialEq)]
pub enum Prior {
    Flat,
    Gaussian { mean: Vec<f64>, sd: Vec<f64> },
}

impl Prior {
    pub fn flat() -> Self {
        Prior::Flat
    }

    pub fn gaussian(mean: Vec<f64>, sd: Vec<f64>) -> Result<Self> {
        if mean.len() != sd.len() || mean.is_empty() {
            return Err(Error::invalid("gaussian prior needs matching non-empty mean and sd vectors"));
        }
        if sd.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("gaussian prior sds must be strictly positive"));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("gaussian prior means must be finite"));
        }
        Ok(Prior::Gaussian { mean, sd })
    }

    /// Zero-mean Gaussian with common sd on every coordinate.
    pub fn isotropic_gaussian(dim: usize, sd: f64) -> Result<Self> {
        Prior::gaussian(vec![0.0; dim], vec![sd; dim])
    }

    /// Dimension this prior constrains, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Prior::Flat => None,
            Prior::Gaussian { mean, .. } => Some(mean.len()),
        }
    }

    pub fn log_density(&self, theta: &ParamVector) -> Result<f64> {
        if let Some(d) = self.dim() {
            if d != theta.dim() {
                return Err(Error::invalid(format!(
                    "prior dimension {d} does not match parameter dimension {}",
                    theta.dim()
                )));
            }
        }
        Ok(self.log_density_slice(theta.as_slice()))
    }

    #[inline]
    pub(crate) fn log_density_slice(&self, theta: &[f64]) -> f64 {
        match self {
            Prior::Flat => 0.0,
            Prior::Gaussian { mean, sd } => {
                const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
                let mut lp = 0.0;
                for k in 0..theta.len() {
                    let z = (theta[k] - mean[k]) / sd[k];
                    lp -= 0.5 * z * z + sd[k].ln() + HALF_LN_2PI;
                }
                lp
            }
        }
    }
}
