//! The Gibbs unnormalized log posterior.

use crate::data::{Dataset, ParamVector};
use crate::error::{Error, Result};
use crate::loss::LossModel;
use crate::prior::Prior;

/// Unnormalized log posterior `-ω·n·Rₙ(θ) + log π(θ)` for a fixed dataset,
/// loss, prior, and scale `ω > 0`.
///
/// Normalization-free contract: differences of `log_density` between two
/// parameter values equal `-ω·n·(Rₙ(θ₁) - Rₙ(θ₂)) + log π(θ₁) - log π(θ₂)`
/// exactly as computed; no hidden constants are added.
#[derive(Clone, Debug)]
pub struct GibbsTarget<'a> {
    data: &'a Dataset,
    loss: &'a LossModel,
    prior: &'a Prior,
    omega: f64,
    scaled_n: f64,
}

impl<'a> GibbsTarget<'a> {
    pub fn new(data: &'a Dataset, loss: &'a LossModel, prior: &'a Prior, omega: f64) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::invalid(format!("omega = {omega} must be a positive finite real")));
        }
        loss.validate(loss.param_dim(), data)?;
        if let Some(d) = prior.dim() {
            if d != loss.param_dim() {
                return Err(Error::invalid(format!(
                    "prior dimension {d} does not match loss param_dim {}",
                    loss.param_dim()
                )));
            }
        }
        Ok(GibbsTarget { data, loss, prior, omega, scaled_n: omega * data.n() as f64 })
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn loss(&self) -> &LossModel {
        self.loss
    }

    pub fn prior(&self) -> &Prior {
        self.prior
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn param_dim(&self) -> usize {
        self.loss.param_dim()
    }

    /// `-ω·n·Rₙ(θ) + log π(θ)`. A NaN risk (corrupt data) is reported as a
    /// numerical error carrying the offending observation index.
    pub fn log_density(&self, theta: &ParamVector) -> Result<f64> {
        if theta.dim() != self.param_dim() {
            return Err(Error::invalid(format!(
                "parameter dimension {} does not match target dimension {}",
                theta.dim(),
                self.param_dim()
            )));
        }
        self.log_density_slice(theta.as_slice())
    }

    /// Hot path used by the sampler: `theta` may carry infinities (overflowed
    /// proposals), which land at log-density -inf and get rejected upstream.
    #[inline]
    pub(crate) fn log_density_slice(&self, theta: &[f64]) -> Result<f64> {
        let risk = self.loss.risk_unchecked(theta, self.data);
        if risk.is_nan() {
            return Err(Error::NonFinite {
                what: "pointwise loss",
                index: self.loss.find_nan_index(theta, self.data),
            });
        }
        Ok(-self.scaled_n * risk + self.prior.log_density_slice(theta))
    }
}
