//! Loss functions and empirical risk.
//!
//! Three losses are bundled:
//!
//! * check loss for quantile regression, `|(y - x'θ)(τ - 1{y - x'θ < 0})|`;
//! * misclassification loss `1 - Y·sign{X_j - X(j)'θ₁ - θ₀}`, valued in
//!   {0, 2}, with `sign(0) := +1`;
//! * scalar squared error `(x - θ)²`.
//!
//! The empirical risk is the plain average of pointwise losses, accumulated
//! with pairwise summation so results do not depend on row order beyond the
//! last couple of ulps.

use crate::data::{Dataset, Observation, ParamVector, Response};
use crate::error::{Error, Result};
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossKind {
    /// Quantile-regression check loss at level `tau`.
    Check { tau: f64 },
    /// Linear-classifier misclassification loss; `j` is the distinguished
    /// covariate predicted from the remaining ones.
    Misclassification { j: usize },
    /// Scalar squared error against the response.
    SquaredError,
}

/// A pointwise loss together with its parameter dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossModel {
    kind: LossKind,
    param_dim: usize,
}

impl LossModel {
    pub fn check(tau: f64, param_dim: usize) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::invalid(format!("tau = {tau} must lie strictly inside (0,1)")));
        }
        if param_dim == 0 {
            return Err(Error::invalid("check loss needs param_dim >= 1"));
        }
        Ok(LossModel { kind: LossKind::Check { tau }, param_dim })
    }

    /// `param_dim` equals the covariate count `d`: an intercept plus `d - 1`
    /// slopes for the covariates other than `j`.
    pub fn misclassification(j: usize, param_dim: usize) -> Result<Self> {
        if param_dim == 0 {
            return Err(Error::invalid("misclassification loss needs param_dim >= 1"));
        }
        if j >= param_dim {
            return Err(Error::invalid(format!(
                "distinguished covariate index {j} out of range for {param_dim} covariates"
            )));
        }
        Ok(LossModel { kind: LossKind::Misclassification { j }, param_dim })
    }

    pub fn squared_error() -> Self {
        LossModel { kind: LossKind::SquaredError, param_dim: 1 }
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    /// Pointwise loss at a single observation, with full argument checking.
    pub fn point_loss(&self, theta: &ParamVector, obs: &Observation) -> Result<f64> {
        match self.kind {
            LossKind::Check { tau } => check_loss(theta, obs, tau),
            LossKind::Misclassification { j } => misclassification_loss(theta, obs, j),
            LossKind::SquaredError => squared_error_loss(theta, obs),
        }
    }

    /// Check that `theta` and a dataset are usable with this loss.
    pub(crate) fn validate(&self, theta_dim: usize, data: &Dataset) -> Result<()> {
        if theta_dim != self.param_dim {
            return Err(Error::invalid(format!(
                "parameter dimension {theta_dim} does not match loss param_dim {}",
                self.param_dim
            )));
        }
        match self.kind {
            LossKind::Check { .. } => {
                if data.is_label_valued() {
                    return Err(Error::invalid("check loss needs real-valued responses"));
                }
                if data.covariate_dim() != self.param_dim {
                    return Err(Error::invalid(format!(
                        "check loss expects covariate dimension {} (got {})",
                        self.param_dim,
                        data.covariate_dim()
                    )));
                }
            }
            LossKind::Misclassification { j } => {
                if !data.is_label_valued() {
                    return Err(Error::invalid("misclassification loss needs ±1 label responses"));
                }
                if data.covariate_dim() != self.param_dim {
                    return Err(Error::invalid(format!(
                        "misclassification loss expects covariate dimension {} (got {})",
                        self.param_dim,
                        data.covariate_dim()
                    )));
                }
                debug_assert!(j < self.param_dim);
            }
            LossKind::SquaredError => {
                if data.is_label_valued() {
                    return Err(Error::invalid("squared-error loss needs real-valued responses"));
                }
            }
        }
        Ok(())
    }

    /// Mean pointwise loss over the dataset. No argument checks, no NaN
    /// screening; the Gibbs target does both once up front.
    #[inline]
    pub(crate) fn risk_unchecked(&self, theta: &[f64], data: &Dataset) -> f64 {
        let n = data.n();
        match self.kind {
            LossKind::Check { tau } => {
                let ys = data.real_responses().expect("validated");
                let d = data.covariate_dim();
                let rows = data.covariates_flat().chunks_exact(d);
                math::pairwise_sum(rows.zip(ys).map(|(x, &y)| {
                    let r = y - dot(x, theta);
                    if r < 0.0 {
                        r * (tau - 1.0)
                    } else {
                        r * tau
                    }
                })) / n as f64
            }
            LossKind::SquaredError => {
                let ys = data.real_responses().expect("validated");
                let t = theta[0];
                math::pairwise_sum(ys.iter().map(|&y| (y - t) * (y - t))) / n as f64
            }
            LossKind::Misclassification { j } => {
                let labels = data.labels().expect("validated");
                let d = data.covariate_dim();
                let rows = data.covariates_flat().chunks_exact(d);
                math::pairwise_sum(rows.zip(labels).map(|(x, &label)| {
                    let m = classifier_margin(x, theta, j);
                    let sign = if m >= 0.0 { 1i8 } else { -1i8 };
                    if label == sign {
                        0.0
                    } else {
                        2.0
                    }
                })) / n as f64
            }
        }
    }

    /// Locate the first observation whose pointwise loss is NaN (cold path,
    /// called only after `risk_unchecked` came back NaN).
    pub(crate) fn find_nan_index(&self, theta: &[f64], data: &Dataset) -> usize {
        for i in 0..data.n() {
            let l = match self.kind {
                LossKind::Check { tau } => {
                    let y = match data.response(i) {
                        Response::Real(y) => y,
                        Response::Label(_) => unreachable!("validated"),
                    };
                    let r = y - dot(data.covariates(i), theta);
                    if r < 0.0 {
                        r * (tau - 1.0)
                    } else {
                        r * tau
                    }
                }
                LossKind::SquaredError => {
                    let y = match data.response(i) {
                        Response::Real(y) => y,
                        Response::Label(_) => unreachable!("validated"),
                    };
                    (y - theta[0]) * (y - theta[0])
                }
                LossKind::Misclassification { j } => {
                    let m = classifier_margin(data.covariates(i), theta, j);
                    if m.is_nan() {
                        f64::NAN
                    } else {
                        0.0
                    }
                }
            };
            if l.is_nan() {
                return i;
            }
        }
        0
    }
}

#[inline]
fn dot(x: &[f64], theta: &[f64]) -> f64 {
    x.iter().zip(theta).map(|(a, b)| a * b).sum()
}

/// Margin `X_j - X(j)'θ₁ - θ₀` of the linear classifier, where `θ = (θ₀, θ₁)`
/// and `X(j)` is the covariate vector with entry `j` removed.
#[inline]
fn classifier_margin(x: &[f64], theta: &[f64], j: usize) -> f64 {
    let mut m = x[j] - theta[0];
    for (k, &xk) in x.iter().enumerate() {
        if k == j {
            continue;
        }
        let slot = if k < j { k } else { k - 1 };
        m -= xk * theta[1 + slot];
    }
    m
}

/// Check loss `|(y - x'θ)(τ - 1{y - x'θ < 0})|` for quantile level `τ`.
pub fn check_loss(theta: &ParamVector, obs: &Observation, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!("tau = {tau} must lie strictly inside (0,1)")));
    }
    let y = match obs.response {
        Response::Real(y) => y,
        Response::Label(_) => return Err(Error::invalid("check loss needs a real response")),
    };
    if obs.covariates.len() != theta.dim() {
        return Err(Error::invalid(format!(
            "covariate dimension {} does not match parameter dimension {}",
            obs.covariates.len(),
            theta.dim()
        )));
    }
    let r = y - dot(&obs.covariates, theta.as_slice());
    Ok(if r < 0.0 { r * (tau - 1.0) } else { r * tau })
}

/// Misclassification loss `1 - Y·sign{X_j - X(j)'θ₁ - θ₀}`; 0 when the label
/// falls on the predicted side, 2 otherwise. `sign(0)` is taken as +1.
pub fn misclassification_loss(theta: &ParamVector, obs: &Observation, j: usize) -> Result<f64> {
    let label = match obs.response {
        Response::Label(l) => l,
        Response::Real(_) => return Err(Error::invalid("misclassification loss needs a ±1 label response")),
    };
    let d = obs.covariates.len();
    if theta.dim() != d {
        return Err(Error::invalid(format!(
            "parameter dimension {} does not match covariate count {d}",
            theta.dim()
        )));
    }
    if j >= d {
        return Err(Error::invalid(format!("covariate index {j} out of range for {d} covariates")));
    }
    let m = classifier_margin(&obs.covariates, theta.as_slice(), j);
    let sign = if m >= 0.0 { 1i8 } else { -1i8 };
    Ok(if label == sign { 0.0 } else { 2.0 })
}

/// Squared error `(x - θ)²` of a scalar parameter against the response.
pub fn squared_error_loss(theta: &ParamVector, obs: &Observation) -> Result<f64> {
    if theta.dim() != 1 {
        return Err(Error::invalid(format!("squared-error loss needs a scalar parameter, got dim {}", theta.dim())));
    }
    let y = match obs.response {
        Response::Real(y) => y,
        Response::Label(_) => return Err(Error::invalid("squared-error loss needs a real response")),
    };
    let r = y - theta[0];
    Ok(r * r)
}

/// Empirical risk `Rₙ(θ)`: the mean pointwise loss over the dataset.
pub fn empirical_risk(theta: &ParamVector, data: &Dataset, loss: &LossModel) -> Result<f64> {
    if data.n() == 0 {
        return Err(Error::invalid("empirical risk over an empty dataset"));
    }
    loss.validate(theta.dim(), data)?;
    let risk = loss.risk_unchecked(theta.as_slice(), data);
    if risk.is_nan() {
        return Err(Error::NonFinite { what: "pointwise loss", index: loss.find_nan_index(theta.as_slice(), data) });
    }
    Ok(risk)
}
