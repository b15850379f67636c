//! Equal-tailed credible intervals and coverage events.
//!
//! Intervals are marginal per-coordinate equal-tailed intervals rather than
//! HPD regions: they only need order statistics of the MCMC output, and the
//! quantile convention below is pinned so results are bit-reproducible.

use crate::data::ParamVector;
use crate::error::{Error, Result};

/// Minimum number of draws accepted when forming a credible interval.
pub const MIN_INTERVAL_DRAWS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CredibleInterval {
    pub lower: f64,
    pub upper: f64,
    /// Coverage level `1 - α`.
    pub level: f64,
}

impl CredibleInterval {
    /// Boundary-inclusive membership test.
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

/// How a coverage event over a vector parameter is scored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CoverageMode {
    /// Fraction of coordinates whose interval contains its component.
    PerCoordinateAverage,
    /// 1 only when every coordinate is covered.
    AllCoordinates,
    /// Indicator for a single coordinate.
    Coordinate(usize),
}

/// Sample quantile with linear interpolation between order statistics at
/// 1-indexed position `(m - 1)·q + 1`.
pub fn quantile(draws: &[f64], q: f64) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::invalid("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("quantile level {q} outside [0,1]")));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, q))
}

pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    let pos = (m - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] + w * (sorted[hi] - sorted[lo])
    }
}

/// Equal-tailed `100(1-α)%` interval `(q_{α/2}, q_{1-α/2})` from posterior
/// draws of one coordinate.
pub fn equal_tailed_interval(draws: &[f64], alpha: f64) -> Result<CredibleInterval> {
    if draws.len() < MIN_INTERVAL_DRAWS {
        return Err(Error::invalid(format!(
            "need at least {MIN_INTERVAL_DRAWS} draws for a credible interval, got {}",
            draws.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::invalid(format!("alpha = {alpha} must lie in (0, 0.5)")));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let lower = quantile_sorted(&sorted, alpha / 2.0);
    let upper = quantile_sorted(&sorted, 1.0 - alpha / 2.0);
    Ok(CredibleInterval { lower, upper, level: 1.0 - alpha })
}

/// Score the coverage of `theta` by per-coordinate intervals, in [0, 1].
pub fn coverage_event(intervals: &[CredibleInterval], theta: &ParamVector, mode: CoverageMode) -> Result<f64> {
    if intervals.len() != theta.dim() {
        return Err(Error::invalid(format!(
            "{} intervals for a {}-dimensional parameter",
            intervals.len(),
            theta.dim()
        )));
    }
    match mode {
        CoverageMode::PerCoordinateAverage => {
            let covered = intervals.iter().enumerate().filter(|(k, iv)| iv.contains(theta[*k])).count();
            Ok(covered as f64 / intervals.len() as f64)
        }
        CoverageMode::AllCoordinates => {
            let all = intervals.iter().enumerate().all(|(k, iv)| iv.contains(theta[k]));
            Ok(if all { 1.0 } else { 0.0 })
        }
        CoverageMode::Coordinate(k) => {
            if k >= theta.dim() {
                return Err(Error::invalid(format!("coordinate {k} out of range for dimension {}", theta.dim())));
            }
            Ok(if intervals[k].contains(theta[k]) { 1.0 } else { 0.0 })
        }
    }
}
