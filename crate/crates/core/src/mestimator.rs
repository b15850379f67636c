//! M-estimation: minimize the empirical risk.
//!
//! The optimizer is Nelder–Mead with restarts. Derivative-free is mandatory
//! here: the check loss has kinks and the misclassification risk is piecewise
//! constant. Regression losses start from an ordinary least-squares fit,
//! classification from the origin, and the remaining restarts perturb that
//! initializer. On piecewise-constant risk the minimizer is not unique; the
//! first minimizer found wins.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, ParamVector};
use crate::error::{Error, Result};
use crate::loss::{empirical_risk, LossKind, LossModel};
use crate::math;
use crate::rng::substream;

#[derive(Clone, Copy, Debug)]
pub struct OptimizerConfig {
    pub restarts: usize,
    /// Function-evaluation budget per restart.
    pub max_evals: usize,
    pub x_tol: f64,
    pub f_tol: f64,
    pub seed: u64,
}

impl OptimizerConfig {
    /// Defaults: 5 restarts, 2000·param_dim evaluations each, x_tol 1e-8,
    /// f_tol 1e-10.
    pub fn default_for(param_dim: usize) -> Self {
        OptimizerConfig { restarts: 5, max_evals: 2000 * param_dim.max(1), x_tol: 1e-8, f_tol: 1e-10, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_evals == 0 {
            return Err(Error::invalid("restarts and max_evals must be positive"));
        }
        if !(self.x_tol > 0.0) || !(self.f_tol > 0.0) {
            return Err(Error::invalid("x_tol and f_tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MEstimate {
    pub theta_hat: ParamVector,
    pub risk_value: f64,
    pub converged: bool,
    pub bias_corrected: bool,
}

/// Minimize `Rₙ(θ)` over restarts of Nelder–Mead.
///
/// The returned risk never exceeds the risk at any start point (each start is
/// a vertex of its own initial simplex). When no restart contracts within its
/// budget the best point found is still returned with `converged = false`.
pub fn minimize_risk(data: &Dataset, loss: &LossModel, cfg: &OptimizerConfig) -> Result<MEstimate> {
    cfg.validate()?;
    let dim = loss.param_dim();
    loss.validate(dim, data)?;
    if data.n() < dim {
        return Err(Error::invalid(format!(
            "need at least param_dim = {dim} observations, got {}",
            data.n()
        )));
    }

    let init = initializer(data, loss);
    let objective = |theta: &[f64]| -> f64 {
        let r = loss.risk_unchecked(theta, data);
        if r.is_nan() {
            f64::INFINITY
        } else {
            r
        }
    };

    let mut rng = substream(cfg.seed, &[0x6d65]);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut any_converged = false;
    for restart in 0..cfg.restarts {
        let start: Vec<f64> = if restart == 0 {
            init.clone()
        } else {
            init.iter()
                .map(|&v| v + 0.5 * (1.0 + v.abs()) * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        let run = nelder_mead(&objective, &start, cfg.max_evals, cfg.x_tol, cfg.f_tol);
        any_converged = any_converged || run.converged;
        // Strict comparison keeps the first minimizer on ties.
        if best.as_ref().is_none_or(|(_, bf)| run.f_min < *bf) {
            best = Some((run.x_min, run.f_min));
        }
    }

    let (x, _) = best.expect("at least one restart");
    let converged = any_converged;
    let theta_hat = ParamVector::new(x)
        .map_err(|_| Error::invalid("optimizer produced a non-finite parameter"))?;
    let risk_value = empirical_risk(&theta_hat, data, loss)?;
    Ok(MEstimate { theta_hat, risk_value, converged, bias_corrected: false })
}

/// Standard bootstrap bias correction `2·θ̂ - mean(boot_estimates)`.
pub fn bias_correct(theta_hat: &ParamVector, boot_estimates: &[ParamVector]) -> Result<ParamVector> {
    if boot_estimates.is_empty() {
        return Err(Error::invalid("bias correction needs at least one bootstrap estimate"));
    }
    let dim = theta_hat.dim();
    for (b, est) in boot_estimates.iter().enumerate() {
        if est.dim() != dim {
            return Err(Error::invalid(format!("bootstrap estimate {b} has dimension {}, expected {dim}", est.dim())));
        }
    }
    let corrected: Vec<f64> = (0..dim)
        .map(|k| {
            let boot_mean = math::mean(&boot_estimates.iter().map(|e| e[k]).collect::<Vec<_>>());
            2.0 * theta_hat[k] - boot_mean
        })
        .collect();
    ParamVector::new(corrected)
}

/// Bias-corrected M-estimate: fits `θ̂ₙ` on `data` with default optimizer
/// settings and applies [`bias_correct`] against the supplied bootstrap
/// re-estimates.
pub fn bias_corrected_estimate(
    data: &Dataset,
    loss: &LossModel,
    boot_estimates: &[ParamVector],
) -> Result<ParamVector> {
    let est = minimize_risk(data, loss, &OptimizerConfig::default_for(loss.param_dim()))?;
    bias_correct(&est.theta_hat, boot_estimates)
}

/// Least-squares initializer for regression losses, origin for
/// classification, response mean for the scalar squared-error model.
fn initializer(data: &Dataset, loss: &LossModel) -> Vec<f64> {
    match loss.kind() {
        LossKind::SquaredError => {
            vec![math::mean(data.real_responses().expect("validated"))]
        }
        LossKind::Misclassification { .. } => vec![0.0; loss.param_dim()],
        LossKind::Check { .. } => {
            let d = data.covariate_dim();
            let ys = data.real_responses().expect("validated");
            ols(data, ys).unwrap_or_else(|| vec![0.0; d])
        }
    }
}

/// Ordinary least squares through the normal equations, solved by Cholesky
/// with a ridge fallback for rank-deficient designs.
fn ols(data: &Dataset, ys: &[f64]) -> Option<Vec<f64>> {
    let d = data.covariate_dim();
    let n = data.n();
    let mut xtx = vec![0.0f64; d * d];
    let mut xty = vec![0.0f64; d];
    for (i, &y) in ys.iter().enumerate().take(n) {
        let x = data.covariates(i);
        for a in 0..d {
            xty[a] += x[a] * y;
            for b in a..d {
                xtx[a * d + b] += x[a] * x[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            xtx[a * d + b] = xtx[b * d + a];
        }
    }
    cholesky_solve(&xtx, &xty, d).or_else(|| {
        let trace: f64 = (0..d).map(|a| xtx[a * d + a]).sum();
        let ridge = 1e-8 * (trace / d as f64).max(1.0);
        let mut reg = xtx.clone();
        for a in 0..d {
            reg[a * d + a] += ridge;
        }
        cholesky_solve(&reg, &xty, d)
    })
}

fn cholesky_solve(a: &[f64], b: &[f64], d: usize) -> Option<Vec<f64>> {
    // Factor A = L L'.
    let mut l = vec![0.0f64; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    // Forward then backward substitution.
    let mut y = vec![0.0f64; d];
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * d + k] * y[k];
        }
        y[i] = s / l[i * d + i];
    }
    let mut x = vec![0.0f64; d];
    for i in (0..d).rev() {
        let mut s = y[i];
        for k in i + 1..d {
            s -= l[k * d + i] * x[k];
        }
        x[i] = s / l[i * d + i];
    }
    Some(x)
}

struct NmRun {
    x_min: Vec<f64>,
    f_min: f64,
    converged: bool,
}

/// Plain Nelder–Mead (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2). Converges when the simplex collapses below `x_tol` in every
/// coordinate and the value spread falls below `f_tol`.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], max_evals: usize, x_tol: f64, f_tol: f64) -> NmRun {
    let dim = x0.len();
    let mut evals = 0usize;
    let eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        f(x)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let fx0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), fx0));
    for k in 0..dim {
        let mut v = x0.to_vec();
        v[k] += 0.25 * (1.0 + v[k].abs());
        let fv = eval(&v, &mut evals);
        simplex.push((v, fv));
    }

    let mut converged = false;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));

        let x_spread = (1..=dim)
            .map(|i| {
                simplex[i]
                    .0
                    .iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        let f_spread = simplex[dim].1 - simplex[0].1;
        if x_spread < x_tol && f_spread.abs() < f_tol {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0f64; dim];
        for vertex in simplex.iter().take(dim) {
            for (c, v) in centroid.iter_mut().zip(&vertex.0) {
                *c += v;
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }

        let worst = simplex[dim].clone();
        let reflected: Vec<f64> = (0..dim).map(|k| 2.0 * centroid[k] - worst.0[k]).collect();
        let f_ref = eval(&reflected, &mut evals);

        if f_ref < simplex[0].1 {
            let expanded: Vec<f64> = (0..dim).map(|k| centroid[k] + 2.0 * (reflected[k] - centroid[k])).collect();
            let f_exp = eval(&expanded, &mut evals);
            simplex[dim] = if f_exp < f_ref { (expanded, f_exp) } else { (reflected, f_ref) };
        } else if f_ref < simplex[dim - 1].1 {
            simplex[dim] = (reflected, f_ref);
        } else {
            let contracted: Vec<f64> = if f_ref < worst.1 {
                (0..dim).map(|k| centroid[k] + 0.5 * (reflected[k] - centroid[k])).collect()
            } else {
                (0..dim).map(|k| centroid[k] + 0.5 * (worst.0[k] - centroid[k])).collect()
            };
            let f_con = eval(&contracted, &mut evals);
            if f_con < worst.1.min(f_ref) {
                simplex[dim] = (contracted, f_con);
            } else {
                // Shrink everything toward the best vertex.
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    for (v, b) in vertex.0.iter_mut().zip(&best) {
                        *v = b + 0.5 * (*v - b);
                    }
                    vertex.1 = eval(&vertex.0, &mut evals);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x_min, f_min) = simplex.swap_remove(0);
    NmRun { x_min, f_min, converged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossModel;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn squared_error_minimizer_is_sample_mean() {
        let ys = vec![1.0, 2.0, 6.0, -3.0, 4.0];
        let mean = math::mean(&ys);
        let data = Dataset::from_responses(ys).unwrap();
        let loss = LossModel::squared_error();
        let est = minimize_risk(&data, &loss, &OptimizerConfig::default_for(1)).unwrap();
        assert!(est.converged);
        assert!((est.theta_hat[0] - mean).abs() < 1e-8, "{} vs {mean}", est.theta_hat[0]);
    }

    #[test]
    fn median_minimizes_intercept_only_check_loss() {
        let data = Dataset::from_regression(vec![vec![1.0]; 5], vec![1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        let loss = LossModel::check(0.5, 1).unwrap();
        let est = minimize_risk(&data, &loss, &OptimizerConfig::default_for(1)).unwrap();
        assert!((est.theta_hat[0] - 3.0).abs() < 1e-6, "median estimate {}", est.theta_hat[0]);
    }

    #[test]
    fn risk_value_matches_empirical_risk_and_initializer_bound() {
        let mut rng = substream(21, &[0]);
        let xs: Vec<Vec<f64>> = (0..80).map(|_| vec![1.0, rng.sample::<f64, _>(StandardNormal)]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 0.5 * x[1] + rng.sample::<f64, _>(StandardNormal)).collect();
        let data = Dataset::from_regression(xs, ys.clone()).unwrap();
        let loss = LossModel::check(0.5, 2).unwrap();
        let est = minimize_risk(&data, &loss, &OptimizerConfig::default_for(2)).unwrap();
        let recomputed = empirical_risk(&est.theta_hat, &data, &loss).unwrap();
        assert!((est.risk_value - recomputed).abs() <= 1e-12);
        // Never worse than the least-squares initializer.
        let init = ParamVector::new(initializer(&data, &loss)).unwrap();
        let init_risk = empirical_risk(&init, &data, &loss).unwrap();
        assert!(est.risk_value <= init_risk + 1e-12);
    }

    #[test]
    fn convex_losses_agree_across_restart_seeds() {
        let mut rng = substream(22, &[0]);
        let xs: Vec<Vec<f64>> = (0..60).map(|_| vec![1.0, rng.sample::<f64, _>(StandardNormal)]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 + x[1] + rng.sample::<f64, _>(StandardNormal)).collect();
        let data = Dataset::from_regression(xs, ys).unwrap();
        let loss = LossModel::check(0.5, 2).unwrap();
        let cfg = OptimizerConfig::default_for(2);
        let base = minimize_risk(&data, &loss, &cfg).unwrap();
        for seed in 1..=4 {
            let est = minimize_risk(&data, &loss, &cfg.with_seed(seed)).unwrap();
            assert!((est.risk_value - base.risk_value).abs() <= cfg.f_tol.max(1e-10) * 10.0);
        }
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = substream(23, &[0]);
        let xs: Vec<Vec<f64>> = (0..50).map(|_| vec![1.0, rng.sample::<f64, _>(StandardNormal)]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 + x[1] + rng.sample::<f64, _>(StandardNormal)).collect();
        let data = Dataset::from_regression(xs.clone(), ys.clone()).unwrap();
        // Reverse the row order.
        let data_rev = Dataset::from_regression(
            xs.iter().rev().cloned().collect(),
            ys.iter().rev().cloned().collect(),
        )
        .unwrap();
        let loss = LossModel::check(0.5, 2).unwrap();
        // Run with a slightly relaxed x_tol; the invariant is stated in units
        // of the configured tolerance.
        let mut cfg = OptimizerConfig::default_for(2);
        cfg.x_tol = 1e-6;
        let a = minimize_risk(&data, &loss, &cfg).unwrap();
        let b = minimize_risk(&data_rev, &loss, &cfg).unwrap();
        for k in 0..2 {
            assert!((a.theta_hat[k] - b.theta_hat[k]).abs() < cfg.x_tol, "coordinate {k} moved");
        }
    }

    #[test]
    fn bias_correction_formula() {
        let theta = ParamVector::from_slice(&[1.0, 1.0]);
        let boots =
            vec![ParamVector::from_slice(&[1.2, 0.8]), ParamVector::from_slice(&[1.0, 1.0])];
        // mean boot = (1.1, 0.9) -> corrected (0.9, 1.1)
        let corrected = bias_correct(&theta, &boots).unwrap();
        assert!((corrected[0] - 0.9).abs() < 1e-15);
        assert!((corrected[1] - 1.1).abs() < 1e-15);
        assert!(bias_correct(&theta, &[]).is_err());
        assert!(bias_correct(&theta, &[ParamVector::from_slice(&[1.0])]).is_err());
    }

    #[test]
    fn bias_correction_fixed_point_at_theta_hat() {
        let ys = vec![0.5, 1.0, 1.5, 2.0, 2.5];
        let data = Dataset::from_responses(ys).unwrap();
        let loss = LossModel::squared_error();
        let est = minimize_risk(&data, &loss, &OptimizerConfig::default_for(1)).unwrap();
        let boots = vec![est.theta_hat.clone(); 4];
        let corrected = bias_corrected_estimate(&data, &loss, &boots).unwrap();
        assert!((corrected[0] - est.theta_hat[0]).abs() < 1e-8);
    }

    #[test]
    fn too_few_rows_rejected() {
        let data = Dataset::from_regression(vec![vec![1.0, 0.0]], vec![1.0]).unwrap();
        let loss = LossModel::check(0.5, 2).unwrap();
        assert!(minimize_risk(&data, &loss, &OptimizerConfig::default_for(2)).is_err());
    }

    #[test]
    fn classification_ties_return_first_minimizer() {
        // Separable data: any separating hyperplane attains risk 0; the call
        // must still land on one of them with zero risk.
        let covs = vec![vec![3.0, 1.0], vec![4.0, 1.5], vec![1.0, 3.0], vec![0.5, 4.0]];
        let labels = vec![1, 1, -1, -1];
        let data = Dataset::from_classification(covs, labels).unwrap();
        let loss = LossModel::misclassification(0, 2).unwrap();
        let est = minimize_risk(&data, &loss, &OptimizerConfig::default_for(2)).unwrap();
        assert_eq!(est.risk_value, 0.0);
    }
}
