//! Independent-oracle checks for the M-estimator on the chi-square
//! median-regression design.

use gibbs_gps_core::{
    bias_corrected_estimate, bootstrap_resample, empirical_risk, generate, minimize_risk,
    OptimizerConfig, ParamVector, ScenarioKind, ScenarioSpec,
};

#[test]
fn yang_he_minimizer_matches_grid_oracle() {
    // n = 400 draws from Y = 2 + X + e, e ~ N(0,4), X ~ ChiSq(2) - 2.
    let spec = ScenarioSpec::new(ScenarioKind::quantreg(), 400, 2024);
    let (data, _) = generate(&spec).unwrap();
    let loss = spec.loss_model();
    let est = minimize_risk(&data, &loss, &OptimizerConfig::default_for(2)).unwrap();

    // Median-regression asymptotics: SE(theta_0) = sqrt(tau(1-tau)/(f(0)^2 n))
    // with f the N(0,4) density, and SE(theta_1) = SE(theta_0)/2 since
    // E[X^2] = 4.
    let f0 = 1.0 / (2.0 * (2.0 * std::f64::consts::PI).sqrt());
    let se0 = (0.25 / (f0 * f0 * 400.0)).sqrt();
    assert!((est.theta_hat[0] - 2.0).abs() <= 3.0 * se0, "theta_0 = {}", est.theta_hat[0]);
    assert!((est.theta_hat[1] - 1.0).abs() <= 3.0 * se0 / 2.0, "theta_1 = {}", est.theta_hat[1]);

    // Independent oracle: grid search over a box around the truth, refined
    // by zooming onto the running argmin (the risk surface is piecewise
    // linear, so a single-level grid cannot reach 1e-6).
    let mut center = [2.0, 1.0];
    let mut half = [0.5, 0.25];
    let mut grid_best = f64::INFINITY;
    for _ in 0..6 {
        let mut best_point = center;
        for i in 0..=40 {
            let t0 = center[0] - half[0] + i as f64 * (half[0] / 20.0);
            for j in 0..=40 {
                let t1 = center[1] - half[1] + j as f64 * (half[1] / 20.0);
                let r = empirical_risk(&ParamVector::from_slice(&[t0, t1]), &data, &loss).unwrap();
                if r < grid_best {
                    grid_best = r;
                    best_point = [t0, t1];
                }
            }
        }
        center = best_point;
        half = [half[0] / 10.0, half[1] / 10.0];
    }
    assert!(
        (est.risk_value - grid_best).abs() <= 1e-6,
        "optimizer risk {} vs grid oracle {}",
        est.risk_value,
        grid_best
    );
}

#[test]
fn bootstrap_bias_correction_vanishes_with_n() {
    // Monte Carlo check that |corrected - uncorrected| shrinks from n = 100
    // to n = 1600, averaged over 50 replications.
    let cheap = OptimizerConfig { restarts: 1, max_evals: 4000, x_tol: 1e-8, f_tol: 1e-10, seed: 0 };
    let mut gaps = Vec::new();
    for n in [100usize, 1600] {
        let mut total = 0.0;
        for rep in 0..50 {
            let spec = ScenarioSpec::new(ScenarioKind::quantreg(), n, 7000 + rep);
            let (data, _) = generate(&spec).unwrap();
            let loss = spec.loss_model();
            let theta_hat = minimize_risk(&data, &loss, &cheap).unwrap().theta_hat;
            let boots = bootstrap_resample(&data, 8, 300 + rep).unwrap();
            let boot_estimates: Vec<ParamVector> = boots
                .iter()
                .map(|b| minimize_risk(b, &loss, &cheap).unwrap().theta_hat)
                .collect();
            let corrected = bias_corrected_estimate(&data, &loss, &boot_estimates).unwrap();
            let gap: f64 = (0..2)
                .map(|k| (corrected[k] - theta_hat[k]) * (corrected[k] - theta_hat[k]))
                .sum::<f64>()
                .sqrt();
            total += gap;
        }
        gaps.push(total / 50.0);
    }
    assert!(
        gaps[1] < gaps[0],
        "mean |corrected - theta_hat| should shrink: n=100 gives {}, n=1600 gives {}",
        gaps[0],
        gaps[1]
    );
}
