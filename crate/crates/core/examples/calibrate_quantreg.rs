//! Calibrate a median-regression Gibbs posterior on simulated data and
//! report the resulting credible intervals.
//!
//! ```sh
//! cargo run --release -p gibbs-gps-core --example calibrate_quantreg
//! ```

use gibbs_gps_core::{
    equal_tailed_interval, generate, gps_calibrate, mh_sample, GibbsTarget, GpsConfig,
    SamplerConfig, ScenarioKind, ScenarioSpec,
};

fn main() {
    let spec = ScenarioSpec::new(ScenarioKind::quantreg(), 100, 7);
    let (data, theta_star) = generate(&spec).unwrap();
    let loss = spec.loss_model();
    let prior = spec.default_prior();

    let cfg = GpsConfig { seed: 7, ..GpsConfig::default() };
    let result = gps_calibrate(&data, &loss, &prior, &cfg).unwrap();
    println!(
        "calibrated omega = {:.4} ({} after {} iterations)",
        result.omega_n,
        if result.converged { "converged" } else { "iteration cap" },
        result.iterations
    );
    for row in result.trace.iter().take(5) {
        println!("  t={} omega={:.4} c_hat={:.3}", row.t, row.omega, row.c_hat);
    }

    // Posterior at the calibrated scale, on the original data.
    let target = GibbsTarget::new(&data, &loss, &prior, result.omega_n).unwrap();
    let sampler = SamplerConfig::new(10_000, result.theta_hat.clone())
        .with_step_scale(vec![0.3, 0.15])
        .with_seed(8);
    let sample = mh_sample(&target, &sampler).unwrap();
    for k in 0..2 {
        let iv = equal_tailed_interval(&sample.column(k), cfg.alpha).unwrap();
        println!(
            "theta_{k}: 95% interval [{:.3}, {:.3}] (truth {})",
            iv.lower, iv.upper, theta_star[k]
        );
    }
}
