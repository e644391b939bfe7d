//! Bias, spread and bootstrap coverage of several estimators by simulation.

use fdid::dgp::{CovariateSpec, DgpConfig};
use fdid::inference::BootstrapSpec;
use fdid::montecarlo::{monte_carlo, Estimator, EstimatorSpec, MonteCarloSpec};

fn main() -> fdid::Result<()> {
    let mut config = DgpConfig::single(0.5, 1000);
    config.beta_z = 1.0;
    config.gamma = 2.0;
    config.eta = 1.0;
    config.noise_sd = 1.0;
    config.covariate = Some(CovariateSpec { mean: 1.0, shift: 0.5, sd: 1.0, theta: 0.5, zeta: 1.0 });

    let spec = MonteCarloSpec {
        n_sims: 200,
        seed: 2024,
        estimators: vec![
            Estimator::Did.into(),
            EstimatorSpec::with_target(Estimator::Did, "tau_cm"),
            Estimator::OlsInteracted.into(),
            Estimator::IpwLogistic.into(),
        ],
        bootstrap: Some(BootstrapSpec::new(199, 0)),
    };
    let report = monte_carlo(&config, &spec)?;
    println!("{:<16} {:<10} {:>9} {:>9} {:>8} {:>8} {:>9}", "estimator", "target", "value", "bias", "mc-se", "rmse", "coverage");
    for r in &report.rows {
        println!(
            "{:<16} {:<10} {:>9.4} {:>9.4} {:>8.4} {:>8.4} {:>9.3}",
            r.estimator,
            r.target,
            r.target_value,
            r.bias,
            r.mc_se,
            r.rmse,
            r.coverage.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
