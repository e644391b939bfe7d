//! Propensity overlap diagnostics: score range, extreme scores and
//! per-group histograms.

use fdid::analysis::diagnose;
use fdid::dgp::{generate, CovariateSpec, DgpConfig};

fn main() -> fdid::Result<()> {
    let mut config = DgpConfig::single(0.5, 2000);
    config.noise_sd = 1.0;
    config.covariate = Some(CovariateSpec { mean: 0.0, shift: 2.5, sd: 1.0, theta: 0.0, zeta: 0.0 });
    config.seed = 12;
    let (_, data) = generate(&config)?;

    let report = diagnose(&data, &["x".to_string()])?;
    println!("scores in [{:.4}, {:.4}], {} extreme", report.min_score, report.max_score, report.n_extreme);
    println!("weight means {:.3} {:.3}", report.weight_means[0], report.weight_means[1]);
    let width = 1.0 / report.bins as f64;
    for (b, (c1, c0)) in report.histogram_g1.iter().zip(&report.histogram_g0).enumerate() {
        let lo = b as f64 * width;
        println!("{:.2}-{:.2} {:>5} {:<40} {:>5} {}", lo, lo + width, c1, "#".repeat(c1 / 10), c0, "#".repeat(c0 / 10));
    }
    Ok(())
}
