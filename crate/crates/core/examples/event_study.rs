//! Per-period DID against a reference period, and a placebo test over a
//! pre-event window.

use fdid::analysis::{event_study, placebo, EstimateOptions, Method};
use fdid::dgp::{generate_long, DgpConfig, MultiPeriodConfig};
use fdid::inference::BootstrapSpec;

fn main() -> fdid::Result<()> {
    let mut base = DgpConfig::single(0.5, 2000);
    base.beta_z = 1.0;
    base.gamma = 2.0;
    base.noise_sd = 1.0;
    base.phi = 0.2;
    base.seed = 4;
    let mp = MultiPeriodConfig::new(base, vec![-3, -2, -1, 0, 1, 2, 3]);
    let long = generate_long(&mp)?;

    let mut opts = EstimateOptions::new(Method::Did);
    opts.bootstrap = Some(BootstrapSpec::new(499, 1));
    let posts: Vec<String> = ["-3", "-2", "-1", "1", "2", "3"].map(String::from).to_vec();
    let es = event_study(&long, "0", &posts, &opts)?;
    println!("{:>6} {:>10} {:>10} {:>22}", "period", "estimate", "oracle", "95% CI");
    for p in &es.periods {
        let r: i64 = p.period.parse().expect("integer period labels");
        let ci = p.ci.map(|[a, b]| format!("[{a:.3}, {b:.3}]")).unwrap_or_default();
        println!("{:>6} {:>10.4} {:>10.4} {:>22}", p.period, p.point, mp.oracle_did(r), ci);
    }

    let window = vec!["-2".to_string(), "-1".to_string()];
    let event = vec!["0".to_string(), "1".to_string(), "2".to_string(), "3".to_string()];
    let pl = placebo(&long, "-3", &window, &event, &opts)?;
    println!("placebo {:.4}  CI [{:.4}, {:.4}]  {:?}", pl.point, pl.ci[0], pl.ci[1], pl.flag);
    Ok(())
}
