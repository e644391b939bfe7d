//! The identification roadmap checked against the closed-form oracle over
//! the shipped battery of regimes.

use fdid::roadmap::{default_battery, verify_roadmap};

fn main() -> fdid::Result<()> {
    let battery = default_battery();
    let report = verify_roadmap(&battery)?;
    print!("{}", report.to_table());
    println!("{} regimes, {} rows, {} failed", battery.len(), report.rows.len(), report.n_failed());
    for r in &report.regimes {
        let a = &r.assumptions;
        println!(
            "{:<18} NA {:<5} PT {:<5} FPT {:<5} ER-Z {:<5} ER-G {:<5}",
            r.regime, a.no_anticipation, a.parallel_trends, a.factorial_parallel_trends, a.exclusion_z, a.exclusion_g
        );
    }
    Ok(())
}
