//! Stratified DID on the shipped fixture where the strata predict G.
//!
//! The unadjusted DID and the stratified DID target different estimands, so
//! they disagree here.

use fdid::estimators::{did_stratified_given_g, non_aggregation_demo, EmptyStratumPolicy};
use fdid::panel::{load_wide, WideColumns};
use fdid::Strata;

fn main() -> fdid::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/nonaggregation.csv");
    let cols = WideColumns {
        covariates: vec!["stratum".into()],
        ..WideColumns::default()
    };
    let data = load_wide(path, &cols)?;
    let strata = Strata::from_columns(&data.cross_section(), &["stratum".to_string()])?;

    let demo = non_aggregation_demo(&data, &strata)?;
    println!("DID            {:.4}", demo.did);
    println!("stratified DID {:.4}", demo.did_x);
    println!("gap            {:.4}", demo.gap);

    for g in [true, false] {
        let r = did_stratified_given_g(&data, &strata, g, EmptyStratumPolicy::Error)?;
        println!("stratified DID given G={} {:.4}", g as u8, r.point);
        for s in r.strata.unwrap_or_default() {
            println!("  stratum {:<3} DID {:>8.4}  weight {:.3}  n1 {:>4}  n0 {:>4}", s.key, s.point, s.weight, s.n1, s.n0);
        }
    }
    Ok(())
}
