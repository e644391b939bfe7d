//! Inverse probability weighting with a fitted logistic score and with
//! saturated scores on a discrete stratum.

use fdid::dgp::{closed_form_estimands, generate, CovariateSpec, DgpConfig, StratumSpec};
use fdid::estimators::{did_stratified, EmptyStratumPolicy};
use fdid::ipw::{fit_logistic_cs, ipw_estimates, PropensityModel, Weighting};
use fdid::Strata;

fn main() -> fdid::Result<()> {
    let mut config = DgpConfig::single(0.5, 4000);
    config.strata = vec![
        StratumSpec { prob: 0.6, propensity: 0.3, level: 0.0, trend: 0.5 },
        StratumSpec { prob: 0.4, propensity: 0.7, level: 1.0, trend: 1.5 },
    ];
    config.beta_z = 1.0;
    config.gamma = 2.0;
    config.noise_sd = 1.0;
    config.covariate = Some(CovariateSpec { mean: 0.0, shift: 1.0, sd: 1.0, theta: 0.5, zeta: 0.5 });
    config.seed = 5;
    let (_, data) = generate(&config)?;
    let oracle = closed_form_estimands(&config);

    let cs = data.cross_section();
    let stratum = ["stratum".to_string()];
    let strata = Strata::from_columns(&cs, &stratum)?;
    let saturated = PropensityModel::saturated(&cs, &strata)?;
    let sat = ipw_estimates(&cs, &saturated, Some(&strata), Weighting::HorvitzThompson)?;
    let strat = did_stratified(&data, &strata, EmptyStratumPolicy::Error)?;
    println!("saturated IPW   {:.6}", sat.tau_ipw);
    println!("stratified DID  {:.6}", strat.point);
    println!("tau_did_strata  {:.6}", oracle.tau_did_strata);

    let x = cs.select_covariates(&["x".to_string()])?;
    let model = fit_logistic_cs(&x)?;
    let ht = ipw_estimates(&x, &model, None, Weighting::HorvitzThompson)?;
    let hajek = ipw_estimates(&x, &model, None, Weighting::Hajek)?;
    if let Some(fit) = &model.fit {
        println!("logistic fit: {} iterations, coefficients {:?}", fit.iterations, fit.coefficients);
    }
    println!("IPW (Horvitz-Thompson) {:.4}  given G=1 {:.4}  given G=0 {:.4}", ht.tau_ipw, ht.tau_ipw_given_g1, ht.tau_ipw_given_g0);
    println!("IPW (Hajek)            {:.4}", hajek.tau_ipw);
    println!("weight means           {:.4} {:.4}", ht.weight_means.0, ht.weight_means.1);
    Ok(())
}
