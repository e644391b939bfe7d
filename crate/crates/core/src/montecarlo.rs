//! Monte Carlo bias and coverage of the estimators against oracle targets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{closed_form_estimands, generate, DgpConfig, EstimandSet, STRATUM_COLUMN};
use crate::error::{FdidError, Result};
use crate::estimators::{did_cs, did_stratified_cs, EmptyStratumPolicy, Strata};
use crate::inference::{bootstrap, substream, BootstrapSpec, MAX_FAILED_SHARE};
use crate::ipw::{fit_logistic_cs, tau_ipw_cs, PropensityModel, Weighting};
use crate::numeric::{mean, sample_sd};
use crate::panel::CrossSection;
use crate::regression::{ols_interacted_cs, ols_plain_cs, Centering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Did,
    /// Stratified on the generated stratum column.
    Stratified,
    /// Interacted regression, centered at the sample mean.
    OlsInteracted,
    /// Interacted regression on the original scale; reports raw β̂_G.
    OlsInteractedUncentered,
    OlsPlain,
    IpwLogistic,
    /// IPW with saturated scores on the stratum column.
    IpwSaturated,
}

impl Estimator {
    /// The estimand each estimator targets by default.
    pub fn default_target(&self) -> &'static str {
        match self {
            Estimator::Did => "tau_did",
            Estimator::Stratified | Estimator::IpwSaturated => "tau_did_strata",
            _ => "tau_did_x",
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Did => "did",
            Estimator::Stratified => "stratified",
            Estimator::OlsInteracted => "ols-interacted",
            Estimator::OlsInteractedUncentered => "ols-interacted-uncentered",
            Estimator::OlsPlain => "ols-plain",
            Estimator::IpwLogistic => "ipw-logistic",
            Estimator::IpwSaturated => "ipw-saturated",
        }
    }

    pub fn evaluate(&self, cs: &CrossSection) -> Result<f64> {
        let strata = || -> Result<Strata> {
            if cs.covariate_names.iter().any(|c| c == STRATUM_COLUMN) {
                Strata::from_columns(cs, &[STRATUM_COLUMN.to_string()])
            } else {
                Ok(Strata::single(cs.n()))
            }
        };
        match self {
            Estimator::Did => Ok(did_cs(cs)?.point),
            Estimator::Stratified => Ok(did_stratified_cs(cs, &strata()?, EmptyStratumPolicy::Error)?.point),
            Estimator::OlsInteracted => Ok(ols_interacted_cs(cs, Centering::SampleMean)?.1.beta_g),
            Estimator::OlsInteractedUncentered => Ok(ols_interacted_cs(cs, Centering::None)?.1.beta_g),
            Estimator::OlsPlain => Ok(ols_plain_cs(cs)?.1.beta_g),
            Estimator::IpwLogistic => {
                let m = fit_logistic_cs(cs)?;
                tau_ipw_cs(cs, &m, Weighting::HorvitzThompson)
            }
            Estimator::IpwSaturated => {
                let m = PropensityModel::saturated(cs, &strata()?)?;
                tau_ipw_cs(cs, &m, Weighting::HorvitzThompson)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub estimator: Estimator,
    /// Estimand name from [`EstimandSet::named`]; defaults per estimator.
    #[serde(default)]
    pub target: Option<String>,
}

impl From<Estimator> for EstimatorSpec {
    fn from(estimator: Estimator) -> Self {
        Self {
            estimator,
            target: None,
        }
    }
}

impl EstimatorSpec {
    pub fn with_target(estimator: Estimator, target: &str) -> Self {
        Self {
            estimator,
            target: Some(target.to_string()),
        }
    }

    pub fn target(&self) -> &str {
        self.target.as_deref().unwrap_or(self.estimator.default_target())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSpec {
    pub n_sims: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorSpec>,
    /// When set, a percentile interval is computed in every simulation.
    #[serde(default)]
    pub bootstrap: Option<BootstrapSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloRow {
    pub estimator: String,
    pub target: String,
    pub target_value: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    /// Standard error of the mean estimate across simulations.
    pub mc_se: f64,
    pub sd: f64,
    pub rmse: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
    /// Per-simulation estimates in simulation order (failed ones omitted).
    #[serde(skip)]
    pub estimates: Vec<f64>,
}

impl MonteCarloRow {
    /// |bias| < `k`·MC-SE.
    pub fn unbiased_within(&self, k: f64) -> bool {
        self.bias.abs() < k * self.mc_se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub config: DgpConfig,
    pub oracle: EstimandSet,
    pub n_sims: usize,
    pub seed: u64,
    pub rows: Vec<MonteCarloRow>,
}

impl MonteCarloReport {
    pub fn row(&self, estimator: Estimator) -> Option<&MonteCarloRow> {
        self.rows.iter().find(|r| r.estimator == estimator.name())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "estimator", "target", "target_value", "mean_estimate", "bias", "mc_se", "sd", "rmse",
            "coverage", "n_ok", "n_failed",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.estimator.clone(),
                r.target.clone(),
                r.target_value.to_string(),
                r.mean_estimate.to_string(),
                r.bias.to_string(),
                r.mc_se.to_string(),
                r.sd.to_string(),
                r.rmse.to_string(),
                r.coverage.map(|c| c.to_string()).unwrap_or_default(),
                r.n_ok.to_string(),
                r.n_failed.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| FdidError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Seed of simulation `sim`, drawn from the (seed, sim) substream.
pub fn simulation_seed(seed: u64, sim: usize) -> u64 {
    use rand::RngCore;
    substream(seed, sim as u64).next_u64()
}

type Draw = (Option<f64>, Option<bool>);

/// Run `spec.n_sims` simulations of `config` and summarize each estimator.
pub fn monte_carlo(config: &DgpConfig, spec: &MonteCarloSpec) -> Result<MonteCarloReport> {
    config.validate()?;
    if spec.n_sims < 2 {
        return Err(FdidError::InvalidArgument("monte carlo needs at least 2 simulations".into()));
    }
    if spec.estimators.is_empty() {
        return Err(FdidError::InvalidArgument("no estimators given".into()));
    }
    let oracle = closed_form_estimands(config);
    let targets = spec
        .estimators
        .iter()
        .map(|e| {
            oracle.get(e.target()).ok_or_else(|| {
                FdidError::InvalidArgument(format!("unknown target estimand `{}`", e.target()))
            })
        })
        .collect::<Result<Vec<f64>>>()?;

    let sims: Vec<Result<Vec<Draw>>> = (0..spec.n_sims)
        .into_par_iter()
        .map(|sim| {
            let mut cfg = config.clone();
            cfg.seed = simulation_seed(spec.seed, sim);
            let cs = generate(&cfg)?.1.cross_section();
            Ok(spec
                .estimators
                .iter()
                .zip(&targets)
                .map(|(e, &target)| {
                    let point = e.estimator.evaluate(&cs).ok().filter(|v| v.is_finite());
                    let covered = match (&spec.bootstrap, point) {
                        (Some(b), Some(_)) => {
                            let b = BootstrapSpec { seed: cfg.seed, ..*b };
                            bootstrap(&cs, &b, |s| e.estimator.evaluate(s)).ok().map(|r| r.covers(target))
                        }
                        _ => None,
                    };
                    (point, covered)
                })
                .collect())
        })
        .collect();
    let sims = sims.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(spec.estimators.len());
    for (j, (e, &target)) in spec.estimators.iter().zip(&targets).enumerate() {
        let estimates: Vec<f64> = sims.iter().filter_map(|s| s[j].0).collect();
        let n_failed = spec.n_sims - estimates.len();
        if n_failed as f64 > MAX_FAILED_SHARE * spec.n_sims as f64 || estimates.len() < 2 {
            return Err(FdidError::TooManyFailures {
                failed: n_failed,
                total: spec.n_sims,
            });
        }
        let m = mean(&estimates);
        let sd = sample_sd(&estimates);
        let rmse = (estimates.iter().map(|v| (v - target).powi(2)).sum::<f64>() / estimates.len() as f64).sqrt();
        let coverage = spec.bootstrap.as_ref().map(|_| {
            let flags: Vec<bool> = sims.iter().filter_map(|s| s[j].1).collect();
            flags.iter().filter(|&&c| c).count() as f64 / flags.len().max(1) as f64
        });
        rows.push(MonteCarloRow {
            estimator: e.estimator.name().to_string(),
            target: e.target().to_string(),
            target_value: target,
            mean_estimate: m,
            bias: m - target,
            mc_se: sd / (estimates.len() as f64).sqrt(),
            sd,
            rmse,
            coverage,
            n_ok: estimates.len(),
            n_failed,
            estimates,
        });
    }
    Ok(MonteCarloReport {
        config: config.clone(),
        oracle,
        n_sims: spec.n_sims,
        seed: spec.seed,
        rows,
    })
}
