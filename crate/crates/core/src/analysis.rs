//! Estimation workflows: one method on one dataset with its intervals,
//! per-period event studies, placebo checks and overlap diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{FdidError, Result};
use crate::estimators::{
    did_cs, did_stratified_cs, did_stratified_given_g_cs, EmptyStratumPolicy, EstimandLabel,
    StratumDetail, Strata,
};
use crate::inference::{
    bootstrap, normal_intervals, robust_vcov_with, BootstrapSpec, BootstrapSummary,
    CoefficientInterval, HcType,
};
use crate::ipw::{
    fit_logistic_cs, histogram, tau_ipw_cs, tau_ipw_given_g_cs, LogisticMetadata, PropensityModel,
    Weighting, EXTREME_SCORE,
};
use crate::linalg::RegressionFit;
use crate::panel::{long_to_wide, long_to_wide_window, CrossSection, LongPanel, PanelDataset};
use crate::regression::{ols_interacted_cs, ols_plain_cs, Centering, BETA_G};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Did,
    Strat,
    OlsI,
    OlsIi,
    Ipw,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Did => "did",
            Method::Strat => "strat",
            Method::OlsI => "ols-i",
            Method::OlsIi => "ols-ii",
            Method::Ipw => "ipw",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = FdidError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "did" => Ok(Method::Did),
            "strat" => Ok(Method::Strat),
            "ols-i" => Ok(Method::OlsI),
            "ols-ii" => Ok(Method::OlsIi),
            "ipw" => Ok(Method::Ipw),
            _ => Err(FdidError::InvalidArgument(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub method: Method,
    /// Covariates used by the regression and IPW methods.
    pub covariates: Vec<String>,
    /// Stratification columns for `strat`; defaults to `covariates`.
    pub strata: Vec<String>,
    pub center: bool,
    pub bootstrap: Option<BootstrapSpec>,
    pub level: f64,
    pub hc: HcType,
    pub hajek: bool,
    pub drop_empty_strata: bool,
}

impl EstimateOptions {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            covariates: Vec::new(),
            strata: Vec::new(),
            center: true,
            bootstrap: None,
            level: 0.95,
            hc: HcType::Hc1,
            hajek: false,
            drop_empty_strata: false,
        }
    }

    fn strata_columns(&self) -> &[String] {
        if self.strata.is_empty() {
            &self.covariates
        } else {
            &self.strata
        }
    }

    fn policy(&self) -> EmptyStratumPolicy {
        if self.drop_empty_strata {
            EmptyStratumPolicy::Drop
        } else {
            EmptyStratumPolicy::Error
        }
    }

    fn weighting(&self) -> Weighting {
        if self.hajek {
            Weighting::Hajek
        } else {
            Weighting::HorvitzThompson
        }
    }

    /// The main estimand this configuration reports.
    pub fn estimand(&self) -> EstimandLabel {
        match self.method {
            Method::Did => EstimandLabel::Did,
            Method::OlsI if !self.center && !self.covariates.is_empty() => {
                EstimandLabel::DidXAtOrigin
            }
            _ => EstimandLabel::DidX,
        }
    }

    /// Point estimate of the main estimand on `cs`, whose covariates are the
    /// selected ones.
    pub fn point(&self, cs: &CrossSection) -> Result<f64> {
        match self.method {
            Method::Did => Ok(did_cs(cs)?.point),
            Method::Strat => {
                let strata = Strata::from_columns(cs, self.strata_columns())?;
                Ok(did_stratified_cs(cs, &strata, self.policy())?.point)
            }
            Method::OlsI => {
                let centering = if self.center {
                    Centering::SampleMean
                } else {
                    Centering::None
                };
                Ok(ols_interacted_cs(cs, centering)?.1.beta_g)
            }
            Method::OlsIi => Ok(ols_plain_cs(cs)?.1.beta_g),
            Method::Ipw => {
                let model = fit_logistic_cs(&cs.select_covariates(&self.covariates)?)?;
                tau_ipw_cs(cs, &model, self.weighting())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledValue {
    pub estimand: EstimandLabel,
    pub point: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EhwSummary {
    pub hc: HcType,
    pub se: f64,
    pub ci: [f64; 2],
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub method: Method,
    pub estimand: EstimandLabel,
    pub point: f64,
    pub n: usize,
    pub n1: usize,
    pub n0: usize,
    pub covariates: Vec<String>,
    pub centered: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xbar: Option<Vec<f64>>,
    pub bootstrap: Option<BootstrapSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ehw: Option<EhwSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<CoefficientInterval>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub secondary: Vec<LabeledValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strata: Option<Vec<StratumDetail>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl EstimateReport {
    /// Bootstrap interval if present, otherwise the EHW interval.
    pub fn ci(&self) -> Option<[f64; 2]> {
        self.bootstrap
            .as_ref()
            .map(|b| b.ci)
            .or_else(|| self.ehw.as_ref().map(|e| e.ci))
    }
}

fn regression_fit(opts: &EstimateOptions, cs: &CrossSection) -> Result<(RegressionFit, Option<Vec<f64>>)> {
    match opts.method {
        Method::OlsI => {
            let centering = if opts.center {
                Centering::SampleMean
            } else {
                Centering::None
            };
            let (fit, d) = ols_interacted_cs(cs, centering)?;
            Ok((fit, Some(d.xbar_used)))
        }
        _ => Ok((ols_plain_cs(cs)?.0, None)),
    }
}

/// Run one method on `dataset` with bootstrap and (for regressions) EHW intervals.
pub fn estimate(dataset: &PanelDataset, opts: &EstimateOptions) -> Result<EstimateReport> {
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(FdidError::InvalidArgument(format!(
            "confidence level must lie in (0, 1), got {}",
            opts.level
        )));
    }
    let mut cols: Vec<String> = opts.covariates.clone();
    for s in opts.strata_columns() {
        if !cols.contains(s) {
            cols.push(s.clone());
        }
    }
    let full = dataset.cross_section().select_covariates(&cols)?;
    let cs = match opts.method {
        Method::Did | Method::Strat => full.without_covariates(),
        _ => full.select_covariates(&opts.covariates)?,
    };
    if matches!(opts.method, Method::Ipw) && opts.covariates.is_empty() {
        return Err(FdidError::InvalidArgument("ipw needs at least one covariate".into()));
    }
    cs.check_groups()?;

    let mut warnings = Vec::new();
    let mut secondary = Vec::new();
    let mut strata_detail = None;
    let mut xbar = None;
    let mut ehw = None;
    let mut coefficients = None;

    let point = match opts.method {
        Method::Strat => {
            let strata = Strata::from_columns(&full, opts.strata_columns())?;
            let r = did_stratified_cs(&full, &strata, opts.policy())?;
            warnings.extend(r.warnings.iter().cloned());
            for g in [true, false] {
                let sub = did_stratified_given_g_cs(&full, &strata, g, opts.policy())?;
                secondary.push(LabeledValue {
                    estimand: EstimandLabel::given_g(g),
                    point: sub.point,
                });
            }
            strata_detail = r.strata;
            r.point
        }
        Method::Ipw => {
            let model = fit_logistic_cs(&cs)?;
            let n_extreme = model.n_extreme();
            if n_extreme > 0 {
                warnings.push(format!(
                    "{n_extreme} propensity scores within {EXTREME_SCORE} of 0 or 1"
                ));
            }
            for g in [true, false] {
                secondary.push(LabeledValue {
                    estimand: EstimandLabel::given_g(g),
                    point: tau_ipw_given_g_cs(&cs, &model, g, opts.weighting())?,
                });
            }
            tau_ipw_cs(&cs, &model, opts.weighting())?
        }
        Method::OlsI | Method::OlsIi => {
            let (fit, center) = regression_fit(opts, &cs)?;
            xbar = center;
            let vcov = robust_vcov_with(&fit, opts.hc)?;
            let intervals = normal_intervals(&fit, &vcov, opts.level);
            let bg = intervals
                .iter()
                .find(|c| c.name == BETA_G)
                .expect("regression has beta_G");
            ehw = Some(EhwSummary {
                hc: opts.hc,
                se: bg.se,
                ci: bg.ci,
                level: opts.level,
            });
            let point = bg.estimate;
            coefficients = Some(intervals);
            point
        }
        Method::Did => did_cs(&cs)?.point,
    };

    let boot = match &opts.bootstrap {
        Some(spec) => {
            let spec = spec.with_level(opts.level);
            let stat_cs = if matches!(opts.method, Method::Strat) { &full } else { &cs };
            match bootstrap(stat_cs, &spec, |s| opts.point(s)) {
                Ok(r) => Some(r.summary()),
                Err(e @ FdidError::TooManyFailures { .. }) => {
                    warnings.push(format!("bootstrap interval unavailable: {e}"));
                    None
                }
                Err(e) => return Err(e),
            }
        }
        None => None,
    };

    Ok(EstimateReport {
        method: opts.method,
        estimand: opts.estimand(),
        point,
        n: cs.n(),
        n1: cs.n1(),
        n0: cs.n0(),
        covariates: if matches!(opts.method, Method::Strat) {
            opts.strata_columns().to_vec()
        } else if matches!(opts.method, Method::Did) {
            Vec::new()
        } else {
            opts.covariates.clone()
        },
        centered: opts.method == Method::OlsI && opts.center,
        xbar,
        bootstrap: boot,
        ehw,
        coefficients,
        secondary,
        strata: strata_detail,
        warnings,
    })
}

/// One row of an event study; the reference period is 0 by construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodEstimate {
    pub period: String,
    pub estimand: EstimandLabel,
    pub reference: bool,
    pub point: f64,
    pub ci: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<EstimateReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventStudy {
    pub reference: String,
    pub periods: Vec<PeriodEstimate>,
}

impl EventStudy {
    /// `period,point,ci_lo,ci_hi` rows; missing intervals are left empty.
    pub fn plot_csv(&self) -> Result<String> {
        plot_csv(self.periods.iter().map(|p| (p.period.as_str(), p.point, p.ci)))
    }
}

pub fn plot_csv<'a>(rows: impl IntoIterator<Item = (&'a str, f64, Option<[f64; 2]>)>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["period", "point", "ci_lo", "ci_hi"])?;
    for (period, point, ci) in rows {
        let (lo, hi) = ci
            .map(|[a, b]| (a.to_string(), b.to_string()))
            .unwrap_or_default();
        w.write_record([period.to_string(), point.to_string(), lo, hi])?;
    }
    let bytes = w.into_inner().map_err(|e| FdidError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn check_labels(long: &LongPanel, labels: &[String]) -> Result<()> {
    let present = long.time_labels();
    for l in labels {
        if !present.contains(l) {
            return Err(FdidError::InvalidArgument(format!("period `{l}` not found in data")));
        }
    }
    Ok(())
}

/// Each post period paired with the reference period and estimated on its own.
pub fn event_study(
    long: &LongPanel,
    reference: &str,
    post_labels: &[String],
    opts: &EstimateOptions,
) -> Result<EventStudy> {
    if post_labels.iter().any(|l| l == reference) {
        return Err(FdidError::ReferencePeriodReuse(reference.to_string()));
    }
    let mut wanted = post_labels.to_vec();
    wanted.push(reference.to_string());
    check_labels(long, &wanted)?;
    let mut periods = Vec::new();
    for label in long.time_labels().into_iter().filter(|l| wanted.contains(l)) {
        if label == reference {
            periods.push(PeriodEstimate {
                period: label,
                estimand: opts.estimand(),
                reference: true,
                point: 0.0,
                ci: Some([0.0, 0.0]),
                report: None,
            });
            continue;
        }
        let wide = long_to_wide(long, reference, &label)?;
        let report = estimate(&wide, opts)?;
        periods.push(PeriodEstimate {
            period: label,
            estimand: report.estimand,
            reference: false,
            point: report.point,
            ci: report.ci(),
            report: Some(report),
        });
    }
    Ok(EventStudy {
        reference: reference.to_string(),
        periods,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaceboFlag {
    /// The interval covers 0.
    Pass,
    /// The interval excludes 0.
    Flag,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaceboResult {
    pub estimand: EstimandLabel,
    pub reference: String,
    pub window: Vec<String>,
    pub point: f64,
    pub ci: [f64; 2],
    pub flag: PlaceboFlag,
    pub report: EstimateReport,
}

/// DID between a pre-event window (averaged) and the reference period.
pub fn placebo(
    long: &LongPanel,
    reference: &str,
    window: &[String],
    event_window: &[String],
    opts: &EstimateOptions,
) -> Result<PlaceboResult> {
    if window.is_empty() {
        return Err(FdidError::InvalidArgument("empty placebo window".into()));
    }
    if let Some(l) = window.iter().find(|l| event_window.contains(l)) {
        return Err(FdidError::WindowOverlap(l.clone()));
    }
    if event_window.iter().any(|l| l == reference) {
        return Err(FdidError::WindowOverlap(reference.to_string()));
    }
    let mut wanted = window.to_vec();
    wanted.push(reference.to_string());
    check_labels(long, &wanted)?;
    let wide = long_to_wide_window(long, reference, window)?;
    let report = estimate(&wide, opts)?;
    let ci = report.ci().ok_or_else(|| {
        FdidError::InvalidArgument(
            "placebo needs an interval: enable the bootstrap or use a regression method".into(),
        )
    })?;
    let flag = if ci[0] <= 0.0 && 0.0 <= ci[1] {
        PlaceboFlag::Pass
    } else {
        PlaceboFlag::Flag
    };
    Ok(PlaceboResult {
        estimand: EstimandLabel::Placebo,
        reference: reference.to_string(),
        window: window.to_vec(),
        point: report.point,
        ci,
        flag,
        report,
    })
}

/// Propensity-score overlap diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapReport {
    pub covariates: Vec<String>,
    pub n: usize,
    pub n1: usize,
    pub n0: usize,
    pub min_score: f64,
    pub max_score: f64,
    pub n_extreme: usize,
    pub bins: usize,
    pub histogram_g1: Vec<usize>,
    pub histogram_g0: Vec<usize>,
    /// Means of G/e and (1 − G)/(1 − e).
    pub weight_means: [f64; 2],
    pub fit: Option<LogisticMetadata>,
    #[serde(skip)]
    pub model: PropensityModel,
}

impl OverlapReport {
    pub fn histogram_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["bin_lo", "bin_hi", "count_g1", "count_g0"])?;
        for b in 0..self.bins {
            w.write_record([
                (b as f64 / self.bins as f64).to_string(),
                ((b + 1) as f64 / self.bins as f64).to_string(),
                self.histogram_g1[b].to_string(),
                self.histogram_g0[b].to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| FdidError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

pub const HISTOGRAM_BINS: usize = 20;

pub fn diagnose(dataset: &PanelDataset, covariates: &[String]) -> Result<OverlapReport> {
    if covariates.is_empty() {
        return Err(FdidError::InvalidArgument("diagnose needs at least one covariate".into()));
    }
    let cs = dataset.cross_section().select_covariates(covariates)?;
    let model = fit_logistic_cs(&cs)?;
    let split = |g: bool| -> Vec<f64> {
        cs.g.iter().zip(&model.scores).filter(|(&gi, _)| gi == g).map(|(_, &s)| s).collect()
    };
    let (s1, s0) = (split(true), split(false));
    let n = cs.n() as f64;
    let m1 = s1.iter().map(|e| 1.0 / e).sum::<f64>() / n;
    let m0 = s0.iter().map(|e| 1.0 / (1.0 - e)).sum::<f64>() / n;
    Ok(OverlapReport {
        covariates: covariates.to_vec(),
        n: cs.n(),
        n1: cs.n1(),
        n0: cs.n0(),
        min_score: model.scores.iter().copied().fold(f64::INFINITY, f64::min),
        max_score: model.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        n_extreme: model.n_extreme(),
        bins: HISTOGRAM_BINS,
        histogram_g1: histogram(&s1, HISTOGRAM_BINS),
        histogram_g0: histogram(&s0, HISTOGRAM_BINS),
        weight_means: [m1, m0],
        fit: model.fit.clone(),
        model,
    })
}

/// `id,g,score` rows.
pub fn scores_csv(dataset: &PanelDataset, model: &PropensityModel) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "g", "score"])?;
    for (u, s) in dataset.units().iter().zip(&model.scores) {
        w.write_record([u.id.clone(), (u.g as u8).to_string(), s.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| FdidError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{generate_long, DgpConfig, MultiPeriodConfig};
    use crate::panel::{read_wide, wide_to_long, WideColumns};

    const FOUR: &str = "id,g,y_pre,y_post\nu1,1,1,4\nu2,1,1,6\nu3,0,1,2\nu4,0,1,2\n";

    fn four() -> PanelDataset {
        read_wide(FOUR.as_bytes(), &WideColumns::default()).unwrap()
    }

    #[test]
    fn did_on_four_units() {
        let mut opts = EstimateOptions::new(Method::Did);
        opts.bootstrap = Some(BootstrapSpec::new(200, 1));
        let r = estimate(&four(), &opts).unwrap();
        assert_eq!(r.point, 3.0);
        assert_eq!(r.estimand, EstimandLabel::Did);
        // a quarter of resamples of 4 units miss a group: the interval is withheld
        assert!(r.bootstrap.is_none());
        assert!(r.warnings[0].contains("bootstrap"));
    }

    #[test]
    fn regression_reports_ehw_and_bootstrap() {
        let mut config = DgpConfig::single(0.5, 400);
        config.noise_sd = 1.0;
        config.gamma = 1.0;
        config.covariate = Some(crate::dgp::CovariateSpec { mean: 1.0, shift: 0.5, sd: 1.0, theta: 0.5, zeta: 1.0 });
        let (_, ds) = crate::dgp::generate(&config).unwrap();
        let mut opts = EstimateOptions::new(Method::OlsI);
        opts.covariates = vec!["x".into()];
        opts.bootstrap = Some(BootstrapSpec::new(100, 3));
        let r = estimate(&ds, &opts).unwrap();
        assert!(r.ehw.is_some() && r.bootstrap.is_some());
        assert!(r.centered);
        opts.center = false;
        let raw = estimate(&ds, &opts).unwrap();
        assert_eq!(raw.estimand, EstimandLabel::DidXAtOrigin);
        let (_, d) = ols_interacted_cs(&ds.cross_section(), Centering::SampleMean).unwrap();
        let xbar = ds.cross_section().covariate_means()[0];
        assert!((r.point - raw.point - d.beta_gx[0] * xbar).abs() < 1e-10);
    }

    #[test]
    fn unknown_covariate_is_an_error() {
        let mut opts = EstimateOptions::new(Method::OlsI);
        opts.covariates = vec!["nope".into()];
        assert!(matches!(estimate(&four(), &opts), Err(FdidError::MissingColumn(_))));
    }

    #[test]
    fn event_study_on_constant_outcomes_is_zero() {
        let ds = four().map_outcomes(|_| 1.0);
        let mut long = wide_to_long(&ds, "a", "b");
        let mut extra: Vec<_> = long.rows.iter().filter(|r| r.time_label == "b").cloned().collect();
        for r in &mut extra {
            r.time_label = "c".into();
        }
        long.rows.extend(extra);
        let opts = EstimateOptions::new(Method::Did);
        let es = event_study(&long, "a", &["b".into(), "c".into()], &opts).unwrap();
        assert_eq!(es.periods.len(), 3);
        assert!(es.periods.iter().all(|p| p.point == 0.0));
        assert!(es.periods[0].reference);
        let csv = es.plot_csv().unwrap();
        assert!(csv.starts_with("period,point,ci_lo,ci_hi\n"));
    }

    #[test]
    fn event_study_rejects_reference_reuse_and_missing_periods() {
        let long = wide_to_long(&four(), "a", "b");
        let opts = EstimateOptions::new(Method::Did);
        let err = event_study(&long, "a", &["a".into()], &opts).unwrap_err();
        assert!(err.to_string().contains("reference period reuse"));
        assert!(event_study(&long, "a", &["z".into()], &opts).is_err());
    }

    #[test]
    fn event_study_recovers_profile() {
        let mut base = DgpConfig::single(0.5, 2000);
        base.gamma = 2.0;
        base.noise_sd = 0.5;
        let mut mp = MultiPeriodConfig::new(base, vec![-2, -1, 0, 1, 2]);
        mp.event_profile = vec![1.0, 0.0];
        let long = generate_long(&mp).unwrap();
        let mut opts = EstimateOptions::new(Method::Did);
        opts.bootstrap = Some(BootstrapSpec::new(199, 5));
        let posts: Vec<String> = ["-2", "-1", "1", "2"].iter().map(|s| s.to_string()).collect();
        let es = event_study(&long, "0", &posts, &opts).unwrap();
        for p in &es.periods {
            let oracle = mp.oracle_did(p.period.parse().unwrap());
            let [lo, hi] = p.ci.unwrap();
            assert!(lo - 0.1 <= oracle && oracle <= hi + 0.1, "{p:?}");
        }
        assert!((es.periods[3].point - 2.0).abs() < 0.2);
    }

    #[test]
    fn placebo_window_rules() {
        let mut base = DgpConfig::single(0.5, 1000);
        base.noise_sd = 1.0;
        let mp = MultiPeriodConfig::new(base, vec![-1, 0, 1]);
        let long = generate_long(&mp).unwrap();
        let mut opts = EstimateOptions::new(Method::Did);
        opts.bootstrap = Some(BootstrapSpec::new(199, 5));
        let r = placebo(&long, "0", &["-1".into()], &["1".into()], &opts).unwrap();
        assert_eq!(r.flag, PlaceboFlag::Pass);
        assert_eq!(r.estimand, EstimandLabel::Placebo);
        assert!(matches!(
            placebo(&long, "0", &["1".into()], &["1".into()], &opts),
            Err(FdidError::WindowOverlap(_))
        ));
        opts.bootstrap = None;
        assert!(placebo(&long, "0", &["-1".into()], &["1".into()], &opts).is_err());
    }

    #[test]
    fn placebo_flags_pre_trend() {
        let mut base = DgpConfig::single(0.5, 1000);
        base.noise_sd = 0.5;
        base.phi = 1.0;
        let mp = MultiPeriodConfig::new(base, vec![-1, 0, 1]);
        let long = generate_long(&mp).unwrap();
        let mut opts = EstimateOptions::new(Method::Did);
        opts.bootstrap = Some(BootstrapSpec::new(199, 5));
        let r = placebo(&long, "0", &["-1".into()], &["1".into()], &opts).unwrap();
        assert_eq!(r.flag, PlaceboFlag::Flag);
    }

    #[test]
    fn diagnose_saturated_binary_covariate() {
        let mut text = String::from("id,g,y_pre,y_post,x\n");
        let cells = [(1, 1, 30), (0, 1, 10), (1, 0, 10), (0, 0, 30)];
        let mut i = 0;
        for (g, x, count) in cells {
            for _ in 0..count {
                text.push_str(&format!("u{i},{g},0,{i},{x}\n"));
                i += 1;
            }
        }
        let cols = WideColumns { covariates: vec!["x".into()], ..WideColumns::default() };
        let ds = read_wide(text.as_bytes(), &cols).unwrap();
        let r = diagnose(&ds, &["x".into()]).unwrap();
        // fitted scores are 0.25 and 0.75 up to rounding, which may fall either side of a bin edge
        let near = |h: &[usize], b: usize| h[b - 1] + h[b];
        assert_eq!(near(&r.histogram_g1, 5), 10);
        assert_eq!(near(&r.histogram_g1, 15), 30);
        assert_eq!(near(&r.histogram_g0, 5), 30);
        assert_eq!(near(&r.histogram_g0, 15), 10);
        assert!((r.min_score - 0.25).abs() < 1e-10 && (r.max_score - 0.75).abs() < 1e-10);
        assert_eq!(r.n_extreme, 0);
        let scores = scores_csv(&ds, &r.model).unwrap();
        assert!(scores.starts_with("id,g,score\n"));
    }

    #[test]
    fn diagnose_surfaces_separation() {
        let mut text = String::from("id,g,y_pre,y_post,x\n");
        for i in 0..20 {
            text.push_str(&format!("u{i},{},0,0,{}\n", (i >= 10) as u8, i));
        }
        let cols = WideColumns { covariates: vec!["x".into()], ..WideColumns::default() };
        let ds = read_wide(text.as_bytes(), &cols).unwrap();
        let err = diagnose(&ds, &["x".into()]).unwrap_err();
        assert!(err.to_string().contains("stratify"));
    }
}
