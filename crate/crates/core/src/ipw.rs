//! Propensity scores and inverse-propensity-weighted DID estimands.

use serde::Serialize;

use crate::error::{FdidError, Result};
use crate::estimators::Strata;
use crate::linalg::{least_squares, Design};
use crate::numeric::KahanSum;
use crate::panel::{CrossSection, PanelDataset};

/// Scores within this distance of 0 or 1 are counted as extreme.
pub const EXTREME_SCORE: f64 = 1e-6;

const MAX_ITER: usize = 100;
const COEF_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropensityKind {
    KnownConstant,
    KnownPerStratum,
    LogisticFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogisticMetadata {
    pub iterations: usize,
    pub converged: bool,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
}

/// Per-unit scores e(X_i) in (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropensityModel {
    pub kind: PropensityKind,
    pub scores: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<LogisticMetadata>,
}

impl PropensityModel {
    pub fn constant(score: f64, n: usize) -> Result<Self> {
        check_score(0, score)?;
        Ok(Self {
            kind: PropensityKind::KnownConstant,
            scores: vec![score; n],
            fit: None,
        })
    }

    /// Known per-stratum scores `by_stratum[k]`.
    pub fn per_stratum(strata: &Strata, by_stratum: &[f64]) -> Result<Self> {
        if by_stratum.len() != strata.len() {
            return Err(FdidError::InvalidArgument(format!(
                "{} scores for {} strata",
                by_stratum.len(),
                strata.len()
            )));
        }
        let scores: Vec<f64> = strata.assignment().iter().map(|&k| by_stratum[k]).collect();
        for (i, &s) in scores.iter().enumerate() {
            check_score(i, s)?;
        }
        Ok(Self {
            kind: PropensityKind::KnownPerStratum,
            scores,
            fit: None,
        })
    }

    /// Saturated scores: the share of G = 1 within each stratum.
    pub fn saturated(cs: &CrossSection, strata: &Strata) -> Result<Self> {
        let mut n1 = vec![0usize; strata.len()];
        let mut n = vec![0usize; strata.len()];
        for (&k, &g) in strata.assignment().iter().zip(&cs.g) {
            n[k] += 1;
            n1[k] += g as usize;
        }
        let by: Vec<f64> = n1.iter().zip(&n).map(|(&a, &b)| a as f64 / b as f64).collect();
        for (k, &e) in by.iter().enumerate() {
            if e <= 0.0 || e >= 1.0 {
                return Err(FdidError::NoOverlap {
                    stratum: strata.labels()[k].clone(),
                    n1: n1[k],
                    n0: n[k] - n1[k],
                });
            }
        }
        Self::per_stratum(strata, &by)
    }

    pub fn n_extreme(&self) -> usize {
        self.scores
            .iter()
            .filter(|&&s| !(EXTREME_SCORE..=1.0 - EXTREME_SCORE).contains(&s))
            .count()
    }
}

fn check_score(index: usize, score: f64) -> Result<()> {
    if score > 0.0 && score < 1.0 {
        Ok(())
    } else {
        Err(FdidError::ScoreOutOfRange { index, score })
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic regression of G on (1, X) by iteratively reweighted least squares.
pub fn fit_logistic_cs(cs: &CrossSection) -> Result<PropensityModel> {
    if cs.p() == 0 {
        return Err(FdidError::InvalidArgument(
            "logistic propensity model needs at least one covariate".into(),
        ));
    }
    cs.check_groups()?;
    let n = cs.n();
    let mut design = Design::new(n);
    design.push("intercept", vec![1.0; n])?;
    for (name, col) in cs.covariate_names.iter().zip(&cs.x) {
        design.push(name.clone(), col.clone())?;
    }
    let y: Vec<f64> = cs.g.iter().map(|&g| g as u8 as f64).collect();
    let k = design.ncols();
    let mut beta = vec![0.0; k];
    // start at the marginal log-odds
    let share = cs.n1() as f64 / n as f64;
    beta[0] = (share / (1.0 - share)).ln();

    for iter in 1..=MAX_ITER {
        let eta = design.apply(&beta);
        let p: Vec<f64> = eta.iter().map(|&z| sigmoid(z)).collect();
        let w: Vec<f64> = p.iter().map(|&pi| pi * (1.0 - pi)).collect();
        if w.iter().all(|&wi| wi < 1e-12) {
            return Err(FdidError::Separation);
        }
        // working response z = eta + (y - p) / w, solved as weighted LS
        let sw: Vec<f64> = w.iter().map(|wi| wi.sqrt()).collect();
        let wz: Vec<f64> = (0..n)
            .map(|i| {
                if w[i] < 1e-300 {
                    0.0
                } else {
                    sw[i] * eta[i] + (y[i] - p[i]) / sw[i]
                }
            })
            .collect();
        let step = match least_squares(&design.scale_rows(&sw), &wz) {
            Ok(fit) => fit.coefficients,
            Err(FdidError::RankDeficient { .. }) => return Err(FdidError::Separation),
            Err(e) => return Err(e),
        };
        let change = step
            .iter()
            .zip(&beta)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        beta = step;
        let deviance: f64 = -2.0
            * y.iter()
                .zip(design.apply(&beta))
                .map(|(&yi, z)| {
                    // log-likelihood term, stable for large |z|
                    yi * z - if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() }
                })
                .sum::<f64>();
        if deviance < 1e-6 || beta.iter().any(|b| !b.is_finite()) {
            return Err(FdidError::Separation);
        }
        if change < COEF_TOL {
            let scores: Vec<f64> = design.apply(&beta).iter().map(|&z| sigmoid(z)).collect();
            if let Some((i, &s)) = scores.iter().enumerate().find(|(_, &s)| s <= 0.0 || s >= 1.0) {
                let _ = (i, s);
                return Err(FdidError::Separation);
            }
            return Ok(PropensityModel {
                kind: PropensityKind::LogisticFit,
                scores,
                fit: Some(LogisticMetadata {
                    iterations: iter,
                    converged: true,
                    names: design.names().to_vec(),
                    coefficients: beta,
                }),
            });
        }
    }
    // diverging coefficients with a vanishing deviance are separation, handled above
    Err(FdidError::NonConvergence(MAX_ITER))
}

pub fn fit_logistic(dataset: &PanelDataset) -> Result<PropensityModel> {
    fit_logistic_cs(&dataset.cross_section())
}

/// Horvitz–Thompson (unnormalized) or Hájek (normalized) weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    #[default]
    HorvitzThompson,
    Hajek,
}

fn check_model(cs: &CrossSection, model: &PropensityModel) -> Result<()> {
    if model.scores.len() != cs.n() {
        return Err(FdidError::InvalidArgument(format!(
            "{} scores for {} units",
            model.scores.len(),
            cs.n()
        )));
    }
    for (i, &s) in model.scores.iter().enumerate() {
        check_score(i, s)?;
    }
    cs.check_groups()
}

/// n⁻¹ Σ [G/e(X) − (1−G)/(1−e(X))] ΔY.
pub fn tau_ipw_cs(cs: &CrossSection, model: &PropensityModel, weighting: Weighting) -> Result<f64> {
    check_model(cs, model)?;
    let mut t1 = KahanSum::new();
    let mut t0 = KahanSum::new();
    let mut w1 = KahanSum::new();
    let mut w0 = KahanSum::new();
    for ((&g, &d), &e) in cs.g.iter().zip(&cs.delta).zip(&model.scores) {
        if g {
            t1.add(d / e);
            w1.add(1.0 / e);
        } else {
            t0.add(d / (1.0 - e));
            w0.add(1.0 / (1.0 - e));
        }
    }
    Ok(match weighting {
        Weighting::HorvitzThompson => (t1.total() - t0.total()) / cs.n() as f64,
        Weighting::Hajek => t1.total() / w1.total() - t0.total() / w0.total(),
    })
}

pub fn tau_ipw(dataset: &PanelDataset, model: &PropensityModel) -> Result<f64> {
    tau_ipw_cs(&dataset.cross_section(), model, Weighting::HorvitzThompson)
}

/// Observed group-g mean of ΔY contrasted with the opposite group reweighted
/// to the covariate distribution of group g; marginal e is n₁/n.
pub fn tau_ipw_given_g_cs(
    cs: &CrossSection,
    model: &PropensityModel,
    g: bool,
    weighting: Weighting,
) -> Result<f64> {
    check_model(cs, model)?;
    let n = cs.n() as f64;
    let e_bar = cs.n1() as f64 / n;
    let mut own = KahanSum::new();
    let mut n_own = 0usize;
    let mut other = KahanSum::new();
    let mut other_w = KahanSum::new();
    for ((&gi, &d), &e) in cs.g.iter().zip(&cs.delta).zip(&model.scores) {
        if gi == g {
            own.add(d);
            n_own += 1;
        } else {
            // odds of belonging to group g
            let w = if g {
                (e / e_bar) / (1.0 - e)
            } else {
                ((1.0 - e) / (1.0 - e_bar)) / e
            };
            other.add(w * d);
            other_w.add(w);
        }
    }
    let own_mean = own.total() / n_own as f64;
    let reweighted = match weighting {
        Weighting::HorvitzThompson => other.total() / n,
        Weighting::Hajek => other.total() / other_w.total(),
    };
    Ok(if g {
        own_mean - reweighted
    } else {
        reweighted - own_mean
    })
}

pub fn tau_ipw_given_g(dataset: &PanelDataset, model: &PropensityModel, g: bool) -> Result<f64> {
    tau_ipw_given_g_cs(&dataset.cross_section(), model, g, Weighting::HorvitzThompson)
}

/// Per-stratum IPW contrasts τ̂_IPW(k) for discrete strata.
pub fn tau_ipw_per_stratum(
    cs: &CrossSection,
    model: &PropensityModel,
    strata: &Strata,
) -> Result<Vec<f64>> {
    check_model(cs, model)?;
    let mut acc = vec![KahanSum::new(); strata.len()];
    let mut counts = vec![0usize; strata.len()];
    for (i, &k) in strata.assignment().iter().enumerate() {
        let e = model.scores[i];
        let d = cs.delta[i];
        acc[k].add(if cs.g[i] { d / e } else { -d / (1.0 - e) });
        counts[k] += 1;
    }
    Ok(acc
        .iter()
        .zip(&counts)
        .map(|(a, &c)| a.total() / c as f64)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IpwEstimates {
    pub tau_ipw: f64,
    pub tau_ipw_given_g1: f64,
    pub tau_ipw_given_g0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_stratum: Option<Vec<f64>>,
    pub weighting: Weighting,
    /// Means of G/e(X) and (1−G)/(1−e(X)); both near 1 under a correct model.
    pub weight_means: (f64, f64),
    pub n_extreme: usize,
}

pub fn ipw_estimates(
    cs: &CrossSection,
    model: &PropensityModel,
    strata: Option<&Strata>,
    weighting: Weighting,
) -> Result<IpwEstimates> {
    let n = cs.n() as f64;
    let m1 = cs
        .g
        .iter()
        .zip(&model.scores)
        .map(|(&g, &e)| if g { 1.0 / e } else { 0.0 })
        .sum::<f64>()
        / n;
    let m0 = cs
        .g
        .iter()
        .zip(&model.scores)
        .map(|(&g, &e)| if g { 0.0 } else { 1.0 / (1.0 - e) })
        .sum::<f64>()
        / n;
    Ok(IpwEstimates {
        tau_ipw: tau_ipw_cs(cs, model, weighting)?,
        tau_ipw_given_g1: tau_ipw_given_g_cs(cs, model, true, weighting)?,
        tau_ipw_given_g0: tau_ipw_given_g_cs(cs, model, false, weighting)?,
        per_stratum: strata
            .map(|s| tau_ipw_per_stratum(cs, model, s))
            .transpose()?,
        weighting,
        weight_means: (m1, m0),
        n_extreme: model.n_extreme(),
    })
}

/// Counts in `bins` equal-width bins on [0, 1]; the last bin is closed.
pub fn histogram(scores: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for &s in scores {
        let b = ((s * bins as f64).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{did_cs, did_stratified_cs, did_stratified_given_g_cs, EmptyStratumPolicy};

    /// Binary X with (g=1,x=1)=30, (g=0,x=1)=10, (g=1,x=0)=10, (g=0,x=0)=30.
    fn cell_fixture() -> CrossSection {
        let mut delta = vec![];
        let mut g = vec![];
        let mut x = vec![];
        let cells = [(true, 1.0, 30, 5.0), (false, 1.0, 10, 2.0), (true, 0.0, 10, 1.0), (false, 0.0, 30, -1.0)];
        for (gi, xi, count, base) in cells {
            for j in 0..count {
                g.push(gi);
                x.push(xi);
                delta.push(base + 0.1 * j as f64);
            }
        }
        CrossSection::new(delta, g, vec![x], vec!["x".into()]).unwrap()
    }

    #[test]
    fn saturated_logistic_recovers_cell_frequencies() {
        let cs = cell_fixture();
        let m = fit_logistic_cs(&cs).unwrap();
        let meta = m.fit.as_ref().unwrap();
        assert!(meta.converged);
        assert!((meta.coefficients[0] - (1.0f64 / 3.0).ln()).abs() < 1e-8);
        assert!((meta.coefficients[1] - 9.0f64.ln()).abs() < 1e-8);
        for (i, &s) in m.scores.iter().enumerate() {
            let expect = if cs.x[0][i] == 1.0 { 0.75 } else { 0.25 };
            assert!((s - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn null_model_when_x_orthogonal_to_g() {
        // x balanced within both groups
        let g = vec![true, true, true, true, false, false, false, false];
        let x = vec![-1.0, 1.0, -2.0, 2.0, -1.0, 1.0, -2.0, 2.0];
        let cs = CrossSection::new(vec![0.0; 8], g, vec![x], vec!["x".into()]).unwrap();
        let m = fit_logistic_cs(&cs).unwrap();
        let c = &m.fit.unwrap().coefficients;
        assert!(c[0].abs() < 1e-10 && c[1].abs() < 1e-10);
    }

    #[test]
    fn perfect_separation_is_reported() {
        let x: Vec<f64> = (-5..5).map(|v| v as f64 + 0.5).collect();
        let g: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
        let cs = CrossSection::new(vec![0.0; 10], g, vec![x], vec!["x".into()]).unwrap();
        let err = fit_logistic_cs(&cs).unwrap_err();
        assert!(matches!(err, FdidError::Separation), "{err}");
        assert!(err.to_string().contains("stratify"));
    }

    #[test]
    fn constant_scores_reproduce_did() {
        let cs = cell_fixture();
        let tau = did_cs(&cs).unwrap().point;
        let e = cs.n1() as f64 / cs.n() as f64;
        let m = PropensityModel::constant(e, cs.n()).unwrap();
        assert!((tau_ipw_cs(&cs, &m, Weighting::HorvitzThompson).unwrap() - tau).abs() < 1e-12);
        for g in [true, false] {
            assert!((tau_ipw_given_g_cs(&cs, &m, g, Weighting::HorvitzThompson).unwrap() - tau).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_scores_match_stratified_estimators() {
        let cs = cell_fixture();
        let strata = Strata::from_columns(&cs, &["x".into()]).unwrap();
        let m = PropensityModel::saturated(&cs, &strata).unwrap();
        let strat = did_stratified_cs(&cs, &strata, EmptyStratumPolicy::Error).unwrap();
        assert!((tau_ipw_cs(&cs, &m, Weighting::HorvitzThompson).unwrap() - strat.point).abs() < 1e-10);
        for g in [true, false] {
            let sub = did_stratified_given_g_cs(&cs, &strata, g, EmptyStratumPolicy::Error).unwrap().point;
            assert!((tau_ipw_given_g_cs(&cs, &m, g, Weighting::HorvitzThompson).unwrap() - sub).abs() < 1e-10);
            assert!((tau_ipw_given_g_cs(&cs, &m, g, Weighting::Hajek).unwrap() - sub).abs() < 1e-10);
        }
        let per = tau_ipw_per_stratum(&cs, &m, &strata).unwrap();
        for (p, d) in per.iter().zip(strat.strata.unwrap()) {
            assert!((p - d.point).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_delta_gives_zero() {
        let mut cs = cell_fixture();
        cs.delta.iter_mut().for_each(|d| *d = 0.0);
        let m = fit_logistic_cs(&cs).unwrap();
        assert_eq!(tau_ipw_cs(&cs, &m, Weighting::HorvitzThompson).unwrap(), 0.0);
    }

    #[test]
    fn constant_delta_given_g1_is_zero_under_saturated_scores() {
        let mut cs = cell_fixture();
        cs.delta.iter_mut().for_each(|d| *d = 2.5);
        let strata = Strata::from_columns(&cs, &["x".into()]).unwrap();
        let m = PropensityModel::saturated(&cs, &strata).unwrap();
        assert!(tau_ipw_given_g_cs(&cs, &m, true, Weighting::HorvitzThompson).unwrap().abs() < 1e-12);
    }

    #[test]
    fn out_of_range_scores_are_rejected() {
        let cs = cell_fixture();
        let mut m = PropensityModel::constant(0.5, cs.n()).unwrap();
        m.scores[3] = 1.0;
        assert!(matches!(
            tau_ipw_cs(&cs, &m, Weighting::HorvitzThompson),
            Err(FdidError::ScoreOutOfRange { index: 3, .. })
        ));
        assert!(PropensityModel::constant(0.0, 3).is_err());
    }

    #[test]
    fn histogram_bins() {
        let h = histogram(&[0.25, 0.25, 0.75, 1.0, 0.0], 20);
        assert_eq!(h[5], 2);
        assert_eq!(h[15], 1);
        assert_eq!(h[19], 1);
        assert_eq!(h[0], 1);
        assert_eq!(h.iter().sum::<usize>(), 5);
    }
}
