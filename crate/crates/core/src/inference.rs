//! Unit-level bootstrap with percentile intervals, and heteroskedasticity-robust
//! standard errors.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FdidError, Result};
use crate::linalg::{Matrix, RegressionFit};
use crate::numeric::{normal_critical, quantile_sorted, sorted};
use crate::panel::CrossSection;
use crate::regression::{ols_interacted_cs, Centering};

/// Share of failed replicates above which the bootstrap is abandoned.
pub const MAX_FAILED_SHARE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub replications: usize,
    pub seed: u64,
    pub ci_level: f64,
}

impl Default for BootstrapSpec {
    fn default() -> Self {
        Self {
            replications: 1000,
            seed: 0,
            ci_level: 0.95,
        }
    }
}

impl BootstrapSpec {
    pub fn new(replications: usize, seed: u64) -> Self {
        Self {
            replications,
            seed,
            ..Self::default()
        }
    }

    pub fn with_level(mut self, ci_level: f64) -> Self {
        self.ci_level = ci_level;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(FdidError::InvalidArgument(format!(
                "bootstrap needs at least 2 replications, got {}",
                self.replications
            )));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(FdidError::InvalidArgument(format!(
                "confidence level must lie in (0, 1), got {}",
                self.ci_level
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapResult {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub replications: usize,
    pub seed: u64,
    pub n_failed: usize,
    /// Successful replicates in replicate-index order.
    pub replicate_values: Vec<f64>,
}

/// The JSON summary `{point, ci, level, B, n_failed, seed}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub point: f64,
    pub ci: [f64; 2],
    pub level: f64,
    #[serde(rename = "B")]
    pub b: usize,
    pub n_failed: usize,
    pub seed: u64,
}

impl BootstrapResult {
    pub fn summary(&self) -> BootstrapSummary {
        BootstrapSummary {
            point: self.point,
            ci: [self.ci_low, self.ci_high],
            level: self.level,
            b: self.replications,
            n_failed: self.n_failed,
            seed: self.seed,
        }
    }

    pub fn width(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }

    /// Writes `replicate,value` rows for the successful replicates.
    pub fn write_replicates<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["replicate", "value"])?;
        for (r, v) in self.replicate_values.iter().enumerate() {
            w.write_record([r.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Generator for replicate `r`: the master seed with stream `r`.
pub fn substream(seed: u64, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

/// Indices of a with-replacement resample of `n` units.
pub fn resample_indices(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Resample units with replacement and re-evaluate `statistic` on each sample.
///
/// The statistic sees the original covariates, so any centering it does is
/// redone inside each bootstrap sample.
pub fn bootstrap<F>(cs: &CrossSection, spec: &BootstrapSpec, statistic: F) -> Result<BootstrapResult>
where
    F: Fn(&CrossSection) -> Result<f64> + Sync,
{
    spec.validate()?;
    let point = statistic(cs)?;
    let n = cs.n();
    let draws: Vec<Option<f64>> = (0..spec.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(spec.seed, r as u64);
            let idx = resample_indices(&mut rng, n);
            statistic(&cs.resample(&idx)).ok().filter(|v| v.is_finite())
        })
        .collect();
    let replicate_values: Vec<f64> = draws.iter().flatten().copied().collect();
    let n_failed = spec.replications - replicate_values.len();
    if n_failed as f64 > MAX_FAILED_SHARE * spec.replications as f64 || replicate_values.len() < 2 {
        return Err(FdidError::TooManyFailures {
            failed: n_failed,
            total: spec.replications,
        });
    }
    let s = sorted(&replicate_values);
    let alpha = 1.0 - spec.ci_level;
    Ok(BootstrapResult {
        point,
        ci_low: quantile_sorted(&s, alpha / 2.0),
        ci_high: quantile_sorted(&s, 1.0 - alpha / 2.0),
        level: spec.ci_level,
        replications: spec.replications,
        seed: spec.seed,
        n_failed,
        replicate_values,
    })
}

/// Percentile intervals for β̂_G with per-sample recentering (valid) and with
/// covariates centered once on the full sample before resampling (invalid).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecenteringComparison {
    pub valid: BootstrapResult,
    pub invalid: BootstrapResult,
}

impl RecenteringComparison {
    pub fn width_ratio(&self) -> f64 {
        self.invalid.width() / self.valid.width()
    }
}

pub fn bootstrap_recentering_guard(
    cs: &CrossSection,
    spec: &BootstrapSpec,
) -> Result<RecenteringComparison> {
    let valid = bootstrap(cs, spec, |s| {
        Ok(ols_interacted_cs(s, Centering::SampleMean)?.1.beta_g)
    })?;
    let invalid = bootstrap(&cs.centered(), spec, |s| {
        Ok(ols_interacted_cs(s, Centering::None)?.1.beta_g)
    })?;
    Ok(RecenteringComparison { valid, invalid })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HcType {
    Hc0,
    #[default]
    Hc1,
    Hc2,
    Hc3,
}

impl std::str::FromStr for HcType {
    type Err = FdidError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hc0" => Ok(Self::Hc0),
            "hc1" => Ok(Self::Hc1),
            "hc2" => Ok(Self::Hc2),
            "hc3" => Ok(Self::Hc3),
            _ => Err(FdidError::InvalidArgument(format!("unknown HC variant `{s}`"))),
        }
    }
}

fn leverages(fit: &RegressionFit, xtx_inv: &Matrix) -> Vec<f64> {
    let k = fit.k();
    (0..fit.n)
        .map(|i| {
            let row = fit.design.row(i);
            let mut h = 0.0;
            for a in 0..k {
                for b in 0..k {
                    h += row[a] * xtx_inv.get(a, b) * row[b];
                }
            }
            h
        })
        .collect()
}

/// Sandwich (X'X)⁻¹ X' diag(ωᵢ) X (X'X)⁻¹ with HC weights ωᵢ.
pub fn robust_vcov_with(fit: &RegressionFit, hc: HcType) -> Result<Matrix> {
    let k = fit.k();
    if fit.rank < k {
        return Err(FdidError::RankDeficient {
            columns: fit.names[fit.rank..].to_vec(),
        });
    }
    let n = fit.n;
    let bread = fit.xtx_inverse();
    let h = match hc {
        HcType::Hc2 | HcType::Hc3 => leverages(fit, &bread),
        _ => Vec::new(),
    };
    let omega: Vec<f64> = (0..n)
        .map(|i| {
            let e2 = fit.residuals[i] * fit.residuals[i];
            match hc {
                HcType::Hc0 | HcType::Hc1 => e2,
                HcType::Hc2 => e2 / (1.0 - h[i]),
                HcType::Hc3 => e2 / ((1.0 - h[i]) * (1.0 - h[i])),
            }
        })
        .collect();
    let mut meat = Matrix::zeros(k, k);
    for i in 0..n {
        let row = fit.design.row(i);
        for a in 0..k {
            let wa = omega[i] * row[a];
            for b in a..k {
                meat.set(a, b, meat.get(a, b) + wa * row[b]);
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            meat.set(a, b, meat.get(b, a));
        }
    }
    let mut v = bread.mul(&meat).mul(&bread);
    if hc == HcType::Hc1 {
        if n <= k {
            return Err(FdidError::TooFewRows { rows: n, cols: k });
        }
        v.scale(n as f64 / (n - k) as f64);
    }
    Ok(v)
}

/// HC1 sandwich covariance.
pub fn robust_vcov(fit: &RegressionFit) -> Result<Matrix> {
    robust_vcov_with(fit, HcType::Hc1)
}

/// σ̂²(X'X)⁻¹ with σ̂² = e'e/(n − k).
pub fn classical_vcov(fit: &RegressionFit) -> Result<Matrix> {
    let k = fit.k();
    if fit.n <= k {
        return Err(FdidError::TooFewRows { rows: fit.n, cols: k });
    }
    let s2 = fit.residuals.iter().map(|e| e * e).sum::<f64>() / (fit.n - k) as f64;
    let mut v = fit.xtx_inverse();
    v.scale(s2);
    Ok(v)
}

/// Coefficient with its robust standard error and normal interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientInterval {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub ci: [f64; 2],
}

pub fn normal_intervals(fit: &RegressionFit, vcov: &Matrix, level: f64) -> Vec<CoefficientInterval> {
    let z = normal_critical(level);
    fit.names
        .iter()
        .zip(&fit.coefficients)
        .zip(vcov.diagonal())
        .map(|((name, &b), v)| {
            let se = v.max(0.0).sqrt();
            CoefficientInterval {
                name: name.clone(),
                estimate: b,
                se,
                ci: [b - z * se, b + z * se],
            }
        })
        .collect()
}

/// SE of a linear combination c'β.
pub fn linear_combination_se(vcov: &Matrix, c: &[f64]) -> f64 {
    let mut v = 0.0;
    for (a, ca) in c.iter().enumerate() {
        for (b, cb) in c.iter().enumerate() {
            v += ca * vcov.get(a, b) * cb;
        }
    }
    v.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::did_cs;
    use crate::linalg::{least_squares, Design};
    use rand_distr::{Distribution, StandardNormal};

    fn sample(n: usize, seed: u64) -> CrossSection {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = vec![];
        let mut x = vec![];
        let mut d = vec![];
        for i in 0..n {
            let gi = i % 2 == 0;
            let xi: f64 = StandardNormal.sample(&mut rng);
            let e: f64 = StandardNormal.sample(&mut rng);
            g.push(gi);
            x.push(xi + 1.0);
            d.push(1.0 + 2.0 * gi as u8 as f64 + xi + 1.5 * xi * gi as u8 as f64 + e);
        }
        CrossSection::new(d, g, vec![x], vec!["x".into()]).unwrap()
    }

    #[test]
    fn constant_delta_gives_degenerate_interval() {
        let cs = CrossSection::new(vec![3.0; 20], (0..20).map(|i| i < 10).collect(), vec![], vec![]).unwrap();
        let r = bootstrap(&cs, &BootstrapSpec::new(200, 1), |s| Ok(did_cs(s)?.point)).unwrap();
        assert_eq!((r.ci_low, r.ci_high), (0.0, 0.0));
        assert!(r.replicate_values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cs = sample(80, 3);
        let spec = BootstrapSpec::new(100, 42);
        let f = |s: &CrossSection| Ok(did_cs(s)?.point);
        let a = bootstrap(&cs, &spec, f).unwrap();
        let b = bootstrap(&cs, &spec, f).unwrap();
        assert_eq!(a, b);
        let c = bootstrap(&cs, &BootstrapSpec::new(100, 43), f).unwrap();
        assert_ne!(a.replicate_values, c.replicate_values);
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let cs = sample(60, 5);
        let spec = BootstrapSpec::new(64, 9);
        let f = |s: &CrossSection| Ok(did_cs(s)?.point);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| bootstrap(&cs, &spec, f)).unwrap();
        let b = four.install(|| bootstrap(&cs, &spec, f)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn failed_replicates_are_counted_and_capped() {
        // 2 treated of 40: many resamples miss G = 1 entirely
        let g: Vec<bool> = (0..40).map(|i| i < 2).collect();
        let cs = CrossSection::new((0..40).map(|i| i as f64).collect(), g, vec![], vec![]).unwrap();
        let err = bootstrap(&cs, &BootstrapSpec::new(200, 1), |s| Ok(did_cs(s)?.point)).unwrap_err();
        assert!(matches!(err, FdidError::TooManyFailures { .. }));

        let g: Vec<bool> = (0..40).map(|i| i < 3).collect();
        let cs = CrossSection::new((0..40).map(|i| i as f64).collect(), g, vec![], vec![]).unwrap();
        let r = bootstrap(&cs, &BootstrapSpec::new(500, 1), |s| Ok(did_cs(s)?.point)).unwrap();
        assert!(r.n_failed > 0 && r.n_failed <= 50);
        assert_eq!(r.replicate_values.len() + r.n_failed, 500);
    }

    #[test]
    fn percentile_interval_is_monotone_equivariant() {
        let cs = sample(50, 11);
        // (B − 1)·0.025 is integral, so both endpoints are order statistics
        let spec = BootstrapSpec::new(81, 2);
        let a = bootstrap(&cs, &spec, |s| Ok(did_cs(s)?.point)).unwrap();
        let b = bootstrap(&cs, &spec, |s| Ok(did_cs(s)?.point.exp())).unwrap();
        assert!((b.ci_low - a.ci_low.exp()).abs() < 1e-9 * b.ci_low.abs().max(1.0));
        assert!((b.ci_high - a.ci_high.exp()).abs() < 1e-9 * b.ci_high.abs().max(1.0));
    }

    #[test]
    fn no_covariates_makes_recentering_schemes_identical() {
        let cs = sample(60, 4).without_covariates();
        let r = bootstrap_recentering_guard(&cs, &BootstrapSpec::new(50, 8)).unwrap();
        assert_eq!(r.valid.replicate_values, r.invalid.replicate_values);
    }

    #[test]
    fn invalid_scheme_is_narrower_with_interaction() {
        let cs = sample(400, 6);
        let r = bootstrap_recentering_guard(&cs, &BootstrapSpec::new(300, 8)).unwrap();
        assert!(r.width_ratio() < 1.0, "ratio {}", r.width_ratio());
        assert_eq!(r.valid.point, r.invalid.point);
    }

    #[test]
    fn summary_json_shape() {
        let cs = sample(30, 1);
        let r = bootstrap(&cs, &BootstrapSpec::new(20, 7), |s| Ok(did_cs(s)?.point)).unwrap();
        let v = serde_json::to_value(r.summary()).unwrap();
        for key in ["point", "ci", "level", "B", "n_failed", "seed"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let mut buf = vec![];
        r.write_replicates(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 21);
    }

    #[test]
    fn hc1_on_two_points() {
        let d = Design::from_columns(vec![("one".into(), vec![1.0, 1.0])]).unwrap();
        let fit = least_squares(&d, &[2.0, 4.0]).unwrap();
        // (1/2)·(1 + 1)·(1/2)·2/(2 − 1) = 1
        let v = robust_vcov(&fit).unwrap();
        assert!((v.get(0, 0) - 1.0).abs() < 1e-14);
        let v0 = robust_vcov_with(&fit, HcType::Hc0).unwrap();
        assert!((v0.get(0, 0) - 0.5).abs() < 1e-14);
        // leverage 1/2 each
        let v2 = robust_vcov_with(&fit, HcType::Hc2).unwrap();
        assert!((v2.get(0, 0) - 1.0).abs() < 1e-14);
        let v3 = robust_vcov_with(&fit, HcType::Hc3).unwrap();
        assert!((v3.get(0, 0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_residuals_give_zero_se() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let d = Design::from_columns(vec![("one".into(), vec![1.0; 4]), ("x".into(), x)]).unwrap();
        let fit = least_squares(&d, &y).unwrap();
        let v = robust_vcov(&fit).unwrap();
        for se in normal_intervals(&fit, &v, 0.95) {
            assert!(se.se < 1e-12);
        }
    }

    #[test]
    fn hc1_close_to_classical_under_homoskedasticity() {
        let cs = sample(5000, 21);
        let d = Design::from_columns(vec![
            ("one".into(), vec![1.0; cs.n()]),
            ("x".into(), cs.x[0].clone()),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = cs.x[0]
            .iter()
            .map(|x| {
                let e: f64 = StandardNormal.sample(&mut rng);
                1.0 + x + e
            })
            .collect::<Vec<f64>>();
        let fit = least_squares(&d, &y).unwrap();
        let r = robust_vcov(&fit).unwrap();
        let c = classical_vcov(&fit).unwrap();
        for j in 0..2 {
            let ratio = (r.get(j, j) / c.get(j, j)).sqrt();
            assert!((ratio - 1.0).abs() < 0.1, "ratio {ratio}");
        }
    }
}
