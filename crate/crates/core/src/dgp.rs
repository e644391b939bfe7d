//! Parametric potential-outcomes generator and its population estimands.
//!
//! Units fall in strata `k` with probability `π_k` and take `G = 1` with
//! probability `e_k`. Two binary shocks `W, U ∈ {−1/2, 1/2}` carry the
//! assumption violations: `E[W | G=g, k] = (g − e_k)ψ` and
//! `E[U | G=g, k] = (g − e_k)φ`, so both have mean zero and within-stratum
//! gaps ψ and φ. An optional continuous covariate `X | G=g ~ N(μ + s·g, σ²)`
//! enters the trend with slope θ and the interaction with slope ζ.
//!
//! ```text
//! Y_pre(g, 0)  = α_k + κg
//! Y_pre(g, 1)  = Y_pre(g, 0) + a·g
//! Y_post(g, 0) = α_k + κg + T_k + θX + δg + U
//! Y_post(g, 1) = Y_post(g, 0) + β + γ_i·g,    γ_i = γ + ηW + ζX
//! ```
//!
//! The functional form is scaffolding for checking identification results;
//! it is not a model of any particular application.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{FdidError, Result};
use crate::numeric::{normal_quantile, KahanSum};
use crate::panel::{LongPanel, LongRow, PanelDataset, UnitRecord};

/// Covariate name of the stratum index in generated datasets.
pub const STRATUM_COLUMN: &str = "stratum";
/// Covariate name of the continuous covariate in generated datasets.
pub const X_COLUMN: &str = "x";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSpec {
    /// π_k.
    pub prob: f64,
    /// e_k = P(G = 1 | k).
    pub propensity: f64,
    /// α_k.
    #[serde(default)]
    pub level: f64,
    /// T_k.
    #[serde(default)]
    pub trend: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    #[serde(default)]
    pub mean: f64,
    /// E[X | G=1] − E[X | G=0].
    #[serde(default)]
    pub shift: f64,
    #[serde(default = "one")]
    pub sd: f64,
    /// Slope of X in the trend of every arm.
    #[serde(default)]
    pub theta: f64,
    /// Slope of X in the G–Z interaction.
    #[serde(default)]
    pub zeta: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub strata: Vec<StratumSpec>,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub delta_g: f64,
    #[serde(default)]
    pub beta_z: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default, alias = "w_gap")]
    pub psi: f64,
    #[serde(default)]
    pub phi: f64,
    #[serde(default)]
    pub anticipation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariate: Option<CovariateSpec>,
    #[serde(default)]
    pub noise_sd: f64,
    /// Add noise to all eight potential outcomes instead of the observed pair.
    #[serde(default)]
    pub noise_on_potential: bool,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

impl DgpConfig {
    /// One stratum, no covariate, every other parameter zero.
    pub fn single(propensity: f64, n: usize) -> Self {
        Self {
            name: None,
            strata: vec![StratumSpec {
                prob: 1.0,
                propensity,
                level: 0.0,
                trend: 0.0,
            }],
            kappa: 0.0,
            delta_g: 0.0,
            beta_z: 0.0,
            gamma: 0.0,
            eta: 0.0,
            psi: 0.0,
            phi: 0.0,
            anticipation: 0.0,
            covariate: None,
            noise_sd: 0.0,
            noise_on_potential: false,
            n,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FdidError::InvalidConfig(msg));
        if self.strata.is_empty() {
            return bad("at least one stratum is required".into());
        }
        let total: f64 = self.strata.iter().map(|s| s.prob).sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("stratum probabilities sum to {total}, not 1"));
        }
        for (k, s) in self.strata.iter().enumerate() {
            if !(s.prob > 0.0) {
                return bad(format!("stratum {k}: probability must be positive"));
            }
            if !(s.propensity > 0.0 && s.propensity < 1.0) {
                return bad(format!("stratum {k}: propensity must lie in (0, 1)"));
            }
            let reach = s.propensity.max(1.0 - s.propensity);
            if self.psi.abs() * reach > 0.5 || self.phi.abs() * reach > 0.5 {
                return bad(format!(
                    "stratum {k}: |psi| and |phi| times max(e, 1 − e) must not exceed 1/2"
                ));
            }
        }
        if !(self.noise_sd >= 0.0) {
            return bad("noise_sd must be non-negative".into());
        }
        if let Some(c) = &self.covariate {
            if !(c.sd >= 0.0) {
                return bad("covariate sd must be non-negative".into());
            }
        }
        if self.n < 2 {
            return bad("n must be at least 2".into());
        }
        let params = [
            self.kappa,
            self.delta_g,
            self.beta_z,
            self.gamma,
            self.eta,
            self.psi,
            self.phi,
            self.anticipation,
        ];
        if params.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite".into());
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.strata.len()
    }

    fn cov(&self) -> CovariateSpec {
        self.covariate.clone().unwrap_or(CovariateSpec {
            mean: 0.0,
            shift: 0.0,
            sd: 0.0,
            theta: 0.0,
            zeta: 0.0,
        })
    }

    /// P(G = 1).
    pub fn p_treated(&self) -> f64 {
        self.strata.iter().map(|s| s.prob * s.propensity).sum()
    }

    /// P(k | G = g) for every stratum.
    pub fn stratum_given_g(&self, g: bool) -> Vec<f64> {
        let p = self.p_treated();
        self.strata
            .iter()
            .map(|s| {
                if g {
                    s.prob * s.propensity / p
                } else {
                    s.prob * (1.0 - s.propensity) / (1.0 - p)
                }
            })
            .collect()
    }

    /// E[W | G = g, k] / ψ, shared by U with φ.
    fn centered_g(g: bool, e: f64) -> f64 {
        if g {
            1.0 - e
        } else {
            -e
        }
    }

    fn mean_given_g(&self, g: bool, scale: f64) -> f64 {
        self.stratum_given_g(g)
            .iter()
            .zip(&self.strata)
            .map(|(w, s)| w * Self::centered_g(g, s.propensity) * scale)
            .sum()
    }

    /// E[W | G = g].
    pub fn w_mean_given_g(&self, g: bool) -> f64 {
        self.mean_given_g(g, self.psi)
    }

    /// E[U | G = g].
    pub fn u_mean_given_g(&self, g: bool) -> f64 {
        self.mean_given_g(g, self.phi)
    }

    /// E[X | G = g].
    pub fn x_mean_given_g(&self, g: bool) -> f64 {
        let c = self.cov();
        c.mean + if g { c.shift } else { 0.0 }
    }

    /// E[X].
    pub fn x_mean(&self) -> f64 {
        let c = self.cov();
        c.mean + c.shift * self.p_treated()
    }

    /// E[T_k + θX | G = 1] − E[T_k + θX | G = 0].
    pub fn trend_gap(&self) -> f64 {
        let w1 = self.stratum_given_g(true);
        let w0 = self.stratum_given_g(false);
        let t: f64 = self
            .strata
            .iter()
            .zip(w1.iter().zip(&w0))
            .map(|(s, (a, b))| (a - b) * s.trend)
            .sum();
        t + self.cov().theta * self.cov().shift
    }

    /// E[U | G = 1] − E[U | G = 0].
    pub fn u_gap(&self) -> f64 {
        self.u_mean_given_g(true) - self.u_mean_given_g(false)
    }

    /// E[γ_i | G = g].
    pub fn gamma_given_g(&self, g: bool) -> f64 {
        self.gamma + self.eta * self.w_mean_given_g(g) + self.cov().zeta * self.x_mean_given_g(g)
    }

    /// E[γ_i].
    pub fn gamma_mean(&self) -> f64 {
        self.gamma + self.cov().zeta * self.x_mean()
    }

    pub fn assumptions(&self) -> Assumptions {
        let c = self.cov();
        let heterogeneity_gap = self.eta * (self.w_mean_given_g(true) - self.w_mean_given_g(false))
            + c.zeta * c.shift;
        Assumptions {
            no_anticipation: self.anticipation == 0.0,
            parallel_trends: self.trend_gap() + self.delta_g + self.u_gap() == 0.0,
            exclusion_z: self.beta_z == 0.0,
            factorial_parallel_trends: self.trend_gap() + self.u_gap() == 0.0
                && heterogeneity_gap == 0.0,
            exclusion_g: self.kappa + self.delta_g == 0.0,
            conditional_parallel_trends: self.delta_g + self.phi == 0.0,
            conditional_factorial_parallel_trends: self.phi == 0.0 && self.eta * self.psi == 0.0,
        }
    }
}

/// Which identifying assumptions hold for a configuration. Overlap always
/// holds because every `e_k` lies in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Assumptions {
    pub no_anticipation: bool,
    pub parallel_trends: bool,
    pub exclusion_z: bool,
    pub factorial_parallel_trends: bool,
    pub exclusion_g: bool,
    pub conditional_parallel_trends: bool,
    pub conditional_factorial_parallel_trends: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumEstimands {
    pub did: f64,
    pub em: f64,
    pub cm: f64,
}

/// Population (or finite-population) values of every estimand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimandSet {
    pub tau_did: f64,
    pub tau_em: f64,
    pub tau_cm: f64,
    pub tau_att: f64,
    pub tau_g_given_z1: f64,
    pub tau_g_given_z0: f64,
    /// E[τ_i,cm | G = 1] and E[τ_i,cm | G = 0].
    pub tau_cm_given_g: [f64; 2],
    /// Σ_k π_k τ_did(k), conditioning on the stratum only.
    pub tau_did_strata: f64,
    /// Σ_k P(k | G=g) τ_did(k) for g = 1, 0.
    pub tau_did_strata_given_g: [f64; 2],
    /// Average of τ_did(x) over all units, conditioning on every covariate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_did_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_em_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_did_x_given_g: Option<[f64; 2]>,
    pub strata: Vec<StratumEstimands>,
}

impl EstimandSet {
    /// Named scalar values, optional ones only when present.
    pub fn named(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![
            ("tau_did", self.tau_did),
            ("tau_em", self.tau_em),
            ("tau_cm", self.tau_cm),
            ("tau_att", self.tau_att),
            ("tau_g_given_z1", self.tau_g_given_z1),
            ("tau_g_given_z0", self.tau_g_given_z0),
            ("tau_cm_given_g1", self.tau_cm_given_g[0]),
            ("tau_cm_given_g0", self.tau_cm_given_g[1]),
            ("tau_did_strata", self.tau_did_strata),
            ("tau_did_strata_given_g1", self.tau_did_strata_given_g[0]),
            ("tau_did_strata_given_g0", self.tau_did_strata_given_g[1]),
        ];
        if let Some(x) = self.tau_did_x {
            v.push(("tau_did_x", x));
        }
        if let Some(x) = self.tau_em_x {
            v.push(("tau_em_x", x));
        }
        if let Some([a, b]) = self.tau_did_x_given_g {
            v.push(("tau_did_x_given_g1", a));
            v.push(("tau_did_x_given_g0", b));
        }
        v
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.named().into_iter().find(|(n, _)| *n == name).map(|(_, v)| v)
    }

    /// Largest absolute difference over the values present in both sets.
    pub fn max_abs_diff(&self, other: &EstimandSet) -> f64 {
        let mut m = 0.0f64;
        for (name, v) in self.named() {
            if let Some(w) = other.get(name) {
                m = m.max((v - w).abs());
            }
        }
        for (a, b) in self.strata.iter().zip(&other.strata) {
            m = m.max((a.did - b.did).abs()).max((a.em - b.em).abs()).max((a.cm - b.cm).abs());
        }
        m
    }
}

/// Exact population values implied by `config`.
pub fn closed_form_estimands(config: &DgpConfig) -> EstimandSet {
    let c = config.cov();
    let a = config.anticipation;
    let g1 = config.gamma_given_g(true);
    let g0 = config.gamma_given_g(false);

    // E[ΔY | G = g] from the component means
    let w1 = config.stratum_given_g(true);
    let w0 = config.stratum_given_g(false);
    let trend = |w: &[f64]| -> f64 { w.iter().zip(&config.strata).map(|(p, s)| p * s.trend).sum() };
    let dy1 = trend(&w1)
        + c.theta * config.x_mean_given_g(true)
        + config.delta_g
        + config.u_mean_given_g(true)
        + config.beta_z
        + g1
        - a;
    let dy0 = trend(&w0) + c.theta * config.x_mean_given_g(false) + config.u_mean_given_g(false) + config.beta_z;

    let tau_cm = config.gamma_mean();
    let strata: Vec<StratumEstimands> = config
        .strata
        .iter()
        .map(|s| {
            let e = s.propensity;
            let em = config.gamma + config.eta * (1.0 - e) * config.psi + c.zeta * config.x_mean_given_g(true);
            let did = em + config.delta_g - a + config.phi + c.theta * c.shift;
            let cm = config.gamma + c.zeta * (c.mean + c.shift * e);
            StratumEstimands { did, em, cm }
        })
        .collect();
    let weighted = |w: &[f64], f: &dyn Fn(&StratumEstimands) -> f64| -> f64 {
        w.iter().zip(&strata).map(|(p, s)| p * f(s)).sum()
    };
    let pi: Vec<f64> = config.strata.iter().map(|s| s.prob).collect();

    // conditioning on (k, x): τ_did(k, x) = δ − a + φ + γ + η(1 − e_k)ψ + ζx
    let did_kx = |w: &[f64], x_mean: f64| -> f64 {
        w.iter()
            .zip(&config.strata)
            .map(|(p, s)| {
                p * (config.delta_g - a + config.phi + config.gamma + config.eta * (1.0 - s.propensity) * config.psi)
            })
            .sum::<f64>()
            + c.zeta * x_mean
    };
    let em_x = pi
        .iter()
        .zip(&config.strata)
        .map(|(p, s)| p * (config.gamma + config.eta * (1.0 - s.propensity) * config.psi))
        .sum::<f64>()
        + c.zeta * config.x_mean();

    EstimandSet {
        tau_did: dy1 - dy0,
        tau_em: g1,
        tau_cm,
        tau_att: config.beta_z + g1,
        tau_g_given_z1: config.kappa + config.delta_g + tau_cm,
        tau_g_given_z0: config.kappa + config.delta_g,
        tau_cm_given_g: [g1, g0],
        tau_did_strata: weighted(&pi, &|s| s.did),
        tau_did_strata_given_g: [weighted(&w1, &|s| s.did), weighted(&w0, &|s| s.did)],
        tau_did_x: Some(did_kx(&pi, config.x_mean())),
        tau_em_x: Some(em_x),
        tau_did_x_given_g: Some([
            did_kx(&w1, config.x_mean_given_g(true)),
            did_kx(&w0, config.x_mean_given_g(false)),
        ]),
        strata,
    }
}

/// One generated unit with all eight potential outcomes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationUnit {
    pub stratum: usize,
    pub g: bool,
    pub w: f64,
    pub u: f64,
    pub x: f64,
    /// `y_pre[g][z]`.
    pub y_pre: [[f64; 2]; 2],
    /// `y_post[g][z]`.
    pub y_post: [[f64; 2]; 2],
    pub observed_pre: f64,
    pub observed_post: f64,
}

impl PopulationUnit {
    pub fn gamma_i(&self, config: &DgpConfig) -> f64 {
        config.gamma + config.eta * self.w + config.cov().zeta * self.x
    }

    /// (Y(1,1) − Y(1,0)) − (Y(0,1) − Y(0,0)) at the post period.
    pub fn z_contrast(&self) -> f64 {
        (self.y_post[1][1] - self.y_post[1][0]) - (self.y_post[0][1] - self.y_post[0][0])
    }

    /// (Y(1,1) − Y(0,1)) − (Y(1,0) − Y(0,0)) at the post period.
    pub fn g_contrast(&self) -> f64 {
        (self.y_post[1][1] - self.y_post[0][1]) - (self.y_post[1][0] - self.y_post[0][0])
    }

    /// ΔY(G_i, 1) without observation noise.
    pub fn potential_delta(&self) -> f64 {
        let g = self.g as usize;
        self.y_post[g][1] - self.y_pre[g][1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Population {
    pub config: DgpConfig,
    pub units: Vec<PopulationUnit>,
}

fn potential_outcomes(
    config: &DgpConfig,
    k: usize,
    w: f64,
    u: f64,
    x: f64,
) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
    let s = &config.strata[k];
    let c = config.cov();
    let gamma_i = config.gamma + config.eta * w + c.zeta * x;
    let mut pre = [[0.0; 2]; 2];
    let mut post = [[0.0; 2]; 2];
    for g in 0..2 {
        let gf = g as f64;
        pre[g][0] = s.level + config.kappa * gf;
        pre[g][1] = pre[g][0] + config.anticipation * gf;
        post[g][0] = s.level + config.kappa * gf + s.trend + c.theta * x + config.delta_g * gf + u;
        post[g][1] = post[g][0] + config.beta_z + gamma_i * gf;
    }
    (pre, post)
}

fn finish_unit(
    config: &DgpConfig,
    rng: &mut ChaCha8Rng,
    noise: Option<&Normal<f64>>,
    k: usize,
    g: bool,
    w: f64,
    u: f64,
    x: f64,
) -> PopulationUnit {
    let (mut pre, mut post) = potential_outcomes(config, k, w, u, x);
    let gi = g as usize;
    let (mut obs_pre, mut obs_post) = (pre[gi][1], post[gi][1]);
    if let Some(noise) = noise {
        if config.noise_on_potential {
            for arm in pre.iter_mut().chain(post.iter_mut()) {
                for y in arm.iter_mut() {
                    *y += noise.sample(rng);
                }
            }
            obs_pre = pre[gi][1];
            obs_post = post[gi][1];
        } else {
            obs_pre += noise.sample(rng);
            obs_post += noise.sample(rng);
        }
    }
    PopulationUnit {
        stratum: k,
        g,
        w,
        u,
        x,
        y_pre: pre,
        y_post: post,
        observed_pre: obs_pre,
        observed_post: obs_post,
    }
}

fn noise_dist(config: &DgpConfig) -> Result<Option<Normal<f64>>> {
    if config.noise_sd > 0.0 {
        Normal::new(0.0, config.noise_sd)
            .map(Some)
            .map_err(|e| FdidError::InvalidConfig(e.to_string()))
    } else {
        Ok(None)
    }
}

fn half(rng: &mut impl Rng, mean: f64) -> f64 {
    // P(+1/2) = 1/2 + mean gives E = mean
    if rng.random::<f64>() < 0.5 + mean {
        0.5
    } else {
        -0.5
    }
}

/// Draw a population of `config.n` units from `config.seed`.
pub fn generate_population(config: &DgpConfig) -> Result<Population> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let probs: Vec<f64> = config.strata.iter().map(|s| s.prob).collect();
    let strata = WeightedIndex::new(&probs).map_err(|e| FdidError::InvalidConfig(e.to_string()))?;
    let noise = noise_dist(config)?;
    let c = config.cov();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let units = (0..config.n)
        .map(|_| {
            let k = strata.sample(&mut rng);
            let e = config.strata[k].propensity;
            let g = rng.random::<f64>() < e;
            let cg = DgpConfig::centered_g(g, e);
            let w = half(&mut rng, cg * config.psi);
            let u = half(&mut rng, cg * config.phi);
            let x = if config.covariate.is_some() {
                c.mean + c.shift * g as u8 as f64 + c.sd * std_normal.sample(&mut rng)
            } else {
                0.0
            };
            finish_unit(config, &mut rng, noise.as_ref(), k, g, w, u, x)
        })
        .collect();
    Ok(Population {
        config: config.clone(),
        units,
    })
}

fn exact_count(total: f64, what: &str) -> Result<usize> {
    let r = total.round();
    if (total - r).abs() > 1e-9 || r < 0.0 {
        return Err(FdidError::InvalidConfig(format!(
            "balanced assignment needs an integral {what}, got {total}"
        )));
    }
    Ok(r as usize)
}

/// Symmetric standard-normal quantile grid of `m` points with mean exactly 0.
fn symmetric_grid(m: usize) -> Vec<f64> {
    let mut grid = vec![0.0; m];
    for j in 0..m / 2 {
        let z = normal_quantile((j as f64 + 0.5) / m as f64);
        grid[j] = z;
        grid[m - 1 - j] = -z;
    }
    grid
}

/// A population whose cell counts hit every design probability exactly:
/// `n·π_k`, `n·π_k·e_k`, and the ±1/2 counts of W and U within each
/// (stratum, group) cell must all be integers. X takes symmetric normal
/// quantiles within each cell.
pub fn generate_balanced_population(config: &DgpConfig) -> Result<Population> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = noise_dist(config)?;
    let c = config.cov();
    let mut units = Vec::with_capacity(config.n);
    for (k, s) in config.strata.iter().enumerate() {
        let nk = exact_count(config.n as f64 * s.prob, "stratum size")?;
        let n1 = exact_count(nk as f64 * s.propensity, "treated count")?;
        for (g, m) in [(true, n1), (false, nk - n1)] {
            let cg = DgpConfig::centered_g(g, s.propensity);
            let w_plus = exact_count(m as f64 * (0.5 + cg * config.psi), "W count")?;
            let u_plus = exact_count(m as f64 * (0.5 + cg * config.phi), "U count")?;
            let grid = symmetric_grid(m);
            for (j, z) in grid.into_iter().enumerate() {
                let w = if j < w_plus { 0.5 } else { -0.5 };
                // offset U so it is not a copy of W
                let u = if (j + m / 2) % m.max(1) < u_plus { 0.5 } else { -0.5 };
                let x = if config.covariate.is_some() {
                    c.mean + c.shift * g as u8 as f64 + c.sd * z
                } else {
                    0.0
                };
                units.push(finish_unit(config, &mut rng, noise.as_ref(), k, g, w, u, x));
            }
        }
    }
    Ok(Population {
        config: config.clone(),
        units,
    })
}

impl Population {
    pub fn n(&self) -> usize {
        self.units.len()
    }

    /// Observed two-period dataset; covariates are the stratum index (when
    /// there is more than one stratum) and X (when configured).
    pub fn dataset(&self) -> Result<PanelDataset> {
        let with_strata = self.config.k() > 1;
        let with_x = self.config.covariate.is_some();
        let mut names = Vec::new();
        if with_strata {
            names.push(STRATUM_COLUMN.to_string());
        }
        if with_x {
            names.push(X_COLUMN.to_string());
        }
        let width = self.n().to_string().len();
        let units = self
            .units
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let mut x = Vec::new();
                if with_strata {
                    x.push(u.stratum as f64);
                }
                if with_x {
                    x.push(u.x);
                }
                UnitRecord::new(format!("u{i:0width$}"), u.g, u.observed_pre, u.observed_post, x)
            })
            .collect();
        PanelDataset::new(units, names)
    }

    /// Finite-population analogs of every estimand, from the potential outcomes.
    ///
    /// The covariate-conditional values are only available without a
    /// continuous covariate, where conditioning on X means conditioning on the
    /// stratum.
    pub fn brute_force_estimands(&self) -> Result<EstimandSet> {
        let config = &self.config;
        let k = config.k();
        #[derive(Clone, Default)]
        struct Acc {
            n: usize,
            dy: KahanSum,
            tz: KahanSum,
            cm: KahanSum,
        }
        let mut cells = vec![[Acc::default(), Acc::default()]; k];
        let mut by_g = [Acc::default(), Acc::default()];
        let mut all_cm = KahanSum::new();
        let mut all_gz1 = KahanSum::new();
        let mut all_gz0 = KahanSum::new();
        for u in &self.units {
            let g = u.g as usize;
            let dy = u.potential_delta();
            let tz = u.y_post[g][1] - u.y_post[g][0];
            let cm = u.z_contrast();
            for acc in [&mut cells[u.stratum][g], &mut by_g[g]] {
                acc.n += 1;
                acc.dy.add(dy);
                acc.tz.add(tz);
                acc.cm.add(cm);
            }
            all_cm.add(cm);
            all_gz1.add(u.y_post[1][1] - u.y_post[0][1]);
            all_gz0.add(u.y_post[1][0] - u.y_post[0][0]);
        }
        let n = self.n() as f64;
        let (a1, a0) = (&by_g[1], &by_g[0]);
        if a1.n == 0 {
            return Err(FdidError::EmptyGroup(1));
        }
        if a0.n == 0 {
            return Err(FdidError::EmptyGroup(0));
        }
        let mean = |s: &KahanSum, m: usize| s.total() / m as f64;
        let tau_em = mean(&a1.tz, a1.n) - mean(&a0.tz, a0.n);
        let tau_cm = all_cm.total() / n;

        let mut strata = Vec::with_capacity(k);
        let mut nk = Vec::with_capacity(k);
        for (j, [c0, c1]) in cells.iter().enumerate() {
            if c0.n == 0 || c1.n == 0 {
                return Err(FdidError::NoOverlap {
                    stratum: j.to_string(),
                    n1: c1.n,
                    n0: c0.n,
                });
            }
            strata.push(StratumEstimands {
                did: mean(&c1.dy, c1.n) - mean(&c0.dy, c0.n),
                em: mean(&c1.tz, c1.n) - mean(&c0.tz, c0.n),
                cm: (c0.cm.total() + c1.cm.total()) / (c0.n + c1.n) as f64,
            });
            nk.push([c0.n, c1.n]);
        }
        let weighted = |w: &dyn Fn(usize) -> f64, f: &dyn Fn(&StratumEstimands) -> f64| -> f64 {
            let mut acc = KahanSum::new();
            for (j, s) in strata.iter().enumerate() {
                acc.add(w(j) * f(s));
            }
            acc.total()
        };
        let pi = |j: usize| (nk[j][0] + nk[j][1]) as f64 / n;
        let p1 = |j: usize| nk[j][1] as f64 / a1.n as f64;
        let p0 = |j: usize| nk[j][0] as f64 / a0.n as f64;
        let did_strata = weighted(&pi, &|s| s.did);
        let did_strata_g = [weighted(&p1, &|s| s.did), weighted(&p0, &|s| s.did)];
        let discrete = config.covariate.is_none();

        Ok(EstimandSet {
            tau_did: mean(&a1.dy, a1.n) - mean(&a0.dy, a0.n),
            tau_em,
            tau_cm,
            tau_att: mean(&a1.tz, a1.n),
            tau_g_given_z1: all_gz1.total() / n,
            tau_g_given_z0: all_gz0.total() / n,
            tau_cm_given_g: [mean(&a1.cm, a1.n), mean(&a0.cm, a0.n)],
            tau_did_strata: did_strata,
            tau_did_strata_given_g: did_strata_g,
            tau_did_x: discrete.then_some(did_strata),
            tau_em_x: discrete.then(|| weighted(&pi, &|s| s.em)),
            tau_did_x_given_g: discrete.then_some(did_strata_g),
            strata,
        })
    }
}

/// Draw a population and return it with its observed dataset.
pub fn generate(config: &DgpConfig) -> Result<(Population, PanelDataset)> {
    let pop = generate_population(config)?;
    let ds = pop.dataset()?;
    Ok((pop, ds))
}

/// Balanced counterpart of [`generate`].
pub fn generate_balanced(config: &DgpConfig) -> Result<(Population, PanelDataset)> {
    let pop = generate_balanced_population(config)?;
    let ds = pop.dataset()?;
    Ok((pop, ds))
}

/// A panel over several periods relative to a reference period 0.
///
/// ```text
/// Y_ir = α_k + κG + a·G·[r = 0] + r(T_k + θX + U_i) + [r ≥ 1](δG + λ_r(β + γ_i G))
/// ```
///
/// With periods {0, 1} and λ_1 = 1 this is the two-period model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPeriodConfig {
    pub base: DgpConfig,
    /// Relative periods; must include 0.
    pub periods: Vec<i64>,
    /// λ_r for each post period r ≥ 1, in increasing order of r; defaults to 1.
    #[serde(default)]
    pub event_profile: Vec<f64>,
}

impl MultiPeriodConfig {
    pub fn new(base: DgpConfig, periods: Vec<i64>) -> Self {
        Self {
            base,
            periods,
            event_profile: Vec::new(),
        }
    }

    fn sorted_periods(&self) -> Result<Vec<i64>> {
        let mut p = self.periods.clone();
        p.sort_unstable();
        p.dedup();
        if p.len() != self.periods.len() {
            return Err(FdidError::InvalidConfig("duplicate period".into()));
        }
        if !p.contains(&0) {
            return Err(FdidError::InvalidConfig("periods must include the reference period 0".into()));
        }
        Ok(p)
    }

    pub fn lambda(&self, r: i64) -> f64 {
        if r < 1 {
            return 0.0;
        }
        let mut post: Vec<i64> = self.periods.iter().copied().filter(|&p| p >= 1).collect();
        post.sort_unstable();
        post.iter()
            .position(|&p| p == r)
            .and_then(|j| self.event_profile.get(j).copied())
            .unwrap_or(1.0)
    }

    /// Population DID between period `r` and the reference period.
    pub fn oracle_did(&self, r: i64) -> f64 {
        let c = &self.base;
        let mut v = r as f64 * (c.trend_gap() + c.u_gap()) - c.anticipation;
        if r >= 1 {
            v += c.delta_g + self.lambda(r) * c.gamma_given_g(true);
        }
        if r == 0 {
            v = 0.0;
        }
        v
    }

    /// Population stratified DID (conditioning on the stratum) for period `r`.
    pub fn oracle_did_strata(&self, r: i64) -> f64 {
        if r == 0 {
            return 0.0;
        }
        let c = &self.base;
        let cov = c.cov();
        let mut v = r as f64 * (c.phi + cov.theta * cov.shift) - c.anticipation;
        if r >= 1 {
            let em: f64 = c
                .strata
                .iter()
                .map(|s| s.prob * (c.gamma + c.eta * (1.0 - s.propensity) * c.psi))
                .sum::<f64>()
                + cov.zeta * c.x_mean_given_g(true);
            v += c.delta_g + self.lambda(r) * em;
        }
        v
    }
}

pub fn period_label(r: i64) -> String {
    r.to_string()
}

/// Draw a long panel over `config.periods`.
pub fn generate_long(config: &MultiPeriodConfig) -> Result<LongPanel> {
    let periods = config.sorted_periods()?;
    let base = &config.base;
    // fixed potential-outcome draws: strata, G, W, U, X
    let mut noiseless = base.clone();
    noiseless.noise_sd = 0.0;
    let pop = generate_population(&noiseless)?;
    let ds = pop.dataset()?;
    let mut rng = ChaCha8Rng::seed_from_u64(base.seed);
    rng.set_stream(1);
    let noise = noise_dist(base)?;
    let c = base.cov();
    let mut rows = Vec::with_capacity(pop.n() * periods.len());
    for (u, rec) in pop.units.iter().zip(ds.units()) {
        let s = &base.strata[u.stratum];
        let gf = u.g as u8 as f64;
        let gamma_i = u.gamma_i(base);
        for &r in &periods {
            let rf = r as f64;
            let mut y = s.level + base.kappa * gf + rf * (s.trend + c.theta * u.x + u.u);
            if r == 0 {
                y += base.anticipation * gf;
            }
            if r >= 1 {
                y += base.delta_g * gf + config.lambda(r) * (base.beta_z + gamma_i * gf);
            }
            if let Some(noise) = &noise {
                y += noise.sample(&mut rng);
            }
            rows.push(LongRow {
                id: rec.id.clone(),
                time_label: period_label(r),
                y,
                g: u.g,
                x: rec.x.clone(),
            });
        }
    }
    Ok(LongPanel {
        rows,
        covariate_names: ds.covariate_names().to_vec(),
    })
}
