//! Outcome regressions on ΔY and their two-way fixed-effects counterparts.
//!
//! The interacted regression is ΔY on `(1, G, X, G·X)`, the plain regression
//! is ΔY on `(1, G, X)`. TWFE fits the same models on long data with unit and
//! time effects absorbed by the within transformation.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{FdidError, Result};
use crate::estimators::did_cs;
use crate::linalg::{least_squares, Design, RegressionFit};
use crate::numeric::KahanSum;
use crate::panel::{CrossSection, LongPanel, PanelDataset};

pub const BETA_0: &str = "beta_0";
pub const BETA_G: &str = "beta_G";

pub fn beta_x(name: &str) -> String {
    format!("beta_X[{name}]")
}

pub fn beta_gx(name: &str) -> String {
    format!("beta_GX[{name}]")
}

/// Where covariates are centered before the interactions are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Centering {
    /// Original scale.
    None,
    /// Full-sample mean x̄.
    #[default]
    SampleMean,
    /// Mean of X within `{i: G_i = g}`; β_G then targets the subgroup average.
    GroupMean(bool),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Interacted,
    Plain,
}

/// The DID implied by a fitted outcome regression.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DidFromRegression {
    pub beta_g: f64,
    /// Interaction slopes; all zero for the plain regression.
    pub beta_gx: Vec<f64>,
    /// The point covariates were centered at (zeros when uncentered).
    pub xbar_used: Vec<f64>,
    pub centered: bool,
    /// Sample average of τ̂(X_i).
    pub tau_did_x: f64,
}

impl DidFromRegression {
    /// τ̂(x) = β_G + β_GX'(x − c) with x on the original scale.
    pub fn tau_at(&self, x: &[f64]) -> f64 {
        let mut acc = KahanSum::new();
        acc.add(self.beta_g);
        for ((b, xi), c) in self.beta_gx.iter().zip(x).zip(&self.xbar_used) {
            acc.add(b * (xi - c));
        }
        acc.total()
    }
}

fn centering_point(cs: &CrossSection, centering: Centering) -> Result<Vec<f64>> {
    Ok(match centering {
        Centering::None => vec![0.0; cs.p()],
        Centering::SampleMean => cs.covariate_means(),
        Centering::GroupMean(g) => {
            let idx: Vec<usize> = (0..cs.n()).filter(|&i| cs.g[i] == g).collect();
            if idx.is_empty() {
                return Err(FdidError::EmptyGroup(g as u8));
            }
            cs.resample(&idx).covariate_means()
        }
    })
}

fn build_design(cs: &CrossSection, center: &[f64], interacted: bool) -> Result<Design> {
    let n = cs.n();
    let gcol: Vec<f64> = cs.g.iter().map(|&g| g as u8 as f64).collect();
    let mut d = Design::new(n);
    d.push(BETA_0, vec![1.0; n])?;
    d.push(BETA_G, gcol.clone())?;
    let centered: Vec<Vec<f64>> = cs
        .x
        .iter()
        .zip(center)
        .map(|(c, m)| c.iter().map(|v| v - m).collect())
        .collect();
    for (name, col) in cs.covariate_names.iter().zip(&centered) {
        d.push(beta_x(name), col.clone())?;
    }
    if interacted {
        for (name, col) in cs.covariate_names.iter().zip(&centered) {
            d.push(beta_gx(name), col.iter().zip(&gcol).map(|(x, g)| x * g).collect())?;
        }
    }
    Ok(d)
}

/// On (1, G) the least-squares solution is the G=0 mean and the mean
/// difference; set it from the group sums so β_G matches [`did_cs`] exactly.
fn use_group_means(cs: &CrossSection, fit: &mut RegressionFit) -> Result<()> {
    let mut sum0 = KahanSum::new();
    let mut n0 = 0usize;
    for (&g, &d) in cs.g.iter().zip(&cs.delta) {
        if !g {
            sum0.add(d);
            n0 += 1;
        }
    }
    let b0 = sum0.total() / n0 as f64;
    let bg = did_cs(cs)?.point;
    fit.coefficients = vec![b0, bg];
    for ((r, &g), &d) in fit.residuals.iter_mut().zip(&cs.g).zip(&cs.delta) {
        *r = d - b0 - if g { bg } else { 0.0 };
    }
    Ok(())
}

/// ΔY on (1, G, X, G·X) with covariates centered per `centering`.
///
/// With no covariates this is the same fit as [`ols_plain_cs`].
pub fn ols_interacted_cs(
    cs: &CrossSection,
    centering: Centering,
) -> Result<(RegressionFit, DidFromRegression)> {
    cs.check_groups()?;
    let center = centering_point(cs, centering)?;
    let design = build_design(cs, &center, true)?;
    let mut fit = least_squares(&design, &cs.delta)?;
    if cs.p() == 0 {
        use_group_means(cs, &mut fit)?;
    }
    let p = cs.p();
    let beta_g = fit.coefficients[1];
    let beta_gx = fit.coefficients[2 + p..2 + 2 * p].to_vec();
    let xbar = cs.covariate_means();
    let mut tau = KahanSum::new();
    tau.add(beta_g);
    for ((b, m), c) in beta_gx.iter().zip(&xbar).zip(&center) {
        tau.add(b * (m - c));
    }
    let did = DidFromRegression {
        beta_g,
        beta_gx,
        xbar_used: center,
        centered: centering != Centering::None,
        tau_did_x: tau.total(),
    };
    Ok((fit, did))
}

pub fn ols_interacted(
    dataset: &PanelDataset,
    center: bool,
) -> Result<(RegressionFit, DidFromRegression)> {
    let centering = if center {
        Centering::SampleMean
    } else {
        Centering::None
    };
    ols_interacted_cs(&dataset.cross_section(), centering)
}

/// ΔY on (1, G, X); τ̂(x) is the constant β̃_G.
pub fn ols_plain_cs(cs: &CrossSection) -> Result<(RegressionFit, DidFromRegression)> {
    cs.check_groups()?;
    let design = build_design(cs, &vec![0.0; cs.p()], false)?;
    let mut fit = least_squares(&design, &cs.delta)?;
    if cs.p() == 0 {
        use_group_means(cs, &mut fit)?;
    }
    let beta_g = fit.coefficients[1];
    let did = DidFromRegression {
        beta_g,
        beta_gx: vec![0.0; cs.p()],
        xbar_used: vec![0.0; cs.p()],
        centered: false,
        tau_did_x: beta_g,
    };
    Ok((fit, did))
}

pub fn ols_plain(dataset: &PanelDataset) -> Result<(RegressionFit, DidFromRegression)> {
    ols_plain_cs(&dataset.cross_section())
}

/// Two-way fixed-effects fit on long data.
#[derive(Debug, Clone, PartialEq)]
pub struct TwfeFit {
    pub variant: Variant,
    /// Fit on the within-transformed rows; the first coefficient is the
    /// post-period time effect, the rest are named like the ΔY regressions.
    pub fit: RegressionFit,
}

impl TwfeFit {
    /// Coefficients on the post-period interactions (time effect excluded).
    pub fn event_coefficients(&self) -> Vec<(String, f64)> {
        self.fit
            .names
            .iter()
            .zip(&self.fit.coefficients)
            .skip(1)
            .map(|(n, c)| (n.clone(), *c))
            .collect()
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.fit.coefficient(name)
    }
}

/// Least squares for `Y_it = b_G G_i·1{post} + b_X X_i·1{post} [+ b_GX G_i X_i·1{post}] + α_i + ξ_t + ε`.
///
/// Rows at labels other than `pre_label`/`post_label` are ignored. Unit effects
/// are removed by demeaning within unit; the time effect is the demeaned post
/// dummy.
pub fn twfe(
    long: &LongPanel,
    pre_label: &str,
    post_label: &str,
    variant: Variant,
) -> Result<TwfeFit> {
    if pre_label == post_label {
        return Err(FdidError::ReferencePeriodReuse(post_label.to_string()));
    }
    let p = long.covariate_names.len();
    let rows: Vec<_> = long
        .rows
        .iter()
        .filter(|r| r.time_label == pre_label || r.time_label == post_label)
        .collect();

    // unit index and balance check
    let mut unit_of: HashMap<&str, usize> = HashMap::new();
    let mut seen: Vec<[bool; 2]> = Vec::new();
    let mut static_of: Vec<(bool, &[f64])> = Vec::new();
    let mut order = Vec::new();
    for r in &rows {
        let next = unit_of.len();
        let u = *unit_of.entry(r.id.as_str()).or_insert_with(|| {
            seen.push([false; 2]);
            static_of.push((r.g, &r.x));
            order.push(r.id.as_str());
            next
        });
        let t = (r.time_label == post_label) as usize;
        if std::mem::replace(&mut seen[u][t], true) {
            return Err(FdidError::DuplicatePeriod {
                id: r.id.clone(),
                label: r.time_label.clone(),
            });
        }
        let (g, x) = static_of[u];
        if g != r.g {
            return Err(FdidError::InconsistentStatic {
                id: r.id.clone(),
                column: "g".into(),
            });
        }
        if let Some(j) = (0..p).find(|&j| x[j].to_bits() != r.x[j].to_bits()) {
            return Err(FdidError::InconsistentStatic {
                id: r.id.clone(),
                column: long.covariate_names[j].clone(),
            });
        }
    }
    for (u, s) in seen.iter().enumerate() {
        if let Some(t) = s.iter().position(|b| !b) {
            return Err(FdidError::UnbalancedUnit {
                id: order[u].to_string(),
                label: if t == 0 { pre_label } else { post_label }.to_string(),
            });
        }
    }

    // raw regressors per row, then demean within unit
    let mut names = vec!["time[post]".to_string(), BETA_G.to_string()];
    names.extend(long.covariate_names.iter().map(|n| beta_x(n)));
    if variant == Variant::Interacted {
        names.extend(long.covariate_names.iter().map(|n| beta_gx(n)));
    }
    let k = names.len();
    let m = rows.len();
    let mut cols = vec![vec![0.0; m]; k];
    let mut y = vec![0.0; m];
    for (i, r) in rows.iter().enumerate() {
        let d = (r.time_label == post_label) as u8 as f64;
        let g = r.g as u8 as f64;
        y[i] = r.y;
        cols[0][i] = d;
        cols[1][i] = g * d;
        for j in 0..p {
            cols[2 + j][i] = r.x[j] * d;
            if variant == Variant::Interacted {
                cols[2 + p + j][i] = g * r.x[j] * d;
            }
        }
    }
    let units = unit_of.len();
    let mut demean = |v: &mut Vec<f64>| {
        let mut sums = vec![0.0; units];
        for (r, val) in rows.iter().zip(v.iter()) {
            sums[unit_of[r.id.as_str()]] += val;
        }
        for (r, val) in rows.iter().zip(v.iter_mut()) {
            *val -= sums[unit_of[r.id.as_str()]] / 2.0;
        }
    };
    demean(&mut y);
    cols.iter_mut().for_each(&mut demean);
    let design = Design::from_columns(names.into_iter().zip(cols).collect())?;
    let fit = least_squares(&design, &y)?;
    Ok(TwfeFit { variant, fit })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceRow {
    pub comparison: String,
    pub max_abs_gap: f64,
    pub max_rel_gap: f64,
}

/// OLS vs TWFE coefficient agreement plus the centering identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub rows: Vec<EquivalenceRow>,
    pub beta_g_centered: f64,
    pub beta_g_uncentered: f64,
    /// β_G(uncentered) − β_G(centered)
    pub centering_gap: f64,
    /// −β_GX'x̄, the gap predicted by the affine reparameterization.
    pub predicted_centering_gap: f64,
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn compare(label: &str, ols: &RegressionFit, twfe: &TwfeFit) -> Result<EquivalenceRow> {
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    for (name, t) in twfe.event_coefficients() {
        let o = ols.coefficient(&name).ok_or_else(|| {
            FdidError::InvalidArgument(format!("coefficient {name} missing from OLS fit"))
        })?;
        max_abs = max_abs.max((o - t).abs());
        max_rel = max_rel.max(relative_gap(o, t));
    }
    Ok(EquivalenceRow {
        comparison: label.to_string(),
        max_abs_gap: max_abs,
        max_rel_gap: max_rel,
    })
}

pub fn equivalence_report(dataset: &PanelDataset) -> Result<EquivalenceReport> {
    let cs = dataset.cross_section();
    let (ols_i, _) = ols_interacted_cs(&cs, Centering::None)?;
    let (ols_ii, _) = ols_plain_cs(&cs)?;
    let long = crate::panel::wide_to_long(dataset, "pre", "post");
    let twfe_i = twfe(&long, "pre", "post", Variant::Interacted)?;
    let twfe_ii = twfe(&long, "pre", "post", Variant::Plain)?;
    let (_, centered) = ols_interacted_cs(&cs, Centering::SampleMean)?;
    let uncentered_g = ols_i.coefficients[1];
    let p = cs.p();
    let xbar = cs.covariate_means();
    let gx = &ols_i.coefficients[2 + p..2 + 2 * p];
    let predicted = -gx.iter().zip(&xbar).map(|(b, m)| b * m).sum::<f64>();
    Ok(EquivalenceReport {
        rows: vec![
            compare("OLS(i) vs TWFE(i)", &ols_i, &twfe_i)?,
            compare("OLS(ii) vs TWFE(ii)", &ols_ii, &twfe_ii)?,
        ],
        beta_g_centered: centered.beta_g,
        beta_g_uncentered: uncentered_g,
        centering_gap: uncentered_g - centered.beta_g,
        predicted_centering_gap: predicted,
    })
}

/// Coefficient table for JSON output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub variant: Variant,
    pub centered: bool,
    pub coefficients: Vec<NamedValue>,
    pub xbar_used: Vec<f64>,
    pub tau_did_x: f64,
    pub n: usize,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

impl FitSummary {
    pub fn new(variant: Variant, fit: &RegressionFit, did: &DidFromRegression) -> Self {
        Self {
            variant,
            centered: did.centered,
            coefficients: fit
                .names
                .iter()
                .zip(&fit.coefficients)
                .map(|(n, v)| NamedValue {
                    name: n.clone(),
                    value: *v,
                })
                .collect(),
            xbar_used: did.xbar_used.clone(),
            tau_did_x: did.tau_did_x,
            n: fit.n,
            rank: fit.rank,
        }
    }
}
