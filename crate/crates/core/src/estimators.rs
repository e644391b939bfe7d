//! Unadjusted, stratified, and subgroup-weighted DID estimators.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{FdidError, Result};
use crate::numeric::KahanSum;
use crate::panel::{CrossSection, PanelDataset};

/// Which estimand a number estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EstimandLabel {
    Did,
    DidX,
    DidGivenG1,
    DidGivenG0,
    /// τ̂(x) at x = 0 on the original covariate scale (uncentered β̂_G).
    DidXAtOrigin,
    Stratum,
    /// Placebo DID over a pre-event window.
    Placebo,
}

impl EstimandLabel {
    pub fn given_g(g: bool) -> Self {
        if g {
            EstimandLabel::DidGivenG1
        } else {
            EstimandLabel::DidGivenG0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumDetail {
    pub key: String,
    pub point: f64,
    pub n1: usize,
    pub n0: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub estimand: EstimandLabel,
    pub point: f64,
    pub n_used: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strata: Option<Vec<StratumDetail>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// What to do with a stratum lacking one of the two groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmptyStratumPolicy {
    #[default]
    Error,
    /// Drop it, renormalize the remaining weights, and record a warning.
    Drop,
}

/// Assignment of units to discrete strata.
#[derive(Debug, Clone, PartialEq)]
pub struct Strata {
    labels: Vec<String>,
    assignment: Vec<usize>,
}

impl Strata {
    /// Build strata from per-unit keys; strata are ordered by first appearance.
    pub fn from_keys<S: AsRef<str>>(keys: &[S]) -> Self {
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        let mut labels = Vec::new();
        let assignment = keys
            .iter()
            .map(|k| {
                let k = k.as_ref();
                *index.entry(k).or_insert_with(|| {
                    labels.push(k.to_string());
                    labels.len() - 1
                })
            })
            .collect();
        Self { labels, assignment }
    }

    /// A single stratum holding all `n` units.
    pub fn single(n: usize) -> Self {
        Self {
            labels: vec!["all".into()],
            assignment: vec![0; n],
        }
    }

    /// Cartesian-product strata over the distinct values of the named covariates.
    /// Strata are ordered by their key values.
    pub fn from_columns(cs: &CrossSection, names: &[String]) -> Result<Self> {
        if names.is_empty() {
            return Ok(Self::single(cs.n()));
        }
        let cols = names
            .iter()
            .map(|name| {
                cs.covariate_names
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| FdidError::MissingColumn(name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut keys: Vec<(Vec<u64>, usize)> = (0..cs.n())
            .map(|i| (cols.iter().map(|&j| ordered_bits(cs.x[j][i])).collect(), i))
            .collect();
        keys.sort();
        let mut labels = Vec::new();
        let mut assignment = vec![0; cs.n()];
        let mut prev: Option<&Vec<u64>> = None;
        for (key, i) in &keys {
            if prev != Some(key) {
                let label = cols
                    .iter()
                    .zip(names)
                    .map(|(&j, name)| format!("{name}={}", cs.x[j][*i]))
                    .collect::<Vec<_>>()
                    .join("|");
                labels.push(label);
                prev = Some(key);
            }
            assignment[*i] = labels.len() - 1;
        }
        Ok(Self { labels, assignment })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }
}

/// Monotone map from f64 to u64 so that integer order matches numeric order.
fn ordered_bits(v: f64) -> u64 {
    let v = if v == 0.0 { 0.0 } else { v };
    let b = v.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

/// Per-group compensated sums of ΔY.
#[derive(Debug, Clone, Copy, Default)]
struct GroupSums {
    sum1: KahanSum,
    sum0: KahanSum,
    n1: usize,
    n0: usize,
}

impl GroupSums {
    fn push(&mut self, g: bool, d: f64) {
        if g {
            self.sum1.add(d);
            self.n1 += 1;
        } else {
            self.sum0.add(d);
            self.n0 += 1;
        }
    }

    fn did(&self) -> f64 {
        self.sum1.total() / self.n1 as f64 - self.sum0.total() / self.n0 as f64
    }
}

/// Difference in mean ΔY between the G=1 and G=0 groups.
pub fn did_cs(cs: &CrossSection) -> Result<EstimateResult> {
    let mut sums = GroupSums::default();
    for (&g, &d) in cs.g.iter().zip(&cs.delta) {
        sums.push(g, d);
    }
    if sums.n1 == 0 {
        return Err(FdidError::EmptyGroup(1));
    }
    if sums.n0 == 0 {
        return Err(FdidError::EmptyGroup(0));
    }
    Ok(EstimateResult {
        estimand: EstimandLabel::Did,
        point: sums.did(),
        n_used: cs.n(),
        strata: None,
        warnings: Vec::new(),
    })
}

pub fn did(dataset: &PanelDataset) -> Result<EstimateResult> {
    did_cs(&dataset.cross_section())
}

/// Weights for the stratum DIDs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Weighting {
    /// Proportion of all units.
    Marginal,
    /// Proportion of units within G = g.
    WithinGroup(bool),
}

fn stratified_cs(
    cs: &CrossSection,
    strata: &Strata,
    weighting: Weighting,
    policy: EmptyStratumPolicy,
) -> Result<EstimateResult> {
    if strata.assignment.len() != cs.n() {
        return Err(FdidError::InvalidArgument(format!(
            "strata cover {} units, dataset has {}",
            strata.assignment.len(),
            cs.n()
        )));
    }
    cs.check_groups()?;
    let mut sums = vec![GroupSums::default(); strata.len()];
    for ((&k, &g), &d) in strata.assignment.iter().zip(&cs.g).zip(&cs.delta) {
        sums[k].push(g, d);
    }

    let mut warnings = Vec::new();
    let mut kept = Vec::with_capacity(strata.len());
    for (k, s) in sums.iter().enumerate() {
        if s.n1 + s.n0 == 0 {
            continue;
        }
        if s.n1 == 0 || s.n0 == 0 {
            match policy {
                EmptyStratumPolicy::Error => {
                    return Err(FdidError::NoOverlap {
                        stratum: strata.labels[k].clone(),
                        n1: s.n1,
                        n0: s.n0,
                    })
                }
                EmptyStratumPolicy::Drop => {
                    warnings.push(format!(
                        "dropped stratum `{}` (n1 = {}, n0 = {})",
                        strata.labels[k], s.n1, s.n0
                    ));
                    continue;
                }
            }
        }
        kept.push(k);
    }
    if kept.is_empty() {
        return Err(FdidError::NoOverlap {
            stratum: "all strata".into(),
            n1: 0,
            n0: 0,
        });
    }

    let mass = |s: &GroupSums| -> usize {
        match weighting {
            Weighting::Marginal => s.n1 + s.n0,
            Weighting::WithinGroup(true) => s.n1,
            Weighting::WithinGroup(false) => s.n0,
        }
    };
    let total: usize = kept.iter().map(|&k| mass(&sums[k])).sum();
    let mut point = KahanSum::new();
    let mut detail = Vec::with_capacity(kept.len());
    for &k in &kept {
        let s = &sums[k];
        let weight = mass(s) as f64 / total as f64;
        let tau = s.did();
        point.add(weight * tau);
        detail.push(StratumDetail {
            key: strata.labels[k].clone(),
            point: tau,
            n1: s.n1,
            n0: s.n0,
            weight,
        });
    }
    let estimand = match weighting {
        Weighting::Marginal => EstimandLabel::DidX,
        Weighting::WithinGroup(g) => EstimandLabel::given_g(g),
    };
    Ok(EstimateResult {
        estimand,
        point: point.total(),
        n_used: kept.iter().map(|&k| sums[k].n1 + sums[k].n0).sum(),
        strata: Some(detail),
        warnings,
    })
}

/// Σ_k π_k · DID(k) with π_k the sample share of stratum k.
pub fn did_stratified_cs(
    cs: &CrossSection,
    strata: &Strata,
    policy: EmptyStratumPolicy,
) -> Result<EstimateResult> {
    stratified_cs(cs, strata, Weighting::Marginal, policy)
}

pub fn did_stratified(
    dataset: &PanelDataset,
    strata: &Strata,
    policy: EmptyStratumPolicy,
) -> Result<EstimateResult> {
    did_stratified_cs(&dataset.cross_section(), strata, policy)
}

/// Stratum DIDs averaged over the strata distribution within `{i: G_i = g}`.
pub fn did_stratified_given_g_cs(
    cs: &CrossSection,
    strata: &Strata,
    g: bool,
    policy: EmptyStratumPolicy,
) -> Result<EstimateResult> {
    stratified_cs(cs, strata, Weighting::WithinGroup(g), policy)
}

pub fn did_stratified_given_g(
    dataset: &PanelDataset,
    strata: &Strata,
    g: bool,
    policy: EmptyStratumPolicy,
) -> Result<EstimateResult> {
    did_stratified_given_g_cs(&dataset.cross_section(), strata, g, policy)
}

/// The unadjusted DID next to the stratified DID; they generally differ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonAggregation {
    pub did: f64,
    pub did_x: f64,
    pub gap: f64,
}

pub fn non_aggregation_demo_cs(cs: &CrossSection, strata: &Strata) -> Result<NonAggregation> {
    let did = did_cs(cs)?.point;
    let did_x = did_stratified_cs(cs, strata, EmptyStratumPolicy::Error)?.point;
    Ok(NonAggregation {
        did,
        did_x,
        gap: did - did_x,
    })
}

pub fn non_aggregation_demo(dataset: &PanelDataset, strata: &Strata) -> Result<NonAggregation> {
    non_aggregation_demo_cs(&dataset.cross_section(), strata)
}
