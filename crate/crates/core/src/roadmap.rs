//! Checks the identification results against the closed-form oracle over a
//! battery of regimes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dgp::{closed_form_estimands, Assumptions, DgpConfig, EstimandSet};
use crate::error::{FdidError, Result};

/// Absolute tolerance for oracle equalities.
pub const ORACLE_TOL: f64 = 1e-10;

/// A battery entry: a configuration and the edges expected to break in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub name: String,
    pub config: DgpConfig,
    #[serde(default)]
    pub expect_unequal: Vec<String>,
}

/// The shipped battery: clean, each added assumption, each violation alone.
pub const DEFAULT_BATTERY: &str = include_str!("../data/default_battery.json");

pub fn default_battery() -> Vec<Regime> {
    serde_json::from_str(DEFAULT_BATTERY).expect("shipped battery parses")
}

pub fn parse_battery(text: &str) -> Result<Vec<Regime>> {
    let battery: Vec<Regime> = serde_json::from_str(text)?;
    for r in &battery {
        r.config.validate()?;
        for e in &r.expect_unequal {
            if !EDGES.iter().any(|edge| edge.name == *e) {
                return Err(FdidError::InvalidConfig(format!(
                    "regime `{}`: unknown edge `{e}`",
                    r.name
                )));
            }
        }
    }
    Ok(battery)
}

/// One implication: `lhs = rhs` whenever `premise` holds.
pub struct Edge {
    pub name: &'static str,
    pub lhs: &'static str,
    pub rhs: &'static str,
    pub premise: &'static str,
    holds: fn(&Assumptions) -> bool,
}

pub const EDGES: [Edge; 9] = [
    Edge {
        name: "did-em",
        lhs: "tau_did",
        rhs: "tau_em",
        premise: "NA+PT",
        holds: |a| a.no_anticipation && a.parallel_trends,
    },
    Edge {
        name: "em-att",
        lhs: "tau_em",
        rhs: "tau_att",
        premise: "ER-Z",
        holds: |a| a.exclusion_z,
    },
    Edge {
        name: "did-att",
        lhs: "tau_did",
        rhs: "tau_att",
        premise: "NA+PT+ER-Z",
        holds: |a| a.no_anticipation && a.parallel_trends && a.exclusion_z,
    },
    Edge {
        name: "em-cm",
        lhs: "tau_em",
        rhs: "tau_cm",
        premise: "NA+PT+FPT",
        holds: |a| a.no_anticipation && a.parallel_trends && a.factorial_parallel_trends,
    },
    Edge {
        name: "did-cm",
        lhs: "tau_did",
        rhs: "tau_cm",
        premise: "NA+PT+FPT",
        holds: |a| a.no_anticipation && a.parallel_trends && a.factorial_parallel_trends,
    },
    Edge {
        name: "cm-g",
        lhs: "tau_cm",
        rhs: "tau_g_given_z1",
        premise: "ER-G",
        holds: |a| a.exclusion_g,
    },
    Edge {
        name: "did-g",
        lhs: "tau_did",
        rhs: "tau_g_given_z1",
        premise: "NA+PT+FPT+ER-G",
        holds: |a| {
            a.no_anticipation && a.parallel_trends && a.factorial_parallel_trends && a.exclusion_g
        },
    },
    Edge {
        name: "didx-emx",
        lhs: "tau_did_x",
        rhs: "tau_em_x",
        premise: "NA+CPT",
        holds: |a| a.no_anticipation && a.conditional_parallel_trends,
    },
    Edge {
        name: "didx-cm",
        lhs: "tau_did_x",
        rhs: "tau_cm",
        premise: "NA+CPT+CFPT",
        holds: |a| {
            a.no_anticipation
                && a.conditional_parallel_trends
                && a.conditional_factorial_parallel_trends
        },
    },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    /// Premise holds and the equality holds.
    #[serde(rename = "pass")]
    Pass,
    /// Premise holds and the equality does not, or a predicted inequality did not appear.
    #[serde(rename = "FAIL")]
    Fail,
    /// Premise fails and the regime predicts an inequality, which appeared.
    #[serde(rename = "predicted-fail")]
    PredictedFail,
    /// Premise fails and nothing is predicted.
    #[serde(rename = "not-implied")]
    NotImplied,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::PredictedFail => "predicted-fail",
            Status::NotImplied => "not-implied",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoadmapRow {
    pub regime: String,
    pub edge: String,
    pub lhs: String,
    pub rhs: String,
    pub premise: String,
    pub premise_holds: bool,
    pub lhs_value: f64,
    pub rhs_value: f64,
    pub gap: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeSummary {
    pub regime: String,
    pub assumptions: Assumptions,
    pub estimands: EstimandSet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoadmapReport {
    pub rows: Vec<RoadmapRow>,
    pub regimes: Vec<RegimeSummary>,
}

impl RoadmapReport {
    pub fn n_failed(&self) -> usize {
        self.rows.iter().filter(|r| r.status == Status::Fail).count()
    }

    pub fn all_passed(&self) -> bool {
        self.n_failed() == 0
    }

    pub fn row(&self, regime: &str, edge: &str) -> Option<&RoadmapRow> {
        self.rows.iter().find(|r| r.regime == regime && r.edge == edge)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "regime", "edge", "lhs", "rhs", "premise", "premise_holds", "lhs_value", "rhs_value",
            "gap", "status",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.regime.clone(),
                r.edge.clone(),
                r.lhs.clone(),
                r.rhs.clone(),
                r.premise.clone(),
                r.premise_holds.to_string(),
                r.lhs_value.to_string(),
                r.rhs_value.to_string(),
                r.gap.to_string(),
                r.status.as_str().to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| FdidError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    /// Fixed-width table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<18} {:<9} {:<26} {:<15} {:>12} status",
            "regime", "edge", "equality", "premise", "gap"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<18} {:<9} {:<26} {:<15} {:>12.3e} {}",
                r.regime,
                r.edge,
                format!("{} = {}", r.lhs, r.rhs),
                r.premise,
                r.gap,
                r.status.as_str()
            );
        }
        out
    }
}

/// Evaluate every edge in every regime against the closed-form oracle.
pub fn verify_roadmap(battery: &[Regime]) -> Result<RoadmapReport> {
    let mut rows = Vec::new();
    let mut regimes = Vec::new();
    for regime in battery {
        regime.config.validate()?;
        let est = closed_form_estimands(&regime.config);
        let assumptions = regime.config.assumptions();
        for edge in &EDGES {
            let lhs = est.get(edge.lhs).expect("closed form has every estimand");
            let rhs = est.get(edge.rhs).expect("closed form has every estimand");
            let gap = lhs - rhs;
            let premise_holds = (edge.holds)(&assumptions);
            let predicted = regime.expect_unequal.iter().any(|e| e == edge.name);
            let equal = gap.abs() <= ORACLE_TOL;
            let status = if premise_holds {
                if equal {
                    Status::Pass
                } else {
                    Status::Fail
                }
            } else if predicted {
                if equal {
                    Status::Fail
                } else {
                    Status::PredictedFail
                }
            } else {
                Status::NotImplied
            };
            rows.push(RoadmapRow {
                regime: regime.name.clone(),
                edge: edge.name.to_string(),
                lhs: edge.lhs.to_string(),
                rhs: edge.rhs.to_string(),
                premise: edge.premise.to_string(),
                premise_holds,
                lhs_value: lhs,
                rhs_value: rhs,
                gap,
                status,
            });
        }
        regimes.push(RegimeSummary {
            regime: regime.name.clone(),
            assumptions,
            estimands: est,
        });
    }
    Ok(RoadmapReport { rows, regimes })
}
