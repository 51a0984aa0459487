use std::collections::BTreeMap;

use serde::Serialize;

use crate::scenario::{Mode, Scenario};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub mode: Mode,
    /// The scenario after command-line overrides.
    pub scenario: Scenario,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSummary>,
    pub sites: Vec<SiteReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_measure: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level_curve: Option<LevelSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemmas: Option<LemmaSummary>,
    pub checks: BTreeMap<String, bool>,
    pub timing: Timing,
}

impl RunReport {
    pub fn all_checks_pass(&self) -> bool {
        self.checks.values().all(|&v| v)
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks.iter().filter(|(_, &v)| !v).map(|(k, _)| k.as_str()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// The report with `timing` zeroed, for reproducibility comparisons.
    pub fn to_json_without_timing(&self) -> String {
        let mut r = self.clone();
        r.timing = Timing::default();
        r.to_json()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GridSummary {
    pub nodes: usize,
    pub spacing: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SiteReport {
    pub index: usize,
    pub position: Vec<f64>,
    pub weight: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_mass: Option<f64>,
    pub mass: f64,
    /// All 4-connected components of the cell's nodes.
    pub components: usize,
    /// Components that reach more than `2h` from every interface.
    pub resolved_components: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complement_components: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolved_complement_components: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convex: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub starlike: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverSummary {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub tol: f64,
    pub objective_initial: f64,
    pub objective_final: f64,
    pub objective_monotone: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSummary {
    pub samples: usize,
    pub y_step: f64,
    pub truncated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inflection_y: Option<f64>,
    /// Share of interior samples where the analytic second derivative
    /// matches second differences of the traced curve.
    pub derivative_agreement: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessSummary {
    pub vertices: Vec<[f64; 2]>,
    pub target_site: usize,
    pub expected_components: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chord: Option<[[f64; 2]; 2]>,
    pub chord_roots: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inflection_y: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct LemmaSummary {
    pub circles_tested: usize,
    pub circle_failures: usize,
    pub antipode_pairs: usize,
    pub antipode_premises: usize,
    pub antipode_violations: usize,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timing {
    pub total_ms: f64,
}
