//! Evaluation report assembly: one JSON document per run plus a flat
//! comparison-table row.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::aecr::AecrReport;
use crate::css::CssReport;
use crate::dcc::DccReport;
use crate::factor::{FactorTestResult, GroupLabel, HmlFactor};

/// Bumped on any backward-incompatible report change.
pub const SCHEMA_VERSION: u32 = 1;

/// Run parameters and input fingerprints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub graph_variant: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<u64>,
    pub epsilon: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub alpha: f64,
    pub seed: u64,
    /// SHA-256 of each input file, keyed by role.
    pub dataset_hashes: BTreeMap<String, String>,
}

/// One indicator's outcome. Not-applicable mirrors comparison tables that
/// print 0 for indicators a graph variant cannot support.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum IndicatorOutcome<T> {
    Computed { result: T },
    NotApplicable { reason: String },
    Failed { error: String },
    Skipped,
}

impl<T> IndicatorOutcome<T> {
    /// Completed means computed, not applicable, or not requested.
    pub fn completed(&self) -> bool {
        !matches!(self, IndicatorOutcome::Failed { .. })
    }

    /// Table cell: the indicator scalar, 0 when not applicable, empty
    /// (None) when failed or skipped.
    fn cell(&self, value: impl Fn(&T) -> f64) -> Option<f64> {
        match self {
            IndicatorOutcome::Computed { result } => Some(value(result)),
            IndicatorOutcome::NotApplicable { .. } => Some(0.0),
            IndicatorOutcome::Failed { .. } | IndicatorOutcome::Skipped => None,
        }
    }
}

/// Construction-side factor summary: the grouping manifest without the
/// full factor series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorConstruction {
    pub max_edges: usize,
    pub sample_exhausted: bool,
    pub high: Vec<(String, String)>,
    pub medium: Vec<(String, String)>,
    pub low: Vec<(String, String)>,
}

/// Factor indicator section: test regressions plus construction manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorSection {
    pub delta_beta: f64,
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub group_sizes: Vec<usize>,
    /// Test pairs in ascending edge-count order; groups follow
    /// `group_sizes` boundaries.
    pub test_sample: Vec<(String, String)>,
    pub test_sample_exhausted: bool,
    pub construction: FactorConstruction,
}

impl FactorSection {
    pub fn new(factor: &HmlFactor, test: FactorTestResult) -> Self {
        let members = |label: GroupLabel| -> Vec<(String, String)> {
            factor
                .groups
                .iter()
                .filter(|(_, l)| **l == label)
                .map(|(p, _)| p.clone())
                .collect()
        };
        FactorSection {
            delta_beta: test.delta_beta,
            betas: test.betas,
            alphas: test.alphas,
            group_sizes: test.group_sizes,
            test_sample: test.sample,
            test_sample_exhausted: test.sample_exhausted,
            construction: FactorConstruction {
                max_edges: factor.max_edges,
                sample_exhausted: factor.sample_exhausted,
                high: members(GroupLabel::High),
                medium: members(GroupLabel::Medium),
                low: members(GroupLabel::Low),
            },
        }
    }
}

/// Full evaluation report for one graph set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FriReport {
    pub schema_version: u32,
    pub metadata: ReportMetadata,
    pub css: IndicatorOutcome<CssReport>,
    pub aecr: IndicatorOutcome<AecrReport>,
    pub factor: IndicatorOutcome<FactorSection>,
    pub dcc: IndicatorOutcome<DccReport>,
    /// Wall seconds per stage; absent by default so reruns with different
    /// parallelism stay byte-identical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<BTreeMap<String, f64>>,
}

/// One comparison-table row: the four indicator scalars for a variant.
/// Not-applicable prints 0; failed or skipped prints an empty cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub variant: String,
    pub css: Option<f64>,
    pub aecr: Option<f64>,
    pub delta_beta: Option<f64>,
    pub delta_dcc: Option<f64>,
}

impl FriReport {
    pub fn all_completed(&self) -> bool {
        self.css.completed()
            && self.aecr.completed()
            && self.factor.completed()
            && self.dcc.completed()
    }

    pub fn table_row(&self) -> TableRow {
        TableRow {
            variant: self.metadata.graph_variant.clone(),
            css: self.css.cell(|r| r.css),
            aecr: self.aecr.cell(|r| r.aecr),
            delta_beta: self.factor.cell(|r| r.delta_beta),
            delta_dcc: self.dcc.cell(|r| r.delta_dcc),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Renders table rows as CSV with a fixed header.
pub fn table_csv(rows: &[TableRow]) -> String {
    let mut out = String::from("variant,css,aecr,delta_beta,delta_dcc\n");
    for row in rows {
        let cell = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.variant,
            cell(row.css),
            cell(row.aecr),
            cell(row.delta_beta),
            cell(row.delta_dcc)
        ));
    }
    out
}
