//! Side-by-side error comparison against the published baselines
//!
//! For the quadratic profile the sources print absolute errors directly;
//! those columns are carried verbatim. For the sine profile the sources
//! print BDF solution values next to the exact value, so each baseline
//! error is the difference of two printed numbers and inherits their
//! resolution. Entries whose printed digits are all zero are flagged: they
//! bound the error by half a print step instead of stating it, and no model
//! result can meaningfully "beat" them.

use serde::{Deserialize, Serialize};

use super::baselines::BaselineConstants;
use super::{ErrorTable, ReportError};
use crate::oracle::ProblemTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineMethod {
    McbDqm,
    WaDqm,
    LsQbFem,
    Bdf1,
    Bdf2,
    Bdf3,
}

impl BaselineMethod {
    pub fn label(self) -> &'static str {
        match self {
            BaselineMethod::McbDqm => "MCB-DQM",
            BaselineMethod::WaDqm => "WA-DQM",
            BaselineMethod::LsQbFem => "LS-QB-Spline-FEM",
            BaselineMethod::Bdf1 => "BDF-1",
            BaselineMethod::Bdf2 => "BDF-2",
            BaselineMethod::Bdf3 => "BDF-3",
        }
    }

    /// The methods with published results for the given benchmark.
    pub fn for_problem(tag: ProblemTag) -> &'static [BaselineMethod] {
        match tag {
            ProblemTag::P1 => &[
                BaselineMethod::McbDqm,
                BaselineMethod::WaDqm,
                BaselineMethod::LsQbFem,
            ],
            ProblemTag::P2 => &[
                BaselineMethod::Bdf1,
                BaselineMethod::Bdf2,
                BaselineMethod::Bdf3,
            ],
        }
    }
}

/// One baseline's error at one point; `None` when the sources have no entry
/// there (a gap in the report, not a zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCell {
    pub method: BaselineMethod,
    pub error: Option<f64>,
    /// Verbatim printed text when the source prints the error itself.
    pub printed: Option<String>,
    /// The error prints as zero, so only an upper bound is known.
    pub precision_floor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub x: f64,
    pub t: f64,
    pub model_error: f64,
    pub cells: Vec<BaselineCell>,
}

/// Win count of the model against one baseline over the compared points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: BaselineMethod,
    pub wins: usize,
    pub compared: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub problem: ProblemTag,
    pub case_label: String,
    pub activation_label: String,
    pub rows: Vec<ComparisonRow>,
    pub summaries: Vec<MethodSummary>,
    /// Number of (row, method) pairs without a published entry.
    pub gaps: usize,
}

fn p1_cell(
    baselines: &BaselineConstants,
    method: BaselineMethod,
    x: f64,
    t: f64,
) -> BaselineCell {
    let printed = baselines.p1_error_row(x, t).map(|row| match method {
        BaselineMethod::McbDqm => &row.mcb_dqm,
        BaselineMethod::WaDqm => &row.wa_dqm,
        BaselineMethod::LsQbFem => &row.ls_qb_fem,
        _ => unreachable!("BDF methods are not published for the quadratic profile"),
    });
    BaselineCell {
        method,
        error: printed.map(|p| p.value()),
        printed: printed.map(|p| p.text().to_string()),
        precision_floor: printed.is_some_and(|p| p.is_zero_print()),
    }
}

fn p2_cell(
    baselines: &BaselineConstants,
    method: BaselineMethod,
    x: f64,
    t: f64,
) -> BaselineCell {
    let error = baselines.p2_row(x, t).map(|row| {
        let value = match method {
            BaselineMethod::Bdf1 => &row.bdf1,
            BaselineMethod::Bdf2 => &row.bdf2,
            BaselineMethod::Bdf3 => &row.bdf3,
            _ => unreachable!("only BDF methods are published for the sine profile"),
        };
        (value.value() - row.exact.value()).abs()
    });
    BaselineCell {
        method,
        error,
        printed: None,
        precision_floor: error == Some(0.0),
    }
}

/// Builds the side-by-side report: the model's absolute error next to every
/// published baseline error at each table row, with per-method win counts.
///
/// Rows whose point has no published entry stay in the report with empty
/// cells, so a partial table still renders; such gaps are counted but not
/// compared. An empty table produces an empty report.
pub fn compare_with_baselines(
    table: &ErrorTable,
    baselines: &BaselineConstants,
) -> ComparisonReport {
    let methods = BaselineMethod::for_problem(table.problem);
    let mut rows = Vec::with_capacity(table.rows.len());
    let mut gaps = 0;
    let mut summaries: Vec<MethodSummary> = methods
        .iter()
        .map(|&method| MethodSummary {
            method,
            wins: 0,
            compared: 0,
        })
        .collect();

    for row in &table.rows {
        let mut cells = Vec::with_capacity(methods.len());
        for (&method, summary) in methods.iter().zip(&mut summaries) {
            let cell = match table.problem {
                ProblemTag::P1 => p1_cell(baselines, method, row.x, row.t),
                ProblemTag::P2 => p2_cell(baselines, method, row.x, row.t),
            };
            match cell.error {
                Some(baseline_error) => {
                    summary.compared += 1;
                    if row.abs_error < baseline_error {
                        summary.wins += 1;
                    }
                }
                None => gaps += 1,
            }
            cells.push(cell);
        }
        rows.push(ComparisonRow {
            x: row.x,
            t: row.t,
            model_error: row.abs_error,
            cells,
        });
    }

    ComparisonReport {
        problem: table.problem,
        case_label: table.case_label.clone(),
        activation_label: table.activation_label.clone(),
        rows,
        summaries,
        gaps,
    }
}

impl ComparisonReport {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Plain-text rendering. Printed baseline errors appear verbatim,
    /// derived ones in scientific notation; `*` marks precision-floor
    /// entries and `n/a` marks gaps.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "error comparison, {} case {} ({})\n",
            self.problem.label(),
            self.case_label,
            self.activation_label
        );
        if self.is_empty() {
            out.push_str("no rows\n");
            return out;
        }
        out.push_str(&format!("{:>6} {:>5} {:>12}", "x", "t", "model"));
        for summary in &self.summaries {
            out.push_str(&format!(" {:>16}", summary.method.label()));
        }
        out.push('\n');
        let mut any_floor = false;
        for row in &self.rows {
            out.push_str(&format!(
                "{:>6} {:>5} {:>12.4e}",
                row.x, row.t, row.model_error
            ));
            for cell in &row.cells {
                let text = match (&cell.printed, cell.error) {
                    (Some(printed), _) => printed.clone(),
                    (None, Some(error)) => format!("{error:.4e}"),
                    (None, None) => "n/a".to_string(),
                };
                let mark = if cell.precision_floor {
                    any_floor = true;
                    "*"
                } else {
                    ""
                };
                out.push_str(&format!(" {:>16}", format!("{text}{mark}")));
            }
            out.push('\n');
        }
        if any_floor {
            out.push_str("* prints as zero: the source bounds this error by half a print step\n");
        }
        if self.gaps > 0 {
            out.push_str(&format!("{} entries have no published value\n", self.gaps));
        }
        for summary in &self.summaries {
            out.push_str(&format!(
                "model beats {} at {}/{} points\n",
                summary.method.label(),
                summary.wins,
                summary.compared
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<ComparisonReport, ReportError> {
        Ok(serde_json::from_str(text)?)
    }
}
