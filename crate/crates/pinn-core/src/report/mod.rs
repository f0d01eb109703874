//! Tables, baselines, surfaces, and timing artifacts
//!
//! Everything downstream of training lives here: error tables over the
//! published comparison points, the shipped baseline constants and the
//! side-by-side comparison against them, plot-ready surface and gradient
//! grids, the inference-timing benchmark, and the experiment runner that
//! turns a config file into a directory of artifacts.
//!
//! Artifacts are CSV (with `# key: value` header metadata) or JSON. Every
//! emitter has a matching parser and `parse(emit(x)) == x` holds bit for
//! bit, so a written file is as good as the in-memory value it came from.

mod baselines;
mod bench;
mod compare;
mod csvio;
mod experiment;
mod surfaces;

pub use baselines::{AbsErrorRow, BaselineConstants, BdfRow, Printed, SolutionRow};
pub use bench::{benchmark_inference, LinearFit, TimingRow, TimingTable, DEFAULT_COUNTS};
pub use compare::{
    compare_with_baselines, BaselineCell, BaselineMethod, ComparisonReport, ComparisonRow,
    MethodSummary,
};
pub use experiment::{
    load_config, parse_config, run_experiment, ExperimentArtifacts, ExperimentConfig, Manifest,
};
pub use surfaces::{
    emit_surfaces, section_times, CrossSections, GradientGrid, SurfaceArtifacts, SurfaceGrid,
};

use serde::{Deserialize, Serialize};

use crate::autodiff::AutodiffError;
use crate::network::{MlpModel, NetworkError};
use crate::oracle::{OracleError, ProblemTag};
use crate::pde::ProblemSpec;
use crate::training::{Case, TrainingError};
use csvio::{parse_f64, CsvDoc};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("invalid `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("baseline asset was modified: expected sha256 {expected}, file hashes to {actual}")]
    AssetChecksum { expected: String, actual: String },
    #[error("unparsable printed value `{text}`")]
    BadPrinted { text: String },
    #[error("malformed {what}: {detail}")]
    Parse { what: String, detail: String },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Training(#[from] TrainingError),
    #[error("artifact io: {0}")]
    Io(#[from] std::io::Error),
    #[error("artifact encoding: {0}")]
    Json(#[from] serde_json::Error),
}

/// One comparison point: where, what the oracle says, what the model says.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub x: f64,
    pub t: f64,
    pub exact: f64,
    pub predicted: f64,
    /// Always |predicted − exact|; parsers reject rows where it is not.
    pub abs_error: f64,
}

/// Point-wise model-vs-oracle errors for one trained configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub problem: ProblemTag,
    pub case_label: String,
    pub activation_label: String,
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    /// Evaluates the model against the series oracle at `points`.
    pub fn evaluate(
        model: &MlpModel,
        problem: &ProblemSpec,
        case: Case,
        points: &[(f64, f64)],
    ) -> Result<ErrorTable, ReportError> {
        let mut rows = Vec::with_capacity(points.len());
        for &(x, t) in points {
            let exact = problem.exact(x, t)?;
            let predicted = model.forward(x, t);
            rows.push(ErrorRow {
                x,
                t,
                exact,
                predicted,
                abs_error: (predicted - exact).abs(),
            });
        }
        Ok(ErrorTable {
            problem: problem.tag,
            case_label: case.label().to_string(),
            activation_label: model.activation.label().to_string(),
            rows,
        })
    }

    /// Mean of the abs_error column; NaN when the table is empty.
    pub fn mean_abs_error(&self) -> f64 {
        self.rows.iter().map(|r| r.abs_error).sum::<f64>() / self.rows.len() as f64
    }

    pub fn max_abs_error(&self) -> f64 {
        self.rows.iter().map(|r| r.abs_error).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut doc = CsvDoc::new(&["x", "t", "exact", "predicted", "abs_error"]);
        doc.add_meta("table", "errors");
        doc.add_meta("problem", self.problem.label());
        doc.add_meta("case", &self.case_label);
        doc.add_meta("activation", &self.activation_label);
        for r in &self.rows {
            doc.rows.push(vec![
                r.x.to_string(),
                r.t.to_string(),
                r.exact.to_string(),
                r.predicted.to_string(),
                r.abs_error.to_string(),
            ]);
        }
        doc.emit()
    }

    pub fn from_csv(text: &str) -> Result<ErrorTable, ReportError> {
        let doc = CsvDoc::parse(text)?;
        doc.expect_header(&["x", "t", "exact", "predicted", "abs_error"])?;
        let label = doc.meta_value("problem")?;
        let problem = ProblemTag::from_label(label).ok_or_else(|| ReportError::Parse {
            what: "error table".to_string(),
            detail: format!("unknown problem label `{label}`"),
        })?;
        let case_label = doc.meta_value("case")?.to_string();
        let activation_label = doc.meta_value("activation")?.to_string();
        let mut rows = Vec::with_capacity(doc.rows.len());
        for fields in &doc.rows {
            let row = ErrorRow {
                x: parse_f64(&fields[0], "error table x")?,
                t: parse_f64(&fields[1], "error table t")?,
                exact: parse_f64(&fields[2], "error table exact")?,
                predicted: parse_f64(&fields[3], "error table predicted")?,
                abs_error: parse_f64(&fields[4], "error table abs_error")?,
            };
            if row.abs_error.to_bits() != (row.predicted - row.exact).abs().to_bits() {
                return Err(ReportError::Parse {
                    what: "error table".to_string(),
                    detail: format!(
                        "abs_error {} is not |predicted - exact| at ({}, {})",
                        row.abs_error, row.x, row.t
                    ),
                });
            }
            rows.push(row);
        }
        Ok(ErrorTable {
            problem,
            case_label,
            activation_label,
            rows,
        })
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<ErrorTable, ReportError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// The 12 published comparison points of the quadratic-profile benchmark:
/// x ∈ {0.25, 0.5, 0.75} × t ∈ {0.4, 0.8, 1.0, 3.0}.
pub fn p1_canonical_points() -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(12);
    for x in [0.25, 0.5, 0.75] {
        for t in [0.4, 0.8, 1.0, 3.0] {
            out.push((x, t));
        }
    }
    out
}

/// The 18 published comparison points of the sine-profile benchmark:
/// x ∈ {0.25, 0.5, 0.75} × t ∈ {2.4, 2.6, 3.0} plus the nine-point profile
/// x ∈ {0.1, …, 0.9} at t = 2.5.
pub fn p2_canonical_points() -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(18);
    for x in [0.25, 0.5, 0.75] {
        for t in [2.4, 2.6, 3.0] {
            out.push((x, t));
        }
    }
    for i in 1..=9 {
        out.push((i as f64 / 10.0, 2.5));
    }
    out
}

pub fn canonical_points(tag: ProblemTag) -> Vec<(f64, f64)> {
    match tag {
        ProblemTag::P1 => p1_canonical_points(),
        ProblemTag::P2 => p2_canonical_points(),
    }
}
