//! One configured run from JSON config to a directory of artifacts
//!
//! The config format is strict: unknown keys are errors, not typos to
//! ignore silently, and every schema or validation failure names the
//! offending field. A successful run leaves a checkpoint, the full loss
//! history, the error table in CSV and JSON, and a manifest that records
//! what produced the artifacts. A diverged run still dumps its history
//! before reporting failure.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{canonical_points, ErrorTable, ReportError};
use crate::pde::{make_problem1, make_problem2, ProblemSpec};
use crate::training::{train, TrainConfig, TrainOutcome, TrainingError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Benchmark selector: 1 (quadratic profile) or 2 (sine profile).
    pub problem: u8,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: 1,
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn problem_spec(&self) -> Result<ProblemSpec, ReportError> {
        match self.problem {
            1 => Ok(make_problem1()),
            2 => Ok(make_problem2()),
            other => Err(ReportError::Config {
                field: "problem".to_string(),
                message: format!("must be 1 or 2, got {other}"),
            }),
        }
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        self.problem_spec()?;
        self.train.validate().map_err(|e| match e {
            TrainingError::InvalidConfig { field, message } => ReportError::Config {
                field: format!("train.{field}"),
                message,
            },
            other => ReportError::Training(other),
        })
    }
}

/// Parses and validates a config, reporting schema errors with the path of
/// the offending field (e.g. `train.neurons`).
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ReportError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig =
        serde_path_to_error::deserialize(&mut de).map_err(|e| ReportError::Config {
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ReportError> {
    parse_config(&std::fs::read_to_string(path)?)
}

/// What produced an artifact directory, for reproduction: rerunning with
/// the recorded config and seed yields bit-identical checkpoint and error
/// table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub git_describe: String,
    pub seed: u64,
    pub problem: u8,
    pub case: String,
    pub activation: String,
    pub wall_clock_seconds: f64,
    pub config: ExperimentConfig,
}

fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|out| out.status.success())
        .and_then(|out| String::from_utf8(out.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}

#[derive(Debug)]
pub struct ExperimentArtifacts {
    pub out_dir: PathBuf,
    pub checkpoint: PathBuf,
    pub record: PathBuf,
    pub errors_csv: PathBuf,
    pub errors_json: PathBuf,
    pub manifest: PathBuf,
    pub outcome: TrainOutcome,
    pub table: ErrorTable,
}

/// Trains per config and writes every artifact into `out_dir` (created if
/// missing): `checkpoint.json`, `record.jsonl`, `errors.csv`,
/// `errors.json`, and `manifest.json`.
///
/// When every restart diverges, the collected loss histories are still
/// written to `record.jsonl` so the failure can be inspected, and the
/// training error is returned.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<ExperimentArtifacts, ReportError> {
    cfg.validate()?;
    let problem = cfg.problem_spec()?;
    std::fs::create_dir_all(out_dir)?;
    let record_path = out_dir.join("record.jsonl");

    let started = Instant::now();
    let outcome = match train(&problem, &cfg.train) {
        Ok(outcome) => outcome,
        Err(TrainingError::AllRestartsDiverged { record }) => {
            record.write_jsonl(&record_path)?;
            return Err(ReportError::Training(TrainingError::AllRestartsDiverged {
                record,
            }));
        }
        Err(other) => return Err(ReportError::Training(other)),
    };
    let wall_clock_seconds = started.elapsed().as_secs_f64();

    let table = ErrorTable::evaluate(
        &outcome.model,
        &problem,
        cfg.train.case,
        &canonical_points(problem.tag),
    )?;

    let artifacts = ExperimentArtifacts {
        out_dir: out_dir.to_path_buf(),
        checkpoint: out_dir.join("checkpoint.json"),
        record: record_path,
        errors_csv: out_dir.join("errors.csv"),
        errors_json: out_dir.join("errors.json"),
        manifest: out_dir.join("manifest.json"),
        outcome,
        table,
    };
    artifacts.outcome.model.save(&artifacts.checkpoint)?;
    artifacts.outcome.record.write_jsonl(&artifacts.record)?;
    std::fs::write(&artifacts.errors_csv, artifacts.table.to_csv())?;
    std::fs::write(&artifacts.errors_json, artifacts.table.to_json()?)?;
    let manifest = Manifest {
        git_describe: git_describe(),
        seed: cfg.train.seed,
        problem: cfg.problem,
        case: cfg.train.case.label().to_string(),
        activation: cfg.train.activation.label().to_string(),
        wall_clock_seconds,
        config: cfg.clone(),
    };
    std::fs::write(
        &artifacts.manifest,
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(artifacts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::MlpModel;
    use crate::training::Case;

    fn micro_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.train.case = Case::B;
        cfg.train.hidden_layers = 2;
        cfg.train.neurons = 8;
        cfg.train.n_init = 20;
        cfg.train.n_bound = 20;
        cfg.train.n_colloc = 100;
        cfg.train.iterations = 40;
        cfg.train.restarts = 1;
        cfg.train.log_every = 10;
        cfg
    }

    #[test]
    fn config_parses_with_defaults_for_missing_fields() {
        let cfg = parse_config(r#"{ "problem": 2, "train": { "neurons": 10 } }"#).unwrap();
        assert_eq!(cfg.problem, 2);
        assert_eq!(cfg.train.neurons, 10);
        assert_eq!(cfg.train.hidden_layers, TrainConfig::default().hidden_layers);
        assert_eq!(parse_config("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_schema_errors_with_a_path() {
        let err = parse_config(r#"{ "train": { "neuron_count": 8 } }"#).unwrap_err();
        match err {
            ReportError::Config { field, message } => {
                assert_eq!(field, "train.neuron_count");
                assert!(message.contains("unknown field"), "{message}");
            }
            other => panic!("expected a config error, got {other:?}"),
        }
        assert!(parse_config(r#"{ "colour": 1 }"#).is_err());
    }

    #[test]
    fn invalid_values_are_schema_errors_with_a_path() {
        let err = parse_config(r#"{ "train": { "neurons": 0 } }"#).unwrap_err();
        match err {
            ReportError::Config { field, .. } => assert_eq!(field, "train.neurons"),
            other => panic!("expected a config error, got {other:?}"),
        }
        let err = parse_config(r#"{ "problem": 7 }"#).unwrap_err();
        match err {
            ReportError::Config { field, .. } => assert_eq!(field, "problem"),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn run_writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = micro_config();
        let arts = run_experiment(&cfg, dir.path()).unwrap();
        for path in [
            &arts.checkpoint,
            &arts.record,
            &arts.errors_csv,
            &arts.errors_json,
            &arts.manifest,
        ] {
            assert!(path.exists(), "{path:?} missing");
        }
        let table =
            ErrorTable::from_csv(&std::fs::read_to_string(&arts.errors_csv).unwrap()).unwrap();
        assert_eq!(table, arts.table);
        assert_eq!(table.rows.len(), 12);
        let model = MlpModel::load(&arts.checkpoint).unwrap();
        assert_eq!(model.layer_sizes, vec![2, 8, 8, 1]);
        let manifest: Manifest =
            serde_json::from_str(&std::fs::read_to_string(&arts.manifest).unwrap()).unwrap();
        assert_eq!(manifest.seed, cfg.train.seed);
        assert_eq!(manifest.case, "B");
        assert_eq!(manifest.config, cfg);
        assert!(manifest.wall_clock_seconds > 0.0);
    }

    #[test]
    fn rerunning_the_same_config_reproduces_the_artifacts() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let cfg = micro_config();
        let a = run_experiment(&cfg, dir_a.path()).unwrap();
        let b = run_experiment(&cfg, dir_b.path()).unwrap();
        assert_eq!(
            std::fs::read(&a.checkpoint).unwrap(),
            std::fs::read(&b.checkpoint).unwrap()
        );
        assert_eq!(
            std::fs::read(&a.errors_csv).unwrap(),
            std::fs::read(&b.errors_csv).unwrap()
        );
    }

    #[test]
    fn sine_profile_tables_use_its_points() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = micro_config();
        cfg.problem = 2;
        let arts = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(arts.table.rows.len(), 18);
        assert!(arts.table.rows.iter().any(|r| r.t == 2.5));
    }
}
