//! Loss assembly and full-batch training.
//!
//! The objective is a weighted sum of four mean-square terms,
//!
//! ```text
//! total = α·l_init + β·l_bound + γ·l_res + ζ·l_symm
//! ```
//!
//! where `l_init` fits the initial profile, `l_bound` pins the walls to zero,
//! `l_res` is the PDE residual over collocation points, and `l_symm` is the
//! same residual over symmetry-transformed copies of those points, one mean
//! per generator, summed. Case A trains without the symmetry term, case B adds
//! it, and case C additionally lets the per-layer activation slopes train.
//!
//! Training is full batch: every iteration evaluates all sample points, takes
//! one Adam step under a piecewise-constant learning-rate schedule, and
//! repeats for a fixed iteration count. Restarts rerun the whole procedure
//! with shifted seeds and keep the model with the lowest final total loss.

mod adam;
mod engine;
mod kernels;

pub use adam::AdamParams;

use crate::network::{init_glorot, ActivationKind, MlpModel, NetworkError};
use crate::pde::ProblemSpec;
use crate::symmetry::{transform_point, GeneratorId, TransformConfig};
use engine::{Engine, EngineInputs, CHUNK_POINTS, KIND_BOUND, KIND_INIT, KIND_RES, KIND_SYMM};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

/// Smallest value an adaptive slope may take after an update.
pub const SLOPE_FLOOR: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum TrainingError {
    #[error("invalid config at `{field}`: {message}")]
    InvalidConfig { field: String, message: String },
    #[error("training diverged: {detail}")]
    Diverged { detail: String },
    #[error("all restarts diverged; partial loss histories are attached")]
    AllRestartsDiverged { record: TrainRecord },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("record io: {0}")]
    Io(#[from] std::io::Error),
    #[error("record encoding: {0}")]
    Json(#[from] serde_json::Error),
}

/// Training configuration tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    A,
    B,
    C,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::A, Case::B, Case::C];

    /// Whether symmetry-transformed collocation points contribute to the loss.
    pub fn uses_symmetry(self) -> bool {
        !matches!(self, Case::A)
    }

    /// Whether activation slopes receive gradient updates.
    pub fn adaptive(self) -> bool {
        matches!(self, Case::C)
    }

    pub fn label(self) -> &'static str {
        match self {
            Case::A => "A",
            Case::B => "B",
            Case::C => "C",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Case {
    type Err = String;

    fn from_str(s: &str) -> Result<Case, String> {
        match s.trim() {
            "A" | "a" => Ok(Case::A),
            "B" | "b" => Ok(Case::B),
            "C" | "c" => Ok(Case::C),
            other => Err(format!("unknown case `{other}`, expected A, B, or C")),
        }
    }
}

/// One stage of a piecewise-constant learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrStage {
    pub from_iteration: usize,
    pub lr: f64,
}

/// Weights applied to the four loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub zeta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            zeta: 1.0,
        }
    }
}

impl LossWeights {
    /// Single source of the weighted total so every reported `total` is the
    /// same floating-point expression of its components.
    pub fn compose(&self, l_init: f64, l_bound: f64, l_res: f64, l_symm: f64) -> LossBreakdown {
        LossBreakdown {
            l_init,
            l_bound,
            l_res,
            l_symm,
            total: self.alpha * l_init
                + self.beta * l_bound
                + self.gamma * l_res
                + self.zeta * l_symm,
        }
    }
}

/// The four loss terms of one evaluation plus their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_init: f64,
    pub l_bound: f64,
    pub l_res: f64,
    pub l_symm: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.l_init.is_finite()
            && self.l_bound.is_finite()
            && self.l_res.is_finite()
            && self.l_symm.is_finite()
            && self.total.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub case: Case,
    pub activation: ActivationKind,
    /// Number of hidden layers; the input layer is (x, t) and the output is u.
    pub hidden_layers: usize,
    pub neurons: usize,
    pub n_init: usize,
    pub n_bound: usize,
    pub n_colloc: usize,
    pub iterations: usize,
    pub seed: u64,
    pub restarts: usize,
    /// Empty means the built-in schedule: 1e-3, then 5e-4 from 40% of the
    /// iteration budget, then 1e-4 from 80%.
    pub lr_schedule: Vec<LrStage>,
    pub adam: AdamParams,
    /// Symmetry generators for cases B and C. Empty defaults to L5.
    pub generators: Vec<GeneratorId>,
    pub epsilon: f64,
    pub weights: LossWeights,
    pub slope_gain: u32,
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            case: Case::C,
            activation: ActivationKind::Gelu,
            hidden_layers: 7,
            neurons: 40,
            n_init: 500,
            n_bound: 500,
            n_colloc: 20_000,
            iterations: 50_000,
            seed: 0,
            restarts: 10,
            lr_schedule: Vec::new(),
            adam: AdamParams::default(),
            generators: Vec::new(),
            epsilon: 0.5,
            weights: LossWeights::default(),
            slope_gain: 10,
            log_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden_layers + 2);
        sizes.push(2);
        sizes.extend(std::iter::repeat_n(self.neurons, self.hidden_layers));
        sizes.push(1);
        sizes
    }

    /// Generators that actually enter the loss: none for case A, the
    /// configured list otherwise, with L5 as the fallback.
    pub fn effective_generators(&self) -> Vec<GeneratorId> {
        if !self.case.uses_symmetry() {
            Vec::new()
        } else if self.generators.is_empty() {
            vec![GeneratorId::L5]
        } else {
            self.generators.clone()
        }
    }

    pub fn lr_at(&self, iteration: usize) -> f64 {
        if self.lr_schedule.is_empty() {
            let t1 = self.iterations * 2 / 5;
            let t2 = self.iterations * 4 / 5;
            if iteration < t1 {
                1e-3
            } else if iteration < t2 {
                5e-4
            } else {
                1e-4
            }
        } else {
            let mut lr = self.lr_schedule[0].lr;
            for stage in &self.lr_schedule {
                if stage.from_iteration <= iteration {
                    lr = stage.lr;
                }
            }
            lr
        }
    }

    pub fn validate(&self) -> Result<(), TrainingError> {
        let positive = |field: &str, value: usize| -> Result<(), TrainingError> {
            if value == 0 {
                Err(TrainingError::InvalidConfig {
                    field: field.to_string(),
                    message: "must be at least 1".to_string(),
                })
            } else {
                Ok(())
            }
        };
        positive("hidden_layers", self.hidden_layers)?;
        positive("neurons", self.neurons)?;
        positive("n_init", self.n_init)?;
        positive("n_colloc", self.n_colloc)?;
        positive("iterations", self.iterations)?;
        positive("restarts", self.restarts)?;
        positive("log_every", self.log_every)?;
        positive("slope_gain", self.slope_gain as usize)?;
        if self.n_bound < 2 {
            return Err(TrainingError::InvalidConfig {
                field: "n_bound".to_string(),
                message: "need at least one point per wall".to_string(),
            });
        }
        if !self.case.uses_symmetry() && !self.generators.is_empty() {
            return Err(TrainingError::InvalidConfig {
                field: "generators".to_string(),
                message: "case A has no symmetry term; remove the generator list".to_string(),
            });
        }
        if !self.epsilon.is_finite() {
            return Err(TrainingError::InvalidConfig {
                field: "epsilon".to_string(),
                message: format!("must be finite, got {}", self.epsilon),
            });
        }
        for (name, w) in [
            ("weights.alpha", self.weights.alpha),
            ("weights.beta", self.weights.beta),
            ("weights.gamma", self.weights.gamma),
            ("weights.zeta", self.weights.zeta),
        ] {
            if !w.is_finite() || w < 0.0 {
                return Err(TrainingError::InvalidConfig {
                    field: name.to_string(),
                    message: format!("must be finite and non-negative, got {w}"),
                });
            }
        }
        self.adam.validate()?;
        if !self.lr_schedule.is_empty() {
            if self.lr_schedule[0].from_iteration != 0 {
                return Err(TrainingError::InvalidConfig {
                    field: "lr_schedule".to_string(),
                    message: "first stage must start at iteration 0".to_string(),
                });
            }
            for pair in self.lr_schedule.windows(2) {
                if pair[1].from_iteration <= pair[0].from_iteration {
                    return Err(TrainingError::InvalidConfig {
                        field: "lr_schedule".to_string(),
                        message: "stage thresholds must be strictly increasing".to_string(),
                    });
                }
            }
            for stage in &self.lr_schedule {
                if !(stage.lr.is_finite() && stage.lr > 0.0) {
                    return Err(TrainingError::InvalidConfig {
                        field: "lr_schedule".to_string(),
                        message: format!("learning rates must be positive, got {}", stage.lr),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Sample points for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    /// (x, t = 0, u₀(x)) triples on the initial line.
    pub init_points: Vec<(f64, f64, f64)>,
    /// (x, t, 0) triples with x on one of the walls.
    pub bound_points: Vec<(f64, f64, f64)>,
    /// Interior (x, t) pairs for the residual terms.
    pub colloc_points: Vec<(f64, f64)>,
    /// Seed the set was drawn from.
    pub seed: u64,
}

/// Draws all sample points for `cfg.seed`. The draw order is fixed: initial
/// abscissae, then boundary times (first half on the left wall, rest on the
/// right), then collocation (x, t) pairs, so a seed pins the entire set.
pub fn sample(problem: &ProblemSpec, cfg: &TrainConfig) -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (x_lo, x_hi) = problem.x_range;
    let (t_lo, t_hi) = problem.t_range;

    let mut init_points = Vec::with_capacity(cfg.n_init);
    for _ in 0..cfg.n_init {
        let x = rng.random_range(x_lo..x_hi);
        init_points.push((x, 0.0, problem.initial(x)));
    }
    let mut bound_points = Vec::with_capacity(cfg.n_bound);
    let left = cfg.n_bound / 2;
    for i in 0..cfg.n_bound {
        let t = rng.random_range(t_lo..t_hi);
        let x = if i < left { x_lo } else { x_hi };
        bound_points.push((x, t, 0.0));
    }
    let mut colloc_points = Vec::with_capacity(cfg.n_colloc);
    for _ in 0..cfg.n_colloc {
        let x = rng.random_range(x_lo..x_hi);
        let t = rng.random_range(t_lo..t_hi);
        colloc_points.push((x, t));
    }
    SampleSet {
        init_points,
        bound_points,
        colloc_points,
        seed: cfg.seed,
    }
}

fn build_inputs(cfg: &TrainConfig, samples: &SampleSet) -> EngineInputs {
    let generators = cfg.effective_generators();
    let mut inputs = EngineInputs::default();
    let jet_total = samples.colloc_points.len() * (1 + generators.len());
    inputs.jet_x.reserve(jet_total);
    inputs.jet_t.reserve(jet_total);
    inputs.jet_kind.reserve(jet_total);
    for &(x, t) in &samples.colloc_points {
        inputs.jet_x.push(x);
        inputs.jet_t.push(t);
        inputs.jet_kind.push(KIND_RES);
    }
    for &generator in &generators {
        let map = TransformConfig {
            generator,
            epsilon: cfg.epsilon,
        };
        // ξ₁ and ξ₂ of the supported generators never involve u, so the
        // transformed points can be fixed before training starts.
        for &(x, t) in &samples.colloc_points {
            let (xt, tt) = transform_point(&map, x, t, 0.0);
            inputs.jet_x.push(xt);
            inputs.jet_t.push(tt);
            inputs.jet_kind.push(KIND_SYMM);
        }
    }
    let val_total = samples.init_points.len() + samples.bound_points.len();
    inputs.val_x.reserve(val_total);
    inputs.val_t.reserve(val_total);
    inputs.val_target.reserve(val_total);
    inputs.val_kind.reserve(val_total);
    for &(x, t, u0) in &samples.init_points {
        inputs.val_x.push(x);
        inputs.val_t.push(t);
        inputs.val_target.push(u0);
        inputs.val_kind.push(KIND_INIT);
    }
    for &(x, t, ub) in &samples.bound_points {
        inputs.val_x.push(x);
        inputs.val_t.push(t);
        inputs.val_target.push(ub);
        inputs.val_kind.push(KIND_BOUND);
    }
    inputs
}

fn make_engine(
    problem: &ProblemSpec,
    cfg: &TrainConfig,
    samples: &SampleSet,
    counts: [usize; 4],
) -> Engine {
    Engine::new(
        &cfg.layer_sizes(),
        cfg.activation,
        cfg.slope_gain as f64,
        cfg.case.adaptive(),
        problem.nu,
        problem.a,
        &cfg.weights,
        counts,
        build_inputs(cfg, samples),
        CHUNK_POINTS,
    )
}

fn term_counts(samples: &SampleSet) -> [usize; 4] {
    let nc = samples.colloc_points.len();
    [nc, nc, samples.init_points.len(), samples.bound_points.len()]
}

fn breakdown_from_sums(sums: [f64; 4], counts: [usize; 4], weights: &LossWeights) -> LossBreakdown {
    let mean = |sum: f64, n: usize| if n == 0 { 0.0 } else { sum / n as f64 };
    weights.compose(
        mean(sums[2], counts[2]),
        mean(sums[3], counts[3]),
        mean(sums[0], counts[0]),
        mean(sums[1], counts[1]),
    )
}

/// Evaluates the four loss terms of `model` on `samples`.
///
/// Case A reports `l_symm` as exactly zero since no transformed points exist.
pub fn loss(
    model: &MlpModel,
    problem: &ProblemSpec,
    samples: &SampleSet,
    cfg: &TrainConfig,
) -> LossBreakdown {
    let counts = term_counts(samples);
    let mut engine = make_engine(problem, cfg, samples, counts);
    let sums = engine.pass(model, false);
    breakdown_from_sums(sums, counts, &cfg.weights)
}

/// Evaluates the loss and its gradient with respect to `model.flat_params()`.
///
/// This is exactly the quantity one training iteration descends, exposed so
/// the backward pass can be checked against finite differences.
pub fn loss_and_gradient(
    model: &MlpModel,
    problem: &ProblemSpec,
    samples: &SampleSet,
    cfg: &TrainConfig,
) -> (LossBreakdown, Vec<f64>) {
    let counts = term_counts(samples);
    let mut engine = make_engine(problem, cfg, samples, counts);
    let sums = engine.pass(model, true);
    let mut grad = vec![0.0; engine.grad_len()];
    engine.flatten_grads_into(&mut grad);
    (breakdown_from_sums(sums, counts, &cfg.weights), grad)
}

/// One logged step of a training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainRecordEntry {
    pub restart: usize,
    pub iteration: usize,
    pub l_init: f64,
    pub l_bound: f64,
    pub l_res: f64,
    pub l_symm: f64,
    pub total: f64,
    pub lr: f64,
    pub wall_ms: f64,
}

/// Loss history across every restart of one [`train`] call, serialized as
/// JSON lines with one entry per line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub entries: Vec<TrainRecordEntry>,
}

impl TrainRecord {
    pub fn to_jsonl(&self) -> Result<String, TrainingError> {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<TrainRecord, TrainingError> {
        let mut entries = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            entries.push(serde_json::from_str(line)?);
        }
        Ok(TrainRecord { entries })
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), TrainingError> {
        std::fs::write(path, self.to_jsonl()?)?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<TrainRecord, TrainingError> {
        TrainRecord::from_jsonl(&std::fs::read_to_string(path)?)
    }

    /// Entries belonging to one restart, in iteration order.
    pub fn restart_entries(&self, restart: usize) -> Vec<TrainRecordEntry> {
        self.entries
            .iter()
            .copied()
            .filter(|e| e.restart == restart)
            .collect()
    }
}

/// Result of [`train`]: the best model over all restarts plus full histories.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub record: TrainRecord,
    pub best_restart: usize,
    pub final_loss: LossBreakdown,
    /// Final loss per restart; `None` marks a diverged restart.
    pub restart_finals: Vec<Option<LossBreakdown>>,
}

fn slope_param_indices(sizes: &[usize]) -> Vec<usize> {
    let mut indices = Vec::new();
    let mut offset = 0;
    for l in 0..sizes.len() - 2 {
        offset += sizes[l + 1] * sizes[l] + sizes[l + 1];
        indices.push(offset);
        offset += 1;
    }
    indices
}

/// Trains `cfg.restarts` models with seeds `cfg.seed + 0..restarts`, each on
/// its own sample draw and initialization, and returns the one whose final
/// total loss is lowest. A restart whose loss or gradient turns non-finite is
/// dropped; if every restart diverges the collected histories are returned in
/// the error.
pub fn train(problem: &ProblemSpec, cfg: &TrainConfig) -> Result<TrainOutcome, TrainingError> {
    cfg.validate()?;
    let sizes = cfg.layer_sizes();
    let slope_indices = slope_param_indices(&sizes);
    let mut record = TrainRecord::default();
    let mut restart_finals: Vec<Option<LossBreakdown>> = vec![None; cfg.restarts];
    let mut best: Option<(usize, MlpModel, LossBreakdown)> = None;

    for restart in 0..cfg.restarts {
        let mut sub = cfg.clone();
        sub.seed = cfg.seed + restart as u64;
        let samples = sample(problem, &sub);
        let counts = term_counts(&samples);
        let mut engine = make_engine(problem, &sub, &samples, counts);
        let mut model = init_glorot(
            &sizes,
            cfg.activation,
            cfg.case.adaptive(),
            cfg.slope_gain,
            sub.seed,
        )?;
        let mut theta = model.flat_params();
        let mut grad = vec![0.0; engine.grad_len()];
        let mut adam = adam::AdamState::new(theta.len(), cfg.adam);
        let started = Instant::now();
        let mut diverged = false;

        for iteration in 0..cfg.iterations {
            let sums = engine.pass(&model, true);
            let breakdown = breakdown_from_sums(sums, counts, &cfg.weights);
            let lr = cfg.lr_at(iteration);
            if iteration % cfg.log_every == 0 {
                record.entries.push(TrainRecordEntry {
                    restart,
                    iteration,
                    l_init: breakdown.l_init,
                    l_bound: breakdown.l_bound,
                    l_res: breakdown.l_res,
                    l_symm: breakdown.l_symm,
                    total: breakdown.total,
                    lr,
                    wall_ms: started.elapsed().as_secs_f64() * 1e3,
                });
            }
            if !breakdown.is_finite() {
                diverged = true;
                break;
            }
            engine.flatten_grads_into(&mut grad);
            if adam.step(&mut theta, &grad, lr).is_err() {
                diverged = true;
                break;
            }
            if cfg.case.adaptive() {
                for &i in &slope_indices {
                    theta[i] = theta[i].max(SLOPE_FLOOR);
                }
            }
            model.set_flat_params(&theta)?;
        }
        if diverged {
            continue;
        }

        let final_sums = engine.pass(&model, false);
        let final_loss = breakdown_from_sums(final_sums, counts, &cfg.weights);
        record.entries.push(TrainRecordEntry {
            restart,
            iteration: cfg.iterations,
            l_init: final_loss.l_init,
            l_bound: final_loss.l_bound,
            l_res: final_loss.l_res,
            l_symm: final_loss.l_symm,
            total: final_loss.total,
            lr: cfg.lr_at(cfg.iterations.saturating_sub(1)),
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        if !final_loss.is_finite() {
            continue;
        }
        restart_finals[restart] = Some(final_loss);
        let better = match &best {
            None => true,
            Some((_, _, incumbent)) => final_loss.total < incumbent.total,
        };
        if better {
            best = Some((restart, model, final_loss));
        }
    }

    match best {
        Some((best_restart, model, final_loss)) => Ok(TrainOutcome {
            model,
            record,
            best_restart,
            final_loss,
            restart_finals,
        }),
        None => Err(TrainingError::AllRestartsDiverged { record }),
    }
}
