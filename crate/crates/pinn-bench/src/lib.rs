//! Shared builders for the criterion benches: the paper-scale network and a
//! desk-scale training configuration that finishes one pass in milliseconds.

use pinn_core::{init_glorot, ActivationKind, Case, MlpModel, TrainConfig};

/// 2-40x7-1 GELU network with adaptive slopes, as used for the full runs.
pub fn full_size_model(seed: u64) -> MlpModel {
    let sizes = [2, 40, 40, 40, 40, 40, 40, 40, 1];
    init_glorot(&sizes, ActivationKind::Gelu, true, 10, seed).expect("valid architecture")
}

/// Shrunk Case C configuration: 4x20 network, 4000 collocation points.
pub fn desk_config() -> TrainConfig {
    TrainConfig {
        case: Case::C,
        hidden_layers: 4,
        neurons: 20,
        n_init: 500,
        n_bound: 500,
        n_colloc: 4000,
        iterations: 5000,
        restarts: 1,
        ..TrainConfig::default()
    }
}
