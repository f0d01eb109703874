//! Physics-informed neural networks for the 1-D viscous Burgers equation
//!
//! ```text
//! ∂u/∂t + a·u·∂u/∂x = ν·∂²u/∂x²,   (x, t) ∈ [0,1] × (0, T]
//! ```
//!
//! A small MLP `u_Θ(x, t)` is trained to satisfy the PDE by penalizing the
//! residual at collocation points together with initial/boundary misfit.
//! Three training configurations are supported:
//!
//! * **Case A** — plain PINN loss (initial + boundary + residual terms),
//! * **Case B** — Case A plus a residual term evaluated at Lie-symmetry
//!   transformed collocation points,
//! * **Case C** — Case B with a trainable per-layer activation slope.
//!
//! Trained networks are validated against the exact Cole–Hopf series
//! solution, whose Fourier coefficients are computed by adaptive
//! Gauss–Legendre quadrature.
//!
//! Module map:
//!
//! * [`autodiff`] — scalar forward-mode second-order duals and a
//!   reverse-mode gradient tape, closed over a fixed primitive set,
//! * [`network`] — MLP with per-layer adaptive slopes, Glorot init,
//!   checkpoint (de)serialization,
//! * [`pde`] — problem descriptions and the Burgers residual operator,
//! * [`symmetry`] — infinitesimal generators, point transforms, prolongation
//!   coefficients, and invariance verification,
//! * [`oracle`] — the exact series solution and its coefficient integrals,
//! * [`training`] — sampling, the composite loss, Adam, and the training
//!   loop (with a batched gradient engine under the hood),
//! * [`report`] — error tables, published baseline constants, surface/grid
//!   emission, the inference-timing benchmark, and experiment plumbing.

pub mod autodiff;
pub mod math;
pub mod network;
pub mod oracle;
pub mod pde;
pub mod report;
pub mod symmetry;
pub mod training;

pub use autodiff::{forward_dual2, grad_wrt_params, Direction, Dual2, GradTape, Scalar, Var};
pub use network::{init_glorot, ActivationKind, MlpModel};
pub use oracle::{exact_u, series_coefficients, SeriesCoefficients};
pub use pde::{make_problem1, make_problem2, residual, ProblemSpec};
pub use report::{
    benchmark_inference, compare_with_baselines, emit_surfaces, run_experiment, BaselineConstants,
    ComparisonReport, ErrorTable, ExperimentConfig, ReportError, TimingTable,
};
pub use symmetry::{transform_point, verify_invariance, GeneratorId, TransformConfig};
pub use training::{train, Case, LossBreakdown, TrainConfig, TrainOutcome};
