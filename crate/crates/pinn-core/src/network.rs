//! Multilayer perceptron with per-layer adaptive activation slopes.
//!
//! Hidden layers compute σ(n·α_l·(W_l z + b_l)) where α_l is a trainable
//! scalar slope and n a fixed gain; the output layer is affine. With
//! adaptive slopes disabled every α_l is pinned at 1/n, so n·α_l = 1 and
//! the network reduces bitwise to a plain MLP.
//!
//! Parameters flatten in layer order — for each hidden layer its weight
//! matrix (row-major), bias vector, then slope; finally the output weights
//! and bias — and checkpoints serialize exactly that structure with a
//! format version tag.

use crate::autodiff::{forward_dual2, AutodiffError, Direction, Dual2, Scalar, SmoothFn2};
use crate::math;
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("parameter vector has length {got}, model expects {expected}")]
    ParamCountMismatch { expected: usize, got: usize },
    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Supported activations, each expressed in the autodiff primitive set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Tanh,
    Gelu,
    Mish,
    Swish,
    Softplus,
    TanhExp,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 6] = [
        ActivationKind::Tanh,
        ActivationKind::Gelu,
        ActivationKind::Mish,
        ActivationKind::Swish,
        ActivationKind::Softplus,
        ActivationKind::TanhExp,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ActivationKind::Tanh => "tanh",
            ActivationKind::Gelu => "gelu",
            ActivationKind::Mish => "mish",
            ActivationKind::Swish => "swish",
            ActivationKind::Softplus => "softplus",
            ActivationKind::TanhExp => "tanhexp",
        }
    }

    pub fn from_label(label: &str) -> Option<ActivationKind> {
        ActivationKind::ALL
            .into_iter()
            .find(|k| k.label() == label.to_lowercase())
    }

    /// Generic evaluation usable with any scalar carrier.
    #[inline]
    pub fn eval<S: Scalar>(self, z: S) -> S {
        match self {
            ActivationKind::Tanh => z.tanh(),
            // 0.5·z·(1 + erf(z/√2)), the exact-erf form
            ActivationKind::Gelu => {
                z * z
                    .scale(std::f64::consts::FRAC_1_SQRT_2)
                    .erf()
                    .add_const(1.0)
                    .scale(0.5)
            }
            ActivationKind::Mish => z * z.softplus().tanh(),
            ActivationKind::Swish => z * z.sigmoid(),
            ActivationKind::Softplus => z.softplus(),
            ActivationKind::TanhExp => z * z.exp().tanh(),
        }
    }

    /// (φ, φ′, φ″, φ‴) at `z`.
    ///
    /// The batched trainer needs the third derivative: the gradient of a
    /// second spatial derivative with respect to the weights differentiates
    /// the activation once more than the residual itself does.
    ///
    /// Always inlined so that callers compiled with FMA enabled lower the
    /// `mul_add` chains in the activation polynomials to single instructions
    /// instead of library calls.
    #[inline(always)]
    pub fn eval_derivs(self, z: f64) -> [f64; 4] {
        match self {
            ActivationKind::Tanh => {
                let t = z.tanh();
                let g = 1.0 - t * t;
                [t, g, -2.0 * t * g, g * (6.0 * t * t - 2.0)]
            }
            ActivationKind::Gelu => {
                let (cdf, pdf) = math::normal_cdf_pdf(z);
                [
                    z * cdf,
                    cdf + z * pdf,
                    pdf * (2.0 - z * z),
                    pdf * (z * z * z - 4.0 * z),
                ]
            }
            ActivationKind::Mish => {
                let s = math::sigmoid(z);
                let ds = s * (1.0 - s);
                let t = math::softplus(z).tanh();
                let g = 1.0 - t * t;
                let t1 = g * s;
                let t2 = -2.0 * t * g * s * s + g * ds;
                let t3 = -2.0 * g * g * s * s * s + 4.0 * t * t * g * s * s * s
                    - 6.0 * t * g * s * ds
                    + g * (ds * (1.0 - 2.0 * s));
                [z * t, t + z * t1, 2.0 * t1 + z * t2, 3.0 * t2 + z * t3]
            }
            ActivationKind::Swish => {
                let s = math::sigmoid(z);
                let s1 = s * (1.0 - s);
                let s2 = s1 * (1.0 - 2.0 * s);
                let s3 = s2 * (1.0 - 2.0 * s) - 2.0 * s1 * s1;
                [z * s, s + z * s1, 2.0 * s1 + z * s2, 3.0 * s2 + z * s3]
            }
            ActivationKind::Softplus => {
                let s = math::sigmoid(z);
                let s1 = s * (1.0 - s);
                [math::softplus(z), s, s1, s1 * (1.0 - 2.0 * s)]
            }
            ActivationKind::TanhExp => {
                // tanh(e^z) saturates exactly to 1 well before e^z can
                // overflow; past that point all derivatives vanish.
                if z > 690.0 {
                    return [z, 1.0, 0.0, 0.0];
                }
                let e = z.exp();
                let t = e.tanh();
                let g = 1.0 - t * t;
                let t1 = g * e;
                let t2 = g * e * (1.0 - 2.0 * t * e);
                let t3 = g * e * (1.0 - 6.0 * t * e - 2.0 * e * e * (1.0 - 3.0 * t * t));
                [z * t, t + z * t1, 2.0 * t1 + z * t2, 3.0 * t2 + z * t3]
            }
        }
    }

    /// Batched [`ActivationKind::eval_derivs`] over a pre-activation row:
    /// adds `bias` to each element of `a` in place, then writes φ and its
    /// first three derivatives. On x86-64 with FMA the loop is compiled with
    /// hardware fused multiply-adds, which turns the `mul_add` chains inside
    /// the activation polynomials into single instructions; the values are
    /// identical on every path because software `fma` rounds the same way.
    pub(crate) fn eval_derivs_bias_slice(
        self,
        bias: f64,
        a: &mut [f64],
        z: &mut [f64],
        d1: &mut [f64],
        d2: &mut [f64],
        d3: &mut [f64],
    ) {
        #[cfg(target_arch = "x86_64")]
        if math::fma_available() {
            unsafe { eval_derivs_row_fma(self, bias, a, z, d1, d2, d3) };
            return;
        }
        eval_derivs_row(self, bias, a, z, d1, d2, d3);
    }
}

#[inline(always)]
fn eval_derivs_row(
    act: ActivationKind,
    bias: f64,
    a: &mut [f64],
    z: &mut [f64],
    d1: &mut [f64],
    d2: &mut [f64],
    d3: &mut [f64],
) {
    let n = a.len();
    assert!(z.len() == n && d1.len() == n && d2.len() == n && d3.len() == n);
    for j in 0..n {
        let av = a[j] + bias;
        a[j] = av;
        let [f0, f1, f2, f3] = act.eval_derivs(av);
        z[j] = f0;
        d1[j] = f1;
        d2[j] = f2;
        d3[j] = f3;
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn eval_derivs_row_fma(
    act: ActivationKind,
    bias: f64,
    a: &mut [f64],
    z: &mut [f64],
    d1: &mut [f64],
    d2: &mut [f64],
    d3: &mut [f64],
) {
    eval_derivs_row(act, bias, a, z, d1, d2, d3);
}

impl std::str::FromStr for ActivationKind {
    type Err = NetworkError;
    fn from_str(s: &str) -> Result<Self, NetworkError> {
        ActivationKind::ALL
            .into_iter()
            .find(|k| k.label() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                NetworkError::Checkpoint(format!(
                    "unknown activation `{s}` (expected one of tanh, gelu, mish, swish, softplus, tanhexp)"
                ))
            })
    }
}

/// Plain scalar activation evaluation.
#[inline]
pub fn activation_eval(kind: ActivationKind, z: f64) -> f64 {
    kind.eval(z)
}

#[derive(Debug, Clone)]
pub struct MlpModel {
    /// Neuron counts per layer: input 2 (x, t), hidden widths, output 1.
    pub layer_sizes: Vec<usize>,
    pub activation: ActivationKind,
    /// Whether slopes train (otherwise each is fixed at 1/slope_gain).
    pub adaptive: bool,
    /// The fixed gain n multiplying every slope.
    pub slope_gain: u32,
    /// One weight matrix per non-input layer, shape (fan_out, fan_in).
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    /// One trainable slope per hidden layer.
    pub slopes: Vec<f64>,
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<(), NetworkError> {
    if layer_sizes.len() < 3 {
        return Err(NetworkError::InvalidArchitecture(format!(
            "need input, at least one hidden, and output layer, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.iter().any(|&n| n == 0) {
        return Err(NetworkError::InvalidArchitecture(
            "zero-width layer".to_string(),
        ));
    }
    if layer_sizes[0] != 2 || *layer_sizes.last().unwrap() != 1 {
        return Err(NetworkError::InvalidArchitecture(format!(
            "expected 2 inputs and 1 output, got {layer_sizes:?}"
        )));
    }
    Ok(())
}

/// Glorot-normal initialization: weights ~ N(0, 2/(fan_in + fan_out)),
/// biases zero, slopes 0.1 when adaptive else 1/n. Identical seeds produce
/// identical parameters.
pub fn init_glorot(
    layer_sizes: &[usize],
    activation: ActivationKind,
    adaptive: bool,
    slope_gain: u32,
    seed: u64,
) -> Result<MlpModel, NetworkError> {
    validate_sizes(layer_sizes)?;
    if slope_gain == 0 {
        return Err(NetworkError::InvalidArchitecture(
            "slope gain must be positive".to_string(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for w in layer_sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let sd = (2.0 / (fan_in + fan_out) as f64).sqrt();
        let normal = Normal::new(0.0, sd).expect("positive std dev");
        let data: Vec<f64> = (0..fan_out * fan_in)
            .map(|_| normal.sample(&mut rng))
            .collect();
        weights.push(Array2::from_shape_vec((fan_out, fan_in), data).expect("shape"));
        biases.push(Array1::zeros(fan_out));
    }
    let hidden = layer_sizes.len() - 2;
    let slope0 = if adaptive {
        0.1
    } else {
        1.0 / f64::from(slope_gain)
    };
    Ok(MlpModel {
        layer_sizes: layer_sizes.to_vec(),
        activation,
        adaptive,
        slope_gain,
        weights,
        biases,
        slopes: vec![slope0; hidden],
    })
}

struct ModelFn<'m>(&'m MlpModel);

impl SmoothFn2 for ModelFn<'_> {
    fn call<S: Scalar>(&self, x: S, t: S) -> S {
        self.0.forward_scalar(x, t)
    }
}

impl MlpModel {
    pub fn hidden_layers(&self) -> usize {
        self.layer_sizes.len() - 2
    }

    /// Weight and bias count from shape arithmetic (slopes not included).
    pub fn weight_bias_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Full flattened parameter count including slopes.
    pub fn param_count(&self) -> usize {
        self.weight_bias_count() + self.slopes.len()
    }

    /// Parameters in layer order: per hidden layer W (row-major), b, α;
    /// then the output W and b.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.for_each_param(|p| out.push(p));
        out
    }

    fn for_each_param(&self, mut f: impl FnMut(f64)) {
        let hidden = self.hidden_layers();
        for l in 0..self.weights.len() {
            for &w in self.weights[l].iter() {
                f(w);
            }
            for &b in self.biases[l].iter() {
                f(b);
            }
            if l < hidden {
                f(self.slopes[l]);
            }
        }
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<(), NetworkError> {
        if params.len() != self.param_count() {
            return Err(NetworkError::ParamCountMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let hidden = self.hidden_layers();
        let mut it = params.iter().copied();
        for l in 0..self.weights.len() {
            for w in self.weights[l].iter_mut() {
                *w = it.next().unwrap();
            }
            for b in self.biases[l].iter_mut() {
                *b = it.next().unwrap();
            }
            if l < hidden {
                self.slopes[l] = it.next().unwrap();
            }
        }
        Ok(())
    }

    /// Forward pass with parameters drawn from `params` (in flat order),
    /// generic over the scalar carrier. This is the single reference
    /// implementation of the architecture; every other evaluation path
    /// funnels through it or is tested against it.
    pub fn forward_with_params<S: Scalar>(
        &self,
        params: &mut impl Iterator<Item = S>,
        x: S,
        t: S,
    ) -> S {
        let hidden = self.hidden_layers();
        let gain = f64::from(self.slope_gain);
        let mut z: Vec<S> = vec![x, t];
        for l in 0..self.weights.len() {
            let fan_out = self.layer_sizes[l + 1];
            let mut pre: Vec<S> = Vec::with_capacity(fan_out);
            for _ in 0..fan_out {
                let mut acc: Option<S> = None;
                for zj in &z {
                    let w = params.next().expect("parameter iterator exhausted");
                    let term = w * *zj;
                    acc = Some(match acc {
                        None => term,
                        Some(a) => a + term,
                    });
                }
                pre.push(acc.expect("layer has inputs"));
            }
            for p in pre.iter_mut() {
                let b = params.next().expect("parameter iterator exhausted");
                *p = *p + b;
            }
            if l < hidden {
                let alpha = params.next().expect("parameter iterator exhausted");
                let s = alpha.scale(gain);
                z = pre
                    .into_iter()
                    .map(|p| self.activation.eval(s * p))
                    .collect();
            } else {
                z = pre;
            }
        }
        z[0]
    }

    /// Forward pass on any scalar carrier with the stored parameters
    /// treated as constants (derivatives flow through x and t only).
    pub fn forward_scalar<S: Scalar>(&self, x: S, t: S) -> S {
        let mut collected = Vec::with_capacity(self.param_count());
        self.for_each_param(|p| collected.push(p));
        let mut it = collected.into_iter().map(|p| x.lift(p));
        self.forward_with_params(&mut it, x, t)
    }

    /// Plain evaluation u(x, t).
    pub fn forward(&self, x: f64, t: f64) -> f64 {
        self.forward_scalar(x, t)
    }

    /// (u, ∂u, ∂²u) along one input axis via forward-mode duals.
    pub fn forward_jet(
        &self,
        x: f64,
        t: f64,
        direction: Direction,
    ) -> Result<Dual2<f64>, AutodiffError> {
        forward_dual2(&ModelFn(self), x, t, direction)
    }

    /// Mixed derivative u_xt by central-differencing the t-jet's d1 in x
    /// (step 1e-4; accurate to roughly 1e-6 — diagnostic use only).
    pub fn mixed_xt(&self, x: f64, t: f64) -> Result<f64, AutodiffError> {
        let h = 1e-4;
        let plus = self.forward_jet(x + h, t, Direction::T)?;
        let minus = self.forward_jet(x - h, t, Direction::T)?;
        Ok((plus.d1 - minus.d1) / (2.0 * h))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), NetworkError> {
        let file = CheckpointFile::from_model(self);
        let json = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<MlpModel, NetworkError> {
        let text = std::fs::read_to_string(path)?;
        let file: CheckpointFile = serde_json::from_str(&text)?;
        file.into_model()
    }
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    layer_sizes: Vec<usize>,
    activation: ActivationKind,
    adaptive: bool,
    slope_gain: u32,
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
    slopes: Vec<f64>,
}

impl CheckpointFile {
    fn from_model(m: &MlpModel) -> Self {
        CheckpointFile {
            format_version: CHECKPOINT_VERSION,
            layer_sizes: m.layer_sizes.clone(),
            activation: m.activation,
            adaptive: m.adaptive,
            slope_gain: m.slope_gain,
            weights: m
                .weights
                .iter()
                .map(|w| w.rows().into_iter().map(|r| r.to_vec()).collect())
                .collect(),
            biases: m.biases.iter().map(|b| b.to_vec()).collect(),
            slopes: m.slopes.clone(),
        }
    }

    fn into_model(self) -> Result<MlpModel, NetworkError> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(NetworkError::Checkpoint(format!(
                "format version {} unsupported (expected {CHECKPOINT_VERSION})",
                self.format_version
            )));
        }
        validate_sizes(&self.layer_sizes)?;
        let hidden = self.layer_sizes.len() - 2;
        if self.slopes.len() != hidden {
            return Err(NetworkError::Checkpoint(format!(
                "{} slopes for {hidden} hidden layers",
                self.slopes.len()
            )));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (l, w) in self.layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let rows = self.weights.get(l).ok_or_else(|| {
                NetworkError::Checkpoint(format!("missing weight matrix for layer {l}"))
            })?;
            if rows.len() != fan_out || rows.iter().any(|r| r.len() != fan_in) {
                return Err(NetworkError::Checkpoint(format!(
                    "layer {l} weights are not {fan_out}×{fan_in}"
                )));
            }
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            weights.push(Array2::from_shape_vec((fan_out, fan_in), flat).expect("shape"));
            let b = self.biases.get(l).ok_or_else(|| {
                NetworkError::Checkpoint(format!("missing bias vector for layer {l}"))
            })?;
            if b.len() != fan_out {
                return Err(NetworkError::Checkpoint(format!(
                    "layer {l} bias length {} ≠ {fan_out}",
                    b.len()
                )));
            }
            biases.push(Array1::from_vec(b.clone()));
        }
        Ok(MlpModel {
            layer_sizes: self.layer_sizes,
            activation: self.activation,
            adaptive: self.adaptive,
            slope_gain: self.slope_gain,
            weights,
            biases,
            slopes: self.slopes,
        })
    }
}
