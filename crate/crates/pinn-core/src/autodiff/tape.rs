//! Reverse-mode gradient tape.
//!
//! Values are recorded eagerly as a Wengert list: each node stores its
//! value, up to two parent indices, and the local partial derivatives taken
//! at record time. A backward sweep in reverse insertion order accumulates
//! adjoints, so gradients of all leaves come from one pass. Recording is
//! single-owner (interior mutability, not `Sync`); ops on variables from
//! two different tapes are a programming error and panic.

use super::{AutodiffError, Scalar};
use std::cell::RefCell;

#[derive(Clone, Copy)]
struct Node {
    value: f64,
    partial: [f64; 2],
    parent: [u32; 2],
    arity: u8,
}

struct TapeInner {
    nodes: Vec<Node>,
    /// First domain fault, as (primitive name, node index).
    fault: Option<(&'static str, usize)>,
}

pub struct GradTape {
    inner: RefCell<TapeInner>,
}

impl Default for GradTape {
    fn default() -> Self {
        Self::new()
    }
}

impl GradTape {
    pub fn new() -> Self {
        GradTape {
            inner: RefCell::new(TapeInner {
                nodes: Vec::new(),
                fault: None,
            }),
        }
    }

    /// A differentiable input.
    pub fn leaf(&self, value: f64) -> Var<'_> {
        self.push(Node {
            value,
            partial: [0.0; 2],
            parent: [0; 2],
            arity: 0,
        })
    }

    /// A recorded constant (gradient never flows into it, but it can be an
    /// operand like any other node).
    pub fn constant(&self, value: f64) -> Var<'_> {
        self.leaf(value)
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The first domain fault recorded during evaluation, if any.
    pub fn first_fault(&self) -> Option<(&'static str, usize)> {
        self.inner.borrow().fault
    }

    fn push(&self, node: Node) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let idx = inner.nodes.len();
        assert!(idx <= u32::MAX as usize, "tape exceeded u32 node capacity");
        inner.nodes.push(node);
        Var {
            tape: self,
            idx: idx as u32,
        }
    }

    fn unary(&self, a: Var<'_>, value: f64, da: f64) -> Var<'_> {
        self.push(Node {
            value,
            partial: [da, 0.0],
            parent: [a.idx, 0],
            arity: 1,
        })
    }

    fn binary(&self, a: Var<'_>, b: Var<'_>, value: f64, da: f64, db: f64) -> Var<'_> {
        self.push(Node {
            value,
            partial: [da, db],
            parent: [a.idx, b.idx],
            arity: 2,
        })
    }

    fn record_fault(&self, primitive: &'static str) {
        let mut inner = self.inner.borrow_mut();
        let node = inner.nodes.len();
        if inner.fault.is_none() {
            inner.fault = Some((primitive, node));
        }
    }

    /// Adjoints of every node with respect to `output` (reverse sweep).
    pub fn adjoints(&self, output: Var<'_>) -> Result<Vec<f64>, AutodiffError> {
        if !output.belongs_to(self) {
            return Err(AutodiffError::TapeMismatch);
        }
        let inner = self.inner.borrow();
        if let Some((primitive, node)) = inner.fault {
            return Err(AutodiffError::Domain { primitive, node });
        }
        let mut adj = vec![0.0; inner.nodes.len()];
        adj[output.idx as usize] = 1.0;
        for i in (0..inner.nodes.len()).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = &inner.nodes[i];
            for k in 0..node.arity as usize {
                adj[node.parent[k] as usize] += a * node.partial[k];
            }
        }
        Ok(adj)
    }
}

/// Handle to one tape node. Cheap to copy; tied to its tape by lifetime.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t GradTape,
    idx: u32,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("idx", &self.idx)
            .field("value", &self.value())
            .finish()
    }
}

impl<'t> Var<'t> {
    pub(super) fn belongs_to(&self, tape: &GradTape) -> bool {
        std::ptr::eq(self.tape, tape)
    }

    pub(super) fn index(&self) -> usize {
        self.idx as usize
    }

    fn same_tape(self, other: Var<'t>) -> Var<'t> {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "operands recorded on different tapes"
        );
        other
    }
}

impl<'t> std::ops::Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Var<'t> {
        let rhs = self.same_tape(rhs);
        self.tape
            .binary(self, rhs, self.value() + rhs.value(), 1.0, 1.0)
    }
}

impl<'t> std::ops::Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Var<'t> {
        let rhs = self.same_tape(rhs);
        self.tape
            .binary(self, rhs, self.value() - rhs.value(), 1.0, -1.0)
    }
}

impl<'t> std::ops::Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Var<'t> {
        let rhs = self.same_tape(rhs);
        let (a, b) = (self.value(), rhs.value());
        self.tape.binary(self, rhs, a * b, b, a)
    }
}

impl<'t> std::ops::Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Self) -> Var<'t> {
        let rhs = self.same_tape(rhs);
        let (a, b) = (self.value(), rhs.value());
        if b == 0.0 {
            self.tape.record_fault("div");
        }
        self.tape.binary(self, rhs, a / b, 1.0 / b, -a / (b * b))
    }
}

impl<'t> std::ops::Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.tape.unary(self, -self.value(), -1.0)
    }
}

impl<'t> Scalar for Var<'t> {
    fn lift(self, c: f64) -> Self {
        self.tape.constant(c)
    }

    fn scale(self, c: f64) -> Self {
        self.tape.unary(self, c * self.value(), c)
    }

    fn add_const(self, c: f64) -> Self {
        self.tape.unary(self, self.value() + c, 1.0)
    }

    fn value(self) -> f64 {
        self.tape.inner.borrow().nodes[self.idx as usize].value
    }

    fn exp(self) -> Self {
        let e = self.value().exp();
        self.tape.unary(self, e, e)
    }

    fn ln(self) -> Self {
        let v = self.value();
        if v <= 0.0 {
            self.tape.record_fault("ln");
        }
        self.tape.unary(self, v.ln(), 1.0 / v)
    }

    fn tanh(self) -> Self {
        let t = self.value().tanh();
        self.tape.unary(self, t, 1.0 - t * t)
    }

    fn erf(self) -> Self {
        let v = self.value();
        let d = std::f64::consts::FRAC_2_SQRT_PI * (-v * v).exp();
        self.tape.unary(self, crate::math::erf(v), d)
    }

    fn sin(self) -> Self {
        let v = self.value();
        self.tape.unary(self, v.sin(), v.cos())
    }

    fn cos(self) -> Self {
        let v = self.value();
        self.tape.unary(self, v.cos(), -v.sin())
    }

    fn sigmoid(self) -> Self {
        let s = crate::math::sigmoid(self.value());
        self.tape.unary(self, s, s * (1.0 - s))
    }

    fn softplus(self) -> Self {
        let v = self.value();
        self.tape
            .unary(self, crate::math::softplus(v), crate::math::sigmoid(v))
    }

    fn powi(self, n: i32) -> Self {
        let v = self.value();
        if n < 0 && v == 0.0 {
            self.tape.record_fault("powi");
        }
        self.tape
            .unary(self, v.powi(n), f64::from(n) * v.powi(n - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_wrt_params;
    use proptest::prelude::*;

    #[test]
    fn product_plus_sine_gradient() {
        // f = x·y + sin x: ∂f/∂x = y + cos x, ∂f/∂y = x.
        let tape = GradTape::new();
        let x = tape.leaf(2.0);
        let y = tape.leaf(3.0);
        let f = x * y + x.sin();
        let g = grad_wrt_params(&tape, f, &[x, y]).unwrap();
        assert!((g[0] - (3.0 + 2.0f64.cos())).abs() < 1e-14);
        assert!((g[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn unused_leaf_gets_zero_gradient() {
        let tape = GradTape::new();
        let x = tape.leaf(1.5);
        let dead = tape.leaf(9.0);
        let f = x.exp();
        let g = grad_wrt_params(&tape, f, &[x, dead]).unwrap();
        assert!((g[0] - 1.5f64.exp()).abs() < 1e-12);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn cross_tape_query_is_an_error() {
        let tape_a = GradTape::new();
        let tape_b = GradTape::new();
        let x = tape_a.leaf(1.0);
        let y = tape_b.leaf(2.0);
        let f = x.scale(2.0);
        let err = grad_wrt_params(&tape_a, f, &[x, y]).unwrap_err();
        assert!(matches!(err, AutodiffError::TapeMismatch));
        let err = grad_wrt_params(&tape_b, f, &[]).unwrap_err();
        assert!(matches!(err, AutodiffError::TapeMismatch));
    }

    #[test]
    fn domain_fault_names_node() {
        let tape = GradTape::new();
        let x = tape.leaf(-1.0);
        let f = x.ln() + x;
        let err = grad_wrt_params(&tape, f, &[x]).unwrap_err();
        match err {
            AutodiffError::Domain { primitive, node } => {
                assert_eq!(primitive, "ln");
                assert_eq!(node, 1);
            }
            other => panic!("expected domain fault, got {other:?}"),
        }
    }

    #[test]
    fn gradients_are_bit_identical_across_rebuilds() {
        let build = || {
            let tape = GradTape::new();
            let x = tape.leaf(0.37);
            let y = tape.leaf(-1.21);
            let f = (x * y).tanh() * x.sigmoid() + y.softplus();
            grad_wrt_params(&tape, f, &[x, y]).unwrap()
        };
        let (a, b) = (build(), build());
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }

    #[test]
    fn fan_out_accumulates() {
        // f = x·x + x: ∂f/∂x = 2x + 1, exercising repeated operand use.
        let tape = GradTape::new();
        let x = tape.leaf(0.8);
        let f = x * x + x;
        let g = grad_wrt_params(&tape, f, &[x]).unwrap();
        assert!((g[0] - 2.6).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn sum_of_leaves_has_unit_gradients(vals in proptest::collection::vec(-10.0f64..10.0, 1..12)) {
            let tape = GradTape::new();
            let leaves: Vec<Var> = vals.iter().map(|&v| tape.leaf(v)).collect();
            let sum = leaves[1..].iter().fold(leaves[0], |acc, &v| acc + v);
            let g = grad_wrt_params(&tape, sum, &leaves).unwrap();
            for gi in g {
                prop_assert_eq!(gi, 1.0);
            }
        }

        #[test]
        fn scaling_scales_the_gradient(x in -3.0f64..3.0, c in -5.0f64..5.0) {
            let tape = GradTape::new();
            let leaf = tape.leaf(x);
            let f = leaf.tanh().scale(c);
            let g = grad_wrt_params(&tape, f, &[leaf]).unwrap();
            let expect = c * (1.0 - x.tanh() * x.tanh());
            prop_assert!((g[0] - expect).abs() < 1e-12);
        }
    }
}
