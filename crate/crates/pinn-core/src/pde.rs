//! Burgers problem instances and the PDE residual operator
//!
//! ```text
//! R[u] = u_t + a·u·u_x − ν·u_xx
//! ```
//!
//! evaluated through the network's forward-mode jets.

use crate::autodiff::{AutodiffError, Direction};
use crate::network::MlpModel;
use crate::oracle::{self, OracleError, ProblemTag, SeriesCoefficients};

/// One benchmark instance: coefficients, domain box, initial profile, zero
/// Dirichlet boundaries, and the series oracle that solves it.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub tag: ProblemTag,
    /// Kinematic viscosity ν > 0.
    pub nu: f64,
    /// Convective coefficient a (1 for both benchmarks, carried explicitly).
    pub a: f64,
    pub x_range: (f64, f64),
    pub t_range: (f64, f64),
    pub coeffs: SeriesCoefficients,
}

/// ν = 0.1, a = 1, u(x,0) = 4x(1−x) on [0,1]×[0,3].
pub fn make_problem1() -> ProblemSpec {
    ProblemSpec {
        tag: ProblemTag::P1,
        nu: 0.1,
        a: 1.0,
        x_range: (0.0, 1.0),
        t_range: (0.0, 3.0),
        coeffs: oracle::default_coefficients(ProblemTag::P1).clone(),
    }
}

/// ν = 0.1, a = 1, u(x,0) = sin(πx) on [0,1]×[0,3].
pub fn make_problem2() -> ProblemSpec {
    ProblemSpec {
        tag: ProblemTag::P2,
        nu: 0.1,
        a: 1.0,
        x_range: (0.0, 1.0),
        t_range: (0.0, 3.0),
        coeffs: oracle::default_coefficients(ProblemTag::P2).clone(),
    }
}

impl ProblemSpec {
    /// The initial profile u₀(x); boundary values are identically zero.
    pub fn initial(&self, x: f64) -> f64 {
        self.tag.initial(x)
    }

    /// Exact solution via the series oracle.
    pub fn exact(&self, x: f64, t: f64) -> Result<f64, OracleError> {
        oracle::exact_u(&self.coeffs, x, t)
    }

    /// (u_x, u_t) of the exact solution via the series oracle.
    pub fn exact_gradient(&self, x: f64, t: f64) -> Result<(f64, f64), OracleError> {
        oracle::exact_gradient(&self.coeffs, x, t)
    }

    pub fn contains(&self, x: f64, t: f64) -> bool {
        let (xl, xh) = self.x_range;
        let (tl, th) = self.t_range;
        (xl..=xh).contains(&x) && (tl..=th).contains(&t)
    }

    /// Strictly interior with margin on every side, for finite-difference
    /// probes that step off the point.
    pub fn interior(&self, x: f64, t: f64, margin: f64) -> bool {
        let (xl, xh) = self.x_range;
        let (tl, th) = self.t_range;
        x > xl + margin && x < xh - margin && t > tl + margin && t < th - margin
    }
}

/// The residual assembled from a known jet.
#[inline]
pub fn residual_from_jet(a: f64, nu: f64, u: f64, u_x: f64, u_t: f64, u_xx: f64) -> f64 {
    u_t + a * u * u_x - nu * u_xx
}

/// R[u_Θ](x, t) for the network via two forward-mode jet passes
/// (x-direction for u, u_x, u_xx; t-direction for u_t).
pub fn residual(
    model: &MlpModel,
    problem: &ProblemSpec,
    x: f64,
    t: f64,
) -> Result<f64, AutodiffError> {
    let jx = model.forward_jet(x, t, Direction::X)?;
    let jt = model.forward_jet(x, t, Direction::T)?;
    Ok(residual_from_jet(problem.a, problem.nu, jx.v, jx.d1, jt.d1, jx.d2))
}
