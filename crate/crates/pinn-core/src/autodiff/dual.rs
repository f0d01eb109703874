//! Second-order forward-mode dual numbers.
//!
//! A `Dual2` carries a truncated Taylor expansion (value, d1, d2) along one
//! direction: for f(x(s)) with ẋ = d1 seed, d1 = df/ds and d2 = d²f/ds².
//! Components are any [`Scalar`], so `Dual2<f64>` gives plain directional
//! derivatives while `Dual2<Var>` records them on a tape for
//! forward-over-reverse differentiation.

use super::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual2<T> {
    pub v: T,
    pub d1: T,
    pub d2: T,
}

impl Dual2<f64> {
    /// An input variable with first-derivative seed `d1` (d2 = 0).
    #[inline]
    pub fn seeded(v: f64, d1: f64) -> Self {
        Dual2 { v, d1, d2: 0.0 }
    }
}

impl<T: Scalar> Dual2<T> {
    /// A value treated as constant along the differentiation direction.
    #[inline]
    pub fn constant(v: T) -> Self {
        Dual2 {
            v,
            d1: v.lift(0.0),
            d2: v.lift(0.0),
        }
    }

    /// Chain rule for a unary primitive given φ(v), φ′(v), φ″(v).
    #[inline]
    fn chain(self, phi: T, dphi: T, ddphi: T) -> Self {
        Dual2 {
            v: phi,
            d1: dphi * self.d1,
            d2: ddphi * self.d1 * self.d1 + dphi * self.d2,
        }
    }
}

impl<T: Scalar> std::ops::Add for Dual2<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Dual2 {
            v: self.v + rhs.v,
            d1: self.d1 + rhs.d1,
            d2: self.d2 + rhs.d2,
        }
    }
}

impl<T: Scalar> std::ops::Sub for Dual2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Dual2 {
            v: self.v - rhs.v,
            d1: self.d1 - rhs.d1,
            d2: self.d2 - rhs.d2,
        }
    }
}

impl<T: Scalar> std::ops::Mul for Dual2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Dual2 {
            v: self.v * rhs.v,
            d1: self.d1 * rhs.v + self.v * rhs.d1,
            d2: self.d2 * rhs.v + (self.d1 * rhs.d1).scale(2.0) + self.v * rhs.d2,
        }
    }
}

impl<T: Scalar> std::ops::Div for Dual2<T> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let q = self.v / rhs.v;
        let q1 = (self.d1 - q * rhs.d1) / rhs.v;
        let q2 = (self.d2 - (q1 * rhs.d1).scale(2.0) - q * rhs.d2) / rhs.v;
        Dual2 { v: q, d1: q1, d2: q2 }
    }
}

impl<T: Scalar> std::ops::Neg for Dual2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual2 {
            v: -self.v,
            d1: -self.d1,
            d2: -self.d2,
        }
    }
}

impl<T: Scalar> Scalar for Dual2<T> {
    #[inline]
    fn lift(self, c: f64) -> Self {
        Dual2 {
            v: self.v.lift(c),
            d1: self.v.lift(0.0),
            d2: self.v.lift(0.0),
        }
    }

    #[inline]
    fn scale(self, c: f64) -> Self {
        Dual2 {
            v: self.v.scale(c),
            d1: self.d1.scale(c),
            d2: self.d2.scale(c),
        }
    }

    #[inline]
    fn add_const(self, c: f64) -> Self {
        Dual2 {
            v: self.v.add_const(c),
            d1: self.d1,
            d2: self.d2,
        }
    }

    #[inline]
    fn value(self) -> f64 {
        self.v.value()
    }

    #[inline]
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    #[inline]
    fn ln(self) -> Self {
        let inv = self.v.powi(-1);
        self.chain(self.v.ln(), inv, self.v.powi(-2).scale(-1.0))
    }

    #[inline]
    fn tanh(self) -> Self {
        let t = self.v.tanh();
        let sech2 = (t * t).scale(-1.0).add_const(1.0);
        self.chain(t, sech2, (t * sech2).scale(-2.0))
    }

    #[inline]
    fn erf(self) -> Self {
        let phi = self.v.erf();
        // d/dv erf = (2/√π)·e^{−v²}
        let dphi = (self.v * self.v)
            .scale(-1.0)
            .exp()
            .scale(std::f64::consts::FRAC_2_SQRT_PI);
        self.chain(phi, dphi, (self.v * dphi).scale(-2.0))
    }

    #[inline]
    fn sin(self) -> Self {
        let s = self.v.sin();
        let c = self.v.cos();
        self.chain(s, c, s.scale(-1.0))
    }

    #[inline]
    fn cos(self) -> Self {
        let s = self.v.sin();
        let c = self.v.cos();
        self.chain(c, s.scale(-1.0), c.scale(-1.0))
    }

    #[inline]
    fn sigmoid(self) -> Self {
        let s = self.v.sigmoid();
        let d = s * s.scale(-1.0).add_const(1.0);
        self.chain(s, d, d * s.scale(-2.0).add_const(1.0))
    }

    #[inline]
    fn softplus(self) -> Self {
        let s = self.v.sigmoid();
        self.chain(self.v.softplus(), s, s * s.scale(-1.0).add_const(1.0))
    }

    #[inline]
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Dual2::constant(self.v.lift(1.0)),
            1 => self,
            _ => self.chain(
                self.v.powi(n),
                self.v.powi(n - 1).scale(n as f64),
                self.v.powi(n - 2).scale((n as f64) * (n as f64 - 1.0)),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(v: f64, d1: f64, d2: f64) -> Dual2<f64> {
        Dual2 { v, d1, d2 }
    }

    /// Central-difference check of every unary primitive's d1 and d2.
    #[test]
    fn primitives_match_finite_differences() {
        type UnaryOp = (&'static str, fn(Dual2<f64>) -> Dual2<f64>, fn(f64) -> f64);
        let cases: Vec<UnaryOp> = vec![
            ("exp", |x| x.exp(), |x| x.exp()),
            ("ln", |x| x.ln(), |x| x.ln()),
            ("tanh", |x| x.tanh(), |x| x.tanh()),
            ("erf", |x| x.erf(), crate::math::erf),
            ("sin", |x| x.sin(), |x| x.sin()),
            ("cos", |x| x.cos(), |x| x.cos()),
            ("sigmoid", |x| x.sigmoid(), crate::math::sigmoid),
            ("softplus", |x| x.softplus(), crate::math::softplus),
            ("powi3", |x| x.powi(3), |x| x.powi(3)),
        ];
        let h = 1e-5;
        for (name, dual_op, scalar_op) in cases {
            for &x in &[0.3, 0.9, 1.7, 2.4] {
                let out = dual_op(Dual2::seeded(x, 1.0));
                let fd1 = (scalar_op(x + h) - scalar_op(x - h)) / (2.0 * h);
                let fd2 = (scalar_op(x + h) - 2.0 * scalar_op(x) + scalar_op(x - h)) / (h * h);
                assert!(
                    (out.d1 - fd1).abs() < 1e-8 * (1.0 + fd1.abs()),
                    "{name} d1 at {x}: {} vs {fd1}",
                    out.d1
                );
                assert!(
                    (out.d2 - fd2).abs() < 1e-4 * (1.0 + fd2.abs()),
                    "{name} d2 at {x}: {} vs {fd2}",
                    out.d2
                );
                assert!((out.v - scalar_op(x)).abs() < 1e-14 * (1.0 + scalar_op(x).abs()));
            }
        }
    }

    #[test]
    fn division_inverts_multiplication() {
        let f = d(1.7, -0.4, 2.2);
        let g = d(0.8, 1.3, -0.6);
        let back = (f * g) / g;
        assert!((back.v - f.v).abs() < 1e-14);
        assert!((back.d1 - f.d1).abs() < 1e-13);
        assert!((back.d2 - f.d2).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn product_rule_second_order(
            fv in -2.0f64..2.0, f1 in -2.0f64..2.0, f2 in -2.0f64..2.0,
            gv in -2.0f64..2.0, g1 in -2.0f64..2.0, g2 in -2.0f64..2.0,
        ) {
            let p = d(fv, f1, f2) * d(gv, g1, g2);
            prop_assert!((p.d2 - (f2 * gv + 2.0 * f1 * g1 + fv * g2)).abs() < 1e-12);
            prop_assert!((p.d1 - (f1 * gv + fv * g1)).abs() < 1e-12);
        }

        #[test]
        fn pythagorean_identity_is_flat(x in -3.0f64..3.0) {
            let s = Dual2::seeded(x, 1.0);
            let one = s.sin() * s.sin() + s.cos() * s.cos();
            prop_assert!((one.v - 1.0).abs() < 1e-14);
            prop_assert!(one.d1.abs() < 1e-14);
            prop_assert!(one.d2.abs() < 1e-13);
        }

        #[test]
        fn exp_ln_round_trip(x in 0.05f64..4.0) {
            let s = Dual2::seeded(x, 1.0);
            let r = s.ln().exp();
            prop_assert!((r.v - x).abs() < 1e-12);
            prop_assert!((r.d1 - 1.0).abs() < 1e-11);
            prop_assert!(r.d2.abs() < 1e-10);
        }
    }

    /// Constants must not leak derivative components.
    #[test]
    fn constants_are_flat() {
        let c = Dual2::constant(3.5);
        assert_eq!(c.d1, 0.0);
        assert_eq!(c.d2, 0.0);
        let x = Dual2::seeded(1.0, 1.0);
        let y = x * c + x.lift(2.0);
        assert!((y.v - 5.5).abs() < 1e-15);
        assert!((y.d1 - 3.5).abs() < 1e-15);
        assert_eq!(y.d2, 0.0);
    }
}
