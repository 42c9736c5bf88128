//! Forward-mode jets over the two spatio-temporal inputs.
//!
//! A jet carries a value together with its exact derivatives with respect to
//! the seeded coordinates (x, t), propagated through every primitive by the
//! first/second-order chain rule. [`Jet2`] carries the full symmetric
//! Hessian (one stored off-diagonal entry); [`Jet1`] carries gradients only
//! and is used for operators that never ask for second derivatives.
//!
//! Jets are themselves [`Scalar`]s over an inner scalar `S`, so the same
//! network/scan code runs on `Jet2<f64>` for evaluation and `Jet2<Var>`
//! when parameter gradients of derivative-built losses are needed.

use super::scalar::Scalar;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Derivative-carrying scalar seeded on the (x, t) coordinates of a
/// collocation point.
pub trait Jet: Scalar {
    /// The scalar the jet's components are made of (`f64` or a tape `Var`).
    type Inner: Scalar;

    /// Highest derivative order carried (0, 1 or 2).
    const ORDER: usize;

    /// Seeds the coordinate pair: the first jet has value `x` and gradient
    /// (1, 0); the second has value `t` and gradient (0, 1); Hessians are
    /// zero. Inputs must be finite.
    fn seed_xt(x: f64, t: f64) -> (Self, Self);

    /// Lifts an inner scalar (a network parameter) to a constant jet.
    fn lift(s: Self::Inner) -> Self;

    fn val(self) -> Self::Inner;
    fn dx(self) -> Self::Inner;
    fn dt(self) -> Self::Inner;
    fn dxx(self) -> Self::Inner;
    fn dxt(self) -> Self::Inner;
    fn dtt(self) -> Self::Inner;
}

/// Order-0 "jet": plain values with no derivative structure. Lets
/// prediction/export paths run the exact same model code.
impl Jet for f64 {
    type Inner = f64;
    const ORDER: usize = 0;

    fn seed_xt(x: f64, t: f64) -> (Self, Self) {
        assert!(x.is_finite() && t.is_finite(), "non-finite seed coordinate");
        (x, t)
    }
    fn lift(s: f64) -> Self {
        s
    }
    fn val(self) -> f64 {
        self
    }
    fn dx(self) -> f64 {
        panic!("value-only evaluation carries no first derivatives")
    }
    fn dt(self) -> f64 {
        panic!("value-only evaluation carries no first derivatives")
    }
    fn dxx(self) -> f64 {
        panic!("value-only evaluation carries no second derivatives")
    }
    fn dxt(self) -> f64 {
        panic!("value-only evaluation carries no second derivatives")
    }
    fn dtt(self) -> f64 {
        panic!("value-only evaluation carries no second derivatives")
    }
}

/// First-order jet: value and gradient (d/dx, d/dt).
#[derive(Clone, Copy, Debug)]
pub struct Jet1<S> {
    pub v: S,
    pub gx: S,
    pub gt: S,
}

/// Second-order jet: value, gradient, and symmetric Hessian
/// (d2/dx2, d2/dxdt, d2/dt2).
#[derive(Clone, Copy, Debug)]
pub struct Jet2<S> {
    pub v: S,
    pub gx: S,
    pub gt: S,
    pub hxx: S,
    pub hxt: S,
    pub htt: S,
}

impl<S: Scalar> Jet1<S> {
    fn chain(self, f0: S, f1: S) -> Self {
        Jet1 {
            v: f0,
            gx: f1 * self.gx,
            gt: f1 * self.gt,
        }
    }
}

impl<S: Scalar> Jet2<S> {
    /// Unary chain rule: `out = f(self)` given f, f', f'' at the value.
    fn chain(self, f0: S, f1: S, f2: S) -> Self {
        Jet2 {
            v: f0,
            gx: f1 * self.gx,
            gt: f1 * self.gt,
            hxx: f1 * self.hxx + f2 * self.gx * self.gx,
            hxt: f1 * self.hxt + f2 * self.gx * self.gt,
            htt: f1 * self.htt + f2 * self.gt * self.gt,
        }
    }
}

impl<S: Scalar> Add for Jet1<S> {
    type Output = Self;
    fn add(self, r: Self) -> Self {
        Jet1 {
            v: self.v + r.v,
            gx: self.gx + r.gx,
            gt: self.gt + r.gt,
        }
    }
}

impl<S: Scalar> Sub for Jet1<S> {
    type Output = Self;
    fn sub(self, r: Self) -> Self {
        Jet1 {
            v: self.v - r.v,
            gx: self.gx - r.gx,
            gt: self.gt - r.gt,
        }
    }
}

impl<S: Scalar> Mul for Jet1<S> {
    type Output = Self;
    fn mul(self, r: Self) -> Self {
        Jet1 {
            v: self.v * r.v,
            gx: self.gx * r.v + self.v * r.gx,
            gt: self.gt * r.v + self.v * r.gt,
        }
    }
}

impl<S: Scalar> Div for Jet1<S> {
    type Output = Self;
    fn div(self, r: Self) -> Self {
        let v = self.v / r.v;
        Jet1 {
            v,
            gx: (self.gx - v * r.gx) / r.v,
            gt: (self.gt - v * r.gt) / r.v,
        }
    }
}

impl<S: Scalar> Neg for Jet1<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Jet1 {
            v: -self.v,
            gx: -self.gx,
            gt: -self.gt,
        }
    }
}

impl<S: Scalar> Add for Jet2<S> {
    type Output = Self;
    fn add(self, r: Self) -> Self {
        Jet2 {
            v: self.v + r.v,
            gx: self.gx + r.gx,
            gt: self.gt + r.gt,
            hxx: self.hxx + r.hxx,
            hxt: self.hxt + r.hxt,
            htt: self.htt + r.htt,
        }
    }
}

impl<S: Scalar> Sub for Jet2<S> {
    type Output = Self;
    fn sub(self, r: Self) -> Self {
        Jet2 {
            v: self.v - r.v,
            gx: self.gx - r.gx,
            gt: self.gt - r.gt,
            hxx: self.hxx - r.hxx,
            hxt: self.hxt - r.hxt,
            htt: self.htt - r.htt,
        }
    }
}

impl<S: Scalar> Mul for Jet2<S> {
    type Output = Self;
    fn mul(self, r: Self) -> Self {
        Jet2 {
            v: self.v * r.v,
            gx: self.gx * r.v + self.v * r.gx,
            gt: self.gt * r.v + self.v * r.gt,
            hxx: self.hxx * r.v + self.v * r.hxx + (self.gx * r.gx).scale(2.0),
            hxt: self.hxt * r.v + self.v * r.hxt + self.gx * r.gt + self.gt * r.gx,
            htt: self.htt * r.v + self.v * r.htt + (self.gt * r.gt).scale(2.0),
        }
    }
}

impl<S: Scalar> Div for Jet2<S> {
    type Output = Self;
    fn div(self, r: Self) -> Self {
        let v = self.v / r.v;
        let gx = (self.gx - v * r.gx) / r.v;
        let gt = (self.gt - v * r.gt) / r.v;
        Jet2 {
            v,
            gx,
            gt,
            hxx: (self.hxx - v * r.hxx - (gx * r.gx).scale(2.0)) / r.v,
            hxt: (self.hxt - v * r.hxt - gx * r.gt - gt * r.gx) / r.v,
            htt: (self.htt - v * r.htt - (gt * r.gt).scale(2.0)) / r.v,
        }
    }
}

impl<S: Scalar> Neg for Jet2<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Jet2 {
            v: -self.v,
            gx: -self.gx,
            gt: -self.gt,
            hxx: -self.hxx,
            hxt: -self.hxt,
            htt: -self.htt,
        }
    }
}

impl<S: Scalar> Scalar for Jet1<S> {
    fn lit(c: f64) -> Self {
        Jet1 {
            v: S::lit(c),
            gx: S::lit(0.0),
            gt: S::lit(0.0),
        }
    }
    fn value(self) -> f64 {
        self.v.value()
    }
    fn scale(self, c: f64) -> Self {
        Jet1 {
            v: self.v.scale(c),
            gx: self.gx.scale(c),
            gt: self.gt.scale(c),
        }
    }
    fn shift(self, c: f64) -> Self {
        Jet1 {
            v: self.v.shift(c),
            ..self
        }
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn exp_m1(self) -> Self {
        let e1 = self.v.exp_m1();
        self.chain(e1, e1.shift(1.0))
    }
    fn tanh(self) -> Self {
        let t = self.v.tanh();
        self.chain(t, -t.square() + S::lit(1.0))
    }
    fn softplus(self) -> Self {
        self.chain(self.v.softplus(), self.v.sigmoid())
    }
    fn sigmoid(self) -> Self {
        let s = self.v.sigmoid();
        self.chain(s, s * (-s + S::lit(1.0)))
    }
    fn relu(self) -> Self {
        if self.v.value() > 0.0 {
            self
        } else {
            Self::lit(0.0)
        }
    }
    fn square(self) -> Self {
        let two_v = self.v.scale(2.0);
        Jet1 {
            v: self.v.square(),
            gx: two_v * self.gx,
            gt: two_v * self.gt,
        }
    }
}

impl<S: Scalar> Scalar for Jet2<S> {
    fn lit(c: f64) -> Self {
        Jet2 {
            v: S::lit(c),
            gx: S::lit(0.0),
            gt: S::lit(0.0),
            hxx: S::lit(0.0),
            hxt: S::lit(0.0),
            htt: S::lit(0.0),
        }
    }
    fn value(self) -> f64 {
        self.v.value()
    }
    fn scale(self, c: f64) -> Self {
        Jet2 {
            v: self.v.scale(c),
            gx: self.gx.scale(c),
            gt: self.gt.scale(c),
            hxx: self.hxx.scale(c),
            hxt: self.hxt.scale(c),
            htt: self.htt.scale(c),
        }
    }
    fn shift(self, c: f64) -> Self {
        Jet2 {
            v: self.v.shift(c),
            ..self
        }
    }
    fn sin(self) -> Self {
        let s = self.v.sin();
        let c = self.v.cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let s = self.v.sin();
        let c = self.v.cos();
        self.chain(c, -s, -c)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
    fn exp_m1(self) -> Self {
        let e1 = self.v.exp_m1();
        let e = e1.shift(1.0);
        self.chain(e1, e, e)
    }
    fn tanh(self) -> Self {
        let t = self.v.tanh();
        let d = -t.square() + S::lit(1.0);
        self.chain(t, d, t.scale(-2.0) * d)
    }
    fn softplus(self) -> Self {
        let s = self.v.sigmoid();
        self.chain(self.v.softplus(), s, s * (-s + S::lit(1.0)))
    }
    fn sigmoid(self) -> Self {
        let s = self.v.sigmoid();
        let d = s * (-s + S::lit(1.0));
        self.chain(s, d, d * (s.scale(-2.0).shift(1.0)))
    }
    fn relu(self) -> Self {
        if self.v.value() > 0.0 {
            self
        } else {
            Self::lit(0.0)
        }
    }
    fn square(self) -> Self {
        let two_v = self.v.scale(2.0);
        Jet2 {
            v: self.v.square(),
            gx: two_v * self.gx,
            gt: two_v * self.gt,
            hxx: two_v * self.hxx + self.gx.square().scale(2.0),
            hxt: two_v * self.hxt + (self.gx * self.gt).scale(2.0),
            htt: two_v * self.htt + self.gt.square().scale(2.0),
        }
    }
}

impl<S: Scalar> Jet for Jet1<S> {
    type Inner = S;
    const ORDER: usize = 1;

    fn seed_xt(x: f64, t: f64) -> (Self, Self) {
        assert!(x.is_finite() && t.is_finite(), "non-finite seed coordinate");
        (
            Jet1 {
                v: S::lit(x),
                gx: S::lit(1.0),
                gt: S::lit(0.0),
            },
            Jet1 {
                v: S::lit(t),
                gx: S::lit(0.0),
                gt: S::lit(1.0),
            },
        )
    }
    fn lift(s: S) -> Self {
        Jet1 {
            v: s,
            gx: S::lit(0.0),
            gt: S::lit(0.0),
        }
    }
    fn val(self) -> S {
        self.v
    }
    fn dx(self) -> S {
        self.gx
    }
    fn dt(self) -> S {
        self.gt
    }
    fn dxx(self) -> S {
        panic!("first-order jet carries no second derivatives")
    }
    fn dxt(self) -> S {
        panic!("first-order jet carries no second derivatives")
    }
    fn dtt(self) -> S {
        panic!("first-order jet carries no second derivatives")
    }
}

impl<S: Scalar> Jet for Jet2<S> {
    type Inner = S;
    const ORDER: usize = 2;

    fn seed_xt(x: f64, t: f64) -> (Self, Self) {
        assert!(x.is_finite() && t.is_finite(), "non-finite seed coordinate");
        let mut jx = Self::lit(x);
        jx.gx = S::lit(1.0);
        let mut jt = Self::lit(t);
        jt.gt = S::lit(1.0);
        (jx, jt)
    }
    fn lift(s: S) -> Self {
        let mut j = Self::lit(0.0);
        j.v = s;
        j
    }
    fn val(self) -> S {
        self.v
    }
    fn dx(self) -> S {
        self.gx
    }
    fn dt(self) -> S {
        self.gt
    }
    fn dxx(self) -> S {
        self.hxx
    }
    fn dxt(self) -> S {
        self.hxt
    }
    fn dtt(self) -> S {
        self.htt
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type J2 = Jet2<f64>;
    type J1 = Jet1<f64>;

    /// Central finite differences of a scalar field built from Jet2<f64>
    /// evaluations, probing value-only outputs.
    fn fd_grad_hess(f: impl Fn(f64, f64) -> f64, x: f64, t: f64, h: f64) -> [f64; 5] {
        let gx = (f(x + h, t) - f(x - h, t)) / (2.0 * h);
        let gt = (f(x, t + h) - f(x, t - h)) / (2.0 * h);
        let hxx = (f(x + h, t) - 2.0 * f(x, t) + f(x - h, t)) / (h * h);
        let htt = (f(x, t + h) - 2.0 * f(x, t) + f(x, t - h)) / (h * h);
        let hxt = (f(x + h, t + h) - f(x + h, t - h) - f(x - h, t + h) + f(x - h, t - h))
            / (4.0 * h * h);
        [gx, gt, hxx, hxt, htt]
    }

    #[test]
    fn seed_basics() {
        let (jx, jt) = J2::seed_xt(0.0, 0.0);
        assert_eq!((jx.v, jx.gx, jx.gt, jx.hxx, jx.hxt, jx.htt), (0.0, 1.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!((jt.v, jt.gx, jt.gt), (0.0, 0.0, 1.0));

        let (jx, jt) = J2::seed_xt(std::f64::consts::PI, 0.5);
        assert_eq!(jx.v, std::f64::consts::PI);
        assert_eq!(jt.v, 0.5);
        assert_eq!((jx.gx, jt.gt), (1.0, 1.0));
    }

    #[test]
    #[should_panic(expected = "non-finite")]
    fn seed_rejects_non_finite() {
        let _ = J2::seed_xt(f64::NAN, 0.0);
    }

    #[test]
    fn product_of_coordinates() {
        // f(x,t) = x*t: grad (t, x), d2/dxdt = 1
        let (jx, jt) = J2::seed_xt(3.0, -2.0);
        let f = jx * jt;
        assert_eq!(f.v, -6.0);
        assert_eq!(f.gx, -2.0);
        assert_eq!(f.gt, 3.0);
        assert_eq!(f.hxt, 1.0);
        assert_eq!((f.hxx, f.htt), (0.0, 0.0));
    }

    #[test]
    fn sin_at_zero() {
        let (jx, _) = J2::seed_xt(0.0, 0.0);
        let s = jx.sin();
        assert_eq!((s.v, s.gx, s.hxx), (0.0, 1.0, 0.0));
    }

    #[test]
    fn square_at_three() {
        let (jx, _) = J2::seed_xt(3.0, 0.0);
        let s = jx.square();
        assert_eq!((s.v, s.gx, s.hxx), (9.0, 6.0, 2.0));
    }

    #[test]
    fn mul_by_self_is_square() {
        let (jx, _) = J2::seed_xt(2.0, 0.0);
        let m = jx * jx;
        assert_eq!((m.v, m.gx, m.hxx), (4.0, 4.0, 2.0));
    }

    #[test]
    fn add_linearity() {
        let (jx, jt) = J2::seed_xt(1.0, 2.0);
        let s = jx + jt;
        assert_eq!((s.gx, s.gt), (1.0, 1.0));
        assert_eq!((s.hxx, s.hxt, s.htt), (0.0, 0.0, 0.0));
    }

    #[test]
    fn division_matches_symbolic() {
        // f = x/t at (1,2): fx=1/t, ft=-x/t^2, fxx=0, fxt=-1/t^2, ftt=2x/t^3
        let (jx, jt) = J2::seed_xt(1.0, 2.0);
        let q = jx / jt;
        assert!((q.v - 0.5).abs() < 1e-12);
        assert!((q.gx - 0.5).abs() < 1e-12);
        assert!((q.gt - (-0.25)).abs() < 1e-12);
        assert!((q.hxx - 0.0).abs() < 1e-12);
        assert!((q.hxt - (-0.25)).abs() < 1e-12);
        assert!((q.htt - 0.25).abs() < 1e-12);
    }

    #[test]
    fn tanh_against_finite_differences() {
        let field = |x: f64, t: f64| {
            let (jx, jt) = <f64 as Jet>::seed_xt(x, t);
            (jx * jx + jt.scale(0.5)).tanh()
        };
        let (x, t) = (0.37, -0.81);
        let (jx, jt) = J2::seed_xt(x, t);
        let j = (jx * jx + jt.scale(0.5)).tanh();
        let fd = fd_grad_hess(field, x, t, 1e-4);
        for (ad, fd) in [j.gx, j.gt, j.hxx, j.hxt, j.htt].iter().zip(fd.iter()) {
            let rel = (ad - fd).abs() / 1.0f64.max(ad.abs()).max(fd.abs());
            assert!(rel < 1e-6, "ad={ad} fd={fd}");
        }
    }

    #[test]
    fn hessian_cross_term_is_symmetric_under_seed_swap() {
        // Swapping the roles of the two seeds transposes the Hessian; the
        // stored off-diagonal must come out bit-identical.
        let build = |a: J2, b: J2| (a * b.sin() + (a * a * b).exp().scale(0.1)).softplus();
        let (jx, jt) = J2::seed_xt(0.6, -0.3);
        let f = build(jx, jt);
        // Seed t in the x-slot and x in the t-slot.
        let (st, sx) = J2::seed_xt(-0.3, 0.6);
        let g = build(sx, st);
        assert_eq!(f.hxt.to_bits(), g.hxt.to_bits());
        assert_eq!(f.hxx.to_bits(), g.htt.to_bits());
    }

    #[test]
    fn jet1_matches_jet2_first_order_bitwise() {
        let (x1, t1) = J1::seed_xt(0.9, 0.2);
        let (x2, t2) = J2::seed_xt(0.9, 0.2);
        let f1 = ((x1 * t1).sin() + x1.exp().scale(0.3)).tanh();
        let f2 = ((x2 * t2).sin() + x2.exp().scale(0.3)).tanh();
        assert_eq!(f1.v.to_bits(), f2.v.to_bits());
        assert_eq!(f1.gx.to_bits(), f2.gx.to_bits());
        assert_eq!(f1.gt.to_bits(), f2.gt.to_bits());
    }

    #[test]
    fn lifted_parameters_have_zero_derivatives() {
        let w = J2::lift(1.7);
        let (jx, _) = J2::seed_xt(2.0, 0.0);
        let p = w * jx;
        assert_eq!(p.gx, 1.7);
        assert_eq!(p.hxx, 0.0);
    }
}
