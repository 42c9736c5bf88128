use std::ops::{Add, Div, Mul, Neg, Sub};

/// A differentiable scalar: the common interface of plain `f64`, the tape
/// variable [`crate::autodiff::Var`], and jets built over either.
///
/// Jets themselves implement `Scalar`, so sequence machinery (state-space
/// scans, activations) can be written once and run on values, tape nodes,
/// or derivative-carrying jets.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Constant literal. Not differentiated through.
    fn lit(c: f64) -> Self;
    /// Primal value (for jets, the value of the value component).
    fn value(self) -> f64;
    /// `c * self` with a plain constant.
    fn scale(self, c: f64) -> Self;
    /// `self + c` with a plain constant.
    fn shift(self, c: f64) -> Self;

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    /// `exp(self) - 1`, accurate near zero.
    fn exp_m1(self) -> Self;
    fn tanh(self) -> Self;
    /// Overflow-safe `max(x,0) + log1p(exp(-|x|))`.
    fn softplus(self) -> Self;
    fn sigmoid(self) -> Self;
    fn relu(self) -> Self;
    fn square(self) -> Self;
}

pub(crate) fn sigmoid_f64(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus_f64(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}

impl Scalar for f64 {
    #[inline]
    fn lit(c: f64) -> Self {
        c
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn scale(self, c: f64) -> Self {
        c * self
    }
    #[inline]
    fn shift(self, c: f64) -> Self {
        self + c
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn exp_m1(self) -> Self {
        f64::exp_m1(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn softplus(self) -> Self {
        softplus_f64(self)
    }
    #[inline]
    fn sigmoid(self) -> Self {
        sigmoid_f64(self)
    }
    #[inline]
    fn relu(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
    #[inline]
    fn square(self) -> Self {
        self * self
    }
}
