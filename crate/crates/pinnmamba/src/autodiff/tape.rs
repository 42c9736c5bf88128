//! Reverse-accumulation tape over scalar primitives.
//!
//! A [`Tape`] records every scalar operation performed on its [`Var`]s as an
//! append-only node list; append order is the topological order, and the
//! backward pass visits nodes in strict reverse append order. Constants fold
//! eagerly and never touch the tape, so jet components that are structurally
//! zero (seed hessians, lifted parameters' derivative slots) cost nothing.
//!
//! Replaying the same operations with the same leaf values reproduces
//! bit-identical node values and gradients.

use super::scalar::{sigmoid_f64, softplus_f64, Scalar};
use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Node {
    p0: u32,
    p1: u32,
    d0: f64,
    d1: f64,
}

/// Append-only record of scalar operations. Confined to one thread;
/// independent evaluations use independent tapes.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    leaves: RefCell<Vec<u32>>,
}

/// A scalar value recorded on a [`Tape`], or a foldable constant.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    idx: u32,
    val: f64,
}

/// Gradient of a recorded scalar with respect to every registered leaf
/// variable, in registration order. Unused leaves hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GradMap(Vec<f64>);

impl GradMap {
    pub fn get(&self, param: usize) -> f64 {
        self.0[param]
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of recorded nodes (leaves included).
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Registers a leaf variable (a parameter). Gradients are reported per
    /// leaf, in registration order.
    pub fn var(&self, val: f64) -> Var<'_> {
        let idx = self.push(NONE, NONE, 0.0, 0.0);
        self.leaves.borrow_mut().push(idx);
        Var {
            tape: Some(self),
            idx,
            val,
        }
    }

    /// Binds a parameter vector as consecutive leaves.
    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    fn push(&self, p0: u32, p1: u32, d0: f64, d1: f64) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len();
        assert!(idx < NONE as usize, "tape overflow");
        nodes.push(Node { p0, p1, d0, d1 });
        idx as u32
    }

    fn unary(&self, a: u32, val: f64, d: f64) -> Var<'_> {
        Var {
            tape: Some(self),
            idx: self.push(a, NONE, d, 0.0),
            val,
        }
    }

    fn binary(&self, a: u32, b: u32, val: f64, da: f64, db: f64) -> Var<'_> {
        Var {
            tape: Some(self),
            idx: self.push(a, b, da, db),
            val,
        }
    }

    /// Reverse pass from `loss`, returning d(loss)/d(leaf) for every
    /// registered leaf. Panics if `loss` was not recorded on this tape.
    pub fn gradients(&self, loss: Var<'_>) -> GradMap {
        let tape = loss
            .tape
            .expect("loss is a constant, not a node on the tape");
        assert!(
            std::ptr::eq(tape, self),
            "loss was recorded on a different tape"
        );
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0f64; nodes.len()];
        adj[loss.idx as usize] = 1.0;
        for i in (0..nodes.len()).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let n = nodes[i];
            if n.p0 != NONE {
                adj[n.p0 as usize] += n.d0 * a;
            }
            if n.p1 != NONE {
                adj[n.p1 as usize] += n.d1 * a;
            }
        }
        GradMap(
            self.leaves
                .borrow()
                .iter()
                .map(|&l| adj[l as usize])
                .collect(),
        )
    }
}

impl<'t> Var<'t> {
    /// A constant not attached to any tape.
    pub fn constant(val: f64) -> Self {
        Var {
            tape: None,
            idx: NONE,
            val,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.tape.is_none()
    }

    fn tape_of(a: Var<'t>, b: Var<'t>) -> &'t Tape {
        match (a.tape, b.tape) {
            (Some(t), Some(u)) => {
                debug_assert!(std::ptr::eq(t, u), "operands from different tapes");
                t
            }
            (Some(t), None) => t,
            (None, Some(u)) => u,
            (None, None) => unreachable!(),
        }
    }

    fn chain(self, val: f64, d: f64) -> Self {
        match self.tape {
            None => Var::constant(val),
            Some(t) => t.unary(self.idx, val, d),
        }
    }
}

impl Add for Var<'_> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        match (self.tape, rhs.tape) {
            (None, None) => Var::constant(self.val + rhs.val),
            (None, Some(_)) => {
                if self.val == 0.0 {
                    rhs
                } else {
                    rhs.chain(self.val + rhs.val, 1.0)
                }
            }
            (Some(_), None) => {
                if rhs.val == 0.0 {
                    self
                } else {
                    self.chain(self.val + rhs.val, 1.0)
                }
            }
            (Some(_), Some(_)) => Var::tape_of(self, rhs).binary(self.idx, rhs.idx, self.val + rhs.val, 1.0, 1.0),
        }
    }
}

impl Sub for Var<'_> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        match (self.tape, rhs.tape) {
            (None, None) => Var::constant(self.val - rhs.val),
            (None, Some(_)) => rhs.chain(self.val - rhs.val, -1.0),
            (Some(_), None) => {
                if rhs.val == 0.0 {
                    self
                } else {
                    self.chain(self.val - rhs.val, 1.0)
                }
            }
            (Some(_), Some(_)) => Var::tape_of(self, rhs).binary(self.idx, rhs.idx, self.val - rhs.val, 1.0, -1.0),
        }
    }
}

impl Mul for Var<'_> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        match (self.tape, rhs.tape) {
            (None, None) => Var::constant(self.val * rhs.val),
            (None, Some(_)) => rhs.scale(self.val),
            (Some(_), None) => self.scale(rhs.val),
            (Some(_), Some(_)) => {
                Var::tape_of(self, rhs).binary(self.idx, rhs.idx, self.val * rhs.val, rhs.val, self.val)
            }
        }
    }
}

impl Div for Var<'_> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        assert!(rhs.val != 0.0, "division by zero-valued operand");
        match (self.tape, rhs.tape) {
            (None, None) => Var::constant(self.val / rhs.val),
            (Some(_), None) => self.scale(1.0 / rhs.val),
            _ => {
                let val = self.val / rhs.val;
                match self.tape {
                    // constant numerator: d/db = -a/b^2 = -val/b
                    None => rhs.chain(val, -val / rhs.val),
                    Some(_) => Var::tape_of(self, rhs).binary(
                        self.idx,
                        rhs.idx,
                        val,
                        1.0 / rhs.val,
                        -val / rhs.val,
                    ),
                }
            }
        }
    }
}

impl Neg for Var<'_> {
    type Output = Self;
    fn neg(self) -> Self {
        self.chain(-self.val, -1.0)
    }
}

impl Scalar for Var<'_> {
    fn lit(c: f64) -> Self {
        Var::constant(c)
    }
    fn value(self) -> f64 {
        self.val
    }
    fn scale(self, c: f64) -> Self {
        match self.tape {
            None => Var::constant(c * self.val),
            Some(_) => {
                if c == 0.0 {
                    Var::constant(0.0)
                } else if c == 1.0 {
                    self
                } else {
                    self.chain(c * self.val, c)
                }
            }
        }
    }
    fn shift(self, c: f64) -> Self {
        if c == 0.0 {
            self
        } else {
            self.chain(self.val + c, 1.0)
        }
    }
    fn sin(self) -> Self {
        self.chain(self.val.sin(), self.val.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.val.cos(), -self.val.sin())
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.chain(e, e)
    }
    fn exp_m1(self) -> Self {
        let e1 = self.val.exp_m1();
        self.chain(e1, e1 + 1.0)
    }
    fn tanh(self) -> Self {
        let t = self.val.tanh();
        self.chain(t, 1.0 - t * t)
    }
    fn softplus(self) -> Self {
        self.chain(softplus_f64(self.val), sigmoid_f64(self.val))
    }
    fn sigmoid(self) -> Self {
        let s = sigmoid_f64(self.val);
        self.chain(s, s * (1.0 - s))
    }
    fn relu(self) -> Self {
        if self.val > 0.0 {
            self.chain(self.val, 1.0)
        } else {
            self.chain(0.0, 0.0)
        }
    }
    fn square(self) -> Self {
        self.chain(self.val * self.val, 2.0 * self.val)
    }
}

/// A scalar function of a parameter vector, evaluable on any [`Scalar`].
///
/// The same definition drives both the tape route and plain `f64`
/// evaluation, which is what makes an independent finite-difference check
/// of the tape gradient possible.
pub trait ParamFn {
    fn eval<S: Scalar>(&self, params: &[S]) -> S;
}

/// Value and tape gradient of `f` at `theta`.
pub fn param_grad<F: ParamFn>(f: &F, theta: &[f64]) -> (f64, GradMap) {
    let tape = Tape::new();
    let params = tape.vars(theta);
    let loss = f.eval::<Var>(&params);
    let val = loss.value();
    // Constant loss: gradient is identically zero for every parameter.
    if loss.is_constant() {
        return (val, GradMap(vec![0.0; theta.len()]));
    }
    (val, tape.gradients(loss))
}

/// Compares the tape gradient of `f` against central finite differences of
/// its value, elementwise; returns the worst relative error
/// `|g_ad - g_fd| / max(1, |g_ad|, |g_fd|)`.
pub fn finite_diff_check<F: ParamFn>(f: &F, theta: &[f64], eps: f64) -> f64 {
    assert!(eps > 0.0, "finite-difference step must be positive");
    let (_, grad) = param_grad(f, theta);
    let mut worst = 0.0f64;
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        probe[i] = theta[i] + eps;
        let up = f.eval::<f64>(&probe);
        probe[i] = theta[i] - eps;
        let down = f.eval::<f64>(&probe);
        probe[i] = theta[i];
        let fd = (up - down) / (2.0 * eps);
        let ad = grad.get(i);
        let rel = (ad - fd).abs() / 1.0f64.max(ad.abs()).max(fd.abs());
        worst = worst.max(rel);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    struct SumF;
    impl ParamFn for SumF {
        fn eval<S: Scalar>(&self, p: &[S]) -> S {
            p.iter().fold(S::lit(0.0), |acc, &x| acc + x)
        }
    }

    struct SumSqF;
    impl ParamFn for SumSqF {
        fn eval<S: Scalar>(&self, p: &[S]) -> S {
            p.iter().fold(S::lit(0.0), |acc, &x| acc + x.square())
        }
    }

    #[test]
    fn linear_loss_gradient_is_ones() {
        let theta = [0.3, -1.2, 4.0, 0.0];
        let (val, grad) = param_grad(&SumF, &theta);
        assert_eq!(val, theta.iter().sum::<f64>());
        for i in 0..theta.len() {
            assert_eq!(grad.get(i), 1.0);
        }
    }

    #[test]
    fn quadratic_gradient() {
        let (val, grad) = param_grad(&SumSqF, &[3.0]);
        assert_eq!(val, 9.0);
        assert_eq!(grad.get(0), 6.0);
    }

    #[test]
    fn finite_diff_check_linear_and_quadratic() {
        assert!(finite_diff_check(&SumF, &[1.0, 2.0, -0.5], 1e-4) < 1e-9);
        assert!(finite_diff_check(&SumSqF, &[1.0, 1.0, 1.0], 1e-4) < 1e-8);
    }

    #[test]
    fn unused_parameter_gets_zero_gradient() {
        struct FirstOnly;
        impl ParamFn for FirstOnly {
            fn eval<S: Scalar>(&self, p: &[S]) -> S {
                p[0].square()
            }
        }
        let (_, grad) = param_grad(&FirstOnly, &[2.0, 5.0]);
        assert_eq!(grad.get(0), 4.0);
        assert_eq!(grad.get(1), 0.0);
    }

    #[test]
    fn repeated_passes_are_bit_identical() {
        struct Mixed;
        impl ParamFn for Mixed {
            fn eval<S: Scalar>(&self, p: &[S]) -> S {
                (p[0] * p[1]).sin() + p[1].exp().scale(0.25) - p[0] / p[1].shift(3.0)
            }
        }
        let theta = [0.7, -0.4];
        let (v1, g1) = param_grad(&Mixed, &theta);
        let (v2, g2) = param_grad(&Mixed, &theta);
        assert_eq!(v1.to_bits(), v2.to_bits());
        assert_eq!(g1, g2);
    }

    #[test]
    #[should_panic(expected = "division by zero")]
    fn division_by_zero_var_panics() {
        let tape = Tape::new();
        let a = tape.var(1.0);
        let b = tape.var(0.0);
        let _ = a / b;
    }

    #[test]
    #[should_panic(expected = "different tape")]
    fn loss_from_other_tape_panics() {
        let t1 = Tape::new();
        let t2 = Tape::new();
        let x = t2.var(1.0);
        let _ = t1.gradients(x.square());
    }

    #[test]
    fn constants_do_not_grow_the_tape() {
        let tape = Tape::new();
        let x = tape.var(2.0);
        let n0 = tape.len();
        let y = x * Var::lit(0.0) + Var::lit(0.0) * x;
        assert!(y.is_constant());
        assert_eq!(tape.len(), n0);
        let z = x.scale(1.0);
        assert_eq!(z.value(), 2.0);
        assert_eq!(tape.len(), n0);
    }
}
