//! Continuous-to-discrete state-space machinery.
//!
//! The state matrix is real, diagonal and negative at initialization, so
//! zero-order hold discretization is exact and elementwise:
//!
//! ```text
//! Abar = exp(dt*A),   Bbar = (dt*A)^-1 (exp(dt*A) - I) * dt*B
//! ```
//!
//! Sequences run as `d` parallel single-input systems of state size `n`,
//! either time-invariant (constant discretized matrices) or selective
//! (per-token `(dt, B, C)` projected from the input). Closed-form
//! evaluations of both recurrences are provided as independent test
//! oracles; training never uses them.
//!
//! Convention: the scan is `h_k = Abar h_{k-1} + Bbar x_k` with
//! `h_{-1} := s`, so the free response after `k+1` inputs is
//! `Phi(k+1, 0) s`. The closed forms below encode the same convention and
//! therefore agree with the scans to rounding.

use crate::autodiff::Scalar;

/// Continuous diagonal system `h' = A h + b x`, `u = c . h` (single input
/// channel; the feedthrough term is omitted and realized by the encoder's
/// residual connection instead).
#[derive(Clone, Debug)]
pub struct ContinuousSsm {
    /// Diagonal of the state matrix; negative entries give stability.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// Discretized diagonal system.
#[derive(Clone, Debug)]
pub struct DiscreteSsm<N> {
    pub a_bar: Vec<N>,
    pub b_bar: Vec<N>,
    pub c: Vec<N>,
    pub dt: N,
}

/// One token's input-dependent step parameters for a single channel.
#[derive(Clone, Copy, Debug)]
pub struct SelectiveStep<'a, N> {
    /// Positive step size (softplus-produced).
    pub dt: N,
    pub b: &'a [N],
    pub c: &'a [N],
}

/// Per-token `(dt, B, C)` for all `d` channels of a selective layer.
/// `dt` is per channel; `b` and `c` are shared across channels.
#[derive(Clone, Debug)]
pub struct SelectiveSeq<N> {
    /// L x d
    pub dt: Vec<Vec<N>>,
    /// L x n
    pub b: Vec<Vec<N>>,
    /// L x n
    pub c: Vec<Vec<N>>,
}

/// Projection weights producing [`SelectiveSeq`] from token embeddings.
#[derive(Clone, Debug)]
pub struct SelectiveProjection<N> {
    /// d x d, row-major
    pub w_dt: Vec<N>,
    /// d
    pub b_dt: Vec<N>,
    /// n x d, row-major
    pub w_b: Vec<N>,
    /// n x d, row-major
    pub w_c: Vec<N>,
    pub d: usize,
    pub n: usize,
}

/// Real diagonal HiPPO-style initialization: `A_ii = -(i+1)`.
pub fn hippo_diag_init(n: usize) -> Vec<f64> {
    assert!(n >= 1, "state size must be at least 1");
    (0..n).map(|i| -((i + 1) as f64)).collect()
}

/// Intermediates of one scalar ZOH step, kept for backward passes.
#[derive(Clone, Copy, Debug)]
pub struct ZohTrace<N> {
    pub z: N,
    pub e1: N,
    pub a_bar: N,
    pub b_bar: N,
}

/// Below this `|dt*a|` the factor `(e^z - 1)/z` switches to its series.
pub const ZOH_SERIES_CUTOVER: f64 = 1e-8;

/// Scalar zero-order hold step for one diagonal entry, returning its
/// intermediates.
///
/// `(exp(z)-1)/z` is evaluated by its series `1 + z/2 + z^2/6` when
/// `|z| < 1e-8` to avoid cancellation (this also covers `a = 0` and
/// `dt = 0` without dividing by either).
#[inline]
pub fn zoh_step_traced<N: Scalar>(a: N, b: N, dt: N) -> ZohTrace<N> {
    let z = dt * a;
    let e1 = z.exp_m1();
    let a_bar = e1.shift(1.0);
    let b_bar = if z.value().abs() < ZOH_SERIES_CUTOVER {
        let phi = (z.scale(1.0 / 6.0).shift(0.5) * z).shift(1.0);
        phi * dt * b
    } else {
        // (e^z - 1)/z * dt * b  ==  (e^z - 1) * b / a
        e1 * b / a
    };
    ZohTrace { z, e1, a_bar, b_bar }
}

/// Scalar zero-order hold step for one diagonal entry.
#[inline]
pub fn zoh_step<N: Scalar>(a: N, b: N, dt: N) -> (N, N) {
    let tr = zoh_step_traced(a, b, dt);
    (tr.a_bar, tr.b_bar)
}

/// Elementwise ZOH over a diagonal system.
pub fn zoh_discretize<N: Scalar>(a: &[N], b: &[N], dt: N) -> (Vec<N>, Vec<N>) {
    assert!(dt.value() >= 0.0, "step size must be nonnegative");
    assert_eq!(a.len(), b.len(), "A and B must share the state dimension");
    a.iter()
        .zip(b)
        .map(|(&ai, &bi)| zoh_step(ai, bi, dt))
        .unzip()
}

impl ContinuousSsm {
    pub fn discretize(&self, dt: f64) -> DiscreteSsm<f64> {
        let (a_bar, b_bar) = zoh_discretize(&self.a, &self.b, dt);
        DiscreteSsm {
            a_bar,
            b_bar,
            c: self.c.clone(),
            dt,
        }
    }
}

#[inline]
fn dot<N: Scalar>(c: &[N], h: &[N]) -> N {
    let mut acc = N::lit(0.0);
    for i in 0..c.len() {
        acc = acc + c[i] * h[i];
    }
    acc
}

/// Time-invariant recurrence `h_k = Abar h_{k-1} + Bbar x_k`, `u_k = c.h_k`
/// with `h_{-1} := s`; returns all `u_k`.
pub fn lti_scan<N: Scalar>(ssm: &DiscreteSsm<N>, xs: &[N], s: &[N]) -> Vec<N> {
    let n = ssm.a_bar.len();
    assert!(!xs.is_empty(), "empty input sequence");
    assert!(
        ssm.b_bar.len() == n && ssm.c.len() == n && s.len() == n,
        "state dimension mismatch"
    );
    let mut h = s.to_vec();
    xs.iter()
        .map(|&x| {
            for i in 0..n {
                h[i] = ssm.a_bar[i] * h[i] + ssm.b_bar[i] * x;
            }
            dot(&ssm.c, &h)
        })
        .collect()
}

/// Closed-form output of the LTI recurrence at index `k` (test oracle):
/// `u_k = c . (Abar^{k+1} s) + sum_{i=0..k} c . (Abar^{k-i} Bbar x_i)`.
pub fn lti_closed_form(ssm: &DiscreteSsm<f64>, xs: &[f64], s: &[f64], k: usize) -> f64 {
    assert!(k < xs.len(), "output index out of range");
    let n = ssm.a_bar.len();
    let mut u = 0.0;
    for e in 0..n {
        let mut free = s[e];
        for _ in 0..=k {
            free *= ssm.a_bar[e];
        }
        let mut forced = 0.0;
        for (i, &x) in xs.iter().enumerate().take(k + 1) {
            let mut pow = 1.0;
            for _ in 0..(k - i) {
                pow *= ssm.a_bar[e];
            }
            forced += pow * ssm.b_bar[e] * x;
        }
        u += ssm.c[e] * (free + forced);
    }
    u
}

/// Input-dependent step parameters: `dt = softplus(W_dt e + b_dt)` per
/// channel, `B = W_b e`, `C = W_c e` per token.
pub fn selective_project<N: Scalar>(
    tokens: &[Vec<N>],
    proj: &SelectiveProjection<N>,
) -> SelectiveSeq<N> {
    let (d, n) = (proj.d, proj.n);
    let mut out = SelectiveSeq {
        dt: Vec::with_capacity(tokens.len()),
        b: Vec::with_capacity(tokens.len()),
        c: Vec::with_capacity(tokens.len()),
    };
    for e in tokens {
        assert_eq!(e.len(), d, "embedding width mismatch");
        let mut dt = Vec::with_capacity(d);
        for ch in 0..d {
            let mut acc = proj.b_dt[ch];
            for j in 0..d {
                acc = acc + proj.w_dt[ch * d + j] * e[j];
            }
            dt.push(acc.softplus());
        }
        let row = |w: &[N]| -> Vec<N> {
            (0..n)
                .map(|i| {
                    let mut acc = N::lit(0.0);
                    for j in 0..d {
                        acc = acc + w[i * d + j] * e[j];
                    }
                    acc
                })
                .collect()
        };
        out.dt.push(dt);
        out.b.push(row(&proj.w_b));
        out.c.push(row(&proj.w_c));
    }
    out
}

/// Time-varying recurrence for one channel: per token,
/// `(Abar_k, Bbar_k) = zoh(A, B_k, dt_k)`, then
/// `h_k = Abar_k h_{k-1} + Bbar_k x_k`, `u_k = C_k . h_k` with `h_{-1} := s`.
pub fn ltv_scan<N: Scalar>(a: &[N], steps: &[SelectiveStep<N>], xs: &[N], s: &[N]) -> Vec<N> {
    let n = a.len();
    assert_eq!(steps.len(), xs.len(), "steps/input length mismatch");
    assert_eq!(s.len(), n, "state dimension mismatch");
    let mut h = s.to_vec();
    steps
        .iter()
        .zip(xs)
        .map(|(st, &x)| {
            assert!(st.b.len() == n && st.c.len() == n, "state dimension mismatch");
            for i in 0..n {
                let (ab, bb) = zoh_step(a[i], st.b[i], st.dt);
                h[i] = ab * h[i] + bb * x;
            }
            dot(st.c, &h)
        })
        .collect()
}

/// State transition `Phi(k, i) = Abar(k-1) ... Abar(i)` over per-step
/// diagonals, with `Phi(k, k) = I`. Requires `i <= k`.
pub fn ltv_transition(a_bar_seq: &[Vec<f64>], k: usize, i: usize) -> Vec<f64> {
    assert!(i <= k, "transition requires i <= k");
    assert!(k <= a_bar_seq.len(), "transition index out of range");
    let n = a_bar_seq.first().map_or(0, Vec::len);
    let mut phi = vec![1.0; n];
    for step in &a_bar_seq[i..k] {
        for (p, &ab) in phi.iter_mut().zip(step) {
            *p = ab * *p;
        }
    }
    phi
}

/// Closed-form output of the LTV recurrence at index `k` (test oracle):
/// `u_k = C_k . (Phi(k+1,0) s) + sum_{i=0..k} C_k . (Phi(k+1,i+1) Bbar_i x_i)`.
pub fn ltv_closed_form(
    a: &[f64],
    steps: &[SelectiveStep<f64>],
    xs: &[f64],
    s: &[f64],
    k: usize,
) -> f64 {
    assert!(k < xs.len(), "output index out of range");
    let n = a.len();
    let mut a_bar_seq = Vec::with_capacity(steps.len());
    let mut b_bar_seq = Vec::with_capacity(steps.len());
    for st in steps {
        let (ab, bb): (Vec<f64>, Vec<f64>) = (0..n).map(|i| zoh_step(a[i], st.b[i], st.dt)).unzip();
        a_bar_seq.push(ab);
        b_bar_seq.push(bb);
    }
    let free = ltv_transition(&a_bar_seq, k + 1, 0);
    let mut state: Vec<f64> = (0..n).map(|i| free[i] * s[i]).collect();
    for i in 0..=k {
        let phi = ltv_transition(&a_bar_seq, k + 1, i + 1);
        for e in 0..n {
            state[e] += phi[e] * b_bar_seq[i][e] * xs[i];
        }
    }
    dot(steps[k].c, &state)
}
