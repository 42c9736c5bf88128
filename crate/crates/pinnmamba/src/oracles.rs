//! Independent verification suites: derivative exactness against finite
//! differences, discretization against a series oracle, scans against
//! closed forms, residual annihilation by the exact solutions, and a
//! tape-recorded reference loss for gradient checks.
//!
//! Everything here is an independent route to a value the implementation
//! computes some other way; the suites are runnable from the command line
//! and reused by the acceptance tests.

use crate::autodiff::{Jet, Jet2, ParamFn, Scalar};
use crate::collocation::{Grid, SequenceSet};
use crate::model::{embed_token, encoder_forward, mlp_forward, Arch, Model};
use crate::optimize::TrainConfig;
use crate::physics::{loss_alignment, loss_seq, PdeProblem};
use crate::ssm::{
    hippo_diag_init, lti_closed_form, lti_scan, ltv_closed_form, ltv_scan, ltv_transition,
    zoh_discretize, ContinuousSsm, SelectiveStep,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Outcome of one oracle suite.
#[derive(Clone, Debug)]
pub struct OracleReport {
    pub name: &'static str,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.worst < self.tolerance
    }
    pub fn line(&self) -> String {
        format!(
            "{}: {} over {} cases: worst {:.3e} (tolerance {:.1e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.worst,
            self.tolerance
        )
    }
}

/// All suites with their standard sizes.
pub fn run_all(seed: u64) -> Vec<OracleReport> {
    vec![
        jet_chain_rule_suite(1000, seed),
        zoh_series_suite(100, seed ^ 0x5eed),
        scan_closed_form_suite(seed ^ 0xabcd),
        transition_semigroup_suite(),
        residual_annihilation_suite(),
    ]
}

// ---------------------------------------------------------------------------
// random jet programs vs central finite differences

#[derive(Clone, Copy, Debug)]
enum Op {
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Sin(usize),
    Cos(usize),
    Exp(usize),
    Tanh(usize),
    Neg(usize),
    Square(usize),
    Softplus(usize),
    Scale(usize, f64),
}

/// A straight-line program over the supported primitives, applied to the
/// seeded coordinate jets. Generation keeps intermediate values tame so
/// the finite-difference probe stays well conditioned.
#[derive(Clone, Debug)]
struct JetProgram {
    ops: Vec<Op>,
}

impl JetProgram {
    fn eval<J: Jet>(&self, x: f64, t: f64) -> J {
        let (jx, jt) = J::seed_xt(x, t);
        let mut stack: Vec<J> = vec![jx, jt, J::lit(0.7), J::lit(-0.4)];
        for op in &self.ops {
            let v = match *op {
                Op::Add(a, b) => stack[a] + stack[b],
                Op::Sub(a, b) => stack[a] - stack[b],
                Op::Mul(a, b) => stack[a] * stack[b],
                Op::Div(a, b) => stack[a] / stack[b],
                Op::Sin(a) => stack[a].sin(),
                Op::Cos(a) => stack[a].cos(),
                Op::Exp(a) => stack[a].exp(),
                Op::Tanh(a) => stack[a].tanh(),
                Op::Neg(a) => -stack[a],
                Op::Square(a) => stack[a].square(),
                Op::Softplus(a) => stack[a].softplus(),
                Op::Scale(a, c) => stack[a].scale(c),
            };
            stack.push(v);
        }
        *stack.last().unwrap()
    }

    /// Random program, at most `max_ops` primitives deep, generated against
    /// a probe point so divisors stay away from zero and magnitudes stay
    /// bounded.
    fn random(rng: &mut ChaCha8Rng, x: f64, t: f64, max_ops: usize) -> JetProgram {
        let mut prog = JetProgram { ops: Vec::new() };
        let mut values: Vec<f64> = vec![x, t, 0.7, -0.4];
        let n_ops = rng.gen_range(2..=max_ops);
        for _ in 0..n_ops {
            let pick = |rng: &mut ChaCha8Rng, len: usize| rng.gen_range(0..len);
            let len = values.len();
            let a = pick(rng, len);
            let b = pick(rng, len);
            let op = match rng.gen_range(0..12u32) {
                0 => Op::Add(a, b),
                1 => Op::Sub(a, b),
                2 => Op::Mul(a, b),
                3 => {
                    if values[b].abs() > 0.3 {
                        Op::Div(a, b)
                    } else {
                        Op::Add(a, b)
                    }
                }
                4 => Op::Sin(a),
                5 => Op::Cos(a),
                6 => {
                    if values[a].abs() < 2.0 {
                        Op::Exp(a)
                    } else {
                        Op::Tanh(a)
                    }
                }
                7 => Op::Tanh(a),
                8 => Op::Neg(a),
                9 => Op::Square(a),
                10 => Op::Softplus(a),
                _ => Op::Scale(a, rng.gen_range(-1.5..1.5)),
            };
            let v: f64 = {
                let evalv = |i: usize| values[i];
                match op {
                    Op::Add(a, b) => evalv(a) + evalv(b),
                    Op::Sub(a, b) => evalv(a) - evalv(b),
                    Op::Mul(a, b) => evalv(a) * evalv(b),
                    Op::Div(a, b) => evalv(a) / evalv(b),
                    Op::Sin(a) => evalv(a).sin(),
                    Op::Cos(a) => evalv(a).cos(),
                    Op::Exp(a) => evalv(a).exp(),
                    Op::Tanh(a) => evalv(a).tanh(),
                    Op::Neg(a) => -evalv(a),
                    Op::Square(a) => evalv(a) * evalv(a),
                    Op::Softplus(a) => evalv(a).max(0.0) + (-evalv(a).abs()).exp().ln_1p(),
                    Op::Scale(a, c) => c * evalv(a),
                }
            };
            // keep the chain bounded; a final scale keeps the recorded
            // program identical to what was vetted
            if v.abs() > 3.0 {
                prog.ops.push(op);
                values.push(v);
                let idx = values.len() - 1;
                prog.ops.push(Op::Scale(idx, 1.0 / v.abs().sqrt().max(2.0)));
                let c = 1.0 / v.abs().sqrt().max(2.0);
                values.push(c * v);
            } else {
                prog.ops.push(op);
                values.push(v);
            }
        }
        prog
    }
}

/// Jet gradients and Hessians of random primitive compositions against
/// central finite differences of the program value.
pub fn jet_chain_rule_suite(cases: usize, seed: u64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut done = 0usize;
    let h = 1e-4;
    while done < cases {
        let x = rng.gen_range(-1.2..1.2);
        let t = rng.gen_range(-1.2..1.2);
        let prog = JetProgram::random(&mut rng, x, t, 12);
        let f = |x: f64, t: f64| prog.eval::<f64>(x, t);
        // vet the stencil
        let stencil = [
            f(x, t),
            f(x + h, t),
            f(x - h, t),
            f(x, t + h),
            f(x, t - h),
            f(x + h, t + h),
            f(x + h, t - h),
            f(x - h, t + h),
            f(x - h, t - h),
        ];
        if stencil.iter().any(|v| !v.is_finite() || v.abs() > 50.0) {
            continue;
        }
        let jet: Jet2<f64> = prog.eval(x, t);
        let fd_gx = (stencil[1] - stencil[2]) / (2.0 * h);
        let fd_gt = (stencil[3] - stencil[4]) / (2.0 * h);
        let fd_hxx = (stencil[1] - 2.0 * stencil[0] + stencil[2]) / (h * h);
        let fd_htt = (stencil[3] - 2.0 * stencil[0] + stencil[4]) / (h * h);
        let fd_hxt = (stencil[5] - stencil[6] - stencil[7] + stencil[8]) / (4.0 * h * h);
        for (ad, fd) in [
            (jet.gx, fd_gx),
            (jet.gt, fd_gt),
            (jet.hxx, fd_hxx),
            (jet.hxt, fd_hxt),
            (jet.htt, fd_htt),
        ] {
            let rel = (ad - fd).abs() / 1.0f64.max(ad.abs()).max(fd.abs());
            worst = worst.max(rel);
        }
        done += 1;
    }
    OracleReport {
        name: "jet chain rule vs finite differences",
        cases,
        worst,
        tolerance: 1e-6,
    }
}

// ---------------------------------------------------------------------------
// ZOH vs 20-term series

/// 20-term Taylor evaluation of `exp(z)`, argument-halved until the series
/// converges at full precision, then squared back.
fn exp_series20(z: f64) -> f64 {
    let mut halvings = 0u32;
    let mut w = z;
    while w.abs() > 0.25 {
        w *= 0.5;
        halvings += 1;
    }
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for m in 1..20 {
        term *= w / m as f64;
        sum += term;
    }
    for _ in 0..halvings {
        sum *= sum;
    }
    sum
}

/// 20-term series for `(exp(z)-1)/z`.
fn phi_series20(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        for m in 1..20 {
            term *= z / (m + 1) as f64;
            sum += term;
        }
        sum
    } else {
        (exp_series20(z) - 1.0) / z
    }
}

/// ZOH discretization against the series oracle over random stable
/// diagonal systems and step sizes spanning ten decades.
pub fn zoh_series_suite(systems: usize, seed: u64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..systems {
        let n = rng.gen_range(1..=8);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..-0.1)).collect();
        let b: Vec<f64> = (0..n)
            .map(|_| {
                let mag = rng.gen_range(0.1..1.0);
                if rng.gen_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        let dt = 10f64.powf(rng.gen_range(-10.0..0.0));
        let (a_bar, b_bar) = zoh_discretize(&a, &b, dt);
        for i in 0..n {
            let z = dt * a[i];
            let ref_a = exp_series20(z);
            let ref_b = phi_series20(z) * dt * b[i];
            let rel_a = (a_bar[i] - ref_a).abs() / ref_a.abs().max(1e-300);
            let rel_b = (b_bar[i] - ref_b).abs() / ref_b.abs().max(1e-300);
            worst = worst.max(rel_a).max(rel_b);
        }
    }
    OracleReport {
        name: "ZOH discretization vs 20-term series",
        cases: systems,
        worst,
        tolerance: 1e-10,
    }
}

// ---------------------------------------------------------------------------
// scans vs closed forms

/// Recurrence scans against their closed-form unrollings, time-invariant
/// and time-varying, over random stable instances.
pub fn scan_closed_form_suite(seed: u64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    for _ in 0..40 {
        let n = rng.gen_range(1..=8);
        let len = rng.gen_range(1..=16);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..-0.1)).collect();
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let xs: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bmat: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ssm = ContinuousSsm {
            a: a.clone(),
            b: bmat,
            c,
        }
        .discretize(rng.gen_range(0.01..0.8));
        let us = lti_scan(&ssm, &xs, &s);
        for k in 0..len {
            worst = worst.max((us[k] - lti_closed_form(&ssm, &xs, &s, k)).abs());
        }

        let bs: Vec<Vec<f64>> = (0..len)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let cs: Vec<Vec<f64>> = (0..len)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let dts: Vec<f64> = (0..len).map(|_| rng.gen_range(0.01..0.6)).collect();
        let steps: Vec<SelectiveStep<f64>> = (0..len)
            .map(|i| SelectiveStep {
                dt: dts[i],
                b: &bs[i],
                c: &cs[i],
            })
            .collect();
        let us = ltv_scan(&a, &steps, &xs, &s);
        for k in 0..len {
            worst = worst.max((us[k] - ltv_closed_form(&a, &steps, &xs, &s, k)).abs());
        }
        cases += 2 * len;
    }
    OracleReport {
        name: "scan vs closed form (LTI and LTV)",
        cases,
        worst,
        tolerance: 1e-12,
    }
}

/// Semigroup property of the state transition product. Dyadic entries make
/// every product exact, so the identity must hold bitwise; the report's
/// worst value is the largest absolute defect.
pub fn transition_semigroup_suite() -> OracleReport {
    let seq: Vec<Vec<f64>> = [0.5, 0.25, 1.5, 0.75, 0.5, 1.25]
        .iter()
        .map(|&v| vec![v, 2.0 * v, 0.5 * v])
        .collect();
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    let len = seq.len();
    for i in 0..=len {
        for j in i..=len {
            for k in j..=len {
                let whole = ltv_transition(&seq, k, i);
                let left = ltv_transition(&seq, k, j);
                let right = ltv_transition(&seq, j, i);
                for e in 0..whole.len() {
                    worst = worst.max((left[e] * right[e] - whole[e]).abs());
                }
                cases += 1;
            }
        }
    }
    // identity case
    let id = ltv_transition(&seq, 3, 3);
    for v in id {
        worst = worst.max((v - 1.0).abs());
    }
    OracleReport {
        name: "transition semigroup (exact on dyadic entries)",
        cases,
        worst,
        tolerance: f64::MIN_POSITIVE,
    }
}

// ---------------------------------------------------------------------------
// residual annihilation

/// Exact solutions evaluated through jets must drive every operator below
/// 1e-8 across the full 101x101 grid of each benchmark.
pub fn residual_annihilation_suite() -> OracleReport {
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    for problem in [
        PdeProblem::convection(50.0),
        PdeProblem::reaction(5.0),
        PdeProblem::wave(3.0),
    ] {
        let grid = Grid::new(problem.domain, 101, 101).unwrap();
        for (x, t) in grid.points() {
            let u: Jet2<f64> = problem.analytical_jet(x, t);
            worst = worst.max(problem.residual(u).abs());
            if t == 0.0 {
                let (rv, rt) = problem.initial_residual(u, x);
                worst = worst.max(rv.abs());
                if let Some(rt) = rt {
                    worst = worst.max(rt.abs());
                }
            }
            cases += 1;
        }
        for j in 0..grid.n {
            let t = grid.t(j);
            let left: Jet2<f64> = problem.analytical_jet(grid.x(0), t);
            let right: Jet2<f64> = problem.analytical_jet(grid.x(grid.m - 1), t);
            let (r1, r2) = problem.boundary_residual(left, right);
            worst = worst.max(r1.abs());
            if let Some(r2) = r2 {
                worst = worst.max(r2.abs());
            }
        }
    }
    OracleReport {
        name: "residual annihilation by analytical solutions (101x101)",
        cases,
        worst,
        tolerance: 1e-8,
    }
}

// ---------------------------------------------------------------------------
// reference loss for gradient checks

/// The full training loss evaluated through the generic forward path, so
/// it can run on the tape (for `param_grad`) and on plain values (for
/// finite differences). Intended for small configurations.
pub struct ReferenceLossFn {
    pub cfg: TrainConfig,
    pub model: Model,
    pub seqs: SequenceSet,
}

impl ReferenceLossFn {
    pub fn new(cfg: TrainConfig) -> Self {
        let grid = cfg.grid().expect("valid grid");
        let seqs = match cfg.model.arch {
            Arch::Mlp => SequenceSet::single_points(&grid),
            Arch::PinnMamba => SequenceSet::build(
                &grid,
                cfg.mode,
                cfg.k,
                cfg.resolved_dt(),
                cfg.extrapolate_beyond_horizon,
            ),
        };
        let model = Model::new(cfg.model);
        ReferenceLossFn { cfg, model, seqs }
    }
}

impl ParamFn for ReferenceLossFn {
    fn eval<S: Scalar>(&self, params: &[S]) -> S {
        let k = self.seqs.k;
        let de = self.model.config.embed_dim;
        let mut preds: Vec<Jet2<S>> = Vec::with_capacity(self.seqs.n_seq() * k);
        match self.model.config.arch {
            Arch::PinnMamba => {
                for s in 0..self.seqs.n_seq() {
                    let mut embeds: Vec<Jet2<S>> = Vec::with_capacity(k * de);
                    for j in 0..k {
                        let pt = self.seqs.token_point(s, j);
                        embeds.extend(embed_token::<Jet2<S>>(&self.model, params, pt.x, pt.t));
                    }
                    preds.extend(encoder_forward::<Jet2<S>>(&self.model, params, &embeds, k));
                }
            }
            Arch::Mlp => {
                for s in 0..self.seqs.n_seq() {
                    for j in 0..k {
                        let pt = self.seqs.token_point(s, j);
                        preds.push(mlp_forward::<Jet2<S>>(&self.model, params, pt.x, pt.t));
                    }
                }
            }
        }
        let (l_f, l_i, l_b) = loss_seq(&self.cfg.problem, &self.seqs, &preds, self.cfg.initial_mode);
        let l_align = loss_alignment(&self.seqs, &preds);
        let w = &self.cfg.weights;
        let la = w.effective_lambda_align(l_f.value(), l_align.value());
        l_f.scale(w.lambda_f)
            + l_i.scale(w.lambda_i)
            + l_b.scale(w.lambda_b)
            + l_align.scale(la)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_diff_check, param_grad};
    use crate::model::{Activation, ModelConfig, SsmKind};
    use crate::optimize::TrainConfig;

    #[test]
    fn all_oracle_suites_pass() {
        for report in run_all(7) {
            assert!(report.passed(), "{}", report.line());
        }
    }

    fn tiny_reference(name: &str) -> ReferenceLossFn {
        let problem = PdeProblem::by_name(name).unwrap();
        let mut cfg = TrainConfig::defaults(problem);
        cfg.grid_m = 2;
        cfg.grid_n = 2;
        cfg.k = 3;
        cfg.model = ModelConfig {
            embed_dim: 4,
            hidden: 5,
            state: 2,
            blocks: 1,
            activation: Activation::Wavelet,
            ssm: SsmKind::Selective,
            ..ModelConfig::default()
        };
        cfg.weights.wave_auto_align = false;
        ReferenceLossFn::new(cfg)
    }

    #[test]
    fn reference_loss_tape_gradient_matches_finite_differences() {
        for name in ["convection", "wave"] {
            let f = tiny_reference(name);
            let theta = f.model.init_params(3);
            let err = finite_diff_check(&f, &theta, 1e-4);
            assert!(err < 1e-5, "{name}: {err}");
        }
    }

    #[test]
    fn reference_loss_value_matches_two_routes() {
        // eval on plain f64 equals eval through the tape's primal values
        let f = tiny_reference("convection");
        let theta = f.model.init_params(5);
        let plain = f.eval::<f64>(&theta);
        let (taped, _) = param_grad(&f, &theta);
        assert_eq!(plain.to_bits(), taped.to_bits());
    }

    #[test]
    fn fast_trainer_gradient_matches_tape_reference() {
        // the hand-derived training gradient against the tape gradient of
        // the reference loss, far below finite-difference noise
        for name in ["convection", "reaction", "wave"] {
            let f = tiny_reference(name);
            let theta = f.model.init_params(17);
            let (_, tape_grad) = param_grad(&f, &theta);
            let (_, fast_grad) = crate::optimize::loss_and_grad(&f.cfg, &theta).unwrap();
            assert_eq!(tape_grad.len(), fast_grad.len());
            for i in 0..fast_grad.len() {
                let (a, b) = (fast_grad[i], tape_grad.get(i));
                let rel = (a - b).abs() / 1.0f64.max(a.abs()).max(b.abs());
                assert!(rel < 1e-9, "{name} param {i}: fast={a} tape={b}");
            }
        }
    }

    #[test]
    fn series_oracle_matches_std_exp() {
        for z in [-5.0, -1.0, -0.3, -1e-4, -1e-9, 0.0] {
            let rel = (exp_series20(z) - z.exp()).abs() / z.exp();
            assert!(rel < 1e-14, "z={z}: {rel}");
        }
    }

    #[test]
    fn hippo_feeds_stable_scans() {
        // initialization values are usable end to end
        let a = hippo_diag_init(6);
        let (abar, _) = zoh_discretize(&a, &vec![1.0; 6], 0.01);
        for v in abar {
            assert!(v > 0.0 && v < 1.0);
        }
    }
}
