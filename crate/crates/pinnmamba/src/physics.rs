//! PDE benchmark definitions and loss assembly.
//!
//! Three failure-mode benchmarks, each with an analytical solution:
//!
//! - convection: `u_t + beta u_x = 0` on `[0, 2pi] x [0, 1]`, periodic,
//!   `u(x, 0) = sin x`, solution `sin(x - beta t)`.
//! - reaction: `u_t - rho u (1 - u) = 0` on `[0, 2pi] x [0, 1]`, periodic,
//!   Gaussian initial condition, logistic solution.
//! - wave: `u_tt - 4 u_xx = 0` on `[0, 1] x [0, 1]`, zero Dirichlet,
//!   `u(x, 0) = sin(pi x) + sin(beta pi x)/2`, `u_t(x, 0) = 0`, standing
//!   two-mode solution `sin(pi x) cos(2 pi t) + sin(beta pi x) cos(2 beta pi t)/2`
//!   (the second mode carries the 1/2 of its initial amplitude).
//!
//! Loss components follow the sub-sequence sums: every token of every
//! anchored sequence contributes to the residual loss (including tokens past
//! the horizon), initial/boundary terms skip tokens past the horizon, and
//! each component is the mean over its contributing residuals.

use crate::autodiff::{Jet, Scalar};
use crate::collocation::{Domain, SequenceSet};
use crate::error::{Error, Result};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProblemKind {
    Convection { beta: f64 },
    Reaction { rho: f64 },
    Wave { freq: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryCondition {
    Periodic,
    Dirichlet,
}

/// Where the initial-condition operator is applied on initial-anchored
/// sequences: at the anchor token only (default), or at every token as the
/// sub-sequence sum is written.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InitialLossMode {
    #[default]
    AnchorOnly,
    AllTokens,
}

/// A benchmark problem: domain, coefficients, operators, exact solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdeProblem {
    pub kind: ProblemKind,
    pub domain: Domain,
}

impl PdeProblem {
    pub fn convection(beta: f64) -> Self {
        PdeProblem {
            kind: ProblemKind::Convection { beta },
            domain: Domain::new(0.0, 2.0 * PI, 1.0),
        }
    }

    pub fn reaction(rho: f64) -> Self {
        PdeProblem {
            kind: ProblemKind::Reaction { rho },
            domain: Domain::new(0.0, 2.0 * PI, 1.0),
        }
    }

    pub fn wave(freq: f64) -> Self {
        PdeProblem {
            kind: ProblemKind::Wave { freq },
            domain: Domain::new(0.0, 1.0, 1.0),
        }
    }

    /// Registry with the customary coefficients.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "convection" => Ok(Self::convection(50.0)),
            "reaction" => Ok(Self::reaction(5.0)),
            "wave" => Ok(Self::wave(3.0)),
            other => Err(Error::Config(format!(
                "unknown problem '{other}' (expected convection, reaction or wave)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProblemKind::Convection { .. } => "convection",
            ProblemKind::Reaction { .. } => "reaction",
            ProblemKind::Wave { .. } => "wave",
        }
    }

    /// The wave residual consumes u_tt and u_xx; the others stop at first
    /// derivatives.
    pub fn needs_second_order(&self) -> bool {
        matches!(self.kind, ProblemKind::Wave { .. })
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        match self.kind {
            ProblemKind::Wave { .. } => BoundaryCondition::Dirichlet,
            _ => BoundaryCondition::Periodic,
        }
    }

    /// PDE residual operator applied to a derivative-carrying prediction.
    pub fn residual<J: Jet>(&self, u: J) -> J::Inner {
        match self.kind {
            ProblemKind::Convection { beta } => u.dt() + u.dx().scale(beta),
            ProblemKind::Reaction { rho } => {
                let v = u.val();
                u.dt() - (v * (-v).shift(1.0)).scale(rho)
            }
            ProblemKind::Wave { .. } => u.dtt() - u.dxx().scale(4.0),
        }
    }

    /// Initial-condition target `g(x)` with `u(x, 0) = g(x)`.
    pub fn initial_target(&self, x: f64) -> f64 {
        match self.kind {
            ProblemKind::Convection { .. } => x.sin(),
            ProblemKind::Reaction { .. } => gaussian_bump(x),
            ProblemKind::Wave { freq } => (PI * x).sin() + 0.5 * (freq * PI * x).sin(),
        }
    }

    /// Initial residual component(s) at spatial coordinate `x`: the value
    /// mismatch, plus the `u_t = 0` condition for the wave equation.
    pub fn initial_residual<J: Jet>(&self, u: J, x: f64) -> (J::Inner, Option<J::Inner>) {
        let value = u.val().shift(-self.initial_target(x));
        match self.kind {
            ProblemKind::Wave { .. } => (value, Some(u.dt())),
            _ => (value, None),
        }
    }

    /// Boundary residual from the two edge predictions at one time:
    /// periodic problems give the single mismatch `u_left - u_right`,
    /// Dirichlet problems give both values.
    pub fn boundary_residual<J: Jet>(&self, left: J, right: J) -> (J::Inner, Option<J::Inner>) {
        match self.boundary_condition() {
            BoundaryCondition::Periodic => (left.val() - right.val(), None),
            BoundaryCondition::Dirichlet => (left.val(), Some(right.val())),
        }
    }

    /// Exact solution value.
    pub fn analytical_solution(&self, x: f64, t: f64) -> f64 {
        match self.kind {
            ProblemKind::Convection { beta } => (x - beta * t).sin(),
            ProblemKind::Reaction { rho } => {
                let h = gaussian_bump(x);
                let g = (rho * t).exp();
                h * g / (h * (g - 1.0) + 1.0)
            }
            ProblemKind::Wave { freq } => {
                (PI * x).sin() * (2.0 * PI * t).cos()
                    + 0.5 * (freq * PI * x).sin() * (2.0 * freq * PI * t).cos()
            }
        }
    }

    /// Exact solution evaluated through jet arithmetic, carrying its own
    /// derivatives; drives all three operators to zero.
    pub fn analytical_jet<J: Jet>(&self, x: f64, t: f64) -> J {
        let (jx, jt) = J::seed_xt(x, t);
        match self.kind {
            ProblemKind::Convection { beta } => (jx - jt.scale(beta)).sin(),
            ProblemKind::Reaction { rho } => {
                let w = 2.0 * (PI / 4.0) * (PI / 4.0);
                let h = jx.shift(-PI).square().scale(-1.0 / w).exp();
                let g = jt.scale(rho).exp();
                h * g / (h * g.shift(-1.0)).shift(1.0)
            }
            ProblemKind::Wave { freq } => {
                let first = jx.scale(PI).sin() * jt.scale(2.0 * PI).cos();
                let second = jx.scale(freq * PI).sin() * jt.scale(2.0 * freq * PI).cos();
                first + second.scale(0.5)
            }
        }
    }
}

fn gaussian_bump(x: f64) -> f64 {
    let w = 2.0 * (PI / 4.0) * (PI / 4.0);
    (-(x - PI) * (x - PI) / w).exp()
}

/// Loss weights; `[lambda_f, lambda_i, lambda_b] = [1, 1, 10]` with
/// `lambda_align = 1000` by default, and the alignment weight auto-adapted
/// from the residual loss for the wave equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda_f: f64,
    pub lambda_i: f64,
    pub lambda_b: f64,
    pub lambda_align: f64,
    pub wave_auto_align: bool,
}

impl LossWeights {
    pub fn defaults_for(problem: &PdeProblem) -> Self {
        LossWeights {
            lambda_f: 1.0,
            lambda_i: 1.0,
            lambda_b: 10.0,
            lambda_align: 1000.0,
            wave_auto_align: problem.needs_second_order(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_f", self.lambda_f),
            ("lambda_i", self.lambda_i),
            ("lambda_b", self.lambda_b),
            ("lambda_align", self.lambda_align),
        ] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    /// Effective alignment weight. Under auto-adaptation the weight is
    /// `lambda_f * L_F / max(L_align, eps)`, held constant during
    /// differentiation.
    pub fn effective_lambda_align(&self, l_f: f64, l_align: f64) -> f64 {
        if self.wave_auto_align {
            self.lambda_f * l_f / l_align.max(1e-12)
        } else {
            self.lambda_align
        }
    }
}

/// Loss components of one evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub l_f: f64,
    pub l_i: f64,
    pub l_b: f64,
    pub l_align: f64,
    pub total: f64,
}

/// Sums of squared residuals with their contributing-term counts, kept
/// separate so means and gradients use identical normalizations.
#[derive(Clone, Copy, Debug, Default)]
pub struct LossAccumulator {
    pub sum: f64,
    pub count: usize,
}

impl LossAccumulator {
    pub fn push(&mut self, r: f64) {
        self.sum += r * r;
        self.count += 1;
    }
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }
}

/// Residual, initial and boundary losses over per-token predictions.
///
/// `preds` is sequence-major (`n_seq * k` jets). Every token contributes to
/// the residual loss; initial terms follow `init_mode`; boundary terms skip
/// tokens past the horizon. Each loss is the mean over contributing
/// residuals.
pub fn loss_seq<J: Jet>(
    problem: &PdeProblem,
    seqs: &SequenceSet,
    preds: &[J],
    init_mode: InitialLossMode,
) -> (J::Inner, J::Inner, J::Inner) {
    let k = seqs.k;
    assert_eq!(
        preds.len(),
        seqs.n_seq() * k,
        "predictions missing for some tokens"
    );
    let zero = || <J::Inner as Scalar>::lit(0.0);

    let mut f_sum = zero();
    for &p in preds {
        f_sum = f_sum + problem.residual(p).square();
    }
    let l_f = f_sum.scale(1.0 / preds.len() as f64);

    let mut i_sum = zero();
    let mut i_count = 0usize;
    let mut b_sum = zero();
    let mut b_count = 0usize;
    for s in 0..seqs.n_seq() {
        let (i, j) = seqs.anchor_of(s);
        if j == 0 {
            let tokens: &[usize] = match init_mode {
                InitialLossMode::AnchorOnly => &[0],
                InitialLossMode::AllTokens => &[],
            };
            let iter: Box<dyn Iterator<Item = usize>> = if tokens.is_empty() {
                Box::new((0..k).filter(|&jj| !seqs.token_point(s, jj).beyond_horizon))
            } else {
                Box::new(tokens.iter().copied())
            };
            for jj in iter {
                let p = seqs.token_point(s, jj);
                let (rv, rt) = problem.initial_residual(preds[s * k + jj], p.x);
                let mut contrib = rv.square();
                if let Some(rt) = rt {
                    contrib = contrib + rt.square();
                }
                i_sum = i_sum + contrib;
                i_count += 1;
            }
        }
        if i == 0 || i == seqs.m - 1 {
            let partner = if i == 0 { seqs.m - 1 } else { 0 };
            let (ps, _) = match seqs.mode {
                crate::collocation::SequenceMode::Sub => (partner * seqs.n + j, 0),
                crate::collocation::SequenceMode::Long => (partner, 0),
            };
            for jj in 0..k {
                if seqs.token_point(s, jj).beyond_horizon {
                    continue;
                }
                let here = preds[s * k + jj];
                let there = preds[ps * k + jj];
                let (left, right) = if i == 0 { (here, there) } else { (there, here) };
                let (r1, r2) = problem.boundary_residual(left, right);
                match problem.boundary_condition() {
                    BoundaryCondition::Periodic => {
                        b_sum = b_sum + r1.square();
                        b_count += 1;
                    }
                    BoundaryCondition::Dirichlet => {
                        // each edge anchor contributes its own value residual
                        let own = if i == 0 { r1 } else { r2.unwrap() };
                        b_sum = b_sum + own.square();
                        b_count += 1;
                    }
                }
            }
        }
    }
    let l_i = if i_count == 0 {
        zero()
    } else {
        i_sum.scale(1.0 / i_count as f64)
    };
    let l_b = if b_count == 0 {
        zero()
    } else {
        b_sum.scale(1.0 / b_count as f64)
    };
    (l_f, l_i, l_b)
}

/// Mean squared difference between the overlapping predictions of
/// consecutive sub-sequences of the same column. Zero when no overlap
/// exists (no lattice alignment, or long-sequence mode).
pub fn loss_alignment<J: Jet>(seqs: &SequenceSet, preds: &[J]) -> J::Inner {
    assert!(seqs.k >= 2 || seqs.align_shift.is_none(), "alignment needs k >= 2");
    let Some(delta) = seqs.align_shift else {
        return <J::Inner as Scalar>::lit(0.0);
    };
    let k = seqs.k;
    let mut sum = <J::Inner as Scalar>::lit(0.0);
    let mut count = 0usize;
    for i in 0..seqs.m {
        for j in 0..seqs.n - 1 {
            let sa = i * seqs.n + j;
            let sb = sa + 1;
            for jj in delta..k {
                let d = preds[sa * k + jj].val() - preds[sb * k + jj - delta].val();
                sum = sum + d.square();
                count += 1;
            }
        }
    }
    if count == 0 {
        <J::Inner as Scalar>::lit(0.0)
    } else {
        sum.scale(1.0 / count as f64)
    }
}

/// Explicit-pair form of the alignment mean: squared differences averaged
/// over the supplied overlap pairs.
pub fn loss_alignment_pairs(diffs: &[f64]) -> f64 {
    assert!(!diffs.is_empty(), "alignment undefined without overlap pairs");
    diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64
}

/// Weighted total, applying the wave auto-adaptation rule when enabled.
pub fn loss_total(l_f: f64, l_i: f64, l_b: f64, l_align: f64, w: &LossWeights) -> f64 {
    let la = w.effective_lambda_align(l_f, l_align);
    w.lambda_f * l_f + w.lambda_i * l_i + w.lambda_b * l_b + la * l_align
}

impl LossBreakdown {
    pub fn assemble(l_f: f64, l_i: f64, l_b: f64, l_align: f64, w: &LossWeights) -> Self {
        LossBreakdown {
            l_f,
            l_i,
            l_b,
            l_align,
            total: loss_total(l_f, l_i, l_b, l_align, w),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Jet1, Jet2};
    use crate::collocation::{Grid, SequenceMode};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    type J2 = Jet2<f64>;
    type J1 = Jet1<f64>;

    fn rand_point(rng: &mut ChaCha8Rng, p: &PdeProblem) -> (f64, f64) {
        (
            rng.gen_range(p.domain.x_min..p.domain.x_max),
            rng.gen_range(0.0..p.domain.t_max),
        )
    }

    #[test]
    fn convection_residual_basics() {
        let p = PdeProblem::convection(50.0);
        let zero: f64 = p.residual(J2::lit(0.0));
        assert_eq!(zero, 0.0);

        // u with u_x = 1, u_t = 0 gives beta
        let (jx, _) = J2::seed_xt(0.3, 0.1);
        assert_eq!(p.residual(jx), 50.0);
    }

    #[test]
    fn convection_annihilates_analytical() {
        let p = PdeProblem::convection(50.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (x, t) = rand_point(&mut rng, &p);
            let u: J2 = p.analytical_jet(x, t);
            assert!(p.residual(u).abs() < 1e-10);
        }
    }

    #[test]
    fn reaction_residual_basics() {
        let p = PdeProblem::reaction(5.0);
        assert_eq!(p.residual(J2::lit(1.0)), 0.0);
        let r = p.residual(J2::lit(0.5));
        assert!((r - (-1.25)).abs() < 1e-15);
    }

    #[test]
    fn reaction_annihilates_analytical() {
        let p = PdeProblem::reaction(5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let (x, t) = rand_point(&mut rng, &p);
            let u: J1 = p.analytical_jet(x, t);
            assert!(p.residual(u).abs() < 1e-8);
        }
    }

    #[test]
    fn wave_residual_basics() {
        let p = PdeProblem::wave(3.0);
        // u = x^2: u_xx = 2, u_tt = 0 -> -8; u = t^2 -> 2
        let (jx, jt) = J2::seed_xt(0.7, 0.2);
        assert_eq!(p.residual(jx.square()), -8.0);
        assert_eq!(p.residual(jt.square()), 2.0);
    }

    #[test]
    fn wave_annihilates_analytical() {
        let p = PdeProblem::wave(3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (x, t) = rand_point(&mut rng, &p);
            let u: J2 = p.analytical_jet(x, t);
            assert!(p.residual(u).abs() < 1e-8);
        }
    }

    #[test]
    fn initial_residuals_vanish_on_analytical() {
        for p in [
            PdeProblem::convection(50.0),
            PdeProblem::reaction(5.0),
            PdeProblem::wave(3.0),
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            for _ in 0..10 {
                let x = rng.gen_range(p.domain.x_min..p.domain.x_max);
                let u: J2 = p.analytical_jet(x, 0.0);
                let (rv, rt) = p.initial_residual(u, x);
                assert!(rv.abs() < 1e-10, "{}: {rv}", p.name());
                if let Some(rt) = rt {
                    assert!(rt.abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn initial_residual_examples() {
        let conv = PdeProblem::convection(50.0);
        let x = 1.234;
        let u = J2::lit(x.sin());
        let (rv, _) = conv.initial_residual(u, x);
        assert_eq!(rv, 0.0);

        let reac = PdeProblem::reaction(5.0);
        let (rv, _) = reac.initial_residual(J2::lit(1.0), PI);
        assert_eq!(rv, 0.0);
    }

    #[test]
    fn boundary_residual_examples() {
        let conv = PdeProblem::convection(50.0);
        let (r, none) = conv.boundary_residual(J2::lit(0.3), J2::lit(0.1));
        assert!((r - 0.2).abs() < 1e-15);
        assert!(none.is_none());
        let (r, _) = conv.boundary_residual(J2::lit(0.4), J2::lit(0.4));
        assert_eq!(r, 0.0);

        let wave = PdeProblem::wave(3.0);
        for t in [0.0, 0.31, 1.0] {
            let l: J2 = wave.analytical_jet(0.0, t);
            let r: J2 = wave.analytical_jet(1.0, t);
            let (rl, rr) = wave.boundary_residual(l, r);
            assert!(rl.abs() < 1e-12);
            assert!(rr.unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn analytical_values() {
        let conv = PdeProblem::convection(50.0);
        assert_eq!(conv.analytical_solution(0.0, 0.0), 0.0);
        assert!((conv.analytical_solution(PI / 2.0, 0.0) - 1.0).abs() < 1e-15);
        let reac = PdeProblem::reaction(5.0);
        assert!((reac.analytical_solution(PI, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn registry_defaults() {
        assert_eq!(
            PdeProblem::by_name("convection").unwrap().kind,
            ProblemKind::Convection { beta: 50.0 }
        );
        assert_eq!(
            PdeProblem::by_name("reaction").unwrap().kind,
            ProblemKind::Reaction { rho: 5.0 }
        );
        assert_eq!(
            PdeProblem::by_name("wave").unwrap().kind,
            ProblemKind::Wave { freq: 3.0 }
        );
        assert!(PdeProblem::by_name("burgers").is_err());
    }

    #[test]
    fn loss_seq_zero_and_normalization() {
        let p = PdeProblem::convection(1.0);
        let g = Grid::new(p.domain, 3, 3).unwrap();
        let seqs = SequenceSet::build(&g, SequenceMode::Sub, 2, g.dt_grid(), true);
        // all-zero predictions: F(0) = 0 for convection
        let preds = vec![J1::lit(0.0); seqs.n_seq() * 2];
        let (lf, _li, lb) = loss_seq(&p, &seqs, &preds, InitialLossMode::AnchorOnly);
        assert_eq!(lf, 0.0);
        assert_eq!(lb, 0.0);
    }

    #[test]
    fn loss_seq_single_anchor_arithmetic() {
        // one anchor, k = 2, both residuals 1 -> (1/(2*1)) * 2 = 1
        // residual of convection at u with u_x = 0, u_t = 1 is 1
        let p = PdeProblem::convection(1.0);
        let mut u = J1::lit(0.0);
        u.gt = 1.0;
        let r = p.residual(u);
        assert_eq!(r, 1.0);
        let contributions = [r, r];
        let lf: f64 = contributions.iter().map(|r| r * r).sum::<f64>() / 2.0;
        assert_eq!(lf, 1.0);
    }

    #[test]
    fn loss_seq_annihilated_by_analytical_on_grid() {
        let p = PdeProblem::convection(50.0);
        let g = Grid::new(p.domain, 11, 11).unwrap();
        let seqs = SequenceSet::build(&g, SequenceMode::Sub, 3, g.dt_grid(), true);
        let mut preds: Vec<J2> = Vec::new();
        for s in 0..seqs.n_seq() {
            for jj in 0..seqs.k {
                let pt = seqs.token_point(s, jj);
                preds.push(p.analytical_jet(pt.x, pt.t));
            }
        }
        let (lf, li, lb) = loss_seq(&p, &seqs, &preds, InitialLossMode::AnchorOnly);
        assert!(lf < 1e-12, "lf = {lf}");
        assert!(li < 1e-12, "li = {li}");
        assert!(lb < 1e-12, "lb = {lb}");
        let la: f64 = loss_alignment(&seqs, &preds);
        assert!(la < 1e-24);
    }

    #[test]
    fn alignment_arithmetic() {
        // identical overlaps -> 0; uniform difference delta -> delta^2;
        // explicit pairs {0.1, 0.2, 0, 0} -> 0.0125
        assert_eq!(loss_alignment_pairs(&[0.3, 0.3]) , 0.09);
        let diffs = [0.1, 0.2, 0.0, 0.0];
        assert!((loss_alignment_pairs(&diffs) - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn total_weighting() {
        let w = LossWeights {
            lambda_f: 1.0,
            lambda_i: 1.0,
            lambda_b: 10.0,
            lambda_align: 1000.0,
            wave_auto_align: false,
        };
        assert_eq!(loss_total(1.0, 1.0, 1.0, 0.0, &w), 12.0);
        assert_eq!(loss_total(0.0, 0.0, 0.0, 0.0, &w), 0.0);
        let defaults = LossWeights::defaults_for(&PdeProblem::convection(50.0));
        assert_eq!(
            (defaults.lambda_f, defaults.lambda_i, defaults.lambda_b),
            (1.0, 1.0, 10.0)
        );
        assert_eq!(defaults.lambda_align, 1000.0);
        assert!(!defaults.wave_auto_align);
        assert!(LossWeights::defaults_for(&PdeProblem::wave(3.0)).wave_auto_align);
    }

    #[test]
    fn doubling_residuals_quadruples_losses() {
        let p = PdeProblem::convection(2.0);
        let g = Grid::new(p.domain, 4, 4).unwrap();
        let seqs = SequenceSet::build(&g, SequenceMode::Sub, 2, g.dt_grid(), true);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let preds: Vec<J1> = (0..seqs.n_seq() * 2)
            .map(|_| {
                let mut j = J1::lit(rng.gen_range(-1.0..1.0));
                j.gx = rng.gen_range(-1.0..1.0);
                j.gt = rng.gen_range(-1.0..1.0);
                j
            })
            .collect();
        let doubled: Vec<J1> = preds.iter().map(|j| j.scale(2.0)).collect();
        let (lf, _, _) = loss_seq(&p, &seqs, &preds, InitialLossMode::AnchorOnly);
        let (lf2, _, _) = loss_seq(&p, &seqs, &doubled, InitialLossMode::AnchorOnly);
        assert!((lf2 - 4.0 * lf).abs() < 1e-12 * lf2.abs().max(1.0));
    }

    #[test]
    fn wave_auto_align_rule() {
        let w = LossWeights {
            lambda_f: 2.0,
            lambda_i: 1.0,
            lambda_b: 10.0,
            lambda_align: 1000.0,
            wave_auto_align: true,
        };
        // effective weight = lambda_f * lf / lalign
        let la = w.effective_lambda_align(0.5, 0.25);
        assert!((la - 4.0).abs() < 1e-15);
        // total = 2*0.5 + 1*0 + 10*0 + 4*0.25 = 2
        assert!((loss_total(0.5, 0.0, 0.0, 0.25, &w) - 2.0).abs() < 1e-15);
    }
}
