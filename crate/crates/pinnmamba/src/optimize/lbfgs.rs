//! Limited-memory BFGS with strong Wolfe line search.
//!
//! Full-batch, deterministic: the search direction comes from the two-loop
//! recursion over stored (s, y) pairs, the step length from a
//! bracket-and-zoom line search with cubic interpolation. Curvature pairs
//! with `s.y <= 1e-10 |s||y|` are skipped. A failed line search rejects the
//! step, clears the history, and falls back to a small gradient step so
//! long sweeps keep running.

use std::collections::VecDeque;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LbfgsConfig {
    pub history: usize,
    /// Line-search evaluation budget per step.
    pub max_evals: usize,
    pub c1: f64,
    pub c2: f64,
    pub init_step: f64,
    pub grad_tol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            history: 50,
            max_evals: 20,
            c1: 1e-4,
            c2: 0.9,
            init_step: 1.0,
            grad_tol: 1e-9,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) {
        assert!(self.history >= 1, "history_size must be at least 1");
        assert!(
            0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0,
            "need 0 < c1 < c2 < 1"
        );
        assert!(self.init_step > 0.0 && self.max_evals >= 2);
    }
}

/// What one outer step did.
#[derive(Clone, Copy, Debug)]
pub struct StepOutcome {
    pub loss_before: f64,
    pub loss_after: f64,
    pub grad_norm: f64,
    pub step_size: f64,
    pub evals: usize,
    pub fallback: bool,
    pub converged: bool,
}

pub struct Lbfgs {
    cfg: LbfgsConfig,
    s_hist: VecDeque<Vec<f64>>,
    y_hist: VecDeque<Vec<f64>>,
    rho_hist: VecDeque<f64>,
    cached: Option<(f64, Vec<f64>)>,
    took_first_step: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn norm_l1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// Minimizer of the cubic through (x1, f1, g1) and (x2, f2, g2), clamped
/// to `bounds`; falls back to the midpoint when the cubic has no real
/// minimum inside.
fn cubic_interpolate(x1: f64, f1: f64, g1: f64, x2: f64, f2: f64, g2: f64, bounds: (f64, f64)) -> f64 {
    let (lo, hi) = bounds;
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let d2_square = d1 * d1 - g1 * g2;
    if d2_square >= 0.0 {
        let d2 = d2_square.sqrt();
        let min_pos = if x1 <= x2 {
            x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
        } else {
            x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2))
        };
        min_pos.clamp(lo, hi)
    } else {
        0.5 * (lo + hi)
    }
}

struct LinePoint {
    t: f64,
    f: f64,
    g: Vec<f64>,
    gtd: f64,
}

impl Lbfgs {
    pub fn new(cfg: LbfgsConfig) -> Self {
        cfg.validate();
        Lbfgs {
            cfg,
            s_hist: VecDeque::new(),
            y_hist: VecDeque::new(),
            rho_hist: VecDeque::new(),
            cached: None,
            took_first_step: false,
        }
    }

    pub fn clear_history(&mut self) {
        self.s_hist.clear();
        self.y_hist.clear();
        self.rho_hist.clear();
    }

    /// Two-loop recursion: approximates `H^{-1} g` from the stored pairs.
    fn direction(&self, grad: &[f64]) -> Vec<f64> {
        let m = self.s_hist.len();
        let mut q = grad.to_vec();
        let mut alphas = vec![0.0f64; m];
        for i in (0..m).rev() {
            let a = self.rho_hist[i] * dot(&self.s_hist[i], &q);
            alphas[i] = a;
            for (qv, yv) in q.iter_mut().zip(&self.y_hist[i]) {
                *qv -= a * yv;
            }
        }
        if let (Some(s), Some(y)) = (self.s_hist.back(), self.y_hist.back()) {
            let gamma = dot(s, y) / dot(y, y);
            for qv in q.iter_mut() {
                *qv *= gamma;
            }
        }
        for i in 0..m {
            let beta = self.rho_hist[i] * dot(&self.y_hist[i], &q);
            let a = alphas[i] - beta;
            for (qv, sv) in q.iter_mut().zip(&self.s_hist[i]) {
                *qv += a * sv;
            }
        }
        for qv in q.iter_mut() {
            *qv = -*qv;
        }
        q
    }

    /// One outer iteration. The closure must be deterministic for fixed
    /// parameters; its last evaluation is guaranteed to be at the returned
    /// parameter point.
    pub fn step(
        &mut self,
        theta: &mut [f64],
        closure: &mut dyn FnMut(&[f64]) -> (f64, Vec<f64>),
    ) -> StepOutcome {
        let mut evals = 0usize;
        let (f0, g0) = match self.cached.take() {
            Some(c) => c,
            None => {
                evals += 1;
                closure(theta)
            }
        };
        let gnorm = norm_inf(&g0);
        if gnorm <= self.cfg.grad_tol {
            self.cached = Some((f0, g0));
            return StepOutcome {
                loss_before: f0,
                loss_after: f0,
                grad_norm: gnorm,
                step_size: 0.0,
                evals,
                fallback: false,
                converged: true,
            };
        }

        let mut d = self.direction(&g0);
        let mut gtd = dot(&g0, &d);
        if !gtd.is_finite() || gtd >= 0.0 {
            // not a descent direction; restart from steepest descent
            self.clear_history();
            d = g0.iter().map(|v| -v).collect();
            gtd = dot(&g0, &d);
        }

        let t0 = if self.took_first_step {
            self.cfg.init_step
        } else {
            self.cfg.init_step.min(1.0 / norm_l1(&g0)).max(1e-12)
        };

        let budget = self.cfg.max_evals.saturating_sub(evals);
        let result = self.strong_wolfe(theta, &d, f0, &g0, gtd, t0, budget, closure);
        match result {
            Some((pt, used)) if pt.f <= f0 && pt.t > 0.0 => {
                evals += used;
                let mut s = vec![0.0f64; theta.len()];
                for i in 0..theta.len() {
                    s[i] = pt.t * d[i];
                    theta[i] += s[i];
                }
                let y: Vec<f64> = pt.g.iter().zip(&g0).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                let s_norm = dot(&s, &s).sqrt();
                let y_norm = dot(&y, &y).sqrt();
                if sy > 1e-10 * s_norm * y_norm {
                    if self.s_hist.len() == self.cfg.history {
                        self.s_hist.pop_front();
                        self.y_hist.pop_front();
                        self.rho_hist.pop_front();
                    }
                    self.s_hist.push_back(s);
                    self.y_hist.push_back(y);
                    self.rho_hist.push_back(1.0 / sy);
                }
                self.took_first_step = true;
                let f_new = pt.f;
                self.cached = Some((pt.f, pt.g));
                StepOutcome {
                    loss_before: f0,
                    loss_after: f_new,
                    grad_norm: gnorm,
                    step_size: pt.t,
                    evals,
                    fallback: false,
                    converged: false,
                }
            }
            other => {
                if let Some((_, used)) = other {
                    evals += used;
                }
                log::warn!(
                    "line search failed after {evals} evaluations; taking fallback gradient step"
                );
                self.clear_history();
                for (th, g) in theta.iter_mut().zip(&g0) {
                    *th -= 1e-3 * g;
                }
                let (f_new, g_new) = closure(theta);
                evals += 1;
                self.cached = Some((f_new, g_new));
                StepOutcome {
                    loss_before: f0,
                    loss_after: f_new,
                    grad_norm: gnorm,
                    step_size: 1e-3,
                    evals,
                    fallback: true,
                    converged: false,
                }
            }
        }
    }

    /// Bracket-and-zoom strong Wolfe line search. Returns the accepted
    /// point; the final closure call is re-issued at the accepted step so
    /// closure-side caches line up with the returned parameters.
    #[allow(clippy::too_many_arguments)]
    fn strong_wolfe(
        &self,
        theta: &[f64],
        d: &[f64],
        f0: f64,
        g0: &[f64],
        gtd0: f64,
        t0: f64,
        max_evals: usize,
        closure: &mut dyn FnMut(&[f64]) -> (f64, Vec<f64>),
    ) -> Option<(LinePoint, usize)> {
        let (c1, c2) = (self.cfg.c1, self.cfg.c2);
        let d_norm = norm_inf(d);
        let tolerance_change = 1e-9;
        let mut evals = 0usize;
        let mut probe = theta.to_vec();
        let last_t = std::cell::Cell::new(f64::NAN);
        let mut eval_at = |t: f64, evals: &mut usize| -> LinePoint {
            for i in 0..theta.len() {
                probe[i] = theta[i] + t * d[i];
            }
            let (f, g) = closure(&probe);
            *evals += 1;
            last_t.set(t);
            let gtd = dot(&g, d);
            LinePoint { t, f, g, gtd }
        };

        if max_evals < 2 {
            return None;
        }

        enum BracketEnd {
            Done(LinePoint),
            Bracket(LinePoint, LinePoint),
            Budget(LinePoint),
        }

        let end = {
            let mut t = t0;
            let mut prev = LinePoint {
                t: 0.0,
                f: f0,
                g: g0.to_vec(),
                gtd: gtd0,
            };
            let mut cur = eval_at(t, &mut evals);
            let mut ls_iter = 0usize;
            loop {
                if !cur.f.is_finite() {
                    // overshoot into a bad region: bracket against it
                    break BracketEnd::Bracket(prev, cur);
                }
                if cur.f > f0 + c1 * t * gtd0 || (ls_iter > 1 && cur.f >= prev.f) {
                    break BracketEnd::Bracket(prev, cur);
                }
                if cur.gtd.abs() <= -c2 * gtd0 {
                    break BracketEnd::Done(cur);
                }
                if cur.gtd >= 0.0 {
                    break BracketEnd::Bracket(prev, cur);
                }
                if evals >= max_evals {
                    break BracketEnd::Budget(cur);
                }
                let min_step = t + 0.01 * (t - prev.t);
                let max_step = t * 10.0;
                let next_t = cubic_interpolate(
                    prev.t,
                    prev.f,
                    prev.gtd,
                    t,
                    cur.f,
                    cur.gtd,
                    (min_step, max_step),
                );
                prev = cur;
                t = next_t;
                cur = eval_at(t, &mut evals);
                ls_iter += 1;
            }
        };

        let (mut lo, mut hi) = match end {
            BracketEnd::Done(pt) => {
                return Some((finish(pt, &last_t, &mut eval_at, &mut evals), evals))
            }
            // ran out of budget while still descending: keep the best point
            BracketEnd::Budget(pt) => {
                return if pt.f <= f0 {
                    Some((finish(pt, &last_t, &mut eval_at, &mut evals), evals))
                } else {
                    None
                };
            }
            BracketEnd::Bracket(a, b) => (a, b),
        };
        // keep lo as the lower function value
        if hi.f.is_finite() && hi.f < lo.f {
            std::mem::swap(&mut lo, &mut hi);
        }

        let mut insuf_progress = false;
        while evals < max_evals {
            if (hi.t - lo.t).abs() * d_norm < tolerance_change {
                break;
            }
            let mut tz = cubic_interpolate(
                lo.t,
                lo.f,
                lo.gtd,
                hi.t,
                if hi.f.is_finite() { hi.f } else { lo.f * 2.0 + 1.0 },
                if hi.gtd.is_finite() { hi.gtd } else { 0.0 },
                (lo.t.min(hi.t), lo.t.max(hi.t)),
            );
            let bmin = lo.t.min(hi.t);
            let bmax = lo.t.max(hi.t);
            let eps = 0.1 * (bmax - bmin);
            if (bmax - tz).min(tz - bmin) < eps {
                if insuf_progress || tz >= bmax || tz <= bmin {
                    tz = if (tz - bmax).abs() < (tz - bmin).abs() {
                        bmax - eps
                    } else {
                        bmin + eps
                    };
                    insuf_progress = false;
                } else {
                    insuf_progress = true;
                }
            } else {
                insuf_progress = false;
            }
            let cand = eval_at(tz, &mut evals);
            if !cand.f.is_finite() || cand.f > f0 + c1 * tz * gtd0 || cand.f >= lo.f {
                hi = cand;
            } else {
                if cand.gtd.abs() <= -c2 * gtd0 {
                    lo = cand;
                    break;
                }
                if cand.gtd * (hi.t - lo.t) >= 0.0 {
                    hi = LinePoint {
                        t: lo.t,
                        f: lo.f,
                        g: lo.g.clone(),
                        gtd: lo.gtd,
                    };
                }
                lo = cand;
            }
        }
        if lo.f <= f0 && lo.t > 0.0 && lo.f.is_finite() {
            Some((finish(lo, &last_t, &mut eval_at, &mut evals), evals))
        } else {
            None
        }
    }
}

/// The training loop reads per-epoch diagnostics out of the closure
/// state, which must therefore correspond to the returned parameter point;
/// re-evaluate there unless the last evaluation already was.
fn finish(
    pt: LinePoint,
    last_t: &std::cell::Cell<f64>,
    eval_at: &mut dyn FnMut(f64, &mut usize) -> LinePoint,
    evals: &mut usize,
) -> LinePoint {
    if last_t.get() == pt.t {
        pt
    } else {
        eval_at(pt.t, evals)
    }
}
