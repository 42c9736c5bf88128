//! Full-batch training loop.
//!
//! Each closure evaluation runs in two passes. The first forward pass
//! produces every token's prediction jet; loss components and their
//! weights come straight from the shared loss functions. Because the
//! alignment and boundary terms couple predictions across sequences only
//! through their values, the exact gradient decomposes into per-sequence
//! backward passes seeded with per-token adjoints: residual terms seed the
//! derivative slots, value-coupled terms seed the value slot with
//! coefficients computed from the first pass. Token embeddings are shared
//! between overlapping sub-sequences, so they are evaluated once per unique
//! point and their adjoints accumulated before one backward pass per point.

use crate::collocation::{Grid, SequenceMode, SequenceSet};
use crate::error::{Error, Result};
use crate::eval::{rmae, rrmse};
use crate::model::{
    embed_backward, embed_token_traced, encoder_backward, encoder_forward_traced, mlp_backward,
    mlp_forward_traced, Arch, EmbedTrace, EncoderTrace, JetAdj, MlpTrace, Model, ModelConfig,
};
use crate::optimize::lbfgs::{Lbfgs, LbfgsConfig};
use crate::physics::{
    loss_alignment, loss_seq, InitialLossMode, LossBreakdown, LossWeights, PdeProblem,
    ProblemKind,
};
use crate::autodiff::{Jet1, Jet2};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Everything a training run needs, fully resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub problem: PdeProblem,
    pub grid_m: usize,
    pub grid_n: usize,
    pub mode: SequenceMode,
    pub k: usize,
    /// Sequence interval; `None` takes the grid interval.
    pub dt: Option<f64>,
    pub extrapolate_beyond_horizon: bool,
    pub model: ModelConfig,
    pub weights: LossWeights,
    pub initial_mode: InitialLossMode,
    pub epochs: usize,
    pub lbfgs: LbfgsConfig,
    pub seed: u64,
    pub eval_every: usize,
    pub out_dir: Option<PathBuf>,
}

impl TrainConfig {
    pub fn defaults(problem: PdeProblem) -> Self {
        TrainConfig {
            problem,
            grid_m: 101,
            grid_n: 101,
            mode: SequenceMode::Sub,
            k: 7,
            dt: None,
            extrapolate_beyond_horizon: true,
            model: ModelConfig::default(),
            weights: LossWeights::defaults_for(&problem),
            initial_mode: InitialLossMode::AnchorOnly,
            epochs: 1000,
            lbfgs: LbfgsConfig::default(),
            seed: 0,
            eval_every: 1,
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_m < 2 || self.grid_n < 2 {
            return Err(Error::Config("grid needs at least 2 points per axis".into()));
        }
        if self.mode == SequenceMode::Sub && self.model.arch == Arch::PinnMamba && self.k < 2 {
            return Err(Error::Config("sequence length k must be at least 2".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::Config("sequence interval must be positive".into()));
            }
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be positive".into()));
        }
        self.model.validate()?;
        self.weights.validate()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.problem.domain, self.grid_m, self.grid_n)
    }

    pub fn resolved_dt(&self) -> f64 {
        let g = Grid::new(self.problem.domain, self.grid_m, self.grid_n)
            .expect("validated grid");
        self.dt.unwrap_or_else(|| g.dt_grid())
    }
}

/// One history row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_f: f64,
    pub l_i: f64,
    pub l_b: f64,
    pub l_align: f64,
    pub total: f64,
    pub rmae: f64,
    pub rrmse: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn csv(&self) -> String {
        let mut out =
            String::from("epoch,loss_f,loss_i,loss_b,loss_align,loss_total,rmae,rrmse,seconds\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.epoch, r.l_f, r.l_i, r.l_b, r.l_align, r.total, r.rmae, r.rrmse, r.seconds
            );
        }
        out
    }
}

/// A finished run: final and best parameters plus the per-epoch history.
pub struct TrainResult {
    pub model: Model,
    pub params: Vec<f64>,
    pub best_params: Vec<f64>,
    pub best_epoch: usize,
    pub best_rmae: f64,
    pub history: TrainHistory,
    pub final_loss: LossBreakdown,
}

/// Per-token adjoint coefficients and loss values of one closure pass.
struct EvalOutput {
    breakdown: LossBreakdown,
    grid_pred: Vec<f64>,
}

/// Fast-path evaluator, monomorphized over the jet order the problem needs.
///
/// When the estimated footprint fits the cache budget, every forward trace
/// is kept in memory so the backward pass reuses it; otherwise traces are
/// recomputed sequence by sequence during the backward pass.
struct Evaluator<'a, J: JetAdj> {
    cfg: &'a TrainConfig,
    model: &'a Model,
    seqs: &'a SequenceSet,
    cache_traces: bool,
    embeds: Vec<J>,
    embed_adj: Vec<J>,
    preds: Vec<J>,
    pred_adj: Vec<J>,
    gathered: Vec<J>,
    gathered_adj: Vec<J>,
    etraces: Vec<EmbedTrace<J>>,
    enctraces: Vec<EncoderTrace<J>>,
    mlptraces: Vec<MlpTrace<J>>,
    grad: Vec<f64>,
    pub last: Option<EvalOutput>,
}

/// Trace bytes the evaluator may pin across an evaluation. Past this,
/// recomputing the forward into one hot buffer is faster than streaming
/// cold traces back from memory.
const TRACE_CACHE_BUDGET: usize = 64_000_000;

impl<'a, J: JetAdj> Evaluator<'a, J> {
    fn new(cfg: &'a TrainConfig, model: &'a Model, seqs: &'a SequenceSet) -> Self {
        let de = model.config.embed_dim;
        let (np, k, ns) = (seqs.points.len(), seqs.k, seqs.n_seq());
        let cache_traces = Self::estimated_trace_bytes(model, seqs) < TRACE_CACHE_BUDGET;
        let (n_enc, n_emb, n_mlp) = match (model.config.arch, cache_traces) {
            (Arch::PinnMamba, true) => (ns, np, 0),
            (Arch::PinnMamba, false) => (1, 1, 0),
            (Arch::Mlp, true) => (0, 0, ns * k),
            (Arch::Mlp, false) => (0, 0, 1),
        };
        Evaluator {
            cfg,
            model,
            seqs,
            cache_traces,
            embeds: vec![J::lit(0.0); np * de],
            embed_adj: vec![J::lit(0.0); np * de],
            preds: vec![J::lit(0.0); ns * k],
            pred_adj: vec![J::lit(0.0); ns * k],
            gathered: vec![J::lit(0.0); k * de],
            gathered_adj: vec![J::lit(0.0); k * de],
            etraces: (0..n_emb.max(1)).map(|_| EmbedTrace::new()).collect(),
            enctraces: (0..n_enc.max(1)).map(|_| EncoderTrace::new()).collect(),
            mlptraces: (0..n_mlp.max(1)).map(|_| MlpTrace::new()).collect(),
            grad: Vec::new(),
            last: None,
        }
    }

    fn estimated_trace_bytes(model: &Model, seqs: &SequenceSet) -> usize {
        let c = &model.config;
        let (de, di, n, k) = (c.embed_dim, c.inner(), c.state, seqs.k);
        match c.arch {
            Arch::PinnMamba => {
                let per_seq = c.blocks * k * (4 * de + 13 * di + 2 * n + 4 * di * n) + k;
                let per_point = 2 + 4 * c.hidden + de;
                (seqs.n_seq() * per_seq + seqs.points.len() * per_point)
                    * std::mem::size_of::<J>()
            }
            Arch::Mlp => {
                let per_point = 2 + 2 * c.depth * c.hidden + c.depth + 1;
                seqs.n_seq() * k * per_point * std::mem::size_of::<J>()
            }
        }
    }

    fn forward_all(&mut self, theta: &[f64]) {
        let de = self.model.config.embed_dim;
        let k = self.seqs.k;
        match self.model.config.arch {
            Arch::PinnMamba => {
                for (p, pt) in self.seqs.points.iter().enumerate() {
                    let trace = if self.cache_traces {
                        &mut self.etraces[p]
                    } else {
                        &mut self.etraces[0]
                    };
                    embed_token_traced(self.model, theta, pt.x, pt.t, trace);
                    self.embeds[p * de..(p + 1) * de].copy_from_slice(&trace.out);
                }
                for s in 0..self.seqs.n_seq() {
                    for j in 0..k {
                        let p = self.seqs.token_index(s, j);
                        self.gathered[j * de..(j + 1) * de]
                            .copy_from_slice(&self.embeds[p * de..(p + 1) * de]);
                    }
                    let trace = if self.cache_traces {
                        &mut self.enctraces[s]
                    } else {
                        &mut self.enctraces[0]
                    };
                    encoder_forward_traced(self.model, theta, &self.gathered, k, trace);
                    self.preds[s * k..(s + 1) * k].copy_from_slice(&trace.preds);
                }
            }
            Arch::Mlp => {
                for s in 0..self.seqs.n_seq() {
                    for j in 0..k {
                        let pt = self.seqs.token_point(s, j);
                        let trace = if self.cache_traces {
                            &mut self.mlptraces[s * k + j]
                        } else {
                            &mut self.mlptraces[0]
                        };
                        mlp_forward_traced(self.model, theta, pt.x, pt.t, trace);
                        self.preds[s * k + j] = trace.out;
                    }
                }
            }
        }
    }

    /// Seeds per-token adjoints for all loss terms, mirroring the sums in
    /// `loss_seq` / `loss_alignment` term for term.
    fn seed_adjoints(&mut self, breakdown: &LossBreakdown) {
        let problem = &self.cfg.problem;
        let w = &self.cfg.weights;
        let seqs = self.seqs;
        let k = seqs.k;
        let n_seq = seqs.n_seq();
        for a in self.pred_adj.iter_mut() {
            *a = J::lit(0.0);
        }

        // residual loss: every token contributes, mean over all of them
        let wf = 2.0 * w.lambda_f / (n_seq * k) as f64;
        for idx in 0..n_seq * k {
            let p = self.preds[idx];
            let r = problem.residual(p);
            let c = wf * r;
            let seed = match problem.kind {
                ProblemKind::Convection { beta } => J::from_slots(0.0, c * beta, c, 0.0, 0.0, 0.0),
                ProblemKind::Reaction { rho } => {
                    let v = p.val();
                    J::from_slots(-c * rho * (1.0 - 2.0 * v), 0.0, c, 0.0, 0.0, 0.0)
                }
                ProblemKind::Wave { .. } => J::from_slots(0.0, 0.0, 0.0, -4.0 * c, 0.0, c),
            };
            self.pred_adj[idx] = self.pred_adj[idx] + seed;
        }

        // initial loss
        let mut initial_tokens: Vec<(usize, usize)> = Vec::new();
        for s in 0..n_seq {
            let (_, j) = seqs.anchor_of(s);
            if j != 0 {
                continue;
            }
            match self.cfg.initial_mode {
                InitialLossMode::AnchorOnly => initial_tokens.push((s, 0)),
                InitialLossMode::AllTokens => {
                    for jj in 0..k {
                        if !seqs.token_point(s, jj).beyond_horizon {
                            initial_tokens.push((s, jj));
                        }
                    }
                }
            }
        }
        if !initial_tokens.is_empty() {
            let wi = 2.0 * w.lambda_i / initial_tokens.len() as f64;
            let wave = problem.needs_second_order();
            for &(s, jj) in &initial_tokens {
                let pt = seqs.token_point(s, jj);
                let p = self.preds[s * k + jj];
                let rv = p.val() - problem.initial_target(pt.x);
                let mut seed = J::from_slots(wi * rv, 0.0, 0.0, 0.0, 0.0, 0.0);
                if wave {
                    let rt = p.dt();
                    seed = seed + J::from_slots(0.0, 0.0, wi * rt, 0.0, 0.0, 0.0);
                }
                self.pred_adj[s * k + jj] = self.pred_adj[s * k + jj] + seed;
            }
        }

        // boundary loss: both edge anchors contribute, mirroring loss_seq
        let mut boundary_count = 0usize;
        for s in 0..n_seq {
            let (i, _) = seqs.anchor_of(s);
            if i == 0 || i == seqs.m - 1 {
                for jj in 0..k {
                    if !seqs.token_point(s, jj).beyond_horizon {
                        boundary_count += 1;
                    }
                }
            }
        }
        if boundary_count > 0 {
            let wb = 2.0 * w.lambda_b / boundary_count as f64;
            let periodic = !problem.needs_second_order();
            for s in 0..n_seq {
                let (i, j) = seqs.anchor_of(s);
                if i != 0 && i != seqs.m - 1 {
                    continue;
                }
                let partner_seq = match seqs.mode {
                    SequenceMode::Sub => (if i == 0 { seqs.m - 1 } else { 0 }) * seqs.n + j,
                    SequenceMode::Long => {
                        if i == 0 {
                            seqs.m - 1
                        } else {
                            0
                        }
                    }
                };
                for jj in 0..k {
                    if seqs.token_point(s, jj).beyond_horizon {
                        continue;
                    }
                    let here = self.preds[s * k + jj].val();
                    if periodic {
                        let there = self.preds[partner_seq * k + jj].val();
                        let r = if i == 0 { here - there } else { there - here };
                        let sign = if i == 0 { 1.0 } else { -1.0 };
                        self.pred_adj[s * k + jj] = self.pred_adj[s * k + jj]
                            + J::from_slots(sign * wb * r, 0.0, 0.0, 0.0, 0.0, 0.0);
                        self.pred_adj[partner_seq * k + jj] = self.pred_adj[partner_seq * k + jj]
                            + J::from_slots(-sign * wb * r, 0.0, 0.0, 0.0, 0.0, 0.0);
                    } else {
                        self.pred_adj[s * k + jj] = self.pred_adj[s * k + jj]
                            + J::from_slots(wb * here, 0.0, 0.0, 0.0, 0.0, 0.0);
                    }
                }
            }
        }

        // alignment: overlapping predictions of column-consecutive anchors
        if let Some(delta) = seqs.align_shift {
            let pairs = seqs.m * (seqs.n - 1) * (k - delta);
            if pairs > 0 {
                let la = w.effective_lambda_align(breakdown.l_f, breakdown.l_align);
                let wa = 2.0 * la / pairs as f64;
                for i in 0..seqs.m {
                    for j in 0..seqs.n - 1 {
                        let sa = i * seqs.n + j;
                        let sb = sa + 1;
                        for jj in delta..k {
                            let d =
                                self.preds[sa * k + jj].val() - self.preds[sb * k + jj - delta].val();
                            self.pred_adj[sa * k + jj] = self.pred_adj[sa * k + jj]
                                + J::from_slots(wa * d, 0.0, 0.0, 0.0, 0.0, 0.0);
                            self.pred_adj[sb * k + jj - delta] = self.pred_adj[sb * k + jj - delta]
                                + J::from_slots(-wa * d, 0.0, 0.0, 0.0, 0.0, 0.0);
                        }
                    }
                }
            }
        }
    }

    fn backward_all(&mut self, theta: &[f64]) {
        let de = self.model.config.embed_dim;
        let k = self.seqs.k;
        self.grad.clear();
        self.grad.resize(self.model.n_params(), 0.0);
        match self.model.config.arch {
            Arch::PinnMamba => {
                for a in self.embed_adj.iter_mut() {
                    *a = J::lit(0.0);
                }
                for s in 0..self.seqs.n_seq() {
                    let trace = if self.cache_traces {
                        &self.enctraces[s]
                    } else {
                        for j in 0..k {
                            let p = self.seqs.token_index(s, j);
                            self.gathered[j * de..(j + 1) * de]
                                .copy_from_slice(&self.embeds[p * de..(p + 1) * de]);
                        }
                        encoder_forward_traced(
                            self.model,
                            theta,
                            &self.gathered,
                            k,
                            &mut self.enctraces[0],
                        );
                        &self.enctraces[0]
                    };
                    for a in self.gathered_adj.iter_mut() {
                        *a = J::lit(0.0);
                    }
                    encoder_backward(
                        self.model,
                        theta,
                        trace,
                        &self.pred_adj[s * k..(s + 1) * k],
                        &mut self.grad,
                        &mut self.gathered_adj,
                    );
                    for j in 0..k {
                        let p = self.seqs.token_index(s, j);
                        for c in 0..de {
                            self.embed_adj[p * de + c] =
                                self.embed_adj[p * de + c] + self.gathered_adj[j * de + c];
                        }
                    }
                }
                for (p, pt) in self.seqs.points.iter().enumerate() {
                    let trace = if self.cache_traces {
                        &self.etraces[p]
                    } else {
                        embed_token_traced(self.model, theta, pt.x, pt.t, &mut self.etraces[0]);
                        &self.etraces[0]
                    };
                    embed_backward(
                        self.model,
                        theta,
                        trace,
                        &self.embed_adj[p * de..(p + 1) * de],
                        &mut self.grad,
                    );
                }
            }
            Arch::Mlp => {
                for s in 0..self.seqs.n_seq() {
                    for j in 0..k {
                        let trace = if self.cache_traces {
                            &self.mlptraces[s * k + j]
                        } else {
                            let pt = self.seqs.token_point(s, j);
                            mlp_forward_traced(
                                self.model,
                                theta,
                                pt.x,
                                pt.t,
                                &mut self.mlptraces[0],
                            );
                            &self.mlptraces[0]
                        };
                        mlp_backward(
                            self.model,
                            theta,
                            trace,
                            self.pred_adj[s * k + j],
                            &mut self.grad,
                        );
                    }
                }
            }
        }
    }

    /// Loss value and exact parameter gradient at `theta`; stashes the
    /// loss breakdown and grid predictions for the epoch record.
    fn eval(&mut self, theta: &[f64]) -> (f64, Vec<f64>) {
        self.forward_all(theta);
        let (l_f, l_i, l_b) = loss_seq(&self.cfg.problem, self.seqs, &self.preds, self.cfg.initial_mode);
        let l_align = loss_alignment(self.seqs, &self.preds);
        let breakdown = LossBreakdown::assemble(l_f, l_i, l_b, l_align, &self.cfg.weights);
        self.seed_adjoints(&breakdown);
        self.backward_all(theta);
        let k = self.seqs.k;
        let mut grid_pred = Vec::with_capacity(self.seqs.m * self.seqs.n);
        for i in 0..self.seqs.m {
            for j in 0..self.seqs.n {
                let (s, jj) = self.seqs.prediction_slot(i, j);
                grid_pred.push(self.preds[s * k + jj].val());
            }
        }
        self.last = Some(EvalOutput {
            breakdown,
            grid_pred,
        });
        (breakdown.total, self.grad.clone())
    }
}

fn build_sequences(cfg: &TrainConfig, grid: &Grid) -> SequenceSet {
    match cfg.model.arch {
        Arch::Mlp => SequenceSet::single_points(grid),
        Arch::PinnMamba => SequenceSet::build(
            grid,
            cfg.mode,
            cfg.k,
            cfg.resolved_dt(),
            cfg.extrapolate_beyond_horizon,
        ),
    }
}

/// One evaluation of the training loss and its gradient at `theta`, using
/// the same fast path the optimizer drives.
pub fn loss_and_grad(cfg: &TrainConfig, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let seqs = build_sequences(cfg, &grid);
    let model = Model::new(cfg.model);
    assert_eq!(theta.len(), model.n_params(), "parameter count mismatch");
    Ok(if cfg.problem.needs_second_order() {
        Evaluator::<Jet2<f64>>::new(cfg, &model, &seqs).eval(theta)
    } else {
        Evaluator::<Jet1<f64>>::new(cfg, &model, &seqs).eval(theta)
    })
}

/// Trains per the config: one L-BFGS iteration per epoch over the
/// full-batch loss, one history row per executed epoch, metrics against
/// the analytical solution on the grid. Writes `history.csv`, `run.meta`
/// and checkpoints into `out_dir` when set.
pub fn train(cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    if cfg.problem.needs_second_order() {
        train_typed::<Jet2<f64>>(cfg)
    } else {
        train_typed::<Jet1<f64>>(cfg)
    }
}

fn train_typed<J: JetAdj>(cfg: &TrainConfig) -> Result<TrainResult> {
    let grid = cfg.grid()?;
    let seqs = build_sequences(cfg, &grid);
    let model = Model::new(cfg.model);
    let mut params = model.init_params(cfg.seed);
    let truth: Vec<f64> = grid
        .points()
        .map(|(x, t)| cfg.problem.analytical_solution(x, t))
        .collect();

    let mut evaluator = Evaluator::<J>::new(cfg, &model, &seqs);
    let mut lbfgs = Lbfgs::new(cfg.lbfgs);
    let mut history = TrainHistory::default();
    let mut best_rmae = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params = params.clone();
    let start = Instant::now();

    for epoch in 0..cfg.epochs {
        let outcome = lbfgs.step(&mut params, &mut |theta| evaluator.eval(theta));
        let out = evaluator
            .last
            .as_ref()
            .expect("closure evaluated at least once");
        let breakdown = out.breakdown;
        if !breakdown.total.is_finite() {
            if let Some(dir) = &cfg.out_dir {
                let _ = write_artifacts(dir, cfg, &model, &best_params, &best_params, &history);
            }
            return Err(Error::Diverged {
                epoch,
                msg: format!("non-finite loss {:?}", breakdown),
            });
        }
        let (m_rmae, m_rrmse) = if epoch % cfg.eval_every == 0 || epoch + 1 == cfg.epochs {
            (
                rmae(&out.grid_pred, &truth)?,
                rrmse(&out.grid_pred, &truth)?,
            )
        } else {
            (f64::NAN, f64::NAN)
        };
        if m_rmae.is_finite() && m_rmae < best_rmae {
            best_rmae = m_rmae;
            best_epoch = epoch;
            best_params.copy_from_slice(&params);
        }
        history.records.push(EpochRecord {
            epoch,
            l_f: breakdown.l_f,
            l_i: breakdown.l_i,
            l_b: breakdown.l_b,
            l_align: breakdown.l_align,
            total: breakdown.total,
            rmae: m_rmae,
            rrmse: m_rrmse,
            seconds: start.elapsed().as_secs_f64(),
        });
        if outcome.converged {
            break;
        }
    }

    let final_loss = evaluator
        .last
        .as_ref()
        .map(|o| o.breakdown)
        .unwrap_or_default();
    if cfg.epochs == 0 {
        best_params.copy_from_slice(&params);
    }
    if let Some(dir) = &cfg.out_dir {
        write_artifacts(dir, cfg, &model, &params, &best_params, &history)?;
    }
    Ok(TrainResult {
        model,
        params,
        best_params,
        best_epoch,
        best_rmae,
        history,
        final_loss,
    })
}

fn write_artifacts(
    dir: &Path,
    cfg: &TrainConfig,
    model: &Model,
    params: &[f64],
    best_params: &[f64],
    history: &TrainHistory,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let hist_path = dir.join("history.csv");
    std::fs::write(&hist_path, history.csv()).map_err(|e| Error::io(&hist_path, e))?;
    crate::model::save_checkpoint(&dir.join("model.ckpt"), model, params)?;
    crate::model::save_checkpoint(&dir.join("model.best.ckpt"), model, best_params)?;
    let meta_path = dir.join("run.meta");
    let mut meta = String::new();
    let _ = writeln!(meta, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(meta, "problem = {}", cfg.problem.name());
    let _ = writeln!(meta, "grid = {}x{}", cfg.grid_m, cfg.grid_n);
    let _ = writeln!(meta, "arch = {}", cfg.model.arch.name());
    let _ = writeln!(meta, "k = {}", cfg.k);
    let _ = writeln!(meta, "dt = {}", cfg.resolved_dt());
    let _ = writeln!(meta, "epochs = {}", cfg.epochs);
    let _ = writeln!(meta, "seed = {}", cfg.seed);
    std::fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))?;
    Ok(())
}
