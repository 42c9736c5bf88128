//! The forward pass, written once over any jet type.
//!
//! Every intermediate needed by the hand-derived backward pass is stashed in
//! a trace (buffers are reused across calls). The same functions drive
//! value-only prediction (`J = f64`), the fast training path
//! (`J = Jet1<f64>` / `Jet2<f64>`), and tape verification (`J = Jet_<Var>`).

use super::{Activation, Model, SsmKind};
use crate::autodiff::{Jet, Scalar};
use crate::ssm::zoh_step_traced;

/// Affine map `out = W input + b` with the fixed accumulation order
/// (bias first, then ascending column) every path shares.
fn affine<J: Jet>(
    params: &[J::Inner],
    w: usize,
    b: usize,
    rows: usize,
    cols: usize,
    input: &[J],
    out: &mut Vec<J>,
) {
    debug_assert_eq!(input.len(), cols);
    out.clear();
    for r in 0..rows {
        let mut acc = J::lift(params[b + r]);
        for c in 0..cols {
            acc = acc + J::lift(params[w + r * cols + c]) * input[c];
        }
        out.push(acc);
    }
}

fn ensure<J: Jet>(buf: &mut Vec<J>, len: usize) {
    buf.clear();
    buf.resize(len, J::lit(0.0));
}

/// Applies the configured activation elementwise, stashing the wavelet's
/// sine/cosine terms for the backward pass.
#[allow(clippy::too_many_arguments)]
fn activate<J: Jet>(
    act: Activation,
    w1: J::Inner,
    w2: J::Inner,
    pre: &[J],
    sin_buf: &mut Vec<J>,
    cos_buf: &mut Vec<J>,
    out: &mut Vec<J>,
) {
    out.clear();
    match act {
        Activation::Wavelet => {
            sin_buf.clear();
            cos_buf.clear();
            for &z in pre {
                let s = z.sin();
                let c = z.cos();
                sin_buf.push(s);
                cos_buf.push(c);
                out.push(J::lift(w1) * s + J::lift(w2) * c);
            }
        }
        Activation::Tanh => {
            for &z in pre {
                out.push(z.tanh());
            }
        }
        Activation::Relu => {
            for &z in pre {
                out.push(z.relu());
            }
        }
    }
}

/// Stash of one spatio-temporal embedding evaluation.
#[derive(Clone, Default)]
pub struct EmbedTrace<J> {
    pub coords: Vec<J>,
    pub pre1: Vec<J>,
    pub act_sin: Vec<J>,
    pub act_cos: Vec<J>,
    pub act: Vec<J>,
    pub out: Vec<J>,
}

impl<J> EmbedTrace<J> {
    pub fn new() -> Self {
        EmbedTrace {
            coords: Vec::new(),
            pre1: Vec::new(),
            act_sin: Vec::new(),
            act_cos: Vec::new(),
            act: Vec::new(),
            out: Vec::new(),
        }
    }
}

/// Spatio-temporal embedding of one token: seed jets on (x, t), two affine
/// layers with the activation between them.
pub fn embed_token_traced<J: Jet>(
    model: &Model,
    params: &[J::Inner],
    x: f64,
    t: f64,
    trace: &mut EmbedTrace<J>,
) {
    let off = &model.off;
    let (h, de) = (model.config.hidden, model.config.embed_dim);
    let (jx, jt) = J::seed_xt(x, t);
    trace.coords.clear();
    trace.coords.extend_from_slice(&[jx, jt]);
    affine(params, off.embed_w1, off.embed_b1, h, 2, &trace.coords, &mut trace.pre1);
    activate(
        model.config.activation,
        params[off.embed_omega],
        params[off.embed_omega + 1],
        &trace.pre1,
        &mut trace.act_sin,
        &mut trace.act_cos,
        &mut trace.act,
    );
    affine(params, off.embed_w2, off.embed_b2, de, h, &trace.act, &mut trace.out);
}

pub fn embed_token<J: Jet>(model: &Model, params: &[J::Inner], x: f64, t: f64) -> Vec<J> {
    let mut trace = EmbedTrace::new();
    embed_token_traced(model, params, x, t, &mut trace);
    trace.out
}

/// Stash of one encoder block over a `k`-token sequence. Flat buffers are
/// token-major (`tok * width + channel`); scan buffers add the state index
/// innermost.
#[derive(Clone)]
pub struct BlockTrace<J: Jet> {
    pub input: Vec<J>,
    pub a_in: Vec<J>,
    pub conv: Vec<J>,
    pub s_sin: Vec<J>,
    pub s_cos: Vec<J>,
    pub s_in: Vec<J>,
    pub dt_raw: Vec<J>,
    pub dt: Vec<J>,
    pub bvec: Vec<J>,
    pub cvec: Vec<J>,
    pub z: Vec<J>,
    pub e1: Vec<J>,
    pub b_disc: Vec<J>,
    pub h: Vec<J>,
    pub lti_dt: Vec<J::Inner>,
    pub lti_z: Vec<J::Inner>,
    pub lti_e1: Vec<J::Inner>,
    pub lti_ab: Vec<J::Inner>,
    pub lti_bb: Vec<J::Inner>,
    pub x1: Vec<J>,
    pub gate_pre: Vec<J>,
    pub g_sin: Vec<J>,
    pub g_cos: Vec<J>,
    pub x2: Vec<J>,
    pub prod: Vec<J>,
    pub out_lin: Vec<J>,
    pub output: Vec<J>,
}

impl<J: Jet> Default for BlockTrace<J> {
    fn default() -> Self {
        BlockTrace {
            input: Vec::new(),
            a_in: Vec::new(),
            conv: Vec::new(),
            s_sin: Vec::new(),
            s_cos: Vec::new(),
            s_in: Vec::new(),
            dt_raw: Vec::new(),
            dt: Vec::new(),
            bvec: Vec::new(),
            cvec: Vec::new(),
            z: Vec::new(),
            e1: Vec::new(),
            b_disc: Vec::new(),
            h: Vec::new(),
            lti_dt: Vec::new(),
            lti_z: Vec::new(),
            lti_e1: Vec::new(),
            lti_ab: Vec::new(),
            lti_bb: Vec::new(),
            x1: Vec::new(),
            gate_pre: Vec::new(),
            g_sin: Vec::new(),
            g_cos: Vec::new(),
            x2: Vec::new(),
            prod: Vec::new(),
            out_lin: Vec::new(),
            output: Vec::new(),
        }
    }
}

impl<J: Jet> BlockTrace<J> {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Full encoder stash for one sequence.
#[derive(Clone)]
pub struct EncoderTrace<J: Jet> {
    pub blocks: Vec<BlockTrace<J>>,
    pub preds: Vec<J>,
    scratch: Vec<J>,
}

impl<J: Jet> Default for EncoderTrace<J> {
    fn default() -> Self {
        EncoderTrace {
            blocks: Vec::new(),
            preds: Vec::new(),
            scratch: Vec::new(),
        }
    }
}

impl<J: Jet> EncoderTrace<J> {
    pub fn new() -> Self {
        Self::default()
    }
}

fn run_block<J: Jet>(
    model: &Model,
    params: &[J::Inner],
    block: usize,
    k: usize,
    bt: &mut BlockTrace<J>,
) {
    let cfg = &model.config;
    let bo = &model.off.blocks[block];
    let (de, di, n) = (cfg.embed_dim, cfg.inner(), cfg.state);
    debug_assert_eq!(bt.input.len(), k * de);

    // branch 1: projection, causal depthwise conv, activation
    ensure(&mut bt.a_in, k * di);
    {
        let mut row = Vec::with_capacity(di);
        for tok in 0..k {
            affine(params, bo.wa_w, bo.wa_b, di, de, &bt.input[tok * de..(tok + 1) * de], &mut row);
            bt.a_in[tok * di..(tok + 1) * di].copy_from_slice(&row);
        }
    }
    ensure(&mut bt.conv, k * di);
    for tok in 0..k {
        for ch in 0..di {
            let mut acc = J::lift(params[bo.conv_b + ch]);
            for m in 0..3usize {
                let src = tok as isize - 2 + m as isize;
                if src >= 0 {
                    acc = acc
                        + J::lift(params[bo.conv_w + ch * 3 + m]) * bt.a_in[src as usize * di + ch];
                }
            }
            bt.conv[tok * di + ch] = acc;
        }
    }
    let (w1, w2) = (params[bo.omega], params[bo.omega + 1]);
    {
        // activate over the whole token-major buffer at once
        let conv = std::mem::take(&mut bt.conv);
        activate(cfg.activation, w1, w2, &conv, &mut bt.s_sin, &mut bt.s_cos, &mut bt.s_in);
        bt.conv = conv;
    }

    // state-space layer (or its ablation stand-ins)
    ensure(&mut bt.x1, k * di);
    match cfg.ssm {
        SsmKind::Selective => {
            let a_diag: Vec<J::Inner> = (0..n).map(|i| -params[bo.alog + i].exp()).collect();
            ensure(&mut bt.dt_raw, k * di);
            ensure(&mut bt.dt, k * di);
            ensure(&mut bt.bvec, k * n);
            ensure(&mut bt.cvec, k * n);
            {
                let mut row = Vec::with_capacity(di);
                for tok in 0..k {
                    let e = &bt.s_in[tok * di..(tok + 1) * di];
                    affine(params, bo.wdelta_w, bo.wdelta_b, di, di, e, &mut row);
                    bt.dt_raw[tok * di..(tok + 1) * di].copy_from_slice(&row);
                    for ch in 0..di {
                        bt.dt[tok * di + ch] = bt.dt_raw[tok * di + ch].softplus();
                    }
                    for (buf, w) in [(&mut bt.bvec, bo.wb), (&mut bt.cvec, bo.wc)] {
                        for i in 0..n {
                            let mut acc = J::lit(0.0);
                            for c in 0..di {
                                acc = acc + J::lift(params[w + i * di + c]) * e[c];
                            }
                            buf[tok * n + i] = acc;
                        }
                    }
                }
            }
            ensure(&mut bt.z, k * di * n);
            ensure(&mut bt.e1, k * di * n);
            ensure(&mut bt.b_disc, k * di * n);
            ensure(&mut bt.h, k * di * n);
            for ch in 0..di {
                let mut h_prev = vec![J::lit(0.0); n];
                for tok in 0..k {
                    let x = bt.s_in[tok * di + ch];
                    let dt = bt.dt[tok * di + ch];
                    let mut u = J::lit(0.0);
                    for i in 0..n {
                        let tr = zoh_step_traced(J::lift(a_diag[i]), bt.bvec[tok * n + i], dt);
                        let idx = (tok * di + ch) * n + i;
                        bt.z[idx] = tr.z;
                        bt.e1[idx] = tr.e1;
                        bt.b_disc[idx] = tr.b_bar;
                        let h = tr.a_bar * h_prev[i] + tr.b_bar * x;
                        bt.h[idx] = h;
                        h_prev[i] = h;
                        u = u + bt.cvec[tok * n + i] * h;
                    }
                    bt.x1[tok * di + ch] = u;
                }
            }
        }
        SsmKind::Lti => {
            let a_diag: Vec<J::Inner> = (0..n).map(|i| -params[bo.alog + i].exp()).collect();
            ensure_inner::<J>(&mut bt.lti_dt, di);
            ensure_inner::<J>(&mut bt.lti_z, di * n);
            ensure_inner::<J>(&mut bt.lti_e1, di * n);
            ensure_inner::<J>(&mut bt.lti_ab, di * n);
            ensure_inner::<J>(&mut bt.lti_bb, di * n);
            for ch in 0..di {
                bt.lti_dt[ch] = params[bo.dtraw + ch].softplus();
                for i in 0..n {
                    let tr = zoh_step_traced(a_diag[i], params[bo.bconst + i], bt.lti_dt[ch]);
                    bt.lti_z[ch * n + i] = tr.z;
                    bt.lti_e1[ch * n + i] = tr.e1;
                    bt.lti_ab[ch * n + i] = tr.a_bar;
                    bt.lti_bb[ch * n + i] = tr.b_bar;
                }
            }
            ensure(&mut bt.h, k * di * n);
            for ch in 0..di {
                let mut h_prev = vec![J::lit(0.0); n];
                for tok in 0..k {
                    let x = bt.s_in[tok * di + ch];
                    let mut u = J::lit(0.0);
                    for i in 0..n {
                        let h = J::lift(bt.lti_ab[ch * n + i]) * h_prev[i]
                            + J::lift(bt.lti_bb[ch * n + i]) * x;
                        bt.h[(tok * di + ch) * n + i] = h;
                        h_prev[i] = h;
                        u = u + J::lift(params[bo.cconst + i]) * h;
                    }
                    bt.x1[tok * di + ch] = u;
                }
            }
        }
        SsmKind::None => {
            let mut row = Vec::with_capacity(di);
            for tok in 0..k {
                affine(
                    params,
                    bo.mix_w,
                    bo.mix_b,
                    di,
                    di,
                    &bt.s_in[tok * di..(tok + 1) * di],
                    &mut row,
                );
                bt.x1[tok * di..(tok + 1) * di].copy_from_slice(&row);
            }
        }
    }

    // branch 2 (gate), elementwise product, output projection, residual
    ensure(&mut bt.gate_pre, k * di);
    {
        let mut row = Vec::with_capacity(di);
        for tok in 0..k {
            affine(params, bo.gate_w, bo.gate_b, di, de, &bt.input[tok * de..(tok + 1) * de], &mut row);
            bt.gate_pre[tok * di..(tok + 1) * di].copy_from_slice(&row);
        }
    }
    {
        let pre = std::mem::take(&mut bt.gate_pre);
        activate(cfg.activation, w1, w2, &pre, &mut bt.g_sin, &mut bt.g_cos, &mut bt.x2);
        bt.gate_pre = pre;
    }
    ensure(&mut bt.prod, k * di);
    for i in 0..k * di {
        bt.prod[i] = bt.x1[i] * bt.x2[i];
    }
    ensure(&mut bt.out_lin, k * de);
    {
        let mut row = Vec::with_capacity(de);
        for tok in 0..k {
            affine(params, bo.out_w, bo.out_b, de, di, &bt.prod[tok * di..(tok + 1) * di], &mut row);
            bt.out_lin[tok * de..(tok + 1) * de].copy_from_slice(&row);
        }
    }
    ensure(&mut bt.output, k * de);
    for i in 0..k * de {
        bt.output[i] = bt.input[i] + bt.out_lin[i];
    }
}

fn ensure_inner<J: Jet>(buf: &mut Vec<J::Inner>, len: usize) {
    buf.clear();
    buf.resize(len, <J::Inner as Scalar>::lit(0.0));
}

/// One encoder block applied to a `k`-token sequence of embeddings.
pub fn block_forward<J: Jet>(
    model: &Model,
    params: &[J::Inner],
    block: usize,
    input: &[J],
    k: usize,
) -> Vec<J> {
    let mut bt = BlockTrace::new();
    bt.input = input.to_vec();
    run_block(model, params, block, k, &mut bt);
    bt.output.clone()
}

/// Full encoder over pre-computed token embeddings: blocks then the affine
/// head; returns one prediction per token (also left in `trace.preds`).
pub fn encoder_forward_traced<J: Jet>(
    model: &Model,
    params: &[J::Inner],
    embeds: &[J],
    k: usize,
    trace: &mut EncoderTrace<J>,
) {
    let cfg = &model.config;
    let de = cfg.embed_dim;
    debug_assert_eq!(embeds.len(), k * de);
    trace.blocks.resize_with(cfg.blocks, BlockTrace::new);
    let mut current: &[J] = embeds;
    for b in 0..cfg.blocks {
        let bt = &mut trace.blocks[b];
        bt.input.clear();
        bt.input.extend_from_slice(current);
        run_block(model, params, b, k, bt);
        // reborrow the output as next input
        let out_ptr = &trace.blocks[b].output;
        trace.scratch.clear();
        trace.scratch.extend_from_slice(out_ptr);
        current = &trace.scratch;
    }
    trace.preds.clear();
    let mut head = Vec::with_capacity(1);
    for tok in 0..k {
        affine(
            params,
            model.off.head_w,
            model.off.head_b,
            1,
            de,
            &current[tok * de..(tok + 1) * de],
            &mut head,
        );
        trace.preds.push(head[0]);
    }
}

pub fn encoder_forward<J: Jet>(model: &Model, params: &[J::Inner], embeds: &[J], k: usize) -> Vec<J> {
    let mut trace = EncoderTrace::new();
    encoder_forward_traced(model, params, embeds, k, &mut trace);
    trace.preds
}

/// Stash of one MLP baseline evaluation.
#[derive(Clone)]
pub struct MlpTrace<J> {
    pub coords: Vec<J>,
    pub pre: Vec<Vec<J>>,
    pub act: Vec<Vec<J>>,
    pub out: J,
}

impl<J: Jet> MlpTrace<J> {
    pub fn new() -> Self {
        MlpTrace {
            coords: Vec::new(),
            pre: Vec::new(),
            act: Vec::new(),
            out: J::lit(0.0),
        }
    }
}

/// Depth x width fully connected baseline with tanh, evaluated on one
/// collocation point.
pub fn mlp_forward_traced<J: Jet>(
    model: &Model,
    params: &[J::Inner],
    x: f64,
    t: f64,
    trace: &mut MlpTrace<J>,
) {
    let layers = &model.off.mlp;
    trace.pre.resize_with(layers.len(), Vec::new);
    trace.act.resize_with(layers.len() - 1, Vec::new);
    let (jx, jt) = J::seed_xt(x, t);
    trace.coords.clear();
    trace.coords.extend_from_slice(&[jx, jt]);
    let mut input: Vec<J> = trace.coords.clone();
    for (l, &(w, b, rows, cols)) in layers.iter().enumerate() {
        let pre = &mut trace.pre[l];
        affine(params, w, b, rows, cols, &input, pre);
        if l + 1 < layers.len() {
            let act = &mut trace.act[l];
            act.clear();
            act.extend(pre.iter().map(|z| z.tanh()));
            input.clear();
            input.extend_from_slice(act);
        } else {
            trace.out = pre[0];
        }
    }
}

pub fn mlp_forward<J: Jet>(model: &Model, params: &[J::Inner], x: f64, t: f64) -> J {
    let mut trace = MlpTrace::new();
    mlp_forward_traced(model, params, x, t, &mut trace);
    trace.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Jet1, Jet2};
    use crate::model::{Arch, ModelConfig};

    fn tiny_model(ssm: SsmKind, activation: Activation) -> (Model, Vec<f64>) {
        let model = Model::new(ModelConfig {
            embed_dim: 4,
            hidden: 6,
            state: 3,
            blocks: 2,
            activation,
            ssm,
            ..ModelConfig::default()
        });
        let params = model.init_params(7);
        (model, params)
    }

    fn embeds_for(model: &Model, params: &[f64], tokens: &[(f64, f64)]) -> Vec<Jet2<f64>> {
        let mut out = Vec::new();
        for &(x, t) in tokens {
            out.extend(embed_token::<Jet2<f64>>(model, params, x, t));
        }
        out
    }

    #[test]
    fn embedding_zero_params_gives_zero() {
        let (model, _) = tiny_model(SsmKind::Selective, Activation::Wavelet);
        let zeros = vec![0.0; model.n_params()];
        // with all-zero weights the wavelet collapses to w2*cos(0)=0 since
        // omega is also zeroed, and the second affine produces zeros
        let e = embed_token::<Jet2<f64>>(&model, &zeros, 0.7, 0.3);
        for j in e {
            assert_eq!(j.v, 0.0);
            assert_eq!(j.gx, 0.0);
            assert_eq!(j.htt, 0.0);
        }
    }

    #[test]
    fn embedding_shape_and_derivative_flow() {
        let (model, params) = tiny_model(SsmKind::Selective, Activation::Wavelet);
        let e = embed_token::<Jet2<f64>>(&model, &params, 0.9, 0.1);
        assert_eq!(e.len(), model.config.embed_dim);
        // finite-difference the value of channel 0 in x
        let h = 1e-5;
        let up = embed_token::<f64>(&model, &params, 0.9 + h, 0.1)[0];
        let dn = embed_token::<f64>(&model, &params, 0.9 - h, 0.1)[0];
        let fd = (up - dn) / (2.0 * h);
        assert!((e[0].gx - fd).abs() / fd.abs().max(1.0) < 1e-6);
    }

    #[test]
    fn block_residual_identity_when_output_projection_zeroed() {
        for ssm in [SsmKind::Selective, SsmKind::Lti, SsmKind::None] {
            let (model, mut params) = tiny_model(ssm, Activation::Wavelet);
            let spec = model.layout.find("block0.out.w").unwrap();
            params[spec.offset..spec.offset + spec.len()].fill(0.0);
            let spec = model.layout.find("block0.out.b").unwrap();
            params[spec.offset..spec.offset + spec.len()].fill(0.0);
            let tokens = [(0.1, 0.0), (0.1, 0.1), (0.1, 0.2)];
            let embeds = embeds_for(&model, &params, &tokens);
            let out = block_forward(&model, &params, 0, &embeds, 3);
            for (a, b) in embeds.iter().zip(&out) {
                assert_eq!(a.v.to_bits(), b.v.to_bits());
                assert_eq!(a.hxt.to_bits(), b.hxt.to_bits());
            }
        }
    }

    #[test]
    fn block_on_single_token_uses_current_tap_only() {
        let (model, params) = tiny_model(SsmKind::Selective, Activation::Wavelet);
        let embeds = embeds_for(&model, &params, &[(0.4, 0.2)]);
        let out = block_forward(&model, &params, 0, &embeds, 1);
        assert_eq!(out.len(), model.config.embed_dim);
        for j in out {
            assert!(j.v.is_finite());
        }
    }

    #[test]
    fn encoder_is_causal() {
        for ssm in [SsmKind::Selective, SsmKind::Lti] {
            let (model, params) = tiny_model(ssm, Activation::Wavelet);
            let k = 5;
            let tokens: Vec<(f64, f64)> = (0..k).map(|j| (0.3, 0.05 * j as f64)).collect();
            let base = encoder_forward::<Jet1<f64>>(
                &model,
                &params,
                &{
                    let mut e = Vec::new();
                    for &(x, t) in &tokens {
                        e.extend(embed_token::<Jet1<f64>>(&model, &params, x, t));
                    }
                    e
                },
                k,
            );
            // perturb token 3's coordinates; outputs 0..3 must be unchanged
            let mut perturbed = tokens.clone();
            perturbed[3].1 += 0.013;
            let mut e2 = Vec::new();
            for &(x, t) in &perturbed {
                e2.extend(embed_token::<Jet1<f64>>(&model, &params, x, t));
            }
            let out = encoder_forward::<Jet1<f64>>(&model, &params, &e2, k);
            for j in 0..3 {
                assert_eq!(base[j].v.to_bits(), out[j].v.to_bits(), "ssm {ssm:?} tok {j}");
            }
            assert_ne!(base[3].v.to_bits(), out[3].v.to_bits());
        }
    }

    #[test]
    fn encoder_output_length_and_determinism() {
        let (model, params) = tiny_model(SsmKind::Selective, Activation::Wavelet);
        let k = 7;
        let tokens: Vec<(f64, f64)> = (0..k).map(|j| (1.0, 0.01 * j as f64)).collect();
        let embeds = embeds_for(&model, &params, &tokens);
        let p1 = encoder_forward::<Jet2<f64>>(&model, &params, &embeds, k);
        let p2 = encoder_forward::<Jet2<f64>>(&model, &params, &embeds, k);
        assert_eq!(p1.len(), k);
        for (a, b) in p1.iter().zip(&p2) {
            assert_eq!(a.v.to_bits(), b.v.to_bits());
            assert_eq!(a.gt.to_bits(), b.gt.to_bits());
        }
    }

    #[test]
    fn encoder_shape_stable_across_blocks() {
        let (model, params) = tiny_model(SsmKind::Selective, Activation::Wavelet);
        let k = 3;
        let tokens: Vec<(f64, f64)> = (0..k).map(|j| (0.2, 0.1 * j as f64)).collect();
        let mut embeds = embeds_for(&model, &params, &tokens);
        for b in 0..model.config.blocks {
            embeds = block_forward(&model, &params, b, &embeds, k);
            assert_eq!(embeds.len(), k * model.config.embed_dim);
        }
    }

    #[test]
    fn mlp_zero_final_layer_outputs_zero() {
        let model = Model::new(ModelConfig {
            arch: Arch::Mlp,
            hidden: 8,
            depth: 3,
            ..ModelConfig::default()
        });
        let mut params = model.init_params(3);
        let (w, b, _, _) = *model.off.mlp.last().unwrap();
        let last = model.layout.tensors.last().unwrap();
        params[w..last.offset + last.len()].fill(0.0);
        let _ = b;
        let u = mlp_forward::<Jet2<f64>>(&model, &params, 0.5, 0.5);
        assert_eq!(u.v, 0.0);
        assert_eq!(u.gx, 0.0);
        assert_eq!(u.hxx, 0.0);
    }

    #[test]
    fn value_only_forward_matches_jet_values_bitwise() {
        let (model, params) = tiny_model(SsmKind::Selective, Activation::Wavelet);
        let k = 4;
        let tokens: Vec<(f64, f64)> = (0..k).map(|j| (0.7, 0.02 * j as f64)).collect();
        let jets = {
            let embeds = embeds_for(&model, &params, &tokens);
            encoder_forward::<Jet2<f64>>(&model, &params, &embeds, k)
        };
        let values = {
            let mut e = Vec::new();
            for &(x, t) in &tokens {
                e.extend(embed_token::<f64>(&model, &params, x, t));
            }
            encoder_forward::<f64>(&model, &params, &e, k)
        };
        for (jet, v) in jets.iter().zip(&values) {
            assert_eq!(jet.v.to_bits(), v.to_bits());
        }
    }
}
