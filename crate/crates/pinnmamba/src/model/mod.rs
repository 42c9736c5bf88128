//! The sub-sequence encoder (spatio-temporal embedding, gated
//! selective-state-space blocks with Wavelet activation, affine head) and a
//! plain MLP baseline.
//!
//! Parameters live in one flat `Vec<f64>` described by a [`ParamLayout`];
//! the forward pass is generic over the jet type, so the same code serves
//! value-only prediction, derivative extraction, and tape recording.

mod checkpoint;
mod fast;
mod forward;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use fast::{
    embed_backward, encoder_backward, mlp_backward, EmbedAdjoints, JetAdj,
};
pub use forward::{
    block_forward, embed_token, embed_token_traced, encoder_forward, encoder_forward_traced,
    mlp_forward, mlp_forward_traced, BlockTrace, EmbedTrace, EncoderTrace, MlpTrace,
};

use crate::autodiff::Scalar;
use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Wavelet,
    Tanh,
    Relu,
}

impl Activation {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "wavelet" => Ok(Activation::Wavelet),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Wavelet => "wavelet",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }
}

/// Which state-space layer the encoder blocks use: the input-dependent
/// selective form, a time-invariant form, or none at all (a per-token
/// affine map, for ablation).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsmKind {
    Selective,
    Lti,
    None,
}

impl SsmKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "selective" => Ok(SsmKind::Selective),
            "lti" => Ok(SsmKind::Lti),
            "none" => Ok(SsmKind::None),
            other => Err(Error::Config(format!("unknown ssm kind '{other}'"))),
        }
    }
    pub fn name(&self) -> &'static str {
        match self {
            SsmKind::Selective => "selective",
            SsmKind::Lti => "lti",
            SsmKind::None => "none",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arch {
    PinnMamba,
    Mlp,
}

impl Arch {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pinnmamba" => Ok(Arch::PinnMamba),
            "mlp" => Ok(Arch::Mlp),
            other => Err(Error::Config(format!("unknown arch '{other}'"))),
        }
    }
    pub fn name(&self) -> &'static str {
        match self {
            Arch::PinnMamba => "pinnmamba",
            Arch::Mlp => "mlp",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub arch: Arch,
    /// Encoder embedding width.
    pub embed_dim: usize,
    /// Embedding-MLP hidden width (also the MLP baseline width).
    pub hidden: usize,
    /// Block inner width as a multiple of `embed_dim`.
    pub inner_mult: usize,
    /// State size of each per-channel state-space system.
    pub state: usize,
    /// Number of encoder blocks.
    pub blocks: usize,
    /// Hidden layers of the MLP baseline.
    pub depth: usize,
    pub activation: Activation,
    pub ssm: SsmKind,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            arch: Arch::PinnMamba,
            embed_dim: 32,
            hidden: 512,
            inner_mult: 2,
            state: 8,
            blocks: 1,
            depth: 4,
            activation: Activation::Wavelet,
            ssm: SsmKind::Selective,
        }
    }
}

impl ModelConfig {
    pub fn inner(&self) -> usize {
        self.embed_dim * self.inner_mult
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
            ("inner_mult", self.inner_mult),
            ("state", self.state),
            ("blocks", self.blocks),
            ("depth", self.depth),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("model.{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// One named tensor inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamLayout {
    pub tensors: Vec<TensorSpec>,
    pub total: usize,
}

impl ParamLayout {
    fn push(&mut self, name: String, shape: Vec<usize>) -> usize {
        let offset = self.total;
        self.total += shape.iter().product::<usize>();
        self.tensors.push(TensorSpec {
            name,
            offset,
            shape,
        });
        offset
    }

    pub fn find(&self, name: &str) -> Option<&TensorSpec> {
        self.tensors.iter().find(|t| t.name == name)
    }
}

/// Per-block parameter offsets (state-space fields apply per [`SsmKind`]).
#[derive(Clone, Debug, Default)]
pub struct BlockOffsets {
    pub wa_w: usize,
    pub wa_b: usize,
    pub conv_w: usize,
    pub conv_b: usize,
    pub omega: usize,
    pub wdelta_w: usize,
    pub wdelta_b: usize,
    pub wb: usize,
    pub wc: usize,
    pub alog: usize,
    pub dtraw: usize,
    pub bconst: usize,
    pub cconst: usize,
    pub mix_w: usize,
    pub mix_b: usize,
    pub gate_w: usize,
    pub gate_b: usize,
    pub out_w: usize,
    pub out_b: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Offsets {
    pub embed_w1: usize,
    pub embed_b1: usize,
    pub embed_omega: usize,
    pub embed_w2: usize,
    pub embed_b2: usize,
    pub blocks: Vec<BlockOffsets>,
    pub head_w: usize,
    pub head_b: usize,
    /// MLP baseline: (w, b, rows, cols) per affine layer.
    pub mlp: Vec<(usize, usize, usize, usize)>,
}

/// A network architecture bound to a parameter layout. Parameter values
/// travel separately as a flat slice.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub layout: ParamLayout,
    pub off: Offsets,
}

impl Model {
    pub fn new(config: ModelConfig) -> Self {
        config.validate().expect("invalid model config");
        let mut layout = ParamLayout::default();
        let mut off = Offsets::default();
        match config.arch {
            Arch::PinnMamba => {
                let (de, h, di, n) = (config.embed_dim, config.hidden, config.inner(), config.state);
                off.embed_w1 = layout.push("embed.w1".into(), vec![h, 2]);
                off.embed_b1 = layout.push("embed.b1".into(), vec![h]);
                off.embed_omega = layout.push("embed.omega".into(), vec![2]);
                off.embed_w2 = layout.push("embed.w2".into(), vec![de, h]);
                off.embed_b2 = layout.push("embed.b2".into(), vec![de]);
                for b in 0..config.blocks {
                    let mut bo = BlockOffsets::default();
                    let p = |field: &str| format!("block{b}.{field}");
                    bo.wa_w = layout.push(p("wa.w"), vec![di, de]);
                    bo.wa_b = layout.push(p("wa.b"), vec![di]);
                    bo.conv_w = layout.push(p("conv.w"), vec![di, 3]);
                    bo.conv_b = layout.push(p("conv.b"), vec![di]);
                    bo.omega = layout.push(p("omega"), vec![2]);
                    match config.ssm {
                        SsmKind::Selective => {
                            bo.wdelta_w = layout.push(p("ssm.wdelta.w"), vec![di, di]);
                            bo.wdelta_b = layout.push(p("ssm.wdelta.b"), vec![di]);
                            bo.wb = layout.push(p("ssm.wb"), vec![n, di]);
                            bo.wc = layout.push(p("ssm.wc"), vec![n, di]);
                            bo.alog = layout.push(p("ssm.alog"), vec![n]);
                        }
                        SsmKind::Lti => {
                            bo.dtraw = layout.push(p("ssm.dtraw"), vec![di]);
                            bo.bconst = layout.push(p("ssm.b"), vec![n]);
                            bo.cconst = layout.push(p("ssm.c"), vec![n]);
                            bo.alog = layout.push(p("ssm.alog"), vec![n]);
                        }
                        SsmKind::None => {
                            bo.mix_w = layout.push(p("mix.w"), vec![di, di]);
                            bo.mix_b = layout.push(p("mix.b"), vec![di]);
                        }
                    }
                    bo.gate_w = layout.push(p("gate.w"), vec![di, de]);
                    bo.gate_b = layout.push(p("gate.b"), vec![di]);
                    bo.out_w = layout.push(p("out.w"), vec![de, di]);
                    bo.out_b = layout.push(p("out.b"), vec![de]);
                    off.blocks.push(bo);
                }
                off.head_w = layout.push("head.w".into(), vec![1, de]);
                off.head_b = layout.push("head.b".into(), vec![1]);
            }
            Arch::Mlp => {
                let h = config.hidden;
                let mut widths = vec![(h, 2)];
                for _ in 1..config.depth {
                    widths.push((h, h));
                }
                widths.push((1, h));
                for (l, (rows, cols)) in widths.into_iter().enumerate() {
                    let w = layout.push(format!("layer{l}.w"), vec![rows, cols]);
                    let bb = layout.push(format!("layer{l}.b"), vec![rows]);
                    off.mlp.push((w, bb, rows, cols));
                }
            }
        }
        Model {
            config,
            layout,
            off,
        }
    }

    pub fn n_params(&self) -> usize {
        self.layout.total
    }

    /// Deterministic initialization: affine weights and biases uniform in
    /// `[-1/sqrt(fan_in), +1/sqrt(fan_in)]` sampled in layout order from a
    /// seeded stream; wavelet coefficients start at 1, the state diagonal
    /// at the HiPPO values `-(i+1)` through `a = -exp(alog)`, and the
    /// time-invariant step parameter at softplus^-1-neutral zero.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0f64; self.layout.total];
        for spec in &self.layout.tensors {
            let slot = &mut params[spec.offset..spec.offset + spec.len()];
            let base = spec.name.split('.').skip(1).collect::<Vec<_>>().join(".");
            let field = if spec.name.starts_with("block") {
                base.as_str()
            } else {
                spec.name.as_str()
            };
            match field {
                "embed.omega" | "omega" => slot.fill(1.0),
                "ssm.alog" => {
                    for (i, v) in slot.iter_mut().enumerate() {
                        *v = ((i + 1) as f64).ln();
                    }
                }
                "ssm.dtraw" => slot.fill(0.0),
                _ => {
                    let fan_in = if spec.shape.len() == 2 {
                        spec.shape[1]
                    } else {
                        // bias bound follows its layer's fan-in; standalone
                        // vectors use their own length
                        self.bias_fan_in(&spec.name).unwrap_or(spec.len())
                    };
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    for v in slot.iter_mut() {
                        *v = rng.gen_range(-bound..bound);
                    }
                }
            }
        }
        params
    }

    fn bias_fan_in(&self, bias_name: &str) -> Option<usize> {
        let weight_name = bias_name
            .strip_suffix(".b")
            .map(|stem| format!("{stem}.w"))
            .or_else(|| bias_name.strip_suffix("b1").map(|s| format!("{s}w1")))
            .or_else(|| bias_name.strip_suffix("b2").map(|s| format!("{s}w2")))?;
        self.layout
            .find(&weight_name)
            .filter(|t| t.shape.len() == 2)
            .map(|t| t.shape[1])
    }

    /// State diagonal entries `a_i = -exp(alog_i)` for one block.
    pub fn state_diag(&self, params: &[f64], block: usize) -> Vec<f64> {
        let bo = &self.off.blocks[block];
        (0..self.config.state)
            .map(|i| -params[bo.alog + i].exp())
            .collect()
    }
}

/// Wavelet activation `w1 sin(z) + w2 cos(z)`.
pub fn wavelet_act<S: Scalar>(z: S, w1: S, w2: S) -> S {
    w1 * z.sin() + w2 * z.cos()
}
