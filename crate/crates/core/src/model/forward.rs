use alloc::vec::Vec;

use rand::Rng as _;

use super::{Head, Layer, Linear, ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{rng_from, stream};
use crate::tape::{Axis, Gradients, ReduceKind, Tape, Var};

/// The model's parameters recorded as tape leaves.
#[derive(Clone, Debug)]
pub struct Bound {
    pub vars: Vec<Var>,
}

impl Bound {
    pub fn new(tape: &mut Tape, params: &ModelParams) -> Self {
        Self {
            vars: params.params.iter().map(|p| tape.leaf(p.value.clone())).collect(),
        }
    }

    /// Gradient for every parameter, zeros where the output did not depend on it.
    pub fn gradients(&self, grads: &Gradients, params: &ModelParams) -> Vec<Matrix> {
        self.vars
            .iter()
            .zip(&params.params)
            .map(|(&v, p)| grads.wrt_or_zeros(v, p.value.shape()))
            .collect()
    }

    fn at(&self, k: usize) -> Var {
        self.vars[k]
    }
}

/// Whether the cross-attention path runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Dual,
    Fusion,
}

/// Training-time dropout; masks are a pure function of `seed` and the site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dropout {
    pub seed: u64,
    pub rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncoderSide {
    Image,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projector {
    GlobalImage,
    GlobalText,
    LocalImage,
    LocalText,
}

impl Projector {
    pub const ALL: [Projector; 4] = [
        Projector::GlobalImage,
        Projector::GlobalText,
        Projector::LocalImage,
        Projector::LocalText,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Projector::GlobalImage => "proj.global.img",
            Projector::GlobalText => "proj.global.txt",
            Projector::LocalImage => "proj.local.img",
            Projector::LocalText => "proj.local.txt",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// One image-caption pair.
#[derive(Clone, Copy, Debug)]
pub struct Input<'a> {
    pub patches: &'a Matrix,
    pub tokens: &'a [usize],
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    /// Last-layer patch features per sample, `n_patches × d_model`.
    pub local_image: Vec<Var>,
    /// Last-layer token features per sample, `n_tokens × d_model`.
    pub local_text: Vec<Var>,
    /// Average-pooled locals, `B × d_model`.
    pub global_image: Var,
    pub global_text: Var,
    /// Per-sample `n_tokens × vocab` logits; empty in dual mode.
    pub mlm_logits: Vec<Var>,
    /// `B × 1` matching logits; fusion mode only.
    pub itm_logit: Option<Var>,
}

/// Identifies one dropout site: sample, side, layer, position in block.
#[derive(Clone, Copy)]
struct Site {
    sample: usize,
    side: EncoderSide,
    layer: usize,
}

fn dropout_on(tape: &mut Tape, x: Var, drop: Option<Dropout>, site: Site, slot: u64) -> Result<Var> {
    let Some(d) = drop else { return Ok(x) };
    if d.rate == 0.0 {
        return Ok(x);
    }
    let (r, c) = tape.shape(x);
    let mut rng = rng_from(
        d.seed,
        &[
            stream::DROPOUT,
            site.sample as u64,
            site.side as u64,
            site.layer as u64,
            slot,
        ],
    );
    let keep = 1.0 / (1.0 - d.rate);
    let mask = Matrix::from_fn(r, c, |_, _| if rng.random_bool(d.rate) { 0.0 } else { keep });
    tape.dropout(x, mask)
}

fn linear(tape: &mut Tape, b: &Bound, x: Var, l: Linear) -> Result<Var> {
    let y = tape.matmul(x, b.at(l.w))?;
    tape.add_row(y, b.at(l.b))
}

/// Multi-head attention with queries from `q_src` and keys/values from `kv_src`.
fn attention(tape: &mut Tape, b: &Bound, heads: &[Head], q_src: Var, kv_src: Var, head_dim: usize) -> Result<Var> {
    let inv = 1.0 / libm::sqrt(head_dim as f64);
    let mut out: Option<Var> = None;
    for h in heads {
        let q = tape.matmul(q_src, b.at(h.wq))?;
        let k = tape.matmul(kv_src, b.at(h.wk))?;
        let v = tape.matmul(kv_src, b.at(h.wv))?;
        let kt = tape.transpose(k)?;
        let s = tape.matmul(q, kt)?;
        let s = tape.scale(s, inv)?;
        let a = tape.row_softmax(s)?;
        let o = tape.matmul(a, v)?;
        let o = tape.matmul(o, b.at(h.wo))?;
        out = Some(match out {
            Some(acc) => tape.add(acc, o)?,
            None => o,
        });
    }
    out.ok_or_else(|| Error::precondition("attention", "no heads"))
}

fn layer_of(params: &ModelParams, side: EncoderSide, l: usize) -> Result<&Layer> {
    let layers = match side {
        EncoderSide::Image => &params.layout.img_layers,
        EncoderSide::Text => &params.layout.txt_layers,
    };
    layers
        .get(l)
        .ok_or_else(|| Error::precondition("fused_block", alloc::format!("no layer {l}")))
}

/// One encoder layer:
/// `x̂ = SelfAtt(x)`, `x ← x + x̂ + α·CrossAtt(x̂, y)`, `x ← x + FFN(x)`.
/// With `y = None` the cross-attention term is skipped entirely.
#[allow(clippy::too_many_arguments)]
pub fn fused_block(
    tape: &mut Tape,
    b: &Bound,
    params: &ModelParams,
    side: EncoderSide,
    layer: usize,
    x: Var,
    y: Option<Var>,
    drop: Option<Dropout>,
    sample: usize,
) -> Result<Var> {
    let cfg = &params.cfg;
    let lay = layer_of(params, side, layer)?;
    for v in core::iter::once(x).chain(y) {
        if tape.shape(v).1 != cfg.d_model {
            return Err(Error::Dimension {
                op: "fused_block",
                left: tape.shape(v),
                right: (tape.shape(v).0, cfg.d_model),
            });
        }
    }
    let site = Site { sample, side, layer };
    let x_hat = attention(tape, b, &lay.self_heads, x, x, cfg.head_dim())?;
    let x_hat = dropout_on(tape, x_hat, drop, site, 0)?;
    let mut r = tape.add(x, x_hat)?;
    if let Some(y) = y {
        let cross = lay.cross.as_ref().ok_or_else(|| {
            Error::precondition("fused_block", alloc::format!("layer {layer} has no cross-attention"))
        })?;
        let c = attention(tape, b, &cross.heads, x_hat, y, cfg.head_dim())?;
        let c = dropout_on(tape, c, drop, site, 1)?;
        let gated = tape.scale_by(c, b.at(cross.alpha))?;
        r = tape.add(r, gated)?;
    }
    let h = linear(tape, b, r, lay.ff1)?;
    let h = tape.relu(h)?;
    let f = linear(tape, b, h, lay.ff2)?;
    let f = dropout_on(tape, f, drop, site, 2)?;
    tape.add(r, f)
}

fn check_input(cfg: &ModelConfig, input: &Input) -> Result<()> {
    if input.patches.shape() != (cfg.n_patches, cfg.patch_dim) {
        return Err(Error::Dimension {
            op: "encode",
            left: input.patches.shape(),
            right: (cfg.n_patches, cfg.patch_dim),
        });
    }
    if input.tokens.is_empty() || input.tokens.len() > cfg.max_text_len {
        return Err(Error::precondition(
            "encode",
            alloc::format!("caption length {} outside 1..={}", input.tokens.len(), cfg.max_text_len),
        ));
    }
    if let Some(&id) = input.tokens.iter().find(|&&t| t >= cfg.vocab_size) {
        return Err(Error::TokenOutOfRange {
            id,
            vocab: cfg.vocab_size,
        });
    }
    Ok(())
}

/// Runs both encoders layer by layer; in fusion mode each fused layer
/// cross-attends to the other encoder's input to that same layer.
/// Returns last-layer locals per sample.
pub fn encode(
    tape: &mut Tape,
    b: &Bound,
    params: &ModelParams,
    inputs: &[Input],
    mode: Mode,
    drop: Option<Dropout>,
) -> Result<(Vec<Var>, Vec<Var>)> {
    let cfg = &params.cfg;
    let lay = &params.layout;
    let mut images = Vec::with_capacity(inputs.len());
    let mut texts = Vec::with_capacity(inputs.len());
    for (s, input) in inputs.iter().enumerate() {
        check_input(cfg, input)?;
        let p = tape.leaf(input.patches.clone());
        let mut xi = linear(tape, b, p, lay.img_embed)?;
        let tok = tape.gather_rows(b.at(lay.txt_embed), input.tokens)?;
        let positions: Vec<usize> = (0..input.tokens.len()).collect();
        let pos = tape.gather_rows(b.at(lay.txt_pos), &positions)?;
        let mut xt = tape.add(tok, pos)?;
        for l in 0..cfg.n_layers {
            let fused = mode == Mode::Fusion && cfg.is_fused(l);
            let (yi, yt) = if fused { (Some(xt), Some(xi)) } else { (None, None) };
            let ni = fused_block(tape, b, params, EncoderSide::Image, l, xi, yi, drop, s)?;
            let nt = fused_block(tape, b, params, EncoderSide::Text, l, xt, yt, drop, s)?;
            xi = ni;
            xt = nt;
        }
        images.push(xi);
        texts.push(xt);
    }
    Ok((images, texts))
}

fn pool(tape: &mut Tape, locals: &[Var]) -> Result<Var> {
    let rows: Vec<Var> = locals
        .iter()
        .map(|&l| tape.reduce(l, ReduceKind::Mean, Axis::Rows))
        .collect::<Result<_>>()?;
    tape.concat_rows(&rows)
}

fn forward(
    tape: &mut Tape,
    b: &Bound,
    params: &ModelParams,
    inputs: &[Input],
    mode: Mode,
    drop: Option<Dropout>,
) -> Result<ForwardOutput> {
    if inputs.is_empty() {
        return Err(Error::precondition("forward", "empty batch"));
    }
    let (local_image, local_text) = encode(tape, b, params, inputs, mode, drop)?;
    let global_image = pool(tape, &local_image)?;
    let global_text = pool(tape, &local_text)?;
    let (mlm_logits, itm_logit) = match mode {
        Mode::Dual => (Vec::new(), None),
        Mode::Fusion => {
            let lay = &params.layout;
            let mlm = local_text
                .iter()
                .map(|&t| linear(tape, b, t, lay.mlm))
                .collect::<Result<Vec<_>>>()?;
            let st = tape.matmul(global_text, b.at(lay.itm_text))?;
            let si = tape.matmul(global_image, b.at(lay.itm_image))?;
            let s = tape.add(st, si)?;
            (mlm, Some(tape.add_row(s, b.at(lay.itm_bias))?))
        }
    };
    Ok(ForwardOutput {
        local_image,
        local_text,
        global_image,
        global_text,
        mlm_logits,
        itm_logit,
    })
}

/// Independent encoders: the cross-attention path is never evaluated.
pub fn forward_dual(
    tape: &mut Tape,
    b: &Bound,
    params: &ModelParams,
    inputs: &[Input],
    drop: Option<Dropout>,
) -> Result<ForwardOutput> {
    forward(tape, b, params, inputs, Mode::Dual, drop)
}

/// Cross-attention active in the top `n_fused` layers of both encoders,
/// with the masked-token and matching heads evaluated.
pub fn forward_fusion(
    tape: &mut Tape,
    b: &Bound,
    params: &ModelParams,
    inputs: &[Input],
    drop: Option<Dropout>,
) -> Result<ForwardOutput> {
    forward(tape, b, params, inputs, Mode::Fusion, drop)
}

/// linear → BN → ReLU → linear → BN → ReLU → linear, with batch statistics.
pub fn project(tape: &mut Tape, b: &Bound, params: &ModelParams, which: Projector, x: Var) -> Result<Var> {
    let p = &params.layout.projectors[which.index()];
    if tape.shape(x).0 < 2 {
        return Err(Error::precondition(
            "projector",
            "batch statistics need at least 2 rows",
        ));
    }
    let eps = params.cfg.bn_eps;
    let mut h = x;
    for (l, (gamma, beta)) in [(p.l1, p.bn1), (p.l2, p.bn2)] {
        h = linear(tape, b, h, l)?;
        h = tape.batch_norm(h, eps)?;
        h = tape.mul_row(h, b.at(gamma))?;
        h = tape.add_row(h, b.at(beta))?;
        h = tape.relu(h)?;
    }
    linear(tape, b, h, p.l3)
}

/// Projects every sample's local rows together (one batch for the
/// normalization statistics) and splits the result back per sample.
pub fn project_locals(
    tape: &mut Tape,
    b: &Bound,
    params: &ModelParams,
    which: Projector,
    locals: &[Var],
) -> Result<Vec<Var>> {
    let stacked = tape.concat_rows(locals)?;
    let projected = project(tape, b, params, which, stacked)?;
    let mut start = 0;
    locals
        .iter()
        .map(|&l| {
            let n = tape.shape(l).0;
            let idx: Vec<usize> = (start..start + n).collect();
            start += n;
            tape.gather_rows(projected, &idx)
        })
        .collect()
}
