//! Toy dual encoder with gated cross-attention in its top layers, local and
//! global projectors, and masked-token / image-text-matching heads.

mod forward;
mod tasks;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use forward::{
    encode, forward_dual, forward_fusion, fused_block, project, project_locals, Bound, Dropout, EncoderSide,
    ForwardOutput, Input, Mode, Projector,
};
pub use tasks::{itm_loss, mlm_loss, mlm_mask, MlmLoss};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::optim::{Param, ParamKind};
use crate::rng::{rng_from, standard_normal, stream};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_layers: usize,
    /// Number of top layers carrying cross-attention.
    pub n_fused: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub vocab_size: usize,
    pub max_text_len: usize,
    pub n_patches: usize,
    pub patch_dim: usize,
    pub mlm_prob: f64,
    pub dropout: f64,
    /// Widths of the three projector layers.
    pub proj_dims: [usize; 3],
    /// Variance floor of the projector batch normalization.
    pub bn_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 32,
            n_layers: 2,
            n_fused: 2,
            n_heads: 2,
            d_ff: 64,
            vocab_size: 133,
            max_text_len: 16,
            n_patches: 8,
            patch_dim: 16,
            mlm_prob: 0.15,
            dropout: 0.1,
            proj_dims: [64, 64, 32],
            bn_eps: 1e-5,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return bad(format!(
                "d_model {} not divisible into {} heads",
                self.d_model, self.n_heads
            ));
        }
        if self.n_fused > self.n_layers {
            return bad(format!("n_fused {} exceeds n_layers {}", self.n_fused, self.n_layers));
        }
        if !(self.mlm_prob > 0.0 && self.mlm_prob < 1.0) {
            return bad(format!("mlm_prob {} outside (0, 1)", self.mlm_prob));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.proj_dims.contains(&0) || self.d_ff == 0 || self.patch_dim == 0 {
            return bad("layer widths must be positive".into());
        }
        if self.vocab_size < 2 || self.max_text_len == 0 || self.n_patches == 0 {
            return bad("vocab_size, max_text_len and n_patches must be positive".into());
        }
        if !(self.bn_eps > 0.0) {
            return bad("bn_eps must be positive".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Whether layer `l` carries cross-attention.
    pub fn is_fused(&self, l: usize) -> bool {
        l + self.n_fused >= self.n_layers
    }
}

/// Indices into [`ModelParams::params`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Linear {
    pub w: usize,
    pub b: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Head {
    pub wq: usize,
    pub wk: usize,
    pub wv: usize,
    pub wo: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Cross {
    pub heads: Vec<Head>,
    pub alpha: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Layer {
    pub self_heads: Vec<Head>,
    pub cross: Option<Cross>,
    pub ff1: Linear,
    pub ff2: Linear,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct ProjectorIdx {
    pub l1: Linear,
    pub bn1: (usize, usize),
    pub l2: Linear,
    pub bn2: (usize, usize),
    pub l3: Linear,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Layout {
    pub img_embed: Linear,
    pub txt_embed: usize,
    pub txt_pos: usize,
    pub img_layers: Vec<Layer>,
    pub txt_layers: Vec<Layer>,
    /// Indexed by [`Projector`].
    pub projectors: Vec<ProjectorIdx>,
    pub mlm: Linear,
    pub itm_text: usize,
    pub itm_image: usize,
    pub itm_bias: usize,
}

enum Init {
    /// `N(0, 1/fan_in)`.
    Fan(usize),
    Normal(f64),
    Zeros,
    Ones,
}

struct Builder {
    params: Vec<Param>,
    inits: Vec<Init>,
}

impl Builder {
    fn add(&mut self, name: String, rows: usize, cols: usize, kind: ParamKind, init: Init) -> usize {
        self.params.push(Param {
            name,
            value: Matrix::zeros(rows, cols),
            kind,
        });
        self.inits.push(init);
        self.params.len() - 1
    }

    fn weight(&mut self, name: String, rows: usize, cols: usize) -> usize {
        self.add(name, rows, cols, ParamKind::Weight, Init::Fan(rows))
    }

    fn bias(&mut self, name: String, cols: usize) -> usize {
        self.add(name, 1, cols, ParamKind::Bias, Init::Zeros)
    }

    fn linear(&mut self, name: &str, rows: usize, cols: usize) -> Linear {
        Linear {
            w: self.weight(format!("{name}.w"), rows, cols),
            b: self.bias(format!("{name}.b"), cols),
        }
    }

    fn heads(&mut self, name: &str, cfg: &ModelConfig) -> Vec<Head> {
        let (d, dh) = (cfg.d_model, cfg.head_dim());
        (0..cfg.n_heads)
            .map(|h| Head {
                wq: self.weight(format!("{name}.head{h}.wq"), d, dh),
                wk: self.weight(format!("{name}.head{h}.wk"), d, dh),
                wv: self.weight(format!("{name}.head{h}.wv"), d, dh),
                wo: self.weight(format!("{name}.head{h}.wo"), dh, d),
            })
            .collect()
    }

    fn layers(&mut self, side: &str, cfg: &ModelConfig) -> Vec<Layer> {
        (0..cfg.n_layers)
            .map(|l| {
                let p = format!("{side}.layer{l}");
                let self_heads = self.heads(&format!("{p}.self"), cfg);
                let cross = cfg.is_fused(l).then(|| Cross {
                    heads: self.heads(&format!("{p}.cross"), cfg),
                    alpha: self.add(format!("{p}.alpha"), 1, 1, ParamKind::Bias, Init::Zeros),
                });
                Layer {
                    self_heads,
                    cross,
                    ff1: self.linear(&format!("{p}.ff1"), cfg.d_model, cfg.d_ff),
                    ff2: self.linear(&format!("{p}.ff2"), cfg.d_ff, cfg.d_model),
                }
            })
            .collect()
    }

    fn projector(&mut self, name: &str, cfg: &ModelConfig) -> ProjectorIdx {
        let [p0, p1, p2] = cfg.proj_dims;
        let bn = |b: &mut Self, tag: &str, w: usize| {
            (
                b.add(format!("{name}.{tag}.gamma"), 1, w, ParamKind::Bias, Init::Ones),
                b.add(format!("{name}.{tag}.beta"), 1, w, ParamKind::Bias, Init::Zeros),
            )
        };
        let l1 = self.linear(&format!("{name}.l1"), cfg.d_model, p0);
        let bn1 = bn(self, "bn1", p0);
        let l2 = self.linear(&format!("{name}.l2"), p0, p1);
        let bn2 = bn(self, "bn2", p1);
        // random output bias: a row whose ReLUs are all off must not map to
        // the zero vector, which has no direction for the cosine costs
        let l3 = Linear {
            w: self.weight(format!("{name}.l3.w"), p1, p2),
            b: self.add(format!("{name}.l3.b"), 1, p2, ParamKind::Bias, Init::Normal(0.1)),
        };
        ProjectorIdx { l1, bn1, l2, bn2, l3 }
    }
}

fn build(cfg: &ModelConfig) -> (Vec<Param>, Vec<Init>, Layout) {
    let mut b = Builder {
        params: Vec::new(),
        inits: Vec::new(),
    };
    let d = cfg.d_model;
    let img_embed = b.linear("img.embed", cfg.patch_dim, d);
    let txt_embed = b.add("txt.embed".into(), cfg.vocab_size, d, ParamKind::Weight, Init::Fan(d));
    let txt_pos = b.add(
        "txt.pos".into(),
        cfg.max_text_len,
        d,
        ParamKind::Weight,
        Init::Normal(0.02),
    );
    let img_layers = b.layers("img", cfg);
    let txt_layers = b.layers("txt", cfg);
    let projectors = Projector::ALL.iter().map(|p| b.projector(p.name(), cfg)).collect();
    let mlm = b.linear("mlm", d, cfg.vocab_size);
    let itm_text = b.weight("itm.text".into(), d, 1);
    let itm_image = b.weight("itm.image".into(), d, 1);
    let itm_bias = b.bias("itm.b".into(), 1);
    let layout = Layout {
        img_embed,
        txt_embed,
        txt_pos,
        img_layers,
        txt_layers,
        projectors,
        mlm,
        itm_text,
        itm_image,
        itm_bias,
    };
    (b.params, b.inits, layout)
}

/// Every trainable tensor of the model, by name.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub cfg: ModelConfig,
    pub params: Vec<Param>,
    pub(crate) layout: Layout,
}

impl ModelParams {
    /// Fresh parameters; every gate α starts at exactly 0.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let (mut params, inits, layout) = build(cfg);
        for (k, (p, init)) in params.iter_mut().zip(inits).enumerate() {
            let mut rng = rng_from(seed, &[stream::INIT, k as u64]);
            let (r, c) = p.value.shape();
            p.value = match init {
                Init::Fan(fan) => {
                    let s = 1.0 / libm::sqrt(fan as f64);
                    Matrix::from_fn(r, c, |_, _| s * standard_normal(&mut rng))
                }
                Init::Normal(s) => Matrix::from_fn(r, c, |_, _| s * standard_normal(&mut rng)),
                Init::Zeros => Matrix::zeros(r, c),
                Init::Ones => Matrix::filled(r, c, 1.0),
            };
        }
        Ok(Self {
            cfg: *cfg,
            params,
            layout,
        })
    }

    /// Rebuilds the layout for `cfg` and fills it from named tensors, which
    /// must match the expected names and shapes in order.
    pub fn from_named(cfg: &ModelConfig, named: Vec<(String, Matrix)>) -> Result<Self> {
        cfg.validate()?;
        let (mut params, _, layout) = build(cfg);
        if named.len() != params.len() {
            return Err(Error::Config(format!(
                "expected {} parameter tensors, found {}",
                params.len(),
                named.len()
            )));
        }
        for (p, (name, value)) in params.iter_mut().zip(named) {
            if p.name != name || p.value.shape() != value.shape() {
                return Err(Error::Config(format!(
                    "parameter `{name}` {:?} does not match expected `{}` {:?}",
                    value.shape(),
                    p.name,
                    p.value.shape()
                )));
            }
            p.value = value;
        }
        Ok(Self {
            cfg: *cfg,
            params,
            layout,
        })
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Indices of the gate scalars, image side first, bottom layer first.
    pub fn alpha_indices(&self) -> Vec<usize> {
        self.layout
            .img_layers
            .iter()
            .chain(&self.layout.txt_layers)
            .filter_map(|l| l.cross.as_ref().map(|c| c.alpha))
            .collect()
    }

    pub fn set_alphas(&mut self, value: f64) {
        for k in self.alpha_indices() {
            self.params[k].value = Matrix::scalar(value);
        }
    }

    pub fn n_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

#[cfg(test)]
mod tests;
