//! LARS with layer-wise trust ratios and a linear-warmup cosine schedule.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// How a parameter tensor is treated by the optimizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    /// Regular weight matrix: decayed and trust-scaled.
    Weight,
    /// Bias, normalization affine or gating scalar.
    Bias,
}

/// A named trainable tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub kind: ParamKind,
}

/// Which base learning rates the extra multiplier applies to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MultiplierScope {
    Both,
    BiasesOnly,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimConfig {
    pub base_lr_weights: f64,
    pub base_lr_biases: f64,
    /// Extra factor on the base learning rates, see `multiplier_scope`.
    pub lr_multiplier: f64,
    pub multiplier_scope: MultiplierScope,
    pub momentum: f64,
    pub weight_decay: f64,
    pub warmup_epochs: usize,
    pub total_epochs: usize,
    pub end_lr_factor: f64,
    /// `None` fixes the trust ratio at 1, which turns the update into plain
    /// SGD with momentum.
    pub trust_coefficient: Option<f64>,
    pub eps: f64,
    /// Skip weight decay and trust scaling on [`ParamKind::Bias`] tensors.
    pub exclude_bias_and_norm_from_decay: bool,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            base_lr_weights: 0.1,
            base_lr_biases: 0.0048,
            lr_multiplier: 2.0,
            multiplier_scope: MultiplierScope::Both,
            momentum: 0.9,
            weight_decay: 1e-6,
            warmup_epochs: 2,
            total_epochs: 10,
            end_lr_factor: 0.001,
            trust_coefficient: Some(0.001),
            eps: 1e-8,
            exclude_bias_and_norm_from_decay: true,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.warmup_epochs > self.total_epochs {
            return bad("warmup_epochs exceeds total_epochs");
        }
        if !(self.end_lr_factor > 0.0 && self.end_lr_factor <= 1.0) {
            return bad("end_lr_factor must lie in (0, 1]");
        }
        if !(self.base_lr_weights >= 0.0 && self.base_lr_biases >= 0.0 && self.lr_multiplier >= 0.0) {
            return bad("learning rates must be nonnegative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.weight_decay >= 0.0) || !(self.eps > 0.0) {
            return bad("weight_decay must be >= 0 and eps > 0");
        }
        if self.trust_coefficient.is_some_and(|t| !(t > 0.0)) {
            return bad("trust_coefficient must be positive");
        }
        Ok(())
    }

    fn base(&self, which: ParamKind) -> f64 {
        match which {
            ParamKind::Weight => {
                let m = match self.multiplier_scope {
                    MultiplierScope::Both => self.lr_multiplier,
                    MultiplierScope::BiasesOnly => 1.0,
                };
                self.base_lr_weights * m
            }
            ParamKind::Bias => self.base_lr_biases * self.lr_multiplier,
        }
    }
}

/// Learning rates for one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLr {
    pub weights: f64,
    pub biases: f64,
}

impl StepLr {
    fn for_kind(self, kind: ParamKind) -> f64 {
        match kind {
            ParamKind::Weight => self.weights,
            ParamKind::Bias => self.biases,
        }
    }
}

/// Schedule value at a possibly fractional step.
fn schedule(t: f64, steps_per_epoch: usize, cfg: &OptimConfig, which: ParamKind) -> f64 {
    let base = cfg.base(which);
    let warmup = (cfg.warmup_epochs * steps_per_epoch) as f64;
    let last = (cfg.total_epochs * steps_per_epoch) as f64 - 1.0;
    if t < warmup {
        return base * t / warmup;
    }
    if last <= warmup {
        return base;
    }
    let progress = ((t - warmup) / (last - warmup)).min(1.0);
    let end = base * cfg.end_lr_factor;
    end + (base - end) * 0.5 * (1.0 + libm::cos(core::f64::consts::PI * progress))
}

/// Linear warmup from 0 over `warmup_epochs`, then cosine decay reaching
/// `base × end_lr_factor` on the last step of `total_epochs`.
pub fn lr_at(step: usize, steps_per_epoch: usize, cfg: &OptimConfig, which: ParamKind) -> f64 {
    schedule(step as f64, steps_per_epoch, cfg, which)
}

pub fn step_lr(step: usize, steps_per_epoch: usize, cfg: &OptimConfig) -> StepLr {
    StepLr {
        weights: lr_at(step, steps_per_epoch, cfg, ParamKind::Weight),
        biases: lr_at(step, steps_per_epoch, cfg, ParamKind::Bias),
    }
}

/// Momentum buffers, one per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct LarsState {
    pub momentum: Vec<Matrix>,
}

impl LarsState {
    pub fn new(params: &[Param]) -> Self {
        Self {
            momentum: params
                .iter()
                .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
                .collect(),
        }
    }
}

/// One LARS update:
/// `u = g + wd·w`, `r = trust·‖w‖ / (‖u‖ + ε)` (1 when either norm is 0),
/// `m ← μ·m + r·u`, `w ← w - lr·m`.
/// Excluded parameters use `u = g` and `r = 1`.
pub fn lars_step(
    params: &mut [Param],
    grads: &[Matrix],
    state: &mut LarsState,
    lr: StepLr,
    cfg: &OptimConfig,
) -> Result<()> {
    if grads.len() != params.len() || state.momentum.len() != params.len() {
        return Err(Error::precondition(
            "lars_step",
            alloc::format!(
                "{} params, {} grads, {} momentum buffers",
                params.len(),
                grads.len(),
                state.momentum.len()
            ),
        ));
    }
    if !(lr.weights >= 0.0 && lr.biases >= 0.0) {
        return Err(Error::precondition("lars_step", "negative learning rate"));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.value.shape() != g.shape() {
            return Err(Error::Dimension {
                op: "lars_step",
                left: p.value.shape(),
                right: g.shape(),
            });
        }
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient { name: p.name.clone() });
        }
    }
    for ((p, g), m) in params.iter_mut().zip(grads).zip(state.momentum.iter_mut()) {
        let plain = cfg.exclude_bias_and_norm_from_decay && p.kind == ParamKind::Bias;
        let mut update = g.clone();
        let mut ratio = 1.0;
        if !plain {
            if cfg.weight_decay != 0.0 {
                update.axpy(cfg.weight_decay, &p.value)?;
            }
            if let Some(trust) = cfg.trust_coefficient {
                let wn = p.value.frobenius_norm();
                let un = update.frobenius_norm();
                if wn > 0.0 && un > 0.0 {
                    ratio = trust * wn / (un + cfg.eps);
                }
            }
        }
        for (mi, ui) in m.data_mut().iter_mut().zip(update.data()) {
            *mi = cfg.momentum * *mi + ratio * ui;
        }
        p.value.axpy(-lr.for_kind(p.kind), m)?;
    }
    Ok(())
}
