//! One optimization step over the four objectives, the step-indexed data
//! pipeline feeding it, and plan-based alignment evaluation.
//!
//! Every random draw of step `k` is keyed by `(seed, k)`, so a run resumed
//! from parameters, momentum and step counter continues bit-identically.

use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::bt::{multimodal_bt_on, BtConfig};
use crate::data::{augment_pair, chance_accuracy, AugmentPolicy, PairedSample, SyntheticSpec, World};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{
    forward_dual, forward_fusion, itm_loss, mlm_loss, mlm_mask, project, project_locals, Bound, Dropout, Input,
    ModelConfig, ModelParams, Projector,
};
use crate::optim::{lars_step, step_lr, LarsState, OptimConfig, StepLr};
use crate::ot::{got, got_grad_features, got_objective, GotConfig, OtSolverConfig, TransportPlan};
use crate::rng::{derive_seed, rng_from, stream};
use crate::tape::{Tape, Var};

/// Which objectives contribute to the step loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TaskSet {
    pub btgot: bool,
    pub mlm: bool,
    pub itm: bool,
}

impl TaskSet {
    pub const ALL: TaskSet = TaskSet {
        btgot: true,
        mlm: true,
        itm: true,
    };

    pub fn is_empty(&self) -> bool {
        !(self.btgot || self.mlm || self.itm)
    }
}

impl FromStr for TaskSet {
    type Err = Error;

    /// Comma-separated subset of `BTGOT`, `MLM`, `ITM`.
    fn from_str(s: &str) -> Result<Self> {
        let mut t = TaskSet {
            btgot: false,
            mlm: false,
            itm: false,
        };
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            match name.to_ascii_uppercase().as_str() {
                "BTGOT" => t.btgot = true,
                "MLM" => t.mlm = true,
                "ITM" => t.itm = true,
                other => return Err(Error::Config(alloc::format!("unknown task `{other}`"))),
            }
        }
        if t.is_empty() {
            return Err(Error::Config("task list is empty".into()));
        }
        Ok(t)
    }
}

impl core::fmt::Display for TaskSet {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let names: Vec<&str> = [(self.btgot, "BTGOT"), (self.mlm, "MLM"), (self.itm, "ITM")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, n)| *n)
            .collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    /// `optim.total_epochs` is ignored in favour of `epochs`.
    pub optim: OptimConfig,
    pub ot: OtSolverConfig,
    pub bt: BtConfig,
    pub got: GotConfig,
    pub spec: SyntheticSpec,
    pub augment: AugmentPolicy,
    pub batch_size: usize,
    pub epochs: usize,
    pub train_size: usize,
    pub eval_size: usize,
    pub w_got: f64,
    pub tasks: TaskSet,
    /// Feed local features through the local projectors before the
    /// alignment loss; raw encoder outputs otherwise.
    pub project_locals: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let spec = SyntheticSpec::default();
        let model = ModelConfig {
            vocab_size: spec.vocabulary().size(),
            n_patches: spec.n_patches,
            patch_dim: spec.feature_dim,
            ..ModelConfig::default()
        };
        Self {
            model,
            optim: OptimConfig::default(),
            ot: OtSolverConfig::default(),
            bt: BtConfig::default(),
            got: GotConfig::default(),
            spec,
            augment: AugmentPolicy {
                max_len: model.max_text_len,
                ..AugmentPolicy::default()
            },
            batch_size: 32,
            epochs: 10,
            train_size: 256,
            eval_size: 64,
            w_got: 100.0,
            tasks: TaskSet::ALL,
            project_locals: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// A model and dataset small enough for finite-difference checks:
    /// width 8, two layers, 3 patches, 4 tokens, batch 4.
    pub fn micro() -> Self {
        let spec = SyntheticSpec {
            n_concepts: 4,
            n_attributes: 2,
            n_patches: 3,
            n_tokens: 4,
            feature_dim: 5,
            synonyms: 1,
            n_filler: 1,
            ..SyntheticSpec::default()
        };
        let model = ModelConfig {
            d_model: 8,
            n_layers: 2,
            n_fused: 1,
            n_heads: 2,
            d_ff: 6,
            vocab_size: spec.vocabulary().size(),
            max_text_len: 6,
            n_patches: 3,
            patch_dim: 5,
            proj_dims: [6, 5, 4],
            ..ModelConfig::default()
        };
        Self {
            model,
            spec,
            augment: AugmentPolicy {
                max_len: 6,
                ..AugmentPolicy::default()
            },
            batch_size: 4,
            epochs: 2,
            train_size: 8,
            eval_size: 4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.schedule().validate()?;
        self.ot.validate()?;
        self.bt.validate()?;
        self.spec.validate()?;
        self.augment.validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if !(self.w_got >= 0.0) || !self.w_got.is_finite() {
            return bad(alloc::format!("w_got must be >= 0, got {}", self.w_got));
        }
        if !(0.0..=1.0).contains(&self.got.gamma) {
            return bad(alloc::format!("gamma {} outside [0, 1]", self.got.gamma));
        }
        if self.tasks.is_empty() {
            return bad("task list is empty".into());
        }
        if self.batch_size < 2 || self.train_size < self.batch_size || self.eval_size < 2 {
            return bad("need batch_size >= 2, train_size >= batch_size and eval_size >= 2".into());
        }
        let vocab = self.spec.vocabulary().size();
        if self.model.vocab_size != vocab {
            return bad(alloc::format!(
                "model vocab {} but data vocab {vocab}",
                self.model.vocab_size
            ));
        }
        if self.model.n_patches != self.spec.n_patches || self.model.patch_dim != self.spec.feature_dim {
            return bad("model patch shape differs from the data spec".into());
        }
        if self.augment.max_len > self.model.max_text_len || self.spec.n_tokens > self.model.max_text_len {
            return bad("captions can exceed max_text_len".into());
        }
        Ok(())
    }

    /// Optimizer settings with the horizon taken from `epochs`.
    pub fn schedule(&self) -> OptimConfig {
        OptimConfig {
            total_epochs: self.epochs,
            ..self.optim
        }
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.train_size / self.batch_size
    }

    pub fn total_steps(&self) -> usize {
        self.steps_per_epoch() * self.epochs
    }
}

/// Loss components of one step, as reported.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub lr: StepLr,
    pub bt: f64,
    pub got: f64,
    pub mlm: f64,
    pub itm: f64,
    /// `bt + w_got·got + mlm + itm`.
    pub total: f64,
    pub wd: f64,
    pub gwd: f64,
}

impl StepReport {
    fn breakdown(&self) -> String {
        alloc::format!(
            "bt={} got={} mlm={} itm={} total={}",
            self.bt,
            self.got,
            self.mlm,
            self.itm,
            self.total
        )
    }
}

/// Everything random about one step, drawn from `(seed, step)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepInputs {
    pub view1: Vec<PairedSample>,
    pub view2: Vec<PairedSample>,
    /// Masked view-1 captions and their masked positions.
    pub masked: Vec<(Vec<usize>, Vec<usize>)>,
    /// Image index paired with each caption for the mismatched ITM pairs.
    pub negatives: Vec<usize>,
    pub dropout_seed: u64,
}

/// Uniform cyclic permutation (Sattolo), hence without fixed points.
pub fn derangement(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    let mut rng = rng_from(seed, &[stream::DERANGE]);
    for i in (1..n).rev() {
        let j = rng.random_range(0..i);
        p.swap(i, j);
    }
    p
}

/// Couplings used for the alignment loss of one (view, sample) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct GotPlans {
    pub wd: TransportPlan,
    pub gw: TransportPlan,
}

/// Tape and loss nodes of one step.
pub struct StepGraph {
    pub tape: Tape,
    pub bound: Bound,
    pub total: Var,
    pub report: StepReport,
    /// Plans in (view, sample) order.
    pub plans: Vec<GotPlans>,
}

fn inputs_of(samples: &[PairedSample]) -> Vec<Input<'_>> {
    samples
        .iter()
        .map(|s| Input {
            patches: &s.patch_features,
            tokens: &s.token_ids,
        })
        .collect()
}

fn add_opt(tape: &mut Tape, acc: Option<Var>, v: Var) -> Result<Var> {
    match acc {
        Some(a) => tape.add(a, v),
        None => Ok(v),
    }
}

/// Records `L_BT + w_got·L_GOT + L_MLM + L_ITM` for prepared inputs. With
/// `fixed` plans the alignment loss is evaluated on those couplings instead
/// of solving for new ones.
pub fn step_graph(
    params: &ModelParams,
    cfg: &TrainConfig,
    inputs: &StepInputs,
    fixed: Option<&[GotPlans]>,
) -> Result<StepGraph> {
    let mut tape = Tape::new();
    let bound = Bound::new(&mut tape, params);
    let b = inputs.view1.len();
    let drop = |pass: u64| {
        Some(Dropout {
            seed: derive_seed(inputs.dropout_seed, &[pass]),
            rate: params.cfg.dropout,
        })
    };
    let mut report = StepReport {
        step: 0,
        lr: StepLr {
            weights: 0.0,
            biases: 0.0,
        },
        bt: 0.0,
        got: 0.0,
        mlm: 0.0,
        itm: 0.0,
        total: 0.0,
        wd: 0.0,
        gwd: 0.0,
    };
    let mut total: Option<Var> = None;
    let mut plans = Vec::new();

    if cfg.tasks.btgot {
        let mut globals = Vec::new();
        let mut got_total: Option<Var> = None;
        for (v, view) in [&inputs.view1, &inputs.view2].into_iter().enumerate() {
            let out = forward_dual(&mut tape, &bound, params, &inputs_of(view), drop(v as u64))?;
            let zi = project(&mut tape, &bound, params, Projector::GlobalImage, out.global_image)?;
            let zt = project(&mut tape, &bound, params, Projector::GlobalText, out.global_text)?;
            globals.push((zi, zt));
            let (li, lt) = if cfg.project_locals {
                (
                    project_locals(&mut tape, &bound, params, Projector::LocalImage, &out.local_image)?,
                    project_locals(&mut tape, &bound, params, Projector::LocalText, &out.local_text)?,
                )
            } else {
                (out.local_image.clone(), out.local_text.clone())
            };
            for s in 0..b {
                let x = tape.value(li[s]).clone();
                let y = tape.value(lt[s]).clone();
                let (value, gx, gy, p, wd, gwd) = match fixed {
                    None => {
                        let o = got(&x, &y, &cfg.got, &cfg.ot)?;
                        let p = GotPlans {
                            wd: o.plan_wd.clone(),
                            gw: o.plan_gw.clone(),
                        };
                        (o.loss, o.grad_x, o.grad_y, p, o.wd, o.gwd)
                    }
                    Some(f) => {
                        let p = f[v * b + s].clone();
                        let kind = cfg.ot.gw_structural_cost;
                        let value = got_objective(&x, &y, &p.wd, &p.gw, &cfg.got, kind)?;
                        let (gx, gy) = got_grad_features(&x, &y, &p.wd, &p.gw, &cfg.got, kind)?;
                        (value, gx, gy, p, f64::NAN, f64::NAN)
                    }
                };
                let inv = 1.0 / b as f64;
                report.wd += wd * inv;
                report.gwd += gwd * inv;
                let node =
                    tape.custom_scalar(value * inv, alloc::vec![(li[s], gx.scale(inv)), (lt[s], gy.scale(inv))])?;
                got_total = Some(add_opt(&mut tape, got_total, node)?);
                plans.push(p);
            }
        }
        let [(i1, t1), (i2, t2)] = [globals[0], globals[1]];
        let bt = multimodal_bt_on(&mut tape, i1, i2, t1, t2, &cfg.bt)?;
        let got_v = got_total.expect("batch is nonempty");
        report.bt = tape.value(bt).item();
        report.got = tape.value(got_v).item();
        let weighted = tape.scale(got_v, cfg.w_got)?;
        let part = tape.add(bt, weighted)?;
        total = Some(add_opt(&mut tape, total, part)?);
    }

    if cfg.tasks.mlm {
        let masked_inputs: Vec<Input> = inputs
            .view1
            .iter()
            .zip(&inputs.masked)
            .map(|(s, (ids, _))| Input {
                patches: &s.patch_features,
                tokens: ids,
            })
            .collect();
        let out = forward_fusion(&mut tape, &bound, params, &masked_inputs, drop(2))?;
        let originals: Vec<&[usize]> = inputs.view1.iter().map(|s| s.token_ids.as_slice()).collect();
        let positions: Vec<Vec<usize>> = inputs.masked.iter().map(|(_, p)| p.clone()).collect();
        let l = mlm_loss(&mut tape, &out.mlm_logits, &originals, &positions)?;
        report.mlm = tape.value(l.loss).item();
        total = Some(add_opt(&mut tape, total, l.loss)?);
    }

    if cfg.tasks.itm {
        let mut pairs = inputs_of(&inputs.view1);
        for (s, &img) in inputs.negatives.iter().enumerate() {
            pairs.push(Input {
                patches: &inputs.view1[img].patch_features,
                tokens: &inputs.view1[s].token_ids,
            });
        }
        let mut labels = alloc::vec![1.0; b];
        labels.extend(core::iter::repeat_n(0.0, b));
        let out = forward_fusion(&mut tape, &bound, params, &pairs, drop(3))?;
        let l = itm_loss(&mut tape, out.itm_logit.expect("fusion mode"), &labels)?;
        report.itm = tape.value(l).item();
        total = Some(add_opt(&mut tape, total, l)?);
    }

    let total = total.ok_or_else(|| Error::Config("task list is empty".into()))?;
    report.total = tape.value(total).item();
    Ok(StepGraph {
        tape,
        bound,
        total,
        report,
        plans,
    })
}

/// Parameters, optimizer state and step counter of a run.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub cfg: TrainConfig,
    pub world: World,
    pub params: ModelParams,
    pub state: LarsState,
    pub step: usize,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let world = World::new(cfg.spec)?;
        let params = ModelParams::init(&cfg.model, derive_seed(cfg.seed, &[stream::INIT]))?;
        let state = LarsState::new(&params.params);
        Ok(Self {
            cfg,
            world,
            params,
            state,
            step: 0,
        })
    }

    /// Rebuilds a trainer around saved parameters and optimizer state.
    pub fn resume(cfg: TrainConfig, params: ModelParams, state: LarsState, step: usize) -> Result<Self> {
        cfg.validate()?;
        if params.cfg != cfg.model || state.momentum.len() != params.params.len() {
            return Err(Error::Config(
                "checkpoint does not match the model configuration".into(),
            ));
        }
        Ok(Self {
            world: World::new(cfg.spec)?,
            cfg,
            params,
            state,
            step,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.cfg.total_steps()
    }

    /// Training-set indices of the batch used at `step`: each epoch walks a
    /// fresh permutation of the training set.
    pub fn batch_indices(&self, step: usize) -> Vec<u64> {
        let spe = self.cfg.steps_per_epoch();
        let (epoch, k) = (step / spe, step % spe);
        let mut order: Vec<u64> = (0..self.cfg.train_size as u64).collect();
        order.shuffle(&mut rng_from(self.cfg.seed, &[stream::SHUFFLE, epoch as u64]));
        order[k * self.cfg.batch_size..(k + 1) * self.cfg.batch_size].to_vec()
    }

    pub fn step_inputs(&self, step: usize) -> Result<StepInputs> {
        let seed = self.cfg.seed;
        let samples: Vec<PairedSample> = self
            .batch_indices(step)
            .into_iter()
            .map(|i| self.world.sample(stream::DATA_TRAIN, i))
            .collect();
        let mut view1 = Vec::with_capacity(samples.len());
        let mut view2 = Vec::with_capacity(samples.len());
        let mut masked = Vec::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            let key = derive_seed(seed, &[step as u64, i as u64]);
            view1.push(augment_pair(s, &self.cfg.augment, 1, key, &self.world.vocab)?);
            view2.push(augment_pair(s, &self.cfg.augment, 2, key, &self.world.vocab)?);
            masked.push(mlm_mask(&view1[i].token_ids, self.cfg.model.mlm_prob, key)?);
        }
        Ok(StepInputs {
            negatives: derangement(samples.len(), derive_seed(seed, &[step as u64])),
            view1,
            view2,
            masked,
            dropout_seed: derive_seed(seed, &[stream::DROPOUT, step as u64]),
        })
    }

    /// One update. A non-finite loss or gradient aborts with the step index
    /// and whatever part of the loss breakdown was computed.
    pub fn train_step(&mut self) -> Result<StepReport> {
        let step = self.step;
        let abort = |detail: String| Error::NumericAbort { step, detail };
        if let Some(p) = self.params.params.iter().find(|p| !p.value.is_finite()) {
            return Err(abort(alloc::format!("parameter `{}` is not finite", p.name)));
        }
        let inputs = self.step_inputs(step)?;
        let graph = step_graph(&self.params, &self.cfg, &inputs, None).map_err(|e| match e {
            Error::NonFinite { .. } => abort(alloc::format!("{e}")),
            other => other,
        })?;
        let mut report = graph.report;
        report.step = step;
        report.lr = step_lr(step, self.cfg.steps_per_epoch(), &self.cfg.schedule());
        if !report.total.is_finite() {
            return Err(abort(report.breakdown()));
        }
        let grads = graph
            .tape
            .backward(graph.total)
            .map_err(|e| abort(alloc::format!("{e}; {}", report.breakdown())))?;
        let grads = graph.bound.gradients(&grads, &self.params);
        lars_step(
            &mut self.params.params,
            &grads,
            &mut self.state,
            report.lr,
            &self.cfg.schedule(),
        )
        .map_err(|e| abort(alloc::format!("{e}; {}", report.breakdown())))?;
        self.step += 1;
        Ok(report)
    }

    pub fn eval_set(&self) -> Vec<PairedSample> {
        self.world.batch(stream::DATA_EVAL, 0, self.cfg.eval_size)
    }

    /// Held-out alignment metrics; non-finite features abort with the step.
    pub fn evaluate(&self) -> Result<EvalReport> {
        evaluate_alignment(&self.params, &self.eval_set(), &self.cfg).map_err(|e| match e {
            Error::NonFinite { .. } | Error::ZeroNorm { .. } => Error::NumericAbort {
                step: self.step,
                detail: alloc::format!("evaluation: {e}"),
            },
            other => other,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub chance: f64,
    pub mean_entropy: f64,
    /// Joint plan of each evaluated sample (patches × tokens).
    pub plans: Vec<TransportPlan>,
}

/// Token→patch predictions from the joint transport plan between two
/// feature sets: for token `j`, `argmax_i T_ij`, ties to the lowest `i`.
pub fn plan_alignment(
    image: &Matrix,
    text: &Matrix,
    got_cfg: &GotConfig,
    ot: &OtSolverConfig,
) -> Result<TransportPlan> {
    Ok(got(image, text, got_cfg, ot)?.joint_plan())
}

/// Alignment accuracy on samples with ground truth, using the model's
/// (projected, when configured) local features of an unaugmented forward.
/// Projector normalization uses the statistics of the whole evaluated set.
pub fn evaluate_alignment(params: &ModelParams, samples: &[PairedSample], cfg: &TrainConfig) -> Result<EvalReport> {
    if samples.len() < 2 {
        return Err(Error::precondition("evaluate_alignment", "need at least 2 samples"));
    }
    let mut tape = Tape::new();
    let bound = Bound::new(&mut tape, params);
    let out = forward_dual(&mut tape, &bound, params, &inputs_of(samples), None)?;
    let (li, lt) = if cfg.project_locals {
        (
            project_locals(&mut tape, &bound, params, Projector::LocalImage, &out.local_image)?,
            project_locals(&mut tape, &bound, params, Projector::LocalText, &out.local_text)?,
        )
    } else {
        (out.local_image, out.local_text)
    };
    let mut plans = Vec::with_capacity(samples.len());
    let mut predictions = Vec::with_capacity(samples.len());
    for s in 0..samples.len() {
        let plan = plan_alignment(tape.value(li[s]), tape.value(lt[s]), &cfg.got, &cfg.ot)?;
        predictions.push(plan.column_argmax().into_iter().map(Some).collect::<Vec<_>>());
        plans.push(plan);
    }
    Ok(EvalReport {
        accuracy: crate::data::alignment_accuracy(samples, &predictions),
        chance: chance_accuracy(samples),
        mean_entropy: plans.iter().map(TransportPlan::entropy).sum::<f64>() / plans.len() as f64,
        plans,
    })
}

#[cfg(test)]
mod tests;
