//! Flat `key = value` run configuration.
//!
//! One line per key, `#` starts a comment, blank lines are ignored. Every
//! field of [`TrainConfig`] has a key (see [`KEYS`]); the same names work as
//! `--key value` overrides on the command line. Keys that are derived from
//! others (`vocab_size`, `augment_max_len`) follow their source unless set
//! explicitly.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::hash::Hasher;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gotalign_core::optim::MultiplierScope;
use gotalign_core::ot::{GammaConvention, GwInit, StructuralCost, WdSolver};
use gotalign_core::train::TrainConfig;

use crate::error::{Error, Result};

/// Everything a run needs: the training configuration plus where to write.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

type Getter = fn(&RunConfig) -> String;
type Setter = fn(&mut RunConfig, &str) -> std::result::Result<(), String>;

/// A configuration key.
pub struct Key {
    pub name: &'static str,
    pub help: &'static str,
    get: Getter,
    set: Setter,
}

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: Display,
{
    v.parse().map_err(|e: T::Err| e.to_string())
}

fn flag(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(format!("expected a boolean, got `{v}`")),
    }
}

fn optional(v: &str) -> std::result::Result<Option<f64>, String> {
    if v == "none" {
        Ok(None)
    } else {
        num(v).map(Some)
    }
}

fn show_optional(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_owned(), |x| x.to_string())
}

fn parse_dims(v: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<&str> = v.split('-').collect();
    if parts.len() != 3 {
        return Err(format!("expected three widths like 64-64-32, got `{v}`"));
    }
    Ok([num(parts[0])?, num(parts[1])?, num(parts[2])?])
}

macro_rules! key {
    ($name:literal, $help:literal, |$c:ident| $get:expr, |$m:ident, $v:ident| $set:expr) => {
        Key {
            name: $name,
            help: $help,
            get: |$c: &RunConfig| $get,
            set: |$m: &mut RunConfig, $v: &str| {
                $set;
                Ok(())
            },
        }
    };
}

macro_rules! simple {
    ($name:literal, $help:literal, $($field:ident).+) => {
        key!($name, $help, |c| c.$($field).+.to_string(), |c, v| c.$($field).+ = num(v)?)
    };
}

macro_rules! boolean {
    ($name:literal, $help:literal, $($field:ident).+) => {
        key!($name, $help, |c| c.$($field).+.to_string(), |c, v| c.$($field).+ = flag(v)?)
    };
}

macro_rules! view_op {
    ($name:literal, $help:literal, $view:literal, $kind:ident . $field:ident) => {
        key!(
            $name,
            $help,
            |c| c.train.augment.views[$view].$kind.$field.to_string(),
            |c, v| c.train.augment.views[$view].$kind.$field = num(v)?
        )
    };
}

/// Every configuration key, in snapshot order.
pub static KEYS: &[Key] = &[
    simple!(
        "seed",
        "master seed for initialization, batching and augmentation",
        train.seed
    ),
    key!(
        "output_dir",
        "run directory",
        |c| c.output_dir.display().to_string(),
        |c, v| c.output_dir = PathBuf::from(v)
    ),
    key!(
        "tasks",
        "comma-separated subset of BTGOT, MLM, ITM",
        |c| c.train.tasks.to_string(),
        |c, v| c.train.tasks = v.parse().map_err(|e: gotalign_core::Error| e.to_string())?
    ),
    simple!("epochs", "training epochs", train.epochs),
    simple!("batch_size", "pairs per step", train.batch_size),
    simple!("train_size", "training pairs per epoch", train.train_size),
    simple!("eval_size", "held-out pairs for alignment evaluation", train.eval_size),
    simple!("w_got", "weight of the alignment loss in the total", train.w_got),
    simple!("gamma", "GOT mixing coefficient", train.got.gamma),
    key!(
        "gamma_convention",
        "which distance gamma weighs: wd or gwd",
        |c| match c.train.got.convention {
            GammaConvention::GammaOnWd => "wd".to_owned(),
            GammaConvention::GammaOnGwd => "gwd".to_owned(),
        },
        |c, v| c.train.got.convention = match v {
            "wd" => GammaConvention::GammaOnWd,
            "gwd" => GammaConvention::GammaOnGwd,
            _ => return Err(format!("expected wd or gwd, got `{v}`")),
        }
    ),
    key!(
        "tau",
        "graph edge threshold in [-1, 1], or none for raw similarities",
        |c| show_optional(c.train.got.tau),
        |c, v| c.train.got.tau = optional(v)?
    ),
    boolean!(
        "project_locals",
        "pass local features through the local projectors",
        train.project_locals
    ),
    // model
    simple!("d_model", "encoder width", train.model.d_model),
    simple!("n_layers", "encoder depth", train.model.n_layers),
    simple!("n_fused", "top layers with gated cross-attention", train.model.n_fused),
    simple!("n_heads", "attention heads", train.model.n_heads),
    simple!("d_ff", "feed-forward hidden width", train.model.d_ff),
    simple!(
        "vocab_size",
        "token vocabulary (defaults to the data vocabulary)",
        train.model.vocab_size
    ),
    simple!(
        "max_text_len",
        "longest caption the text encoder accepts",
        train.model.max_text_len
    ),
    simple!("mlm_prob", "masking probability", train.model.mlm_prob),
    simple!("dropout", "dropout rate inside the encoders", train.model.dropout),
    key!(
        "proj_dims",
        "projector widths, e.g. 64-64-32",
        |c| {
            let [a, b, d] = c.train.model.proj_dims;
            format!("{a}-{b}-{d}")
        },
        |c, v| c.train.model.proj_dims = parse_dims(v)?
    ),
    simple!("bn_eps", "batch-norm variance epsilon", train.model.bn_eps),
    // optimizer
    simple!(
        "lr_weights",
        "base learning rate of weight matrices",
        train.optim.base_lr_weights
    ),
    simple!(
        "lr_biases",
        "base learning rate of biases and norm parameters",
        train.optim.base_lr_biases
    ),
    simple!(
        "lr_multiplier",
        "extra factor on the base learning rates",
        train.optim.lr_multiplier
    ),
    key!(
        "multiplier_scope",
        "which base rates lr_multiplier scales: both or biases",
        |c| match c.train.optim.multiplier_scope {
            MultiplierScope::Both => "both".to_owned(),
            MultiplierScope::BiasesOnly => "biases".to_owned(),
        },
        |c, v| c.train.optim.multiplier_scope = match v {
            "both" => MultiplierScope::Both,
            "biases" => MultiplierScope::BiasesOnly,
            _ => return Err(format!("expected both or biases, got `{v}`")),
        }
    ),
    simple!("momentum", "LARS momentum", train.optim.momentum),
    simple!("weight_decay", "LARS weight decay", train.optim.weight_decay),
    simple!("warmup_epochs", "linear warmup length", train.optim.warmup_epochs),
    simple!(
        "end_lr_factor",
        "final learning rate as a fraction of base",
        train.optim.end_lr_factor
    ),
    key!(
        "trust_coefficient",
        "LARS trust coefficient, or none for plain momentum SGD",
        |c| show_optional(c.train.optim.trust_coefficient),
        |c, v| c.train.optim.trust_coefficient = optional(v)?
    ),
    simple!("lars_eps", "LARS denominator guard", train.optim.eps),
    boolean!(
        "exclude_bias_and_norm",
        "skip weight decay and trust scaling on biases and norm parameters",
        train.optim.exclude_bias_and_norm_from_decay
    ),
    // transport solvers
    key!(
        "wd_solver",
        "sinkhorn or ipot",
        |c| match c.train.ot.wd_solver {
            WdSolver::EntropicSinkhorn => "sinkhorn".to_owned(),
            WdSolver::Ipot => "ipot".to_owned(),
        },
        |c, v| c.train.ot.wd_solver = match v {
            "sinkhorn" => WdSolver::EntropicSinkhorn,
            "ipot" => WdSolver::Ipot,
            _ => return Err(format!("expected sinkhorn or ipot, got `{v}`")),
        }
    ),
    simple!("epsilon", "entropic regularization", train.ot.epsilon),
    simple!("max_iter", "scaling sweeps per entropic solve", train.ot.max_iter),
    simple!("tol", "marginal violation accepted as converged", train.ot.tol),
    simple!(
        "ipot_outer_iter",
        "proximal steps of the IPOT solver",
        train.ot.ipot_outer_iter
    ),
    simple!(
        "gw_outer_iter",
        "linearization steps of the GW solver",
        train.ot.gw_outer_iter
    ),
    key!(
        "gw_init",
        "GW starting coupling: uniform or jittered:SEED",
        |c| match c.train.ot.gw_init {
            GwInit::Uniform => "uniform".to_owned(),
            GwInit::Jittered { seed } => format!("jittered:{seed}"),
        },
        |c, v| c.train.ot.gw_init = match v.split_once(':') {
            None if v == "uniform" => GwInit::Uniform,
            Some(("jittered", s)) => GwInit::Jittered { seed: num(s)? },
            _ => return Err(format!("expected uniform or jittered:SEED, got `{v}`")),
        }
    ),
    key!(
        "gw_structural_cost",
        "absolute or squared edge discrepancy",
        |c| match c.train.ot.gw_structural_cost {
            StructuralCost::Absolute => "absolute".to_owned(),
            StructuralCost::Squared => "squared".to_owned(),
        },
        |c, v| c.train.ot.gw_structural_cost = match v {
            "absolute" => StructuralCost::Absolute,
            "squared" => StructuralCost::Squared,
            _ => return Err(format!("expected absolute or squared, got `{v}`")),
        }
    ),
    // Barlow Twins
    simple!(
        "lambda",
        "off-diagonal weight of the Barlow Twins loss",
        train.bt.lambda
    ),
    boolean!(
        "bt_centered",
        "standardize embeddings before correlating",
        train.bt.centered
    ),
    // synthetic data
    simple!("n_concepts", "concepts in the synthetic world", train.spec.n_concepts),
    simple!("n_attributes", "attributes per concept", train.spec.n_attributes),
    key!(
        "n_patches",
        "patches per image",
        |c| c.train.spec.n_patches.to_string(),
        |c, v| {
            c.train.spec.n_patches = num(v)?;
            c.train.model.n_patches = c.train.spec.n_patches;
        }
    ),
    simple!("n_tokens", "tokens per caption", train.spec.n_tokens),
    key!(
        "feature_dim",
        "patch feature width",
        |c| c.train.spec.feature_dim.to_string(),
        |c, v| {
            c.train.spec.feature_dim = num(v)?;
            c.train.model.patch_dim = c.train.spec.feature_dim;
        }
    ),
    simple!("noise_sigma", "patch feature noise", train.spec.noise_sigma),
    simple!(
        "duplicate_entity_rate",
        "probability that an image repeats its concepts with distinct attributes",
        train.spec.duplicate_entity_rate
    ),
    simple!("synonyms", "token ids per (concept, attribute)", train.spec.synonyms),
    simple!("n_filler", "filler token ids", train.spec.n_filler),
    simple!(
        "attribute_scale",
        "size of the attribute block in patch features",
        train.spec.attribute_scale
    ),
    simple!("data_seed", "seed of the synthetic world", train.spec.seed),
    // augmentation
    simple!(
        "augment_max_len",
        "caption length cap after insertions",
        train.augment.max_len
    ),
    view_op!("view1_jitter", "view 1 feature jitter sigma", 0, image.jitter_sigma),
    view_op!(
        "view1_patch_dropout",
        "view 1 patch dropout probability",
        0,
        image.patch_dropout
    ),
    view_op!(
        "view1_channel_mask",
        "view 1 channel mask probability",
        0,
        image.channel_mask
    ),
    view_op!("view1_swap", "view 1 token swap probability", 0, text.swap),
    view_op!("view1_deletion", "view 1 token deletion probability", 0, text.deletion),
    view_op!(
        "view1_insertion",
        "view 1 synonym insertion probability",
        0,
        text.insertion
    ),
    view_op!(
        "view1_replacement",
        "view 1 synonym replacement probability",
        0,
        text.replacement
    ),
    view_op!("view2_jitter", "view 2 feature jitter sigma", 1, image.jitter_sigma),
    view_op!(
        "view2_patch_dropout",
        "view 2 patch dropout probability",
        1,
        image.patch_dropout
    ),
    view_op!(
        "view2_channel_mask",
        "view 2 channel mask probability",
        1,
        image.channel_mask
    ),
    view_op!("view2_swap", "view 2 token swap probability", 1, text.swap),
    view_op!("view2_deletion", "view 2 token deletion probability", 1, text.deletion),
    view_op!(
        "view2_insertion",
        "view 2 synonym insertion probability",
        1,
        text.insertion
    ),
    view_op!(
        "view2_replacement",
        "view 2 synonym replacement probability",
        1,
        text.replacement
    ),
];

pub fn key(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

/// Builds configurations from defaults, files and overrides, in that order.
#[derive(Clone, Debug, Default)]
pub struct ConfigBuilder {
    cfg: RunConfig,
    explicit: BTreeSet<&'static str>,
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: &str, value: &str) -> Result<&mut Self> {
        let k = key(name).ok_or_else(|| Error::Usage(format!("unknown configuration key `{name}`")))?;
        (k.set)(&mut self.cfg, value.trim())
            .map_err(|reason| Error::Usage(format!("bad value for `{name}`: {reason}")))?;
        self.explicit.insert(k.name);
        Ok(self)
    }

    /// Applies every `key = value` line of `text`. `origin` names the source
    /// in error messages.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<&mut Self> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("{origin}:{}: expected `key = value`", n + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::Usage(format!("{origin}:{}: {e}", n + 1)))?;
        }
        Ok(self)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<&mut Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Fills derived keys that were not set explicitly and validates.
    pub fn build(&self) -> Result<RunConfig> {
        let mut cfg = self.cfg.clone();
        let t = &mut cfg.train;
        if !self.explicit.contains("vocab_size") {
            t.model.vocab_size = t.spec.vocabulary().size();
        }
        if !self.explicit.contains("augment_max_len") {
            t.augment.max_len = t.model.max_text_len;
        }
        t.validate()?;
        Ok(cfg)
    }
}

/// Parses a complete configuration from text.
pub fn parse(text: &str) -> Result<RunConfig> {
    ConfigBuilder::new().apply_text(text, "<config>")?.build()
}

/// Renders every key, one per line, in [`KEYS`] order.
pub fn render(cfg: &RunConfig) -> String {
    let mut out = String::new();
    for k in KEYS {
        out.push_str(k.name);
        out.push_str(" = ");
        out.push_str(&(k.get)(cfg));
        out.push('\n');
    }
    out
}

/// FNV-1a over the rendered training keys (the output directory excluded),
/// so checkpoints can be matched to the configuration that wrote them.
pub fn config_hash(cfg: &RunConfig) -> u64 {
    let mut h = fnv::FnvHasher::default();
    for k in KEYS.iter().filter(|k| k.name != "output_dir") {
        h.write(k.name.as_bytes());
        h.write(b"=");
        h.write((k.get)(cfg).as_bytes());
        h.write(b"\n");
    }
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_roundtrips() {
        let cfg = RunConfig::default();
        let back = parse(&render(&cfg)).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(config_hash(&back), config_hash(&cfg));
    }

    #[test]
    fn every_key_is_listed_once() {
        let names: BTreeSet<_> = KEYS.iter().map(|k| k.name).collect();
        assert_eq!(names.len(), KEYS.len());
        let text = render(&RunConfig::default());
        assert_eq!(text.lines().count(), KEYS.len());
    }

    #[test]
    fn comments_blanks_and_overrides() {
        let mut b = ConfigBuilder::new();
        b.apply_text("# a run\n\nw_got = 50   # halved\ngamma=0.3\n", "t")
            .unwrap();
        b.set("gamma", "0.4").unwrap();
        let cfg = b.build().unwrap();
        assert_eq!(cfg.train.w_got, 50.0);
        assert_eq!(cfg.train.got.gamma, 0.4);
    }

    #[test]
    fn enumerated_and_optional_values() {
        let mut b = ConfigBuilder::new();
        b.apply_text(
            "tau = none\ntrust_coefficient = none\nwd_solver = ipot\ngw_init = jittered:7\n\
             gamma_convention = gwd\nproj_dims = 16-16-8\ntasks = MLM,ITM\n",
            "t",
        )
        .unwrap();
        let cfg = b.build().unwrap();
        assert_eq!(cfg.train.got.tau, None);
        assert_eq!(cfg.train.optim.trust_coefficient, None);
        assert_eq!(cfg.train.ot.wd_solver, WdSolver::Ipot);
        assert_eq!(cfg.train.ot.gw_init, GwInit::Jittered { seed: 7 });
        assert_eq!(cfg.train.got.convention, GammaConvention::GammaOnGwd);
        assert_eq!(cfg.train.model.proj_dims, [16, 16, 8]);
        assert!(!cfg.train.tasks.btgot);
        assert_eq!(parse(&render(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn derived_keys_follow_the_data() {
        let cfg = parse("synonyms = 1\nn_patches = 6\nfeature_dim = 12\nmax_text_len = 10\n").unwrap();
        assert_eq!(cfg.train.model.vocab_size, cfg.train.spec.vocabulary().size());
        assert_eq!((cfg.train.model.n_patches, cfg.train.model.patch_dim), (6, 12));
        assert_eq!(cfg.train.augment.max_len, 10);
    }

    #[test]
    fn errors_name_the_line() {
        let e = parse("epochs = 3\nbogus = 1\n").unwrap_err().to_string();
        assert!(e.contains(":2:") && e.contains("bogus"), "{e}");
        let e = parse("epochs = three\n").unwrap_err().to_string();
        assert!(e.contains("epochs"), "{e}");
        assert!(parse("no equals sign\n").is_err());
        assert!(parse("w_got = -1\n").is_err());
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(config_hash(&a), config_hash(&b));
        b.train.w_got = 99.0;
        assert_ne!(config_hash(&a), config_hash(&b));
    }
}
