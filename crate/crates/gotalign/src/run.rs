//! Training runs on disk, evaluation of checkpoints and ablation sweeps.
//!
//! A run directory holds:
//!
//! ```text
//! config.txt                 full key = value snapshot
//! metrics.csv                one row per step (see metrics::HEADER)
//! eval.csv                   alignment metrics after every epoch
//! checkpoints/epoch-NNNN.ckpt
//! heatmaps/eval-K.{pgm,csv}  final joint plans of the first eval samples
//! summary.txt                final accuracy, chance level and plan entropy
//! ```

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use gotalign_core::train::{evaluate_alignment, EvalReport, StepReport, TrainConfig, Trainer};

use crate::checkpoint::{self, Checkpoint};
use crate::config::{self, ConfigBuilder, RunConfig};
use crate::error::{Error, Result};
use crate::heatmap;
use crate::metrics;

/// Eval samples rendered as heatmaps at the end of a run.
pub const HEATMAP_SAMPLES: usize = 4;

pub struct RunSummary {
    pub dir: PathBuf,
    pub steps: usize,
    pub last: Option<StepReport>,
    pub eval: EvalReport,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn append(path: &Path, line: &str) -> Result<()> {
    let mut f = fs::OpenOptions::new()
        .append(true)
        .create(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))
}

/// Keeps the header and the rows whose leading step/epoch field is below
/// `limit`, so a resumed run rewrites exactly the rows it repeats.
fn truncate_log(path: &Path, header: &str, limit: usize) -> Result<()> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut out = format!("{header}\n");
    for line in text.lines().skip(1) {
        let first = line.split(',').next().and_then(|x| x.parse::<usize>().ok());
        if first.is_some_and(|s| s < limit) {
            out.push_str(line);
            out.push('\n');
        }
    }
    write_file(path, out)
}

pub fn checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join("checkpoints").join(format!("epoch-{epoch:04}.ckpt"))
}

/// Trains `cfg` into its output directory, optionally continuing from a
/// checkpoint written under the same configuration. With `log` set, one
/// progress line per epoch goes to stderr.
pub fn train(cfg: &RunConfig, resume: Option<&Path>, log: bool) -> Result<RunSummary> {
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(dir.join("checkpoints")).map_err(|e| Error::io(&dir, e))?;
    write_file(&dir.join("config.txt"), config::render(cfg))?;
    let hash = config::config_hash(cfg);

    let mut trainer = match resume {
        None => Trainer::new(cfg.train.clone())?,
        Some(path) => {
            let ck = checkpoint::load(path, &cfg.train.model)?;
            if ck.config_hash != hash {
                return Err(Error::Usage(format!(
                    "{} was written under a different configuration (hash {:016x}, expected {hash:016x})",
                    path.display(),
                    ck.config_hash
                )));
            }
            Trainer::resume(cfg.train.clone(), ck.params, ck.state, ck.step)?
        }
    };
    let spe = cfg.train.steps_per_epoch();
    let metrics_path = dir.join("metrics.csv");
    let eval_path = dir.join("eval.csv");
    truncate_log(&metrics_path, metrics::HEADER, trainer.step)?;
    truncate_log(&eval_path, metrics::EVAL_HEADER, trainer.step / spe)?;

    let mut last = None;
    while !trainer.is_finished() {
        let report = trainer.train_step()?;
        append(&metrics_path, &metrics::row(&report, spe))?;
        last = Some(report);
        if trainer.step % spe == 0 {
            let epoch = trainer.step / spe;
            checkpoint::save(
                &checkpoint_path(&dir, epoch),
                &Checkpoint {
                    config_hash: hash,
                    step: trainer.step,
                    params: trainer.params.clone(),
                    state: trainer.state.clone(),
                },
            )?;
            let ev = trainer.evaluate()?;
            append(
                &eval_path,
                &format!(
                    "{},{},{},{},{}",
                    epoch - 1,
                    trainer.step,
                    ev.accuracy,
                    ev.chance,
                    ev.mean_entropy
                ),
            )?;
            if log {
                eprintln!(
                    "epoch {epoch}/{}: total {:.4} accuracy {:.3} (chance {:.3})",
                    cfg.train.epochs, report.total, ev.accuracy, ev.chance
                );
            }
        }
    }

    let eval = trainer.evaluate()?;
    for (k, plan) in eval.plans.iter().take(HEATMAP_SAMPLES).enumerate() {
        heatmap::export_heatmap(&plan.coupling, &dir.join("heatmaps"), &format!("eval-{k}"))?;
    }
    write_file(&dir.join("summary.txt"), summary_text(&eval, trainer.step))?;
    Ok(RunSummary {
        dir,
        steps: trainer.step,
        last,
        eval,
    })
}

pub fn summary_text(ev: &EvalReport, steps: usize) -> String {
    format!(
        "steps = {steps}\naccuracy = {}\nchance = {}\nratio_to_chance = {}\nmean_entropy = {}\n",
        ev.accuracy,
        ev.chance,
        ev.accuracy / ev.chance,
        ev.mean_entropy
    )
}

/// Alignment metrics of a saved model on the held-out set of `cfg`.
pub fn evaluate_checkpoint(cfg: &TrainConfig, path: &Path) -> Result<EvalReport> {
    let ck = checkpoint::load(path, &cfg.model)?;
    let trainer = Trainer::resume(cfg.clone(), ck.params, ck.state, ck.step)?;
    Ok(evaluate_alignment(&trainer.params, &trainer.eval_set(), cfg)?)
}

/// Keys an ablation may sweep.
pub const SWEEPABLE: [&str; 4] = ["w_got", "proj_dims", "gamma", "tau"];

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub key: String,
    pub value: String,
    pub accuracy: f64,
    pub chance: f64,
    pub mean_entropy: f64,
    pub final_total: f64,
}

pub const ABLATION_HEADER: &str = "key,value,accuracy,chance,mean_entropy,final_total";

impl AblationRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.key, self.value, self.accuracy, self.chance, self.mean_entropy, self.final_total
        )
    }
}

/// Parses `key=v1,v2,...` into the key and its values.
pub fn parse_sweep(spec: &str) -> Result<(String, Vec<String>)> {
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("sweep `{spec}` is not key=v1,v2,...")))?;
    let key = key.trim();
    if !SWEEPABLE.contains(&key) {
        return Err(Error::Usage(format!(
            "cannot sweep `{key}`; choose one of {}",
            SWEEPABLE.join(", ")
        )));
    }
    let values: Vec<String> = values
        .split(',')
        .map(|v| v.trim().to_owned())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(Error::Usage("empty sweep".into()));
    }
    Ok((key.to_owned(), values))
}

/// Runs training to completion in memory and evaluates.
pub fn train_and_evaluate(cfg: &TrainConfig) -> Result<(Option<StepReport>, EvalReport)> {
    let mut t = Trainer::new(cfg.clone())?;
    let mut last = None;
    while !t.is_finished() {
        last = Some(t.train_step()?);
    }
    Ok((last, t.evaluate()?))
}

/// One full train + evaluate per value of `key`, all under the base
/// configuration's seed.
pub fn ablate(base: &ConfigBuilder, key: &str, values: &[String]) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(values.len());
    for v in values {
        let mut b = base.clone();
        b.set(key, v)?;
        let cfg = b.build()?;
        let named = |e: Error| match e {
            Error::Core(source) => Error::Setting {
                setting: format!("{key}={v}"),
                source,
            },
            other => other,
        };
        let (last, ev) = train_and_evaluate(&cfg.train).map_err(named)?;
        rows.push(AblationRow {
            key: key.to_owned(),
            value: v.clone(),
            accuracy: ev.accuracy,
            chance: ev.chance,
            mean_entropy: ev.mean_entropy,
            final_total: last.map_or(f64::NAN, |r| r.total),
        });
    }
    Ok(rows)
}

pub fn write_ablation(path: &Path, rows: &[AblationRow]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut out = format!("{ABLATION_HEADER}\n");
    for r in rows {
        out.push_str(&r.csv());
        out.push('\n');
    }
    write_file(path, out)
}
