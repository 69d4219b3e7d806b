//! `metrics.csv`: one row per optimizer step.
//!
//! Columns: `step` (0-based), `epoch` (0-based), `lr_weights` and
//! `lr_biases` (the rates used by that step), the loss components `bt`,
//! `got`, `wd`, `gwd`, `mlm`, `itm` (unweighted; `got` already mixes `wd` and
//! `gwd` with gamma), and `total = bt + w_got·got + mlm + itm`. Floats are
//! written in shortest round-trip form.

use std::fmt::Write as _;

use gotalign_core::train::StepReport;

pub const HEADER: &str = "step,epoch,lr_weights,lr_biases,bt,got,wd,gwd,mlm,itm,total";

pub fn row(r: &StepReport, steps_per_epoch: usize) -> String {
    let mut s = String::new();
    write!(
        s,
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.step,
        r.step / steps_per_epoch.max(1),
        r.lr.weights,
        r.lr.biases,
        r.bt,
        r.got,
        r.wd,
        r.gwd,
        r.mlm,
        r.itm,
        r.total
    )
    .unwrap();
    s
}

/// Header for the per-epoch evaluation log `eval.csv`.
pub const EVAL_HEADER: &str = "epoch,step,accuracy,chance,mean_entropy";
