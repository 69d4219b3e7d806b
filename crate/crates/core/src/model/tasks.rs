use alloc::vec::Vec;

use rand::Rng as _;

use crate::data::MASK_ID;
use crate::error::{Error, Result};
use crate::rng::{rng_from, stream};
use crate::tape::{Tape, Var};

/// Replaces each non-MASK position by [`MASK_ID`] independently with
/// probability `prob`. Returns the masked ids and the masked positions.
pub fn mlm_mask(token_ids: &[usize], prob: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::precondition(
            "mlm_mask",
            alloc::format!("probability {prob} outside (0, 1)"),
        ));
    }
    let mut rng = rng_from(seed, &[stream::MASK]);
    let mut masked = token_ids.to_vec();
    let mut positions = Vec::new();
    for (i, id) in masked.iter_mut().enumerate() {
        if *id != MASK_ID && rng.random_bool(prob) {
            *id = MASK_ID;
            positions.push(i);
        }
    }
    Ok((masked, positions))
}

/// Masked-token loss and how many positions it covers.
#[derive(Clone, Copy, Debug)]
pub struct MlmLoss {
    pub loss: Var,
    pub n_masked: usize,
}

/// Mean cross-entropy over the masked positions of every sample. With no
/// masked position at all the loss is a constant 0 and `n_masked` is 0.
pub fn mlm_loss(
    tape: &mut Tape,
    logits: &[Var],
    original_ids: &[&[usize]],
    positions: &[Vec<usize>],
) -> Result<MlmLoss> {
    if logits.len() != original_ids.len() || logits.len() != positions.len() {
        return Err(Error::precondition("mlm_loss", "per-sample inputs differ in length"));
    }
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for ((&l, ids), pos) in logits.iter().zip(original_ids).zip(positions) {
        if pos.is_empty() {
            continue;
        }
        if let Some(&p) = pos.iter().find(|&&p| p >= ids.len()) {
            return Err(Error::precondition(
                "mlm_loss",
                alloc::format!("masked position {p} out of range"),
            ));
        }
        rows.push(tape.gather_rows(l, pos)?);
        targets.extend(pos.iter().map(|&p| ids[p]));
    }
    if rows.is_empty() {
        return Ok(MlmLoss {
            loss: tape.leaf(crate::Matrix::scalar(0.0)),
            n_masked: 0,
        });
    }
    let stacked = tape.concat_rows(&rows)?;
    Ok(MlmLoss {
        loss: tape.cross_entropy(stacked, &targets)?,
        n_masked: targets.len(),
    })
}

/// Mean binary cross-entropy of `B × 1` matching logits; label 1 marks a
/// matched pair, 0 a mismatched one.
pub fn itm_loss(tape: &mut Tape, logits: Var, labels: &[f64]) -> Result<Var> {
    if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
        return Err(Error::precondition("itm_loss", "labels must be 0 or 1"));
    }
    tape.bce_with_logits(logits, labels)
}
