//! Barlow Twins redundancy-reduction loss over paired embedding batches, and
//! its four-pair image/text extension.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tape::{Tape, Var};

/// Which augmented view of which modality a batch holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum View {
    Image,
    ImagePrime,
    Text,
    TextPrime,
}

/// `B×D` projected global embeddings of one view.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingBatch {
    z: Matrix,
    view: View,
}

impl EmbeddingBatch {
    pub fn new(z: Matrix, view: View) -> Result<Self> {
        if z.rows() < 2 {
            return Err(Error::precondition(
                "EmbeddingBatch",
                alloc::format!("batch size {} < 2", z.rows()),
            ));
        }
        if !z.is_finite() {
            return Err(Error::NonFinite { op: "EmbeddingBatch" });
        }
        Ok(Self { z, view })
    }

    pub fn z(&self) -> &Matrix {
        &self.z
    }

    pub fn view(&self) -> View {
        self.view
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BtConfig {
    /// Weight of the off-diagonal (redundancy) term.
    pub lambda: f64,
    /// Standardize each dimension over the batch before correlating. When
    /// false, columns are only scaled to unit norm (uncentered correlation).
    pub centered: bool,
}

impl Default for BtConfig {
    fn default() -> Self {
        Self {
            lambda: 0.005,
            centered: true,
        }
    }
}

impl BtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(alloc::format!(
                "bt lambda must be positive, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Records `C = ẑAᵀ ẑB` on the tape.
pub fn cross_correlation_on(tape: &mut Tape, za: Var, zb: Var, centered: bool) -> Result<Var> {
    let (sa, sb) = (tape.shape(za), tape.shape(zb));
    if sa != sb {
        return Err(Error::Dimension {
            op: "cross_correlation",
            left: sa,
            right: sb,
        });
    }
    if sa.0 < 2 {
        return Err(Error::precondition(
            "cross_correlation",
            alloc::format!("batch size {} < 2", sa.0),
        ));
    }
    let (a, b) = if centered {
        (tape.batch_standardize(za)?, tape.batch_standardize(zb)?)
    } else {
        (za, zb)
    };
    let a = tape.col_normalize(a)?;
    let b = tape.col_normalize(b)?;
    let at = tape.transpose(a)?;
    tape.matmul(at, b)
}

/// Records `Σ_i (1 - C_ii)² + λ Σ_{i≠j} C_ij²` on the tape.
pub fn bt_loss_on(tape: &mut Tape, c: Var, lambda: f64) -> Result<Var> {
    let (d, d2) = tape.shape(c);
    if d != d2 {
        return Err(Error::precondition(
            "bt_loss",
            alloc::format!("C must be square, got {d}x{d2}"),
        ));
    }
    let eye = tape.leaf(Matrix::identity(d));
    let diff = tape.sub(c, eye)?;
    let sq = tape.mul(diff, diff)?;
    let weights = tape.leaf(Matrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { lambda }));
    let weighted = tape.mul(sq, weights)?;
    tape.sum_all(weighted)
}

/// Sum of the pair losses over (I, I′), (T, T′), (I, T′) and (I′, T).
pub fn multimodal_bt_on(tape: &mut Tape, i: Var, i2: Var, t: Var, t2: Var, cfg: &BtConfig) -> Result<Var> {
    let shape = tape.shape(i);
    for v in [i2, t, t2] {
        if tape.shape(v) != shape {
            return Err(Error::Dimension {
                op: "multimodal_bt",
                left: shape,
                right: tape.shape(v),
            });
        }
    }
    let mut total: Option<Var> = None;
    for (a, b) in [(i, i2), (t, t2), (i, t2), (i2, t)] {
        let c = cross_correlation_on(tape, a, b, cfg.centered)?;
        let l = bt_loss_on(tape, c, cfg.lambda)?;
        total = Some(match total {
            Some(acc) => tape.add(acc, l)?,
            None => l,
        });
    }
    Ok(total.expect("four pairs"))
}

pub fn cross_correlation(za: &EmbeddingBatch, zb: &EmbeddingBatch, cfg: &BtConfig) -> Result<Matrix> {
    let mut tape = Tape::new();
    let a = tape.leaf(za.z.clone());
    let b = tape.leaf(zb.z.clone());
    let c = cross_correlation_on(&mut tape, a, b, cfg.centered)?;
    Ok(tape.value(c).clone())
}

/// `(invariance, redundancy)`: `Σ(1 - C_ii)²` and `Σ_{i≠j} C_ij²`, unweighted.
pub fn bt_terms(c: &Matrix) -> Result<(f64, f64)> {
    if !c.is_square() {
        return Err(Error::precondition(
            "bt_loss",
            alloc::format!("C must be square, got {:?}", c.shape()),
        ));
    }
    let mut inv = 0.0;
    let mut red = 0.0;
    for i in 0..c.rows() {
        for j in 0..c.cols() {
            if i == j {
                inv += (1.0 - c[(i, j)]) * (1.0 - c[(i, j)]);
            } else {
                red += c[(i, j)] * c[(i, j)];
            }
        }
    }
    Ok((inv, red))
}

pub fn bt_loss(c: &Matrix, cfg: &BtConfig) -> Result<f64> {
    let (inv, red) = bt_terms(c)?;
    Ok(inv + cfg.lambda * red)
}

pub fn multimodal_bt(
    i: &EmbeddingBatch,
    i2: &EmbeddingBatch,
    t: &EmbeddingBatch,
    t2: &EmbeddingBatch,
    cfg: &BtConfig,
) -> Result<f64> {
    let mut tape = Tape::new();
    let [a, b, c, d] = [i, i2, t, t2].map(|e| tape.leaf(e.z.clone()));
    let l = multimodal_bt_on(&mut tape, a, b, c, d, cfg)?;
    Ok(tape.value(l).item())
}
