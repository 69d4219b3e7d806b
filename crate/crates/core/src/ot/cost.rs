use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

pub(crate) fn nonzero_norms(x: &Matrix, op: &'static str) -> Result<Vec<f64>> {
    let norms = x.row_norms();
    if let Some(row) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::ZeroNorm { op, row });
    }
    Ok(norms)
}

/// `S_ij = cos(x_i, y_j)`, clamped to `[-1, 1]`.
pub fn cosine_similarity_matrix(x: &Matrix, y: &Matrix) -> Result<Matrix> {
    if x.cols() != y.cols() {
        return Err(Error::Dimension {
            op: "cosine_similarity_matrix",
            left: x.shape(),
            right: y.shape(),
        });
    }
    let nx = nonzero_norms(x, "cosine_similarity_matrix")?;
    let ny = nonzero_norms(y, "cosine_similarity_matrix")?;
    Ok(Matrix::from_fn(x.rows(), y.rows(), |i, j| {
        (dot(x.row(i), y.row(j)) / (nx[i] * ny[j])).clamp(-1.0, 1.0)
    }))
}

/// Cosine distance `c_ij = 1 - cos(x_i, y_j)`, every entry in `[0, 2]`.
pub fn cosine_cost_matrix(x: &Matrix, y: &Matrix) -> Result<Matrix> {
    Ok(cosine_similarity_matrix(x, y)?.map(|s| 1.0 - s))
}

/// Pairwise cosine similarity within one point set. Exactly symmetric with
/// a unit diagonal.
pub fn intra_similarity(x: &Matrix) -> Result<Matrix> {
    let norms = nonzero_norms(x, "intra_similarity")?;
    let n = x.rows();
    let mut s = Matrix::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            let v = (dot(x.row(i), x.row(j)) / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn cost_examples() {
        let x = m(&[&[1.0, 0.0]]);
        assert_eq!(cosine_cost_matrix(&x, &x).unwrap().item(), 0.0);
        assert_eq!(cosine_cost_matrix(&x, &m(&[&[0.0, 1.0]])).unwrap().item(), 1.0);
        assert_eq!(cosine_cost_matrix(&x, &m(&[&[-1.0, 0.0]])).unwrap().item(), 2.0);
        // identical but scaled vectors
        let c = cosine_cost_matrix(&m(&[&[0.3, -1.2, 2.0]]), &m(&[&[0.6, -2.4, 4.0]])).unwrap();
        assert!(c.item().abs() < 1e-15);
    }

    #[test]
    fn zero_row_is_named() {
        let x = m(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let err = cosine_cost_matrix(&x, &x).unwrap_err();
        assert_eq!(
            err,
            Error::ZeroNorm {
                op: "cosine_similarity_matrix",
                row: 1
            }
        );
        assert!(matches!(intra_similarity(&x), Err(Error::ZeroNorm { row: 1, .. })));
    }

    #[test]
    fn intra_examples() {
        let rep = m(&[&[0.5, 2.0], &[0.5, 2.0], &[0.5, 2.0]]);
        let s = intra_similarity(&rep).unwrap();
        assert!(s.data().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let orth = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(intra_similarity(&orth).unwrap(), Matrix::identity(2));
    }

    #[test]
    fn intra_is_exactly_symmetric() {
        let x = Matrix::from_fn(5, 3, |r, c| libm::sin((r * 3 + c) as f64 * 1.7) + 0.1);
        let s = intra_similarity(&x).unwrap();
        assert_eq!(s, s.transpose());
        for i in 0..5 {
            assert_eq!(s[(i, i)], 1.0);
        }
        // swapped-argument recomputation
        let full = cosine_similarity_matrix(&x, &x).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert!((s[(i, j)] - full[(j, i)]).abs() < 1e-15);
                }
            }
        }
    }
}
