//! Per-forward-pass similarity graphs over local features.
//!
//! Nodes are feature rows; an edge joins two nodes when their cosine
//! similarity reaches the threshold. Sub-threshold similarities are zeroed
//! rather than removed, so graphs over the same node count always have the
//! same shape.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::ot::intra_similarity;

pub const DEFAULT_TAU: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureGraph {
    pub nodes: Matrix,
    /// `cos(x_i, x_j)` where it reaches the threshold, otherwise 0. Unit diagonal.
    pub similarity: Matrix,
    /// 1 where `similarity` is nonzero, otherwise 0.
    pub adjacency: Matrix,
    pub threshold: f64,
}

impl FeatureGraph {
    pub fn edge_count(&self) -> usize {
        let n = self.adjacency.rows();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i < j && self.adjacency[(i, j)] != 0.0)
            .count()
    }
}

/// Zeroes every off-diagonal entry of a similarity matrix below `tau`.
pub fn threshold_similarity(similarity: &Matrix, tau: f64) -> Matrix {
    Matrix::from_fn(similarity.rows(), similarity.cols(), |i, j| {
        let s = similarity[(i, j)];
        if i == j || s >= tau {
            s
        } else {
            0.0
        }
    })
}

/// Builds the thresholded cosine-similarity graph of `features`. Recomputed
/// from scratch on every call.
pub fn build_graph(features: &Matrix, tau: f64) -> Result<FeatureGraph> {
    if !(-1.0..=1.0).contains(&tau) {
        return Err(Error::precondition(
            "build_graph",
            alloc::format!("tau {tau} outside [-1, 1]"),
        ));
    }
    let raw = intra_similarity(features)?;
    let similarity = threshold_similarity(&raw, tau);
    let adjacency = similarity.map(|s| if s != 0.0 { 1.0 } else { 0.0 });
    Ok(FeatureGraph {
        nodes: features.clone(),
        similarity,
        adjacency,
        threshold: tau,
    })
}
