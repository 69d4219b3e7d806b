//! Graph optimal transport alignment between patch and token features.
//!
//! The crate is `no_std` (with `alloc`) and holds every numerical piece:
//! dense matrices with a small reverse-mode tape, Wasserstein and
//! Gromov-Wasserstein solvers, thresholded similarity graphs, the
//! multi-modal Barlow Twins objective, a toy dual encoder with gated
//! cross-attention fusion, LARS with a warmup+cosine schedule, a synthetic
//! paired-data generator and the training step that ties them together.
//!
//! File formats, run directories and the command line live in the
//! `gotalign` companion crate.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is how validation rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod bt;
pub mod data;
pub mod error;
pub mod graph;
pub mod matrix;
pub mod model;
pub mod optim;
pub mod ot;
pub mod rng;
pub mod tape;
pub mod train;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use tape::{Gradients, Tape, Var};
