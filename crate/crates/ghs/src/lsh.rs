//! Sign-random-projection hashing, the classical baseline the trained codes
//! are benchmarked against.
//!
//! Bit j of a point is the sign of its mean-centered projection onto a fixed
//! Gaussian direction: +1 for a non-negative projection, -1 otherwise. Two
//! points collide on a bit with probability `1 - theta / pi` where `theta` is
//! the angle between their centered vectors.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::code::CodeMatrix;
use crate::error::{GhsError, Result};

/// A fitted sign-random-projection hasher.
#[derive(Debug, Clone, PartialEq)]
pub struct LshModel {
    /// Column mean of the training data, length `D`.
    pub mean: DVector<f64>,
    /// Gaussian projection directions, `D x c` (one column per bit).
    pub projection: DMatrix<f64>,
}

impl LshModel {
    pub fn input_dim(&self) -> usize {
        self.projection.nrows()
    }

    pub fn bits(&self) -> usize {
        self.projection.ncols()
    }
}

/// Draws `bits` Gaussian directions and records the training mean.
///
/// Requires a non-empty training set and `bits >= 1`.
pub fn fit_lsh(x: &DMatrix<f64>, bits: usize, seed: u64) -> Result<LshModel> {
    if x.nrows() == 0 {
        return Err(GhsError::EmptyInput("lsh training data"));
    }
    if bits == 0 {
        return Err(GhsError::InvalidArgument("bit count must be >= 1".into()));
    }
    let mean = x.row_mean().transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Row-major fill order: the draw sequence is part of the reproducibility
    // contract for a given seed.
    let d = x.ncols();
    let mut projection = DMatrix::zeros(d, bits);
    for i in 0..d {
        for j in 0..bits {
            projection[(i, j)] = rng.sample(StandardNormal);
        }
    }
    Ok(LshModel { mean, projection })
}

/// Encodes points: bit j is +1 iff `(x_i - mean) . projection_j >= 0`
/// (a zero projection maps to +1).
pub fn lsh_encode(model: &LshModel, x: &DMatrix<f64>) -> Result<CodeMatrix> {
    if x.ncols() != model.input_dim() {
        return Err(GhsError::DimensionMismatch {
            context: "lsh encode input columns",
            expected: model.input_dim(),
            got: x.ncols(),
        });
    }
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= model.mean.transpose();
    }
    let projected = centered * &model.projection;
    Ok(CodeMatrix::from_fn(x.nrows(), model.bits(), |i, j| {
        projected[(i, j)] >= 0.0
    }))
}
