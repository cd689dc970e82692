//! Satellite constellations: the geometric half of the encoder.
//!
//! A constellation is a set of `c` satellite points in the embedded space
//! together with one distance threshold per satellite. A point encodes to
//! bit j = -1 when it lies within the threshold distance of satellite j and
//! +1 otherwise, so each bit is a sphere indicator. Thresholds are fit to the
//! per-satellite median distance over a training set, which balances every
//! bit up to ties.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::code::CodeMatrix;
use crate::error::{GhsError, Result};
use crate::linalg::median;

/// A contiguous block of satellite indices sharing one rigid rotation during
/// data-dependent training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Group {
    pub start: usize,
    pub len: usize,
}

/// Trained encoder geometry: satellites (rows of a `c x d` matrix), one
/// threshold per satellite, the group partition used in training, the sphere
/// radius `r_s` the satellites were constrained to, and the descriptive
/// bits-per-dimension ratio `rho = c / (d + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub satellites: DMatrix<f64>,
    pub thresholds: DVector<f64>,
    pub groups: Vec<Group>,
    pub r_s: f64,
    pub rho: f64,
}

impl Constellation {
    /// Number of code bits (= satellites).
    pub fn bits(&self) -> usize {
        self.satellites.nrows()
    }

    /// Dimension of the embedded space the satellites live in.
    pub fn dim(&self) -> usize {
        self.satellites.ncols()
    }

    /// Checks internal consistency: thresholds per satellite, and groups that
    /// partition `0..bits` contiguously in order.
    pub fn validate(&self) -> Result<()> {
        let c = self.bits();
        if self.thresholds.len() != c {
            return Err(GhsError::DimensionMismatch {
                context: "constellation thresholds",
                expected: c,
                got: self.thresholds.len(),
            });
        }
        let mut cursor = 0usize;
        for g in &self.groups {
            if g.start != cursor || g.len == 0 {
                return Err(GhsError::InvalidArgument(format!(
                    "groups must partition 0..{c} contiguously; found start={} len={} at offset {cursor}",
                    g.start, g.len
                )));
            }
            cursor += g.len;
        }
        if cursor != c {
            return Err(GhsError::InvalidArgument(format!(
                "groups cover {cursor} of {c} satellites"
            )));
        }
        Ok(())
    }

    /// Encodes embedded points: bit j is -1 iff the point is within
    /// `thresholds[j]` of satellite j (ties encode as -1).
    pub fn encode(&self, y: &DMatrix<f64>) -> Result<CodeMatrix> {
        let dist = d2s(y, &self.satellites)?;
        Ok(encode_from_distances(&dist, &self.thresholds))
    }
}

/// Euclidean distance from every point (row of `y`) to every satellite
/// (row of `satellites`); result is `n x c`.
///
/// Computed as explicit per-pair sums, so results are bit-identical to a
/// naive loop regardless of threading.
pub fn d2s(y: &DMatrix<f64>, satellites: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, d) = (y.nrows(), y.ncols());
    let c = satellites.nrows();
    if satellites.ncols() != d {
        return Err(GhsError::DimensionMismatch {
            context: "satellite dimension",
            expected: d,
            got: satellites.ncols(),
        });
    }
    if n == 0 || c == 0 {
        return Err(GhsError::EmptyInput("distance table needs points and satellites"));
    }
    // Transposed copies make each point/satellite a contiguous slice.
    let yt = y.transpose();
    let st = satellites.transpose();
    let ys = yt.as_slice();
    let ss = st.as_slice();

    let mut out = vec![0.0f64; n * c];
    out.par_chunks_mut(c).enumerate().for_each(|(i, row)| {
        let yi = &ys[i * d..(i + 1) * d];
        for (j, slot) in row.iter_mut().enumerate() {
            let sj = &ss[j * d..(j + 1) * d];
            let mut acc = 0.0;
            for k in 0..d {
                let t = yi[k] - sj[k];
                acc += t * t;
            }
            *slot = acc.sqrt();
        }
    });
    Ok(DMatrix::from_row_slice(n, c, &out))
}

/// Per-satellite median of a precomputed `n x c` distance table.
pub fn thresholds_from_distances(dist: &DMatrix<f64>) -> Result<DVector<f64>> {
    let c = dist.ncols();
    let mut out = DVector::zeros(c);
    for j in 0..c {
        out[j] = median(dist.column(j).as_slice())?;
    }
    Ok(out)
}

/// Fits thresholds for `satellites` against training points `y`: the median
/// of each satellite's distance column.
pub fn fit_thresholds(y: &DMatrix<f64>, satellites: &DMatrix<f64>) -> Result<DVector<f64>> {
    thresholds_from_distances(&d2s(y, satellites)?)
}

/// Encodes from a precomputed distance table: -1 (false) iff `dist <= thr`.
pub fn encode_from_distances(dist: &DMatrix<f64>, thresholds: &DVector<f64>) -> CodeMatrix {
    let (n, c) = (dist.nrows(), dist.ncols());
    debug_assert_eq!(thresholds.len(), c);
    CodeMatrix::from_fn(n, c, |i, j| dist[(i, j)] > thresholds[j])
}

/// Number of exact threshold ties per satellite: entries of the distance
/// column equal to the fitted threshold. Bit balance is exact up to ties.
pub fn threshold_ties(dist: &DMatrix<f64>, thresholds: &DVector<f64>) -> Vec<usize> {
    (0..dist.ncols())
        .map(|j| {
            dist.column(j)
                .iter()
                .filter(|&&v| v == thresholds[j])
                .count()
        })
        .collect()
}
