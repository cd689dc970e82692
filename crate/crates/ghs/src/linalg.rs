//! Shared numeric kernels: medians, symmetric eigendecomposition, thin SVD,
//! and a numerically careful quadratic solver.
//!
//! The decompositions delegate to nalgebra; this module pins down the
//! contracts the rest of the crate relies on (descending order, symmetry
//! validation, deterministic tie handling) and keeps those guarantees in one
//! place.

use nalgebra::{DMatrix, DVector};

use crate::error::{GhsError, Result};

/// Median of a finite sample.
///
/// For even lengths this is the mean of the two middle order statistics, so
/// the result need not be an element of the input. Runs in O(n) via
/// selection rather than a full sort.
///
/// Errors with [`GhsError::EmptyInput`] on an empty slice.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(GhsError::EmptyInput("median of an empty sample"));
    }
    let mut v = values.to_vec();
    let n = v.len();
    let mid = n / 2;
    let (_, &mut upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        Ok(upper)
    } else {
        // The lower middle is the maximum of the left partition.
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(0.5 * (lower + upper))
    }
}

/// Top-`k` eigenpairs of a symmetric matrix, eigenvalues in descending order.
///
/// Returns `(eigenvalues, eigenvectors)` where `eigenvectors` is `n x k` with
/// orthonormal columns matching the eigenvalue order. Ties keep a stable,
/// deterministic order. Eigenvector signs are whatever the backend produced;
/// callers that need a reproducible sign fix it themselves.
///
/// Errors: non-square input, `k` outside `1..=n`, or asymmetry beyond 1e-10.
pub fn sym_eig_topk(a: &DMatrix<f64>, k: usize) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(GhsError::DimensionMismatch {
            context: "sym_eig_topk: square matrix required",
            expected: n,
            got: a.ncols(),
        });
    }
    if k == 0 || k > n {
        return Err(GhsError::InvalidArgument(format!(
            "eigenpair count {k} outside 1..={n}"
        )));
    }
    let mut max_asymmetry = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_asymmetry = max_asymmetry.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if max_asymmetry > 1e-10 {
        return Err(GhsError::NotSymmetric { max_asymmetry });
    }

    let eig = nalgebra::SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let values = DVector::from_fn(k, |r, _| eig.eigenvalues[order[r]]);
    let vectors = DMatrix::from_fn(n, k, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Thin singular value decomposition `a = u * diag(singular_values) * v_t`.
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

/// Thin SVD with singular values in descending order.
///
/// Errors on empty input or if the backend fails to produce the factors.
pub fn thin_svd(a: &DMatrix<f64>) -> Result<ThinSvd> {
    if a.is_empty() {
        return Err(GhsError::EmptyInput("svd of an empty matrix"));
    }
    let svd = a.clone().svd(true, true);
    let u = svd
        .u
        .ok_or(GhsError::Singular("svd produced no left factor"))?;
    let v_t = svd
        .v_t
        .ok_or(GhsError::Singular("svd produced no right factor"))?;
    Ok(ThinSvd {
        u,
        singular_values: svd.singular_values,
        v_t,
    })
}

/// Real roots of `a*x^2 + b*x + c = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadraticRoots {
    /// Discriminant below the clamp window: no real solution.
    NoReal,
    /// A double root, or the single root of the linear case `a = 0`.
    One(f64),
    /// Two distinct roots in ascending order.
    Two(f64, f64),
}

impl QuadraticRoots {
    /// Roots in ascending order (empty for `NoReal`).
    pub fn iter(&self) -> impl Iterator<Item = f64> {
        let (roots, len) = match *self {
            QuadraticRoots::NoReal => ([0.0, 0.0], 0),
            QuadraticRoots::One(r) => ([r, 0.0], 1),
            QuadraticRoots::Two(r0, r1) => ([r0, r1], 2),
        };
        roots.into_iter().take(len)
    }
}

/// Solves `a*x^2 + b*x + c = 0` over the reals.
///
/// Discriminants in `[-1e-12 * b^2, 0)` are treated as rounding noise and
/// clamped to an exact double root; anything more negative is reported as
/// [`QuadraticRoots::NoReal`]. The two-root case avoids the cancellation-prone
/// textbook formula by computing one root from `q = -(b + sign(b)*sqrt(disc))/2`
/// and the other as `c/q`.
///
/// Errors with [`GhsError::DegenerateQuadratic`] when `a = b = 0`.
pub fn solve_quadratic(a: f64, b: f64, c: f64) -> Result<QuadraticRoots> {
    if a == 0.0 {
        if b == 0.0 {
            return Err(GhsError::DegenerateQuadratic);
        }
        return Ok(QuadraticRoots::One(-c / b));
    }
    let mut disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        if disc >= -1e-12 * b * b {
            disc = 0.0;
        } else {
            return Ok(QuadraticRoots::NoReal);
        }
    }
    if disc == 0.0 {
        return Ok(QuadraticRoots::One(-b / (2.0 * a)));
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + if b >= 0.0 { sq } else { -sq });
    // q = 0 would require b = 0 and disc = 0, which the double-root branch
    // already handled, so the division is safe.
    let r0 = q / a;
    let r1 = c / q;
    Ok(if r0 <= r1 {
        QuadraticRoots::Two(r0, r1)
    } else {
        QuadraticRoots::Two(r1, r0)
    })
}
