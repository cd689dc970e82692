//! Linear embeddings that front the encoder: PCA (unsupervised) and CCA
//! (supervised against one-hot labels).
//!
//! Both fits produce the same artifact — a mean to subtract, a `D x d`
//! projection, and a scalar `scale` — and embedding is always
//! `((x - mean) * projection) / scale`. `scale` is the largest projected
//! norm seen during fitting, so every training point lands inside the unit
//! ball and the farthest one exactly on its surface. Satellites and
//! thresholds downstream rely on that normalization.

use nalgebra::{DMatrix, DVector};

use crate::error::{GhsError, Result};
use crate::linalg::sym_eig_topk;

/// Which fit produced an embedding. Affects nothing at encode time; recorded
/// for provenance and model serialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    Pca,
    Cca,
}

/// A fitted linear embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub kind: EmbeddingKind,
    /// Column mean of the training data, length `D`.
    pub mean: DVector<f64>,
    /// Projection matrix, `D x d`.
    pub projection: DMatrix<f64>,
    /// Largest projected norm over the training set; the normalizer.
    pub scale: f64,
}

impl EmbeddingModel {
    /// Input (descriptor) dimension `D`.
    pub fn input_dim(&self) -> usize {
        self.projection.nrows()
    }

    /// Embedded dimension `d`.
    pub fn output_dim(&self) -> usize {
        self.projection.ncols()
    }

    /// Maps descriptors into the normalized embedded space.
    ///
    /// Errors if `x` does not have `D` columns.
    pub fn embed(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.project_raw(x)? / self.scale)
    }

    /// The projection without the final normalization; fitting uses this to
    /// measure `scale` through the exact arithmetic `embed` will use.
    fn project_raw(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(GhsError::DimensionMismatch {
                context: "embed input columns",
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let mut centered = x.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(centered * &self.projection)
    }
}

/// Flips each column so its largest-magnitude entry is positive. Ties keep
/// the first occurrence. This pins the sign freedom of eigenvectors so that
/// refitting identical data yields byte-identical models.
fn fix_column_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut arg = 0usize;
        let mut best = f64::NEG_INFINITY;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                arg = i;
            }
        }
        if col[arg] < 0.0 {
            col.neg_mut();
        }
    }
}

fn finalize(kind: EmbeddingKind, mean: DVector<f64>, projection: DMatrix<f64>, x: &DMatrix<f64>) -> Result<EmbeddingModel> {
    let mut model = EmbeddingModel {
        kind,
        mean,
        projection,
        scale: 1.0,
    };
    let raw = model.project_raw(x)?;
    let scale = raw
        .row_iter()
        .map(|r| r.norm())
        .fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Err(GhsError::DegenerateData(
            "all training points project to the origin",
        ));
    }
    model.scale = scale;
    Ok(model)
}

/// Fits a PCA embedding: the top-`d` eigenvectors of the sample covariance.
///
/// Requires `n >= 2` and `1 <= d <= min(D, n - 1)` (the covariance of `n`
/// points has rank at most `n - 1`). Errors on zero-variance data.
pub fn fit_pca(x: &DMatrix<f64>, d: usize) -> Result<EmbeddingModel> {
    let (n, dim) = (x.nrows(), x.ncols());
    if n < 2 {
        return Err(GhsError::InvalidArgument(format!(
            "pca needs at least 2 points, got {n}"
        )));
    }
    let cap = dim.min(n - 1);
    if d == 0 || d > cap {
        return Err(GhsError::InvalidArgument(format!(
            "pca dimension {d} outside 1..={cap} (D = {dim}, n = {n})"
        )));
    }
    let mean = x.row_mean().transpose();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    if centered.amax() == 0.0 {
        return Err(GhsError::DegenerateData("zero-variance training data"));
    }
    let mut cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
    // The Gram product is symmetric up to rounding; make it exact so the
    // kernel's symmetry check never trips on large-magnitude data.
    cov = (&cov + cov.transpose()) * 0.5;
    let (_, mut vectors) = sym_eig_topk(&cov, d)?;
    fix_column_signs(&mut vectors);
    finalize(EmbeddingKind::Pca, mean, vectors, x)
}

/// One-hot encodes integer labels into an `n x l` matrix, `l = max + 1`.
pub fn one_hot(labels: &[usize]) -> Result<DMatrix<f64>> {
    if labels.is_empty() {
        return Err(GhsError::EmptyInput("one_hot of no labels"));
    }
    let l = labels.iter().max().unwrap() + 1;
    let mut z = DMatrix::zeros(labels.len(), l);
    for (i, &lab) in labels.iter().enumerate() {
        z[(i, lab)] = 1.0;
    }
    Ok(z)
}

/// Fits a CCA embedding against one-hot labels `z` and returns the model
/// together with the canonical correlations (descending, length `d`).
///
/// Solves the generalized symmetric eigenproblem
///
/// ```text
/// Xc' Z (Z'Z + reg I)^-1 Z' Xc  w  =  lambda^2 (Xc'Xc + reg I) w
/// ```
///
/// via Cholesky reduction, where `Xc` is the column-centered data. Centering
/// `Z` is unnecessary: `Xc' 1 = 0` already annihilates the constant direction
/// of the label span. Each projection column is `w_k` scaled by its
/// correlation `lambda_k`, so weakly correlated directions contribute little.
///
/// Requires matching row counts and `1 <= d <= min(D, l)`.
pub fn fit_cca(
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    d: usize,
    reg: f64,
) -> Result<(EmbeddingModel, DVector<f64>)> {
    let (n, dim) = (x.nrows(), x.ncols());
    let l = z.ncols();
    if z.nrows() != n {
        return Err(GhsError::DimensionMismatch {
            context: "cca label rows",
            expected: n,
            got: z.nrows(),
        });
    }
    if n < 2 {
        return Err(GhsError::InvalidArgument(format!(
            "cca needs at least 2 points, got {n}"
        )));
    }
    let cap = dim.min(l);
    if d == 0 || d > cap {
        return Err(GhsError::InvalidArgument(format!(
            "cca dimension {d} outside 1..={cap} (D = {dim}, label classes = {l})"
        )));
    }
    if !(reg >= 0.0) {
        return Err(GhsError::InvalidArgument(format!(
            "cca regularizer must be >= 0, got {reg}"
        )));
    }
    for (i, row) in z.row_iter().enumerate() {
        let mut ones = 0usize;
        for &v in row.iter() {
            if v == 1.0 {
                ones += 1;
            } else if v != 0.0 {
                return Err(GhsError::InvalidArgument(format!(
                    "label row {i} is not one-hot: entry {v} not in {{0, 1}}"
                )));
            }
        }
        if ones != 1 {
            return Err(GhsError::InvalidArgument(format!(
                "label row {i} is not one-hot: {ones} entries set"
            )));
        }
    }

    let mean = x.row_mean().transpose();
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= mean.transpose();
    }
    if xc.amax() == 0.0 {
        return Err(GhsError::DegenerateData("zero-variance training data"));
    }

    // A = Xc'Z (Z'Z + reg I)^-1 Z'Xc, the label-explained covariance.
    let ztx = z.tr_mul(&xc); // l x D
    let mut zgram = z.tr_mul(z);
    for i in 0..l {
        zgram[(i, i)] += reg;
    }
    let zchol = nalgebra::Cholesky::new(zgram)
        .ok_or(GhsError::Singular("label Gram matrix is not positive definite"))?;
    let solved = zchol.solve(&ztx); // (Z'Z + reg I)^-1 Z'Xc
    let mut a = ztx.tr_mul(&solved); // D x D
    a = (&a + a.transpose()) * 0.5;

    // B = Xc'Xc + reg I, reduced by Cholesky B = L L'.
    let mut b = xc.tr_mul(&xc);
    b = (&b + b.transpose()) * 0.5;
    for i in 0..dim {
        b[(i, i)] += reg;
    }
    let bchol = nalgebra::Cholesky::new(b)
        .ok_or(GhsError::Singular("data Gram matrix is not positive definite"))?;
    let lmat = bchol.l();

    // M = L^-1 A L^-T is symmetric with the same eigenvalues lambda^2.
    let linv_a = lmat
        .solve_lower_triangular(&a)
        .ok_or(GhsError::Singular("triangular solve failed"))?;
    let mut m = lmat
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or(GhsError::Singular("triangular solve failed"))?
        .transpose();
    m = (&m + m.transpose()) * 0.5;

    let (values, vectors) = sym_eig_topk(&m, d)?;
    // Back-substitute to generalized eigenvectors w = L^-T v, normalized so
    // that w' B w = 1 (inherited from |v| = 1).
    let mut w = lmat
        .transpose()
        .solve_upper_triangular(&vectors)
        .ok_or(GhsError::Singular("triangular solve failed"))?;
    fix_column_signs(&mut w);

    let correlations = DVector::from_fn(d, |k, _| values[k].max(0.0).sqrt());
    let mut projection = w;
    for (k, mut col) in projection.column_iter_mut().enumerate() {
        col *= correlations[k];
    }
    let model = finalize(EmbeddingKind::Cca, mean, projection, x)?;
    Ok((model, correlations))
}
