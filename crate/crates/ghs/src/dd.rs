//! Data-dependent constellation training.
//!
//! The trainer minimizes a quantization loss between code signs and scaled
//! point-to-satellite distances,
//!
//! ```text
//! E = sum_ij (B_ij + beta_j - alpha_j * ||y_i - s_j R_k||)^2
//! ```
//!
//! over codes `B` (re-encoded with median thresholds), per-satellite scale
//! `alpha_j` and offset `beta_j` (closed-form least-squares updates), ideal
//! satellite positions (a range-multilateration solve per satellite), and one
//! rigid rotation `R_k` per satellite group (an orthogonal Procrustes fit of
//! the group's base satellites onto the ideal positions). Base satellites
//! never move; only their rotations do, which preserves each group's initial
//! well-spread geometry.
//!
//! Satellite positions are recovered from target distances the same way GPS
//! receivers fix a position from ranges: lift each anchor `y_i` with its
//! target distance `b_i` into `[y_i, b_i]`, halve the difference of squared
//! norms into `r_i = (||y_i||^2 - b_i^2) / 2`, and solve the normal equations
//! under the indefinite inner product that negates the lifted coordinate.
//! The feasibility constraint collapses to one scalar quadratic whose two
//! roots are candidate positions; the candidate whose norm is closest to the
//! satellite sphere radius `r_s` wins.

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use std::time::{Duration, Instant};

use crate::code::CodeMatrix;
use crate::constellation::{
    d2s, encode_from_distances, thresholds_from_distances, Constellation, Group,
};
use crate::error::{GhsError, Result};
use crate::linalg::{solve_quadratic, thin_svd, QuadraticRoots};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Configuration for [`train_dd`].
#[derive(Debug, Clone)]
pub struct TrainConfigDd {
    /// Code length `c` (number of satellites).
    pub bits: usize,
    /// Bits-per-dimension ratio used by [`derive_dims`]; see [`default_rho`].
    pub rho: f64,
    /// Satellite sphere radius.
    pub r_s: f64,
    /// Absolute convergence window on the loss; `None` means `1e-4 * n * c`.
    pub epsilon: Option<f64>,
    /// Hard cap on training cycles.
    pub max_iter: usize,
    /// Tikhonov ridge added to the multilateration normal matrix.
    pub ridge: f64,
    /// Seed for satellite and rotation initialization.
    pub seed: u64,
}

impl TrainConfigDd {
    pub fn new(bits: usize) -> Self {
        TrainConfigDd {
            bits,
            rho: default_rho(bits),
            r_s: 2.0,
            epsilon: None,
            max_iter: 50,
            ridge: 1e-10,
            seed: 0,
        }
    }
}

/// Default bits-per-dimension ratio: 1 for short codes (<= 16 bits), 0.5 for
/// longer ones, where spending extra embedding dimensions per bit pays off.
pub fn default_rho(bits: usize) -> f64 {
    if bits <= 16 {
        1.0
    } else {
        0.5
    }
}

/// Derives the embedding dimension and satellite grouping from the code
/// length: `d = min(round(c / rho) - 1, data_dim)`, then `ceil(c / (d + 1))`
/// groups of `d + 1` satellites (the last possibly smaller).
pub fn derive_dims(bits: usize, rho: f64, data_dim: usize) -> Result<(usize, Vec<Group>)> {
    if bits < 2 {
        return Err(GhsError::InvalidArgument(format!(
            "code length must be >= 2, got {bits}"
        )));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(GhsError::InvalidArgument(format!(
            "rho must be a positive real, got {rho}"
        )));
    }
    let ideal = (bits as f64 / rho).round() as isize - 1;
    let d = ideal.min(data_dim as isize);
    if d < 1 {
        return Err(GhsError::InvalidArgument(format!(
            "rho = {rho} leaves no embedding dimensions for {bits} bits"
        )));
    }
    let d = d as usize;
    Ok((d, group_layout(bits, d)))
}

/// Partitions `bits` satellites into contiguous groups of `d + 1`, with at
/// most one smaller trailing group.
pub fn group_layout(bits: usize, d: usize) -> Vec<Group> {
    let size = d + 1;
    let mut groups = Vec::with_capacity(bits.div_ceil(size));
    let mut start = 0;
    while start < bits {
        let len = size.min(bits - start);
        groups.push(Group { start, len });
        start += len;
    }
    groups
}

/// A uniformly random orthonormal `d x d` matrix: the left singular factor of
/// a Gaussian matrix.
fn random_orthonormal(d: usize, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    Ok(thin_svd(&g)?.u)
}

/// Initial satellites for one group: up to `d` orthogonal directions from a
/// random rotation, plus one extra random direction when the group holds
/// `d + 1`, every row scaled to `r_s`.
pub fn init_group(
    d: usize,
    size: usize,
    r_s: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DMatrix<f64>> {
    debug_assert!(size <= d + 1);
    let u = random_orthonormal(d, rng)?;
    let mut out = DMatrix::zeros(size, d);
    for j in 0..size.min(d) {
        // Columns of u are orthonormal; transplant them as rows at radius r_s.
        for k in 0..d {
            out[(j, k)] = u[(k, j)] * r_s;
        }
    }
    if size == d + 1 {
        let extra: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = extra.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        for k in 0..d {
            out[(size - 1, k)] = extra[k] / norm * r_s;
        }
    }
    Ok(out)
}

/// Stacks per-group initial satellites into the full `c x d` base matrix.
pub fn init_satellites(
    d: usize,
    groups: &[Group],
    r_s: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DMatrix<f64>> {
    let c: usize = groups.iter().map(|g| g.len).sum();
    let mut base = DMatrix::zeros(c, d);
    for g in groups {
        let block = init_group(d, g.len, r_s, rng)?;
        base.rows_mut(g.start, g.len).copy_from(&block);
    }
    Ok(base)
}

/// Applies each group's rotation to its base satellites (rows map as
/// `s_j -> s_j R_k`).
pub fn rotate_groups(
    base: &DMatrix<f64>,
    rotations: &[DMatrix<f64>],
    groups: &[Group],
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(base.nrows(), base.ncols());
    for (g, r) in groups.iter().zip(rotations) {
        let rotated = base.rows(g.start, g.len) * r;
        out.rows_mut(g.start, g.len).copy_from(&rotated);
    }
    out
}

/// Closed-form update of the per-satellite distance scales: the least-squares
/// fit of `alpha_j * dist_ij` to `B_ij + beta_j` down each column. A column
/// whose distances are all zero keeps its previous scale; the second return
/// reports how many columns were kept. Negative results are legal (the loss
/// is a plain quadratic in `alpha_j`) and left for the caller to count.
pub fn alpha_step(
    codes: &CodeMatrix,
    beta: &DVector<f64>,
    dist: &DMatrix<f64>,
    previous: &DVector<f64>,
) -> (DVector<f64>, usize) {
    let (n, c) = (dist.nrows(), dist.ncols());
    let mut alpha = DVector::zeros(c);
    let mut kept = 0usize;
    for j in 0..c {
        let col = dist.column(j);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            let d = col[i];
            num += (codes.sign(i, j) + beta[j]) * d;
            den += d * d;
        }
        if den == 0.0 {
            alpha[j] = previous[j];
            kept += 1;
        } else {
            alpha[j] = num / den;
        }
    }
    (alpha, kept)
}

/// Closed-form update of the per-satellite offsets:
/// `beta_j = mean_i(alpha_j * dist_ij - B_ij)`.
pub fn beta_step(codes: &CodeMatrix, alpha: &DVector<f64>, dist: &DMatrix<f64>) -> DVector<f64> {
    let (n, c) = (dist.nrows(), dist.ncols());
    let mut beta = DVector::zeros(c);
    for j in 0..c {
        let col = dist.column(j);
        let mut acc = 0.0;
        for i in 0..n {
            acc += alpha[j] * col[i] - codes.sign(i, j);
        }
        beta[j] = acc / n as f64;
    }
    beta
}

/// The quantization loss `sum_ij (B_ij + beta_j - alpha_j * dist_ij)^2`.
pub fn quantization_loss(
    codes: &CodeMatrix,
    alpha: &DVector<f64>,
    beta: &DVector<f64>,
    dist: &DMatrix<f64>,
) -> f64 {
    let (n, c) = (dist.nrows(), dist.ncols());
    let mut total = 0.0;
    for j in 0..c {
        let col = dist.column(j);
        let mut acc = 0.0;
        for i in 0..n {
            let r = codes.sign(i, j) + beta[j] - alpha[j] * col[i];
            acc += r * r;
        }
        total += acc;
    }
    total
}

/// Precomputed anchor-side quantities for repeated multilateration solves
/// against the same point set.
struct GpsContext<'a> {
    y: &'a DMatrix<f64>,
    /// `Y' Y`, the anchor Gram block shared by every solve.
    yty: DMatrix<f64>,
    /// `Y' 1`.
    yt1: DVector<f64>,
    /// Squared row norms `||y_i||^2`.
    ynorm2: Vec<f64>,
}

impl<'a> GpsContext<'a> {
    fn new(y: &'a DMatrix<f64>) -> Self {
        let yty = y.tr_mul(y);
        let yt1 = y.tr_mul(&DVector::from_element(y.nrows(), 1.0));
        let ynorm2 = y.row_iter().map(|r| r.norm_squared()).collect();
        GpsContext { y, yty, yt1, ynorm2 }
    }

    /// Inner product that negates the lifted coordinate:
    /// `sum_{k<d} x_k y_k - x_d y_d`.
    fn lifted_dot(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let d = u.len() - 1;
        let mut acc = 0.0;
        for k in 0..d {
            acc += u[k] * v[k];
        }
        acc - u[d] * v[d]
    }

    /// Solves for the point whose distances to the anchor rows best match
    /// `target`. Returns `Ok(None)` when the feasibility quadratic has no
    /// usable real root, in which case the caller keeps its previous
    /// satellite.
    fn solve(&self, target: &DVector<f64>, r_s: f64, ridge: f64) -> Result<Option<DVector<f64>>> {
        let (n, d) = (self.y.nrows(), self.y.ncols());
        debug_assert_eq!(target.len(), n);
        let m = d + 1;

        // Bordered normal matrix of the lifted anchors [Y | target].
        let mut gram = DMatrix::zeros(m, m);
        gram.view_mut((0, 0), (d, d)).copy_from(&self.yty);
        let ytb = self.y.tr_mul(target);
        for k in 0..d {
            gram[(k, d)] = ytb[k];
            gram[(d, k)] = ytb[k];
        }
        gram[(d, d)] = target.norm_squared();
        for k in 0..m {
            gram[(k, k)] += ridge;
        }
        let chol = Cholesky::new(gram).ok_or(GhsError::Singular(
            "multilateration normal matrix is not positive definite",
        ))?;

        // Right-hand sides: r_i = (||y_i||^2 - b_i^2)/2 and the all-ones
        // vector that carries the unknown feasibility scalar.
        let mut p_rhs = DVector::zeros(m);
        let mut q_rhs = DVector::zeros(m);
        let mut rb = 0.0;
        let mut bsum = 0.0;
        let mut ytr = DVector::zeros(d);
        for i in 0..n {
            let r_i = 0.5 * (self.ynorm2[i] - target[i] * target[i]);
            for k in 0..d {
                ytr[k] += self.y[(i, k)] * r_i;
            }
            rb += target[i] * r_i;
            bsum += target[i];
        }
        p_rhs.rows_mut(0, d).copy_from(&ytr);
        p_rhs[d] = rb;
        q_rhs.rows_mut(0, d).copy_from(&self.yt1);
        q_rhs[d] = bsum;

        let p = chol.solve(&p_rhs);
        let q = chol.solve(&q_rhs);

        // Feasibility: <v, v> = 2*lambda for v = p + lambda*q, a scalar
        // quadratic in lambda under the lifted inner product.
        let a = Self::lifted_dot(&q, &q);
        let b = 2.0 * (Self::lifted_dot(&p, &q) - 1.0);
        let c = Self::lifted_dot(&p, &p);
        let roots = match solve_quadratic(a, b, c) {
            Ok(r) => r,
            Err(GhsError::DegenerateQuadratic) => return Ok(None),
            Err(e) => return Err(e),
        };
        if roots == QuadraticRoots::NoReal {
            return Ok(None);
        }

        let mut best: Option<(f64, DVector<f64>)> = None;
        for lambda in roots.iter() {
            let v = &p + &q * lambda;
            let s = v.rows(0, d).into_owned();
            let gap = (s.norm() - r_s).abs();
            if best.as_ref().map_or(true, |(g, _)| gap < *g) {
                best = Some((gap, s));
            }
        }
        Ok(best.map(|(_, s)| s))
    }
}

/// Recovers the point whose distances to the rows of `y` best match
/// `target`, preferring the feasibility root whose norm is nearest `r_s`.
///
/// `Ok(None)` signals that no real root survived the solver's rounding
/// window; the caller should keep its previous satellite. Requires at least
/// `d + 1` anchors.
pub fn gps_solve_satellite(
    y: &DMatrix<f64>,
    target: &DVector<f64>,
    r_s: f64,
    ridge: f64,
) -> Result<Option<DVector<f64>>> {
    let (n, d) = (y.nrows(), y.ncols());
    if target.len() != n {
        return Err(GhsError::DimensionMismatch {
            context: "multilateration target distances",
            expected: n,
            got: target.len(),
        });
    }
    if n < d + 1 {
        return Err(GhsError::InvalidArgument(format!(
            "multilateration needs at least d + 1 = {} anchors, got {n}",
            d + 1
        )));
    }
    GpsContext::new(y).solve(target, r_s, ridge)
}

/// Orthogonal matrix `R` minimizing `||s_prime - s * R||_F` (rows are
/// points): the polar factor of `s' s_prime` via SVD. Reflections are
/// allowed; `R' R = I` always holds.
pub fn procrustes_rotation(s_prime: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if s_prime.shape() != s.shape() {
        return Err(GhsError::DimensionMismatch {
            context: "procrustes operand rows",
            expected: s.nrows(),
            got: s_prime.nrows(),
        });
    }
    let c = s.tr_mul(s_prime);
    let svd = thin_svd(&c)?;
    Ok(&svd.u * &svd.v_t)
}

/// One record of the per-cycle training trace.
#[derive(Debug, Clone)]
pub struct DdIteration {
    pub iteration: usize,
    pub loss: f64,
    pub gps_fallbacks: usize,
    pub wall: Duration,
}

/// Summary of a [`train_dd`] run.
#[derive(Debug, Clone)]
pub struct DdReport {
    /// Cycles actually executed (trace entry 0 is the initial state).
    pub iterations: usize,
    /// Whether the loss change fell below epsilon before `max_iter`.
    pub converged: bool,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Satellites that kept their previous position for lack of a usable
    /// multilateration root, summed over all cycles.
    pub gps_fallbacks: usize,
    /// Negative scale events observed across all cycles (legal but worth
    /// surfacing).
    pub negative_alpha: usize,
    pub trace: Vec<DdIteration>,
}

impl DdReport {
    /// Renders the trace as CSV (`iteration,loss,gps_fallbacks,millis`).
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,loss,gps_fallbacks,millis\n");
        for rec in &self.trace {
            out.push_str(&format!(
                "{},{},{},{:.3}\n",
                rec.iteration,
                rec.loss,
                rec.gps_fallbacks,
                rec.wall.as_secs_f64() * 1e3
            ));
        }
        out
    }
}

/// Trains a constellation on embedded points `y` (rows in the unit ball).
///
/// Each cycle re-encodes `B` against median thresholds, updates the scales
/// and offsets in closed form, solves for ideal satellite positions, and
/// re-fits each group's rotation; the loss is evaluated once per cycle and
/// training stops when its change drops below epsilon or `max_iter` is hit.
/// Deterministic for a fixed seed regardless of thread count.
///
/// Requires `n >= d + 2` points.
pub fn train_dd(y: &DMatrix<f64>, cfg: &TrainConfigDd) -> Result<(Constellation, DdReport)> {
    let (n, d) = (y.nrows(), y.ncols());
    let c = cfg.bits;
    if c < 2 {
        return Err(GhsError::InvalidArgument(format!(
            "code length must be >= 2, got {c}"
        )));
    }
    if d < 1 {
        return Err(GhsError::InvalidArgument("embedded dimension is zero".into()));
    }
    if n < d + 2 {
        return Err(GhsError::InvalidArgument(format!(
            "training needs at least d + 2 = {} points, got {n}",
            d + 2
        )));
    }
    if !(cfg.r_s > 0.0) || !(cfg.ridge >= 0.0) || cfg.max_iter == 0 {
        return Err(GhsError::InvalidArgument(
            "r_s must be positive, ridge non-negative, max_iter >= 1".into(),
        ));
    }
    let epsilon = cfg
        .epsilon
        .unwrap_or(1e-4 * n as f64 * c as f64);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let groups = group_layout(c, d);
    let base = init_satellites(d, &groups, cfg.r_s, &mut rng)?;
    let mut rotations: Vec<DMatrix<f64>> = groups
        .iter()
        .map(|_| random_orthonormal(d, &mut rng))
        .collect::<Result<_>>()?;
    let mut rotated = rotate_groups(&base, &rotations, &groups);
    let mut dist = d2s(y, &rotated)?;

    let mut alpha = DVector::from_element(c, 1.0);
    let mut beta = DVector::zeros(c);
    let mut thresholds = thresholds_from_distances(&dist)?;
    let mut codes = encode_from_distances(&dist, &thresholds);

    let mut loss_prev = quantization_loss(&codes, &alpha, &beta, &dist);
    let mut trace = vec![DdIteration {
        iteration: 0,
        loss: loss_prev,
        gps_fallbacks: 0,
        wall: Duration::ZERO,
    }];

    let gps = GpsContext::new(y);
    let mut total_fallbacks = 0usize;
    let mut negative_alpha = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;

    for it in 1..=cfg.max_iter {
        let t0 = Instant::now();

        // Code step: thresholds track the current geometry, then re-encode.
        thresholds = thresholds_from_distances(&dist)?;
        codes = encode_from_distances(&dist, &thresholds);

        // Scale and offset steps (exact coordinate minimizers).
        let (a_new, _) = alpha_step(&codes, &beta, &dist, &alpha);
        alpha = a_new;
        negative_alpha += alpha.iter().filter(|v| **v < 0.0).count();
        beta = beta_step(&codes, &alpha, &dist);

        // Ideal positions: one multilateration solve per satellite against
        // target distances (B_ij + beta_j) / alpha_j.
        let solutions: Vec<Result<Option<DVector<f64>>>> = (0..c)
            .into_par_iter()
            .map(|j| {
                if alpha[j] == 0.0 || !alpha[j].is_finite() {
                    return Ok(None);
                }
                let target = DVector::from_fn(n, |i, _| {
                    (codes.sign(i, j) + beta[j]) / alpha[j]
                });
                gps.solve(&target, cfg.r_s, cfg.ridge)
            })
            .collect();
        let mut s_prime = rotated.clone();
        let mut fallbacks = 0usize;
        for (j, sol) in solutions.into_iter().enumerate() {
            match sol? {
                Some(s) => s_prime.row_mut(j).copy_from(&s.transpose()),
                None => fallbacks += 1, // row keeps the current position
            }
        }

        // Rigid refit: one Procrustes rotation per group, base -> ideal.
        for (k, g) in groups.iter().enumerate() {
            let target_block = s_prime.rows(g.start, g.len).into_owned();
            let base_block = base.rows(g.start, g.len).into_owned();
            rotations[k] = procrustes_rotation(&target_block, &base_block)?;
        }
        rotated = rotate_groups(&base, &rotations, &groups);
        dist = d2s(y, &rotated)?;

        let loss = quantization_loss(&codes, &alpha, &beta, &dist);
        trace.push(DdIteration {
            iteration: it,
            loss,
            gps_fallbacks: fallbacks,
            wall: t0.elapsed(),
        });
        total_fallbacks += fallbacks;
        iterations = it;

        if (loss_prev - loss).abs() < epsilon {
            loss_prev = loss;
            converged = true;
            break;
        }
        loss_prev = loss;
    }

    let thresholds = thresholds_from_distances(&dist)?;
    let constellation = Constellation {
        satellites: rotated,
        thresholds,
        groups,
        r_s: cfg.r_s,
        rho: c as f64 / (d as f64 + 1.0),
    };
    let report = DdReport {
        iterations,
        converged,
        initial_loss: trace[0].loss,
        final_loss: loss_prev,
        gps_fallbacks: total_fallbacks,
        negative_alpha,
        trace,
    };
    Ok((constellation, report))
}
