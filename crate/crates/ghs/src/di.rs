//! Data-independent constellation training.
//!
//! With no data to fit, the only lever is satellite geometry: spread the
//! satellites over the sphere of radius `r_s` so their thresholded distances
//! cut the space along maximally diverse directions. The spread objective is
//! the total pairwise squared distance
//!
//! ```text
//! E(S) = sum_{j < j'} ||s_j - s_{j'}||^2
//! ```
//!
//! maximized by projected ascent: take a synchronous gradient step on all
//! rows, project each row back to norm `r_s`, and accept the step only if the
//! objective grew (otherwise halve the step size and retry). On the sphere
//! the objective is bounded, so accepted steps converge.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::constellation::{fit_thresholds, Constellation, Group};
use crate::error::{GhsError, Result};

/// Configuration for [`train_di`].
#[derive(Debug, Clone)]
pub struct TrainConfigDi {
    /// Number of satellites (code length `c`).
    pub bits: usize,
    /// Bits-per-dimension ratio recorded on the trained constellation.
    pub rho: f64,
    /// Sphere radius for every satellite.
    pub r_s: f64,
    /// Initial ascent step; `None` means `0.01 / bits`.
    pub step: Option<f64>,
    /// Hard cap on iterations (accepted and rejected trials both count).
    pub max_iter: usize,
    /// Relative convergence tolerance on the objective change.
    pub tol: f64,
    /// Seed for the initial satellite draw.
    pub seed: u64,
}

impl TrainConfigDi {
    pub fn new(bits: usize) -> Self {
        TrainConfigDi {
            bits,
            rho: crate::dd::default_rho(bits),
            r_s: 2.0,
            step: None,
            max_iter: 1000,
            tol: 1e-9,
            seed: 0,
        }
    }
}

/// Total pairwise squared distance between satellite rows.
pub fn di_objective(s: &DMatrix<f64>) -> f64 {
    let c = s.nrows();
    let mut total = 0.0;
    for j in 0..c {
        for j2 in (j + 1)..c {
            total += (s.row(j) - s.row(j2)).norm_squared();
        }
    }
    total
}

/// Ascent direction for [`di_objective`], one row per satellite:
/// `g_j = c * s_j - sum_k s_k`, which is half the true gradient. The constant
/// factor folds into the step size and keeps the update symmetric in the two
/// rows of every pair.
pub fn di_gradient(s: &DMatrix<f64>) -> DMatrix<f64> {
    let c = s.nrows();
    let col_sums = s.row_sum(); // 1 x d vector of column totals
    let mut g = s * c as f64;
    for mut row in g.row_iter_mut() {
        row -= &col_sums;
    }
    g
}

/// One record of the accepted-step trace.
#[derive(Debug, Clone)]
pub struct DiIteration {
    pub iteration: usize,
    pub objective: f64,
    pub step: f64,
}

/// Summary of a [`train_di`] run.
#[derive(Debug, Clone)]
pub struct DiReport {
    /// Trials executed (accepted and rejected).
    pub iterations: usize,
    pub converged: bool,
    pub initial_objective: f64,
    pub final_objective: f64,
    /// Rows that collapsed to zero mid-step and were re-randomized.
    pub rerandomized: usize,
    /// Objective after each accepted step, in order.
    pub trace: Vec<DiIteration>,
}

fn random_sphere_row(d: usize, r_s: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-12 {
            return v * (r_s / norm);
        }
    }
}

/// Spreads `bits` satellites over the `d`-sphere of radius `r_s` by projected
/// ascent on the total pairwise squared distance. Deterministic per seed.
pub fn train_di(d: usize, cfg: &TrainConfigDi) -> Result<(DMatrix<f64>, DiReport)> {
    let c = cfg.bits;
    if c < 2 {
        return Err(GhsError::InvalidArgument(format!(
            "spreading needs at least 2 satellites, got {c}"
        )));
    }
    if d < 1 {
        return Err(GhsError::InvalidArgument("dimension must be >= 1".into()));
    }
    if !(cfg.r_s > 0.0) || !(cfg.tol >= 0.0) || cfg.max_iter == 0 {
        return Err(GhsError::InvalidArgument(
            "r_s must be positive, tol non-negative, max_iter >= 1".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut s = DMatrix::zeros(c, d);
    for j in 0..c {
        s.row_mut(j).copy_from(&random_sphere_row(d, cfg.r_s, &mut rng).transpose());
    }

    let mut dt = cfg.step.unwrap_or(0.01 / c as f64);
    if !(dt > 0.0) {
        return Err(GhsError::InvalidArgument("step must be positive".into()));
    }

    let mut e = di_objective(&s);
    let initial_objective = e;
    let mut trace = vec![DiIteration { iteration: 0, objective: e, step: dt }];
    let mut rerandomized = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;

    for it in 1..=cfg.max_iter {
        iterations = it;
        let g = di_gradient(&s);
        let mut trial = &s + &g * dt;
        for j in 0..c {
            let norm = trial.row(j).norm();
            if norm <= 1e-12 {
                // The step drove this row through the origin; projection is
                // undefined there, so restart the row at random.
                let fresh = random_sphere_row(d, cfg.r_s, &mut rng);
                trial.row_mut(j).copy_from(&fresh.transpose());
                rerandomized += 1;
            } else {
                let scale = cfg.r_s / norm;
                trial.row_mut(j).scale_mut(scale);
            }
        }
        let e_new = di_objective(&trial);
        if e_new < e {
            // Overshot: shrink the step and try again from the same point.
            dt *= 0.5;
            continue;
        }
        s = trial;
        let delta = e_new - e;
        e = e_new;
        trace.push(DiIteration { iteration: it, objective: e, step: dt });
        if delta <= cfg.tol * e.abs() {
            converged = true;
            break;
        }
    }

    let report = DiReport {
        iterations,
        converged,
        initial_objective,
        final_objective: e,
        rerandomized,
        trace,
    };
    Ok((s, report))
}

/// Trains a data-independent constellation sized for embedded points `y`:
/// spreads the satellites, then fits median thresholds on `y`. The satellites
/// form a single group (no rotations are ever refit).
pub fn train_di_constellation(
    y: &DMatrix<f64>,
    cfg: &TrainConfigDi,
) -> Result<(Constellation, DiReport)> {
    let d = y.ncols();
    let (satellites, report) = train_di(d, cfg)?;
    let thresholds = fit_thresholds(y, &satellites)?;
    let constellation = Constellation {
        satellites,
        thresholds,
        groups: vec![Group { start: 0, len: cfg.bits }],
        r_s: cfg.r_s,
        rho: cfg.rho,
    };
    constellation.validate()?;
    Ok((constellation, report))
}
