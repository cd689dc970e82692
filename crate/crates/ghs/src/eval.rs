//! Retrieval evaluation: ranking quality (mean average precision against
//! Euclidean ground truth) and lookup quality (precision/recall/F1 within a
//! Hamming radius), plus two diagnostics for code geometry.

use nalgebra::DMatrix;
use rayon::prelude::*;
use std::collections::HashSet;

use crate::code::{lookup_within_radius, CodeMatrix};
use crate::constellation::{encode_from_distances, thresholds_from_distances, Constellation, d2s};
use crate::dataio::make_synthetic;
use crate::dataio::SyntheticKind;
use crate::error::{GhsError, Result};

/// For each query row, the indices of the `ceil(fraction * n)` base rows
/// closest in Euclidean distance, ties at the cutoff broken by ascending
/// index. These are the "true neighbors" every retrieval metric scores
/// against.
pub fn ground_truth_euclidean(
    base: &DMatrix<f64>,
    queries: &DMatrix<f64>,
    fraction: f64,
) -> Result<Vec<Vec<usize>>> {
    if base.ncols() != queries.ncols() {
        return Err(GhsError::DimensionMismatch {
            context: "ground-truth vector width",
            expected: base.ncols(),
            got: queries.ncols(),
        });
    }
    if base.nrows() == 0 || queries.nrows() == 0 {
        return Err(GhsError::EmptyInput("ground-truth inputs"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(GhsError::InvalidArgument(format!(
            "neighbor fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let n = base.nrows();
    let k = ((fraction * n as f64).ceil() as usize).clamp(1, n);

    let truth: Vec<Vec<usize>> = (0..queries.nrows())
        .into_par_iter()
        .map(|qi| {
            let q = queries.row(qi);
            let mut order: Vec<(f64, usize)> = (0..n)
                .map(|bi| ((base.row(bi) - q).norm_squared(), bi))
                .collect();
            // Stable comparator: distance first, then index, so cutoff ties
            // resolve identically everywhere.
            order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            order.truncate(k);
            order.into_iter().map(|(_, bi)| bi).collect()
        })
        .collect();
    Ok(truth)
}

/// Average precision of one ranked list against a truth set: the mean of
/// precision-at-rank over the ranks where a true neighbor appears, divided by
/// the truth size. Empty truth scores 0.
pub fn average_precision(ranked: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let truth_set: HashSet<usize> = truth.iter().copied().collect();
    let mut hits = 0usize;
    let mut acc = 0.0;
    for (rank, idx) in ranked.iter().enumerate() {
        if truth_set.contains(idx) {
            hits += 1;
            acc += hits as f64 / (rank + 1) as f64;
        }
    }
    acc / truth_set.len() as f64
}

/// Full evaluation of one code pair against ground truth.
#[derive(Debug, Clone)]
pub struct EvalReport {
    /// Mean average precision over the full Hamming ranking.
    pub map: f64,
    /// Macro-averaged precision of lookup within `radius`.
    pub precision: f64,
    /// Macro-averaged recall of lookup within `radius`.
    pub recall: f64,
    /// Harmonic mean of the two macro averages.
    pub f1: f64,
    pub radius: usize,
    pub n_queries: usize,
    /// Queries whose truth set was empty (scored 0 toward every metric).
    pub empty_truth_count: usize,
    /// Queries that retrieved nothing within `radius` (precision 0).
    pub empty_retrieval_count: usize,
}

/// Scores query codes against base codes: ranks every base row by Hamming
/// distance for mean average precision, and looks up within `radius` for
/// precision/recall/F1 (macro-averaged over queries).
pub fn evaluate(
    base: &CodeMatrix,
    queries: &CodeMatrix,
    truth: &[Vec<usize>],
    radius: usize,
) -> Result<EvalReport> {
    if base.bits() != queries.bits() {
        return Err(GhsError::DimensionMismatch {
            context: "evaluation code width",
            expected: base.bits(),
            got: queries.bits(),
        });
    }
    if truth.len() != queries.rows() {
        return Err(GhsError::DimensionMismatch {
            context: "ground-truth rows",
            expected: queries.rows(),
            got: truth.len(),
        });
    }
    if queries.rows() == 0 {
        return Err(GhsError::EmptyInput("query codes"));
    }

    struct PerQuery {
        ap: f64,
        precision: f64,
        recall: f64,
        empty_truth: bool,
        empty_retrieval: bool,
    }

    let rows: Vec<PerQuery> = (0..queries.rows())
        .into_par_iter()
        .map(|qi| -> Result<PerQuery> {
            let q = queries.row(qi);
            let t = &truth[qi];
            let ranked = crate::code::rank_by_hamming(q, base, base.rows())?;
            let ap = average_precision(&ranked, t);

            let retrieved = lookup_within_radius(q, base, radius)?;
            let truth_set: HashSet<usize> = t.iter().copied().collect();
            let tp = retrieved.iter().filter(|i| truth_set.contains(i)).count();
            let precision = if retrieved.is_empty() {
                0.0
            } else {
                tp as f64 / retrieved.len() as f64
            };
            let recall = if truth_set.is_empty() {
                0.0
            } else {
                tp as f64 / truth_set.len() as f64
            };
            Ok(PerQuery {
                ap,
                precision,
                recall,
                empty_truth: truth_set.is_empty(),
                empty_retrieval: retrieved.is_empty(),
            })
        })
        .collect::<Result<_>>()?;

    let nq = rows.len() as f64;
    let map = rows.iter().map(|r| r.ap).sum::<f64>() / nq;
    let precision = rows.iter().map(|r| r.precision).sum::<f64>() / nq;
    let recall = rows.iter().map(|r| r.recall).sum::<f64>() / nq;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(EvalReport {
        map,
        precision,
        recall,
        f1,
        radius,
        n_queries: rows.len(),
        empty_truth_count: rows.iter().filter(|r| r.empty_truth).count(),
        empty_retrieval_count: rows.iter().filter(|r| r.empty_retrieval).count(),
    })
}

/// Mean absolute off-diagonal normalized bit correlation,
/// `mean_{j != j'} |h_j' h_{j'}| / n` over sign columns. Near 0 means the
/// bits cut along independent directions. Guarded to `n <= 5000` points
/// because it materializes the full sign matrix.
pub fn affinity_diagnostic(codes: &CodeMatrix) -> Result<f64> {
    let n = codes.rows();
    let c = codes.bits();
    if n == 0 || c < 2 {
        return Err(GhsError::InvalidArgument(
            "affinity needs at least 1 row and 2 bits".into(),
        ));
    }
    if n > 5000 {
        return Err(GhsError::InvalidArgument(format!(
            "affinity diagnostic is limited to 5000 rows, got {n}"
        )));
    }
    let mut signs = DMatrix::zeros(n, c);
    for i in 0..n {
        for j in 0..c {
            signs[(i, j)] = codes.sign(i, j);
        }
    }
    let gram = signs.tr_mul(&signs);
    let mut acc = 0.0;
    for j in 0..c {
        for j2 in 0..c {
            if j != j2 {
                acc += gram[(j, j2)].abs();
            }
        }
    }
    Ok(acc / (n as f64 * (c * (c - 1)) as f64))
}

/// Measures how decorrelated the bits of an orthogonal-satellite
/// constellation become on uniform ball data as the sphere radius grows:
/// builds `d` axis-aligned satellites at radius `rs_factor`, encodes `n`
/// uniform points from the unit `d`-ball with median thresholds, and returns
/// the worst-pair normalized correlation `max_{j != j'} |h_j' h_{j'}| / n`.
pub fn bit_correlation_probe(d: usize, n: usize, rs_factor: f64, seed: u64) -> Result<f64> {
    if d < 2 {
        return Err(GhsError::InvalidArgument(
            "correlation probe needs d >= 2 bits".into(),
        ));
    }
    let y = make_synthetic(SyntheticKind::UniformBall, n, d, 1, seed)?.0;
    let satellites = DMatrix::from_fn(d, d, |r, c| if r == c { rs_factor } else { 0.0 });
    let dist = d2s(&y, &satellites)?;
    let thresholds = thresholds_from_distances(&dist)?;
    let codes = encode_from_distances(&dist, &thresholds);

    // Accumulate the c x c sign Gram in O(n d^2) without materializing signs.
    let mut gram = vec![0.0f64; d * d];
    let mut row = vec![0.0f64; d];
    for i in 0..n {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = codes.sign(i, j);
        }
        for j in 0..d {
            let sj = row[j];
            for j2 in (j + 1)..d {
                gram[j * d + j2] += sj * row[j2];
            }
        }
    }
    let mut worst = 0.0f64;
    for j in 0..d {
        for j2 in (j + 1)..d {
            worst = worst.max(gram[j * d + j2].abs() / n as f64);
        }
    }
    Ok(worst)
}

/// Encodes data with a constellation and reports the affinity diagnostic;
/// convenience for inspecting a trained model.
pub fn constellation_affinity(cons: &Constellation, y: &DMatrix<f64>) -> Result<f64> {
    affinity_diagnostic(&cons.encode(y)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::hamming;
    use approx::assert_relative_eq;

    fn codes_from_signs(rows: &[&[i8]]) -> CodeMatrix {
        let n = rows.len();
        let bits = rows[0].len();
        CodeMatrix::from_fn(n, bits, |i, j| rows[i][j] > 0)
    }

    #[test]
    fn average_precision_worked_example() {
        // Ranked [3, 1, 2], truth {1, 2}: hits at ranks 2 and 3 give
        // (1/2 + 2/3) / 2 = 7/12.
        let ap = average_precision(&[3, 1, 2], &[1, 2]);
        assert_relative_eq!(ap, 7.0 / 12.0, epsilon = 1e-15);
        assert_relative_eq!(average_precision(&[1, 2, 3], &[1, 2]), 1.0, epsilon = 1e-15);
        assert_eq!(average_precision(&[1, 2, 3], &[]), 0.0);
        assert_eq!(average_precision(&[], &[1]), 0.0);
        // Truth entries never ranked still divide the score.
        assert_relative_eq!(
            average_precision(&[1], &[1, 9]),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn ground_truth_picks_nearest_with_index_ties() {
        // Base rows at x = 0, 1, 2, 3; query at x = 0.
        let base = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let q = DMatrix::from_column_slice(1, 1, &[0.0]);
        let truth = ground_truth_euclidean(&base, &q, 0.5).unwrap();
        assert_eq!(truth, vec![vec![0, 1]]);

        // Equidistant pair at the cutoff: lower index wins.
        let base = DMatrix::from_column_slice(3, 1, &[1.0, -1.0, 5.0]);
        let truth = ground_truth_euclidean(&base, &q, 1.0 / 3.0).unwrap();
        assert_eq!(truth, vec![vec![0]]);

        // ceil rounds the neighbor count up.
        let base = DMatrix::from_column_slice(5, 1, &[0.1, 0.2, 0.3, 0.4, 0.5]);
        let truth = ground_truth_euclidean(&base, &q, 0.21).unwrap();
        assert_eq!(truth[0].len(), 2);
    }

    #[test]
    fn ground_truth_validates_inputs() {
        let base = DMatrix::zeros(3, 2);
        let q = DMatrix::zeros(1, 3);
        assert!(ground_truth_euclidean(&base, &q, 0.1).is_err());
        let q = DMatrix::zeros(1, 2);
        assert!(ground_truth_euclidean(&base, &q, 0.0).is_err());
        assert!(ground_truth_euclidean(&base, &q, 1.5).is_err());
    }

    #[test]
    fn evaluate_against_hand_computed_metrics() {
        // Base codes: 4 rows of 3 bits. Query equals base row 0.
        let base = codes_from_signs(&[
            &[1, 1, 1],
            &[1, 1, -1],
            &[-1, -1, -1],
            &[1, -1, -1],
        ]);
        let query = codes_from_signs(&[&[1, 1, 1]]);
        // Hamming distances from query: 0, 1, 3, 2 -> ranking [0, 1, 3, 2].
        let truth = vec![vec![0, 3]];
        let report = evaluate(&base, &query, &truth, 1).unwrap();
        // AP: hits at ranks 1 and 3 -> (1/1 + 2/3)/2 = 5/6.
        assert_relative_eq!(report.map, 5.0 / 6.0, epsilon = 1e-15);
        // Radius 1 retrieves {0, 1}; tp = 1.
        assert_relative_eq!(report.precision, 0.5, epsilon = 1e-15);
        assert_relative_eq!(report.recall, 0.5, epsilon = 1e-15);
        assert_relative_eq!(report.f1, 0.5, epsilon = 1e-15);
        assert_eq!(report.empty_truth_count, 0);
        assert_eq!(report.empty_retrieval_count, 0);
    }

    #[test]
    fn evaluate_handles_empty_truth_and_retrieval() {
        let base = codes_from_signs(&[&[1, 1, 1, 1], &[-1, -1, -1, -1]]);
        let query = codes_from_signs(&[&[1, 1, -1, -1]]);
        // Radius 0 retrieves nothing (nearest base row is 2 bits away).
        let report = evaluate(&base, &query, &[vec![]], 0).unwrap();
        assert_eq!(report.map, 0.0);
        assert_eq!(report.precision, 0.0);
        assert_eq!(report.recall, 0.0);
        assert_eq!(report.f1, 0.0);
        assert_eq!(report.empty_truth_count, 1);
        assert_eq!(report.empty_retrieval_count, 1);
    }

    #[test]
    fn evaluate_validates_inputs() {
        let base = codes_from_signs(&[&[1, 1]]);
        let query = codes_from_signs(&[&[1, 1, 1]]);
        assert!(evaluate(&base, &query, &[vec![]], 1).is_err());
        let query = codes_from_signs(&[&[1, 1]]);
        assert!(evaluate(&base, &query, &[], 1).is_err());
    }

    #[test]
    fn affinity_diagnostic_known_values() {
        // Identical columns: |h_j . h_j'| / n = 1 for the off-diagonal pair.
        let codes = codes_from_signs(&[&[1, 1], &[-1, -1], &[1, 1]]);
        assert_relative_eq!(affinity_diagnostic(&codes).unwrap(), 1.0, epsilon = 1e-15);
        // Orthogonal sign columns: affinity 0.
        let codes = codes_from_signs(&[&[1, 1], &[1, -1], &[-1, 1], &[-1, -1]]);
        assert_relative_eq!(affinity_diagnostic(&codes).unwrap(), 0.0, epsilon = 1e-15);
        // Guard trips above 5000 rows.
        let big = CodeMatrix::new(5001, 2);
        assert!(affinity_diagnostic(&big).is_err());
    }

    #[test]
    fn probe_decorrelates_at_large_radius() {
        // At rs = 1 the worst-pair correlation on the unit ball is ~0.05 for
        // d = 3; at rs = 100 only sampling noise (~1/sqrt(n)) remains.
        let far = bit_correlation_probe(3, 20000, 100.0, 42).unwrap();
        let near = bit_correlation_probe(3, 20000, 1.0, 42).unwrap();
        assert!(far < 0.02, "far-satellite correlation {far} too high");
        assert!(near > 0.03, "near-satellite correlation {near} too low");
        assert!(near > far, "near {near} should exceed far {far}");
    }

    #[test]
    fn evaluate_matches_naive_reimplementation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let base = CodeMatrix::from_fn(40, 16, |_, _| rng.gen_bool(0.5));
        let queries = CodeMatrix::from_fn(6, 16, |_, _| rng.gen_bool(0.5));
        let truth: Vec<Vec<usize>> = (0..6)
            .map(|_| {
                let mut t: Vec<usize> = (0..40).filter(|_| rng.gen_bool(0.15)).collect();
                t.dedup();
                t
            })
            .collect();
        let radius = 5;
        let report = evaluate(&base, &queries, &truth, radius).unwrap();

        // Naive recomputation straight from the definitions.
        let mut map = 0.0;
        let mut prec = 0.0;
        let mut rec = 0.0;
        for qi in 0..6 {
            let mut order: Vec<(usize, usize)> = (0..40)
                .map(|bi| (hamming(queries.row(qi), base.row(bi)).unwrap(), bi))
                .collect();
            order.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
            let ranked: Vec<usize> = order.iter().map(|&(_, bi)| bi).collect();
            map += average_precision(&ranked, &truth[qi]);
            let retrieved: Vec<usize> = order
                .iter()
                .filter(|&&(d, _)| d <= radius)
                .map(|&(_, bi)| bi)
                .collect();
            let tset: HashSet<usize> = truth[qi].iter().copied().collect();
            let tp = retrieved.iter().filter(|i| tset.contains(i)).count();
            prec += if retrieved.is_empty() { 0.0 } else { tp as f64 / retrieved.len() as f64 };
            rec += if tset.is_empty() { 0.0 } else { tp as f64 / tset.len() as f64 };
        }
        assert_relative_eq!(report.map, map / 6.0, epsilon = 1e-12);
        assert_relative_eq!(report.precision, prec / 6.0, epsilon = 1e-12);
        assert_relative_eq!(report.recall, rec / 6.0, epsilon = 1e-12);
    }
}
