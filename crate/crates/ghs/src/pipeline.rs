//! End-to-end orchestration: descriptor matrix in, trained model out, plus
//! benchmark and parameter-sweep drivers shared by the CLI and tests.

use nalgebra::DMatrix;

use crate::dataio::{select_rows, split_indices};
use crate::dd::{default_rho, derive_dims, train_dd, DdReport, TrainConfigDd};
use crate::di::{train_di_constellation, DiReport, TrainConfigDi};
use crate::embedding::{fit_cca, fit_pca, one_hot};
use crate::error::{GhsError, Result};
use crate::eval::{evaluate, ground_truth_euclidean, EvalReport};
use crate::lsh::fit_lsh;
use crate::model::Model;

/// Training algorithm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMethod {
    /// Data-dependent: quantization-loss minimization over satellites,
    /// scales, offsets, and group rotations.
    Dd,
    /// Data-independent: sphere-spread satellites, thresholds fit on data.
    Di,
    /// Sign-random-projection baseline.
    Lsh,
}

impl TrainMethod {
    pub fn name(&self) -> &'static str {
        match self {
            TrainMethod::Dd => "dd",
            TrainMethod::Di => "di",
            TrainMethod::Lsh => "lsh",
        }
    }
}

impl std::str::FromStr for TrainMethod {
    type Err = GhsError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dd" => Ok(TrainMethod::Dd),
            "di" => Ok(TrainMethod::Di),
            "lsh" => Ok(TrainMethod::Lsh),
            other => Err(GhsError::InvalidArgument(format!(
                "unknown training method '{other}' (expected dd, di, or lsh)"
            ))),
        }
    }
}

/// Options for [`train_model`].
#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub bits: usize,
    pub method: TrainMethod,
    /// Bits-per-dimension ratio; `None` picks [`default_rho`].
    pub rho: Option<f64>,
    /// Satellite sphere radius.
    pub r_s: f64,
    /// Explicit embedded dimension, overriding the ratio-derived one.
    pub dims: Option<usize>,
    /// Train the embedding against labels (canonical correlation) instead of
    /// unsupervised variance directions.
    pub supervised: bool,
    /// Ridge added to both covariance blocks of the supervised embedding.
    pub cca_reg: f64,
    /// Iteration cap; `None` keeps each trainer's default.
    pub max_iter: Option<usize>,
    /// Convergence window for the data-dependent trainer.
    pub epsilon: Option<f64>,
    pub seed: u64,
}

impl TrainOptions {
    pub fn new(bits: usize, method: TrainMethod) -> Self {
        TrainOptions {
            bits,
            method,
            rho: None,
            r_s: 2.0,
            dims: None,
            supervised: false,
            cca_reg: 1e-6,
            max_iter: None,
            epsilon: None,
            seed: 0,
        }
    }
}

/// A trained model together with whatever training diagnostics its method
/// produced.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: Model,
    pub dd_report: Option<DdReport>,
    pub di_report: Option<DiReport>,
    /// Embedded dimension actually used (0 for the baseline).
    pub dims: usize,
    /// Canonical correlations of the supervised embedding, when fit.
    pub correlations: Option<Vec<f64>>,
}

/// Trains a model on descriptor rows `x`. Labels are required when
/// `supervised` is set and otherwise ignored.
///
/// The embedded dimension comes from the bits-per-dimension ratio (or the
/// explicit `dims` override), then is capped by what the embedding can
/// support: `n - 1` directions unsupervised, the label-class count
/// supervised. Groups are laid out after capping.
pub fn train_model(
    x: &DMatrix<f64>,
    labels: Option<&[usize]>,
    opts: &TrainOptions,
) -> Result<TrainedModel> {
    let n = x.nrows();
    let big_d = x.ncols();
    if n == 0 || big_d == 0 {
        return Err(GhsError::EmptyInput("training descriptors"));
    }

    if opts.method == TrainMethod::Lsh {
        let model = Model::Lsh(fit_lsh(x, opts.bits, opts.seed)?);
        return Ok(TrainedModel {
            model,
            dd_report: None,
            di_report: None,
            dims: 0,
            correlations: None,
        });
    }

    let rho = opts.rho.unwrap_or_else(|| default_rho(opts.bits));
    let mut d = match opts.dims {
        Some(d) => {
            if d == 0 {
                return Err(GhsError::InvalidArgument("dims must be >= 1".into()));
            }
            d.min(big_d)
        }
        None => derive_dims(opts.bits, rho, big_d)?.0,
    };

    // Cap by what the embedding can actually produce.
    let embedding;
    let mut correlations = None;
    if opts.supervised {
        let labels = labels.ok_or(GhsError::InvalidArgument(
            "supervised training requires labels".into(),
        ))?;
        if labels.len() != n {
            return Err(GhsError::DimensionMismatch {
                context: "label rows",
                expected: n,
                got: labels.len(),
            });
        }
        let z = one_hot(labels)?;
        d = d.min(z.ncols()).max(1);
        let (model, corr) = fit_cca(x, &z, d, opts.cca_reg)?;
        correlations = Some(corr.iter().copied().collect());
        embedding = model;
    } else {
        d = d.min(n.saturating_sub(1)).max(1);
        embedding = fit_pca(x, d)?;
    }
    let y = embedding.embed(x)?;

    match opts.method {
        TrainMethod::Dd => {
            let mut cfg = TrainConfigDd::new(opts.bits);
            cfg.rho = rho;
            cfg.r_s = opts.r_s;
            cfg.seed = opts.seed;
            cfg.epsilon = opts.epsilon;
            if let Some(mi) = opts.max_iter {
                cfg.max_iter = mi;
            }
            let (constellation, report) = train_dd(&y, &cfg)?;
            Ok(TrainedModel {
                model: Model::Ghs { embedding, constellation },
                dd_report: Some(report),
                di_report: None,
                dims: d,
                correlations,
            })
        }
        TrainMethod::Di => {
            let mut cfg = TrainConfigDi::new(opts.bits);
            cfg.rho = rho;
            cfg.r_s = opts.r_s;
            cfg.seed = opts.seed;
            if let Some(mi) = opts.max_iter {
                cfg.max_iter = mi;
            }
            let (constellation, report) = train_di_constellation(&y, &cfg)?;
            Ok(TrainedModel {
                model: Model::Ghs { embedding, constellation },
                dd_report: None,
                di_report: Some(report),
                dims: d,
                correlations,
            })
        }
        TrainMethod::Lsh => unreachable!("handled above"),
    }
}

/// One benchmark result row.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub method: String,
    pub bits: usize,
    pub eval: EvalReport,
    pub n: usize,
    pub seed: u64,
}

/// CSV header matching [`BenchRow::csv`].
pub fn bench_csv_header() -> &'static str {
    "method,c,map,precision,recall,f1,radius,n,seed"
}

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{},{},{}",
            self.method,
            self.bits,
            self.eval.map,
            self.eval.precision,
            self.eval.recall,
            self.eval.f1,
            self.eval.radius,
            self.n,
            self.seed
        )
    }
}

/// Benchmark parameters shared by [`bench_run`] and [`sweep`].
#[derive(Debug, Clone)]
pub struct BenchOptions {
    /// Rows held out as queries.
    pub query_count: usize,
    /// True-neighbor fraction for ground truth.
    pub fraction: f64,
    /// Hamming lookup radius.
    pub radius: usize,
    /// Split/shuffle seed (also the training seed unless overridden in
    /// `train`).
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { query_count: 100, fraction: 0.02, radius: 2, seed: 0 }
    }
}

/// Splits `x` into base and query rows, trains on the base rows, encodes
/// both sides, computes Euclidean ground truth in descriptor space, and
/// scores the codes.
pub fn bench_run(
    x: &DMatrix<f64>,
    labels: Option<&[usize]>,
    train: &TrainOptions,
    bench: &BenchOptions,
) -> Result<BenchRow> {
    let n = x.nrows();
    let (kept, held) = split_indices(n, bench.query_count, bench.seed)?;
    let base = select_rows(x, &kept);
    let queries = select_rows(x, &held);
    let base_labels: Option<Vec<usize>> =
        labels.map(|l| kept.iter().map(|&i| l[i]).collect());

    let trained = train_model(&base, base_labels.as_deref(), train)?;
    let base_codes = trained.model.encode(&base)?;
    let query_codes = trained.model.encode(&queries)?;
    let truth = ground_truth_euclidean(&base, &queries, bench.fraction)?;
    let eval = evaluate(&base_codes, &query_codes, &truth, bench.radius)?;
    Ok(BenchRow {
        method: train.method.name().to_string(),
        bits: train.bits,
        eval,
        n,
        seed: train.seed,
    })
}

/// One sweep result: a benchmark row plus the grid point that produced it.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub bench: BenchRow,
    pub r_s: f64,
    pub rho: f64,
}

/// CSV header matching [`SweepRow::csv`].
pub fn sweep_csv_header() -> &'static str {
    "method,c,map,precision,recall,f1,radius,n,seed,rs,rho"
}

impl SweepRow {
    pub fn csv(&self) -> String {
        format!("{},{},{}", self.bench.csv(), self.r_s, self.rho)
    }
}

/// Runs [`bench_run`] over the cross product of sphere radii and
/// bits-per-dimension ratios.
pub fn sweep(
    x: &DMatrix<f64>,
    labels: Option<&[usize]>,
    train: &TrainOptions,
    bench: &BenchOptions,
    rs_grid: &[f64],
    rho_grid: &[f64],
) -> Result<Vec<SweepRow>> {
    if rs_grid.is_empty() || rho_grid.is_empty() {
        return Err(GhsError::InvalidArgument("sweep grids must be non-empty".into()));
    }
    let mut rows = Vec::with_capacity(rs_grid.len() * rho_grid.len());
    for &rho in rho_grid {
        for &r_s in rs_grid {
            let mut t = train.clone();
            t.r_s = r_s;
            t.rho = Some(rho);
            let row = bench_run(x, labels, &t, bench)?;
            rows.push(SweepRow { bench: row, r_s, rho });
        }
    }
    Ok(rows)
}

/// Parses a comma-separated grid of positive reals (CLI helper).
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for tok in s.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        let v: f64 = tok.parse().map_err(|_| {
            GhsError::InvalidArgument(format!("grid entry '{tok}' is not a number"))
        })?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(GhsError::InvalidArgument(format!(
                "grid entries must be positive, got {v}"
            )));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(GhsError::InvalidArgument("grid is empty".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{make_synthetic, SyntheticKind};

    fn clusters(n: usize, d: usize, seed: u64) -> (DMatrix<f64>, Vec<usize>) {
        make_synthetic(SyntheticKind::GaussianClusters, n, d, 5, seed).unwrap()
    }

    #[test]
    fn train_model_all_methods() {
        let (x, labels) = clusters(300, 12, 51);
        for method in [TrainMethod::Dd, TrainMethod::Di, TrainMethod::Lsh] {
            let mut opts = TrainOptions::new(8, method);
            opts.max_iter = Some(8);
            let trained = train_model(&x, Some(&labels), &opts).unwrap();
            assert_eq!(trained.model.bits(), 8);
            assert_eq!(trained.model.input_dim(), 12);
            let codes = trained.model.encode(&x).unwrap();
            assert_eq!(codes.rows(), 300);
            match method {
                TrainMethod::Dd => assert!(trained.dd_report.is_some()),
                TrainMethod::Di => assert!(trained.di_report.is_some()),
                TrainMethod::Lsh => {
                    assert!(trained.dd_report.is_none() && trained.di_report.is_none())
                }
            }
        }
    }

    #[test]
    fn dims_cap_by_data_and_labels() {
        let (x, labels) = clusters(40, 30, 53);
        // rho 0.5 asks for d = 15; data supports it.
        let mut opts = TrainOptions::new(8, TrainMethod::Dd);
        opts.rho = Some(0.5);
        opts.max_iter = Some(3);
        let trained = train_model(&x, None, &opts).unwrap();
        assert_eq!(trained.dims, 15);

        // Supervised: d caps at the class count (5).
        opts.supervised = true;
        let trained = train_model(&x, Some(&labels), &opts).unwrap();
        assert_eq!(trained.dims, 5);
        let corr = trained.correlations.unwrap();
        assert_eq!(corr.len(), 5);

        // Explicit dims override wins (clamped to the data width).
        opts.supervised = false;
        opts.dims = Some(7);
        let trained = train_model(&x, None, &opts).unwrap();
        assert_eq!(trained.dims, 7);
    }

    #[test]
    fn supervised_requires_labels() {
        let (x, _) = clusters(50, 6, 55);
        let mut opts = TrainOptions::new(4, TrainMethod::Dd);
        opts.supervised = true;
        opts.max_iter = Some(2);
        assert!(train_model(&x, None, &opts).is_err());
        let short = vec![0usize; 10];
        assert!(train_model(&x, Some(&short), &opts).is_err());
    }

    #[test]
    fn bench_run_produces_sane_metrics() {
        let (x, _) = clusters(400, 10, 57);
        let mut train = TrainOptions::new(8, TrainMethod::Dd);
        train.max_iter = Some(6);
        let bench = BenchOptions { query_count: 40, ..BenchOptions::default() };
        let row = bench_run(&x, None, &train, &bench).unwrap();
        assert_eq!(row.method, "dd");
        assert_eq!(row.n, 400);
        assert!(row.eval.map > 0.0 && row.eval.map <= 1.0);
        assert!(row.eval.f1 >= 0.0 && row.eval.f1 <= 1.0);
        assert_eq!(row.eval.n_queries, 40);
        // Clustered data should rank far better than chance (2% truth).
        assert!(row.eval.map > 0.1, "map {} too low", row.eval.map);

        let csv = row.csv();
        assert_eq!(csv.split(',').count(), bench_csv_header().split(',').count());
        assert!(csv.starts_with("dd,8,"));
    }

    #[test]
    fn bench_is_deterministic_per_seed() {
        let (x, _) = clusters(250, 8, 59);
        let mut train = TrainOptions::new(8, TrainMethod::Dd);
        train.max_iter = Some(5);
        let bench = BenchOptions { query_count: 30, ..BenchOptions::default() };
        let a = bench_run(&x, None, &train, &bench).unwrap();
        let b = bench_run(&x, None, &train, &bench).unwrap();
        assert_eq!(a.eval.map, b.eval.map);
        assert_eq!(a.eval.f1, b.eval.f1);
    }

    #[test]
    fn sweep_covers_grid() {
        let (x, _) = clusters(200, 8, 61);
        let mut train = TrainOptions::new(8, TrainMethod::Dd);
        train.max_iter = Some(3);
        let bench = BenchOptions { query_count: 25, ..BenchOptions::default() };
        let rows = sweep(&x, None, &train, &bench, &[1.0, 2.0], &[1.0]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].r_s, 1.0);
        assert_eq!(rows[1].r_s, 2.0);
        let csv = rows[0].csv();
        assert_eq!(csv.split(',').count(), sweep_csv_header().split(',').count());
    }

    #[test]
    fn grid_parser() {
        assert_eq!(parse_grid("0.1, 0.5,1").unwrap(), vec![0.1, 0.5, 1.0]);
        assert!(parse_grid("").is_err());
        assert!(parse_grid("a,b").is_err());
        assert!(parse_grid("-1").is_err());
    }

    #[test]
    fn method_parsing() {
        assert_eq!("dd".parse::<TrainMethod>().unwrap(), TrainMethod::Dd);
        assert_eq!("DI".parse::<TrainMethod>().unwrap(), TrainMethod::Di);
        assert_eq!("lsh".parse::<TrainMethod>().unwrap(), TrainMethod::Lsh);
        assert!("pq".parse::<TrainMethod>().is_err());
    }
}
