//! Command-line interface for training, encoding, querying, and evaluating
//! balanced binary codes.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};

use ghs::dataio::{read_labels, read_vectors, DatasetSpec, VectorFormat};
use ghs::model::{read_codes, write_codes, Model};
use ghs::pipeline::{
    bench_csv_header, bench_run, parse_grid, sweep, sweep_csv_header, BenchOptions, TrainMethod,
    TrainOptions,
};
use ghs::{evaluate, ground_truth_euclidean, hamming, rank_by_hamming};

#[derive(Parser)]
#[command(
    name = "ghs",
    about = "Balanced binary codes for approximate nearest-neighbor search",
    version
)]
struct Cli {
    /// Worker threads (also honored from GHS_THREADS; 0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputArgs {
    /// Input vector file.
    #[arg(long)]
    input: PathBuf,
    /// Input format: fvecs, bvecs, ivecs, or csv.
    #[arg(long, default_value = "fvecs")]
    format: String,
    /// Read at most this many rows.
    #[arg(long)]
    limit: Option<usize>,
}

impl InputArgs {
    fn read(&self) -> Result<nalgebra::DMatrix<f64>> {
        let format: VectorFormat = self.format.parse()?;
        let spec = DatasetSpec::new(&self.input, format).with_limit(self.limit);
        Ok(read_vectors(&spec)?)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Code length in bits.
    #[arg(long, default_value_t = 32)]
    bits: usize,
    /// Training method: dd (data-dependent), di (data-independent), or lsh.
    #[arg(long, default_value = "dd")]
    method: String,
    /// Bits-per-dimension ratio (default: 1 for <= 16 bits, else 0.5).
    #[arg(long)]
    rho: Option<f64>,
    /// Satellite sphere radius.
    #[arg(long, default_value_t = 2.0)]
    rs: f64,
    /// Explicit embedded dimension, overriding the ratio-derived value.
    #[arg(long)]
    dims: Option<usize>,
    /// Label file for supervised embedding (one integer per row).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Label file format: csv or ivecs.
    #[arg(long, default_value = "csv")]
    labels_format: String,
    /// Fit the embedding against labels (canonical correlation).
    #[arg(long)]
    supervised: bool,
    /// Regularization for the supervised embedding.
    #[arg(long, default_value_t = 1e-6)]
    cca_reg: f64,
    /// Iteration cap for the trainer.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Convergence window on the quantization loss.
    #[arg(long)]
    epsilon: Option<f64>,
    /// RNG seed (initialization and any sampling).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the per-iteration loss trace as CSV to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a vector file and save it.
    Train(TrainArgs),
    /// Encode a vector file with a trained model into packed codes.
    Encode {
        #[command(flatten)]
        input: InputArgs,
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        /// Output code file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank base codes by Hamming distance to each query vector.
    Query {
        /// Query vector file.
        #[arg(long)]
        input: PathBuf,
        /// Query file format.
        #[arg(long, default_value = "fvecs")]
        format: String,
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        /// Base code file to search.
        #[arg(long)]
        codes: PathBuf,
        /// Neighbors to report per query.
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Score query codes against base codes.
    Eval {
        /// Base code file.
        #[arg(long)]
        base_codes: PathBuf,
        /// Query code file.
        #[arg(long)]
        query_codes: PathBuf,
        /// Ground-truth file: one line per query, comma-separated base
        /// indices. Mutually exclusive with --base-vectors.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        /// Base vector file for Euclidean ground truth.
        #[arg(long)]
        base_vectors: Option<PathBuf>,
        /// Query vector file for Euclidean ground truth.
        #[arg(long)]
        query_vectors: Option<PathBuf>,
        /// Vector file format for --base-vectors/--query-vectors.
        #[arg(long, default_value = "fvecs")]
        format: String,
        /// True-neighbor fraction for Euclidean ground truth.
        #[arg(long, default_value_t = 0.02)]
        fraction: f64,
        /// Hamming lookup radius.
        #[arg(long, default_value_t = 2)]
        radius: usize,
    },
    /// Split, train, encode, and score in one run; emits a CSV row.
    Bench {
        #[command(flatten)]
        train: TrainArgs,
        /// Rows held out as queries.
        #[arg(long, default_value_t = 100)]
        queries: usize,
        /// True-neighbor fraction for ground truth.
        #[arg(long, default_value_t = 0.02)]
        fraction: f64,
        /// Hamming lookup radius.
        #[arg(long, default_value_t = 2)]
        radius: usize,
        /// Suppress the CSV header line.
        #[arg(long)]
        no_header: bool,
    },
    /// Benchmark over a grid of sphere radii and bits-per-dimension ratios.
    Sweep {
        #[command(flatten)]
        train: TrainArgs,
        /// Rows held out as queries.
        #[arg(long, default_value_t = 100)]
        queries: usize,
        /// True-neighbor fraction for ground truth.
        #[arg(long, default_value_t = 0.02)]
        fraction: f64,
        /// Hamming lookup radius.
        #[arg(long, default_value_t = 2)]
        radius: usize,
        /// Comma-separated sphere radii to try.
        #[arg(long, default_value = "0.1,0.5,1,2,4")]
        rs_grid: String,
        /// Comma-separated bits-per-dimension ratios to try.
        #[arg(long)]
        rho_grid: Option<String>,
        /// Suppress the CSV header line.
        #[arg(long)]
        no_header: bool,
    },
}

fn configure_threads(flag: usize) -> Result<()> {
    let threads = if flag > 0 {
        flag
    } else {
        std::env::var("GHS_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .unwrap_or(0)
    };
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn train_options(args: &TrainArgs) -> Result<(TrainOptions, Option<Vec<usize>>)> {
    let method: TrainMethod = args.method.parse()?;
    let mut opts = TrainOptions::new(args.bits, method);
    opts.rho = args.rho;
    opts.r_s = args.rs;
    opts.dims = args.dims;
    opts.supervised = args.supervised;
    opts.cca_reg = args.cca_reg;
    opts.max_iter = args.max_iter;
    opts.epsilon = args.epsilon;
    opts.seed = args.seed;

    let labels = match &args.labels {
        Some(path) => {
            let format: VectorFormat = args.labels_format.parse()?;
            Some(read_labels(path, format, args.input.limit)?)
        }
        None => None,
    };
    if opts.supervised && labels.is_none() {
        bail!("--supervised requires --labels");
    }
    Ok((opts, labels))
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let x = args.input.read()?;
    let (opts, labels) = train_options(args)?;
    let trained = ghs::pipeline::train_model(&x, labels.as_deref(), &opts)?;
    trained.model.save(&args.out)?;

    eprintln!(
        "trained {} model: {} bits, input dim {}, embedded dim {}",
        opts.method.name(),
        trained.model.bits(),
        trained.model.input_dim(),
        trained.dims
    );
    if let Some(rep) = &trained.dd_report {
        eprintln!(
            "loss {:.4} -> {:.4} in {} cycles ({}, {} multilateration fallbacks)",
            rep.initial_loss,
            rep.final_loss,
            rep.iterations,
            if rep.converged { "converged" } else { "iteration cap" },
            rep.gps_fallbacks
        );
        if let Some(path) = &args.trace {
            std::fs::write(path, rep.trace_csv())
                .with_context(|| format!("writing trace to {}", path.display()))?;
        }
    }
    if let Some(rep) = &trained.di_report {
        eprintln!(
            "spread objective {:.4} -> {:.4} in {} trials ({})",
            rep.initial_objective,
            rep.final_objective,
            rep.iterations,
            if rep.converged { "converged" } else { "iteration cap" }
        );
        if let Some(path) = &args.trace {
            let mut csv = String::from("iteration,objective,step\n");
            for rec in &rep.trace {
                csv.push_str(&format!("{},{},{}\n", rec.iteration, rec.objective, rec.step));
            }
            std::fs::write(path, csv)
                .with_context(|| format!("writing trace to {}", path.display()))?;
        }
    }
    if let Some(corr) = &trained.correlations {
        let rendered: Vec<String> = corr.iter().map(|v| format!("{v:.4}")).collect();
        eprintln!("canonical correlations: [{}]", rendered.join(", "));
    }
    println!("{}", args.out.display());
    Ok(())
}

fn cmd_encode(input: &InputArgs, model_path: &Path, out: &Path) -> Result<()> {
    let x = input.read()?;
    let model = Model::load(model_path)?;
    let codes = model.encode(&x)?;
    write_codes(&codes, out)?;
    eprintln!("encoded {} rows x {} bits", codes.rows(), codes.bits());
    println!("{}", out.display());
    Ok(())
}

fn cmd_query(
    input: &Path,
    format: &str,
    model_path: &Path,
    codes_path: &Path,
    k: usize,
) -> Result<()> {
    let format: VectorFormat = format.parse()?;
    let spec = DatasetSpec::new(input, format);
    let queries = read_vectors(&spec)?;
    let model = Model::load(model_path)?;
    let base = read_codes(codes_path)?;
    let query_codes = model.encode(&queries)?;
    if query_codes.bits() != base.bits() {
        bail!(
            "model produces {}-bit codes but the base file holds {}-bit codes",
            query_codes.bits(),
            base.bits()
        );
    }
    for qi in 0..query_codes.rows() {
        let ranked = rank_by_hamming(query_codes.row(qi), &base, k)?;
        let rendered: Vec<String> = ranked
            .iter()
            .map(|&bi| {
                let dist = hamming(query_codes.row(qi), base.row(bi)).expect("widths match");
                format!("{bi}:{dist}")
            })
            .collect();
        println!("{}", rendered.join(" "));
    }
    Ok(())
}

fn read_ground_truth_file(path: &Path, n_queries: usize, n_base: usize) -> Result<Vec<Vec<usize>>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading ground truth from {}", path.display()))?;
    let mut truth = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            truth.push(Vec::new());
            continue;
        }
        let mut indices = Vec::new();
        for tok in line.split(',') {
            let tok = tok.trim();
            if tok.is_empty() {
                continue;
            }
            let idx: usize = tok
                .parse()
                .with_context(|| format!("{}:{}: bad index '{tok}'", path.display(), lineno + 1))?;
            if idx >= n_base {
                bail!(
                    "{}:{}: index {idx} out of range for {n_base} base rows",
                    path.display(),
                    lineno + 1
                );
            }
            indices.push(idx);
        }
        truth.push(indices);
    }
    if truth.len() != n_queries {
        bail!(
            "ground truth has {} lines but there are {n_queries} queries",
            truth.len()
        );
    }
    Ok(truth)
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    base_codes: &Path,
    query_codes: &Path,
    ground_truth: Option<&Path>,
    base_vectors: Option<&Path>,
    query_vectors: Option<&Path>,
    format: &str,
    fraction: f64,
    radius: usize,
) -> Result<()> {
    let base = read_codes(base_codes)?;
    let queries = read_codes(query_codes)?;
    let truth = match (ground_truth, base_vectors, query_vectors) {
        (Some(path), None, None) => read_ground_truth_file(path, queries.rows(), base.rows())?,
        (None, Some(bp), Some(qp)) => {
            let format: VectorFormat = format.parse()?;
            let bx = read_vectors(&DatasetSpec::new(bp, format))?;
            let qx = read_vectors(&DatasetSpec::new(qp, format))?;
            if bx.nrows() != base.rows() || qx.nrows() != queries.rows() {
                bail!(
                    "vector files ({} base, {} query rows) do not match the code files ({}, {})",
                    bx.nrows(),
                    qx.nrows(),
                    base.rows(),
                    queries.rows()
                );
            }
            ground_truth_euclidean(&bx, &qx, fraction)?
        }
        _ => bail!("provide either --ground-truth or both --base-vectors and --query-vectors"),
    };
    let report = evaluate(&base, &queries, &truth, radius)?;
    println!(
        "map={:.6} precision={:.6} recall={:.6} f1={:.6} radius={} queries={}",
        report.map, report.precision, report.recall, report.f1, report.radius, report.n_queries
    );
    if report.empty_truth_count > 0 || report.empty_retrieval_count > 0 {
        eprintln!(
            "note: {} queries had empty truth, {} retrieved nothing within radius {}",
            report.empty_truth_count, report.empty_retrieval_count, report.radius
        );
    }
    Ok(())
}

fn cmd_bench(
    args: &TrainArgs,
    queries: usize,
    fraction: f64,
    radius: usize,
    no_header: bool,
) -> Result<()> {
    let x = args.input.read()?;
    let (opts, labels) = train_options(args)?;
    let bench = BenchOptions { query_count: queries, fraction, radius, seed: args.seed };
    let row = bench_run(&x, labels.as_deref(), &opts, &bench)?;
    if !no_header {
        println!("{}", bench_csv_header());
    }
    println!("{}", row.csv());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    args: &TrainArgs,
    queries: usize,
    fraction: f64,
    radius: usize,
    rs_grid: &str,
    rho_grid: Option<&str>,
    no_header: bool,
) -> Result<()> {
    let x = args.input.read()?;
    let (opts, labels) = train_options(args)?;
    let rs_grid = parse_grid(rs_grid)?;
    let rho_grid = match rho_grid {
        Some(s) => parse_grid(s)?,
        None => vec![opts.rho.unwrap_or_else(|| ghs::default_rho(opts.bits))],
    };
    let bench = BenchOptions { query_count: queries, fraction, radius, seed: args.seed };
    let rows = sweep(&x, labels.as_deref(), &opts, &bench, &rs_grid, &rho_grid)?;
    if !no_header {
        println!("{}", sweep_csv_header());
    }
    for row in rows {
        println!("{}", row.csv());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    configure_threads(cli.threads)?;
    match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Encode { input, model, out } => cmd_encode(input, model, out),
        Command::Query { input, format, model, codes, k } => {
            cmd_query(input, format, model, codes, *k)
        }
        Command::Eval {
            base_codes,
            query_codes,
            ground_truth,
            base_vectors,
            query_vectors,
            format,
            fraction,
            radius,
        } => cmd_eval(
            base_codes,
            query_codes,
            ground_truth.as_deref(),
            base_vectors.as_deref(),
            query_vectors.as_deref(),
            format,
            *fraction,
            *radius,
        ),
        Command::Bench { train, queries, fraction, radius, no_header } => {
            cmd_bench(train, *queries, *fraction, *radius, *no_header)
        }
        Command::Sweep {
            train,
            queries,
            fraction,
            radius,
            rs_grid,
            rho_grid,
            no_header,
        } => cmd_sweep(
            train,
            *queries,
            *fraction,
            *radius,
            rs_grid,
            rho_grid.as_deref(),
            *no_header,
        ),
    }
}
