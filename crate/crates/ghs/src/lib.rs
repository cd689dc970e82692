//! Balanced binary codes for approximate nearest-neighbor search.
//!
//! The pipeline maps high-dimensional descriptors to compact bit strings
//! whose Hamming distances track the original Euclidean geometry:
//!
//! 1. **Embed** — project descriptors to a low-dimensional space with an
//!    unsupervised variance-preserving projection ([`fit_pca`]) or a
//!    label-correlated one ([`fit_cca`]), then normalize into the unit ball.
//! 2. **Encode** — place `c` "satellite" points on a sphere around the data;
//!    bit `j` of a point is the sign of its distance to satellite `j` minus
//!    that satellite's median threshold ([`Constellation`]). Median
//!    thresholds make every bit split the training data in half, so codes
//!    are balanced by construction.
//! 3. **Train** — position the satellites either by minimizing a
//!    quantization loss on the data ([`train_dd`]) or by spreading them over
//!    the sphere with no data at all ([`train_di`]).
//! 4. **Search** — rank packed codes by Hamming distance or look up within a
//!    radius ([`code`]), and score retrieval quality against Euclidean
//!    ground truth ([`eval`]).
//!
//! A sign-random-projection baseline ([`fit_lsh`]) and binary vector I/O in
//! the common `fvecs`/`bvecs`/`ivecs` formats ([`dataio`]) round out the
//! toolkit. The `ghs` binary exposes everything as subcommands.

pub mod code;
pub mod constellation;
pub mod dataio;
pub mod dd;
pub mod di;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod lsh;
pub mod model;
pub mod pipeline;

pub use code::{hamming, lookup_within_radius, rank_by_hamming, CodeMatrix};
pub use constellation::{d2s, fit_thresholds, Constellation, Group};
pub use dataio::{
    make_synthetic, read_labels, read_vectors, split, split_indices, write_vectors, DatasetSpec,
    SyntheticKind, VectorFormat,
};
pub use dd::{
    default_rho, derive_dims, gps_solve_satellite, procrustes_rotation, train_dd, DdReport,
    TrainConfigDd,
};
pub use di::{train_di, train_di_constellation, DiReport, TrainConfigDi};
pub use embedding::{fit_cca, fit_pca, one_hot, EmbeddingKind, EmbeddingModel};
pub use error::{GhsError, Result};
pub use eval::{
    affinity_diagnostic, average_precision, evaluate, ground_truth_euclidean, bit_correlation_probe,
    EvalReport,
};
pub use lsh::{fit_lsh, lsh_encode, LshModel};
pub use model::{read_codes, write_codes, Model};
pub use pipeline::{
    bench_csv_header, bench_run, parse_grid, sweep, sweep_csv_header, train_model, BenchOptions,
    BenchRow, SweepRow, TrainMethod, TrainOptions, TrainedModel,
};
