//! Dataset I/O: the three little-endian vector formats used by the common
//! ANN benchmark collections, a plain CSV reader, deterministic train/query
//! splitting, and synthetic data generators for tests and benchmarks.
//!
//! Binary record layout (all little-endian): a 4-byte `i32` dimension header
//! followed by `dim` payload elements — `f32` for `.fvecs`, `u8` for
//! `.bvecs`, `i32` for `.ivecs`. Every record in a file must carry the same
//! dimension.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{GhsError, Result};

/// Vector file encodings understood by [`read_vectors`] / [`write_vectors`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorFormat {
    Fvecs,
    Bvecs,
    Ivecs,
    Csv,
}

impl FromStr for VectorFormat {
    type Err = GhsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fvecs" => Ok(VectorFormat::Fvecs),
            "bvecs" => Ok(VectorFormat::Bvecs),
            "ivecs" => Ok(VectorFormat::Ivecs),
            "csv" => Ok(VectorFormat::Csv),
            other => Err(GhsError::InvalidArgument(format!(
                "unknown vector format '{other}' (expected fvecs|bvecs|ivecs|csv)"
            ))),
        }
    }
}

/// Where a dataset lives and how much of it to use.
#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub format: VectorFormat,
    /// Keep only the first `limit` records when set.
    pub limit: Option<usize>,
    /// Rows to hold out as queries (used by benchmark splitting; 0 = none).
    pub query_count: usize,
    /// Seed for the held-out row choice.
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(path: impl Into<PathBuf>, format: VectorFormat) -> Self {
        DatasetSpec {
            path: path.into(),
            format,
            limit: None,
            query_count: 0,
            seed: 0,
        }
    }

    pub fn with_limit(mut self, limit: Option<usize>) -> Self {
        self.limit = limit;
        self
    }
}

/// Reads a full dataset into an `n x D` matrix of `f64`.
///
/// `u8`/`i32`/`f32` payloads widen exactly. Errors on an empty file, a
/// non-positive or implausibly large dimension header, a record whose
/// dimension differs from the first record's, or a record cut short by EOF.
pub fn read_vectors(spec: &DatasetSpec) -> Result<DMatrix<f64>> {
    if let Some(0) = spec.limit {
        return Err(GhsError::InvalidArgument(
            "record limit must be at least 1".into(),
        ));
    }
    let rows = match spec.format {
        VectorFormat::Csv => read_csv_rows(&spec.path, spec.limit)?,
        binary => read_binary_rows(&spec.path, binary, spec.limit)?,
    };
    if rows.is_empty() {
        return Err(GhsError::EmptyInput("dataset contains no records"));
    }
    let dim = rows[0].len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(DMatrix::from_row_slice(flat.len() / dim, dim, &flat))
}

fn read_binary_rows(
    path: &Path,
    format: VectorFormat,
    limit: Option<usize>,
) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(GhsError::io(path))?;
    let mut r = BufReader::new(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dim: Option<usize> = None;
    loop {
        if let Some(limit) = limit {
            if rows.len() == limit {
                break;
            }
        }
        let record = rows.len();
        let header = match r.read_i32::<LittleEndian>() {
            Ok(v) => v,
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(GhsError::io(path)(e)),
        };
        if header <= 0 || header > (1 << 24) {
            return Err(GhsError::parse(
                path,
                format!("record {record}: implausible dimension {header}"),
            ));
        }
        let d = header as usize;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(GhsError::parse(
                    path,
                    format!("record {record}: dimension {d} != first record's {expected}"),
                ))
            }
            Some(_) => {}
        }
        let mut row = Vec::with_capacity(d);
        let payload = (|| -> std::io::Result<()> {
            match format {
                VectorFormat::Fvecs => {
                    for _ in 0..d {
                        row.push(r.read_f32::<LittleEndian>()? as f64);
                    }
                }
                VectorFormat::Bvecs => {
                    let mut buf = vec![0u8; d];
                    r.read_exact(&mut buf)?;
                    row.extend(buf.into_iter().map(f64::from));
                }
                VectorFormat::Ivecs => {
                    for _ in 0..d {
                        row.push(r.read_i32::<LittleEndian>()? as f64);
                    }
                }
                VectorFormat::Csv => unreachable!("csv handled separately"),
            }
            Ok(())
        })();
        match payload {
            Ok(()) => rows.push(row),
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => {
                return Err(GhsError::parse(
                    path,
                    format!("record {record}: truncated mid-record"),
                ))
            }
            Err(e) => return Err(GhsError::io(path)(e)),
        }
    }
    Ok(rows)
}

fn read_csv_rows(path: &Path, limit: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(GhsError::io(path))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dim: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(limit) = limit {
            if rows.len() == limit {
                break;
            }
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(row) => {
                match dim {
                    None => dim = Some(row.len()),
                    Some(expected) if expected != row.len() => {
                        return Err(GhsError::parse(
                            path,
                            format!(
                                "line {}: {} fields != first data row's {expected}",
                                lineno + 1,
                                row.len()
                            ),
                        ))
                    }
                    Some(_) => {}
                }
                rows.push(row);
            }
            Err(_) if rows.is_empty() && dim.is_none() => {
                // An unparsable first line is an optional header; skip it.
                continue;
            }
            Err(e) => {
                return Err(GhsError::parse(
                    path,
                    format!("line {}: {e}", lineno + 1),
                ))
            }
        }
    }
    Ok(rows)
}

/// Writes a matrix in the given format. For `bvecs`/`ivecs` every value must
/// be an integer representable in the payload type; for `fvecs` values are
/// narrowed to `f32` (exact round-trips therefore need `f32`-representable
/// data). CSV output is headerless with full-precision floats.
pub fn write_vectors(path: &Path, format: VectorFormat, x: &DMatrix<f64>) -> Result<()> {
    let file = File::create(path).map_err(GhsError::io(path))?;
    let mut w = BufWriter::new(file);
    let d = x.ncols();
    for (i, row) in x.row_iter().enumerate() {
        match format {
            VectorFormat::Csv => {
                let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                writeln!(w, "{}", line.join(",")).map_err(GhsError::io(path))?;
                continue;
            }
            _ => w
                .write_i32::<LittleEndian>(d as i32)
                .map_err(GhsError::io(path))?,
        }
        for &v in row.iter() {
            match format {
                VectorFormat::Fvecs => w
                    .write_f32::<LittleEndian>(v as f32)
                    .map_err(GhsError::io(path))?,
                VectorFormat::Bvecs => {
                    if v.fract() != 0.0 || !(0.0..=255.0).contains(&v) {
                        return Err(GhsError::InvalidArgument(format!(
                            "row {i}: value {v} not representable as u8"
                        )));
                    }
                    w.write_all(&[v as u8]).map_err(GhsError::io(path))?;
                }
                VectorFormat::Ivecs => {
                    if v.fract() != 0.0 || v < i32::MIN as f64 || v > i32::MAX as f64 {
                        return Err(GhsError::InvalidArgument(format!(
                            "row {i}: value {v} not representable as i32"
                        )));
                    }
                    w.write_i32::<LittleEndian>(v as i32)
                        .map_err(GhsError::io(path))?;
                }
                VectorFormat::Csv => unreachable!(),
            }
        }
    }
    w.flush().map_err(GhsError::io(path))
}

/// Reads per-row integer labels, either a one-column CSV or one-dimensional
/// `ivecs` records.
pub fn read_labels(path: &Path, format: VectorFormat, limit: Option<usize>) -> Result<Vec<usize>> {
    let spec = DatasetSpec {
        path: path.to_path_buf(),
        format,
        limit,
        query_count: 0,
        seed: 0,
    };
    let m = read_vectors(&spec)?;
    if m.ncols() != 1 {
        return Err(GhsError::parse(
            path,
            format!("labels must be one value per record, found {}", m.ncols()),
        ));
    }
    m.column(0)
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v.fract() != 0.0 || v < 0.0 {
                Err(GhsError::parse(
                    path,
                    format!("record {i}: label {v} is not a non-negative integer"),
                ))
            } else {
                Ok(v as usize)
            }
        })
        .collect()
}

/// Deterministically partitions `0..n` into a kept set and `query_count`
/// held-out indices (both ascending). Sampling is uniform without
/// replacement.
pub fn split_indices(n: usize, query_count: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if query_count == 0 || query_count >= n {
        return Err(GhsError::InvalidArgument(format!(
            "query count {query_count} outside 1..{n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held: Vec<usize> = sample(&mut rng, n, query_count).into_vec();
    held.sort_unstable();
    let mut kept = Vec::with_capacity(n - query_count);
    let mut h = 0usize;
    for i in 0..n {
        if h < held.len() && held[h] == i {
            h += 1;
        } else {
            kept.push(i);
        }
    }
    Ok((kept, held))
}

/// Splits rows of `x` into (base, queries) with [`split_indices`].
pub fn split(x: &DMatrix<f64>, query_count: usize, seed: u64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (kept, held) = split_indices(x.nrows(), query_count, seed)?;
    Ok((select_rows(x, &kept), select_rows(x, &held)))
}

/// Copies the listed rows of `x` into a new matrix, in the given order.
pub fn select_rows(x: &DMatrix<f64>, indices: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(indices.len(), x.ncols(), |i, j| x[(indices[i], j)])
}

/// Families of synthetic data for tests and benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Uniform over the unit ball (exact radial law `r ~ U^(1/d)`).
    UniformBall,
    /// Isotropic unit-variance Gaussians around `clusters` centers placed on
    /// a sphere of radius `2 sqrt(d)`, labeled by cluster.
    GaussianClusters,
}

/// Generates `n` points in `d` dimensions plus a label per point (all zeros
/// for the ball). Deterministic in `seed`.
pub fn make_synthetic(
    kind: SyntheticKind,
    n: usize,
    d: usize,
    clusters: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, Vec<usize>)> {
    if n == 0 || d == 0 {
        return Err(GhsError::InvalidArgument(format!(
            "synthetic data needs n >= 1 and d >= 1, got n = {n}, d = {d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        SyntheticKind::UniformBall => {
            let mut x = DMatrix::zeros(n, d);
            for i in 0..n {
                let dir = random_unit_vector(d, &mut rng);
                let radius: f64 = rng.gen::<f64>().powf(1.0 / d as f64);
                for j in 0..d {
                    x[(i, j)] = dir[j] * radius;
                }
            }
            Ok((x, vec![0; n]))
        }
        SyntheticKind::GaussianClusters => {
            if clusters == 0 {
                return Err(GhsError::InvalidArgument(
                    "cluster count must be at least 1".into(),
                ));
            }
            let radius = 2.0 * (d as f64).sqrt();
            let centers: Vec<Vec<f64>> = (0..clusters)
                .map(|_| {
                    random_unit_vector(d, &mut rng)
                        .into_iter()
                        .map(|v| v * radius)
                        .collect()
                })
                .collect();
            let mut x = DMatrix::zeros(n, d);
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                let cls = rng.gen_range(0..clusters);
                for j in 0..d {
                    let noise: f64 = rng.sample(StandardNormal);
                    x[(i, j)] = centers[cls][j] + noise;
                }
                labels.push(cls);
            }
            Ok((x, labels))
        }
    }
}

fn random_unit_vector(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::Rng;

    fn spec(path: &Path, format: VectorFormat) -> DatasetSpec {
        DatasetSpec::new(path, format)
    }

    fn roundtrip(format: VectorFormat, x: &DMatrix<f64>) -> DMatrix<f64> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.bin");
        write_vectors(&path, format, x).unwrap();
        read_vectors(&spec(&path, format)).unwrap()
    }

    #[test]
    fn fvecs_roundtrip_is_bit_exact_for_f32_values() {
        let mut rng = StdRng::seed_from_u64(41);
        let x = DMatrix::from_fn(10, 4, |_, _| rng.gen_range(-5.0f32..5.0) as f64);
        assert_eq!(roundtrip(VectorFormat::Fvecs, &x), x);
    }

    #[test]
    fn bvecs_and_ivecs_roundtrip_integers_exactly() {
        let mut rng = StdRng::seed_from_u64(42);
        let b = DMatrix::from_fn(7, 5, |_, _| rng.gen_range(0u8..=255) as f64);
        assert_eq!(roundtrip(VectorFormat::Bvecs, &b), b);
        let i = DMatrix::from_fn(7, 5, |_, _| rng.gen_range(-40000i32..40000) as f64);
        assert_eq!(roundtrip(VectorFormat::Ivecs, &i), i);
    }

    #[test]
    fn csv_roundtrip_preserves_f64_values() {
        let mut rng = StdRng::seed_from_u64(43);
        let x = DMatrix::from_fn(6, 3, |_, _| rng.gen_range(-1.0..1.0));
        // Rust's shortest-float formatting reparses to the identical f64.
        assert_eq!(roundtrip(VectorFormat::Csv, &x), x);
    }

    #[test]
    fn csv_header_is_skipped_and_ragged_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "x,y\n1.0,2.0\n3.0,4.0\n").unwrap();
        let m = read_vectors(&spec(&path, VectorFormat::Csv)).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));

        std::fs::write(&path, "1.0,2.0\n3.0\n").unwrap();
        assert!(matches!(
            read_vectors(&spec(&path, VectorFormat::Csv)),
            Err(GhsError::Parse { .. })
        ));
    }

    #[test]
    fn binary_reader_rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.fvecs");

        // Truncated payload.
        std::fs::write(&path, [3u8, 0, 0, 0, 1, 2]).unwrap();
        assert!(matches!(
            read_vectors(&spec(&path, VectorFormat::Fvecs)),
            Err(GhsError::Parse { .. })
        ));

        // Non-positive dimension.
        std::fs::write(&path, (-1i32).to_le_bytes()).unwrap();
        assert!(matches!(
            read_vectors(&spec(&path, VectorFormat::Fvecs)),
            Err(GhsError::Parse { .. })
        ));

        // Dimension changes between records.
        let mut bytes = Vec::new();
        bytes.extend(1i32.to_le_bytes());
        bytes.extend(1.0f32.to_le_bytes());
        bytes.extend(2i32.to_le_bytes());
        bytes.extend(1.0f32.to_le_bytes());
        bytes.extend(2.0f32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            read_vectors(&spec(&path, VectorFormat::Fvecs)),
            Err(GhsError::Parse { .. })
        ));

        // Empty file.
        std::fs::write(&path, []).unwrap();
        assert!(matches!(
            read_vectors(&spec(&path, VectorFormat::Fvecs)),
            Err(GhsError::EmptyInput(_))
        ));
    }

    #[test]
    fn limit_truncates_reads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.fvecs");
        let x = DMatrix::from_fn(9, 2, |i, j| (i * 2 + j) as f64);
        write_vectors(&path, VectorFormat::Fvecs, &x).unwrap();
        let mut s = spec(&path, VectorFormat::Fvecs);
        s.limit = Some(4);
        assert_eq!(read_vectors(&s).unwrap(), x.rows(0, 4).into_owned());
    }

    #[test]
    fn write_rejects_unrepresentable_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bvecs");
        let bad = DMatrix::from_row_slice(1, 2, &[1.5, 2.0]);
        assert!(write_vectors(&path, VectorFormat::Bvecs, &bad).is_err());
        let oob = DMatrix::from_row_slice(1, 2, &[256.0, 0.0]);
        assert!(write_vectors(&path, VectorFormat::Bvecs, &oob).is_err());
        let big = DMatrix::from_row_slice(1, 1, &[3e9]);
        assert!(write_vectors(&path, VectorFormat::Ivecs, &big).is_err());
    }

    #[test]
    fn labels_roundtrip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        std::fs::write(&path, "0\n3\n1\n").unwrap();
        assert_eq!(
            read_labels(&path, VectorFormat::Csv, None).unwrap(),
            vec![0, 3, 1]
        );
        std::fs::write(&path, "0.5\n").unwrap();
        assert!(read_labels(&path, VectorFormat::Csv, None).is_err());
        std::fs::write(&path, "1,2\n3,4\n").unwrap();
        assert!(read_labels(&path, VectorFormat::Csv, None).is_err());
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let (kept1, held1) = split_indices(100, 10, 7).unwrap();
        let (kept2, held2) = split_indices(100, 10, 7).unwrap();
        assert_eq!(kept1, kept2);
        assert_eq!(held1, held2);
        let (_, held3) = split_indices(100, 10, 8).unwrap();
        assert_ne!(held1, held3);
        assert!(split_indices(10, 0, 0).is_err());
        assert!(split_indices(10, 10, 0).is_err());
    }

    proptest! {
        #[test]
        fn split_partitions_every_row_exactly_once(
            n in 2usize..200,
            qfrac in 1usize..100,
            seed in any::<u64>(),
        ) {
            let q = (qfrac * (n - 1) / 100).max(1);
            let (kept, held) = split_indices(n, q, seed).unwrap();
            prop_assert_eq!(held.len(), q);
            let mut all: Vec<usize> = kept.iter().chain(held.iter()).copied().collect();
            all.sort_unstable();
            let expected: Vec<usize> = (0..n).collect();
            prop_assert_eq!(all, expected);
        }
    }

    #[test]
    fn uniform_ball_stays_inside_and_fills_radially() {
        let (x, labels) = make_synthetic(SyntheticKind::UniformBall, 4000, 3, 1, 5).unwrap();
        assert!(labels.iter().all(|&l| l == 0));
        let norms: Vec<f64> = x.row_iter().map(|r| r.norm()).collect();
        assert!(norms.iter().all(|&v| v <= 1.0));
        // E[r] for r ~ U^(1/d) is d/(d+1) = 0.75 in 3-D.
        let mean = norms.iter().sum::<f64>() / norms.len() as f64;
        assert!((mean - 0.75).abs() < 0.02, "mean radius {mean}");
    }

    #[test]
    fn gaussian_clusters_label_and_separate() {
        let (x, labels) =
            make_synthetic(SyntheticKind::GaussianClusters, 2000, 8, 5, 6).unwrap();
        assert_eq!(x.nrows(), 2000);
        assert!(labels.iter().all(|&l| l < 5));
        // Same-cluster pairs should usually be closer than cross-cluster pairs.
        let mut same = Vec::new();
        let mut cross = Vec::new();
        for i in (0..200).step_by(2) {
            let d = (x.row(i) - x.row(i + 1)).norm();
            if labels[i] == labels[i + 1] {
                same.push(d);
            } else {
                cross.push(d);
            }
        }
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        assert!(avg(&same) < avg(&cross), "{} vs {}", avg(&same), avg(&cross));
    }

    #[test]
    fn synthetic_is_deterministic_per_seed() {
        let a = make_synthetic(SyntheticKind::GaussianClusters, 50, 4, 3, 9).unwrap();
        let b = make_synthetic(SyntheticKind::GaussianClusters, 50, 4, 3, 9).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}
