//! Model and code persistence.
//!
//! Two little-endian binary formats:
//!
//! * **`GHS1`** — a trained model. Header `b"GHS1"`, `u32` version (1),
//!   `u8` kind (0 = pca, 1 = cca, 2 = sign-random-projection baseline), then
//!   `u32` input dim `D`, `u32` embedded dim `d`, `u32` code length `c`,
//!   `f64` sphere radius, `D` mean values, `D*d` projection values
//!   (row-major), `f64` embedding scale, `u32` group count followed by
//!   `(u32 start, u32 len)` pairs, `c*d` satellite values (row-major), and
//!   `c` thresholds. The baseline stores `d = c`, zero radius, unit scale, no
//!   groups, and zeroed satellite/threshold blocks so every kind shares one
//!   layout.
//! * **`GHSC`** — packed codes. Header `b"GHSC"`, `u32` row count, `u32` code
//!   length, then `ceil(c/64)` `u64` words per row with pad bits zero.
//!
//! Writers are bit-exact: saving and reloading reproduces the same bytes.

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{DMatrix, DVector};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::code::CodeMatrix;
use crate::constellation::{Constellation, Group};
use crate::embedding::{EmbeddingKind, EmbeddingModel};
use crate::error::{GhsError, Result};
use crate::lsh::{lsh_encode, LshModel};

const MODEL_MAGIC: &[u8; 4] = b"GHS1";
const CODES_MAGIC: &[u8; 4] = b"GHSC";
const MODEL_VERSION: u32 = 1;

const KIND_PCA: u8 = 0;
const KIND_CCA: u8 = 1;
const KIND_LSH: u8 = 2;

/// A complete trained encoder: either an embedding plus constellation, or the
/// sign-random-projection baseline.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Ghs {
        embedding: EmbeddingModel,
        constellation: Constellation,
    },
    Lsh(LshModel),
}

impl Model {
    /// Code length in bits.
    pub fn bits(&self) -> usize {
        match self {
            Model::Ghs { constellation, .. } => constellation.bits(),
            Model::Lsh(m) => m.bits(),
        }
    }

    /// Expected width of input descriptor rows.
    pub fn input_dim(&self) -> usize {
        match self {
            Model::Ghs { embedding, .. } => embedding.input_dim(),
            Model::Lsh(m) => m.input_dim(),
        }
    }

    /// Packed words per code row.
    pub fn code_words(&self) -> usize {
        self.bits().div_ceil(64)
    }

    /// Encodes descriptor rows into packed binary codes.
    pub fn encode(&self, x: &DMatrix<f64>) -> Result<CodeMatrix> {
        match self {
            Model::Ghs { embedding, constellation } => {
                let y = embedding.embed(x)?;
                constellation.encode(&y)
            }
            Model::Lsh(m) => lsh_encode(m, x),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(GhsError::io(path))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(GhsError::io(path))?;
        w.flush().map_err(GhsError::io(path))
    }

    pub fn load(path: &Path) -> Result<Model> {
        let file = File::open(path).map_err(GhsError::io(path))?;
        let mut r = BufReader::new(file);
        Self::read_from(&mut r, path)
    }

    fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(MODEL_MAGIC)?;
        w.write_u32::<LittleEndian>(MODEL_VERSION)?;
        match self {
            Model::Ghs { embedding, constellation } => {
                let kind = match embedding.kind {
                    EmbeddingKind::Pca => KIND_PCA,
                    EmbeddingKind::Cca => KIND_CCA,
                };
                w.write_u8(kind)?;
                let big_d = embedding.input_dim();
                let d = embedding.output_dim();
                let c = constellation.bits();
                w.write_u32::<LittleEndian>(big_d as u32)?;
                w.write_u32::<LittleEndian>(d as u32)?;
                w.write_u32::<LittleEndian>(c as u32)?;
                w.write_f64::<LittleEndian>(constellation.r_s)?;
                for v in embedding.mean.iter() {
                    w.write_f64::<LittleEndian>(*v)?;
                }
                for row in 0..big_d {
                    for col in 0..d {
                        w.write_f64::<LittleEndian>(embedding.projection[(row, col)])?;
                    }
                }
                w.write_f64::<LittleEndian>(embedding.scale)?;
                w.write_u32::<LittleEndian>(constellation.groups.len() as u32)?;
                for g in &constellation.groups {
                    w.write_u32::<LittleEndian>(g.start as u32)?;
                    w.write_u32::<LittleEndian>(g.len as u32)?;
                }
                for row in 0..c {
                    for col in 0..d {
                        w.write_f64::<LittleEndian>(constellation.satellites[(row, col)])?;
                    }
                }
                for v in constellation.thresholds.iter() {
                    w.write_f64::<LittleEndian>(*v)?;
                }
            }
            Model::Lsh(m) => {
                w.write_u8(KIND_LSH)?;
                let big_d = m.input_dim();
                let c = m.bits();
                w.write_u32::<LittleEndian>(big_d as u32)?;
                w.write_u32::<LittleEndian>(c as u32)?; // d = c for the baseline
                w.write_u32::<LittleEndian>(c as u32)?;
                w.write_f64::<LittleEndian>(0.0)?; // no sphere radius
                for v in m.mean.iter() {
                    w.write_f64::<LittleEndian>(*v)?;
                }
                for row in 0..big_d {
                    for col in 0..c {
                        w.write_f64::<LittleEndian>(m.projection[(row, col)])?;
                    }
                }
                w.write_f64::<LittleEndian>(1.0)?; // unit scale
                w.write_u32::<LittleEndian>(0)?; // no groups
                for _ in 0..c * c {
                    w.write_f64::<LittleEndian>(0.0)?; // satellite block placeholder
                }
                for _ in 0..c {
                    w.write_f64::<LittleEndian>(0.0)?; // threshold block placeholder
                }
            }
        }
        Ok(())
    }

    fn read_from<R: Read>(r: &mut R, path: &Path) -> Result<Model> {
        let parse = |detail: String| GhsError::parse(path, detail);

        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(GhsError::io(path))?;
        if &magic != MODEL_MAGIC {
            return Err(parse(format!("bad magic {magic:?}, expected \"GHS1\"")));
        }
        let version = r.read_u32::<LittleEndian>().map_err(GhsError::io(path))?;
        if version != MODEL_VERSION {
            return Err(parse(format!("unsupported model version {version}")));
        }
        let kind = r.read_u8().map_err(GhsError::io(path))?;
        let big_d = r.read_u32::<LittleEndian>().map_err(GhsError::io(path))? as usize;
        let d = r.read_u32::<LittleEndian>().map_err(GhsError::io(path))? as usize;
        let c = r.read_u32::<LittleEndian>().map_err(GhsError::io(path))? as usize;
        let r_s = r.read_f64::<LittleEndian>().map_err(GhsError::io(path))?;
        if big_d == 0 || d == 0 || c == 0 {
            return Err(parse(format!(
                "degenerate dimensions D={big_d} d={d} c={c}"
            )));
        }

        let mut read_f64s = |count: usize| -> Result<Vec<f64>> {
            let mut out = vec![0.0f64; count];
            r.read_f64_into::<LittleEndian>(&mut out)
                .map_err(GhsError::io(path))?;
            Ok(out)
        };
        let mean = DVector::from_vec(read_f64s(big_d)?);
        let projection =
            DMatrix::from_row_slice(big_d, d, &read_f64s(big_d * d)?);
        let scale = r.read_f64::<LittleEndian>().map_err(GhsError::io(path))?;
        let group_count = r.read_u32::<LittleEndian>().map_err(GhsError::io(path))? as usize;
        let mut groups = Vec::with_capacity(group_count);
        for _ in 0..group_count {
            let start = r.read_u32::<LittleEndian>().map_err(GhsError::io(path))? as usize;
            let len = r.read_u32::<LittleEndian>().map_err(GhsError::io(path))? as usize;
            groups.push(Group { start, len });
        }
        let mut read_f64s = |count: usize| -> Result<Vec<f64>> {
            let mut out = vec![0.0f64; count];
            r.read_f64_into::<LittleEndian>(&mut out)
                .map_err(GhsError::io(path))?;
            Ok(out)
        };
        let satellites = DMatrix::from_row_slice(c, d, &read_f64s(c * d)?);
        let thresholds = DVector::from_vec(read_f64s(c)?);

        match kind {
            KIND_PCA | KIND_CCA => {
                let embedding = EmbeddingModel {
                    kind: if kind == KIND_PCA { EmbeddingKind::Pca } else { EmbeddingKind::Cca },
                    mean,
                    projection,
                    scale,
                };
                if !(scale > 0.0) {
                    return Err(parse(format!("non-positive embedding scale {scale}")));
                }
                let constellation = Constellation {
                    satellites,
                    thresholds,
                    groups,
                    r_s,
                    // Descriptive only: the bits-per-dimension ratio implied
                    // by the stored shapes.
                    rho: c as f64 / (d as f64 + 1.0),
                };
                constellation
                    .validate()
                    .map_err(|e| parse(format!("invalid constellation: {e}")))?;
                Ok(Model::Ghs { embedding, constellation })
            }
            KIND_LSH => {
                if d != c {
                    return Err(parse(format!(
                        "baseline model must store d = c, got d={d} c={c}"
                    )));
                }
                if group_count != 0 {
                    return Err(parse(format!(
                        "baseline model must store no groups, got {group_count}"
                    )));
                }
                Ok(Model::Lsh(LshModel { mean, projection }))
            }
            other => Err(parse(format!("unknown model kind {other}"))),
        }
    }
}

/// Writes packed codes in the `GHSC` layout.
pub fn write_codes(codes: &CodeMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(GhsError::io(path))?;
    let mut w = BufWriter::new(file);
    let inner = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        w.write_all(CODES_MAGIC)?;
        w.write_u32::<LittleEndian>(codes.rows() as u32)?;
        w.write_u32::<LittleEndian>(codes.bits() as u32)?;
        for word in codes.words() {
            w.write_u64::<LittleEndian>(*word)?;
        }
        w.flush()
    };
    inner(&mut w).map_err(GhsError::io(path))
}

/// Reads packed codes in the `GHSC` layout, validating magic, word count,
/// and pad bits.
pub fn read_codes(path: &Path) -> Result<CodeMatrix> {
    let file = File::open(path).map_err(GhsError::io(path))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(GhsError::io(path))?;
    if &magic != CODES_MAGIC {
        return Err(GhsError::parse(
            path,
            format!("bad magic {magic:?}, expected \"GHSC\""),
        ));
    }
    let n = r.read_u32::<LittleEndian>().map_err(GhsError::io(path))? as usize;
    let bits = r.read_u32::<LittleEndian>().map_err(GhsError::io(path))? as usize;
    if bits == 0 {
        return Err(GhsError::parse(path, "zero code length".to_string()));
    }
    let words_per_row = bits.div_ceil(64);
    let mut words = vec![0u64; n * words_per_row];
    r.read_u64_into::<LittleEndian>(&mut words)
        .map_err(GhsError::io(path))?;
    let mut trailing = [0u8; 1];
    match r.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => {
            return Err(GhsError::parse(path, "trailing bytes after codes".to_string()));
        }
        Err(e) => return Err(GhsError::io(path)(e)),
    }
    CodeMatrix::from_words(n, bits, words)
        .map_err(|e| GhsError::parse(path, format!("invalid code words: {e}")))
}
