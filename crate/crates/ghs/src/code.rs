//! Packed binary codes and Hamming-space search primitives.
//!
//! A code assigns each point one of two signs per bit position. Signs are
//! stored packed, 64 positions per `u64` word, with bit value 1 standing for
//! sign +1. Trailing pad bits in the last word of every row are always zero,
//! which keeps XOR + popcount valid without masking.

use crate::error::{GhsError, Result};

/// Row-major matrix of `n` packed binary codes, `bits` positions each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeMatrix {
    n: usize,
    bits: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl CodeMatrix {
    /// A code matrix with every position set to sign -1 (all words zero).
    pub fn new(n: usize, bits: usize) -> Self {
        let words_per_row = bits.div_ceil(64);
        CodeMatrix {
            n,
            bits,
            words_per_row,
            words: vec![0u64; n * words_per_row],
        }
    }

    /// Builds a matrix by asking `is_plus(i, j)` for every position.
    pub fn from_fn(n: usize, bits: usize, mut is_plus: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = CodeMatrix::new(n, bits);
        for i in 0..n {
            for j in 0..bits {
                m.set_plus(i, j, is_plus(i, j));
            }
        }
        m
    }

    /// Reassembles a matrix from raw packed words (e.g. read from a file).
    ///
    /// Errors if the word count does not match `n * ceil(bits/64)` or if any
    /// trailing pad bit is set.
    pub fn from_words(n: usize, bits: usize, words: Vec<u64>) -> Result<Self> {
        let words_per_row = bits.div_ceil(64);
        if words.len() != n * words_per_row {
            return Err(GhsError::DimensionMismatch {
                context: "packed code words",
                expected: n * words_per_row,
                got: words.len(),
            });
        }
        let pad = bits % 64;
        if pad != 0 && words_per_row > 0 {
            let mask = !0u64 << pad;
            for i in 0..n {
                if words[i * words_per_row + words_per_row - 1] & mask != 0 {
                    return Err(GhsError::InvalidArgument(format!(
                        "row {i} has nonzero pad bits beyond position {bits}"
                    )));
                }
            }
        }
        Ok(CodeMatrix {
            n,
            bits,
            words_per_row,
            words,
        })
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    /// All packed words, row-major.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// The packed words of row `i`.
    ///
    /// # Panics
    /// If `i >= rows()`.
    pub fn row(&self, i: usize) -> &[u64] {
        &self.words[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    /// Sets position `(i, j)` to +1 (`true`) or -1 (`false`).
    ///
    /// # Panics
    /// If `i` or `j` is out of range.
    #[inline]
    pub fn set_plus(&mut self, i: usize, j: usize, plus: bool) {
        assert!(j < self.bits, "bit index {j} out of range {}", self.bits);
        let word = i * self.words_per_row + j / 64;
        let mask = 1u64 << (j % 64);
        if plus {
            self.words[word] |= mask;
        } else {
            self.words[word] &= !mask;
        }
    }

    /// Whether position `(i, j)` holds sign +1.
    #[inline]
    pub fn is_plus(&self, i: usize, j: usize) -> bool {
        debug_assert!(j < self.bits);
        let word = i * self.words_per_row + j / 64;
        self.words[word] >> (j % 64) & 1 == 1
    }

    /// Sign of position `(i, j)` as +-1.0.
    #[inline]
    pub fn sign(&self, i: usize, j: usize) -> f64 {
        if self.is_plus(i, j) {
            1.0
        } else {
            -1.0
        }
    }

    /// Sum of the +-1 signs down column `j`; 0 means a perfectly balanced bit.
    pub fn column_sign_sum(&self, j: usize) -> i64 {
        let mut plus = 0i64;
        for i in 0..self.n {
            if self.is_plus(i, j) {
                plus += 1;
            }
        }
        2 * plus - self.n as i64
    }
}

#[inline]
fn xor_popcount(a: &[u64], b: &[u64]) -> usize {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x ^ y).count_ones() as usize)
        .sum()
}

/// Hamming distance between two packed rows of equal width.
///
/// Errors if the word counts differ (rows from code matrices with different
/// bit widths).
pub fn hamming(a: &[u64], b: &[u64]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(GhsError::DimensionMismatch {
            context: "hamming distance operands",
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(xor_popcount(a, b))
}

/// Indices of the `k` base rows nearest to `query` in Hamming distance.
///
/// Ties are broken by ascending row index, and the result is ordered by
/// (distance, index). Uses counting by distance value — O(n + bits) per call —
/// rather than a full sort.
pub fn rank_by_hamming(query: &[u64], base: &CodeMatrix, k: usize) -> Result<Vec<usize>> {
    if query.len() != base.words_per_row {
        return Err(GhsError::DimensionMismatch {
            context: "query row width",
            expected: base.words_per_row,
            got: query.len(),
        });
    }
    let k = k.min(base.n);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); base.bits + 1];
    for i in 0..base.n {
        buckets[xor_popcount(query, base.row(i))].push(i);
    }
    let mut out = Vec::with_capacity(k);
    'fill: for bucket in &buckets {
        for &i in bucket {
            out.push(i);
            if out.len() == k {
                break 'fill;
            }
        }
    }
    Ok(out)
}

/// Indices of all base rows within `radius` Hamming distance of `query`,
/// in ascending index order.
pub fn lookup_within_radius(query: &[u64], base: &CodeMatrix, radius: usize) -> Result<Vec<usize>> {
    if query.len() != base.words_per_row {
        return Err(GhsError::DimensionMismatch {
            context: "query row width",
            expected: base.words_per_row,
            got: query.len(),
        });
    }
    let mut out = Vec::new();
    for i in 0..base.n {
        if xor_popcount(query, base.row(i)) <= radius {
            out.push(i);
        }
    }
    Ok(out)
}
