//! Bit words and lower-triangular Toeplitz matrices over GF(2).
//!
//! A [`BitVec`] is an ordered word `b_1 b_2 ... b_n` with `b_1` the most
//! significant bit level. A lower-triangular Toeplitz matrix is fully
//! described by its first column, so [`LtToeplitz`] stores only that column.
//! Multiplying such a matrix with a word is the truncated GF(2) polynomial
//! product of the column and the word, reading `b_1` as the constant
//! coefficient:
//!
//! ```text
//! out[j] = XOR_{i <= j} col[i] & y[j - i]
//! ```
//!
//! Because polynomial multiplication commutes, `T(x) y = T(y) x` and
//! `T(x) T(y) = T(y) T(x)` for words of equal length.

use std::fmt;

use smallvec::{smallvec, SmallVec};

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

/// Finite binary word, most significant level first.
///
/// Bit `i` (zero-based) is level `b_{i+1}`. Internally level `i` lives in
/// bit `i % 64` of word `i / 64`; bits past `len` are always zero. Words
/// up to 128 bits live inline, so the exhaustive audits do not allocate.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVec {
    len: usize,
    words: SmallVec<[u64; 2]>,
}

fn words_for(len: usize) -> usize {
    len.div_ceil(WORD_BITS)
}

impl BitVec {
    /// Word of `len` zero bits. `len` may be zero; see [`BitVec::empty`].
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: smallvec![0; words_for(len)],
        }
    }

    /// The empty word. Used for absent fine-gain bits and empty secure keys;
    /// it cannot be turned into a matrix.
    pub fn empty() -> Self {
        Self::zeros(0)
    }

    /// Basis word `e_1 = [1, 0, ..., 0]` (the pilot symbol).
    pub fn unit(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::EmptyVector);
        }
        let mut v = Self::zeros(len);
        v.set(0, true);
        Ok(v)
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    /// Builds a word from 0/1 integers, e.g. `BitVec::from_01(&[1, 0, 1])`.
    ///
    /// # Panics
    /// If any entry is not 0 or 1.
    pub fn from_01(bits: &[u8]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            assert!(b <= 1, "bit {i} is {b}, expected 0 or 1");
            v.set(i, b == 1);
        }
        v
    }

    /// Word whose level `b_{i+1}` is bit `i` of `value`.
    pub fn from_lsb_word(value: u64, len: usize) -> Self {
        assert!(len <= WORD_BITS, "from_lsb_word supports at most 64 bits");
        let mut v = Self::zeros(len);
        if len > 0 {
            let mask = if len == WORD_BITS { u64::MAX } else { (1u64 << len) - 1 };
            v.words[0] = value & mask;
        }
        v
    }

    /// Inverse of [`BitVec::from_lsb_word`] for words of at most 64 bits.
    pub fn to_lsb_word(&self) -> u64 {
        assert!(self.len <= WORD_BITS, "to_lsb_word supports at most 64 bits");
        self.words.first().copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Level `b_{i+1}`.
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if bit {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// The `m` most significant levels `b_1 .. b_m`.
    pub fn truncate(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.len {
            return Err(Error::TruncateOutOfRange { m, len: self.len });
        }
        Ok(self.prefix(m))
    }

    /// Prefix of length `m <= len`, allowing `m = 0`.
    pub(crate) fn prefix(&self, m: usize) -> Self {
        debug_assert!(m <= self.len);
        let mut words: SmallVec<[u64; 2]> = SmallVec::from_slice(&self.words[..words_for(m)]);
        if !m.is_multiple_of(WORD_BITS) {
            if let Some(last) = words.last_mut() {
                *last &= (1u64 << (m % WORD_BITS)) - 1;
            }
        }
        Self { len: m, words }
    }

    /// Levels `start .. end` (zero-based, end exclusive) as a new word.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.len, "slice {start}..{end} out of range");
        let mut v = Self::zeros(end - start);
        for (j, i) in (start..end).enumerate() {
            v.set(j, self.get(i));
        }
        v
    }

    /// Appends `other` below the current least significant level.
    pub fn extend(&mut self, other: &BitVec) {
        let old = self.len;
        self.len += other.len;
        self.words.resize(words_for(self.len), 0);
        for i in 0..other.len {
            if other.get(i) {
                self.set(old + i, true);
            }
        }
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a BitVec>) -> Self {
        let mut out = Self::empty();
        for p in parts {
            out.extend(p);
        }
        out
    }

    /// Hex encoding, most significant level first, zero-padded on the right
    /// to a whole number of nibbles. The empty word encodes as `-`.
    pub fn to_hex(&self) -> String {
        if self.len == 0 {
            return "-".to_string();
        }
        let nibbles = self.len.div_ceil(4);
        let mut s = String::with_capacity(nibbles);
        for n in 0..nibbles {
            let mut v = 0u32;
            for k in 0..4 {
                let i = 4 * n + k;
                v <<= 1;
                if i < self.len && self.get(i) {
                    v |= 1;
                }
            }
            s.push(char::from_digit(v, 16).expect("nibble"));
        }
        s
    }

    /// Parses [`BitVec::to_hex`] output for a word of known length.
    pub fn from_hex(s: &str, len: usize) -> Result<Self> {
        if s == "-" {
            return if len == 0 {
                Ok(Self::empty())
            } else {
                Err(Error::InvalidHex(s.to_string()))
            };
        }
        if s.len() != len.div_ceil(4) {
            return Err(Error::InvalidHex(s.to_string()));
        }
        let mut v = Self::zeros(len);
        for (n, c) in s.chars().enumerate() {
            let d = c.to_digit(16).ok_or_else(|| Error::InvalidHex(s.to_string()))?;
            for k in 0..4 {
                let i = 4 * n + k;
                let bit = (d >> (3 - k)) & 1 == 1;
                if i < len {
                    v.set(i, bit);
                } else if bit {
                    return Err(Error::InvalidHex(s.to_string()));
                }
            }
        }
        Ok(v)
    }

    /// `self ^= other << shift`, keeping only the first `self.len` levels.
    fn xor_shifted(&mut self, other: &BitVec, shift: usize) {
        if shift >= self.len {
            return;
        }
        let word_shift = shift / WORD_BITS;
        let bit_shift = shift % WORD_BITS;
        let n = self.words.len();
        for (k, &w) in other.words.iter().enumerate() {
            let lo = k + word_shift;
            if lo >= n {
                break;
            }
            self.words[lo] ^= w << bit_shift;
            if bit_shift != 0 && lo + 1 < n {
                self.words[lo + 1] ^= w >> (WORD_BITS - bit_shift);
            }
        }
        self.clear_tail();
    }

    fn clear_tail(&mut self) {
        if !self.len.is_multiple_of(WORD_BITS) {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << (self.len % WORD_BITS)) - 1;
            }
        }
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len == 0 {
            return f.write_str("[]");
        }
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVec({self})")
    }
}

/// Square lower-triangular Toeplitz matrix over GF(2), stored as its first
/// column. Entry `(i, j)` equals `first_col[i - j]` for `i >= j`, else 0.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LtToeplitz {
    first_col: BitVec,
}

impl LtToeplitz {
    pub fn from_first_col(first_col: BitVec) -> Result<Self> {
        if first_col.is_empty() {
            return Err(Error::EmptyVector);
        }
        Ok(Self { first_col })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::from_first_col(BitVec::unit(dim)?)
    }

    pub fn dim(&self) -> usize {
        self.first_col.len()
    }

    pub fn first_col(&self) -> &BitVec {
        &self.first_col
    }

    /// Zero-based entry `(row, col)`.
    pub fn entry(&self, row: usize, col: usize) -> bool {
        row >= col && self.first_col.get(row - col)
    }

    pub fn is_invertible(&self) -> bool {
        self.first_col.get(0)
    }

    pub fn is_identity(&self) -> bool {
        self.first_col.get(0) && self.first_col.count_ones() == 1
    }

    /// Matrix-vector product, i.e. the truncated convolution of the first
    /// column with `y`.
    pub fn mul_vec(&self, y: &BitVec) -> Result<BitVec> {
        if self.dim() != y.len() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: y.len(),
            });
        }
        let mut out = BitVec::zeros(y.len());
        for i in 0..self.dim() {
            if self.first_col.get(i) {
                out.xor_shifted(y, i);
            }
        }
        Ok(out)
    }

    pub fn mul_mat(&self, other: &LtToeplitz) -> Result<LtToeplitz> {
        let col = self.mul_vec(&other.first_col)?;
        Ok(LtToeplitz { first_col: col })
    }

    /// Inverse by back-substitution on the power series `1 / f mod z^dim`.
    pub fn invert(&self) -> Result<LtToeplitz> {
        if !self.is_invertible() {
            return Err(Error::Singular);
        }
        let n = self.dim();
        let mut inv = BitVec::zeros(n);
        inv.set(0, true);
        for j in 1..n {
            let mut acc = false;
            for i in 1..=j {
                acc ^= self.first_col.get(i) & inv.get(j - i);
            }
            inv.set(j, acc);
        }
        Ok(LtToeplitz { first_col: inv })
    }

    /// Leading `m x m` block, which is again lower-triangular Toeplitz.
    pub fn truncate(&self, m: usize) -> Result<LtToeplitz> {
        Ok(LtToeplitz {
            first_col: self.first_col.truncate(m)?,
        })
    }
}

impl fmt::Debug for LtToeplitz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LtToeplitz(col={})", self.first_col)
    }
}

/// `T_lt`: the lower-triangular Toeplitz matrix with first column `x`.
pub fn t_lt(x: &BitVec) -> Result<LtToeplitz> {
    LtToeplitz::from_first_col(x.clone())
}

/// `T_lt^{-1}`: recovers the defining column, `X e_1`.
pub fn t_lt_inv(x: &LtToeplitz) -> BitVec {
    x.first_col.clone()
}

pub fn mat_vec(x: &LtToeplitz, y: &BitVec) -> Result<BitVec> {
    x.mul_vec(y)
}

pub fn mat_mat(x: &LtToeplitz, y: &LtToeplitz) -> Result<LtToeplitz> {
    x.mul_mat(y)
}

pub fn truncate(x: &BitVec, m: usize) -> Result<BitVec> {
    x.truncate(m)
}

pub fn invert(x: &LtToeplitz) -> Result<LtToeplitz> {
    x.invert()
}

/// Convolution of two equal-length words, `T(x) y`.
pub fn convolve(x: &BitVec, y: &BitVec) -> Result<BitVec> {
    t_lt(x)?.mul_vec(y)
}
