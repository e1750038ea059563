//! Packed GF(2) matrices.

use std::fmt;

use crate::error::{Error, Result};

/// Bits stored one per byte, each 0 or 1. Index 0 is the leftmost wire.
pub type BitVec = Vec<u8>;

const W: usize = 64;

/// Dense matrix over GF(2) with rows packed into `u64` words.
#[derive(Clone, PartialEq, Eq)]
pub struct BinMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    words: Vec<u64>,
}

impl BinMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = cols.div_ceil(W);
        BinMatrix {
            rows,
            cols,
            stride,
            words: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.words[r * self.stride + c / W] >> (c % W) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        let w = &mut self.words[r * self.stride + c / W];
        if v {
            *w |= 1 << (c % W);
        } else {
            *w &= !(1 << (c % W));
        }
    }

    pub fn row_words(&self, r: usize) -> &[u64] {
        &self.words[r * self.stride..(r + 1) * self.stride]
    }

    /// `row[dst] ^= row[src]`.
    pub fn xor_row(&mut self, dst: usize, src: usize) {
        if dst == src {
            self.words[dst * self.stride..(dst + 1) * self.stride].fill(0);
            return;
        }
        let s = self.stride;
        let (a, b) = if dst < src {
            let (lo, hi) = self.words.split_at_mut(src * s);
            (&mut lo[dst * s..(dst + 1) * s], &hi[..s])
        } else {
            let (lo, hi) = self.words.split_at_mut(dst * s);
            (&mut hi[..s], &lo[src * s..(src + 1) * s])
        };
        for (x, y) in a.iter_mut().zip(b) {
            *x ^= *y;
        }
    }

    pub fn column(&self, c: usize) -> BitVec {
        (0..self.rows).map(|r| self.get(r, c) as u8).collect()
    }

    pub fn mul(&self, other: &BinMatrix) -> Result<BinMatrix> {
        if self.cols != other.rows {
            return Err(Error::LengthMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = BinMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let dst = &mut out.words[r * out.stride..(r + 1) * out.stride];
            for (wi, &word) in self.row_words(r).iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    let k = wi * W + bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    for (d, s) in dst.iter_mut().zip(other.row_words(k)) {
                        *d ^= *s;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[u8]) -> Result<BitVec> {
        if x.len() != self.cols {
            return Err(Error::LengthMismatch {
                expected: self.cols,
                got: x.len(),
            });
        }
        let packed = pack(x);
        Ok((0..self.rows)
            .map(|r| {
                let ones: u32 = self
                    .row_words(r)
                    .iter()
                    .zip(&packed)
                    .map(|(a, b)| (a & b).count_ones())
                    .sum();
                (ones & 1) as u8
            })
            .collect())
    }

    /// Square-and-multiply power.
    pub fn pow(&self, mut e: u64) -> Result<BinMatrix> {
        if self.rows != self.cols {
            return Err(Error::LengthMismatch {
                expected: self.rows,
                got: self.cols,
            });
        }
        let mut acc = BinMatrix::identity(self.rows);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols && *self == BinMatrix::identity(self.rows)
    }

    pub fn transpose(&self) -> BinMatrix {
        let mut t = BinMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    t.set(c, r, true);
                }
            }
        }
        t
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        let mut rank = 0;
        for c in 0..self.cols {
            let Some(p) = (rank..m.rows).find(|&r| m.get(r, c)) else {
                continue;
            };
            m.swap_rows(p, rank);
            for r in 0..m.rows {
                if r != rank && m.get(r, c) {
                    m.xor_row(r, rank);
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for k in 0..self.stride {
            self.words.swap(a * self.stride + k, b * self.stride + k);
        }
    }
}

impl fmt::Debug for BinMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            let line: String = (0..self.cols)
                .map(|c| if self.get(r, c) { '1' } else { '0' })
                .collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

pub(crate) fn pack(bits: &[u8]) -> Vec<u64> {
    let mut out = vec![0u64; bits.len().div_ceil(W)];
    for (i, &b) in bits.iter().enumerate() {
        if b & 1 == 1 {
            out[i / W] |= 1 << (i % W);
        }
    }
    out
}

/// Row-reduced GF(2) system `A x = b` with packed rows.
///
/// Rows are added one equation at a time; [`Echelon::solve`] returns the
/// solution when the system is full rank in the unknowns.
#[derive(Clone, Debug)]
pub(crate) struct Echelon {
    vars: usize,
    stride: usize,
    // pivot column -> (row, rhs)
    pivots: Vec<Option<(Vec<u64>, u8)>>,
    rank: usize,
    inconsistent: bool,
}

impl Echelon {
    pub fn new(vars: usize) -> Self {
        Echelon {
            vars,
            stride: vars.div_ceil(W).max(1),
            pivots: vec![None; vars],
            rank: 0,
            inconsistent: false,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_inconsistent(&self) -> bool {
        self.inconsistent
    }

    /// Insert one equation, reducing it against existing pivots.
    pub fn push(&mut self, mut row: Vec<u64>, mut rhs: u8) {
        debug_assert_eq!(row.len(), self.stride);
        loop {
            let lead = row
                .iter()
                .enumerate()
                .find(|(_, w)| **w != 0)
                .map(|(i, w)| i * W + w.trailing_zeros() as usize);
            let Some(c) = lead else {
                if rhs != 0 {
                    self.inconsistent = true;
                }
                return;
            };
            match &self.pivots[c] {
                Some((prow, prhs)) => {
                    for (a, b) in row.iter_mut().zip(prow) {
                        *a ^= *b;
                    }
                    rhs ^= prhs;
                }
                None => {
                    self.pivots[c] = Some((row, rhs));
                    self.rank += 1;
                    return;
                }
            }
        }
    }

    /// Back-substitute; `None` unless every variable is pinned.
    pub fn solve(&self) -> Option<BitVec> {
        if self.rank < self.vars || self.inconsistent {
            return None;
        }
        Some(self.solve_free_zero())
    }

    /// One solution, with every non-pivot variable set to 0.
    pub fn solve_free_zero(&self) -> BitVec {
        let mut x = vec![0u8; self.vars];
        for c in (0..self.vars).rev() {
            let Some((row, rhs)) = self.pivots[c].as_ref() else {
                continue;
            };
            let mut v = *rhs;
            for k in c + 1..self.vars {
                if row[k / W] >> (k % W) & 1 == 1 {
                    v ^= x[k];
                }
            }
            x[c] = v;
        }
        x
    }
}
