//! Banded LU without pivoting and a compressed sparse operator.

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals, stored row-major:
/// row `i` holds columns `i - kl ..= i + ku`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    bands: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            bands: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        m.bands.fill(1.0);
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku && i < self.n && j < self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.bands[i * self.width() + j + self.kl - i]
        } else {
            0.0
        }
    }

    /// Panics if `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside the band");
        let w = self.width();
        self.bands[i * w + j + self.kl - i] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside the band");
        let w = self.width();
        self.bands[i * w + j + self.kl - i] += value;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, x.len())?;
        let w = self.width();
        Ok((0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi)
                    .map(|j| self.bands[i * w + j + self.kl - i] * x[j])
                    .sum()
            })
            .collect())
    }

    fn max_norm(&self) -> f64 {
        self.bands.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// In-place `L U` factors of a [`BandedMatrix`]; `L` has a unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedLu {
    lu: BandedMatrix,
}

/// Factors `a` without pivoting, so the band does not widen.
///
/// Fails when a pivot falls below `1e-14` times the largest entry.
pub fn band_factor(a: BandedMatrix) -> Result<BandedLu> {
    let mut lu = a;
    let (n, kl, ku) = (lu.n, lu.kl, lu.ku);
    let w = lu.width();
    let threshold = 1e-14 * lu.max_norm();
    let b = &mut lu.bands;
    for k in 0..n {
        let pivot = b[k * w + kl];
        if !(pivot.abs() >= threshold) || pivot == 0.0 {
            return Err(Error::SingularPivot {
                row: k,
                pivot,
                threshold,
            });
        }
        for i in k + 1..=(k + kl).min(n - 1) {
            let l = b[i * w + k + kl - i] / pivot;
            b[i * w + k + kl - i] = l;
            for j in k + 1..=(k + ku).min(n - 1) {
                b[i * w + j + kl - i] -= l * b[k * w + j + kl - k];
            }
        }
    }
    Ok(BandedLu { lu })
}

impl BandedLu {
    pub fn dim(&self) -> usize {
        self.lu.n
    }

    /// Solves in place; `x` holds the right-hand side on entry.
    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        check_dim(self.lu.n, x.len())?;
        let (n, kl, ku) = (self.lu.n, self.lu.kl, self.lu.ku);
        let w = self.lu.width();
        let b = &self.lu.bands;
        for i in 0..n {
            let mut acc = x[i];
            for j in i.saturating_sub(kl)..i {
                acc -= b[i * w + j + kl - i] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..=(i + ku).min(n - 1) {
                acc -= b[i * w + j + kl - i] * x[j];
            }
            x[i] = acc / b[i * w + kl];
        }
        Ok(())
    }
}

pub fn band_solve(lu: &BandedLu, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut x = rhs.to_vec();
    lu.solve_in_place(&mut x)?;
    Ok(x)
}

/// Coordinate-format builder; [`SparseBuilder::finish`] merges duplicates
/// and sorts columns within each row.
#[derive(Debug, Clone, Default)]
pub struct SparseBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn finish(mut self) -> SparseOperator {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.n {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseOperator {
            n: self.n,
            row_ptr,
            cols,
            vals,
        }
    }
}

/// Square sparse matrix in compressed rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseOperator {
    pub fn zero(n: usize) -> Self {
        SparseBuilder::new(n).finish()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entries of row `r` as `(col, value)`, columns ascending.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(col, _)| col == c).map_or(0.0, |e| e.1)
    }

    /// `out[r] = sum_c A[r, c] x[c]`, columns accumulated in ascending order.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.n, x.len())?;
        check_dim(self.n, out.len())?;
        use rayon::prelude::*;
        out.par_iter_mut().enumerate().for_each(|(r, o)| {
            let mut acc = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            *o = acc;
        });
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &SparseOperator, beta: f64) -> Result<Self> {
        check_dim(self.n, other.n)?;
        let mut b = SparseBuilder::new(self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                b.push(r, c, alpha * v);
            }
            for (c, v) in other.row(r) {
                b.push(r, c, beta * v);
            }
        }
        Ok(b.finish())
    }
}

pub fn sparse_apply(op: &SparseOperator, x: &[f64]) -> Result<Vec<f64>> {
    op.apply(x)
}
