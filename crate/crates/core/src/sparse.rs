//! Compressed sparse row matrices over real or complex scalars.

use std::io::Write;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub trait Scalar:
    Copy
    + Send
    + Sync
    + PartialEq
    + std::fmt::Debug
    + Add<Output = Self>
    + AddAssign
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn conj(self) -> Self;
    fn abs(self) -> f64;
    fn from_real(x: f64) -> Self;
    fn to_complex(self) -> Complex64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn conj(self) -> Self {
        self
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn to_complex(self) -> Complex64 {
        self
    }
}

/// Square or rectangular sparse matrix. Entries are unique per (row, col),
/// sorted row-major, and never explicitly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Sparse<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

pub type SparseOperator = Sparse<f64>;
pub type ComplexOperator = Sparse<Complex64>;

impl<T: Scalar> Sparse<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Sparse {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, T::one()))).expect("in range")
    }

    /// Builds from unsorted triplets, summing duplicates and dropping zeros.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        let mut trip: Vec<(usize, usize, T)> = entries.into_iter().collect();
        if let Some(&(r, c, _)) = trip.iter().find(|(r, c, _)| *r >= nrows || *c >= ncols) {
            return Err(Error::Range(format!(
                "entry ({r}, {c}) outside a {nrows}x{ncols} matrix"
            )));
        }
        trip.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals: Vec<T> = Vec::with_capacity(trip.len());
        let mut rows = Vec::with_capacity(trip.len());
        for (r, c, v) in trip {
            if rows.last() == Some(&r) && cols.last() == Some(&c) {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                cols.push(c);
                vals.push(v);
            }
        }
        let (mut out_c, mut out_v) = (Vec::new(), Vec::new());
        for ((r, c), v) in rows.into_iter().zip(cols).zip(vals) {
            if v != T::zero() {
                row_ptr[r + 1] += 1;
                out_c.push(c);
                out_v.push(v);
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Sparse {
            nrows,
            ncols,
            row_ptr,
            cols: out_c,
            vals: out_v,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    /// Entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.ncols {
            return Err(Error::Dimension {
                expected: self.ncols,
                got: x.len(),
            });
        }
        Ok((0..self.nrows)
            .map(|r| {
                self.row(r)
                    .fold(T::zero(), |acc, (c, v)| acc + v * x[c])
            })
            .collect())
    }

    /// `y = self * x` for complex vectors, without allocating.
    pub fn apply_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, out) in y.iter_mut().enumerate().take(self.nrows) {
            *out = self
                .row(r)
                .fold(Complex64::new(0.0, 0.0), |acc, (c, v)| acc + v.to_complex() * x[c]);
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(r, c, v)| (c, r, v)))
            .expect("in range")
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(r, c, v)| (c, r, v.conj())),
        )
        .expect("in range")
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_triplets(self.nrows, self.ncols, self.triplets().map(|(r, c, v)| (r, c, v * s)))
            .expect("in range")
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Sparse<U> {
        Sparse::from_triplets(self.nrows, self.ncols, self.triplets().map(|(r, c, v)| (r, c, f(v))))
            .expect("in range")
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if (self.nrows, self.ncols) != (other.nrows, other.ncols) {
            return Err(Error::Dimension {
                expected: self.nrows * self.ncols,
                got: other.nrows * other.ncols,
            });
        }
        Self::from_triplets(self.nrows, self.ncols, self.triplets().chain(other.triplets()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-T::one()))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (m, n) = (other.nrows, other.ncols);
        let entries = self.triplets().flat_map(|(r1, c1, v1)| {
            other
                .triplets()
                .map(move |(r2, c2, v2)| (r1 * m + r2, c1 * n + c2, v1 * v2))
        });
        Self::from_triplets(self.nrows * m, self.ncols * n, entries).expect("in range")
    }

    /// Copies `block` into the zero matrix of size `nrows x ncols` at the
    /// given offset.
    pub fn embed(&self, nrows: usize, ncols: usize, row0: usize, col0: usize) -> Result<Self> {
        Self::from_triplets(
            nrows,
            ncols,
            self.triplets().map(|(r, c, v)| (r + row0, c + col0, v)),
        )
    }

    /// Drops every entry whose row or column fails `keep`.
    pub fn retain_indices(&self, keep: impl Fn(usize) -> bool) -> Self {
        let entries: Vec<_> = self.triplets().filter(|(r, c, _)| keep(*r) && keep(*c)).collect();
        Self::from_triplets(self.nrows, self.ncols, entries).expect("in range")
    }

    pub fn frobenius(&self) -> f64 {
        self.vals.iter().fold(0.0, |s, v| s + v.abs().powi(2)).sqrt()
    }

    /// Max absolute row sum (induced infinity norm).
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut m = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            m[r][c] = v;
        }
        m
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        match self.sub(other) {
            Ok(d) => d.vals.iter().map(|v| v.abs()).fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        }
    }
}

impl Sparse<f64> {
    pub fn to_complex(&self) -> ComplexOperator {
        self.map(|v| Complex64::new(v, 0.0))
    }

    /// Writes `row col value` lines with a one-line header.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {v:e}")?;
        }
        Ok(())
    }
}
