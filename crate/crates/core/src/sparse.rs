//! Row-list sparse complex matrices over flat indices.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Square sparse matrix stored as sorted `(column, value)` lists per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { rows: vec![Vec::new(); n] }
    }

    pub fn identity(n: usize) -> Self {
        Self { rows: (0..n).map(|i| vec![(i, Complex64::new(1.0, 0.0))]).collect() }
    }

    /// Builds from `(row, col, value)` triplets, summing duplicates and
    /// dropping exact zeros.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, Complex64)>,
    {
        let mut rows: Vec<BTreeMap<usize, Complex64>> = vec![BTreeMap::new(); n];
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange { index: i.max(j), len: n });
            }
            *rows[i].entry(j).or_insert(ZERO) += v;
        }
        Ok(Self { rows: rows.into_iter().map(|r| r.into_iter().filter(|(_, v)| *v != ZERO).collect()).collect() })
    }

    pub fn from_dense(m: &DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::ShapeMismatch(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
        }
        let n = m.nrows();
        Ok(Self {
            rows: (0..n).map(|i| (0..n).filter(|&j| m[(i, j)] != ZERO).map(|j| (j, m[(i, j)])).collect()).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row(&self, i: usize) -> &[(usize, Complex64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.rows[i].binary_search_by_key(&j, |&(c, _)| c).map(|k| self.rows[i][k].1).unwrap_or(ZERO)
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(v.len(), self.dim());
        self.rows.iter().map(|row| row.iter().map(|&(j, w)| w * v[j]).sum()).collect()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim();
        let t = self.rows.iter().enumerate().flat_map(|(i, row)| row.iter().map(move |&(j, v)| (j, i, v.conj())));
        Self::from_triplets(n, t).expect("indices in range")
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self { rows: self.rows.iter().map(|r| r.iter().map(|&(j, v)| (j, v * c)).filter(|(_, v)| *v != ZERO).collect()).collect() }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: Complex64, b: Complex64, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::LengthMismatch { expected: self.dim(), got: other.dim() });
        }
        let lhs = self.rows.iter().enumerate().flat_map(|(i, r)| r.iter().map(move |&(j, v)| (i, j, a * v)));
        let rhs = other.rows.iter().enumerate().flat_map(|(i, r)| r.iter().map(move |&(j, v)| (i, j, b * v)));
        Self::from_triplets(self.dim(), lhs.chain(rhs))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::LengthMismatch { expected: self.dim(), got: other.dim() });
        }
        let mut trip = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, a) in row {
                for &(j, b) in &other.rows[k] {
                    trip.push((i, j, a * b));
                }
            }
        }
        Self::from_triplets(self.dim(), trip)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.rows.iter().flatten().fold(0.0, |m, (_, v)| m.max(v.norm()))
    }

    /// Largest entry of `self − self†`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                worst = worst.max((v - self.get(j, i).conj()).norm());
            }
        }
        worst
    }
}

/// Euclidean inner product of raw coefficient vectors.
pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dense_roundtrip_and_products() {
        let d = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 2.0), c(3.0, 0.0), c(0.0, 0.0)]);
        let s = SparseMatrix::from_dense(&d).unwrap();
        assert_eq!(s.nnz(), 3);
        assert_eq!(s.to_dense(), d);
        assert_eq!(s.matmul(&s).unwrap().to_dense(), &d * &d);
        assert_eq!(s.adjoint().to_dense(), d.adjoint());
        assert_eq!(s.matvec(&[c(1.0, 0.0), c(1.0, 0.0)]), vec![c(1.0, 2.0), c(3.0, 0.0)]);
        let z = s.combine(c(1.0, 0.0), c(-1.0, 0.0), &s).unwrap();
        assert_eq!(z.nnz(), 0);
        assert!(s.hermiticity_defect() > 0.0);
        assert_eq!(SparseMatrix::identity(3).hermiticity_defect(), 0.0);
    }
}
