//! Finite periodic cubic lattice standing in for physical 3D space.
//!
//! Sites are numbered x-fastest: `s = i_x + n_x * (i_y + n_y * i_z)`.

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat site index in `0..site_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SiteIndex(pub usize);

impl From<usize> for SiteIndex {
    fn from(s: usize) -> Self {
        SiteIndex(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice3D {
    dims: [usize; 3],
    spacing: f64,
}

impl Lattice3D {
    pub fn new(dims: [usize; 3], spacing: f64) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidLattice(format!("dims must be positive, got {dims:?}")));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidLattice(format!("spacing must be positive, got {spacing}")));
        }
        Ok(Self { dims, spacing })
    }

    /// A 1D ring of `n` sites with unit spacing.
    pub fn ring(n: usize) -> Result<Self> {
        Self::new([n, 1, 1], 1.0)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn site_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Volume element h³ used to weight lattice sums.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    pub fn check_site(&self, s: SiteIndex) -> Result<()> {
        if s.0 < self.site_count() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: s.0, len: self.site_count() })
        }
    }

    pub fn coords(&self, s: SiteIndex) -> Result<[usize; 3]> {
        self.check_site(s)?;
        let [nx, ny, _] = self.dims;
        Ok([s.0 % nx, (s.0 / nx) % ny, s.0 / (nx * ny)])
    }

    pub fn site_at(&self, c: [usize; 3]) -> Result<SiteIndex> {
        for (axis, (&i, &n)) in c.iter().zip(&self.dims).enumerate() {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: self.dims[axis] });
            }
        }
        Ok(SiteIndex(c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])))
    }

    /// Cartesian position `spacing * (i_x, i_y, i_z)`.
    pub fn position(&self, s: SiteIndex) -> Result<[f64; 3]> {
        let c = self.coords(s)?;
        Ok(c.map(|i| i as f64 * self.spacing))
    }

    /// Minimal-image Euclidean distance under periodic wrap.
    pub fn distance(&self, s1: SiteIndex, s2: SiteIndex) -> Result<f64> {
        let a = self.coords(s1)?;
        let b = self.coords(s2)?;
        let mut sq = 0.0;
        for axis in 0..3 {
            let n = self.dims[axis];
            let d = a[axis].abs_diff(b[axis]);
            let d = d.min(n - d) as f64 * self.spacing;
            sq += d * d;
        }
        Ok(sq.sqrt())
    }

    /// Distinct nearest neighbours of `s` (extent-1 axes contribute none,
    /// extent-2 axes contribute one).
    pub fn neighbors(&self, s: SiteIndex) -> Result<Vec<SiteIndex>> {
        Ok(self.stencil(s)?.into_iter().map(|(t, _)| t).collect())
    }

    /// Off-diagonal stencil entries `(neighbour, multiplicity)` for site `s`.
    /// On an extent-2 axis both wrap paths land on the same site, giving
    /// multiplicity 2 so that constants stay in the kernel.
    fn stencil(&self, s: SiteIndex) -> Result<Vec<(SiteIndex, f64)>> {
        let c = self.coords(s)?;
        let mut out: Vec<(SiteIndex, f64)> = Vec::with_capacity(6);
        for axis in 0..3 {
            let n = self.dims[axis];
            if n == 1 {
                continue;
            }
            for step in [1, n - 1] {
                let mut d = c;
                d[axis] = (c[axis] + step) % n;
                let t = self.site_at(d)?;
                match out.iter_mut().find(|(u, _)| *u == t) {
                    Some((_, w)) => *w += 1.0,
                    None => out.push((t, 1.0)),
                }
            }
        }
        Ok(out)
    }

    /// Number of axes with extent greater than one.
    pub fn active_dims(&self) -> usize {
        self.dims.iter().filter(|&&n| n > 1).count()
    }

    /// Sparse rows of the discrete Laplacian: for each site, the list of
    /// `(column, coefficient)` including the diagonal.
    pub fn laplacian_rows(&self) -> Vec<Vec<(usize, f64)>> {
        let inv_h2 = 1.0 / (self.spacing * self.spacing);
        let diag = -2.0 * self.active_dims() as f64 * inv_h2;
        (0..self.site_count())
            .map(|s| {
                let mut row = vec![(s, diag)];
                for (t, w) in self.stencil(SiteIndex(s)).expect("site in range") {
                    row.push((t.0, w * inv_h2));
                }
                row
            })
            .collect()
    }

    /// Periodic finite-difference Laplacian of a per-site field.
    pub fn laplacian_apply(&self, values: &[Complex64]) -> Result<Vec<Complex64>> {
        if values.len() != self.site_count() {
            return Err(Error::LengthMismatch { expected: self.site_count(), got: values.len() });
        }
        Ok(self
            .laplacian_rows()
            .iter()
            .map(|row| row.iter().map(|&(t, w)| values[t] * w).sum())
            .collect())
    }
}

/// Set of lattice sites; may be empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    sites: BTreeSet<usize>,
}

impl Region {
    pub fn new<I: IntoIterator<Item = usize>>(sites: I) -> Self {
        Self { sites: sites.into_iter().collect() }
    }

    pub fn all(lat: &Lattice3D) -> Self {
        Self::new(0..lat.site_count())
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Sites in increasing order.
    pub fn sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.sites.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, s: usize) -> bool {
        self.sites.contains(&s)
    }

    pub fn complement(&self, lat: &Lattice3D) -> Self {
        Self::new((0..lat.site_count()).filter(|s| !self.sites.contains(s)))
    }
}
