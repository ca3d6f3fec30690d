//! One-particle state spaces: complex fields over lattice sites times an
//! internal index, with the volume-weighted scalar product.
//!
//! Amplitudes are stored site-major, internal-minor: slot `s * internal_dim + k`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice3D, SiteIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistics {
    Distinguishable,
    Boson,
    Fermion,
}

/// Particle type: label, internal dimension, statistics and mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSpec {
    pub label: String,
    pub internal_dim: usize,
    pub statistics: Statistics,
    pub mass: f64,
}

impl ParticleSpec {
    pub fn new(label: impl Into<String>, internal_dim: usize, statistics: Statistics, mass: f64) -> Result<Self> {
        let spec = Self { label: label.into(), internal_dim, statistics, mass };
        spec.validate()?;
        Ok(spec)
    }

    /// Spinless distinguishable particle of unit mass.
    pub fn scalar(label: impl Into<String>) -> Self {
        Self { label: label.into(), internal_dim: 1, statistics: Statistics::Distinguishable, mass: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.internal_dim == 0 {
            return Err(Error::InvalidSpec(format!("{}: internal_dim must be >= 1", self.label)));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::InvalidSpec(format!("{}: mass must be positive", self.label)));
        }
        Ok(())
    }

    /// Dimension of the one-particle space on `lat`.
    pub fn dim_on(&self, lat: &Lattice3D) -> usize {
        lat.site_count() * self.internal_dim
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneParticleField {
    lattice: Lattice3D,
    spec: ParticleSpec,
    amplitudes: Vec<Complex64>,
}

impl OneParticleField {
    pub fn from_amplitudes(lattice: Lattice3D, spec: ParticleSpec, amplitudes: Vec<Complex64>) -> Result<Self> {
        spec.validate()?;
        let expected = spec.dim_on(&lattice);
        if amplitudes.len() != expected {
            return Err(Error::LengthMismatch { expected, got: amplitudes.len() });
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite amplitude".into()));
        }
        Ok(Self { lattice, spec, amplitudes })
    }

    pub fn zeros(lattice: Lattice3D, spec: ParticleSpec) -> Self {
        let n = spec.dim_on(&lattice);
        Self { lattice, spec, amplitudes: vec![Complex64::new(0.0, 0.0); n] }
    }

    /// Site-delta basis field: 1 at `(site, k)`, 0 elsewhere.
    pub fn basis(lattice: Lattice3D, spec: ParticleSpec, site: SiteIndex, k: usize) -> Result<Self> {
        lattice.check_site(site)?;
        if k >= spec.internal_dim {
            return Err(Error::IndexOutOfRange { index: k, len: spec.internal_dim });
        }
        let mut f = Self::zeros(lattice, spec);
        let idim = f.spec.internal_dim;
        f.amplitudes[site.0 * idim + k] = Complex64::new(1.0, 0.0);
        Ok(f)
    }

    /// Field with one spatial profile per internal component:
    /// `amp[s * idim + k] = spatial[s] * internal[k]`.
    pub fn product(lattice: Lattice3D, spec: ParticleSpec, spatial: &[Complex64], internal: &[Complex64]) -> Result<Self> {
        if spatial.len() != lattice.site_count() {
            return Err(Error::LengthMismatch { expected: lattice.site_count(), got: spatial.len() });
        }
        if internal.len() != spec.internal_dim {
            return Err(Error::LengthMismatch { expected: spec.internal_dim, got: internal.len() });
        }
        let amps = spatial.iter().flat_map(|&a| internal.iter().map(move |&b| a * b)).collect();
        Self::from_amplitudes(lattice, spec, amps)
    }

    pub fn lattice(&self) -> &Lattice3D {
        &self.lattice
    }

    pub fn spec(&self) -> &ParticleSpec {
        &self.spec
    }

    pub fn internal_dim(&self) -> usize {
        self.spec.internal_dim
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Amplitudes of all internal components at one site.
    pub fn at_site(&self, s: SiteIndex) -> Result<&[Complex64]> {
        self.lattice.check_site(s)?;
        let d = self.spec.internal_dim;
        Ok(&self.amplitudes[s.0 * d..(s.0 + 1) * d])
    }

    pub fn is_zero(&self) -> bool {
        self.amplitudes.iter().all(|z| *z == Complex64::new(0.0, 0.0))
    }

    pub fn same_space(&self, other: &Self) -> bool {
        self.lattice == other.lattice && self.spec == other.spec
    }

    fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.same_space(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "fields live on different spaces ({} vs {})",
                self.spec.label, other.spec.label
            )))
        }
    }

    /// `Σ conj(f)·g·h³`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same_space(other)?;
        let raw: Complex64 = self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum();
        Ok(raw * self.lattice.cell_volume())
    }

    pub fn norm(&self) -> f64 {
        let raw: f64 = self.amplitudes.iter().map(|z| z.norm_sqr()).sum();
        (raw * self.lattice.cell_volume()).sqrt()
    }

    /// `a·f + b·g` entrywise.
    pub fn scale_add(a: Complex64, f: &Self, b: Complex64, g: &Self) -> Result<Self> {
        f.check_same_space(g)?;
        let amplitudes = f.amplitudes.iter().zip(&g.amplitudes).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { lattice: f.lattice, spec: f.spec.clone(), amplitudes })
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self { lattice: self.lattice, spec: self.spec.clone(), amplitudes: self.amplitudes.iter().map(|z| z * c).collect() }
    }

    /// `−(ħ²/2m)·Δ` applied to each internal component independently.
    pub fn kinetic(&self, mass: f64, hbar: f64) -> Self {
        let op = OneBodyMatrix::kinetic(&self.lattice, self.spec.internal_dim, mass, hbar);
        let amplitudes = op.apply(&self.amplitudes).expect("dimension matches by construction");
        Self { lattice: self.lattice, spec: self.spec.clone(), amplitudes }
    }

    /// Apply a one-particle operator.
    pub fn apply(&self, op: &OneBodyMatrix) -> Result<Self> {
        let amplitudes = op.apply(&self.amplitudes)?;
        Ok(Self { lattice: self.lattice, spec: self.spec.clone(), amplitudes })
    }

    pub(crate) fn with_amplitudes(&self, amplitudes: Vec<Complex64>) -> Self {
        debug_assert_eq!(amplitudes.len(), self.amplitudes.len());
        Self { lattice: self.lattice, spec: self.spec.clone(), amplitudes }
    }
}

/// Sparse operator on a one-particle space, stored column-wise:
/// `columns[j]` lists the nonzero `(row, value)` entries of column `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneBodyMatrix {
    columns: Vec<Vec<(usize, Complex64)>>,
}

impl OneBodyMatrix {
    pub fn identity(dim: usize) -> Self {
        Self { columns: (0..dim).map(|j| vec![(j, Complex64::new(1.0, 0.0))]).collect() }
    }

    pub fn from_columns(columns: Vec<Vec<(usize, Complex64)>>) -> Result<Self> {
        let dim = columns.len();
        for col in &columns {
            if let Some(&(r, _)) = col.iter().find(|(r, _)| *r >= dim) {
                return Err(Error::IndexOutOfRange { index: r, len: dim });
            }
        }
        Ok(Self { columns })
    }

    pub fn from_dense(m: &DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::ShapeMismatch(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
        }
        let columns = (0..m.ncols())
            .map(|j| (0..m.nrows()).filter(|&i| m[(i, j)] != Complex64::new(0.0, 0.0)).map(|i| (i, m[(i, j)])).collect())
            .collect();
        Ok(Self { columns })
    }

    /// `−(ħ²/2m)·Δ ⊗ 1_internal`.
    pub fn kinetic(lat: &Lattice3D, internal_dim: usize, mass: f64, hbar: f64) -> Self {
        let pref = -hbar * hbar / (2.0 * mass);
        let rows = lat.laplacian_rows();
        let mut columns = vec![Vec::new(); lat.site_count() * internal_dim];
        // The Laplacian is symmetric, so row s doubles as column s.
        for (s, row) in rows.iter().enumerate() {
            for k in 0..internal_dim {
                columns[s * internal_dim + k] =
                    row.iter().map(|&(t, w)| (t * internal_dim + k, Complex64::new(pref * w, 0.0))).collect();
            }
        }
        Self { columns }
    }

    /// `1_sites ⊗ m` for an operator `m` on the internal space.
    pub fn internal(lat: &Lattice3D, m: &DMatrix<Complex64>) -> Result<Self> {
        let local = Self::from_dense(m)?;
        let d = local.dim();
        let mut columns = Vec::with_capacity(lat.site_count() * d);
        for s in 0..lat.site_count() {
            for col in &local.columns {
                columns.push(col.iter().map(|&(r, v)| (s * d + r, v)).collect());
            }
        }
        Ok(Self { columns })
    }

    /// Multiplication by a real per-site potential, identical on every internal component.
    pub fn site_potential(lat: &Lattice3D, internal_dim: usize, table: &[f64]) -> Result<Self> {
        if table.len() != lat.site_count() {
            return Err(Error::LengthMismatch { expected: lat.site_count(), got: table.len() });
        }
        let columns = (0..lat.site_count() * internal_dim)
            .map(|j| {
                let v = table[j / internal_dim];
                if v == 0.0 {
                    Vec::new()
                } else {
                    vec![(j, Complex64::new(v, 0.0))]
                }
            })
            .collect();
        Ok(Self { columns })
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[(usize, Complex64)] {
        &self.columns[j]
    }

    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.dim() {
            return Err(Error::LengthMismatch { expected: self.dim(), got: v.len() });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (col, &x) in self.columns.iter().zip(v) {
            if x == Complex64::new(0.0, 0.0) {
                continue;
            }
            for &(r, w) in col {
                out[r] += w * x;
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, v) in col {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut columns = vec![Vec::new(); self.dim()];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, v) in col {
                columns[i].push((j, v.conj()));
            }
        }
        Self { columns }
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.to_dense();
        (&d - d.adjoint()).iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn spec(d: usize) -> ParticleSpec {
        ParticleSpec::new("p", d, Statistics::Distinguishable, 1.0).unwrap()
    }

    #[test]
    fn basis_fields() {
        let lat = Lattice3D::ring(2).unwrap();
        let f = OneParticleField::basis(lat, spec(1), SiteIndex(0), 0).unwrap();
        assert_eq!(f.amplitudes(), &[c(1.0, 0.0), c(0.0, 0.0)]);
        let f = OneParticleField::basis(lat, spec(2), SiteIndex(1), 1).unwrap();
        assert_eq!(f.amplitudes(), &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(OneParticleField::basis(lat, spec(2), SiteIndex(2), 0).is_err());
        assert!(OneParticleField::basis(lat, spec(2), SiteIndex(0), 2).is_err());
    }

    #[test]
    fn basis_orthogonality_with_cell_weight() {
        let lat = Lattice3D::new([2, 2, 1], 0.5).unwrap();
        let sp = spec(2);
        let fields: Vec<_> = (0..4)
            .flat_map(|s| (0..2).map(move |k| (s, k)))
            .map(|(s, k)| OneParticleField::basis(lat, sp.clone(), SiteIndex(s), k).unwrap())
            .collect();
        for (i, f) in fields.iter().enumerate() {
            for (j, g) in fields.iter().enumerate() {
                let expect = if i == j { 0.125 } else { 0.0 };
                assert_eq!(f.inner(g).unwrap(), c(expect, 0.0));
            }
        }
    }

    #[test]
    fn inner_products() {
        let lat = Lattice3D::ring(2).unwrap();
        let z = OneParticleField::zeros(lat, spec(1));
        assert_eq!(z.inner(&z).unwrap(), c(0.0, 0.0));
        let a = OneParticleField::from_amplitudes(lat, spec(1), vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let b = OneParticleField::from_amplitudes(lat, spec(1), vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(a.inner(&b).unwrap(), c(0.0, 0.0));
        let lat2 = Lattice3D::new([2, 1, 1], 2.0).unwrap();
        let f = OneParticleField::from_amplitudes(lat2, spec(1), vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(f.inner(&f).unwrap(), c(16.0, 0.0));
        assert!(matches!(a.inner(&f), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn scale_add_examples() {
        let lat = Lattice3D::ring(2).unwrap();
        let f = OneParticleField::from_amplitudes(lat, spec(1), vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let g = OneParticleField::from_amplitudes(lat, spec(1), vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(OneParticleField::scale_add(c(1.0, 0.0), &f, c(0.0, 0.0), &g).unwrap(), f);
        assert!(OneParticleField::scale_add(c(1.0, 0.0), &f, c(-1.0, 0.0), &f).unwrap().is_zero());
        let h = OneParticleField::scale_add(c(2.0, 0.0), &f, c(3.0, 0.0), &g).unwrap();
        assert_eq!(h.amplitudes(), &[c(2.0, 0.0), c(3.0, 0.0)]);
    }

    #[test]
    fn kinetic_examples() {
        let lat = Lattice3D::ring(4).unwrap();
        let konst = OneParticleField::from_amplitudes(lat, spec(1), vec![c(0.3, -0.2); 4]).unwrap();
        assert!(konst.kinetic(1.0, 1.0).amplitudes().iter().all(|z| z.norm() < 1e-15));

        let k = std::f64::consts::FRAC_PI_2;
        let pw: Vec<_> = (0..4).map(|s| Complex64::from_polar(1.0, k * s as f64)).collect();
        let f = OneParticleField::from_amplitudes(lat, spec(1), pw.clone()).unwrap();
        for (o, v) in f.kinetic(1.0, 1.0).amplitudes().iter().zip(&pw) {
            assert_abs_diff_eq!((o - v).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn kinetic_is_blockwise_in_internal_index() {
        let lat = Lattice3D::ring(5).unwrap();
        let f0: Vec<_> = (0..5).map(|s| c(s as f64, 1.0)).collect();
        let f1: Vec<_> = (0..5).map(|s| c(-1.0, (s * s) as f64)).collect();
        let both = OneParticleField::product(lat, spec(2), &f0, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let both = OneParticleField::scale_add(
            c(1.0, 0.0),
            &both,
            c(1.0, 0.0),
            &OneParticleField::product(lat, spec(2), &f1, &[c(0.0, 0.0), c(1.0, 0.0)]).unwrap(),
        )
        .unwrap();
        let k = both.kinetic(2.0, 1.0);
        let k0 = OneParticleField::from_amplitudes(lat, spec(1), f0).unwrap().kinetic(2.0, 1.0);
        let k1 = OneParticleField::from_amplitudes(lat, spec(1), f1).unwrap().kinetic(2.0, 1.0);
        for s in 0..5 {
            assert_eq!(k.amplitudes()[2 * s], k0.amplitudes()[s]);
            assert_eq!(k.amplitudes()[2 * s + 1], k1.amplitudes()[s]);
        }
    }

    #[test]
    fn internal_operator_layout() {
        let lat = Lattice3D::ring(2).unwrap();
        let sx = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let op = OneBodyMatrix::internal(&lat, &sx).unwrap();
        let v = vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)];
        assert_eq!(op.apply(&v).unwrap(), vec![c(2.0, 0.0), c(1.0, 0.0), c(4.0, 0.0), c(3.0, 0.0)]);
        assert_eq!(op.hermiticity_defect(), 0.0);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ParticleSpec::new("x", 0, Statistics::Boson, 1.0).is_err());
        assert!(ParticleSpec::new("x", 1, Statistics::Boson, 0.0).is_err());
    }
}
