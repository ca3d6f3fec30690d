//! Brute-force dense tensor-product reference.
//!
//! States are flat coefficient vectors over the full product basis with slot 0
//! most significant, so a product of one-slot operators is the Kronecker
//! product `A_0 ⊗ A_1 ⊗ …`. Nothing here goes through the sparse layer types.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::multilayer::{Sector, Symmetry};
use crate::onebody::OneParticleField;

/// Largest product-space dimension the oracle accepts.
pub const DEFAULT_CAP: usize = 65536;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensorState {
    sector: Sector,
    coefficients: Vec<Complex64>,
}

fn checked_dim(sector: &Sector, cap: usize) -> Result<usize> {
    match sector.total_dim() {
        Some(d) if d <= cap => Ok(d),
        Some(d) => Err(Error::CapExceeded { dim: d, cap }),
        None => Err(Error::CapExceeded { dim: usize::MAX, cap }),
    }
}

impl DenseTensorState {
    pub fn new(sector: Sector, coefficients: Vec<Complex64>) -> Result<Self> {
        let dim = checked_dim(&sector, DEFAULT_CAP)?;
        if coefficients.len() != dim {
            return Err(Error::LengthMismatch { expected: dim, got: coefficients.len() });
        }
        Ok(Self { sector, coefficients })
    }

    pub fn zeros(sector: Sector) -> Result<Self> {
        let dim = checked_dim(&sector, DEFAULT_CAP)?;
        Ok(Self { sector, coefficients: vec![ZERO; dim] })
    }

    pub fn sector(&self) -> &Sector {
        &self.sector
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coefficients
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn as_vector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.coefficients)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: Complex64, b: Complex64, other: &Self) -> Self {
        let coefficients = self.coefficients.iter().zip(&other.coefficients).map(|(x, y)| a * x + b * y).collect();
        Self { sector: self.sector.clone(), coefficients }
    }
}

/// Product state `ψ_1 ⊗ … ⊗ ψ_N` as a dense coefficient vector.
pub fn dense_outer(fields: &[OneParticleField]) -> Result<DenseTensorState> {
    let first = fields.first().ok_or(Error::EmptyFactors)?;
    let lattice = *first.lattice();
    if fields.iter().any(|f| *f.lattice() != lattice) {
        return Err(Error::ShapeMismatch("fields on different lattices".into()));
    }
    let sector = Sector::distinguishable(lattice, fields.iter().map(|f| f.spec().clone()).collect())?;
    checked_dim(&sector, DEFAULT_CAP)?;
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for f in fields {
        coeffs = coeffs.iter().flat_map(|&a| f.amplitudes().iter().map(move |&b| a * b)).collect();
    }
    DenseTensorState::new(sector, coeffs)
}

/// `Σ conj(a)·b·(h³)^N`.
pub fn dense_inner(a: &DenseTensorState, b: &DenseTensorState) -> Result<Complex64> {
    if !a.sector.same_space(&b.sector) {
        return Err(Error::SectorMismatch("oracle states in different sectors".into()));
    }
    let raw: Complex64 = a.coefficients.iter().zip(&b.coefficients).map(|(x, y)| x.conj() * y).sum();
    Ok(raw * a.sector.basis_weight())
}

pub fn dense_apply(op: &DMatrix<Complex64>, t: &DenseTensorState) -> Result<DenseTensorState> {
    if op.nrows() != t.dim() || op.ncols() != t.dim() {
        return Err(Error::ShapeMismatch(format!("{}x{} operator on dimension {}", op.nrows(), op.ncols(), t.dim())));
    }
    let v = op * t.as_vector();
    let sector = t.sector.with_symmetry(Symmetry::None)?;
    Ok(DenseTensorState { sector, coefficients: v.iter().copied().collect() })
}

/// Largest entry of `A − A†`.
pub fn hermiticity_defect(a: &DMatrix<Complex64>) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    (a - a.adjoint()).iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Largest entry of `U†U − 1`.
pub fn unitarity_defect(u: &DMatrix<Complex64>) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    let n = u.nrows();
    (u.adjoint() * u - DMatrix::identity(n, n)).iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// `exp(−i H t / ħ)` via the eigendecomposition of the Hermitian `H`.
pub fn dense_expm(h: &DMatrix<Complex64>, time: f64, hbar: f64) -> Result<DMatrix<Complex64>> {
    let defect = hermiticity_defect(h);
    let scale = h.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    if defect > 1e-12 * scale {
        return Err(Error::NotHermitian(defect));
    }
    if h.nrows() > DEFAULT_CAP {
        return Err(Error::CapExceeded { dim: h.nrows(), cap: DEFAULT_CAP });
    }
    let eig = h.clone().symmetric_eigen();
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -e * time / hbar)));
    let v = &eig.eigenvectors;
    Ok(v * phases * v.adjoint())
}

pub fn dense_expm_evolve(t: &DenseTensorState, h: &DMatrix<Complex64>, time: f64, hbar: f64) -> Result<DenseTensorState> {
    let u = dense_expm(h, time, hbar)?;
    let mut out = dense_apply(&u, t)?;
    out.sector = t.sector.clone();
    Ok(out)
}

/// `(1/N!) Σ_π (±1)^π` applied to the slot ordering, using flat-index strides.
pub fn dense_symmetrize(t: &DenseTensorState, symmetry: Symmetry) -> Result<DenseTensorState> {
    let sector = t.sector.with_symmetry(symmetry)?;
    let sign = match symmetry {
        Symmetry::None => return Ok(DenseTensorState { sector, coefficients: t.coefficients.clone() }),
        Symmetry::Symmetric => 1.0,
        Symmetry::Antisymmetric => -1.0,
    };
    let n = sector.n_particles();
    let d = if n == 0 { 1 } else { sector.slot_dim(0) };
    let dim = t.dim();
    let perms: Vec<(Vec<usize>, f64)> = (0..n)
        .permutations(n)
        .map(|p| {
            let mut s = 1.0;
            for i in 0..n {
                for j in i + 1..n {
                    if p[i] > p[j] {
                        s *= sign;
                    }
                }
            }
            (p, s)
        })
        .collect();
    let norm = 1.0 / perms.len() as f64;
    let mut out = vec![ZERO; dim];
    let mut digits = vec![0usize; n];
    for (flat, slot) in out.iter_mut().enumerate() {
        let mut rem = flat;
        for k in (0..n).rev() {
            digits[k] = rem % d;
            rem /= d;
        }
        let mut acc = ZERO;
        for (p, s) in &perms {
            let src = p.iter().fold(0usize, |a, &k| a * d + digits[k]);
            acc += t.coefficients[src] * *s;
        }
        *slot = acc * norm;
    }
    Ok(DenseTensorState { sector, coefficients: out })
}

/// Kronecker product of a list of matrices, first factor most significant.
pub fn kron_all(mats: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
    mats.iter().fold(DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)), |acc, m| acc.kronecker(m))
}

/// Dense matrix of a one-slot operator embedded into the product space.
pub fn dense_lift(op: &DMatrix<Complex64>, slot: usize, sector: &Sector) -> DMatrix<Complex64> {
    let mats: Vec<_> = (0..sector.n_particles())
        .map(|j| if j == slot { op.clone() } else { DMatrix::identity(sector.slot_dim(j), sector.slot_dim(j)) })
        .collect();
    kron_all(&mats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Lattice3D, SiteIndex};
    use crate::onebody::{ParticleSpec, Statistics};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar() -> ParticleSpec {
        ParticleSpec::new("p", 1, Statistics::Distinguishable, 1.0).unwrap()
    }

    #[test]
    fn outer_of_deltas_is_a_single_entry() {
        let lat = Lattice3D::ring(3).unwrap();
        let a = OneParticleField::basis(lat, scalar(), SiteIndex(1), 0).unwrap();
        let b = OneParticleField::basis(lat, scalar(), SiteIndex(2), 0).unwrap();
        let t = dense_outer(&[a.clone(), b.clone()]).unwrap();
        let nz: Vec<_> = t.coefficients().iter().enumerate().filter(|(_, z)| **z != ZERO).collect();
        assert_eq!(nz, vec![(5, &c(1.0, 0.0))]);
        let other = dense_outer(&[b, a]).unwrap();
        assert_eq!(dense_inner(&t, &other).unwrap(), ZERO);
    }

    #[test]
    fn outer_is_linear_in_each_slot() {
        let lat = Lattice3D::ring(2).unwrap();
        let f = OneParticleField::from_amplitudes(lat, scalar(), vec![c(1.0, 2.0), c(0.5, 0.0)]).unwrap();
        let g = OneParticleField::from_amplitudes(lat, scalar(), vec![c(0.0, 1.0), c(-1.0, 0.0)]).unwrap();
        let h = OneParticleField::from_amplitudes(lat, scalar(), vec![c(3.0, 0.0), c(0.0, 0.0)]).unwrap();
        let (a, b) = (c(0.5, 0.5), c(-2.0, 0.0));
        let mix = OneParticleField::scale_add(a, &f, b, &g).unwrap();
        let lhs = dense_outer(&[mix, h.clone()]).unwrap();
        let rhs = dense_outer(&[f, h.clone()]).unwrap().combine(a, b, &dense_outer(&[g, h]).unwrap());
        for (x, y) in lhs.coefficients().iter().zip(rhs.coefficients()) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let h = DMatrix::<Complex64>::zeros(4, 4);
        assert_eq!(dense_expm(&h, 3.0, 1.0).unwrap(), DMatrix::identity(4, 4));
    }

    #[test]
    fn expm_is_unitary() {
        let mut h = DMatrix::<Complex64>::zeros(5, 5);
        for i in 0..5 {
            for j in 0..5 {
                h[(i, j)] = c((i + j) as f64 * 0.3, i as f64 - j as f64);
            }
        }
        let u = dense_expm(&h, 0.7, 1.0).unwrap();
        assert!(unitarity_defect(&u) <= 1e-12);
        let mut bad = h.clone();
        bad[(0, 1)] += c(1.0, 0.0);
        assert!(matches!(dense_expm(&bad, 1.0, 1.0), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn antisymmetrized_repeated_product_vanishes() {
        let lat = Lattice3D::ring(3).unwrap();
        let f = OneParticleField::from_amplitudes(lat, scalar(), vec![c(1.0, 2.0), c(0.5, 0.0), c(0.0, -1.0)]).unwrap();
        let t = dense_outer(&[f.clone(), f]).unwrap();
        let a = dense_symmetrize(&t, Symmetry::Antisymmetric).unwrap();
        assert!(a.coefficients().iter().all(|z| *z == ZERO));
    }

    #[test]
    fn cap_is_enforced() {
        let lat = Lattice3D::new([64, 32, 1], 1.0).unwrap();
        let sec = Sector::distinguishable(lat, vec![scalar(), scalar()]).unwrap();
        assert!(matches!(DenseTensorState::zeros(sec), Err(Error::CapExceeded { .. })));
    }
}
