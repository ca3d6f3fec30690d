//! Free scalar field on the lattice: plane-wave modes, truncated Fock space,
//! ladder operators and the map from occupation states to multi-layered
//! fields.
//!
//! Ladder operators are kept in exact form. Every matrix entry is a finite
//! sum `Σ c_r √r` over squarefree `r` with integer `c`, so commutators below
//! the cutoff come out as exact zeros and ones rather than rounded floats.
//! Lattice normalization is `[a_k, a_k'†] = δ_kk'`; the continuum factor
//! `site_count·h³` is not folded into the operators.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use itertools::Itertools;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Lattice3D, SiteIndex};
use crate::multilayer::{FockState, MultiIndex, MultiLayerState, Sector, Symmetry};
use crate::onebody::{ParticleSpec, Statistics};
use crate::oracle::DEFAULT_CAP;
use crate::sparse::SparseMatrix;

pub const DEFAULT_CUTOFF: usize = 3;

/// Element of the additive group generated by square roots of integers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Surd(BTreeMap<u64, i64>);

impl Surd {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn integer(n: i64) -> Self {
        Self::term(n, 1)
    }

    /// `√n`.
    pub fn sqrt_of(n: u64) -> Self {
        let (outer, radicand) = split_square(n);
        Self::term(outer as i64, radicand)
    }

    fn term(c: i64, r: u64) -> Self {
        let mut m = BTreeMap::new();
        if c != 0 && r != 0 {
            m.insert(r, c);
        }
        Self(m)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// The integer value when no irrational part remains.
    pub fn as_integer(&self) -> Option<i64> {
        match self.0.len() {
            0 => Some(0),
            1 => self.0.get(&1).copied(),
            _ => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.0.iter().map(|(&r, &c)| c as f64 * (r as f64).sqrt()).sum()
    }
}

/// Writes `n = outer²·radicand` with `radicand` squarefree.
fn split_square(mut n: u64) -> (u64, u64) {
    if n == 0 {
        return (0, 0);
    }
    let (mut outer, mut radicand) = (1, 1);
    let mut p = 2;
    while p * p <= n {
        let mut e = 0;
        while n.is_multiple_of(p) {
            n /= p;
            e += 1;
        }
        outer *= p.pow(e / 2);
        if e % 2 == 1 {
            radicand *= p;
        }
        p += 1;
    }
    (outer, radicand * n)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

impl Add for &Surd {
    type Output = Surd;
    fn add(self, rhs: &Surd) -> Surd {
        let mut m = self.0.clone();
        for (&r, &c) in &rhs.0 {
            *m.entry(r).or_insert(0) += c;
        }
        m.retain(|_, c| *c != 0);
        Surd(m)
    }
}

impl Neg for &Surd {
    type Output = Surd;
    fn neg(self) -> Surd {
        Surd(self.0.iter().map(|(&r, &c)| (r, -c)).collect())
    }
}

impl Sub for &Surd {
    type Output = Surd;
    fn sub(self, rhs: &Surd) -> Surd {
        self + &(-rhs)
    }
}

impl Mul for &Surd {
    type Output = Surd;
    fn mul(self, rhs: &Surd) -> Surd {
        let mut m = BTreeMap::new();
        for (&r, &a) in &self.0 {
            for (&s, &b) in &rhs.0 {
                // r, s squarefree: √r·√s = g·√((r/g)(s/g)) with g = gcd(r, s).
                let g = gcd(r, s);
                *m.entry((r / g) * (s / g)).or_insert(0) += a * b * g as i64;
            }
        }
        m.retain(|_, c| *c != 0);
        Surd(m)
    }
}

/// Square matrix with exact [`Surd`] entries, stored by row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactMatrix {
    dim: usize,
    rows: Vec<BTreeMap<usize, Surd>>,
}

impl ExactMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, rows: vec![BTreeMap::new(); dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.rows[i].insert(i, Surd::integer(1));
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Surd {
        self.rows[i].get(&j).cloned().unwrap_or_default()
    }

    fn insert(&mut self, i: usize, j: usize, v: Surd) {
        if !v.is_zero() {
            self.rows[i].insert(j, v);
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &Surd)> {
        self.rows.iter().enumerate().flat_map(|(i, r)| r.iter().map(move |(&j, v)| (i, j, v)))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.dim);
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc: BTreeMap<usize, Surd> = BTreeMap::new();
            for (&k, a) in row {
                for (&j, b) in &other.rows[k] {
                    let e = acc.entry(j).or_default();
                    *e = &*e + &(a * b);
                }
            }
            acc.retain(|_, v| !v.is_zero());
            out.rows[i] = acc;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (i, j, v) in other.entries() {
            let e = out.rows[i].entry(j).or_default();
            *e = &*e - v;
            if e.is_zero() {
                out.rows[i].remove(&j);
            }
        }
        out
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for (i, j, v) in self.entries() {
            out.insert(j, i, v.clone());
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(BTreeMap::is_empty)
    }

    /// Largest entry modulus, evaluated in floating point.
    pub fn max_abs(&self) -> f64 {
        self.entries().fold(0.0, |m, (_, _, v)| m.max(v.to_f64().abs()))
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        let t = self.entries().map(|(i, j, v)| (i, j, Complex64::new(v.to_f64(), 0.0)));
        SparseMatrix::from_triplets(self.dim, t).expect("indices in range")
    }
}

/// One plane-wave mode of the lattice field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSpec {
    /// Brillouin-zone integer index per axis.
    pub index: [i64; 3],
    pub k: [f64; 3],
    pub omega: f64,
    pub mass: f64,
}

impl ModeSpec {
    pub fn new(lattice: &Lattice3D, index: [i64; 3], mass: f64) -> Result<Self> {
        if !(mass >= 0.0 && mass.is_finite()) {
            return Err(Error::InvalidMode(format!("mass must be finite and non-negative, got {mass}")));
        }
        let dims = lattice.dims();
        let mut k = [0.0; 3];
        for a in 0..3 {
            let n = dims[a] as i64;
            let (lo, hi) = (-(n - 1) / 2, n / 2);
            if index[a] < lo || index[a] > hi {
                return Err(Error::InvalidMode(format!("index {} outside zone range {lo}..={hi} on axis {a}", index[a])));
            }
            k[a] = 2.0 * PI * index[a] as f64 / (n as f64 * lattice.spacing());
        }
        let omega = (k.iter().map(|x| x * x).sum::<f64>() + mass * mass).sqrt();
        if omega == 0.0 {
            return Err(Error::InvalidMode("massless zero mode has zero frequency".into()));
        }
        Ok(Self { index, k, omega, mass })
    }

    /// Every Brillouin-zone mode of `lattice`, in site order of `index mod dims`.
    pub fn brillouin_zone(lattice: &Lattice3D, mass: f64) -> Result<Vec<Self>> {
        let dims = lattice.dims();
        let fold = |c: usize, n: usize| if c > n / 2 { c as i64 - n as i64 } else { c as i64 };
        (0..lattice.site_count())
            .map(|s| {
                let c = lattice.coords(SiteIndex(s))?;
                Self::new(lattice, [fold(c[0], dims[0]), fold(c[1], dims[1]), fold(c[2], dims[2])], mass)
            })
            .collect()
    }

    /// Column of the discrete Fourier matrix this mode occupies.
    fn dft_column(&self, lattice: &Lattice3D) -> usize {
        let d = lattice.dims();
        let wrap = |i: i64, n: usize| i.rem_euclid(n as i64) as usize;
        wrap(self.index[0], d[0]) + d[0] * (wrap(self.index[1], d[1]) + d[1] * wrap(self.index[2], d[2]))
    }

    /// `e^{ik·x_s}`.
    pub fn phase_at(&self, lattice: &Lattice3D, site: SiteIndex) -> Result<Complex64> {
        let x = lattice.position(site)?;
        Ok(Complex64::from_polar(1.0, self.k.iter().zip(x).map(|(k, x)| k * x).sum()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Create,
    Annihilate,
}

/// Truncated bosonic Fock space over a list of modes. Basis states are
/// occupation tuples, mode 0 most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedFock {
    lattice: Lattice3D,
    modes: Vec<ModeSpec>,
    cutoff: usize,
}

impl TruncatedFock {
    pub fn new(lattice: Lattice3D, modes: Vec<ModeSpec>, cutoff: usize) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidMode("no modes".into()));
        }
        let dim = (cutoff + 1).checked_pow(modes.len() as u32).unwrap_or(usize::MAX);
        if dim > DEFAULT_CAP {
            return Err(Error::CapExceeded { dim, cap: DEFAULT_CAP });
        }
        Ok(Self { lattice, modes, cutoff })
    }

    /// All Brillouin-zone modes of a ring of `n` sites with unit mass.
    pub fn ring(n: usize, cutoff: usize) -> Result<Self> {
        let lat = Lattice3D::ring(n)?;
        Self::new(lat, ModeSpec::brillouin_zone(&lat, 1.0)?, cutoff)
    }

    pub fn lattice(&self) -> &Lattice3D {
        &self.lattice
    }

    pub fn modes(&self) -> &[ModeSpec] {
        &self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        (self.cutoff + 1).pow(self.modes.len() as u32)
    }

    pub fn index_of(&self, occupation: &[usize]) -> Result<usize> {
        if occupation.len() != self.modes.len() {
            return Err(Error::LengthMismatch { expected: self.modes.len(), got: occupation.len() });
        }
        let mut idx = 0;
        for &n in occupation {
            if n > self.cutoff {
                return Err(Error::OverCutoff { occupation: n, cutoff: self.cutoff });
            }
            idx = idx * (self.cutoff + 1) + n;
        }
        Ok(idx)
    }

    pub fn occupation(&self, mut idx: usize) -> Vec<usize> {
        let mut occ = vec![0; self.modes.len()];
        for slot in occ.iter_mut().rev() {
            *slot = idx % (self.cutoff + 1);
            idx /= self.cutoff + 1;
        }
        occ
    }

    fn check_mode(&self, i: usize) -> Result<()> {
        if i >= self.modes.len() {
            return Err(Error::IndexOutOfRange { index: i, len: self.modes.len() });
        }
        Ok(())
    }

    /// `a_i` or `a_i†`, identity on the other modes.
    pub fn ladder(&self, i: usize, kind: Ladder) -> Result<ExactMatrix> {
        self.check_mode(i)?;
        let mut m = ExactMatrix::zeros(self.dim());
        for col in 0..self.dim() {
            let mut occ = self.occupation(col);
            let n = occ[i];
            let (target, weight) = match kind {
                Ladder::Annihilate if n > 0 => (n - 1, n),
                Ladder::Create if n < self.cutoff => (n + 1, n + 1),
                _ => continue,
            };
            occ[i] = target;
            m.insert(self.index_of(&occ)?, col, Surd::sqrt_of(weight as u64));
        }
        Ok(m)
    }

    pub fn number(&self, i: usize) -> Result<ExactMatrix> {
        Ok(self.ladder(i, Ladder::Create)?.matmul(&self.ladder(i, Ladder::Annihilate)?))
    }

    /// Basis vector for an occupation tuple.
    pub fn basis_state(&self, occupation: &[usize]) -> Result<Vec<Complex64>> {
        let mut v = vec![Complex64::new(0.0, 0.0); self.dim()];
        v[self.index_of(occupation)?] = Complex64::new(1.0, 0.0);
        Ok(v)
    }

    /// `Σ ω_k a_k†a_k`.
    pub fn free_hamiltonian(&self) -> Result<SparseMatrix> {
        let mut trip = Vec::new();
        for (i, mode) in self.modes.iter().enumerate() {
            for (r, c, v) in self.number(i)?.entries() {
                let n = v.as_integer().expect("number operator has integer entries");
                trip.push((r, c, Complex64::new(mode.omega * n as f64, 0.0)));
            }
        }
        SparseMatrix::from_triplets(self.dim(), trip)
    }

    /// `φ̂(s, t) = Σ_k (2ω_k·S)^{-1/2} (a_k e^{-iω_k t + ik·x_s} + h.c.)`.
    pub fn field_operator_at(&self, site: SiteIndex, t: f64) -> Result<SparseMatrix> {
        self.lattice.check_site(site)?;
        let sites = self.lattice.site_count() as f64;
        let mut trip = Vec::new();
        for (i, mode) in self.modes.iter().enumerate() {
            let z = mode.phase_at(&self.lattice, site)? * Complex64::from_polar(1.0, -mode.omega * t) / (2.0 * mode.omega * sites).sqrt();
            for (r, c, v) in self.ladder(i, Ladder::Annihilate)?.entries() {
                let w = v.to_f64();
                trip.push((r, c, z * w));
                trip.push((c, r, z.conj() * w));
            }
        }
        SparseMatrix::from_triplets(self.dim(), trip)
    }

    pub fn ccr_check(&self) -> Result<CcrReport> {
        let m = self.modes.len();
        let dim = self.dim();
        let id = ExactMatrix::identity(dim);
        let a: Vec<_> = (0..m).map(|i| self.ladder(i, Ladder::Annihilate)).collect::<Result<_>>()?;
        let ad: Vec<_> = (0..m).map(|i| self.ladder(i, Ladder::Create)).collect::<Result<_>>()?;
        let mut rep = CcrReport { modes: m, cutoff: self.cutoff, ..CcrReport::default() };
        for i in 0..m {
            for j in 0..m {
                rep.max_aa = rep.max_aa.max(a[i].commutator(&a[j]).max_abs());
                rep.max_adag_adag = rep.max_adag_adag.max(ad[i].commutator(&ad[j]).max_abs());
                let mut dev = a[i].commutator(&ad[j]);
                if i == j {
                    dev = dev.sub(&id);
                }
                rep.max_full_space = rep.max_full_space.max(dev.max_abs());
                for (r, c, v) in dev.entries() {
                    let boundary = i == j && (self.occupation(r)[i] == self.cutoff || self.occupation(c)[i] == self.cutoff);
                    if !boundary {
                        rep.max_below_cutoff = rep.max_below_cutoff.max(v.to_f64().abs());
                    }
                }
                if i == j {
                    let comm = a[i].commutator(&ad[i]);
                    for col in (0..dim).filter(|&c| self.occupation(c)[i] == self.cutoff) {
                        rep.boundary_anomaly = rep.boundary_anomaly.max(comm.get(col, col).to_f64().abs());
                    }
                }
            }
        }
        Ok(rep)
    }

    /// Fixed-`n` component of `state` as a symmetric multi-layered field of
    /// unit-spin scalar bosons in the position basis.
    pub fn to_multilayer(&self, state: &[Complex64], n: usize) -> Result<MultiLayerState> {
        if state.len() != self.dim() {
            return Err(Error::LengthMismatch { expected: self.dim(), got: state.len() });
        }
        let lat = self.lattice;
        if n == 0 {
            return Ok(MultiLayerState::vacuum(lat, state[0]));
        }
        let sites = lat.site_count();
        let dim = sites.checked_pow(n as u32).unwrap_or(usize::MAX);
        if dim > DEFAULT_CAP || self.modes.len().pow(n as u32) > DEFAULT_CAP {
            return Err(Error::CapExceeded { dim, cap: DEFAULT_CAP });
        }
        let columns: Vec<usize> = self.modes.iter().map(|m| m.dft_column(&lat)).collect();
        if columns.iter().duplicates().next().is_some() {
            return Err(Error::InvalidMode("two modes share one Fourier column".into()));
        }

        // Number state |n⟩ ↔ √(N!/∏n_k!)·Sym⁺(φ_k1⊗…⊗φ_kN): each distinct
        // ordering carries √(∏n_k!/N!).
        let weight = lat.cell_volume().powf(-(n as f64) / 2.0);
        let mut terms = Vec::new();
        for seq in (0..n).map(|_| 0..self.modes.len()).multi_cartesian_product() {
            let mut occ = vec![0; self.modes.len()];
            for &k in &seq {
                occ[k] += 1;
            }
            if occ.iter().any(|&o| o > self.cutoff) {
                continue;
            }
            let c = state[self.index_of(&occ)?];
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = occ.iter().map(|&o| factorial(o)).product::<f64>() / factorial(n);
            terms.push((MultiIndex(seq.iter().map(|&k| columns[k]).collect()), c * ratio.sqrt() * weight));
        }
        let scalar = ParticleSpec::new("phi", 1, Statistics::Boson, self.modes[0].mass)?;
        let sector = Sector::identical(lat, scalar, n, Symmetry::Symmetric)?;
        let momentum = MultiLayerState::from_terms(sector, terms)?;
        let u = dft_matrix(&lat);
        momentum.change_basis(&vec![u; n])
    }

    /// Every particle-number component of `state` assembled into a Fock state.
    pub fn to_fock_state(&self, state: &[Complex64], max_n: usize) -> Result<FockState> {
        let vacuum = *state.first().ok_or(Error::LengthMismatch { expected: self.dim(), got: 0 })?;
        let sectors = (1..=max_n).map(|n| self.to_multilayer(state, n)).collect::<Result<Vec<_>>>()?;
        FockState::assemble(sectors, vacuum)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Unitary with columns `e^{ik·x_s}/√S` over all Brillouin-zone modes.
pub fn dft_matrix(lattice: &Lattice3D) -> DMatrix<Complex64> {
    let s = lattice.site_count();
    let d = lattice.dims();
    let norm = (s as f64).sqrt();
    DMatrix::from_fn(s, s, |r, c| {
        let x = lattice.coords(SiteIndex(r)).expect("site in range");
        let k = lattice.coords(SiteIndex(c)).expect("site in range");
        let arg: f64 = (0..3).map(|a| (x[a] * k[a] % d[a]) as f64 / d[a] as f64).sum();
        Complex64::from_polar(1.0 / norm, 2.0 * PI * arg)
    })
}

/// Commutator deviations. `boundary_anomaly` is `max |[a_i, a_i†]|` on
/// states with `n_i = n_max`, which equals `n_max` under truncation.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CcrReport {
    pub modes: usize,
    pub cutoff: usize,
    pub max_aa: f64,
    pub max_adag_adag: f64,
    pub max_below_cutoff: f64,
    pub max_full_space: f64,
    pub boundary_anomaly: f64,
}

impl CcrReport {
    pub fn exact_below_cutoff(&self) -> bool {
        self.max_aa == 0.0 && self.max_adag_adag == 0.0 && self.max_below_cutoff == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn surd_arithmetic() {
        let r2 = Surd::sqrt_of(2);
        assert_eq!((&r2 * &r2).as_integer(), Some(2));
        assert_eq!(Surd::sqrt_of(12), &Surd::integer(2) * &Surd::sqrt_of(3));
        assert_eq!(&Surd::sqrt_of(6) * &Surd::sqrt_of(10), &Surd::integer(2) * &Surd::sqrt_of(15));
        assert!((&r2 - &Surd::sqrt_of(8)).to_f64() + 2f64.sqrt() < 1e-15);
        assert!(Surd::sqrt_of(0).is_zero());
        assert_eq!(split_square(72), (6, 2));
    }

    #[test]
    fn ladder_matrix_elements() {
        let f = TruncatedFock::ring(3, 3).unwrap();
        let a = f.ladder(0, Ladder::Annihilate).unwrap().to_sparse();
        let vac = f.basis_state(&[0, 0, 0]).unwrap();
        assert!(a.matvec(&vac).iter().all(|z| *z == c(0.0, 0.0)));
        let ad = f.ladder(0, Ladder::Create).unwrap();
        assert_eq!(ad.get(f.index_of(&[2, 0, 0]).unwrap(), f.index_of(&[1, 0, 0]).unwrap()), Surd::sqrt_of(2));
        let num = f.number(1).unwrap();
        for idx in 0..f.dim() {
            assert_eq!(num.get(idx, idx).as_integer(), Some(f.occupation(idx)[1] as i64));
        }
        assert_eq!(f.ladder(0, Ladder::Annihilate).unwrap().transpose(), ad);
        assert!(matches!(f.ladder(3, Ladder::Create), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn ccr_exact_below_cutoff() {
        let f = TruncatedFock::ring(3, 3).unwrap();
        let rep = f.ccr_check().unwrap();
        assert!(rep.exact_below_cutoff(), "{rep:?}");
        assert_eq!(rep.boundary_anomaly, 3.0);
        assert_eq!(rep.max_full_space, 4.0);
    }

    #[test]
    fn double_creation_on_vacuum() {
        let f = TruncatedFock::ring(2, 3).unwrap();
        let ad = f.ladder(1, Ladder::Create).unwrap();
        let twice = ad.matmul(&ad);
        let col = f.index_of(&[0, 0]).unwrap();
        assert_eq!(twice.get(f.index_of(&[0, 2]).unwrap(), col), Surd::sqrt_of(2));
        assert!(matches!(f.basis_state(&[0, 4]), Err(Error::OverCutoff { occupation: 4, cutoff: 3 })));
    }

    #[test]
    fn modes_and_zone() {
        let lat = Lattice3D::ring(4).unwrap();
        let zone = ModeSpec::brillouin_zone(&lat, 0.5).unwrap();
        let idx: Vec<i64> = zone.iter().map(|m| m.index[0]).collect();
        assert_eq!(idx, vec![0, 1, 2, -1]);
        assert!(zone.iter().all(|m| m.omega >= m.mass));
        assert!(matches!(ModeSpec::new(&lat, [0, 0, 0], 0.0), Err(Error::InvalidMode(_))));
        assert!(matches!(ModeSpec::new(&lat, [3, 0, 0], 1.0), Err(Error::InvalidMode(_))));
        let u = dft_matrix(&Lattice3D::new([3, 2, 1], 0.7).unwrap());
        let defect = (u.adjoint() * &u - DMatrix::identity(6, 6)).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        assert!(defect < 1e-14);
    }

    #[test]
    fn field_operator_properties() {
        let f = TruncatedFock::ring(3, 2).unwrap();
        let phi = f.field_operator_at(SiteIndex(1), 0.37).unwrap();
        assert_eq!(phi.hermiticity_defect(), 0.0);
        let vac = f.basis_state(&[0, 0, 0]).unwrap();
        let pv = phi.matvec(&vac);
        assert_eq!(pv[0], c(0.0, 0.0));

        let phi0 = f.field_operator_at(SiteIndex(2), 0.0).unwrap();
        let mode = &f.modes()[1];
        let one = f.index_of(&[0, 1, 0]).unwrap();
        let expected = mode.phase_at(f.lattice(), SiteIndex(2)).unwrap() / (2.0 * mode.omega * 3.0).sqrt();
        assert!((phi0.get(0, one) - expected).norm() < 1e-15);
    }

    #[test]
    fn free_energy_on_basis_states() {
        let f = TruncatedFock::ring(3, 3).unwrap();
        let h = f.free_hamiltonian().unwrap();
        for idx in 0..f.dim() {
            let occ = f.occupation(idx);
            let e = occ.iter().zip(f.modes()).fold(0.0, |acc, (&n, m)| acc + m.omega * n as f64);
            let v = h.matvec(&f.basis_state(&occ).unwrap());
            for (j, z) in v.iter().enumerate() {
                let want = if j == idx { c(e, 0.0) } else { c(0.0, 0.0) };
                assert_eq!(*z, want);
            }
        }
    }

    #[test]
    fn one_particle_is_a_plane_wave() {
        let lat = Lattice3D::new([3, 1, 1], 0.5).unwrap();
        let f = TruncatedFock::new(lat, ModeSpec::brillouin_zone(&lat, 1.0).unwrap(), 2).unwrap();
        let m = f.to_multilayer(&f.basis_state(&[0, 0, 1]).unwrap(), 1).unwrap();
        assert!((m.norm() - 1.0).abs() < 1e-14);
        let mode = &f.modes()[2];
        let w = lat.cell_volume().powf(-0.5) / 3f64.sqrt();
        for s in 0..3 {
            let got = m.coefficient(&MultiIndex(vec![s]));
            assert!((got - mode.phase_at(&lat, SiteIndex(s)).unwrap() * w).norm() < 1e-14);
        }
        let vac = f.to_multilayer(&f.basis_state(&[0, 0, 0]).unwrap(), 0).unwrap();
        assert_eq!(vac.coefficient(&MultiIndex(vec![])), c(1.0, 0.0));
    }

    #[test]
    fn two_particle_states_have_unit_norm() {
        let f = TruncatedFock::ring(3, 3).unwrap();
        for occ in [[1, 1, 0], [0, 2, 0], [1, 0, 1]] {
            let m = f.to_multilayer(&f.basis_state(&occ).unwrap(), 2).unwrap();
            assert!((m.norm() - 1.0).abs() < 1e-13, "{occ:?}");
            assert_eq!(m.sector().symmetry(), Symmetry::Symmetric);
            assert!(m.symmetry_defect(Symmetry::Symmetric) < 1e-15);
        }
        let a = f.to_multilayer(&f.basis_state(&[1, 1, 0]).unwrap(), 2).unwrap();
        let b = f.to_multilayer(&f.basis_state(&[0, 1, 1]).unwrap(), 2).unwrap();
        assert!(a.inner(&b).unwrap().norm() < 1e-14);
    }
}
