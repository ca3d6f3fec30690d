//! General many-particle states as sparse sums of basis layers.
//!
//! A basis layer is a product of site-delta fields, one per particle slot,
//! labelled by a [`MultiIndex`]. A [`MultiLayerState`] maps multi-indices to
//! complex coefficients; any layer expands into this form and the map to and
//! from the dense tensor-product representation is a coefficient-preserving
//! transcription.

use std::collections::BTreeMap;

use itertools::Itertools;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice3D, SiteIndex};
use crate::layers::Layer;
use crate::onebody::{OneBodyMatrix, OneParticleField, ParticleSpec, Statistics};
use crate::oracle::DenseTensorState;

/// Coefficients below this fraction of the largest one are dropped.
pub const PRUNE_REL: f64 = 1e-15;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    None,
    Symmetric,
    Antisymmetric,
}

impl Symmetry {
    fn sign(self) -> Option<f64> {
        match self {
            Symmetry::None => None,
            Symmetry::Symmetric => Some(1.0),
            Symmetry::Antisymmetric => Some(-1.0),
        }
    }
}

/// Sign of a permutation given as an image list.
pub(crate) fn permutation_sign(p: &[usize]) -> f64 {
    let inversions = (0..p.len()).flat_map(|i| (i + 1..p.len()).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Particle content of a sector: the lattice, one spec per slot and the
/// exchange symmetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    lattice: Lattice3D,
    specs: Vec<ParticleSpec>,
    symmetry: Symmetry,
}

impl Sector {
    pub fn new(lattice: Lattice3D, specs: Vec<ParticleSpec>, symmetry: Symmetry) -> Result<Self> {
        for s in &specs {
            s.validate()?;
        }
        if symmetry != Symmetry::None && specs.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::HeterogeneousSpecs);
        }
        Ok(Self { lattice, specs, symmetry })
    }

    pub fn distinguishable(lattice: Lattice3D, specs: Vec<ParticleSpec>) -> Result<Self> {
        Self::new(lattice, specs, Symmetry::None)
    }

    pub fn identical(lattice: Lattice3D, spec: ParticleSpec, n: usize, symmetry: Symmetry) -> Result<Self> {
        Self::new(lattice, vec![spec; n], symmetry)
    }

    /// Zero-particle sector.
    pub fn vacuum(lattice: Lattice3D) -> Self {
        Self { lattice, specs: Vec::new(), symmetry: Symmetry::None }
    }

    pub fn lattice(&self) -> &Lattice3D {
        &self.lattice
    }

    pub fn specs(&self) -> &[ParticleSpec] {
        &self.specs
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn with_symmetry(&self, symmetry: Symmetry) -> Result<Self> {
        Self::new(self.lattice, self.specs.clone(), symmetry)
    }

    pub fn n_particles(&self) -> usize {
        self.specs.len()
    }

    pub fn slot_dim(&self, j: usize) -> usize {
        self.specs[j].dim_on(&self.lattice)
    }

    pub fn slot_dims(&self) -> Vec<usize> {
        (0..self.n_particles()).map(|j| self.slot_dim(j)).collect()
    }

    /// Dimension of the full product space, `None` on overflow.
    pub fn total_dim(&self) -> Option<usize> {
        self.slot_dims().into_iter().try_fold(1usize, |acc, d| acc.checked_mul(d))
    }

    /// Weight `(h³)^N` of one basis layer in the scalar product.
    pub fn basis_weight(&self) -> f64 {
        self.lattice.cell_volume().powi(self.n_particles() as i32)
    }

    /// Same lattice and particle specs, symmetry tags aside.
    pub fn same_space(&self, other: &Self) -> bool {
        self.lattice == other.lattice && self.specs == other.specs
    }

    pub(crate) fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.same_space(other) {
            Ok(())
        } else {
            Err(Error::SectorMismatch("states live in different sectors".into()))
        }
    }

    pub fn check_index(&self, idx: &MultiIndex) -> Result<()> {
        if idx.0.len() != self.n_particles() {
            return Err(Error::LengthMismatch { expected: self.n_particles(), got: idx.0.len() });
        }
        for (j, &i) in idx.0.iter().enumerate() {
            let d = self.slot_dim(j);
            if i >= d {
                return Err(Error::IndexOutOfRange { index: i, len: d });
            }
        }
        Ok(())
    }

    /// Dense product-basis position, slot 0 most significant.
    pub fn flat_index(&self, idx: &MultiIndex) -> usize {
        idx.0.iter().enumerate().fold(0, |acc, (j, &i)| acc * self.slot_dim(j) + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> MultiIndex {
        let dims = self.slot_dims();
        let mut out = vec![0; dims.len()];
        for j in (0..dims.len()).rev() {
            out[j] = flat % dims[j];
            flat /= dims[j];
        }
        MultiIndex(out)
    }

    pub fn index_from_pairs(&self, pairs: &[(SiteIndex, usize)]) -> Result<MultiIndex> {
        if pairs.len() != self.n_particles() {
            return Err(Error::LengthMismatch { expected: self.n_particles(), got: pairs.len() });
        }
        let mut out = Vec::with_capacity(pairs.len());
        for (j, &(s, k)) in pairs.iter().enumerate() {
            self.lattice.check_site(s)?;
            let d = self.specs[j].internal_dim;
            if k >= d {
                return Err(Error::IndexOutOfRange { index: k, len: d });
            }
            out.push(s.0 * d + k);
        }
        Ok(MultiIndex(out))
    }

    /// `(site, internal)` pair for slot `j` of `idx`.
    pub fn pair(&self, idx: &MultiIndex, j: usize) -> (SiteIndex, usize) {
        let d = self.specs[j].internal_dim;
        (SiteIndex(idx.0[j] / d), idx.0[j] % d)
    }
}

/// One slot-local index `site * internal_dim + k` per particle slot.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn slots(&self) -> &[usize] {
        &self.0
    }

    fn permuted(&self, p: &[usize]) -> Self {
        MultiIndex(p.iter().map(|&j| self.0[j]).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiLayerState {
    sector: Sector,
    terms: BTreeMap<MultiIndex, Complex64>,
}

impl MultiLayerState {
    pub fn zero(sector: Sector) -> Self {
        Self { sector, terms: BTreeMap::new() }
    }

    /// Collects `(index, coefficient)` pairs, summing duplicates and dropping exact zeros.
    pub fn from_terms<I>(sector: Sector, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, Complex64)>,
    {
        let mut map = BTreeMap::new();
        for (idx, c) in terms {
            sector.check_index(&idx)?;
            *map.entry(idx).or_insert(ZERO) += c;
        }
        map.retain(|_, c| *c != ZERO);
        Ok(Self { sector, terms: map })
    }

    /// Vacuum-sector state with the given amplitude.
    pub fn vacuum(lattice: Lattice3D, amplitude: Complex64) -> Self {
        let sector = Sector::vacuum(lattice);
        let mut terms = BTreeMap::new();
        if amplitude != ZERO {
            terms.insert(MultiIndex(Vec::new()), amplitude);
        }
        Self { sector, terms }
    }

    pub(crate) fn from_map_pruned(sector: Sector, mut terms: BTreeMap<MultiIndex, Complex64>) -> Self {
        prune(&mut terms);
        Self { sector, terms }
    }

    pub fn sector(&self) -> &Sector {
        &self.sector
    }

    pub fn terms(&self) -> &BTreeMap<MultiIndex, Complex64> {
        &self.terms
    }

    pub fn coefficient(&self, idx: &MultiIndex) -> Complex64 {
        self.terms.get(idx).copied().unwrap_or(ZERO)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Expands a layer over the site-delta basis: `c_idx = s · ∏_j ψ_j[idx_j]`.
    /// The factor values are multiplied in a value-sorted order, so layers
    /// with repeated factors give bitwise identical coefficients on permuted
    /// indices.
    pub fn from_layer(layer: &Layer) -> Result<Self> {
        let lat = *layer.lattice().ok_or(Error::EmptyFactors)?;
        let specs = layer.factors().iter().map(|f| f.spec().clone()).collect();
        let sector = Sector::distinguishable(lat, specs)?;
        if layer.is_zero() {
            return Ok(Self::zero(sector));
        }
        let supports: Vec<Vec<(usize, Complex64)>> = layer
            .factors()
            .iter()
            .map(|f| f.amplitudes().iter().copied().enumerate().filter(|(_, z)| *z != ZERO).collect())
            .collect();
        let mut terms = BTreeMap::new();
        let key = |z: &Complex64| (z.re.to_bits(), z.im.to_bits());
        for combo in supports.iter().map(|s| s.iter()).multi_cartesian_product() {
            let c = layer.amplitude() * combo.iter().map(|(_, z)| *z).sorted_by_key(key).fold(ONE, |acc, z| acc * z);
            terms.insert(MultiIndex(combo.iter().map(|(i, _)| *i).collect()), c);
        }
        Ok(Self::from_map_pruned(sector, terms))
    }

    /// `a·m1 + b·m2`. The result keeps the symmetry tag only if both inputs share it.
    pub fn add(a: Complex64, m1: &Self, b: Complex64, m2: &Self) -> Result<Self> {
        m1.sector.check_same_space(&m2.sector)?;
        let mut terms: BTreeMap<MultiIndex, Complex64> = m1.terms.iter().map(|(k, &c)| (k.clone(), a * c)).collect();
        for (k, &c) in &m2.terms {
            *terms.entry(k.clone()).or_insert(ZERO) += b * c;
        }
        terms.retain(|_, c| *c != ZERO);
        let sector = if m1.sector.symmetry == m2.sector.symmetry {
            m1.sector.clone()
        } else {
            m1.sector.with_symmetry(Symmetry::None)?
        };
        Ok(Self::from_map_pruned(sector, terms))
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        if c == ZERO {
            return Self::zero(self.sector.clone());
        }
        Self { sector: self.sector.clone(), terms: self.terms.iter().map(|(k, &z)| (k.clone(), c * z)).collect() }
    }

    /// Hermitian product `Σ conj(c1)·c2·(h³)^N`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.sector.check_same_space(&other.sector)?;
        let (small, large, flip) =
            if self.terms.len() <= other.terms.len() { (self, other, false) } else { (other, self, true) };
        let mut acc = ZERO;
        for (k, &c) in &small.terms {
            if let Some(&d) = large.terms.get(k) {
                acc += if flip { d.conj() * c } else { c.conj() * d };
            }
        }
        Ok(acc * self.sector.basis_weight())
    }

    pub fn norm(&self) -> f64 {
        let raw: f64 = self.terms.values().map(|c| c.norm_sqr()).sum();
        (raw * self.sector.basis_weight()).sqrt()
    }

    /// Projector onto the (anti)symmetric subspace: averages signed
    /// coefficients over all slot permutations and tags the result.
    pub fn symmetrize(&self, symmetry: Symmetry) -> Result<Self> {
        let sign = match symmetry.sign() {
            Some(s) => s,
            None => return Ok(Self { sector: self.sector.with_symmetry(Symmetry::None)?, terms: self.terms.clone() }),
        };
        let sector = self.sector.with_symmetry(symmetry)?;
        let n = sector.n_particles();
        let perms: Vec<(Vec<usize>, f64)> = (0..n)
            .permutations(n)
            .map(|p| {
                let s = if sign < 0.0 { permutation_sign(&p) } else { 1.0 };
                (p, s)
            })
            .collect();
        let norm = 1.0 / perms.len() as f64;
        let mut parts: BTreeMap<MultiIndex, Vec<Complex64>> = BTreeMap::new();
        for (idx, &c) in &self.terms {
            for (p, s) in &perms {
                parts.entry(idx.permuted(p)).or_default().push(c * (s * norm));
            }
        }
        // Correctly rounded sums, so contributions that cancel exactly give exact zeros.
        let mut terms: BTreeMap<MultiIndex, Complex64> = parts
            .into_iter()
            .map(|(idx, v)| (idx, Complex64::new(exact_sum(v.iter().map(|z| z.re)), exact_sum(v.iter().map(|z| z.im)))))
            .collect();
        terms.retain(|_, c| *c != ZERO);
        Ok(Self::from_map_pruned(sector, terms))
    }

    /// Largest violation of `c_{π(idx)} = (±1)^π c_idx` over all terms and
    /// permutations, for the sign implied by `symmetry`.
    pub fn symmetry_defect(&self, symmetry: Symmetry) -> f64 {
        let Some(sign) = symmetry.sign() else { return 0.0 };
        let n = self.sector.n_particles();
        let mut worst = 0.0f64;
        for p in (0..n).permutations(n) {
            let s = if sign < 0.0 { permutation_sign(&p) } else { 1.0 };
            for (idx, &c) in &self.terms {
                let d = (self.coefficient(&idx.permuted(&p)) - c * s).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Applies a one-particle operator to slot `j`, identity elsewhere.
    pub fn apply_slot(&self, j: usize, op: &OneBodyMatrix) -> Result<Self> {
        if j >= self.sector.n_particles() {
            return Err(Error::InvalidSlots(format!("slot {j} out of range")));
        }
        if op.dim() != self.sector.slot_dim(j) {
            return Err(Error::LengthMismatch { expected: self.sector.slot_dim(j), got: op.dim() });
        }
        let mut terms = BTreeMap::new();
        for (idx, &c) in &self.terms {
            for &(r, w) in op.column(idx.0[j]) {
                let mut out = idx.clone();
                out.0[j] = r;
                *terms.entry(out).or_insert(ZERO) += w * c;
            }
        }
        terms.retain(|_, c| *c != ZERO);
        Ok(Self::from_map_pruned(self.sector.with_symmetry(Symmetry::None)?, terms))
    }

    /// Transforms coefficients by `U_1 ⊗ … ⊗ U_N`. The symmetry tag survives
    /// when every slot uses the same matrix.
    pub fn change_basis(&self, unitaries: &[DMatrix<Complex64>]) -> Result<Self> {
        let n = self.sector.n_particles();
        if unitaries.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: unitaries.len() });
        }
        for (j, u) in unitaries.iter().enumerate() {
            if u.nrows() != u.ncols() || u.nrows() != self.sector.slot_dim(j) {
                return Err(Error::ShapeMismatch(format!(
                    "slot {j}: expected {0}x{0} matrix, got {1}x{2}",
                    self.sector.slot_dim(j),
                    u.nrows(),
                    u.ncols()
                )));
            }
            let defect = (u.adjoint() * u - DMatrix::identity(u.nrows(), u.nrows())).iter().fold(0.0f64, |m, z| m.max(z.norm()));
            if defect > 1e-10 {
                return Err(Error::NotUnitary(defect));
            }
        }
        let mut out = self.clone();
        for (j, u) in unitaries.iter().enumerate() {
            out = out.apply_slot(j, &OneBodyMatrix::from_dense(u)?)?;
        }
        let keep = unitaries.windows(2).all(|w| w[0] == w[1]);
        out.sector = self.sector.with_symmetry(if keep { self.sector.symmetry } else { Symmetry::None })?;
        Ok(out)
    }

    /// Each term as its own basis layer, built from unit site deltas.
    pub fn basis_layers(&self) -> Result<Vec<Layer>> {
        let lat = self.sector.lattice;
        let mut out = Vec::with_capacity(self.terms.len());
        for (idx, &c) in &self.terms {
            let fields = self
                .sector
                .specs
                .iter()
                .enumerate()
                .map(|(j, spec)| {
                    let (s, k) = self.sector.pair(idx, j);
                    OneParticleField::basis(lat, spec.clone(), s, k)
                })
                .collect::<Result<Vec<_>>>()?;
            if fields.is_empty() {
                out.push(Layer::vacuum(c));
            } else {
                out.push(Layer::from_fields(fields)?.scale(c));
            }
        }
        Ok(out)
    }

    /// Minimal decomposition of a two-particle state into layers, via the
    /// singular value decomposition of its coefficient matrix. Singular values
    /// below `rel_tol` times the largest are discarded.
    pub fn schmidt_layers(&self, rel_tol: f64) -> Result<Vec<Layer>> {
        if self.sector.n_particles() != 2 {
            return Err(Error::SectorMismatch("Schmidt decomposition needs exactly two slots".into()));
        }
        let (d1, d2) = (self.sector.slot_dim(0), self.sector.slot_dim(1));
        let mut c = DMatrix::<Complex64>::zeros(d1, d2);
        for (idx, &z) in &self.terms {
            c[(idx.0[0], idx.0[1])] = z;
        }
        let svd = c.svd(true, true);
        let u = svd.u.expect("requested");
        let vt = svd.v_t.expect("requested");
        let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
        let lat = self.sector.lattice;
        let mut out = Vec::new();
        for (r, &s) in svd.singular_values.iter().enumerate() {
            if smax == 0.0 || s <= rel_tol * smax {
                continue;
            }
            let f1 = OneParticleField::from_amplitudes(
                lat,
                self.sector.specs[0].clone(),
                u.column(r).iter().map(|z| z * s).collect(),
            )?;
            let f2 = OneParticleField::from_amplitudes(lat, self.sector.specs[1].clone(), vt.row(r).iter().copied().collect())?;
            out.push(Layer::from_fields(vec![f1, f2])?);
        }
        Ok(out)
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Coefficients over the full product basis.
    pub fn to_dense_vec(&self) -> Result<Vec<Complex64>> {
        let dim = self.sector.total_dim().ok_or(Error::CapExceeded { dim: usize::MAX, cap: usize::MAX })?;
        let mut v = vec![ZERO; dim];
        for (idx, &c) in &self.terms {
            v[self.sector.flat_index(idx)] = c;
        }
        Ok(v)
    }

    pub fn from_dense_vec(sector: Sector, v: &[Complex64]) -> Result<Self> {
        let dim = sector.total_dim().ok_or(Error::CapExceeded { dim: usize::MAX, cap: usize::MAX })?;
        if v.len() != dim {
            return Err(Error::LengthMismatch { expected: dim, got: v.len() });
        }
        let terms = v.iter().enumerate().filter(|(_, z)| **z != ZERO).map(|(i, &z)| (sector.multi_index(i), z)).collect();
        Ok(Self { sector, terms })
    }

    /// Per-site probability density of slot `j`, summed over internal components and
    /// all other slots (with the cell weight applied).
    pub fn slot_density(&self, j: usize) -> Result<Vec<f64>> {
        if j >= self.sector.n_particles() {
            return Err(Error::InvalidSlots(format!("slot {j} out of range")));
        }
        let mut dens = vec![0.0; self.sector.lattice.site_count()];
        let w = self.sector.basis_weight();
        for (idx, c) in &self.terms {
            let (s, _) = self.sector.pair(idx, j);
            dens[s.0] += c.norm_sqr() * w;
        }
        Ok(dens)
    }
}

/// Correctly rounded floating-point sum (Shewchuk's partials algorithm).
fn exact_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut kept = 0;
        for i in 0..partials.len() {
            let mut y = partials[i];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    let Some(mut hi) = partials.pop() else { return 0.0 };
    while let Some(y) = partials.pop() {
        let x = hi;
        hi = x + y;
        let lo = y - (hi - x);
        if lo != 0.0 {
            // Round-half-even correction across the remaining partials.
            if partials.last().is_some_and(|&p| (lo < 0.0) == (p < 0.0)) {
                let y = lo * 2.0;
                let x = hi + y;
                if y == x - hi {
                    hi = x;
                }
            }
            break;
        }
    }
    hi
}

fn prune(terms: &mut BTreeMap<MultiIndex, Complex64>) {
    let max = terms.values().fold(0.0f64, |m, z| m.max(z.norm()));
    let floor = PRUNE_REL * max;
    terms.retain(|_, c| c.norm() > floor);
}

/// Transcribes a dense tensor-product state into the sparse layer form.
pub fn rho(t: &DenseTensorState) -> MultiLayerState {
    let sector = t.sector().clone();
    let terms =
        t.coefficients().iter().enumerate().filter(|(_, z)| **z != ZERO).map(|(i, &z)| (sector.multi_index(i), z)).collect();
    MultiLayerState { sector, terms }
}

/// Inverse of [`rho`].
pub fn rho_inv(m: &MultiLayerState) -> Result<DenseTensorState> {
    let mut t = DenseTensorState::zeros(m.sector.clone())?;
    for (idx, &c) in &m.terms {
        let i = m.sector.flat_index(idx);
        t.coefficients_mut()[i] = c;
    }
    Ok(t)
}

/// Direct sum of fixed-particle-number sectors for one particle type,
/// with the vacuum kept as a bare amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    vacuum: Complex64,
    sectors: BTreeMap<usize, MultiLayerState>,
}

impl FockState {
    /// Assembles a Fock state. Sectors with two or more particles must carry
    /// the exchange symmetry matching the particles' statistics.
    pub fn assemble(components: Vec<MultiLayerState>, vacuum: Complex64) -> Result<Self> {
        let mut sectors = BTreeMap::new();
        let mut kind: Option<(&ParticleSpec, Lattice3D)> = None;
        for m in &components {
            let n = m.sector.n_particles();
            if n == 0 {
                return Err(Error::SectorMismatch("the vacuum is passed as a bare amplitude".into()));
            }
            let spec = &m.sector.specs[0];
            if m.sector.specs.iter().any(|s| s != spec) {
                return Err(Error::HeterogeneousSpecs);
            }
            match kind {
                None => kind = Some((spec, m.sector.lattice)),
                Some((s, lat)) if s != spec || lat != m.sector.lattice => {
                    return Err(Error::SectorMismatch("Fock components must share one particle type".into()))
                }
                _ => {}
            }
            let expected = match spec.statistics {
                Statistics::Boson => Symmetry::Symmetric,
                Statistics::Fermion => Symmetry::Antisymmetric,
                Statistics::Distinguishable => {
                    return Err(Error::WrongSymmetry("Fock space needs bosons or fermions".into()))
                }
            };
            if n >= 2 && m.sector.symmetry != expected {
                return Err(Error::WrongSymmetry(format!(
                    "{n}-particle {:?} sector tagged {:?}",
                    spec.statistics, m.sector.symmetry
                )));
            }
            if sectors.insert(n, m.clone()).is_some() {
                return Err(Error::SectorMismatch(format!("duplicate {n}-particle component")));
            }
        }
        Ok(Self { vacuum, sectors })
    }

    pub fn vacuum_amplitude(&self) -> Complex64 {
        self.vacuum
    }

    pub fn sector(&self, n: usize) -> Option<&MultiLayerState> {
        self.sectors.get(&n)
    }

    pub fn particle_numbers(&self) -> impl Iterator<Item = usize> + '_ {
        self.sectors.keys().copied()
    }

    /// `conj(vac1)·vac2 + Σ_N ⟨m1_N, m2_N⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        let mut acc = self.vacuum.conj() * other.vacuum;
        for (n, m) in &self.sectors {
            if let Some(o) = other.sectors.get(n) {
                acc += m.inner(o)?;
            }
        }
        Ok(acc)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).map(|z| z.re.max(0.0).sqrt()).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Tolerance;
    use crate::onebody::Statistics;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar() -> ParticleSpec {
        ParticleSpec::new("p", 1, Statistics::Distinguishable, 1.0).unwrap()
    }

    fn ring(n: usize) -> Lattice3D {
        Lattice3D::ring(n).unwrap()
    }

    fn delta(lat: Lattice3D, s: usize) -> OneParticleField {
        OneParticleField::basis(lat, scalar(), SiteIndex(s), 0).unwrap()
    }

    #[test]
    fn delta_layer_expands_to_one_term() {
        let lat = ring(3);
        let l = Layer::from_fields(vec![delta(lat, 2), delta(lat, 0)]).unwrap().scale(c(0.5, -1.0));
        let m = MultiLayerState::from_layer(&l).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.coefficient(&MultiIndex(vec![2, 0])), c(0.5, -1.0));
    }

    #[test]
    fn uniform_pair_expands_to_four_equal_terms() {
        let lat = ring(2);
        let v = std::f64::consts::FRAC_1_SQRT_2;
        let f = OneParticleField::from_amplitudes(lat, scalar(), vec![c(v, 0.0), c(v, 0.0)]).unwrap();
        let m = MultiLayerState::from_layer(&Layer::from_fields(vec![f.clone(), f]).unwrap()).unwrap();
        assert_eq!(m.len(), 4);
        for z in m.terms().values() {
            assert!((z - 0.5).norm() < 1e-15);
        }
        assert!((m.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_layer_expands_to_nothing() {
        let lat = ring(2);
        let l = Layer::from_fields(vec![delta(lat, 0), delta(lat, 1)]).unwrap().scale(c(0.0, 0.0));
        assert!(MultiLayerState::from_layer(&l).unwrap().is_empty());
    }

    #[test]
    fn addition_laws() {
        let lat = ring(3);
        let sec = Sector::distinguishable(lat, vec![scalar(), scalar()]).unwrap();
        let m1 = MultiLayerState::from_terms(
            sec.clone(),
            vec![(MultiIndex(vec![0, 1]), c(1.0, 2.0)), (MultiIndex(vec![2, 2]), c(-0.5, 0.0))],
        )
        .unwrap();
        let m2 = MultiLayerState::from_terms(sec, vec![(MultiIndex(vec![0, 1]), c(0.0, 1.0))]).unwrap();
        let one = c(1.0, 0.0);
        assert!(MultiLayerState::add(one, &m1, c(-1.0, 0.0), &m1).unwrap().is_empty());
        assert_eq!(MultiLayerState::add(one, &m1, one, &m2).unwrap(), MultiLayerState::add(one, &m2, one, &m1).unwrap());
        let other = MultiLayerState::zero(Sector::distinguishable(lat, vec![scalar()]).unwrap());
        assert!(matches!(MultiLayerState::add(one, &m1, one, &other), Err(Error::SectorMismatch(_))));
    }

    #[test]
    fn singlet_norm_is_two() {
        let lat = ring(4);
        let spin = ParticleSpec::new("e", 2, Statistics::Distinguishable, 1.0).unwrap();
        let pa = [c(0.6, 0.0), c(0.8, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let pb = [c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.8), c(0.6, 0.0)];
        let up = [c(1.0, 0.0), c(0.0, 0.0)];
        let dn = [c(0.0, 0.0), c(1.0, 0.0)];
        let f = |p: &[Complex64], s: &[Complex64]| OneParticleField::product(lat, spin.clone(), p, s).unwrap();
        let l1 = Layer::from_fields(vec![f(&pa, &up), f(&pb, &dn)]).unwrap();
        let l2 = Layer::from_fields(vec![f(&pa, &dn), f(&pb, &up)]).unwrap();
        let m = MultiLayerState::add(
            c(1.0, 0.0),
            &MultiLayerState::from_layer(&l1).unwrap(),
            c(-1.0, 0.0),
            &MultiLayerState::from_layer(&l2).unwrap(),
        )
        .unwrap();
        assert!((m.inner(&m).unwrap() - 2.0).norm() < 1e-14);
        assert_eq!(m.schmidt_layers(1e-10).unwrap().len(), 2);
    }

    #[test]
    fn unit_basis_term_has_unit_norm() {
        let sec = Sector::distinguishable(ring(2), vec![scalar()]).unwrap();
        let m = MultiLayerState::from_terms(sec, vec![(MultiIndex(vec![1]), c(1.0, 0.0))]).unwrap();
        assert_eq!(m.inner(&m).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn symmetrization_examples() {
        let lat = ring(3);
        let psi = OneParticleField::from_amplitudes(lat, scalar(), vec![c(1.0, 0.5), c(0.0, -2.0), c(0.3, 0.0)]).unwrap();
        let pp = MultiLayerState::from_layer(&Layer::from_fields(vec![psi.clone(), psi]).unwrap()).unwrap();
        assert!(pp.symmetrize(Symmetry::Antisymmetric).unwrap().is_empty());

        let d = MultiLayerState::from_layer(&Layer::from_fields(vec![delta(lat, 0), delta(lat, 1)]).unwrap()).unwrap();
        let s = d.symmetrize(Symmetry::Symmetric).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.coefficient(&MultiIndex(vec![0, 1])), c(0.5, 0.0));
        assert_eq!(s.coefficient(&MultiIndex(vec![1, 0])), c(0.5, 0.0));
        assert_eq!(s.sector().symmetry(), Symmetry::Symmetric);
        assert_eq!(s.symmetrize(Symmetry::Symmetric).unwrap(), s);
        assert_eq!(s.symmetry_defect(Symmetry::Symmetric), 0.0);

        let mixed = Sector::distinguishable(lat, vec![scalar(), ParticleSpec::scalar("q")]).unwrap();
        assert!(matches!(MultiLayerState::zero(mixed).symmetrize(Symmetry::Symmetric), Err(Error::HeterogeneousSpecs)));
    }

    #[test]
    fn fock_assembly() {
        let lat = ring(2);
        let boson = ParticleSpec::new("b", 1, Statistics::Boson, 1.0).unwrap();
        let one = MultiLayerState::from_terms(
            Sector::identical(lat, boson.clone(), 1, Symmetry::Symmetric).unwrap(),
            vec![(MultiIndex(vec![0]), c(0.6, 0.0))],
        )
        .unwrap();
        let two = MultiLayerState::from_terms(
            Sector::identical(lat, boson.clone(), 2, Symmetry::Symmetric).unwrap(),
            vec![(MultiIndex(vec![1, 1]), c(0.8, 0.0))],
        )
        .unwrap();
        let vac = FockState::assemble(vec![], c(1.0, 0.0)).unwrap();
        assert_eq!(vac.norm(), 1.0);
        let f1 = FockState::assemble(vec![one.clone()], c(0.0, 0.0)).unwrap();
        let f2 = FockState::assemble(vec![two.clone()], c(0.0, 0.0)).unwrap();
        assert_eq!(f1.inner(&f2).unwrap(), c(0.0, 0.0));
        let both = FockState::assemble(vec![one, two], c(0.0, 0.0)).unwrap();
        assert!((both.norm() - 1.0).abs() < 1e-15);

        let untagged = MultiLayerState::zero(Sector::identical(lat, boson, 2, Symmetry::None).unwrap());
        assert!(matches!(FockState::assemble(vec![untagged], c(1.0, 0.0)), Err(Error::WrongSymmetry(_))));
    }

    #[test]
    fn change_basis_identity_and_errors() {
        let lat = ring(2);
        let sec = Sector::distinguishable(lat, vec![scalar(), scalar()]).unwrap();
        let m = MultiLayerState::from_terms(sec, vec![(MultiIndex(vec![0, 1]), c(1.0, 1.0))]).unwrap();
        let id = DMatrix::<Complex64>::identity(2, 2);
        assert_eq!(m.change_basis(&[id.clone(), id.clone()]).unwrap(), m);
        assert!(matches!(m.change_basis(&[id.clone(), DMatrix::zeros(2, 3)]), Err(Error::ShapeMismatch(_))));
        assert!(matches!(m.change_basis(&[id.clone(), id * c(2.0, 0.0)]), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn schmidt_of_product_is_one_layer() {
        let lat = ring(3);
        let a = OneParticleField::from_amplitudes(lat, scalar(), vec![c(1.0, 0.5), c(0.0, -2.0), c(0.3, 0.0)]).unwrap();
        let b = OneParticleField::from_amplitudes(lat, scalar(), vec![c(0.2, 0.0), c(1.0, 1.0), c(0.0, 0.0)]).unwrap();
        let l = Layer::from_fields(vec![a, b]).unwrap();
        let m = MultiLayerState::from_layer(&l).unwrap();
        let layers = m.schmidt_layers(1e-10).unwrap();
        assert_eq!(layers.len(), 1);
        assert!(layers[0].equals(&l, Tolerance::uniform(1e-12)).unwrap());
    }

    #[test]
    fn basis_layers_reassemble() {
        let lat = Lattice3D::new([3, 1, 1], 0.5).unwrap();
        let sec = Sector::distinguishable(lat, vec![scalar(), scalar()]).unwrap();
        let m = MultiLayerState::from_terms(
            sec,
            vec![(MultiIndex(vec![0, 1]), c(1.0, 1.0)), (MultiIndex(vec![2, 0]), c(-0.5, 0.0))],
        )
        .unwrap();
        let mut acc = MultiLayerState::zero(m.sector().clone());
        for l in m.basis_layers().unwrap() {
            acc = MultiLayerState::add(c(1.0, 0.0), &acc, c(1.0, 0.0), &MultiLayerState::from_layer(&l).unwrap()).unwrap();
        }
        for (k, v) in m.terms() {
            assert!((acc.coefficient(k) - v).norm() < 1e-14);
        }
    }

    #[test]
    fn exact_sum_cancels() {
        assert_eq!(exact_sum([1e16, 1.0, -1e16].into_iter()), 1.0);
        assert_eq!(exact_sum([0.1, 0.7, -0.1, 0.3, -0.7, -0.3].into_iter()), 0.0);
        assert_eq!(exact_sum(std::iter::empty()), 0.0);
    }

    #[test]
    fn repeated_fermion_factor_vanishes_for_three_slots() {
        let lat = ring(3);
        let psi = OneParticleField::from_amplitudes(lat, scalar(), vec![c(1.0, 0.5), c(0.0, -2.0), c(0.3, 0.1)]).unwrap();
        let phi = OneParticleField::from_amplitudes(lat, scalar(), vec![c(0.7, 0.0), c(0.2, -0.9), c(1.3, 0.4)]).unwrap();
        for fields in [vec![psi.clone(), phi.clone(), psi.clone()], vec![phi, psi.clone(), psi]] {
            let m = MultiLayerState::from_layer(&Layer::from_fields(fields).unwrap()).unwrap();
            assert!(m.symmetrize(Symmetry::Antisymmetric).unwrap().is_empty());
        }
    }

    #[test]
    fn permutation_signs() {
        assert_eq!(permutation_sign(&[0, 1, 2]), 1.0);
        assert_eq!(permutation_sign(&[1, 0, 2]), -1.0);
        assert_eq!(permutation_sign(&[1, 2, 0]), 1.0);
        assert_eq!(permutation_sign(&[2, 1, 0]), -1.0);
    }
}
