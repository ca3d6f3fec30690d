//! Operators on multi-layered fields: lifted one-body terms, pairwise
//! distance potentials, general sparse matrices, Hamiltonian assembly,
//! unitary evolution and projective measurement.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::SiteIndex;
use crate::multilayer::{MultiIndex, MultiLayerState, Sector, Symmetry};
use crate::onebody::OneBodyMatrix;
use crate::oracle;
use crate::sparse::{self, SparseMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest sector dimension that may be densified for diagonalization.
pub const DENSE_OPERATOR_CAP: usize = 4096;

/// Pair potential `V(r)` as a function of the minimal-image distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", content = "params", rename_all = "snake_case")]
pub enum PairPotential {
    Zero,
    Constant { value: f64 },
    /// `strength · r²`
    Harmonic { strength: f64 },
    /// `charge / (r + ε)`; `ε` defaults to half the lattice spacing.
    SoftenedCoulomb {
        charge: f64,
        #[serde(default)]
        softening: Option<f64>,
    },
    /// Piecewise-linear interpolation through `[r, V]` points, clamped at the ends.
    Table { points: Vec<[f64; 2]> },
}

impl PairPotential {
    pub fn eval(&self, r: f64, spacing: f64) -> Result<f64> {
        let v = match self {
            PairPotential::Zero => 0.0,
            PairPotential::Constant { value } => *value,
            PairPotential::Harmonic { strength } => strength * r * r,
            PairPotential::SoftenedCoulomb { charge, softening } => {
                let eps = softening.unwrap_or(0.5 * spacing);
                charge / (r + eps)
            }
            PairPotential::Table { points } => {
                let mut pts = points.clone();
                pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
                match pts.iter().position(|p| p[0] >= r) {
                    None => pts.last().ok_or_else(|| Error::Config("empty potential table".into()))?[1],
                    Some(0) => pts[0][1],
                    Some(i) => {
                        let [r0, v0] = pts[i - 1];
                        let [r1, v1] = pts[i];
                        if r1 == r0 {
                            v1
                        } else {
                            v0 + (v1 - v0) * (r - r0) / (r1 - r0)
                        }
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Config(format!("potential is not finite at r = {r}")))
        }
    }
}

/// Whether the pair sum runs over unordered pairs `j < k` or ordered pairs `j ≠ k`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairCount {
    Ordered,
    #[default]
    Unordered,
}

/// External one-body potential for a single slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalPotential {
    pub slot: usize,
    pub values: Vec<f64>,
}

fn default_hbar() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub potential: PairPotential,
    #[serde(default)]
    pub pair_count: PairCount,
    #[serde(default)]
    pub external: Vec<ExternalPotential>,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    /// Whether the lattice kinetic term is included.
    #[serde(default = "default_kinetic")]
    pub kinetic: bool,
}

fn default_kinetic() -> bool {
    true
}

impl HamiltonianSpec {
    pub fn free() -> Self {
        Self::with_potential(PairPotential::Zero)
    }

    pub fn with_potential(potential: PairPotential) -> Self {
        Self { potential, pair_count: PairCount::Unordered, external: Vec::new(), hbar: 1.0, kinetic: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Term {
    /// `coeff · ⊗_j A_j` over distinct slots, identity elsewhere.
    Local { factors: Vec<(usize, OneBodyMatrix)>, coeff: Complex64 },
    /// Diagonal multiplication by `table[site_j * n_sites + site_k]`.
    Pair { slots: (usize, usize), table: Vec<f64> },
    /// Arbitrary matrix stored by columns.
    General { columns: HashMap<MultiIndex, Vec<(MultiIndex, Complex64)>> },
}

/// Operator on one sector, kept as a sum of structured terms.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorRep {
    sector: Sector,
    terms: Vec<Term>,
}

impl OperatorRep {
    pub fn zero(sector: Sector) -> Self {
        Self { sector, terms: Vec::new() }
    }

    pub fn identity(sector: Sector) -> Self {
        Self { sector, terms: vec![Term::Local { factors: Vec::new(), coeff: ONE }] }
    }

    pub fn sector(&self) -> &Sector {
        &self.sector
    }

    /// `1 ⊗ … ⊗ op ⊗ … ⊗ 1` with `op` acting on `slot`.
    pub fn lift_onebody(op: &OneBodyMatrix, slot: usize, sector: &Sector) -> Result<Self> {
        Self::local_product(vec![(slot, op.clone())], sector)
    }

    /// Tensor product of one-body operators on distinct slots.
    pub fn local_product(factors: Vec<(usize, OneBodyMatrix)>, sector: &Sector) -> Result<Self> {
        let mut seen = vec![false; sector.n_particles()];
        for (slot, op) in &factors {
            if *slot >= sector.n_particles() {
                return Err(Error::InvalidSlots(format!("slot {slot} out of range")));
            }
            if std::mem::replace(&mut seen[*slot], true) {
                return Err(Error::InvalidSlots(format!("slot {slot} repeated")));
            }
            if op.dim() != sector.slot_dim(*slot) {
                return Err(Error::LengthMismatch { expected: sector.slot_dim(*slot), got: op.dim() });
            }
        }
        Ok(Self { sector: sector.clone(), terms: vec![Term::Local { factors, coeff: ONE }] })
    }

    /// Diagonal operator `V(|x_j − x_k|)` between two distinct slots.
    pub fn pairwise_potential(potential: &PairPotential, slots: (usize, usize), sector: &Sector) -> Result<Self> {
        Self::pair_with_weight(potential, slots, sector, 1.0)
    }

    fn pair_with_weight(potential: &PairPotential, (j, k): (usize, usize), sector: &Sector, weight: f64) -> Result<Self> {
        let n = sector.n_particles();
        if j == k {
            return Err(Error::InvalidSlots(format!("pair potential needs distinct slots, got ({j}, {k})")));
        }
        if j >= n || k >= n {
            return Err(Error::InvalidSlots(format!("slots ({j}, {k}) out of range for {n} particles")));
        }
        if *potential == PairPotential::Zero {
            return Ok(Self::zero(sector.clone()));
        }
        let lat = sector.lattice();
        let ns = lat.site_count();
        let mut table = Vec::with_capacity(ns * ns);
        for a in 0..ns {
            for b in 0..ns {
                let r = lat.distance(SiteIndex(a), SiteIndex(b))?;
                table.push(weight * potential.eval(r, lat.spacing())?);
            }
        }
        Ok(Self { sector: sector.clone(), terms: vec![Term::Pair { slots: (j, k), table }] })
    }

    /// `−Σ_j (ħ²/2m_j) Δ_j + Σ_pairs V(|x_j − x_k|) + Σ_j U_j(x_j)`.
    pub fn hamiltonian(spec: &HamiltonianSpec, sector: &Sector) -> Result<Self> {
        let lat = sector.lattice();
        let mut h = Self::zero(sector.clone());
        for (j, p) in sector.specs().iter().enumerate().filter(|_| spec.kinetic) {
            let kin = OneBodyMatrix::kinetic(lat, p.internal_dim, p.mass, spec.hbar);
            h = h.plus(&Self::lift_onebody(&kin, j, sector)?)?;
        }
        let n = sector.n_particles();
        let weight = match spec.pair_count {
            PairCount::Unordered => 1.0,
            PairCount::Ordered => 2.0,
        };
        for j in 0..n {
            for k in j + 1..n {
                h = h.plus(&Self::pair_with_weight(&spec.potential, (j, k), sector, weight)?)?;
            }
        }
        for ext in &spec.external {
            if ext.slot >= n {
                return Err(Error::InvalidSlots(format!("external potential on slot {}", ext.slot)));
            }
            if ext.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("external potential must be finite".into()));
            }
            let op = OneBodyMatrix::site_potential(lat, sector.specs()[ext.slot].internal_dim, &ext.values)?;
            h = h.plus(&Self::lift_onebody(&op, ext.slot, sector)?)?;
        }
        Ok(h)
    }

    /// General sparse operator with the same matrix elements as the dense `a`
    /// in the shared product basis.
    pub fn from_dense(a: &DMatrix<Complex64>, sector: &Sector) -> Result<Self> {
        let dim = sector.total_dim().unwrap_or(usize::MAX);
        if a.nrows() != dim || a.ncols() != dim {
            return Err(Error::ShapeMismatch(format!("{}x{} matrix on a sector of dimension {dim}", a.nrows(), a.ncols())));
        }
        let mut columns = HashMap::new();
        for j in 0..dim {
            let col: Vec<_> =
                (0..dim).filter(|&i| a[(i, j)] != ZERO).map(|i| (sector.multi_index(i), a[(i, j)])).collect();
            if !col.is_empty() {
                columns.insert(sector.multi_index(j), col);
            }
        }
        Ok(Self { sector: sector.clone(), terms: vec![Term::General { columns }] })
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        self.sector.check_same_space(&other.sector)?;
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Self { sector: self.sector.clone(), terms })
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let scale_columns = |cols: HashMap<MultiIndex, Vec<(MultiIndex, Complex64)>>| Term::General {
            columns: cols.into_iter().map(|(k, col)| (k, col.into_iter().map(|(r, v)| (r, v * c)).collect())).collect(),
        };
        let terms = self
            .terms
            .iter()
            .map(|t| match t {
                Term::Local { factors, coeff } => Term::Local { factors: factors.clone(), coeff: coeff * c },
                Term::Pair { slots, table } if c.im == 0.0 => {
                    Term::Pair { slots: *slots, table: table.iter().map(|v| v * c.re).collect() }
                }
                Term::Pair { slots, table } => scale_columns(pair_as_general(*slots, table, &self.sector)),
                Term::General { columns } => scale_columns(columns.clone()),
            })
            .collect();
        Self { sector: self.sector.clone(), terms }
    }

    /// Nonzero entries of column `idx`, summed over terms.
    fn column_entries(&self, idx: &MultiIndex, out: &mut Vec<(MultiIndex, Complex64)>) {
        let ns = self.sector.lattice().site_count();
        for term in &self.terms {
            match term {
                Term::Local { factors, coeff } => {
                    let mut cur = vec![(idx.clone(), *coeff)];
                    for (slot, op) in factors {
                        let mut next = Vec::with_capacity(cur.len() * 3);
                        for (ix, v) in &cur {
                            for &(r, w) in op.column(ix.slots()[*slot]) {
                                let mut o = ix.clone();
                                o.0[*slot] = r;
                                next.push((o, v * w));
                            }
                        }
                        cur = next;
                    }
                    out.extend(cur);
                }
                Term::Pair { slots: (j, k), table } => {
                    let (sj, _) = self.sector.pair(idx, *j);
                    let (sk, _) = self.sector.pair(idx, *k);
                    let v = table[sj.0 * ns + sk.0];
                    if v != 0.0 {
                        out.push((idx.clone(), Complex64::new(v, 0.0)));
                    }
                }
                Term::General { columns } => {
                    if let Some(col) = columns.get(idx) {
                        out.extend(col.iter().cloned());
                    }
                }
            }
        }
    }

    /// Linear action on a sparse state.
    pub fn apply(&self, m: &MultiLayerState) -> Result<MultiLayerState> {
        self.sector.check_same_space(m.sector())?;
        let mut acc: BTreeMap<MultiIndex, Complex64> = BTreeMap::new();
        let mut buf = Vec::new();
        for (idx, &c) in m.terms() {
            buf.clear();
            self.column_entries(idx, &mut buf);
            for (r, w) in buf.drain(..) {
                *acc.entry(r).or_insert(ZERO) += w * c;
            }
        }
        acc.retain(|_, z| *z != ZERO);
        Ok(MultiLayerState::from_map_pruned(self.sector.with_symmetry(Symmetry::None)?, acc))
    }

    /// `⟨idx_out| O |idx_in⟩`.
    pub fn matrix_element(&self, out: &MultiIndex, input: &MultiIndex) -> Complex64 {
        let mut buf = Vec::new();
        self.column_entries(input, &mut buf);
        buf.into_iter().filter(|(r, _)| r == out).map(|(_, v)| v).sum()
    }

    /// Sparse matrix over flat product-basis indices.
    pub fn compile(&self) -> Result<SparseMatrix> {
        let dim = self.sector.total_dim().ok_or(Error::CapExceeded { dim: usize::MAX, cap: usize::MAX })?;
        let mut trip = Vec::new();
        let mut buf = Vec::new();
        for j in 0..dim {
            let idx = self.sector.multi_index(j);
            buf.clear();
            self.column_entries(&idx, &mut buf);
            trip.extend(buf.drain(..).map(|(r, v)| (self.sector.flat_index(&r), j, v)));
        }
        SparseMatrix::from_triplets(dim, trip)
    }

    /// Dense matrix for sectors up to [`DENSE_OPERATOR_CAP`].
    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        let dim = self.sector.total_dim().unwrap_or(usize::MAX);
        if dim > DENSE_OPERATOR_CAP {
            return Err(Error::CapExceeded { dim, cap: DENSE_OPERATOR_CAP });
        }
        Ok(self.compile()?.to_dense())
    }

    /// Largest entry of `O − O†`, relative to the largest matrix entry.
    pub fn hermiticity_defect(&self) -> Result<f64> {
        let m = self.compile()?;
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        Ok(m.hermiticity_defect() / scale)
    }

    /// `⟨m, O m⟩ / ⟨m, m⟩`.
    pub fn expectation(&self, m: &MultiLayerState) -> Result<Complex64> {
        let nrm = m.inner(m)?;
        if nrm == ZERO {
            return Err(Error::ZeroState);
        }
        Ok(m.inner(&self.apply(m)?)? / nrm)
    }
}

fn pair_as_general(
    (j, k): (usize, usize),
    table: &[f64],
    sector: &Sector,
) -> HashMap<MultiIndex, Vec<(MultiIndex, Complex64)>> {
    let ns = sector.lattice().site_count();
    let dim = sector.total_dim().unwrap_or(0);
    (0..dim)
        .filter_map(|flat| {
            let idx = sector.multi_index(flat);
            let v = table[sector.pair(&idx, j).0 .0 * ns + sector.pair(&idx, k).0 .0];
            (v != 0.0).then(|| (idx.clone(), vec![(idx, Complex64::new(v, 0.0))]))
        })
        .collect()
}

/// Pauli matrices with `σ_z = diag(+1, −1)` (internal index 0 is spin up).
pub fn pauli_x() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> DMatrix<Complex64> {
    let i = Complex64::new(0.0, 1.0);
    DMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO])
}

pub fn pauli_z() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// `n·σ` for a unit (or any real) axis `n`.
pub fn spin_along(n: [f64; 3]) -> DMatrix<Complex64> {
    pauli_x() * Complex64::new(n[0], 0.0) + pauli_y() * Complex64::new(n[1], 0.0) + pauli_z() * Complex64::new(n[2], 0.0)
}

/// Unit axis in the x-z plane at polar angle `theta` from z.
pub fn axis_xz(theta: f64) -> [f64; 3] {
    [theta.sin(), 0.0, theta.cos()]
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    CrankNicolson,
    DenseExpm,
}

/// Relative residual the Crank-Nicolson solve aims for; anything at or
/// below [`SOLVER_ACCEPT`] is accepted if iteration stalls.
pub const SOLVER_TARGET: f64 = 1e-14;
pub const SOLVER_ACCEPT: f64 = 1e-12;

/// One-step propagator for a fixed Hamiltonian and time step.
#[derive(Debug, Clone)]
pub struct Propagator {
    sector: Sector,
    kind: PropagatorKind,
}

#[derive(Debug, Clone)]
enum PropagatorKind {
    CrankNicolson { h: SparseMatrix, tau: f64, max_iter: usize },
    Exact { u: DMatrix<Complex64> },
}

impl Propagator {
    pub fn new(h: &OperatorRep, dt: f64, scheme: Scheme, hbar: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidTimeStep(format!("dt must be positive, got {dt}")));
        }
        let kind = match scheme {
            Scheme::CrankNicolson => {
                let m = h.compile()?;
                let defect = m.hermiticity_defect() / m.max_abs().max(f64::MIN_POSITIVE);
                if defect > 1e-12 {
                    return Err(Error::NotHermitian(defect));
                }
                let max_iter = 200 + 4 * m.dim().min(5000);
                PropagatorKind::CrankNicolson { h: m, tau: dt / (2.0 * hbar), max_iter }
            }
            Scheme::DenseExpm => PropagatorKind::Exact { u: oracle::dense_expm(&h.to_dense()?, dt, hbar)? },
        };
        Ok(Self { sector: h.sector().clone(), kind })
    }

    /// Advances a dense coefficient vector by one step.
    pub fn step_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        match &self.kind {
            PropagatorKind::Exact { u } => {
                let x = u * nalgebra::DVector::from_column_slice(v);
                Ok(x.iter().copied().collect())
            }
            PropagatorKind::CrankNicolson { h, tau, max_iter } => cn_step(h, *tau, *max_iter, v),
        }
    }

    pub fn step(&self, m: &MultiLayerState) -> Result<MultiLayerState> {
        self.sector.check_same_space(m.sector())?;
        let v = self.step_vec(&m.to_dense_vec()?)?;
        MultiLayerState::from_dense_vec(m.sector().clone(), &v)
    }
}

/// Solves `(1 + iτH) x = (1 − iτH) v` by conjugate gradients on the normal
/// equations `(1 + τ²H²) x = (1 − iτH)² v`.
fn cn_step(h: &SparseMatrix, tau: f64, max_iter: usize, v: &[Complex64]) -> Result<Vec<Complex64>> {
    let itau = Complex64::new(0.0, tau);
    let apply_a = |x: &[Complex64], sign: f64| -> Vec<Complex64> {
        let hx = h.matvec(x);
        x.iter().zip(&hx).map(|(a, b)| a + itau * sign * b).collect()
    };
    let b = apply_a(v, -1.0);
    let bnorm = sparse::norm2(&b);
    if bnorm == 0.0 {
        return Ok(vec![ZERO; v.len()]);
    }
    let rhs = apply_a(&b, -1.0);
    let normal = |x: &[Complex64]| -> Vec<Complex64> {
        let hhx = h.matvec(&h.matvec(x));
        x.iter().zip(&hhx).map(|(a, c)| a + c * (tau * tau)).collect()
    };
    let true_residual = |x: &[Complex64]| -> f64 {
        let ax = apply_a(x, 1.0);
        let r: Vec<_> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
        sparse::norm2(&r) / bnorm
    };

    let mut x = v.to_vec();
    let nx = normal(&x);
    let mut r: Vec<Complex64> = rhs.iter().zip(&nx).map(|(a, c)| a - c).collect();
    let mut p = r.clone();
    let mut rs = sparse::dot(&r, &r).re;
    let mut best = true_residual(&x);
    for _ in 0..max_iter {
        if best <= SOLVER_TARGET || rs == 0.0 {
            return Ok(x);
        }
        let ap = normal(&p);
        let pap = sparse::dot(&p, &ap).re;
        if pap <= 0.0 {
            break;
        }
        let alpha = rs / pap;
        for i in 0..x.len() {
            x[i] += p[i] * alpha;
            r[i] -= ap[i] * alpha;
        }
        let rs_new = sparse::dot(&r, &r).re;
        let beta = rs_new / rs;
        for i in 0..p.len() {
            p[i] = r[i] + p[i] * beta;
        }
        rs = rs_new;
        best = true_residual(&x);
    }
    if best <= SOLVER_ACCEPT {
        Ok(x)
    } else {
        Err(Error::SolverDiverged { iterations: max_iter, residual: best })
    }
}

/// Approximates `exp(−iHt/ħ)·m` using steps of `dt`; a shorter final step
/// covers any remainder.
pub fn evolve(m: &MultiLayerState, h: &OperatorRep, total_t: f64, dt: f64, scheme: Scheme, hbar: f64) -> Result<MultiLayerState> {
    if !(total_t.is_finite() && total_t >= 0.0) {
        return Err(Error::InvalidTimeStep(format!("total time must be non-negative, got {total_t}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidTimeStep(format!("dt must be positive, got {dt}")));
    }
    h.sector.check_same_space(m.sector())?;
    if total_t == 0.0 {
        return Ok(m.clone());
    }
    if scheme == Scheme::DenseExpm {
        return Propagator::new(h, total_t, scheme, hbar)?.step(m);
    }
    let full = (total_t / dt + 1e-9).floor() as usize;
    let rem = total_t - full as f64 * dt;
    let mut v = m.to_dense_vec()?;
    if full > 0 {
        let prop = Propagator::new(h, dt, scheme, hbar)?;
        for _ in 0..full {
            v = prop.step_vec(&v)?;
        }
    }
    if rem > 1e-12 * dt {
        v = Propagator::new(h, rem, scheme, hbar)?.step_vec(&v)?;
    }
    MultiLayerState::from_dense_vec(m.sector().clone(), &v)
}

/// One possible measurement result.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub eigenvalue: f64,
    pub probability: f64,
    /// Normalized projected state; `None` when the outcome has zero probability.
    pub post_state: Option<MultiLayerState>,
}

/// Probability below which an outcome is reported without a post-state.
pub const NEGLIGIBLE_PROBABILITY: f64 = 1e-20;

/// Spectral decomposition of a Hermitian observable applied to `m`:
/// one outcome per distinct eigenvalue, in increasing order.
pub fn measure_project(m: &MultiLayerState, o: &OperatorRep) -> Result<Vec<Outcome>> {
    o.sector.check_same_space(m.sector())?;
    let dense = o.to_dense()?;
    let scale = dense.iter().fold(f64::MIN_POSITIVE, |a, z| a.max(z.norm()));
    let defect = oracle::hermiticity_defect(&dense) / scale;
    if defect > 1e-12 {
        return Err(Error::NotHermitian(defect));
    }
    let v = nalgebra::DVector::from_column_slice(&m.to_dense_vec()?);
    let total = v.norm_squared();
    if total == 0.0 {
        return Err(Error::ZeroState);
    }
    let eig = dense.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let group_tol = 1e-9 * scale.max(1.0);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if (eig.eigenvalues[i] - eig.eigenvalues[*g.last().unwrap()]).abs() <= group_tol => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    let weight = m.sector().basis_weight();
    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        let eigenvalue = g.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / g.len() as f64;
        let mut proj = nalgebra::DVector::<Complex64>::zeros(v.len());
        for &i in &g {
            let col = eig.eigenvectors.column(i);
            let amp = col.dotc(&v);
            proj.axpy(amp, &col, ONE);
        }
        let pn = proj.norm_squared();
        let probability = pn / total;
        let post_state = if probability > NEGLIGIBLE_PROBABILITY {
            let scaled: Vec<Complex64> = proj.iter().map(|z| z / (pn * weight).sqrt()).collect();
            let dense_state = MultiLayerState::from_dense_vec(m.sector().with_symmetry(Symmetry::None)?, &scaled)?;
            let terms = dense_state.terms().clone();
            Some(MultiLayerState::from_map_pruned(dense_state.sector().clone(), terms))
        } else {
            None
        };
        out.push(Outcome { eigenvalue, probability, post_state });
    }
    Ok(out)
}
