//! Seeded property suites, one per acceptance criterion.

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::epr::{correlation_at, Singlet};
use crate::error::{Error, Result};
use crate::fock_kg::TruncatedFock;
use crate::lattice::Lattice3D;
use crate::layers::{gauge_act, GaugeElement, Layer, Tolerance, CANONICAL_GAUGE_TAG};
use crate::locality::{glue, restrict};
use crate::multilayer::{rho, rho_inv, MultiLayerState, Sector, Symmetry};
use crate::onebody::{OneBodyMatrix, OneParticleField, ParticleSpec, Statistics};
use crate::operators::{HamiltonianSpec, OperatorRep, PairPotential, Propagator, Scheme};
use crate::oracle::{self, dense_apply, dense_expm, dense_inner, dense_symmetrize, unitarity_defect, DenseTensorState};
use crate::random::{self, SeededRng};

pub const SUITES: [&str; 11] = [
    "isomorphism",
    "gauge",
    "equivalence",
    "distributivity",
    "operators",
    "locality",
    "dynamics",
    "epr",
    "separability",
    "fock",
    "symmetrization",
];

/// One measured property: passes when `deviation ≤ tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub cases: usize,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, cases: usize, deviation: f64, tolerance: f64) -> Self {
        Self { name: name.to_string(), cases, deviation, tolerance, passed: deviation <= tolerance }
    }

    /// Lower bound instead of upper bound.
    pub fn at_least(name: &str, cases: usize, value: f64, bound: f64) -> Self {
        Self { name: name.to_string(), cases, deviation: value, tolerance: bound, passed: value >= bound }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub seconds: f64,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }
}

/// Runs one named suite, or every suite for `"all"`.
pub fn run(name: &str, seed: u64) -> Result<Vec<SuiteReport>> {
    if name == "all" {
        return SUITES.iter().map(|s| run_suite(s, seed)).collect();
    }
    Ok(vec![run_suite(name, seed)?])
}

pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    let mut rng = random::seeded(seed);
    let start = Instant::now();
    let checks = match name {
        "isomorphism" => isomorphism(&mut rng)?,
        "gauge" => gauge(&mut rng)?,
        "equivalence" => equivalence(&mut rng)?,
        "distributivity" => distributivity(&mut rng)?,
        "operators" => operators(&mut rng)?,
        "locality" => locality()?,
        "dynamics" => dynamics()?,
        "epr" => epr()?,
        "separability" => separability(&mut rng)?,
        "fock" => fock(&mut rng)?,
        "symmetrization" => symmetrization(&mut rng)?,
        other => return Err(Error::UnknownSuite(other.to_string())),
    };
    Ok(SuiteReport { suite: name.to_string(), seed, seconds: start.elapsed().as_secs_f64(), checks })
}

fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

fn rel_diff(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 { 0.0 } else { (a - b).norm() / scale }
}

/// Relative amplitude difference plus largest factor-entry difference.
pub fn layer_deviation(a: &Layer, b: &Layer) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let factors = a.factors().iter().zip(b.factors()).fold(0.0f64, |m, (f, g)| m.max(max_diff(f.amplitudes(), g.amplitudes())));
    rel_diff(a.amplitude(), b.amplitude()).max(factors)
}

fn state_deviation(a: &MultiLayerState, b: &MultiLayerState) -> f64 {
    let scale = a.max_abs().max(b.max_abs());
    let keys = a.terms().keys().chain(b.terms().keys());
    let worst = keys.fold(0.0f64, |m, k| m.max((a.coefficient(k) - b.coefficient(k)).norm()));
    if scale == 0.0 { worst } else { worst / scale }
}

fn spin(label: &str, statistics: Statistics) -> ParticleSpec {
    ParticleSpec::new(label, 2, statistics, 1.0).expect("valid spec")
}

fn random_specs(rng: &mut SeededRng, n: usize) -> Vec<ParticleSpec> {
    use rand::Rng;
    (0..n)
        .map(|j| {
            let d = rng.random_range(1..=3);
            ParticleSpec::new(format!("p{j}"), d, Statistics::Distinguishable, 1.0).expect("valid spec")
        })
        .collect()
}

fn isomorphism(rng: &mut SeededRng) -> Result<Vec<Check>> {
    let pair = Sector::distinguishable(Lattice3D::new([2, 2, 2], 0.5)?, vec![spin("a", Statistics::Distinguishable); 2])?;
    let triple = Sector::distinguishable(Lattice3D::new([4, 1, 1], 0.8)?, vec![ParticleSpec::scalar("b"); 3])?;
    let (mut roundtrip, mut inner) = (0.0f64, 0.0f64);
    let cases = 200;
    for i in 0..cases {
        let sector = if i % 2 == 0 { &pair } else { &triple };
        let t = random::dense_state(rng, sector)?;
        let u = random::dense_state(rng, sector)?;
        let m = rho(&t);
        roundtrip = roundtrip.max(max_diff(rho_inv(&m)?.coefficients(), t.coefficients()));
        inner = inner.max(rel_diff(m.inner(&rho(&u))?, dense_inner(&t, &u)?));
    }
    Ok(vec![
        Check::new("rho_inv(rho(t)) = t", cases, roundtrip, 1e-14),
        Check::new("inner product matches oracle (relative)", cases, inner, 1e-12),
    ])
}

fn gauge(rng: &mut SeededRng) -> Result<Vec<Check>> {
    let lat = Lattice3D::new([2, 2, 1], 0.8)?;
    let (mut dev, mut not_canonical) = (0.0f64, 0usize);
    let cases = 500;
    for i in 0..cases {
        let specs = random_specs(rng, 2 + i % 3);
        let fields = random::fields(rng, lat, &specs)?;
        let g = random::gauge_element(rng, specs.len())?;
        let a = Layer::from_fields(fields.clone())?;
        let b = Layer::from_fields(gauge_act(&fields, &g)?)?;
        dev = dev.max(layer_deviation(&a, &b));
        not_canonical += usize::from(!b.is_canonical(1e-12));
    }
    Ok(vec![
        Check::new("canonical layer is gauge invariant", cases, dev, 1e-12),
        Check::new("canonical form violations", cases, not_canonical as f64, 0.0),
    ])
}

fn inverse(g: &GaugeElement) -> Result<GaugeElement> {
    GaugeElement::new(g.scalars().iter().map(|c| c.inv()).collect())
}

fn equivalence(rng: &mut SeededRng) -> Result<Vec<Check>> {
    let lat = Lattice3D::new([3, 1, 1], 0.7)?;
    let cases = 100;
    let (mut laws, mut assoc, mut false_matches) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..cases {
        let specs = random_specs(rng, 3);
        let x = random::fields(rng, lat, &specs)?;
        let g1 = random::gauge_element(rng, 3)?;
        let g2 = random::gauge_element(rng, 3)?;
        let y = gauge_act(&x, &g1)?;
        let z = gauge_act(&y, &g2)?;
        let cx = Layer::from_fields(x.clone())?;
        let cy = Layer::from_fields(y.clone())?;
        let cz = Layer::from_fields(z)?;
        // reflexive, symmetric (x = g1⁻¹·y), transitive (z = g2·g1·x)
        let refl = Layer::from_fields(gauge_act(&x, &GaugeElement::identity(3))?)?;
        let back = Layer::from_fields(gauge_act(&y, &inverse(&g1)?)?)?;
        let composed = Layer::from_fields(gauge_act(&x, &g2.compose(&g1)?)?)?;
        for d in [layer_deviation(&refl, &cx), layer_deviation(&back, &cx), layer_deviation(&cy, &cx), layer_deviation(&cz, &cx), layer_deviation(&composed, &cz)] {
            laws = laws.max(d);
        }
        let other = Layer::from_fields(random::fields(rng, lat, &specs)?)?;
        false_matches += usize::from(other.equals(&cx, Tolerance::default())?);

        let l1 = Layer::from_fields(random::fields(rng, lat, &specs[..1])?)?;
        let l2 = Layer::from_fields(random::fields(rng, lat, &specs[1..2])?)?;
        let l3 = Layer::from_fields(random::fields(rng, lat, &specs[2..])?)?;
        let left = l1.compose(&l2)?.compose(&l3)?;
        let right = l1.compose(&l2.compose(&l3)?)?;
        let flat = Layer::from_fields([l1.representative(), l2.representative(), l3.representative()].concat())?;
        assoc = assoc.max(layer_deviation(&left, &right)).max(layer_deviation(&left, &flat));
    }
    Ok(vec![
        Check::new("reflexive, symmetric and transitive on canonical forms", cases, laws, 1e-14),
        Check::new("inequivalent tuples never match", cases, false_matches as f64, 0.0),
        Check::new("layer product is associative", cases, assoc, 1e-14),
    ])
}

fn distributivity(rng: &mut SeededRng) -> Result<Vec<Check>> {
    let lat = Lattice3D::new([2, 2, 1], 0.9)?;
    let one = Complex64::new(1.0, 0.0);
    let cases = 100;
    let mut dev = 0.0f64;
    for i in 0..cases {
        let specs = random_specs(rng, 2 + i % 2);
        let (head, last) = specs.split_at(specs.len() - 1);
        let left = random::fields(rng, lat, head)?;
        let p2 = random::field(rng, lat, &last[0])?;
        let p3 = random::field(rng, lat, &last[0])?;
        let sum = OneParticleField::scale_add(one, &p2, one, &p3)?;
        let expand = |tail: OneParticleField| -> Result<MultiLayerState> {
            let mut fs = left.clone();
            fs.push(tail);
            MultiLayerState::from_layer(&Layer::from_fields(fs)?)
        };
        let lhs = expand(sum)?;
        let rhs = MultiLayerState::add(one, &expand(p2)?, one, &expand(p3)?)?;
        dev = dev.max(state_deviation(&lhs, &rhs));
    }
    Ok(vec![Check::new("expansion distributes over addition", cases, dev, 1e-13)])
}

fn operators(rng: &mut SeededRng) -> Result<Vec<Check>> {
    let sectors = [
        Sector::distinguishable(Lattice3D::new([2, 2, 1], 1.0)?, vec![ParticleSpec::scalar("a"); 2])?,
        Sector::distinguishable(Lattice3D::new([4, 2, 1], 0.6)?, vec![ParticleSpec::scalar("a"); 2])?,
        Sector::distinguishable(Lattice3D::new([2, 2, 2], 0.5)?, vec![spin("s", Statistics::Distinguishable); 2])?,
    ];
    let (mut herm, mut unit, mut apply) = (0.0f64, 0.0f64, 0.0f64);
    let cases = 50;
    for i in 0..2 * cases {
        let sector = &sectors[i % 3];
        let d = sector.slot_dims().iter().product();
        let hermitian = i < cases;
        let a = if hermitian { random::hermitian(rng, d) } else { random::unitary(rng, d) };
        let op = OperatorRep::from_dense(&a, sector)?;
        if hermitian {
            herm = herm.max(op.hermiticity_defect()?);
        } else {
            unit = unit.max(unitarity_defect(&op.compile()?.to_dense()));
        }
        let t = random::dense_state(rng, sector)?;
        let want = dense_apply(&a, &t)?;
        let got = rho_inv(&op.apply(&rho(&t))?)?;
        apply = apply.max(max_diff(got.coefficients(), want.coefficients()) / max_abs(want.coefficients()));
    }
    Ok(vec![
        Check::new("rho_op keeps Hermitian operators Hermitian", cases, herm, 1e-12),
        Check::new("rho_op keeps unitary operators unitary", cases, unit, 1e-12),
        Check::new("apply agrees with the dense oracle", 2 * cases, apply, 1e-12),
    ])
}

fn locality() -> Result<Vec<Check>> {
    let lat = Lattice3D::ring(8)?;
    let specs = vec![spin("a", Statistics::Distinguishable), ParticleSpec::new("b", 2, Statistics::Distinguishable, 2.0)?];
    let sector = Sector::distinguishable(lat, specs.clone())?;
    let kinetic: Vec<DMatrix<Complex64>> = (0..2)
        .map(|j| {
            let k = OneBodyMatrix::kinetic(&lat, 2, specs[j].mass, 1.0);
            OperatorRep::lift_onebody(&k, j, &sector)?.to_dense()
        })
        .collect::<Result<_>>()?;
    let mut spec = HamiltonianSpec::with_potential(PairPotential::SoftenedCoulomb { charge: 1.0, softening: None });
    spec.external = vec![crate::operators::ExternalPotential { slot: 1, values: (0..8).map(|s| (s as f64).cos()).collect() }];
    let h = OperatorRep::hamiltonian(&spec, &sector)?.to_dense()?;
    let potential = &h - &kinetic[0] - &kinetic[1];

    let dim = h.nrows();
    let mut violations = 0usize;
    let mut kinetic_entries = 0usize;
    for r in 0..dim {
        let out = sector.multi_index(r);
        for c in 0..dim {
            let input = sector.multi_index(c);
            for (j, k) in kinetic.iter().enumerate() {
                if k[(r, c)] == Complex64::new(0.0, 0.0) {
                    continue;
                }
                kinetic_entries += 1;
                let (so, ko) = sector.pair(&out, j);
                let (si, ki) = sector.pair(&input, j);
                let spectator_same = (0..2).filter(|&o| o != j).all(|o| out.0[o] == input.0[o]);
                let near = so == si || lat.neighbors(si)?.contains(&so);
                if !(spectator_same && ko == ki && near) {
                    violations += 1;
                }
            }
            if r != c && potential[(r, c)].norm() > 0.0 {
                violations += 1;
            }
        }
    }
    Ok(vec![
        Check::new("kinetic and potential locality violations", dim * dim, violations as f64, 0.0),
        Check::at_least("kinetic couplings inspected", dim * dim, kinetic_entries as f64, 1.0),
    ])
}

/// Two packets on a ring under a softened Coulomb repulsion.
pub fn two_particle_run() -> Result<(OperatorRep, MultiLayerState)> {
    let lat = Lattice3D::ring(8)?;
    let spec = ParticleSpec::new("q", 1, Statistics::Distinguishable, 1.0)?;
    let sector = Sector::distinguishable(lat, vec![spec.clone(), spec.clone()])?;
    let packet = |center: f64, k: f64| -> Result<OneParticleField> {
        let amps = (0..8)
            .map(|s| {
                let x = s as f64 - center;
                Complex64::from_polar((-x * x / 3.0).exp(), k * s as f64)
            })
            .collect();
        OneParticleField::from_amplitudes(lat, spec.clone(), amps)
    };
    let layer = Layer::from_fields(vec![packet(2.0, 0.4)?, packet(5.5, -0.3)?])?;
    let m = MultiLayerState::from_layer(&layer)?;
    let m = m.scaled(Complex64::new(1.0 / m.norm(), 0.0));
    let h = OperatorRep::hamiltonian(&HamiltonianSpec::with_potential(PairPotential::SoftenedCoulomb { charge: 1.0, softening: None }), &sector)?;
    Ok((h, m))
}

fn dynamics() -> Result<Vec<Check>> {
    let (h, m0) = two_particle_run()?;
    let (dt, steps) = (0.01, 100);
    let prop = Propagator::new(&h, dt, Scheme::CrankNicolson, 1.0)?;
    let (n0, e0) = (m0.norm(), h.expectation(&m0)?.re);
    let (mut norm_drift, mut energy_drift) = (0.0f64, 0.0f64);
    let mut m = m0.clone();
    for _ in 0..steps {
        m = prop.step(&m)?;
        norm_drift = norm_drift.max((m.norm() - n0).abs());
        energy_drift = energy_drift.max((h.expectation(&m)?.re - e0).abs());
    }
    let exact = dense_expm(&h.to_dense()?, dt * steps as f64, 1.0)?;
    let v0 = nalgebra::DVector::from_column_slice(&m0.to_dense_vec()?);
    let reference = exact * v0;
    let got = nalgebra::DVector::from_column_slice(&m.to_dense_vec()?);
    let fidelity = got.dotc(&reference).norm_sqr() / (got.norm_squared() * reference.norm_squared());

    let via_expm = crate::operators::evolve(&m0, &h, dt * steps as f64, dt * steps as f64, Scheme::DenseExpm, 1.0)?;
    let expm_dev = max_diff(&via_expm.to_dense_vec()?, reference.as_slice()) / max_abs(reference.as_slice());
    Ok(vec![
        Check::new("norm drift over 100 steps", steps, norm_drift, 1e-10),
        Check::new("energy drift over 100 steps", steps, energy_drift, 1e-8),
        Check::at_least("fidelity against exact propagator", 1, fidelity, 1.0 - 1e-6),
        Check::new("exact scheme matches oracle", 1, expm_dev, 1e-12),
    ])
}

/// Bob's tilt angles for the correlation check.
pub const EPR_ANGLES: [f64; 8] = [
    0.0,
    std::f64::consts::FRAC_PI_8,
    std::f64::consts::FRAC_PI_4,
    std::f64::consts::FRAC_PI_3,
    std::f64::consts::FRAC_PI_2,
    2.0 * std::f64::consts::FRAC_PI_3,
    3.0 * std::f64::consts::FRAC_PI_4,
    std::f64::consts::PI,
];

fn epr() -> Result<Vec<Check>> {
    let singlet = Singlet::new()?;
    let (mut dev, mut seq) = (0.0f64, 0.0f64);
    let mut aligned_layers = 0;
    let mut aligned_probs = 0.0f64;
    for theta in EPR_ANGLES {
        let row = correlation_at(&singlet, theta)?;
        dev = dev.max((row.e + theta.cos()).abs());
        seq = seq.max((row.e_sequential + theta.cos()).abs());
        if theta == 0.0 {
            aligned_layers = row.max_post_layers;
            aligned_probs = [row.p_pp, row.p_mm, (row.p_pm - 0.5).abs(), (row.p_mp - 0.5).abs()].into_iter().fold(0.0, f64::max);
        }
    }
    Ok(vec![
        Check::new("E(a, b) = -cos(theta)", EPR_ANGLES.len(), dev, 1e-10),
        Check::new("sequential projections give the same correlation", EPR_ANGLES.len(), seq, 1e-10),
        Check::new("aligned outcome probabilities (0, 1/2, 1/2, 0)", 1, aligned_probs, 1e-12),
        Check::new("post-measurement layer count - 1 at theta = 0", 1, aligned_layers.abs_diff(1) as f64, 0.0),
    ])
}

fn separability(rng: &mut SeededRng) -> Result<Vec<Check>> {
    use rand::Rng;
    let lat = Lattice3D::new([2, 2, 2], 0.75)?;
    let cases = 50;
    let mut mismatches = 0usize;
    for i in 0..cases {
        let layers: Vec<Layer> = if i % 5 == 4 {
            let sector = Sector::distinguishable(lat, vec![ParticleSpec::scalar("a"); 2])?;
            rho(&random::dense_state(rng, &sector)?).basis_layers()?
        } else {
            (0..rng.random_range(1..=4))
                .map(|_| {
                    let n = rng.random_range(1..=3);
                    let specs = random_specs(rng, n);
                    let c = random::complex(rng);
                    Ok(Layer::from_fields(random::fields(rng, lat, &specs)?)?.scale(c))
                })
                .collect::<Result<_>>()?
        };
        let regions = if i == 0 {
            random::singletons(&lat)
        } else {
            let k = rng.random_range(1..=8);
            random::partition(rng, &lat, k)
        };
        let parts = regions.iter().map(|r| restrict(&layers, r, &lat)).collect::<Result<Vec<_>>>()?;
        if glue(&parts)? != layers {
            mismatches += 1;
        }
    }
    let specs = random_specs(rng, 2);
    let layers = vec![Layer::from_fields(random::fields(rng, lat, &specs)?)?];
    let region = random::region(rng, &lat);
    let mut foreign = restrict(&layers, &region.complement(&lat), &lat)?;
    foreign.gauge_tag = format!("{CANONICAL_GAUGE_TAG}-variant");
    let rejected = matches!(glue(&[restrict(&layers, &region, &lat)?, foreign]), Err(Error::GaugeMismatch(..)));
    Ok(vec![
        Check::new("glue(restrict) mismatches", cases, mismatches as f64, 0.0),
        Check::new("mismatched gauge tags accepted", 1, f64::from(u8::from(!rejected)), 0.0),
    ])
}

fn fock(rng: &mut SeededRng) -> Result<Vec<Check>> {
    let space = TruncatedFock::ring(3, 3)?;
    let report = space.ccr_check()?;
    let ccr = report.max_aa.max(report.max_adag_adag).max(report.max_below_cutoff);

    let max_n = space.modes().len() * space.cutoff();
    let mut iso = 0.0f64;
    let cases = 4;
    for _ in 0..cases {
        let a = random::complex_vec(rng, space.dim());
        let b = random::complex_vec(rng, space.dim());
        for n in 0..=max_n {
            let sector_dot = |x: &[Complex64], y: &[Complex64]| -> Complex64 {
                (0..space.dim()).filter(|&i| space.occupation(i).iter().sum::<usize>() == n).map(|i| x[i].conj() * y[i]).sum()
            };
            let ma = space.to_multilayer(&a, n)?;
            let mb = space.to_multilayer(&b, n)?;
            iso = iso.max(rel_diff(ma.inner(&mb)?, sector_dot(&a, &b)));
            iso = iso.max(rel_diff(Complex64::new(ma.norm(), 0.0), Complex64::new(sector_dot(&a, &a).norm().sqrt(), 0.0)));
        }
    }

    let h = space.free_hamiltonian()?;
    let mut energy_violations = 0usize;
    for idx in 0..space.dim() {
        let occ = space.occupation(idx);
        let e = occ.iter().zip(space.modes()).fold(0.0, |acc, (&n, m)| acc + m.omega * n as f64);
        let hv = h.matvec(&space.basis_state(&occ)?);
        let mut want = vec![Complex64::new(0.0, 0.0); space.dim()];
        want[idx] = Complex64::new(e, 0.0);
        energy_violations += usize::from(hv != want);
    }
    Ok(vec![
        Check::new("commutator deviation below cutoff", space.dim(), ccr, 0.0),
        Check::new("to_multilayer preserves inner products", cases * (max_n + 1), iso, 1e-12),
        Check::new("free-field energy violations on basis states", space.dim(), energy_violations as f64, 0.0),
    ])
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn projector_rank(sector: &Sector, symmetry: Symmetry) -> Result<usize> {
    let dim: usize = sector.slot_dims().iter().product();
    let mut p = DMatrix::<f64>::zeros(dim, dim);
    for col in 0..dim {
        let basis = MultiLayerState::from_terms(sector.clone(), [(sector.multi_index(col), Complex64::new(1.0, 0.0))])?;
        for (idx, v) in basis.symmetrize(symmetry)?.terms() {
            p[(sector.flat_index(idx), col)] = v.re;
        }
    }
    let sv = p.singular_values();
    let top = sv.max();
    Ok(sv.iter().filter(|&&s| s > 1e-10 * top).count())
}

fn symmetrization(rng: &mut SeededRng) -> Result<Vec<Check>> {
    let fermion = ParticleSpec::new("f", 1, Statistics::Fermion, 1.0)?;
    let boson = ParticleSpec::new("b", 1, Statistics::Boson, 1.0)?;
    let (mut idem, mut oracle_dev) = (0.0f64, 0.0f64);
    let mut cases = 0;
    for (sites, n) in [(4, 2), (4, 3), (8, 2), (8, 3)] {
        let lat = Lattice3D::ring(sites)?;
        for spec in [&boson, &fermion] {
            let sector = Sector::identical(lat, spec.clone(), n, Symmetry::None)?;
            let sym = if spec.statistics == Statistics::Boson { Symmetry::Symmetric } else { Symmetry::Antisymmetric };
            for _ in 0..5 {
                let t = random::dense_state(rng, &sector)?;
                let once = rho(&t).symmetrize(sym)?;
                idem = idem.max(state_deviation(&once.symmetrize(sym)?, &once));
                let dense = dense_symmetrize(&t, sym)?;
                oracle_dev = oracle_dev.max(max_diff(rho_inv(&once)?.coefficients(), dense.coefficients()) / max_abs(dense.coefficients()));
                cases += 1;
            }
        }
    }

    let lat = Lattice3D::ring(5)?;
    let mut surviving = 0usize;
    let repeated = 20;
    for i in 0..repeated {
        let psi = random::field(rng, lat, &fermion)?;
        let phi = random::field(rng, lat, &fermion)?;
        let fields = match i % 3 {
            0 => vec![psi.clone(), psi],
            1 => vec![psi.clone(), phi, psi],
            _ => vec![phi, psi.clone(), psi],
        };
        let m = MultiLayerState::from_layer(&Layer::from_fields(fields)?)?;
        surviving += usize::from(!m.symmetrize(Symmetry::Antisymmetric)?.is_empty());
    }

    let mut rank_errors = 0usize;
    let mut ranks = 0;
    for d in [2, 3, 5, 8] {
        for n in [2, 3] {
            let sector = Sector::identical(Lattice3D::ring(d)?, fermion.clone(), n, Symmetry::None)?;
            rank_errors += projector_rank(&sector, Symmetry::Antisymmetric)?.abs_diff(binomial(d, n));
            ranks += 1;
        }
    }
    Ok(vec![
        Check::new("symmetrization is idempotent", cases, idem, 1e-14),
        Check::new("symmetrization matches the dense oracle", cases, oracle_dev, 1e-14),
        Check::new("antisymmetrized repeated-factor layers that survive", repeated, surviving as f64, 0.0),
        Check::new("antisymmetric rank minus C(d, N)", ranks, rank_errors as f64, 0.0),
    ])
}

/// Dense oracle state for a layer, used by the property tests.
pub fn dense_of_layer(layer: &Layer) -> Result<DenseTensorState> {
    let mut t = oracle::dense_outer(layer.factors())?;
    let amp = layer.amplitude();
    t.coefficients_mut().iter_mut().for_each(|z| *z *= amp);
    Ok(t)
}
