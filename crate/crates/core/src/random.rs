//! Seeded random inputs for the property suites.
//!
//! All randomness goes through SplitMix64 so that a seed reproduces the same
//! cases on every platform.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;

use crate::error::Result;
use crate::lattice::{Lattice3D, Region};
use crate::layers::GaugeElement;
use crate::multilayer::Sector;
use crate::onebody::{OneParticleField, ParticleSpec};
use crate::oracle::DenseTensorState;

pub type SeededRng = SplitMix64;

pub fn seeded(seed: u64) -> SeededRng {
    SplitMix64::seed_from_u64(seed)
}

/// Complex number with independent standard normal parts.
pub fn complex(rng: &mut SeededRng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn complex_vec(rng: &mut SeededRng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| complex(rng)).collect()
}

pub fn field(rng: &mut SeededRng, lattice: Lattice3D, spec: &ParticleSpec) -> Result<OneParticleField> {
    let n = spec.dim_on(&lattice);
    OneParticleField::from_amplitudes(lattice, spec.clone(), complex_vec(rng, n))
}

pub fn fields(rng: &mut SeededRng, lattice: Lattice3D, specs: &[ParticleSpec]) -> Result<Vec<OneParticleField>> {
    specs.iter().map(|s| field(rng, lattice, s)).collect()
}

/// Gauge element with moduli in `[e^-1, e]` and uniform phases.
pub fn gauge_element(rng: &mut SeededRng, n: usize) -> Result<GaugeElement> {
    let free = (0..n.saturating_sub(1))
        .map(|_| Complex64::from_polar(rng.random_range(-1.0..1.0f64).exp(), rng.random_range(0.0..std::f64::consts::TAU)))
        .collect();
    GaugeElement::completing(free)
}

pub fn dense_state(rng: &mut SeededRng, sector: &Sector) -> Result<DenseTensorState> {
    let dim = sector.slot_dims().iter().product();
    DenseTensorState::new(sector.clone(), complex_vec(rng, dim))
}

pub fn matrix(rng: &mut SeededRng, d: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(d, d, |_, _| complex(rng))
}

pub fn hermitian(rng: &mut SeededRng, d: usize) -> DMatrix<Complex64> {
    let a = matrix(rng, d);
    (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Unitary from the QR factor of a Gaussian matrix.
pub fn unitary(rng: &mut SeededRng, d: usize) -> DMatrix<Complex64> {
    matrix(rng, d).qr().q()
}

/// Random subset of the sites.
pub fn region(rng: &mut SeededRng, lattice: &Lattice3D) -> Region {
    Region::new((0..lattice.site_count()).filter(|_| rng.random_bool(0.5)))
}

/// Random partition into at most `parts` regions, some possibly empty.
pub fn partition(rng: &mut SeededRng, lattice: &Lattice3D, parts: usize) -> Vec<Region> {
    let owner: Vec<usize> = (0..lattice.site_count()).map(|_| rng.random_range(0..parts.max(1))).collect();
    (0..parts.max(1)).map(|p| Region::new((0..owner.len()).filter(|&s| owner[s] == p))).collect()
}

pub fn singletons(lattice: &Lattice3D) -> Vec<Region> {
    (0..lattice.site_count()).map(|s| Region::new([s])).collect()
}
