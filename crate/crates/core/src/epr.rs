//! Spin singlet of two separated spin-½ particles and its spin correlations.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Lattice3D;
use crate::layers::Layer;
use crate::multilayer::{MultiLayerState, Sector};
use crate::onebody::{OneBodyMatrix, OneParticleField, ParticleSpec, Statistics};
use crate::operators::{axis_xz, measure_project, spin_along, OperatorRep};
use crate::oracle::kron_all;

/// Alice's packet occupies sites 0 and 1 and Bob's sites 3 and 4 of a six-site ring.
pub struct Singlet {
    pub state: MultiLayerState,
    pub layers: [Layer; 2],
}

impl Singlet {
    pub fn new() -> Result<Self> {
        let lat = Lattice3D::new([6, 1, 1], 1.0)?;
        let spec = ParticleSpec::new("spin-half", 2, Statistics::Distinguishable, 1.0)?;
        let w = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        let alice = [w, w, z, z, z, z];
        let bob = [z, z, z, w, w, z];
        let up = [Complex64::new(1.0, 0.0), z];
        let down = [z, Complex64::new(1.0, 0.0)];
        let f = |spatial: &[Complex64], spin: &[Complex64]| OneParticleField::product(lat, spec.clone(), spatial, spin);
        let l1 = Layer::from_fields(vec![f(&alice, &up)?, f(&bob, &down)?])?;
        let l2 = Layer::from_fields(vec![f(&alice, &down)?, f(&bob, &up)?])?;
        let one = Complex64::new(1.0, 0.0);
        let raw = MultiLayerState::add(one, &MultiLayerState::from_layer(&l1)?, -one, &MultiLayerState::from_layer(&l2)?)?;
        let state = raw.scaled(Complex64::new(1.0 / raw.norm(), 0.0));
        Ok(Self { state, layers: [l1, l2] })
    }

    pub fn sector(&self) -> &Sector {
        self.state.sector()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub theta: f64,
    /// `Σ λ P(λ)` over the spectrum of `σ_a ⊗ σ_b`.
    pub e: f64,
    /// Same correlation from sequential single-side projections.
    pub e_sequential: f64,
    pub p_pp: f64,
    pub p_pm: f64,
    pub p_mp: f64,
    pub p_mm: f64,
    /// Largest layer count among the post-measurement states.
    pub max_post_layers: usize,
}

fn normalized(v: [f64; 3]) -> Result<[f64; 3]> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::Config(format!("axis {v:?} has no direction")));
    }
    Ok(v.map(|x| x / n))
}

fn slot_spin(sector: &Sector, n: [f64; 3]) -> DMatrix<Complex64> {
    let sites = sector.lattice().site_count();
    kron_all(&[DMatrix::identity(sites, sites), spin_along(n)])
}

/// Correlation of spin measurements along `a` on Alice's particle and `b`
/// on Bob's.
pub fn correlation(singlet: &Singlet, a: [f64; 3], b: [f64; 3]) -> Result<CorrelationRow> {
    let (a, b) = (normalized(a)?, normalized(b)?);
    let sector = singlet.sector();
    let lat = *sector.lattice();
    let theta = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0).acos();

    let joint = OperatorRep::from_dense(&kron_all(&[slot_spin(sector, a), slot_spin(sector, b)]), sector)?;
    let e = measure_project(&singlet.state, &joint)?.iter().map(|o| o.eigenvalue * o.probability).sum();

    let side = |n: [f64; 3], slot: usize| -> Result<OperatorRep> {
        OperatorRep::lift_onebody(&OneBodyMatrix::internal(&lat, &spin_along(n))?, slot, sector)
    };
    let (sa, sb) = (side(a, 0)?, side(b, 1)?);
    let mut p = [[0.0; 2]; 2];
    let mut max_post_layers = 0;
    for oa in measure_project(&singlet.state, &sa)? {
        let Some(post_a) = oa.post_state else { continue };
        let ia = usize::from(oa.eigenvalue < 0.0);
        for ob in measure_project(&post_a, &sb)? {
            let ib = usize::from(ob.eigenvalue < 0.0);
            p[ia][ib] += oa.probability * ob.probability;
            if let Some(post) = ob.post_state {
                max_post_layers = max_post_layers.max(post.schmidt_layers(1e-10)?.len());
            }
        }
    }
    let e_sequential = p[0][0] - p[0][1] - p[1][0] + p[1][1];
    Ok(CorrelationRow { theta, e, e_sequential, p_pp: p[0][0], p_pm: p[0][1], p_mp: p[1][0], p_mm: p[1][1], max_post_layers })
}

/// Alice along z, Bob tilted by `theta` in the x-z plane.
pub fn correlation_at(singlet: &Singlet, theta: f64) -> Result<CorrelationRow> {
    let mut row = correlation(singlet, [0.0, 0.0, 1.0], axis_xz(theta))?;
    row.theta = theta;
    Ok(row)
}
