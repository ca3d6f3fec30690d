//! Separable states as gauge classes of one-particle field tuples.
//!
//! A tuple `(ψ_1, …, ψ_N)` and its rescaling `(c_1 ψ_1, …, c_N ψ_N)` with
//! `∏ c_j = 1` describe the same layer. A [`Layer`] stores the unique
//! representative in which every factor has unit norm and a real positive
//! leading entry; the leftover scalar is kept as the layer amplitude.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{Lattice3D, SiteIndex};
use crate::onebody::OneParticleField;

/// Version string naming the canonical-form convention. Restrictions only
/// glue when they carry the same tag.
pub const CANONICAL_GAUGE_TAG: &str = "unit-norm/positive-leading/site-major-scan/v1";

/// Relative threshold below which leading entries are treated as noise when
/// locating the phase-fixing entry.
const LEADING_ENTRY_CUTOFF: f64 = 1e-14;

/// Tolerances used when comparing canonical forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub factor_abs: f64,
    pub amplitude_rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { factor_abs: 1e-10, amplitude_rel: 1e-10 }
    }
}

impl Tolerance {
    pub fn uniform(tol: f64) -> Self {
        Self { factor_abs: tol, amplitude_rel: tol }
    }

    pub(crate) fn amplitudes_match(&self, a: Complex64, b: Complex64) -> bool {
        let scale = a.norm().max(b.norm());
        (a - b).norm() <= self.amplitude_rel * scale
    }
}

/// Element `(c_1, …, c_N)` of the gauge group: nonzero scalars with unit product.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeElement {
    scalars: Vec<Complex64>,
}

impl GaugeElement {
    pub fn new(scalars: Vec<Complex64>) -> Result<Self> {
        if scalars.iter().any(|c| *c == Complex64::new(0.0, 0.0)) {
            return Err(Error::InvalidGauge("zero scalar".into()));
        }
        let prod: Complex64 = scalars.iter().product();
        if (prod - 1.0).norm() > 1e-12 {
            return Err(Error::InvalidGauge(format!("product of scalars is {prod}, not 1")));
        }
        Ok(Self { scalars })
    }

    /// Builds `(c_1, …, c_{N-1}, 1/∏ c_j)`.
    pub fn completing(mut free: Vec<Complex64>) -> Result<Self> {
        if free.iter().any(|c| *c == Complex64::new(0.0, 0.0)) {
            return Err(Error::InvalidGauge("zero scalar".into()));
        }
        let prod: Complex64 = free.iter().product();
        free.push(prod.inv());
        Self::new(free)
    }

    pub fn identity(n: usize) -> Self {
        Self { scalars: vec![Complex64::new(1.0, 0.0); n] }
    }

    pub fn scalars(&self) -> &[Complex64] {
        &self.scalars
    }

    pub fn len(&self) -> usize {
        self.scalars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scalars.is_empty()
    }

    /// Entrywise product `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: other.len() });
        }
        Ok(Self { scalars: self.scalars.iter().zip(&other.scalars).map(|(a, b)| a * b).collect() })
    }
}

/// Right action of the gauge group: `ψ_j ↦ c_j ψ_j`.
pub fn gauge_act(fields: &[OneParticleField], g: &GaugeElement) -> Result<Vec<OneParticleField>> {
    if fields.len() != g.len() {
        return Err(Error::LengthMismatch { expected: fields.len(), got: g.len() });
    }
    Ok(fields.iter().zip(g.scalars()).map(|(f, &c)| f.scaled(c)).collect())
}

/// Splits a nonzero field into `(n·e^{iφ}, f / (n·e^{iφ}))`, where `n` is the
/// weighted norm and `φ` the phase of the first entry above the noise floor.
/// Returns `None` for the zero field.
fn gauge_fix(field: &OneParticleField) -> Option<(Complex64, OneParticleField)> {
    let amps = field.amplitudes();
    let max = amps.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if max == 0.0 {
        return None;
    }
    let lead = amps.iter().position(|z| z.norm() > LEADING_ENTRY_CUTOFF * max).expect("max entry passes cutoff");
    let weight = amps[lead] * (field.norm() / amps[lead].norm());
    let inv = weight.inv();
    let mut fixed: Vec<Complex64> = amps.iter().map(|z| z * inv).collect();
    // Pin the phase-fixing entry to the real axis exactly.
    fixed[lead] = Complex64::new(fixed[lead].norm(), 0.0);
    Some((weight, field.with_amplitudes(fixed)))
}

fn leading_entry(field: &OneParticleField) -> Option<Complex64> {
    let amps = field.amplitudes();
    let max = amps.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    amps.iter().copied().find(|z| z.norm() > LEADING_ENTRY_CUTOFF * max)
}

/// Canonical representative of a separable state.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    amplitude: Complex64,
    factors: Vec<OneParticleField>,
}

impl Layer {
    /// Canonicalizes `fields` into a layer. Any zero factor yields the zero layer.
    pub fn from_fields(fields: Vec<OneParticleField>) -> Result<Self> {
        let first = fields.first().ok_or(Error::EmptyFactors)?;
        let lat = *first.lattice();
        if let Some(bad) = fields.iter().find(|f| *f.lattice() != lat) {
            return Err(Error::ShapeMismatch(format!("factor {} lives on a different lattice", bad.spec().label)));
        }
        let mut amplitude = Complex64::new(1.0, 0.0);
        let mut factors = Vec::with_capacity(fields.len());
        for f in &fields {
            match gauge_fix(f) {
                Some((w, g)) => {
                    amplitude *= w;
                    factors.push(g);
                }
                None => return Ok(Self::zero_like(&fields)),
            }
        }
        Ok(Self { amplitude, factors })
    }

    /// Zero layer with the same factor spaces as `fields`.
    pub fn zero_like(fields: &[OneParticleField]) -> Self {
        Self {
            amplitude: Complex64::new(0.0, 0.0),
            factors: fields.iter().map(|f| OneParticleField::zeros(*f.lattice(), f.spec().clone())).collect(),
        }
    }

    /// The zero-particle layer carrying only an amplitude.
    pub fn vacuum(amplitude: Complex64) -> Self {
        Self { amplitude, factors: Vec::new() }
    }

    /// Assembles a layer from already-canonical parts, checking the
    /// canonical-form invariants to `tol`.
    pub fn from_canonical_parts(amplitude: Complex64, factors: Vec<OneParticleField>, tol: f64) -> Option<Self> {
        let layer = Self { amplitude, factors };
        layer.is_canonical(tol).then_some(layer)
    }

    pub fn amplitude(&self) -> Complex64 {
        self.amplitude
    }

    pub fn factors(&self) -> &[OneParticleField] {
        &self.factors
    }

    /// Number of particle slots.
    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == Complex64::new(0.0, 0.0)
    }

    pub fn lattice(&self) -> Option<&Lattice3D> {
        self.factors.first().map(|f| f.lattice())
    }

    /// Whether the stored parts satisfy the canonical-form invariants.
    pub fn is_canonical(&self, tol: f64) -> bool {
        if self.is_zero() {
            return self.factors.iter().all(OneParticleField::is_zero);
        }
        self.factors.iter().all(|f| {
            let lead_ok = matches!(leading_entry(f), Some(z) if z.im == 0.0 && z.re > 0.0);
            lead_ok && (f.norm() - 1.0).abs() <= tol
        })
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        let same = self.factors.len() == other.factors.len()
            && self.factors.iter().zip(&other.factors).all(|(a, b)| a.same_space(b));
        if same {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("layers have different sector shapes".into()))
        }
    }

    /// Canonical-form comparison: amplitudes to relative tolerance, factors
    /// entrywise to absolute tolerance.
    pub fn equals(&self, other: &Self, tol: Tolerance) -> Result<bool> {
        self.check_same_shape(other)?;
        if !tol.amplitudes_match(self.amplitude, other.amplitude) {
            return Ok(false);
        }
        if self.is_zero() {
            return Ok(true);
        }
        Ok(self.factors.iter().zip(&other.factors).all(|(a, b)| {
            a.amplitudes().iter().zip(b.amplitudes()).all(|(x, y)| (x - y).norm() <= tol.factor_abs)
        }))
    }

    /// Scalar multiplication; moves `c` onto the amplitude.
    pub fn scale(&self, c: Complex64) -> Self {
        if c == Complex64::new(0.0, 0.0) {
            return Self::zero_like(&self.factors);
        }
        Self { amplitude: self.amplitude * c, factors: self.factors.clone() }
    }

    /// Sum of two layers sharing canonical factors.
    pub fn collinear_add(&self, other: &Self, tol: Tolerance) -> Result<Self> {
        self.check_same_shape(other)?;
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        let collinear = self.factors.iter().zip(&other.factors).all(|(a, b)| {
            a.amplitudes().iter().zip(b.amplitudes()).all(|(x, y)| (x - y).norm() <= tol.factor_abs)
        });
        if !collinear {
            return Err(Error::NotCollinear);
        }
        let sum = self.amplitude + other.amplitude;
        if sum.norm() <= 1e-15 * self.amplitude.norm().max(other.amplitude.norm()) {
            return Ok(Self::zero_like(&self.factors));
        }
        Ok(Self { amplitude: sum, factors: self.factors.clone() })
    }

    /// `self ⊠ right`: concatenates factors and multiplies amplitudes.
    pub fn compose(&self, right: &Self) -> Result<Self> {
        if let (Some(a), Some(b)) = (self.lattice(), right.lattice()) {
            if a != b {
                return Err(Error::ShapeMismatch("cannot compose layers on different lattices".into()));
            }
        }
        let mut factors = self.factors.clone();
        factors.extend(right.factors.iter().cloned());
        if self.is_zero() || right.is_zero() {
            return Ok(Self::zero_like(&factors));
        }
        Ok(Self { amplitude: self.amplitude * right.amplitude, factors })
    }

    /// Pointwise value at a site: the amplitude and, for each factor, its
    /// internal components at `s`.
    pub fn values_at(&self, s: SiteIndex) -> Result<(Complex64, Vec<Vec<Complex64>>)> {
        let values = self.factors.iter().map(|f| f.at_site(s).map(<[_]>::to_vec)).collect::<Result<Vec<_>>>()?;
        Ok((self.amplitude, values))
    }

    /// Tuple of fields representing this layer, with the amplitude absorbed
    /// into the first factor.
    pub fn representative(&self) -> Vec<OneParticleField> {
        let mut out = self.factors.clone();
        if let Some(first) = out.first_mut() {
            *first = first.scaled(self.amplitude);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::onebody::{ParticleSpec, Statistics};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn spec() -> ParticleSpec {
        ParticleSpec::new("p", 1, Statistics::Distinguishable, 1.0).unwrap()
    }

    fn field(vals: &[Complex64]) -> OneParticleField {
        let lat = Lattice3D::ring(vals.len()).unwrap();
        OneParticleField::from_amplitudes(lat, spec(), vals.to_vec()).unwrap()
    }

    fn psi1() -> OneParticleField {
        field(&[c(0.3, 0.4), c(-1.0, 0.2), c(0.0, 0.7)])
    }

    fn psi2() -> OneParticleField {
        field(&[c(0.0, 0.0), c(2.0, -1.0), c(0.5, 0.5)])
    }

    #[test]
    fn rescaled_pair_is_the_same_layer() {
        let a = Layer::from_fields(vec![psi1(), psi2()]).unwrap();
        let b = Layer::from_fields(vec![psi1().scaled(c(2.0, 0.0)), psi2().scaled(c(0.5, 0.0))]).unwrap();
        assert!(a.equals(&b, Tolerance::uniform(1e-14)).unwrap());
        let b = Layer::from_fields(vec![psi1().scaled(c(3.0, 0.0)), psi2().scaled(c(1.0 / 3.0, 0.0))]).unwrap();
        assert!(a.equals(&b, Tolerance::default()).unwrap());
        let d = Layer::from_fields(vec![psi1().scaled(c(2.0, 0.0)), psi2()]).unwrap();
        assert!(!a.equals(&d, Tolerance::default()).unwrap());
    }

    #[test]
    fn single_factor_canonical_form() {
        let l = Layer::from_fields(vec![field(&[c(0.0, 0.0), c(0.0, 2.0)])]).unwrap();
        assert_eq!(l.amplitude(), c(0.0, 2.0));
        assert_eq!(l.factors()[0].amplitudes(), &[c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(l.is_canonical(1e-15));
    }

    #[test]
    fn zero_factor_gives_zero_layer() {
        let l = Layer::from_fields(vec![psi1(), field(&[c(0.0, 0.0); 3])]).unwrap();
        assert!(l.is_zero());
        assert_eq!(l.len(), 2);
        assert!(l.factors().iter().all(OneParticleField::is_zero));
    }

    #[test]
    fn make_layer_errors() {
        assert!(matches!(Layer::from_fields(vec![]), Err(Error::EmptyFactors)));
        let other = OneParticleField::zeros(Lattice3D::ring(4).unwrap(), spec());
        assert!(matches!(Layer::from_fields(vec![psi1(), other]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn gauge_elements() {
        assert!(GaugeElement::new(vec![c(2.0, 0.0), c(0.5, 0.0)]).is_ok());
        assert!(GaugeElement::new(vec![c(2.0, 0.0), c(1.0, 0.0)]).is_err());
        assert!(GaugeElement::new(vec![c(0.0, 0.0), c(1.0, 0.0)]).is_err());
        let g = GaugeElement::completing(vec![c(1.0, 2.0), c(-0.3, 0.1)]).unwrap();
        assert_eq!(g.len(), 3);

        let fields = vec![psi1(), psi2()];
        let id = gauge_act(&fields, &GaugeElement::identity(2)).unwrap();
        assert_eq!(id, fields);
        assert!(gauge_act(&fields, &GaugeElement::identity(3)).is_err());

        let g1 = GaugeElement::completing(vec![c(1.5, -0.5)]).unwrap();
        let g2 = GaugeElement::completing(vec![c(0.2, 0.9)]).unwrap();
        let twice = gauge_act(&gauge_act(&fields, &g1).unwrap(), &g2).unwrap();
        let once = gauge_act(&fields, &g1.compose(&g2).unwrap()).unwrap();
        for (a, b) in twice.iter().zip(&once) {
            for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
                assert!((x - y).norm() < 1e-15);
            }
        }

        let base = Layer::from_fields(fields.clone()).unwrap();
        let moved = Layer::from_fields(gauge_act(&fields, &g1).unwrap()).unwrap();
        assert!(base.equals(&moved, Tolerance::uniform(1e-13)).unwrap());
    }

    #[test]
    fn scaling_moves_between_factors() {
        let k = c(0.7, -1.3);
        let l = Layer::from_fields(vec![psi1(), psi2()]).unwrap();
        assert_eq!(l.scale(c(1.0, 0.0)), l);
        assert!(l.scale(c(0.0, 0.0)).is_zero());
        let via_factor = Layer::from_fields(vec![psi1().scaled(k), psi2()]).unwrap();
        assert!(via_factor.equals(&l.scale(k), Tolerance::uniform(1e-14)).unwrap());
        let via_second = Layer::from_fields(vec![psi1(), psi2().scaled(k)]).unwrap();
        assert!(via_second.equals(&l.scale(k), Tolerance::uniform(1e-14)).unwrap());
    }

    #[test]
    fn collinear_addition() {
        let l = Layer::from_fields(vec![psi1(), psi2()]).unwrap();
        let tol = Tolerance::default();
        assert!(l.collinear_add(&l.scale(c(-1.0, 0.0)), tol).unwrap().is_zero());
        let (c1, c2) = (c(0.5, 1.0), c(-2.0, 0.25));
        let sum = l.scale(c1).collinear_add(&l.scale(c2), tol).unwrap();
        assert!(sum.equals(&l.scale(c1 + c2), Tolerance::uniform(1e-14)).unwrap());
        let other = Layer::from_fields(vec![psi2(), psi1()]).unwrap();
        assert!(matches!(l.collinear_add(&other, tol), Err(Error::NotCollinear)));
    }

    #[test]
    fn composition() {
        let l1 = Layer::from_fields(vec![psi1()]).unwrap();
        let l2 = Layer::from_fields(vec![psi2()]).unwrap();
        let l3 = Layer::from_fields(vec![psi1().scaled(c(0.0, 1.0))]).unwrap();
        let left = l1.compose(&l2).unwrap().compose(&l3).unwrap();
        let right = l1.compose(&l2.compose(&l3).unwrap()).unwrap();
        assert!(left.equals(&right, Tolerance::uniform(1e-15)).unwrap());

        assert_eq!(Layer::vacuum(c(1.0, 0.0)).compose(&l1).unwrap(), l1);

        let (a, b) = (c(2.0, 1.0), c(0.0, -3.0));
        let lhs = l1.scale(a).compose(&l2.scale(b)).unwrap();
        let rhs = l1.compose(&l2).unwrap().scale(a * b);
        assert!(lhs.equals(&rhs, Tolerance::uniform(1e-15)).unwrap());

        let direct = Layer::from_fields(vec![psi1(), psi2()]).unwrap();
        assert!(l1.compose(&l2).unwrap().equals(&direct, Tolerance::uniform(1e-15)).unwrap());
    }

    #[test]
    fn values_at_sites() {
        let lat = Lattice3D::ring(2).unwrap();
        let d0 = OneParticleField::basis(lat, spec(), SiteIndex(0), 0).unwrap();
        let d1 = OneParticleField::basis(lat, spec(), SiteIndex(1), 0).unwrap();
        let l = Layer::from_fields(vec![d0.clone(), d1.clone()]).unwrap();
        let (amp, vals) = l.values_at(SiteIndex(0)).unwrap();
        assert_eq!(amp, c(1.0, 0.0));
        assert_eq!(vals, vec![vec![c(1.0, 0.0)], vec![c(0.0, 0.0)]]);

        let z = l.scale(c(0.0, 0.0));
        let (amp, vals) = z.values_at(SiteIndex(1)).unwrap();
        assert_eq!(amp, c(0.0, 0.0));
        assert!(vals.iter().flatten().all(|v| *v == c(0.0, 0.0)));
        assert!(l.values_at(SiteIndex(2)).is_err());
    }

    #[test]
    fn canonicalization_is_idempotent() {
        let l = Layer::from_fields(vec![psi1(), psi2()]).unwrap();
        let again = Layer::from_fields(l.factors().to_vec()).unwrap();
        assert!((again.amplitude() - 1.0).norm() < 1e-15);
        let rebuilt = again.scale(l.amplitude());
        assert!(rebuilt.equals(&l, Tolerance::uniform(1e-15)).unwrap());
        let rep = Layer::from_fields(l.representative()).unwrap();
        assert!(rep.equals(&l, Tolerance::uniform(1e-14)).unwrap());
    }

    #[test]
    fn noise_is_skipped_when_fixing_phase() {
        let f = field(&[c(1e-20, 1e-20), c(0.0, -1.0)]);
        let l = Layer::from_fields(vec![f]).unwrap();
        assert_eq!(l.factors()[0].amplitudes()[1], c(1.0, 0.0));
    }
}
