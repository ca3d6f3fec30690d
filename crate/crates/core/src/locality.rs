//! Restriction of layered states to spatial regions and reconstruction from
//! a partition.
//!
//! A bare equivalence class cannot be cut into pieces and glued back, since
//! each piece could be rescaled independently. Restrictions therefore carry
//! the canonical factor values themselves, the layer amplitudes, a stable
//! layer identifier and the tag of the canonical-form convention they were
//! written in. Parts only glue when their tags agree.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice3D, Region};
use crate::layers::{Layer, CANONICAL_GAUGE_TAG};
use crate::onebody::{OneParticleField, ParticleSpec};

/// Relative tolerance for amplitude agreement across parts.
pub const AMPLITUDE_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub id: usize,
    pub amplitude: Complex64,
    pub specs: Vec<ParticleSpec>,
    /// Per factor: values on the region's sites in increasing order, each
    /// site contributing `internal_dim` consecutive entries.
    pub factors: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Restriction {
    pub gauge_tag: String,
    pub lattice: Lattice3D,
    pub region: Region,
    pub records: Vec<LayerRecord>,
}

impl Restriction {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Records each layer's canonical factor values on `region`, together with
/// its amplitude and identifier (its position in `layers`).
pub fn restrict(layers: &[Layer], region: &Region, lattice: &Lattice3D) -> Result<Restriction> {
    if let Some(bad) = region.sites().find(|&s| s >= lattice.site_count()) {
        return Err(Error::ForeignSite(bad));
    }
    let mut records = Vec::with_capacity(layers.len());
    for (id, layer) in layers.iter().enumerate() {
        if let Some(lat) = layer.lattice() {
            if lat != lattice {
                return Err(Error::ShapeMismatch(format!("layer {id} lives on a different lattice")));
            }
        }
        let factors = layer
            .factors()
            .iter()
            .map(|f| {
                let d = f.internal_dim();
                region.sites().flat_map(|s| f.amplitudes()[s * d..(s + 1) * d].iter().copied()).collect()
            })
            .collect();
        records.push(LayerRecord {
            id,
            amplitude: layer.amplitude(),
            specs: layer.factors().iter().map(|f| f.spec().clone()).collect(),
            factors,
        });
    }
    Ok(Restriction { gauge_tag: CANONICAL_GAUGE_TAG.to_string(), lattice: *lattice, region: region.clone(), records })
}

/// Reassembles full layers from restrictions over a partition of the lattice.
pub fn glue(parts: &[Restriction]) -> Result<Vec<Layer>> {
    let first = parts.first().ok_or_else(|| Error::PartitionError("no parts".into()))?;
    for p in parts {
        if p.gauge_tag != first.gauge_tag {
            return Err(Error::GaugeMismatch(first.gauge_tag.clone(), p.gauge_tag.clone()));
        }
    }
    if first.gauge_tag != CANONICAL_GAUGE_TAG {
        return Err(Error::GaugeMismatch(CANONICAL_GAUGE_TAG.to_string(), first.gauge_tag.clone()));
    }
    let lattice = first.lattice;
    if parts.iter().any(|p| p.lattice != lattice) {
        return Err(Error::PartitionError("parts describe different lattices".into()));
    }

    let n = lattice.site_count();
    let mut owner = vec![None; n];
    for (pi, p) in parts.iter().enumerate() {
        for s in p.region.sites() {
            if s >= n {
                return Err(Error::ForeignSite(s));
            }
            if let Some(prev) = owner[s].replace(pi) {
                return Err(Error::PartitionError(format!("site {s} claimed by parts {prev} and {pi}")));
            }
        }
    }
    if let Some(gap) = owner.iter().position(Option::is_none) {
        return Err(Error::PartitionError(format!("site {gap} is not covered")));
    }

    let reference: BTreeMap<usize, &LayerRecord> = first.records.iter().map(|r| (r.id, r)).collect();
    if reference.len() != first.records.len() {
        return Err(Error::RecordMismatch("duplicate layer identifiers".into()));
    }
    let mut assembled: BTreeMap<usize, Vec<Vec<Complex64>>> = reference
        .iter()
        .map(|(&id, r)| (id, r.specs.iter().map(|s| vec![Complex64::new(0.0, 0.0); s.dim_on(&lattice)]).collect()))
        .collect();

    for p in parts {
        if p.records.len() != reference.len() {
            return Err(Error::RecordMismatch("parts carry different layer sets".into()));
        }
        for rec in &p.records {
            let base = reference.get(&rec.id).ok_or_else(|| Error::RecordMismatch(format!("unknown layer {}", rec.id)))?;
            if rec.specs != base.specs {
                return Err(Error::RecordMismatch(format!("layer {} has inconsistent particle specs", rec.id)));
            }
            let scale = rec.amplitude.norm().max(base.amplitude.norm());
            if (rec.amplitude - base.amplitude).norm() > AMPLITUDE_MATCH_TOL * scale {
                return Err(Error::AmplitudeConflict(rec.id));
            }
            let target = assembled.get_mut(&rec.id).expect("same id set");
            for (j, (vals, spec)) in rec.factors.iter().zip(&rec.specs).enumerate() {
                let d = spec.internal_dim;
                if vals.len() != p.region.len() * d {
                    return Err(Error::LengthMismatch { expected: p.region.len() * d, got: vals.len() });
                }
                for (chunk, s) in vals.chunks(d).zip(p.region.sites()) {
                    target[j][s * d..(s + 1) * d].copy_from_slice(chunk);
                }
            }
            if rec.factors.len() != rec.specs.len() {
                return Err(Error::RecordMismatch(format!("layer {} factor count mismatch", rec.id)));
            }
        }
    }

    let mut out = Vec::with_capacity(assembled.len());
    for (id, factors) in assembled {
        let base = reference[&id];
        let fields = factors
            .into_iter()
            .zip(&base.specs)
            .map(|(amps, spec)| OneParticleField::from_amplitudes(lattice, spec.clone(), amps))
            .collect::<Result<Vec<_>>>()?;
        let layer = Layer::from_canonical_parts(base.amplitude, fields, 1e-12).ok_or(Error::NotCanonical(id))?;
        out.push(layer);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::onebody::Statistics;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn layers(lat: Lattice3D) -> Vec<Layer> {
        let spin = ParticleSpec::new("e", 2, Statistics::Fermion, 1.0).unwrap();
        let scalar = ParticleSpec::scalar("q");
        let n = lat.site_count();
        let f1 = OneParticleField::from_amplitudes(
            lat,
            spin.clone(),
            (0..2 * n).map(|i| c((i as f64).sin(), (i as f64 * 0.5).cos())).collect(),
        )
        .unwrap();
        let f2 = OneParticleField::from_amplitudes(lat, scalar, (0..n).map(|i| c(1.0 + i as f64, -0.5)).collect()).unwrap();
        vec![
            Layer::from_fields(vec![f1.clone(), f2.clone()]).unwrap().scale(c(0.3, 2.0)),
            Layer::from_fields(vec![f1, f2]).unwrap().scale(c(0.0, 0.0)),
        ]
    }

    #[test]
    fn full_region_keeps_everything() {
        let lat = Lattice3D::new([2, 2, 1], 0.5).unwrap();
        let ls = layers(lat);
        let r = restrict(&ls, &Region::all(&lat), &lat).unwrap();
        assert_eq!(r.records[0].factors[0].len(), 8);
        assert_eq!(glue(&[r]).unwrap(), ls);
    }

    #[test]
    fn empty_region_keeps_amplitudes() {
        let lat = Lattice3D::ring(3).unwrap();
        let ls = layers(lat);
        let r = restrict(&ls, &Region::empty(), &lat).unwrap();
        assert!(r.records.iter().all(|rec| rec.factors.iter().all(Vec::is_empty)));
        assert_eq!(r.records[0].amplitude, ls[0].amplitude());
    }

    #[test]
    fn two_part_roundtrip_is_exact() {
        let lat = Lattice3D::new([3, 2, 1], 1.0).unwrap();
        let ls = layers(lat);
        let a = Region::new([0, 4, 5]);
        let parts = [restrict(&ls, &a, &lat).unwrap(), restrict(&ls, &a.complement(&lat), &lat).unwrap()];
        assert_eq!(glue(&parts).unwrap(), ls);
    }

    #[test]
    fn glue_guards() {
        let lat = Lattice3D::ring(4).unwrap();
        let ls = layers(lat);
        let a = Region::new([0, 1]);
        let b = a.complement(&lat);
        let pa = restrict(&ls, &a, &lat).unwrap();
        let mut pb = restrict(&ls, &b, &lat).unwrap();

        let mut foreign = pb.clone();
        foreign.gauge_tag = "unit-norm/other".into();
        assert!(matches!(glue(&[pa.clone(), foreign]), Err(Error::GaugeMismatch(..))));

        let overlap = restrict(&ls, &Region::new([1, 2, 3]), &lat).unwrap();
        assert!(matches!(glue(&[pa.clone(), overlap]), Err(Error::PartitionError(_))));
        let gap = restrict(&ls, &Region::new([2]), &lat).unwrap();
        assert!(matches!(glue(&[pa.clone(), gap]), Err(Error::PartitionError(_))));

        pb.records[0].amplitude *= 2.0;
        assert!(matches!(glue(&[pa, pb]), Err(Error::AmplitudeConflict(0))));

        assert!(matches!(restrict(&ls, &Region::new([9]), &lat), Err(Error::ForeignSite(9))));
    }

    #[test]
    fn restriction_commutes_with_scaling() {
        let lat = Lattice3D::ring(3).unwrap();
        let ls = layers(lat);
        let k = c(-1.5, 0.25);
        let scaled: Vec<_> = ls.iter().map(|l| l.scale(k)).collect();
        let r = restrict(&scaled, &Region::new([1]), &lat).unwrap();
        assert_eq!(r.records[0].amplitude, ls[0].amplitude() * k);
    }

    #[test]
    fn json_roundtrip() {
        let lat = Lattice3D::ring(3).unwrap();
        let r = restrict(&layers(lat), &Region::new([0, 2]), &lat).unwrap();
        let s = r.to_json().unwrap();
        assert_eq!(Restriction::from_json(&s).unwrap(), r);
        assert_eq!(Restriction::from_json(&s).unwrap().to_json().unwrap(), s);
    }
}
