use layerfield::fock_kg::{Ladder, TruncatedFock};
use layerfield::layers::{gauge_act, Layer, Tolerance};
use layerfield::lattice::{Lattice3D, Region, SiteIndex};
use layerfield::locality::{glue, restrict};
use layerfield::multilayer::{rho, rho_inv, MultiLayerState, Sector, Symmetry};
use layerfield::onebody::{OneBodyMatrix, ParticleSpec, Statistics};
use layerfield::operators::{measure_project, HamiltonianSpec, OperatorRep, PairPotential, Propagator, Scheme};
use layerfield::oracle::{dense_apply, dense_lift, dense_outer};
use layerfield::random;
use layerfield::verify::{dense_of_layer, layer_deviation};
use num_complex::Complex64;
use proptest::prelude::*;

fn lattice() -> impl Strategy<Value = Lattice3D> {
    (1usize..=3, 1usize..=3, 1usize..=2, 0.3f64..2.0).prop_map(|(x, y, z, h)| Lattice3D::new([x, y, z], h).unwrap())
}

fn specs(max: usize) -> impl Strategy<Value = Vec<ParticleSpec>> {
    prop::collection::vec(1usize..=2, 1..=max).prop_map(|dims| {
        dims.into_iter()
            .enumerate()
            .map(|(j, d)| ParticleSpec::new(format!("p{j}"), d, Statistics::Distinguishable, 1.0).unwrap())
            .collect()
    })
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn distance_is_a_metric(lat in lattice(), a in 0usize..18, b in 0usize..18, k in 0usize..18) {
        let n = lat.site_count();
        let (a, b, k) = (SiteIndex(a % n), SiteIndex(b % n), SiteIndex(k % n));
        let dab = lat.distance(a, b).unwrap();
        prop_assert_eq!(dab, lat.distance(b, a).unwrap());
        prop_assert_eq!(lat.distance(a, a).unwrap(), 0.0);
        prop_assert!(dab <= lat.distance(a, k).unwrap() + lat.distance(k, b).unwrap() + 1e-12);
    }

    #[test]
    fn laplacian_kills_constants(lat in lattice(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let v = vec![c(re, im); lat.site_count()];
        let out = lat.laplacian_apply(&v).unwrap();
        prop_assert!(out.iter().all(|z| z.norm() < 1e-12 * (1.0 + c(re, im).norm()) / lat.spacing().powi(2)));
    }

    #[test]
    fn canonical_layer_is_gauge_invariant(lat in lattice(), sp in specs(4), seed in any::<u64>()) {
        let mut rng = random::seeded(seed);
        let fields = random::fields(&mut rng, lat, &sp).unwrap();
        let g = random::gauge_element(&mut rng, sp.len()).unwrap();
        let a = Layer::from_fields(fields.clone()).unwrap();
        let b = Layer::from_fields(gauge_act(&fields, &g).unwrap()).unwrap();
        prop_assert!(layer_deviation(&a, &b) <= 1e-12);
        prop_assert!(a.is_canonical(1e-12));
        let again = Layer::from_fields(a.factors().to_vec()).unwrap().scale(a.amplitude());
        prop_assert!(layer_deviation(&again, &a) <= 1e-13);
    }

    #[test]
    fn layer_expansion_matches_dense_outer(lat in lattice(), sp in specs(3), seed in any::<u64>()) {
        let mut rng = random::seeded(seed);
        let fields = random::fields(&mut rng, lat, &sp).unwrap();
        let layer = Layer::from_fields(fields.clone()).unwrap();
        let via_layer = rho_inv(&MultiLayerState::from_layer(&layer).unwrap()).unwrap();
        let direct = dense_outer(&fields).unwrap();
        let scale = direct.coefficients().iter().fold(0.0f64, |m, z| m.max(z.norm()));
        prop_assert!(max_diff(via_layer.coefficients(), direct.coefficients()) <= 1e-14 * scale.max(1.0));
        prop_assert!(max_diff(dense_of_layer(&layer).unwrap().coefficients(), direct.coefficients()) <= 1e-14 * scale.max(1.0));
    }

    #[test]
    fn rho_roundtrip_and_inner_product(lat in lattice(), sp in specs(2), seed in any::<u64>()) {
        let mut rng = random::seeded(seed);
        let sector = Sector::distinguishable(lat, sp).unwrap();
        let t = random::dense_state(&mut rng, &sector).unwrap();
        let u = random::dense_state(&mut rng, &sector).unwrap();
        let back = rho_inv(&rho(&t)).unwrap();
        prop_assert_eq!(back.coefficients(), t.coefficients());
        let (m, n) = (rho(&t), rho(&u));
        let mn = m.inner(&n).unwrap();
        prop_assert!((mn - n.inner(&m).unwrap().conj()).norm() <= 1e-12 * mn.norm().max(1e-300));
        prop_assert!(m.inner(&m).unwrap().re >= 0.0);
    }

    #[test]
    fn symmetrization_is_a_projector(n in 2usize..=3, sites in 2usize..=4, fermion in any::<bool>(), seed in any::<u64>()) {
        let mut rng = random::seeded(seed);
        let lat = Lattice3D::ring(sites).unwrap();
        let sector = Sector::identical(lat, ParticleSpec::scalar("x"), n, Symmetry::None).unwrap();
        let sym = if fermion { Symmetry::Antisymmetric } else { Symmetry::Symmetric };
        let m = rho(&random::dense_state(&mut rng, &sector).unwrap());
        let once = m.symmetrize(sym).unwrap();
        let twice = once.symmetrize(sym).unwrap();
        prop_assert!(once.symmetry_defect(sym) <= 1e-14 * once.max_abs().max(1.0));
        for (k, v) in twice.terms() {
            prop_assert!((once.coefficient(k) - v).norm() <= 1e-14 * once.max_abs());
        }
    }

    #[test]
    fn glue_inverts_restrict(lat in lattice(), seed in any::<u64>(), parts in 1usize..=8) {
        let mut rng = random::seeded(seed);
        let sp = vec![ParticleSpec::new("a", 2, Statistics::Distinguishable, 1.0).unwrap(), ParticleSpec::scalar("b")];
        let layers: Vec<Layer> = (0..3)
            .map(|_| Layer::from_fields(random::fields(&mut rng, lat, &sp).unwrap()).unwrap().scale(random::complex(&mut rng)))
            .collect();
        let regions = random::partition(&mut rng, &lat, parts);
        let pieces: Vec<_> = regions.iter().map(|r| restrict(&layers, r, &lat).unwrap()).collect();
        prop_assert_eq!(glue(&pieces).unwrap(), layers.clone());
        let singles: Vec<_> = random::singletons(&lat).iter().map(|r| restrict(&layers, r, &lat).unwrap()).collect();
        prop_assert_eq!(glue(&singles).unwrap(), layers);
    }

    #[test]
    fn restrict_commutes_with_scaling(lat in lattice(), seed in any::<u64>(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let mut rng = random::seeded(seed);
        let layer = Layer::from_fields(random::fields(&mut rng, lat, &[ParticleSpec::scalar("a")]).unwrap()).unwrap();
        let region = random::region(&mut rng, &lat);
        let k = c(re, im);
        let r = restrict(&[layer.scale(k)], &region, &lat).unwrap();
        prop_assert_eq!(r.records[0].amplitude, layer.amplitude() * k);
    }

    #[test]
    fn slot_operator_matches_oracle(lat in lattice(), sp in specs(2), seed in any::<u64>(), slot_pick in 0usize..2) {
        let mut rng = random::seeded(seed);
        let sector = Sector::distinguishable(lat, sp).unwrap();
        let slot = slot_pick % sector.n_particles();
        let d = sector.slot_dim(slot);
        let a = random::matrix(&mut rng, d);
        let t = random::dense_state(&mut rng, &sector).unwrap();
        let got = rho_inv(&rho(&t).apply_slot(slot, &OneBodyMatrix::from_dense(&a).unwrap()).unwrap()).unwrap();
        let want = dense_apply(&dense_lift(&a, slot, &sector), &t).unwrap();
        let scale = want.coefficients().iter().fold(0.0f64, |m, z| m.max(z.norm()));
        prop_assert!(max_diff(got.coefficients(), want.coefficients()) <= 1e-12 * scale.max(1e-300));
    }

    #[test]
    fn change_basis_preserves_norm(lat in lattice(), sp in specs(2), seed in any::<u64>()) {
        let mut rng = random::seeded(seed);
        let sector = Sector::distinguishable(lat, sp).unwrap();
        let m = rho(&random::dense_state(&mut rng, &sector).unwrap());
        let us: Vec<_> = (0..sector.n_particles()).map(|j| random::unitary(&mut rng, sector.slot_dim(j))).collect();
        let n = m.change_basis(&us).unwrap().norm();
        prop_assert!((n - m.norm()).abs() <= 1e-12 * m.norm());
    }

    #[test]
    fn measurement_probabilities_sum_to_one(seed in any::<u64>()) {
        let mut rng = random::seeded(seed);
        let lat = Lattice3D::ring(3).unwrap();
        let sector = Sector::distinguishable(lat, vec![ParticleSpec::scalar("a"); 2]).unwrap();
        let m = rho(&random::dense_state(&mut rng, &sector).unwrap());
        let o = OperatorRep::from_dense(&random::hermitian(&mut rng, 9), &sector).unwrap();
        let outcomes = measure_project(&m, &o).unwrap();
        let total: f64 = outcomes.iter().map(|x| x.probability).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        for x in outcomes.iter().filter_map(|x| x.post_state.as_ref()) {
            prop_assert!((x.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn crank_nicolson_is_unitary(seed in any::<u64>(), charge in -2.0f64..2.0, dt in 0.001f64..0.2) {
        let mut rng = random::seeded(seed);
        let lat = Lattice3D::ring(5).unwrap();
        let sector = Sector::distinguishable(lat, vec![ParticleSpec::scalar("a"); 2]).unwrap();
        let m = rho(&random::dense_state(&mut rng, &sector).unwrap());
        let h = OperatorRep::hamiltonian(&HamiltonianSpec::with_potential(PairPotential::SoftenedCoulomb { charge, softening: None }), &sector).unwrap();
        let p = Propagator::new(&h, dt, Scheme::CrankNicolson, 1.0).unwrap();
        let e0 = h.expectation(&m).unwrap().re;
        let next = p.step(&m).unwrap();
        prop_assert!((next.norm() - m.norm()).abs() <= 1e-10 * m.norm());
        prop_assert!((h.expectation(&next).unwrap().re - e0).abs() <= 1e-9 * e0.abs().max(1.0));
    }

    #[test]
    fn fock_map_is_an_isometry(seed in any::<u64>(), n in 0usize..=3) {
        let mut rng = random::seeded(seed);
        let space = TruncatedFock::ring(3, 2).unwrap();
        let v = random::complex_vec(&mut rng, space.dim());
        let want: f64 = (0..space.dim()).filter(|&i| space.occupation(i).iter().sum::<usize>() == n).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        let got = space.to_multilayer(&v, n).unwrap().norm();
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1e-300));
    }

    #[test]
    fn number_operator_counts(mode in 0usize..3, cutoff in 1usize..=4) {
        let space = TruncatedFock::ring(3, cutoff).unwrap();
        let num = space.ladder(mode, Ladder::Create).unwrap().matmul(&space.ladder(mode, Ladder::Annihilate).unwrap());
        for idx in 0..space.dim() {
            prop_assert_eq!(num.get(idx, idx).as_integer(), Some(space.occupation(idx)[mode] as i64));
        }
    }

    #[test]
    fn equals_is_tolerance_monotone(lat in lattice(), seed in any::<u64>()) {
        let mut rng = random::seeded(seed);
        let sp = [ParticleSpec::scalar("a"), ParticleSpec::scalar("b")];
        let l = Layer::from_fields(random::fields(&mut rng, lat, &sp).unwrap()).unwrap();
        prop_assert!(l.equals(&l, Tolerance::uniform(0.0)).unwrap());
        let bumped = l.scale(c(1.0 + 1e-6, 0.0));
        prop_assert!(!bumped.equals(&l, Tolerance::uniform(1e-9)).unwrap());
        prop_assert!(bumped.equals(&l, Tolerance::uniform(1e-5)).unwrap());
    }
}

#[test]
fn region_complement_partitions() {
    let lat = Lattice3D::new([3, 2, 2], 1.0).unwrap();
    let a = Region::new([0, 5, 11]);
    let b = a.complement(&lat);
    assert_eq!(a.len() + b.len(), 12);
    assert!(a.sites().all(|s| !b.contains(s)));
}
