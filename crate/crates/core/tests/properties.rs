use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use adscausal::achronal::{filling, graph_check, is_achronal, resolve_lift, AchronalClass, LimitSetSamples};
use adscausal::ambient::{
    causal_sign, conformal_chronology_margin, conformal_to_ads, cyl_to_cone, ads_to_conformal, AmbientVector, CylPoint,
    DEFAULT_EPS,
};
use adscausal::convex::ConvexCore;
use adscausal::cosmo::{cosmological_time, PastHorizon};
use adscausal::domain::RegularDomain;
use adscausal::euler::{basepoint, canonical_section, cocycle, random_isometry};
use adscausal::reps::{
    default_fuchsian, fuchsian_limit_set, perturb, sample_limit_set, so22_from_pslpair, split_limit_graph, split_limit_set,
    SampleMode,
};
use adscausal::sphere::disk_mesh;
use adscausal::Isometry;
use adscausal::sphere::sphere_samples;
use adscausal::symspace::{crown_search, gauss_map, plane_distance, standard_crown, TimelikePlane};
use nalgebra::{DMatrix, DVector, Matrix2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn av(c: &[f64]) -> AmbientVector {
    AmbientVector::new(c.to_vec()).unwrap()
}

fn unit(v: &[f64]) -> Option<DVector<f64>> {
    let d = DVector::from_column_slice(v);
    let n = d.norm();
    (n > 1e-3).then(|| d / n)
}

/// A point of the open upper hemisphere of R^{n+1}.
fn disk_point(v: &[f64], h: f64) -> Option<DVector<f64>> {
    let mut w = v.to_vec();
    w.push(h);
    unit(&w)
}

fn sl2() -> impl Strategy<Value = Matrix2<f64>> {
    (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0).prop_filter_map("a near zero", |(a, b, c)| {
        (a.abs() > 0.2).then(|| Matrix2::new(a, b, c, (1.0 + b * c) / a))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn form_is_bilinear(
        x in proptest::collection::vec(-3.0f64..3.0, 5),
        y in proptest::collection::vec(-3.0f64..3.0, 5),
        z in proptest::collection::vec(-3.0f64..3.0, 5),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let (x, y, z) = (av(&x), av(&y), av(&z));
        let lhs = (&(&x * a) + &(&y * b)).inner(&z);
        let rhs = a * x.inner(&z) + b * y.inner(&z);
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn isometries_preserve_the_form(
        seed in any::<u64>(),
        x in proptest::collection::vec(-3.0f64..3.0, 5),
        y in proptest::collection::vec(-3.0f64..3.0, 5),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_isometry(3, 1.0, &mut rng);
        let (x, y) = (av(&x), av(&y));
        prop_assert!((g.apply(&x).inner(&g.apply(&y)) - x.inner(&y)).abs() < 1e-9);
    }

    /// Inside the affine domain {u > 0}: an ideal point x is causally
    /// related to y iff the conformal margin |dtheta| - d is positive.
    #[test]
    fn sign_test_matches_conformal_model(
        tx in -1.5f64..1.5,
        sx in proptest::collection::vec(-1.0f64..1.0, 2),
        ty in -1.5f64..1.5,
        wy in proptest::collection::vec(-1.0f64..1.0, 2),
        h in 0.05f64..1.0,
    ) {
        let (Some(sx), Some(wy)) = (unit(&sx), disk_point(&wy, h)) else { return Ok(()) };
        let x = cyl_to_cone(&CylPoint::new(tx, sx).unwrap());
        let y = conformal_to_ads(ty, &wy).unwrap();
        let product = x.inner(&y.normalized().unwrap());
        prop_assume!(product.abs() > 1e-6);
        let margin = conformal_chronology_margin(&x, &y, DEFAULT_EPS).unwrap();
        prop_assert_eq!(causal_sign(&x, &y.normalized().unwrap(), DEFAULT_EPS).unwrap(), if margin > 0.0 { 1 } else { -1 });
    }

    #[test]
    fn conformal_round_trip(t in -3.0f64..3.0, w in proptest::collection::vec(-1.0f64..1.0, 2), h in 0.05f64..1.0) {
        let Some(w) = disk_point(&w, h) else { return Ok(()) };
        let y = conformal_to_ads(t, &w).unwrap();
        prop_assert!((y.q() + 1.0).abs() < 1e-9);
        let (t2, w2) = ads_to_conformal(&y, 1e-9).unwrap();
        prop_assert!((t2 - t).abs() < 1e-9);
        prop_assert!((w2 - w).amax() < 1e-9);
    }

    /// Boundary restrictions of the split fields: delta_p + delta_q = pi/2.
    #[test]
    fn split_boundary_restrictions_are_complementary(s in proptest::collection::vec(-1.0f64..1.0, 3), p in 1usize..3) {
        let Some(s) = unit(&s) else { return Ok(()) };
        let q = 3 - p;
        let g = split_limit_graph(p, q, std::slice::from_ref(&s)).unwrap();
        let dp = s.rows(0, p).norm().clamp(0.0, 1.0).asin();
        prop_assert!((g.values()[0] + dp - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn cocycle_takes_three_values(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g1 = random_isometry(2, 2.0, &mut rng);
        let g2 = random_isometry(2, 2.0, &mut rng);
        let c = cocycle(&g1, &g2, &basepoint(2)).unwrap();
        prop_assert!((-1..=1).contains(&c));
    }

    #[test]
    fn cocycle_identity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = basepoint(2);
        let g: Vec<_> = (0..3).map(|_| random_isometry(2, 2.0, &mut rng)).collect();
        let lhs = cocycle(&g[0], &g[1], &x0).unwrap() + cocycle(&g[0].compose(&g[1]), &g[2], &x0).unwrap();
        let rhs = cocycle(&g[1], &g[2], &x0).unwrap() + cocycle(&g[0], &g[1].compose(&g[2]), &x0).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn deck_shift_commutes_with_lifting(seed in any::<u64>(), k in -3i64..3, t in -3.0f64..3.0, a in 0.0f64..6.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_isometry(2, 1.5, &mut rng);
        let s = canonical_section(&g, &basepoint(2));
        let p = CylPoint::new(t, DVector::from_vec(vec![a.cos(), a.sin()])).unwrap();
        let d = s.shifted(k).apply(&p).unwrap().theta - s.apply(&p).unwrap().theta;
        prop_assert!((d - 2.0 * PI * k as f64).abs() < 1e-9);
    }

    #[test]
    fn bridge_is_a_homomorphism(g1 in sl2(), g2 in sl2(), h1 in sl2(), h2 in sl2()) {
        let a = so22_from_pslpair(&(g1 * h1), &(g2 * h2)).unwrap();
        let b = so22_from_pslpair(&g1, &g2).unwrap().compose(&so22_from_pslpair(&h1, &h2).unwrap());
        let scale = 1.0 + a.matrix().amax();
        prop_assert!((a.matrix() - b.matrix()).amax() < 1e-10 * scale);
    }

    #[test]
    fn plane_distance_is_a_metric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let uv = TimelikePlane::new(&av(&[1.0, 0.0, 0.0, 0.0]), &av(&[0.0, 1.0, 0.0, 0.0])).unwrap();
        let planes: Vec<TimelikePlane> =
            (0..3).map(|_| uv.transform(random_isometry(2, 0.8, &mut rng).matrix())).collect();
        let d = |i: usize, j: usize| plane_distance(&planes[i], &planes[j]).unwrap();
        prop_assert!((d(0, 1) - d(1, 0)).abs() < 1e-12 * (1.0 + d(0, 1)));
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
        prop_assert!(d(0, 0) < 1e-6);
    }

    /// A standard crown moved by a random isometry is found again.
    #[test]
    fn planted_crowns_are_found(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_isometry(2, 1.0, &mut rng);
        let c = standard_crown(2);
        let mut pts: Vec<AmbientVector> = c.vertices().iter().map(|v| g.apply(v).normalized().unwrap()).collect();
        pts.extend(sphere_samples(2, 8, seed).iter().map(|s| cyl_to_cone(&CylPoint::new(0.0, s.clone()).unwrap())));
        let s = LimitSetSamples::new(pts, DEFAULT_EPS).unwrap();
        prop_assert!(!crown_search(&s, 1e-9).is_empty());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Both descriptions of E(Lambda) agree, E is causally convex, and
    /// filling does not change it.
    #[test]
    fn split_domain_membership(
        t in -0.2f64..1.8,
        w in proptest::collection::vec(-1.0f64..1.0, 2),
        t2 in -0.2f64..1.8,
        w2 in proptest::collection::vec(-1.0f64..1.0, 2),
        h in 0.1f64..1.0,
    ) {
        let (Some(w), Some(w2)) = (disk_point(&w, h), disk_point(&w2, h)) else { return Ok(()) };
        let s = split_limit_set(1, 1, 24, 0).unwrap();
        let domain = RegularDomain::new(s.clone()).unwrap();
        let core = ConvexCore::new(&s, 1e-9).unwrap();
        let a = conformal_to_ads(t, &w).unwrap();
        let b = conformal_to_ads(t2, &w2).unwrap();
        let ma = domain.contains(&a).unwrap();
        prop_assume!(ma.field_margin.abs() > 1e-6);
        prop_assert_eq!(ma.inside, ma.product_margin > 0.0);
        prop_assert_eq!(ma.inside, core.max_dual_product(&a) < 0.0);

        let mut filled = filling(&s, 4, 1e-9).unwrap();
        filled.lifted = Some(resolve_lift(&filled, 1e-9, 1e-9).unwrap());
        let filled = RegularDomain::new(filled).unwrap();
        prop_assert_eq!(filled.contains(&a).unwrap().inside, ma.inside);

        let mb = domain.contains(&b).unwrap();
        if ma.inside && mb.inside && a.inner(&b) < 0.0 {
            let m = (&a + &b).to_ads().unwrap();
            prop_assert!(domain.contains(&m).unwrap().inside);
        }
    }
}

#[test]
fn sampled_graphs_have_consistent_characterizations() {
    for s in [fuchsian_limit_set(2, 32, 0).unwrap(), split_limit_set(1, 1, 32, 0).unwrap(), split_limit_set(1, 2, 12, 0).unwrap()] {
        let g = s.lifted.clone().unwrap();
        let report = graph_check(&g);
        let class = is_achronal(&s, DEFAULT_EPS).unwrap().class;
        assert!(report.passed);
        assert!(report.characterizations_agree);
        assert_ne!(class, AchronalClass::NotAchronal);
        let pts = s.points();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                assert!((pts[i].coords() - pts[j].coords()).amax() > 1e-9);
            }
        }
    }
}

struct Cosmo {
    domain: RegularDomain,
    horizon: PastHorizon,
}

/// A quasi-Fuchsian domain: perturbed generators, limit set from fixed
/// points of words up to length 5.
fn cosmo() -> &'static Cosmo {
    static CELL: OnceLock<Cosmo> = OnceLock::new();
    CELL.get_or_init(|| {
        let rep = perturb(&default_fuchsian(2).unwrap(), 0.05, 2).unwrap();
        let mut s = sample_limit_set(&rep, 5, SampleMode::FixedPoints).unwrap();
        s.lifted = Some(resolve_lift(&s, DEFAULT_EPS, 1e-9).unwrap());
        let domain = RegularDomain::new(s).unwrap();
        let horizon = PastHorizon::new(&domain, &disk_mesh(2, 32, 0), DEFAULT_EPS).unwrap();
        Cosmo { domain, horizon }
    })
}

fn xy_rotation(a: f64) -> Isometry {
    let mut m = DMatrix::identity(4, 4);
    m[(2, 2)] = a.cos();
    m[(2, 3)] = -a.sin();
    m[(3, 2)] = a.sin();
    m[(3, 3)] = a.cos();
    Isometry::unchecked(m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cosmological_time_increases_to_the_future(
        w in proptest::collection::vec(-1.0f64..1.0, 2),
        h in 0.2f64..1.0,
        a in 0.05f64..0.4,
        b in 0.05f64..0.4,
    ) {
        let Some(w) = disk_point(&w, h) else { return Ok(()) };
        let c = cosmo();
        let (lo, hi) = c.domain.f_fields(&w);
        let span = (hi - lo).min(FRAC_PI_2);
        let t1 = lo + a * span;
        let t2 = t1 + b * span;
        let tau = |t: f64| cosmological_time(&c.domain, &conformal_to_ads(t, &w).unwrap(), &c.horizon, 100, 1e-9);
        let (x1, x2) = (tau(t1), tau(t2));
        prop_assume!(x1.is_ok() && x2.is_ok());
        let (x1, x2) = (x1.unwrap(), x2.unwrap());
        prop_assert!(x1.tau > 0.0 && x2.tau < FRAC_PI_2);
        prop_assert!(x2.tau > x1.tau);
    }

    /// Rotations by multiples of the sample spacing preserve the sampled
    /// round circle, and with it tau.
    #[test]
    fn cosmological_time_is_invariant(
        k in 1usize..64,
        w in proptest::collection::vec(-1.0f64..1.0, 2),
        h in 0.3f64..1.0,
        a in 0.1f64..0.9,
    ) {
        let Some(w) = disk_point(&w, h) else { return Ok(()) };
        let s = fuchsian_limit_set(2, 32, 0).unwrap();
        let domain = RegularDomain::new(s).unwrap();
        let horizon = PastHorizon::new(&domain, &disk_mesh(2, 24, 0), DEFAULT_EPS).unwrap();
        let (lo, hi) = domain.f_fields(&w);
        let x = conformal_to_ads(lo + a * (hi - lo).min(FRAC_PI_2), &w).unwrap();
        let g = xy_rotation(k as f64 * PI / 32.0);
        let t1 = cosmological_time(&domain, &x, &horizon, 100, 1e-9);
        let t2 = cosmological_time(&domain, &g.apply(&x), &horizon, 100, 1e-9);
        match (t1, t2) {
            (Ok(a), Ok(b)) => prop_assert!((a.tau - b.tau).abs() < 1e-9),
            (Err(a), Err(b)) => {
                prop_assert_eq!(a.name(), b.name());
                prop_assume!(false);
            }
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    /// Growing the generator set grows the hull and shrinks the dual.
    #[test]
    fn hull_and_dual_are_monotone(seed in any::<u64>(), y in proptest::collection::vec(-1.0f64..1.0, 4)) {
        let s = split_limit_set(1, 1, 16, 0).unwrap();
        let pts = s.points();
        let sub = LimitSetSamples::new(pts.iter().step_by(2).cloned().collect(), DEFAULT_EPS).unwrap();
        let small = ConvexCore::new(&sub, 1e-9).unwrap();
        let big = ConvexCore::new(&s, 1e-9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // a random positive combination of the subset lies in both hulls
        let mut comb = DVector::zeros(4);
        for p in sub.points() {
            comb += p.coords() * rand::Rng::random_range(&mut rng, 0.0..1.0);
        }
        let inside = AmbientVector::from_dvector(comb.normalize()).unwrap();
        prop_assert!(small.hull_contains(&inside, 1e-7).unwrap());
        prop_assert!(big.hull_contains(&inside, 1e-7).unwrap());
        let Some(y) = unit(&y) else { return Ok(()) };
        let y = AmbientVector::from_dvector(y).unwrap();
        if small.hull_contains(&y, 1e-9).unwrap() {
            prop_assert!(big.hull_contains(&y, 1e-7).unwrap());
        }
        if big.dual_contains(&y, 0.0) {
            prop_assert!(small.dual_contains(&y, 0.0));
        }
    }

    /// Distinct points of the totally geodesic slice have distinct Gauss
    /// images.
    #[test]
    fn gauss_map_is_injective_on_the_slice(
        a in proptest::collection::vec(-1.0f64..1.0, 2),
        b in proptest::collection::vec(-1.0f64..1.0, 2),
        h in 0.2f64..1.0,
    ) {
        let (Some(wa), Some(wb)) = (disk_point(&a, h), disk_point(&b, h)) else { return Ok(()) };
        prop_assume!((&wa - &wb).norm() > 1e-3);
        let plane = |w: &DVector<f64>| {
            let x = conformal_to_ads(0.0, w).unwrap();
            // tangent frame of the slice v = 0 at x
            let frame: Vec<AmbientVector> = [2usize, 3]
                .iter()
                .map(|&i| {
                    let mut e = DVector::zeros(4);
                    e[i] = 1.0;
                    AmbientVector::from_dvector(&e + x.coords() * x.inner(&AmbientVector::from_dvector(e.clone()).unwrap()))
                        .unwrap()
                })
                .collect();
            gauss_map(&x, &frame).unwrap()
        };
        prop_assert!(plane_distance(&plane(&wa), &plane(&wb)).unwrap() > 0.0);
    }
}

/// Integer b(g) with sigma'(g) = delta^b sigma(g) for the sections at two
/// basepoints.
fn section_shift(g: &Isometry, x0: &CylPoint, x1: &CylPoint) -> i64 {
    let a = canonical_section(g, x0).apply(x1).unwrap().theta;
    let b = canonical_section(g, x1).apply(x1).unwrap().theta;
    ((b - a) / (2.0 * PI)).round() as i64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Moving the basepoint changes the cocycle by the coboundary of the
    /// section shift.
    #[test]
    fn basepoint_change_is_a_coboundary(seed in any::<u64>(), a in 0.0f64..6.28) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = basepoint(2);
        let x1 = CylPoint::new(0.0, DVector::from_vec(vec![a.cos(), a.sin()])).unwrap();
        let g1 = random_isometry(2, 2.0, &mut rng);
        let g2 = random_isometry(2, 2.0, &mut rng);
        let g12 = g1.compose(&g2);
        let b = |g: &Isometry| section_shift(g, &x0, &x1);
        let c0 = cocycle(&g1, &g2, &x0).unwrap();
        let c1 = cocycle(&g1, &g2, &x1).unwrap();
        prop_assert_eq!(c1, c0 + b(&g12) - b(&g1) - b(&g2));
    }
}

#[test]
fn basepoint_change_can_alter_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x0 = basepoint(2);
    let x1 = CylPoint::new(0.0, DVector::from_vec(vec![0.0, 1.0])).unwrap();
    let differ = (0..2000)
        .filter(|_| {
            let g1 = random_isometry(2, 2.0, &mut rng);
            let g2 = random_isometry(2, 2.0, &mut rng);
            cocycle(&g1, &g2, &x0).unwrap() != cocycle(&g1, &g2, &x1).unwrap()
        })
        .count();
    println!("{differ} of 2000 pairs change value with the basepoint");
    assert!(differ > 0);
}
