//! The ten acceptance criteria, one test each, each reporting a single
//! PASS/FAIL line.

use std::f64::consts::{FRAC_PI_2, PI};

use adscausal::achronal::{resolve_lift, LimitSetSamples};
use adscausal::ambient::{
    causal_sign, conformal_chronology_margin, conformal_to_ads, cyl_to_cone, uv_rotation, validate_isometry,
    AmbientVector, CylPoint, DEFAULT_EPS,
};
use adscausal::cli::{hyperbolicity_fuchsian, hyperbolicity_split};
use adscausal::convex::ConvexCore;
use adscausal::cosmo::{cosmological_time, geodesic_point, gradient_residual, PastHorizon};
use adscausal::domain::RegularDomain;
use adscausal::euler::{
    basepoint, bounded_cochain, cocycle, cocycle_detail, conjugate_generators, gamma2_generators, line_distance,
    mobius_on_lines, random_isometry, semi_conjugacy,
};
use adscausal::reps::{
    default_fuchsian, fuchsian_limit_set, perturb, reduced_words, sample_limit_set, split_limit_set, GroupRep,
    SampleMode,
};
use adscausal::sphere::{disk_mesh, random_unit};
use adscausal::symspace::{
    crown_flat, crown_search, hilbert_distance, plane_distance, standard_crown, Chart, Crown, DualBody,
};
use adscausal::Error;
use adscausal_acceptance::verdict;
use nalgebra::{DVector, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn perturbed(seed: u64) -> GroupRep {
    perturb(&default_fuchsian(2).unwrap(), 0.05, seed).unwrap()
}

fn lifted_samples(rep: &GroupRep, word_length: usize) -> LimitSetSamples {
    let mut s = sample_limit_set(rep, word_length, SampleMode::FixedPoints).unwrap();
    s.lifted = Some(resolve_lift(&s, DEFAULT_EPS, 1e-9).unwrap());
    s
}

#[test]
fn c01_causality_models_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut checked, mut marginal, mut disagreements) = (0, 0, 0);
    for k in 0..10_000 {
        let n = 2 + k % 2;
        // an ideal point and an AdS point of the affine domain {u > 0}
        let tx = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
        let x = cyl_to_cone(&CylPoint::new(tx, random_unit(n, &mut rng)).unwrap());
        let mut w = random_unit(n + 1, &mut rng);
        w[n] = w[n].abs().max(1e-3);
        let y = conformal_to_ads(rng.random_range(-FRAC_PI_2..FRAC_PI_2), &w).unwrap();
        let sign = causal_sign(&x, &y.normalized().unwrap(), DEFAULT_EPS).unwrap();
        if sign == 0 {
            marginal += 1;
            continue;
        }
        let margin = conformal_chronology_margin(&x, &y, DEFAULT_EPS).unwrap();
        checked += 1;
        if (margin > 0.0) != (sign > 0) {
            disagreements += 1;
        }
    }
    verdict(
        1,
        "sign test vs conformal chronology",
        disagreements == 0 && checked + marginal == 10_000,
        &format!("{checked} pairs, {marginal} in the marginal band, {disagreements} disagreements"),
    );
}

#[test]
fn c02_split_domain_identity() {
    let resolution = 128;
    let mut worst_field: f64 = 0.0;
    let mut worst_boundary: f64 = 0.0;
    let mut tol = 0.0;
    let mut evaluated = 0;
    for (p, q) in [(1, 1), (1, 2), (2, 1)] {
        let n = p + q;
        let domain = RegularDomain::new(split_limit_set(p, q, resolution, 7).unwrap()).unwrap();
        let mesh = disk_mesh(n, resolution, 7);
        tol = 2.0 * mesh.spacing;
        // every point in the plane case; a fixed stride of the 3-sphere mesh
        let stride = if n == 2 { 1 } else { 97 };
        for (i, (w, &on_boundary)) in mesh.points.iter().zip(&mesh.boundary).enumerate() {
            if i % stride != 0 {
                continue;
            }
            evaluated += 1;
            let dp = w.rows(0, p).norm().min(1.0).asin();
            let dq = w.rows(p, q).norm().min(1.0).asin();
            let (lo, hi) = domain.f_fields(w);
            worst_field = worst_field.max((lo - dq).abs()).max((hi - (FRAC_PI_2 - dp)).abs());
            if on_boundary {
                worst_boundary = worst_boundary.max((dp + dq - FRAC_PI_2).abs()).max((hi - lo).abs());
            }
        }
    }
    verdict(
        2,
        "split fields f- = d_q, f+ = pi/2 - d_p",
        worst_field <= tol && worst_boundary <= tol,
        &format!("{evaluated} mesh points, max field error {worst_field:.3e}, boundary {worst_boundary:.3e}, bound {tol:.3e}"),
    );
}

struct SandwichStats {
    points: usize,
    skipped: usize,
    worst_margin: f64,
    max_core_width: f64,
    strict_points: usize,
    max_outer_gap: f64,
}

fn sandwich(s: LimitSetSamples, resolution: usize) -> SandwichStats {
    let core = ConvexCore::new(&s, 1e-9).unwrap();
    let domain = RegularDomain::new(s).unwrap();
    let mesh = disk_mesh(2, resolution, 3);
    let mut st = SandwichStats {
        points: 0,
        skipped: 0,
        worst_margin: f64::INFINITY,
        max_core_width: 0.0,
        strict_points: 0,
        max_outer_gap: 0.0,
    };
    for w in mesh.interior() {
        let (lo, hi) = domain.f_fields(w);
        match core.core_boundary(w, 1e-9) {
            Ok((a, b)) => {
                st.points += 1;
                st.worst_margin = st.worst_margin.min(a - lo).min(b - a).min(hi - b);
                st.max_core_width = st.max_core_width.max(b - a);
                let gap = (a - lo).min(hi - b);
                st.max_outer_gap = st.max_outer_gap.max(gap);
                if gap > mesh.spacing {
                    st.strict_points += 1;
                }
            }
            Err(Error::DegenerateCore(_)) => st.skipped += 1,
            Err(e) => panic!("{e}"),
        }
    }
    st
}

#[test]
fn c03_sandwich_and_strictness() {
    let resolution = 24;
    let spacing = disk_mesh(2, resolution, 3).spacing;
    let fuchsian = sandwich(fuchsian_limit_set(2, 64, 0).unwrap(), resolution);
    let split = sandwich(split_limit_set(1, 1, 64, 0).unwrap(), resolution);
    let mut all = vec![("fuchsian", &fuchsian), ("split", &split)];
    let perturbed: Vec<SandwichStats> = (1..=5).map(|k| sandwich(lifted_samples(&perturbed(k), 5), resolution)).collect();
    all.extend(perturbed.iter().map(|s| ("perturbed", s)));

    let worst = all.iter().map(|(_, s)| s.worst_margin).fold(f64::INFINITY, f64::min);
    let points: usize = all.iter().map(|(_, s)| s.points).sum();
    let skipped: Vec<usize> = all.iter().map(|(_, s)| s.skipped).collect();
    let sandwich_ok = worst >= -1e-6;
    let fuchsian_ok = fuchsian.max_core_width < 1e-6;
    let strict_ok = split.strict_points > 0;
    verdict(
        3,
        "sandwich, Fuchsian core collapse, split strict gaps",
        sandwich_ok && fuchsian_ok && strict_ok,
        &format!(
            "sandwich {} over {points} fibers (skipped per rep {skipped:?}, worst margin {worst:.2e}); \
             Fuchsian |F+ - F-| <= {:.2e}; split(1,1) strict outer gaps at {} points \
             (largest gap {:.2e} vs spacing {spacing:.3e})",
            if sandwich_ok { "holds" } else { "violated" },
            fuchsian.max_core_width,
            split.strict_points,
            split.max_outer_gap,
        ),
    );
}

#[test]
fn c04_cosmological_time() {
    let domain = RegularDomain::new(lifted_samples(&perturbed(11), 6)).unwrap();
    let horizon = PastHorizon::new(&domain, &disk_mesh(2, 128, 0), DEFAULT_EPS).unwrap();
    let probes = disk_mesh(2, 16, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let steps = [1e-2, 1e-3, 1e-4];
    let (mut geodesics, mut range_ok, mut worst_err) = (0, true, 0.0f64);
    let (mut slopes, mut ratios, mut linear) = (Vec::new(), Vec::new(), true);
    for w in probes.interior() {
        if geodesics == 100 {
            break;
        }
        let (lo, hi) = domain.f_fields(w);
        let theta = lo + 0.3 * (hi - lo).min(FRAC_PI_2);
        let Ok(cp) = cosmological_time(&domain, &conformal_to_ads(theta, w).unwrap(), &horizon, 200, 1e-9) else {
            continue;
        };
        geodesics += 1;
        range_ok &= cp.tau > 0.0 && cp.tau < FRAC_PI_2;
        for frac in [0.3, 0.6, 0.9] {
            let t = frac * cp.tau;
            let c = cosmological_time(&domain, &geodesic_point(&cp, t), &horizon, 200, 1e-9).unwrap();
            range_ok &= c.tau > 0.0 && c.tau < FRAC_PI_2;
            worst_err = worst_err.max((c.tau - t).abs());
        }
        if geodesics % 10 == 1 {
            let v = AmbientVector::from_dvector({
                let mut d = DVector::zeros(4);
                d.rows_mut(2, 2).copy_from(&random_unit(2, &mut rng));
                d
            })
            .unwrap();
            let r: Vec<f64> = steps
                .iter()
                .map(|&h| gradient_residual(&domain, &cp, &v, &horizon, h, 200).unwrap())
                .collect();
            // least-squares slope of log r against log h, reported only
            let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
            let ys: Vec<f64> = r.iter().map(|r| r.max(1e-300).ln()).collect();
            let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
            let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
            slopes.push(num / den);
            // decreasing, and tenfold per decade once h is below the scale of
            // the horizon's conical pieces
            let ratio = r[2] / r[1];
            linear &= r[0] > r[1] && r[1] > r[2] && (0.05..=0.2).contains(&ratio);
            ratios.push(ratio);
        }
    }
    let (smin, smax) = slopes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
    let (rmin, rmax) = ratios.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
    verdict(
        4,
        "cosmological time along realizing geodesics",
        geodesics == 100 && range_ok && worst_err < 1e-4 && linear,
        &format!(
            "{geodesics} geodesics, horizon {} samples, max |tau(c(t)) - t| = {worst_err:.2e}, \
             gradient residual r(1e-4)/r(1e-3) in [{rmin:.4}, {rmax:.4}], \
             log-log slopes over all three steps in [{smin:.3}, {smax:.3}] ({} probes)",
            horizon.len(),
            slopes.len()
        ),
    );
}

fn projective_match(c: &Crown, undo: &adscausal::Isometry, target: &Crown) -> f64 {
    let norm = |v: &AmbientVector| {
        let v = undo.apply(v);
        v.coords() / v.norm()
    };
    let found: Vec<DVector<f64>> = c.vertices().iter().map(|v| norm(v)).collect();
    target
        .vertices()
        .iter()
        .map(|t| {
            found
                .iter()
                .map(|f| (f - t.coords()).amax().min((f + t.coords()).amax()))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

#[test]
fn c05_crown_dichotomy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = random_isometry(2, 1.0, &mut rng);
    let s = split_limit_set(1, 1, 32, 0).unwrap();
    let moved: Vec<AmbientVector> = s.points().iter().map(|p| g.apply(p).normalized().unwrap()).collect();
    let planted = crown_search(&LimitSetSamples::new(moved, DEFAULT_EPS).unwrap(), 1e-9);
    let standard = standard_crown(2);
    let recovery = planted
        .iter()
        .map(|c| projective_match(c, &g.inverse(), &standard))
        .fold(f64::INFINITY, f64::min);

    let mut counts = vec![crown_search(&sample_limit_set(&default_fuchsian(2).unwrap(), 8, SampleMode::FixedPoints).unwrap(), 1e-6).len()];
    let mut samples = 0;
    for k in 1..=5 {
        let ls = sample_limit_set(&perturbed(k), 8, SampleMode::FixedPoints).unwrap();
        samples += ls.len();
        counts.push(crown_search(&ls, 1e-6).len());
    }
    let pass = !planted.is_empty() && recovery < 1e-8 && counts.iter().all(|&c| c == 0);
    verdict(
        5,
        "crowns in split limit sets only",
        pass,
        &format!(
            "split(1,1) under a planted isometry: {} crown(s), standard quadruple recovered to {recovery:.1e}; \
             Fuchsian and 5 perturbed ({samples} perturbed samples, word length 8): {counts:?}",
            planted.len()
        ),
    );
}

#[test]
fn c06_crown_flat_is_euclidean() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let g = random_isometry(2, 1.0, &mut rng);
    let c = standard_crown(2).transform(g.matrix()).unwrap();
    let grid: Vec<(f64, f64)> = (0..5)
        .flat_map(|i| (0..5).map(move |j| (-1.0 + 0.5 * i as f64, -1.0 + 0.5 * j as f64)))
        .collect();
    let planes: Vec<_> = grid.iter().map(|&(s, t)| crown_flat(&c, s, t).unwrap()).collect();
    let kappa = plane_distance(&crown_flat(&c, 0.0, 0.0).unwrap(), &crown_flat(&c, 1.0, 0.0).unwrap()).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..grid.len() {
        for j in i + 1..grid.len() {
            let expect = kappa * f64::hypot(grid[i].0 - grid[j].0, grid[i].1 - grid[j].1);
            let d = plane_distance(&planes[i], &planes[j]).unwrap();
            worst = worst.max((d - expect).abs() / expect);
        }
    }
    verdict(
        6,
        "crown flat distances are Euclidean",
        worst < 1e-6,
        &format!("kappa = {kappa:.12}, max relative error {worst:.2e} over 300 pairs"),
    );
}

#[test]
fn c07_hilbert_probe() {
    let ts: Vec<f64> = (1..=8).map(f64::from).collect();
    let split = hyperbolicity_split(2, 1e-9, &ts).unwrap();
    let fuchsian = hyperbolicity_fuchsian(64, &ts).unwrap();
    let increasing = split.windows(2).all(|w| w[1].1 > w[0].1);
    let split_grows = split[7].1 > 2.0 * split[0].1;
    let fuchsian_bounded = fuchsian.iter().all(|&(_, d)| d < 2.0 * fuchsian[0].1);

    let gens: Vec<AmbientVector> = (0..256)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / 256.0;
            AmbientVector::new(vec![1.0, 0.0, a.cos(), a.sin()]).unwrap().normalized().unwrap()
        })
        .collect();
    let body = DualBody { generators: &gens };
    let z = AmbientVector::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let chart = Chart::new(&z);
    let klein = (1..10)
        .map(|k| {
            let s = k as f64 / 10.0;
            let p = AmbientVector::new(vec![1.0, 0.0, s, 0.0]).unwrap();
            (hilbert_distance(&body, &chart, &z, &p).unwrap() - s.atanh()).abs()
        })
        .fold(0.0, f64::max);
    verdict(
        7,
        "Hilbert divergence profiles",
        increasing && split_grows && fuchsian_bounded && klein < 1e-6,
        &format!(
            "split {:.3} -> {:.3} ({}), Fuchsian {:.3} -> {:.3} (max {:.3}), Klein ball error {klein:.1e}",
            split[0].1,
            split[7].1,
            if increasing { "strictly increasing" } else { "not monotone" },
            fuchsian[0].1,
            fuchsian[7].1,
            fuchsian.iter().map(|p| p.1).fold(0.0, f64::max),
        ),
    );
}

#[test]
fn c08_euler_cocycle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x0 = basepoint(2);
    let mut hist = [0usize; 3];
    let mut worst: f64 = 0.0;
    let mut out_of_range = 0;
    for _ in 0..10_000 {
        let g1 = random_isometry(2, 2.0, &mut rng);
        let g2 = random_isometry(2, 2.0, &mut rng);
        validate_isometry(g1.matrix(), 1e-9).unwrap();
        validate_isometry(g2.matrix(), 1e-9).unwrap();
        match cocycle_detail(&g1, &g2, &x0) {
            Ok(c) => {
                hist[(c.value + 1) as usize] += 1;
                worst = worst.max(c.residual);
            }
            Err(_) => out_of_range += 1,
        }
    }
    let mut broken = 0;
    for _ in 0..1000 {
        let g: Vec<_> = (0..3).map(|_| random_isometry(2, 2.0, &mut rng)).collect();
        let c = |a: &adscausal::Isometry, b: &adscausal::Isometry| cocycle(a, b, &x0).unwrap();
        if c(&g[0], &g[1]) + c(&g[0].compose(&g[1]), &g[2]) != c(&g[1], &g[2]) + c(&g[0], &g[1].compose(&g[2])) {
            broken += 1;
        }
    }
    let r = validate_isometry(&uv_rotation(2, 2.0 * PI / 3.0), 1e-9).unwrap();
    let rot = cocycle(&r, &r, &x0).unwrap();
    verdict(
        8,
        "bounded Euler cocycle",
        out_of_range == 0 && worst < 1e-6 && broken == 0 && rot == -1,
        &format!(
            "10000 pairs: histogram (-1, 0, 1) = {hist:?}, {out_of_range} failures, max residual {worst:.1e}; \
             {broken} of 1000 triples break the cocycle identity; c(R, R) = {rot} for R = rotation by 2pi/3"
        ),
    );
}

#[test]
fn c09_bounded_cochain() {
    let rep = default_fuchsian(2).unwrap();
    let graph = fuchsian_limit_set(2, 64, 0).unwrap().lifted.unwrap();
    let words = reduced_words(rep.generators.len(), 4);
    let result = bounded_cochain(&rep, &graph, &words, 1e-6);
    let (pass, detail) = match &result {
        Ok(c) => (
            c.values.iter().all(|&a| a == 0) && c.max_abs <= 2 && c.pairs_checked > 0,
            format!(
                "{} words, a = 0 on all of them, coboundary exact on {} pairs, max |a| = {}",
                c.words.len(),
                c.pairs_checked,
                c.max_abs
            ),
        ),
        Err(e) => (false, format!("{}: {e}", e.name())),
    };
    verdict(9, "bounded cochain of the Fuchsian representation", pass, &detail);
}

#[test]
fn c10_semi_conjugacy() {
    let g = gamma2_generators();
    let h = Matrix2::new(1.3, 0.4, 0.2, (1.0 + 0.4 * 0.2) / 1.3);
    let conj = semi_conjugacy(&g, &conjugate_generators(&g, &h), 512, 3).unwrap();
    let err_h = conj
        .mesh
        .iter()
        .zip(&conj.values)
        .map(|(a, f)| line_distance(mobius_on_lines(&h, *a), *f))
        .fold(0.0, f64::max);
    let id = semi_conjugacy(&g, &g, 512, 3).unwrap();
    let err_id = id.mesh.iter().zip(&id.values).map(|(a, f)| line_distance(*a, *f)).fold(0.0, f64::max);
    verdict(
        10,
        "semi-conjugacy from the invariant circle",
        err_h < 1e-6 && err_id < 1e-6 && conj.inversions == 0 && id.inversions == 0,
        &format!(
            "mesh 512: conjugate case error {err_h:.1e}, identity case error {err_id:.1e}, inversions {} and {}",
            conj.inversions, id.inversions
        ),
    );
}
