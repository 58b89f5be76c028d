//! Lifting to the universal cover R x S^{n-1} of the Einstein universe: the
//! canonical section, the integer-valued Euler cocycle, bounded cochains,
//! the sup construction of invariant graphs, and circle semi-conjugacies
//! read from invariant circles in Ein_2.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::achronal::LipschitzGraph;
use crate::ambient::{signature_matrix, spherical_distance, uv_rotation, CylPoint, Isometry};
use crate::error::{Error, Result};
use crate::reps::{coords_to_sl2, so22_from_pslpair, GroupRep};

pub const DEFAULT_STEPS: usize = 64;
const MAX_STEPS: usize = 1 << 16;
const COCYCLE_TOL: f64 = 1e-6;
/// Cochain bound from the vanishing of the bounded class.
pub const SHIFT_BOUND: i64 = 2;

/// The basepoint (theta = 0, first axis of S^{n-1}).
pub fn basepoint(n: usize) -> CylPoint {
    let mut s = DVector::zeros(n);
    s[0] = 1.0;
    CylPoint::new(0.0, s).expect("unit vector")
}

/// Image of a cylinder point under a matrix, with theta in (-pi, pi].
fn image_rep(m: &DMatrix<f64>, p: &CylPoint) -> (f64, DVector<f64>) {
    let n = p.sphere().len();
    let (s, c) = p.theta.sin_cos();
    let mut w = DVector::zeros(n + 2);
    w[0] = c;
    w[1] = s;
    w.rows_mut(2, n).copy_from(p.sphere());
    let w = m * w;
    let r = w[0].hypot(w[1]);
    (w[1].atan2(w[0]), w.rows(2, n).into_owned() / r)
}

fn nearest_rep(theta: f64, reference: f64) -> f64 {
    theta + TAU * ((reference - theta) / TAU).round()
}

/// A lift of an isometry to the universal cover, fixed by its value at the
/// basepoint.
#[derive(Clone, Debug)]
pub struct LiftedMap {
    pub base: Isometry,
    pub theta_at_basepoint: f64,
    pub basepoint: CylPoint,
}

impl LiftedMap {
    /// Composition with the deck generator k times (theta shifted by 2 pi k).
    pub fn shifted(&self, k: i64) -> LiftedMap {
        LiftedMap {
            theta_at_basepoint: self.theta_at_basepoint + TAU * k as f64,
            ..self.clone()
        }
    }

    pub fn apply(&self, p: &CylPoint) -> Result<CylPoint> {
        let theta = lift_evaluate(self, p, DEFAULT_STEPS)?;
        let (_, s) = image_rep(self.base.matrix(), p);
        CylPoint::new(theta, s)
    }

    /// self o other
    pub fn compose(&self, other: &LiftedMap) -> Result<LiftedMap> {
        let y = other.apply(&self.basepoint)?;
        Ok(LiftedMap {
            base: self.base.compose(&other.base),
            theta_at_basepoint: lift_evaluate(self, &y, DEFAULT_STEPS)?,
            basepoint: self.basepoint.clone(),
        })
    }

    pub fn inverse(&self) -> Result<LiftedMap> {
        let inv = canonical_section(&self.base.inverse(), &self.basepoint);
        // self o sigma(g^{-1}) lifts the identity, hence is a pure shift
        let y = inv.apply(&self.basepoint)?;
        let t = lift_evaluate(self, &y, DEFAULT_STEPS)?;
        let k = ((t - self.basepoint.theta) / TAU).round() as i64;
        Ok(inv.shifted(-k))
    }

    /// Integer m with self = shift(2 pi m) o sigma(base).
    pub fn shift_from_section(&self) -> i64 {
        let s = canonical_section(&self.base, &self.basepoint);
        ((self.theta_at_basepoint - s.theta_at_basepoint) / TAU).round() as i64
    }
}

/// sigma(g): the lift whose value at x0 has theta in [-pi, pi).
pub fn canonical_section(g: &Isometry, x0: &CylPoint) -> LiftedMap {
    let (t, _) = image_rep(g.matrix(), x0);
    let t = if t >= PI { t - TAU } else { t };
    LiftedMap {
        base: g.clone(),
        theta_at_basepoint: t,
        basepoint: x0.clone(),
    }
}

fn sphere_path(a: &DVector<f64>, b: &DVector<f64>) -> (f64, DVector<f64>) {
    let dot = a.dot(b).clamp(-1.0, 1.0);
    let mut t = b - a * dot;
    if t.norm() < 1e-12 {
        if dot > 0.0 {
            return (0.0, DVector::zeros(a.len()));
        }
        // antipodal: any orthogonal direction
        let k = a.iamin();
        let mut e = DVector::zeros(a.len());
        e[k] = 1.0;
        t = &e - a * a[k];
    }
    (spherical_distance(a.as_slice(), b.as_slice()), t.normalize())
}

fn lift_once(l: &LiftedMap, target: &CylPoint, steps: usize) -> Result<f64> {
    let x0 = &l.basepoint;
    let (omega, dir) = sphere_path(x0.sphere(), target.sphere());
    let dtheta = target.theta - x0.theta;
    let per_step = (omega + dtheta.abs()) / steps as f64;
    if per_step >= FRAC_PI_2 {
        return Err(Error::StepTooLarge { dtheta: per_step });
    }
    let m = l.base.matrix();
    let mut prev = l.theta_at_basepoint;
    for k in 1..=steps {
        let s = k as f64 / steps as f64;
        let sphere = x0.sphere() * (omega * s).cos() + &dir * (omega * s).sin();
        let p = CylPoint::new(x0.theta + s * dtheta, sphere)?;
        let (t, _) = image_rep(m, &p);
        let next = nearest_rep(t, prev);
        if (next - prev).abs() >= FRAC_PI_2 {
            return Err(Error::StepTooLarge { dtheta: (next - prev).abs() });
        }
        prev = next;
    }
    Ok(prev)
}

/// Theta of the lift at `target`, by continuation along the straight path
/// from the basepoint; the step count doubles while continuation is
/// ambiguous.
pub fn lift_evaluate(l: &LiftedMap, target: &CylPoint, steps: usize) -> Result<f64> {
    let mut steps = steps.max(1);
    loop {
        match lift_once(l, target, steps) {
            Err(Error::StepTooLarge { .. }) if steps < MAX_STEPS => steps *= 2,
            r => return r,
        }
    }
}

/// Lifted images of points ordered along a curve, continuing from the
/// previous image where consecutive points are close.
pub fn apply_along(l: &LiftedMap, pts: &[CylPoint]) -> Result<Vec<CylPoint>> {
    let m = l.base.matrix();
    let mut out: Vec<CylPoint> = Vec::with_capacity(pts.len());
    for (i, p) in pts.iter().enumerate() {
        let (t, s) = image_rep(m, p);
        let cont = i > 0 && {
            let q = &pts[i - 1];
            (p.theta - q.theta).abs() + spherical_distance(p.sphere().as_slice(), q.sphere().as_slice()) < 0.05
        };
        let theta = match out.last() {
            Some(prev) if cont => {
                let next = nearest_rep(t, prev.theta);
                if (next - prev.theta).abs() < 0.25 * PI {
                    next
                } else {
                    lift_evaluate(l, p, DEFAULT_STEPS)?
                }
            }
            _ => lift_evaluate(l, p, DEFAULT_STEPS)?,
        };
        out.push(CylPoint::new(theta, s)?);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CocycleValue {
    pub value: i64,
    pub residual: f64,
}

/// c(g1, g2) with sigma(g1 g2) = delta^c sigma(g1) sigma(g2), and the
/// distance of the unrounded value to the nearest integer.
pub fn cocycle_detail(g1: &Isometry, g2: &Isometry, x0: &CylPoint) -> Result<CocycleValue> {
    let s12 = canonical_section(&g1.compose(g2), x0);
    let s1 = canonical_section(g1, x0);
    let s2 = canonical_section(g2, x0);
    let y = s2.apply(x0)?;
    let t = lift_evaluate(&s1, &y, DEFAULT_STEPS)?;
    let raw = (s12.theta_at_basepoint - t) / TAU;
    let k = raw.round();
    let residual = (raw - k).abs();
    if residual > COCYCLE_TOL {
        return Err(Error::NonIntegerCocycle { residual });
    }
    let k = k as i64;
    if k.abs() > 1 {
        return Err(Error::OutOfRange { k });
    }
    Ok(CocycleValue { value: k, residual })
}

pub fn cocycle(g1: &Isometry, g2: &Isometry, x0: &CylPoint) -> Result<i64> {
    cocycle_detail(g1, g2, x0).map(|c| c.value)
}

/// Random element of SO0(2,n): a (u,v)-rotation times exp of a random
/// element of the Lie algebra with Frobenius norm `scale`.
pub fn random_isometry(n: usize, scale: f64, rng: &mut impl Rng) -> Isometry {
    let dim = n + 2;
    let mut a = DMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in r + 1..dim {
            let x: f64 = rng.sample(StandardNormal);
            a[(r, c)] = x;
            a[(c, r)] = -x;
        }
    }
    let a = &a * (scale / a.norm());
    let alpha = rng.random_range(-PI..PI);
    let m = uv_rotation(n, alpha) * (signature_matrix(n) * a).exp();
    Isometry::unchecked(m)
}

fn reduce(word: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(word.len());
    for &l in word {
        if out.last().is_some_and(|&p| p ^ 1 == l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Cochain {
    pub words: Vec<Vec<usize>>,
    pub values: Vec<i64>,
    pub pairs_checked: usize,
    pub max_abs: i64,
}

/// Value of a sampled graph at a sphere point by the McShane bounds:
/// midpoint and half-width of [max(f - d), min(f + d)].
pub fn graph_value(g: &LipschitzGraph, s: &DVector<f64>) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (a, &f) in g.samples().iter().zip(g.values()) {
        let d = spherical_distance(s.as_slice(), a.as_slice());
        lo = lo.max(f - d);
        hi = hi.min(f + d);
    }
    (0.5 * (lo + hi), 0.5 * (hi - lo).max(0.0))
}

/// Shift a(gamma) with delta^{-a} sigma(rho(gamma)) preserving the graph,
/// for every word; checks c(rho g1, rho g2) = a(g1 g2) - a(g1) - a(g2) on
/// all pairs whose product is in the list.
pub fn bounded_cochain(rep: &GroupRep, graph: &LipschitzGraph, words: &[Vec<usize>], tol: f64) -> Result<Cochain> {
    let x0 = basepoint(rep.n);
    let probe: Vec<CylPoint> = {
        let pts = graph.cyl_points();
        let stride = (pts.len() / 48).max(1);
        pts.into_iter().step_by(stride).collect()
    };
    let mut all: Vec<Vec<usize>> = vec![vec![]];
    all.extend(words.iter().map(|w| reduce(w)).filter(|w| !w.is_empty()));
    all.dedup();
    let mut values = Vec::with_capacity(all.len());
    for w in &all {
        let m = Isometry::unchecked(rep.evaluate(w));
        let s = canonical_section(&m, &x0);
        let mut shift: Option<i64> = None;
        for p in &probe {
            let img = s.apply(p)?;
            let (mid, half) = graph_value(graph, img.sphere());
            let a = ((img.theta - mid) / TAU).round() as i64;
            let off = img.theta - TAU * a as f64 - mid;
            let residual = (off.abs() - half).max(0.0);
            if residual > tol || shift.is_some_and(|b| b != a) {
                return Err(Error::GraphNotInvariant { residual: residual.max(off.abs()) });
            }
            shift = Some(a);
        }
        values.push(shift.unwrap_or(0));
    }
    let index: HashMap<&Vec<usize>, usize> = all.iter().enumerate().map(|(i, w)| (w, i)).collect();
    let mut pairs = 0;
    let mut mismatches = 0;
    for (i, w1) in all.iter().enumerate() {
        for (j, w2) in all.iter().enumerate() {
            let prod = reduce(&[w1.as_slice(), w2.as_slice()].concat());
            let Some(&k) = index.get(&prod) else { continue };
            let g1 = Isometry::unchecked(rep.evaluate(w1));
            let g2 = Isometry::unchecked(rep.evaluate(w2));
            let c = cocycle(&g1, &g2, &x0)?;
            pairs += 1;
            if c != values[k] - values[i] - values[j] {
                mismatches += 1;
            }
        }
    }
    if mismatches > 0 {
        return Err(Error::CoboundaryMismatch { count: mismatches });
    }
    let max_abs = values.iter().map(|a| a.abs()).max().unwrap_or(0);
    if max_abs > SHIFT_BOUND {
        return Err(Error::UnboundedShifts { max_shift: max_abs });
    }
    Ok(Cochain {
        words: all,
        values,
        pairs_checked: pairs,
        max_abs,
    })
}

/// sigma(g_i) shifted by 2 pi k_i for each generator.
pub fn generator_lifts(rep: &GroupRep, shifts: &[i64]) -> Vec<LiftedMap> {
    let x0 = basepoint(rep.n);
    rep.generators
        .iter()
        .zip(shifts.iter().chain(std::iter::repeat(&0)))
        .map(|(g, &k)| canonical_section(g, &x0).shifted(k))
        .collect()
}

/// Lifts of every reduced word up to `len`, with a(gamma) = -(shift of the
/// lift relative to sigma).
fn word_lifts(lifts: &[LiftedMap], len: usize) -> Result<Vec<(Vec<usize>, LiftedMap)>> {
    let mut letters = Vec::new();
    for l in lifts {
        letters.push(l.clone());
        letters.push(l.inverse()?);
    }
    let mut out = Vec::new();
    let mut frontier: Vec<(Vec<usize>, LiftedMap)> = Vec::new();
    for (i, l) in letters.iter().enumerate() {
        frontier.push((vec![i], l.clone()));
    }
    for _ in 0..len {
        out.extend(frontier.iter().cloned());
        let mut next = Vec::new();
        if out.len() > 200_000 {
            break;
        }
        for (w, m) in &frontier {
            for (i, l) in letters.iter().enumerate() {
                if w[0] ^ 1 == i {
                    continue;
                }
                let mut nw = vec![i];
                nw.extend_from_slice(w);
                next.push((nw, l.compose(m)?));
            }
        }
        frontier = next;
    }
    out.truncate(out.iter().take_while(|(w, _)| w.len() <= len).count());
    Ok(out)
}

/// Lower envelope max_i (theta_i - d(psi, psi_i)) on an equally spaced
/// circle mesh of m points, by seeding the neighbouring nodes and sweeping.
fn circle_envelope(points: &[(f64, f64)], m: usize, out: &mut [f64]) {
    let h = TAU / m as f64;
    for &(psi, theta) in points {
        let x = psi.rem_euclid(TAU) / h;
        let k0 = x.floor() as usize % m;
        let k1 = (k0 + 1) % m;
        let frac = x - x.floor();
        out[k0] = out[k0].max(theta - frac * h);
        out[k1] = out[k1].max(theta - (1.0 - frac) * h);
    }
    for _ in 0..2 {
        for k in 0..m {
            let prev = out[(k + m - 1) % m];
            out[k] = out[k].max(prev - h);
        }
        for k in (0..m).rev() {
            let next = out[(k + 1) % m];
            out[k] = out[k].max(next - h);
        }
    }
}

fn circle_mesh(m: usize) -> Vec<DVector<f64>> {
    (0..m)
        .map(|k| {
            let t = TAU * k as f64 / m as f64;
            DVector::from_vec(vec![t.cos(), t.sin()])
        })
        .collect()
}

/// Linear interpolation of values on the circle mesh.
fn circle_interp(values: &[f64], s: &DVector<f64>) -> f64 {
    let m = values.len();
    let x = s[1].atan2(s[0]).rem_euclid(TAU) / (TAU / m as f64);
    let k0 = x.floor() as usize % m;
    let frac = x - x.floor();
    values[k0] * (1.0 - frac) + values[(k0 + 1) % m] * frac
}

/// Depth-first walk over reduced words, prepending one letter at a time so
/// that only single generators are ever path-lifted.
struct SupAccumulator<'a> {
    letters: &'a [LiftedMap],
    mesh: &'a [DVector<f64>],
    circle: bool,
    values: &'a mut Vec<f64>,
    words: usize,
    max_shift: i64,
}

impl SupAccumulator<'_> {
    fn visit(&mut self, first: usize, lift: LiftedMap, img: Vec<CylPoint>, depth: usize) -> Result<()> {
        let a = lift.shift_from_section();
        self.max_shift = self.max_shift.max(a.abs());
        if a.abs() > SHIFT_BOUND {
            return Err(Error::UnboundedShifts { max_shift: a.abs() });
        }
        self.words += 1;
        if self.circle {
            let pts: Vec<(f64, f64)> = img.iter().map(|p| (p.sphere()[1].atan2(p.sphere()[0]), p.theta)).collect();
            circle_envelope(&pts, self.mesh.len(), self.values);
        } else {
            for (v, s) in self.values.iter_mut().zip(self.mesh) {
                for p in &img {
                    *v = v.max(p.theta - spherical_distance(s.as_slice(), p.sphere().as_slice()));
                }
            }
        }
        if depth == 0 {
            return Ok(());
        }
        for (i, l) in self.letters.iter().enumerate() {
            if first ^ 1 == i {
                continue;
            }
            let next = l.compose(&lift)?;
            let moved = apply_along(l, &img)?;
            self.visit(i, next, moved, depth - 1)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SupGraph {
    pub graph: LipschitzGraph,
    pub words: usize,
    /// max over generators and mesh points of |theta(g p) - f(g p)|
    pub invariance_residual: f64,
    pub max_shift: i64,
}

/// Pointwise sup over a word ball of the images of the zero graph. Circle
/// meshes (n = 2) use an exact envelope sweep; larger n evaluate the
/// McShane lower bound at every mesh point.
pub fn invariant_graph_sup(lifts: &[LiftedMap], mesh: &[DVector<f64>], ball: usize) -> Result<SupGraph> {
    let zero: Vec<CylPoint> = mesh
        .iter()
        .map(|s| CylPoint::new(0.0, s.clone()))
        .collect::<Result<_>>()?;
    let circle = mesh.first().is_some_and(|s| s.len() == 2);
    let mut values = vec![0.0; mesh.len()];
    let mut words = 1;
    let mut max_shift = 0;
    if !lifts.is_empty() && ball > 0 {
        let mut letters = Vec::new();
        for l in lifts {
            letters.push(l.clone());
            letters.push(l.inverse()?);
        }
        let mut acc = SupAccumulator {
            letters: &letters,
            mesh,
            circle,
            values: &mut values,
            words: 0,
            max_shift: 0,
        };
        for (i, l) in letters.iter().enumerate() {
            acc.visit(i, l.clone(), apply_along(l, &zero)?, ball - 1)?;
        }
        words += acc.words;
        max_shift = acc.max_shift;
    }
    let graph = LipschitzGraph::new(mesh.to_vec(), values.clone(), 1e-9)?;
    let pts = graph.cyl_points();
    let mut residual: f64 = 0.0;
    for l in lifts {
        for lm in [l.clone(), l.inverse()?] {
            for q in apply_along(&lm, &pts)? {
                let f = if circle {
                    circle_interp(&values, q.sphere())
                } else {
                    graph_value(&graph, q.sphere()).0
                };
                residual = residual.max((q.theta - f).abs());
            }
        }
    }
    Ok(SupGraph {
        graph,
        words,
        invariance_residual: residual,
        max_shift,
    })
}

fn line_angle(v: &Vector2<f64>) -> f64 {
    v[1].atan2(v[0]).rem_euclid(PI)
}

fn line_vec(a: f64) -> Vector2<f64> {
    Vector2::new(a.cos(), a.sin())
}

/// Distance between lines of R^2 given by angles mod pi.
pub fn line_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

fn act(m: &Matrix2<f64>, a: f64) -> f64 {
    line_angle(&(m * line_vec(a)))
}

/// Kernel and image lines of the rank-one matrix of a null vector of
/// (Mat_2, -det).
fn kernel_image(p: &CylPoint) -> (f64, f64) {
    let (s, c) = p.theta.sin_cos();
    let a = coords_to_sl2(&[c, s, p.sphere()[0], p.sphere()[1]]);
    let r0 = Vector2::new(a[(0, 0)], a[(0, 1)]);
    let r1 = Vector2::new(a[(1, 0)], a[(1, 1)]);
    let row = if r0.norm() >= r1.norm() { r0 } else { r1 };
    let c0 = Vector2::new(a[(0, 0)], a[(1, 0)]);
    let c1 = Vector2::new(a[(0, 1)], a[(1, 1)]);
    let col = if c0.norm() >= c1.norm() { c0 } else { c1 };
    (line_angle(&Vector2::new(-row[1], row[0])), line_angle(&col))
}

/// Monotone interpolant of kernel -> image pairs, in unwrapped angles.
#[derive(Clone, Debug)]
struct PairInterp {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl PairInterp {
    fn new(mut pairs: Vec<(f64, f64)>) -> Self {
        // unwrap both coordinates along the curve
        for i in 1..pairs.len() {
            let (px, py) = pairs[i - 1];
            let (x, y) = pairs[i];
            pairs[i] = (px + wrap_pi(x - px), py + wrap_pi(y - py));
        }
        if pairs.len() > 1 && pairs[pairs.len() - 1].0 < pairs[0].0 {
            pairs.reverse();
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        // one period wrap so every angle has neighbours
        x.push(x[0] + PI);
        y.push(y[0] + PI);
        Self { x, y }
    }

    fn eval(&self, a: f64) -> f64 {
        let x0 = self.x[0];
        let a = x0 + (a - x0).rem_euclid(PI);
        let k = self.x.partition_point(|&v| v <= a).clamp(1, self.x.len() - 1);
        let (xa, xb) = (self.x[k - 1], self.x[k]);
        let t = if xb > xa { (a - xa) / (xb - xa) } else { 0.0 };
        (self.y[k - 1] + t * (self.y[k] - self.y[k - 1])).rem_euclid(PI)
    }
}

fn wrap_pi(d: f64) -> f64 {
    let r = d.rem_euclid(PI);
    if r > FRAC_PI_2 { r - PI } else { r }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SemiConjugacy {
    /// line angles in [0, pi)
    pub mesh: Vec<f64>,
    pub values: Vec<f64>,
    /// max over mesh and generators of d(f(rho1 g p), rho2 g f(p))
    pub residual: f64,
    /// the same for the unrefined reading of the sup graph
    pub coarse_residual: f64,
    pub inversions: usize,
    /// most negative step of f between consecutive mesh points (0 if none)
    pub worst_inversion: f64,
    pub degree: f64,
    pub shifts: Vec<i64>,
    pub ball: usize,
}

/// Monotone f with f o rho1(g) = rho2(g) o f, read from the invariant
/// circle of A -> rho2(g) A rho1(g)^{-1} and refined by pulling each point
/// back through expanding words of rho1.
pub fn semi_conjugacy(rho1: &[Matrix2<f64>], rho2: &[Matrix2<f64>], mesh: usize, ball: usize) -> Result<SemiConjugacy> {
    if rho1.len() != rho2.len() || rho1.is_empty() {
        return Err(Error::InvalidInput("generator lists must have equal nonzero length".into()));
    }
    let gens = rho1
        .iter()
        .zip(rho2)
        .map(|(a, b)| so22_from_pslpair(b, a).map(|g| g.matrix().clone()))
        .collect::<Result<Vec<_>>>()?;
    let rep = GroupRep::custom(2, gens)?;
    let shifts = choose_shifts(&rep, ball.min(3))?;
    let lifts = generator_lifts(&rep, &shifts);
    let sphere = circle_mesh(2 * mesh);
    let sup = invariant_graph_sup(&lifts, &sphere, ball)?;
    let pairs: Vec<(f64, f64)> = sup.graph.cyl_points().iter().map(kernel_image).collect();
    let coarse = PairInterp::new(pairs);
    let letters: Vec<(Matrix2<f64>, Matrix2<f64>)> = rho1
        .iter()
        .zip(rho2)
        .flat_map(|(a, b)| {
            let ai = a.try_inverse().expect("unimodular");
            let bi = b.try_inverse().expect("unimodular");
            [(*a, *b), (ai, bi)]
        })
        .collect();
    let refiner = Refiner::new(&letters, coarse.clone());
    let grid: Vec<f64> = (0..mesh).map(|k| PI * k as f64 / mesh as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&a| refiner.eval(a)).collect();
    let residual_of = |f: &dyn Fn(f64) -> f64| -> f64 {
        let mut r: f64 = 0.0;
        for &a in &grid {
            let fa = f(a);
            for (g1, g2) in &letters {
                r = r.max(line_distance(f(act(g1, a)), act(g2, fa)));
            }
        }
        r
    };
    let residual = residual_of(&|a| refiner.eval(a));
    let coarse_residual = residual_of(&|a| coarse.eval(a));
    let mut inversions = 0;
    let mut worst_inversion: f64 = 0.0;
    let mut degree = 0.0;
    for k in 0..mesh {
        let step = wrap_pi(values[(k + 1) % mesh] - values[k]);
        if step < -1e-12 {
            inversions += 1;
        }
        worst_inversion = worst_inversion.min(step);
        degree += step;
    }
    Ok(SemiConjugacy {
        mesh: grid,
        values,
        residual,
        coarse_residual,
        inversions,
        worst_inversion,
        degree: degree / PI,
        shifts,
        ball,
    })
}

/// Generator shifts in [-2, 2] minimizing the largest |a| over a word ball.
fn choose_shifts(rep: &GroupRep, len: usize) -> Result<Vec<i64>> {
    let k = rep.generators.len();
    let range: Vec<i64> = (-SHIFT_BOUND..=SHIFT_BOUND).collect();
    let mut best: Option<(i64, i64, Vec<i64>)> = None;
    let combos = range.len().pow(k as u32);
    for idx in 0..combos {
        let mut shifts = Vec::with_capacity(k);
        let mut r = idx;
        for _ in 0..k {
            shifts.push(range[r % range.len()]);
            r /= range.len();
        }
        let lifts = generator_lifts(rep, &shifts);
        let Ok(wl) = word_lifts(&lifts, len) else { continue };
        let worst = wl.iter().map(|(_, l)| l.shift_from_section().abs()).max().unwrap_or(0);
        let size: i64 = shifts.iter().map(|s| s.abs()).sum();
        if best.as_ref().is_none_or(|b| (worst, size) < (b.0, b.1)) {
            best = Some((worst, size, shifts));
        }
    }
    match best {
        Some((w, _, s)) if w <= SHIFT_BOUND => Ok(s),
        _ => Err(Error::CochainMissing),
    }
}

fn mat_pow(m: &Matrix2<f64>, mut k: u64) -> Matrix2<f64> {
    let mut base = *m;
    let mut acc = Matrix2::identity();
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        base *= base;
        k >>= 1;
    }
    acc
}

/// Evaluates f(p) = rho2(w) f0(rho1(w)^{-1} p) for a word w chosen greedily
/// so that rho1(w)^{-1} expands strongly at p.
struct Refiner {
    /// (rho1 w^k, rho2 w^k, index of w)
    moves: Vec<(Matrix2<f64>, Matrix2<f64>, usize)>,
    coarse: PairInterp,
}

const TARGET_EXPANSION: f64 = 1e12;
/// Bounds the expansion of a single move so that |m^{-1} q| keeps digits.
const MAX_MOVE_NORM: f64 = 1e4;

impl Refiner {
    fn new(letters: &[(Matrix2<f64>, Matrix2<f64>)], coarse: PairInterp) -> Self {
        // powers 1..8, then a geometric ladder to about 2^24 for escaping
        // cusp neighbourhoods in few steps
        let mut powers: Vec<u64> = (1..=8).collect();
        let mut k = 8u64;
        while k < 1 << 24 {
            k = k * 3 / 2;
            powers.push(k);
        }
        // words of length <= 2, so that every cusp of a lattice with few
        // cusp classes is fixed by some candidate
        let mut words: Vec<(Matrix2<f64>, Matrix2<f64>)> = letters.to_vec();
        for (i, (a1, b1)) in letters.iter().enumerate() {
            for (j, (a2, b2)) in letters.iter().enumerate() {
                if i ^ 1 != j {
                    words.push((a1 * a2, b1 * b2));
                }
            }
        }
        let mut moves = Vec::new();
        for (i, (a, b)) in words.iter().enumerate() {
            for &k in &powers {
                let (pa, pb) = (mat_pow(a, k), mat_pow(b, k));
                if pa.norm() < MAX_MOVE_NORM && pb.norm() < MAX_MOVE_NORM {
                    moves.push((pa, pb, i));
                }
            }
        }
        Self { moves, coarse }
    }

    fn eval(&self, a: f64) -> f64 {
        // p = G q with G = rho1(w); track q as a unit vector and H = rho2(w)
        let mut q = line_vec(a);
        let mut h = Matrix2::identity();
        let mut expansion = 1.0;
        for _ in 0..400 {
            if expansion >= TARGET_EXPANSION {
                break;
            }
            // moving q to m^{-1} q expands by 1 / |m^{-1} q|^2
            let mut best: Option<(f64, usize)> = None;
            for (i, (ma, _, _)) in self.moves.iter().enumerate() {
                let inv = Matrix2::new(ma[(1, 1)], -ma[(0, 1)], -ma[(1, 0)], ma[(0, 0)]);
                let e = 1.0 / (inv * q).norm_squared();
                if best.is_none_or(|b| e > b.0) {
                    best = Some((e, i));
                }
            }
            let Some((e, i)) = best else { break };
            if e <= 1.0 + 1e-9 {
                // a parabolic fixed point: f(q) is the fixed line of the
                // partner letter
                if let Some(fixed) = self.fixed_partner(&q) {
                    return act(&h, fixed);
                }
                break;
            }
            let (ma, mb, _) = &self.moves[i];
            let inv = Matrix2::new(ma[(1, 1)], -ma[(0, 1)], -ma[(1, 0)], ma[(0, 0)]);
            let nq = inv * q;
            q = nq / nq.norm();
            h *= mb;
            h /= h.norm();
            expansion *= e;
        }
        act(&h, self.coarse.eval(line_angle(&q)))
    }

    fn fixed_partner(&self, q: &Vector2<f64>) -> Option<f64> {
        for (ma, mb, _) in &self.moves {
            let img = ma * q;
            let cross = (img[0] * q[1] - img[1] * q[0]).abs() / img.norm();
            if cross < 1e-12 {
                // eigenline of mb: for parabolic or hyperbolic take the one
                // nearest the coarse guess
                let guess = self.coarse.eval(line_angle(q));
                let tr = mb.trace();
                let disc = (tr * tr / 4.0 - 1.0).max(0.0).sqrt();
                let mut best: Option<(f64, f64)> = None;
                for lam in [tr / 2.0 + disc, tr / 2.0 - disc] {
                    let v = if (mb[(0, 1)]).abs() > 1e-14 {
                        Vector2::new(mb[(0, 1)], lam - mb[(0, 0)])
                    } else if (mb[(1, 0)]).abs() > 1e-14 {
                        Vector2::new(lam - mb[(1, 1)], mb[(1, 0)])
                    } else {
                        continue;
                    };
                    let ang = line_angle(&v);
                    let d = line_distance(ang, guess);
                    if best.is_none_or(|b| d < b.0) {
                        best = Some((d, ang));
                    }
                }
                return best.map(|b| b.1).or(Some(guess));
            }
        }
        None
    }
}

/// The level-two congruence generators [[1,2],[0,1]] and [[1,0],[2,1]].
pub fn gamma2_generators() -> Vec<Matrix2<f64>> {
    vec![Matrix2::new(1.0, 2.0, 0.0, 1.0), Matrix2::new(1.0, 0.0, 2.0, 1.0)]
}

/// h rho h^{-1} generator-wise.
pub fn conjugate_generators(rho: &[Matrix2<f64>], h: &Matrix2<f64>) -> Vec<Matrix2<f64>> {
    let hi = h.try_inverse().expect("invertible");
    rho.iter().map(|g| h * g * hi).collect()
}

/// Line map of a 2x2 matrix, for comparisons.
pub fn mobius_on_lines(m: &Matrix2<f64>, a: f64) -> f64 {
    act(m, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reps::default_fuchsian;
    use crate::sphere::sphere_samples;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rot(n: usize, a: f64) -> Isometry {
        Isometry::unchecked(uv_rotation(n, a))
    }

    #[test]
    fn section_examples() {
        let x0 = basepoint(2);
        assert_eq!(canonical_section(&Isometry::identity(2), &x0).theta_at_basepoint, 0.0);
        let t = canonical_section(&rot(2, TAU / 3.0), &x0).theta_at_basepoint;
        assert!((t - TAU / 3.0).abs() < 1e-12);
        let t = canonical_section(&rot(2, 2.0 * TAU / 3.0), &x0).theta_at_basepoint;
        assert!((t + TAU / 3.0).abs() < 1e-12);
        let t = canonical_section(&rot(2, PI), &x0).theta_at_basepoint;
        assert!((t + PI).abs() < 1e-12);
    }

    #[test]
    fn lift_examples() {
        let x0 = basepoint(2);
        let id = canonical_section(&Isometry::identity(2), &x0);
        let target = CylPoint::new(5.0, DVector::from_vec(vec![0.0, 1.0])).unwrap();
        assert!((lift_evaluate(&id, &target, 64).unwrap() - 5.0).abs() < 1e-12);
        let r = canonical_section(&rot(2, TAU / 3.0), &x0);
        let target = CylPoint::new(PI, x0.sphere().clone()).unwrap();
        assert!((lift_evaluate(&r, &target, 64).unwrap() - (PI + TAU / 3.0)).abs() < 1e-12);
        let back = r.inverse().unwrap().compose(&r).unwrap();
        assert!(back.theta_at_basepoint.abs() < 1e-12);
    }

    #[test]
    fn cocycle_examples() {
        let x0 = basepoint(2);
        let id = Isometry::identity(2);
        assert_eq!(cocycle(&id, &id, &x0).unwrap(), 0);
        let r = rot(2, TAU / 3.0);
        assert_eq!(cocycle(&r, &r, &x0).unwrap(), -1);
        let r = rot(2, -TAU / 3.0);
        assert_eq!(cocycle(&r, &r, &x0).unwrap(), 1);
    }

    #[test]
    fn refinement_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x0 = basepoint(2);
        for _ in 0..100 {
            let g = random_isometry(2, 2.0, &mut rng);
            let l = canonical_section(&g, &x0);
            let a = rng.random_range(-PI..PI);
            let t = CylPoint::new(rng.random_range(-4.0..4.0), DVector::from_vec(vec![a.cos(), a.sin()])).unwrap();
            let c = lift_evaluate(&l, &t, 64).unwrap();
            let f = lift_evaluate(&l, &t, 1024).unwrap();
            assert!((c - f).abs() < 1e-9);
        }
    }

    #[test]
    fn deck_shift_commutes_with_lifting() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x0 = basepoint(3);
        let g = random_isometry(3, 1.5, &mut rng);
        let l = canonical_section(&g, &x0);
        let t = CylPoint::new(0.7, DVector::from_vec(vec![0.0, 0.6, 0.8])).unwrap();
        let a = lift_evaluate(&l.shifted(1), &t, 64).unwrap();
        let b = lift_evaluate(&l, &t, 64).unwrap();
        assert!((a - b - TAU).abs() < 1e-12);
    }

    #[test]
    fn fuchsian_cochain_vanishes() {
        let rep = default_fuchsian(2).unwrap();
        let s = sphere_samples(2, 16, 0);
        let len = s.len();
        let g = LipschitzGraph::new(s, vec![0.0; len], 1e-9).unwrap();
        let words = crate::reps::reduced_words(2, 3);
        let c = bounded_cochain(&rep, &g, &words, 1e-8).unwrap();
        assert!(c.values.iter().all(|&a| a == 0));
        assert!(c.pairs_checked > 0);
    }

    #[test]
    fn sup_graph_of_trivial_and_fuchsian() {
        let mesh = circle_mesh(64);
        let s = invariant_graph_sup(&[], &mesh, 4).unwrap();
        assert!(s.graph.values().iter().all(|&v| v == 0.0));
        let rep = default_fuchsian(2).unwrap();
        let s = invariant_graph_sup(&generator_lifts(&rep, &[0, 0]), &mesh, 3).unwrap();
        assert!(s.graph.values().iter().all(|&v| v.abs() < 1e-9));
        assert!(s.invariance_residual < 1e-9);
    }

    #[test]
    fn envelope_matches_brute_force() {
        let pts = [(0.3, 0.2), (2.0, -0.1), (-1.0, 0.5), (3.0, 0.0)];
        let m = 50;
        let mut out = vec![f64::NEG_INFINITY; m];
        circle_envelope(&pts, m, &mut out);
        for (k, v) in out.iter().enumerate() {
            let psi = TAU * k as f64 / m as f64;
            let b = pts
                .iter()
                .map(|&(p, t)| {
                    let d = (psi - p).rem_euclid(TAU);
                    t - d.min(TAU - d)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((v - b).abs() < 1e-12);
        }
    }

    #[test]
    fn semiconjugacy_identity() {
        let g = gamma2_generators();
        let s = semi_conjugacy(&g, &g, 64, 3).unwrap();
        for (a, f) in s.mesh.iter().zip(&s.values) {
            assert!(line_distance(*a, *f) < 1e-8, "{a} {f}");
        }
        assert_eq!(s.inversions, 0);
    }

    fn schottky(t: f64) -> Vec<Matrix2<f64>> {
        let a = Matrix2::new(t.cosh(), t.sinh(), t.sinh(), t.cosh());
        let (sn, cs) = (PI / 4.0).sin_cos();
        let r = Matrix2::new(cs, -sn, sn, cs);
        vec![a, r * a * r.transpose()]
    }

    #[test]
    fn semiconjugacy_recovers_conjugator() {
        let g = gamma2_generators();
        let h = Matrix2::new(1.3, 0.4, 0.2, (1.0 + 0.4 * 0.2) / 1.3);
        let s = semi_conjugacy(&g, &conjugate_generators(&g, &h), 128, 3).unwrap();
        for (a, f) in s.mesh.iter().zip(&s.values) {
            assert!(line_distance(mobius_on_lines(&h, *a), *f) < 1e-6);
        }
        assert!(s.residual < 1e-6);
        assert_eq!(s.inversions, 0);
        assert!((s.degree - 1.0).abs() < 1e-9);
    }

    #[test]
    fn schottky_semiconjugacy_converges() {
        let runs: Vec<SemiConjugacy> = [2, 3, 4]
            .iter()
            .map(|&b| semi_conjugacy(&schottky(1.5), &schottky(2.0), 128, b).unwrap())
            .collect();
        for w in runs.windows(2) {
            assert!(w[1].coarse_residual < w[0].coarse_residual);
            assert!(w[1].worst_inversion > w[0].worst_inversion);
        }
        assert!((runs[2].degree - 1.0).abs() < 1e-9);
    }
}
