//! Timelike planes (points of the symmetric space of timelike geodesics),
//! their invariant distance, Gauss maps, crowns and their flats, and a
//! Hilbert-metric probe of convex bodies.

use nalgebra::{DMatrix, DVector, Matrix2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::achronal::LimitSetSamples;
use crate::ambient::{form, signature_matrix, theta_rate, wrap_angle, AmbientVector};
use crate::error::{Error, Result};

pub const PLANE_TOL: f64 = 1e-9;

/// A q-negative-definite 2-plane with a q-orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct TimelikePlane {
    e1: AmbientVector,
    e2: AmbientVector,
}

impl TimelikePlane {
    /// Gram-Schmidt in the form q; fails unless span(a, b) is negative
    /// definite.
    pub fn new(a: &AmbientVector, b: &AmbientVector) -> Result<Self> {
        let qa = a.q();
        let scale = a.norm().powi(2).max(1e-300);
        if qa >= -PLANE_TOL * scale {
            return Err(Error::DegenerateSpan);
        }
        let e1 = a * (1.0 / (-qa).sqrt());
        let b2 = b + &(&e1 * b.inner(&e1));
        let qb = b2.q();
        if qb >= -PLANE_TOL * b.norm().powi(2).max(1e-300) {
            return Err(Error::DegenerateSpan);
        }
        let e2 = &b2 * (1.0 / (-qb).sqrt());
        Ok(Self { e1, e2 })
    }

    pub fn basis(&self) -> (&AmbientVector, &AmbientVector) {
        (&self.e1, &self.e2)
    }

    /// The q-orthogonal projector onto the plane, v -> -<v|e1>e1 - <v|e2>e2;
    /// independent of the basis.
    pub fn projector(&self) -> DMatrix<f64> {
        let j = signature_matrix(self.e1.dim_n());
        let a = self.e1.coords();
        let b = self.e2.coords();
        -(a * a.transpose() + b * b.transpose()) * j
    }

    pub fn same_plane(&self, other: &TimelikePlane, tol: f64) -> bool {
        (self.projector() - other.projector()).amax() <= tol
    }

    pub fn transform(&self, m: &DMatrix<f64>) -> TimelikePlane {
        TimelikePlane {
            e1: AmbientVector::from_dvector(m * self.e1.coords()).expect("finite"),
            e2: AmbientVector::from_dvector(m * self.e2.coords()).expect("finite"),
        }
    }
}

/// Riemannian distance normalized so that a boost of rapidity s moves a
/// plane by s: sqrt(sum arccosh(sigma_i)^2) over the singular values of the
/// 2x2 matrix -<p_i|q_j>.
pub fn plane_distance(p: &TimelikePlane, q: &TimelikePlane) -> Result<f64> {
    let (p1, p2) = p.basis();
    let (q1, q2) = q.basis();
    let b = Matrix2::new(-p1.inner(q1), -p1.inner(q2), -p2.inner(q1), -p2.inner(q2));
    let sv = b.singular_values();
    let (s1, s2) = (sv[0].max(sv[1]), sv[0].min(sv[1]));
    let scale = b.amax().max(1.0);
    if s2 < 1.0 - PLANE_TOL * scale {
        return Err(Error::InvalidPlane { sigma: s2 });
    }
    let a1 = s1.max(1.0).acosh();
    let a2 = s2.max(1.0).acosh();
    Ok(a1.hypot(a2))
}

/// The plane spanned by x and its future unit normal inside x^perp
/// orthogonal to the tangent frame.
pub fn gauss_map(x: &AmbientVector, frame: &[AmbientVector]) -> Result<TimelikePlane> {
    let n = x.dim_n();
    if (x.q() + 1.0).abs() > 1e-6 * x.norm().powi(2).max(1.0) {
        return Err(Error::NotOnAdS { q: x.q() });
    }
    if frame.len() != n {
        return Err(Error::NonSpacelikeFrame);
    }
    let gram = DMatrix::from_fn(n, n, |i, j| frame[i].inner(&frame[j]));
    let min_eig = gram.clone().symmetric_eigen().eigenvalues.min();
    let scale = frame.iter().map(|t| t.norm().powi(2)).fold(1e-300, f64::max);
    if min_eig <= PLANE_TOL * scale || frame.iter().any(|t| t.inner(x).abs() > 1e-6 * t.norm() * x.norm()) {
        return Err(Error::NonSpacelikeFrame);
    }
    // null vector of the rows J x, J t_i
    let dim = n + 2;
    let mut rows = DMatrix::zeros(dim, dim);
    let j = signature_matrix(n);
    rows.set_row(0, &(&j * x.coords()).transpose());
    for (i, t) in frame.iter().enumerate() {
        rows.set_row(i + 1, &(&j * t.coords()).transpose());
    }
    let svd = rows.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let k = (0..dim)
        .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
        .expect("nonempty");
    let nu = AmbientVector::from_dvector(vt.row(k).transpose())?;
    if nu.q() >= -PLANE_TOL {
        return Err(Error::NonSpacelikeFrame);
    }
    let nu = if theta_rate(x.as_slice(), nu.as_slice()) < 0.0 { -nu } else { nu };
    TimelikePlane::new(x, &nu)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Crown {
    pub x_minus: AmbientVector,
    pub y_minus: AmbientVector,
    pub x_plus: AmbientVector,
    pub y_plus: AmbientVector,
}

/// Total theta change along the segment from a to b (positive combinations),
/// by nearest-representative continuation.
fn segment_theta_change(a: &AmbientVector, b: &AmbientVector) -> f64 {
    let steps = 64;
    let theta = |s: f64| {
        let p = &(a * (1.0 - s)) + &(b * s);
        p.v().atan2(p.u())
    };
    let mut prev = theta(0.0);
    let mut total = 0.0;
    for k in 1..=steps {
        let t = theta(k as f64 / steps as f64);
        total += wrap_angle(t - prev);
        prev = t;
    }
    total
}

impl Crown {
    pub fn new(
        x_minus: AmbientVector,
        y_minus: AmbientVector,
        x_plus: AmbientVector,
        y_plus: AmbientVector,
        tol: f64,
    ) -> Result<Self> {
        let c = Self {
            x_minus: x_minus.normalized()?,
            y_minus: y_minus.normalized()?,
            x_plus: x_plus.normalized()?,
            y_plus: y_plus.normalized()?,
        };
        c.check(tol)?;
        Ok(c)
    }

    fn check(&self, tol: f64) -> Result<()> {
        let v = [&self.x_minus, &self.y_minus, &self.x_plus, &self.y_plus];
        if v.iter().any(|p| p.q().abs() > tol) {
            return Err(Error::InvalidCrown("vertex is not null".into()));
        }
        for m in &v[..2] {
            for p in &v[2..] {
                if m.inner(p).abs() > tol {
                    return Err(Error::InvalidCrown("diagonals are not orthogonal".into()));
                }
            }
        }
        if self.x_minus.inner(&self.y_minus) >= -tol || self.x_plus.inner(&self.y_plus) >= -tol {
            return Err(Error::InvalidCrown("diagonal is not spacelike".into()));
        }
        if segment_theta_change(&self.x_minus, &self.x_plus) <= 0.0 {
            return Err(Error::InvalidCrown("[x-, x+] is not future oriented".into()));
        }
        Ok(())
    }

    /// Points of the open segments (x-, y-) and (x+, y+) normalized to
    /// q = -1.
    pub fn diagonal_point(&self, plus: bool, s: f64) -> AmbientVector {
        let (a, b) = if plus { (&self.x_plus, &self.y_plus) } else { (&self.x_minus, &self.y_minus) };
        let c = a.inner(b);
        &(&(a * s.exp()) + &(b * (-s).exp())) * (1.0 / (-2.0 * c).sqrt())
    }

    pub fn vertices(&self) -> [&AmbientVector; 4] {
        [&self.x_minus, &self.y_minus, &self.x_plus, &self.y_plus]
    }

    pub fn transform(&self, m: &DMatrix<f64>) -> Result<Crown> {
        let f = |p: &AmbientVector| AmbientVector::from_dvector(m * p.coords());
        Ok(Crown {
            x_minus: f(&self.x_minus)?.normalized()?,
            y_minus: f(&self.y_minus)?.normalized()?,
            x_plus: f(&self.x_plus)?.normalized()?,
            y_plus: f(&self.y_plus)?.normalized()?,
        })
    }
}

/// x- = (1,0,1,0..), y- = (1,0,-1,0..), x+ = (0,1,0,1..), y+ = (0,1,0,-1..).
pub fn standard_crown(n: usize) -> Crown {
    let v = |c: [f64; 4]| {
        let mut x = vec![0.0; n + 2];
        x[..4].copy_from_slice(&c);
        AmbientVector::new(x).expect("finite").normalized().expect("nonzero")
    };
    Crown {
        x_minus: v([1.0, 0.0, 1.0, 0.0]),
        y_minus: v([1.0, 0.0, -1.0, 0.0]),
        x_plus: v([0.0, 1.0, 0.0, 1.0]),
        y_plus: v([0.0, 1.0, 0.0, -1.0]),
    }
}

/// The timelike plane spanned by p-(s) and p+(t).
pub fn crown_flat(c: &Crown, s: f64, t: f64) -> Result<TimelikePlane> {
    c.check(1e-8)?;
    TimelikePlane::new(&c.diagonal_point(false, s), &c.diagonal_point(true, t))
}

/// All crowns among the samples, one per unordered pair of diagonals.
pub fn crown_search(s: &LimitSetSamples, tol: f64) -> Vec<Crown> {
    let pts = s.points();
    let n = pts.len();
    let zero: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).filter(|&j| j != i && pts[i].inner(&pts[j]).abs() <= tol).collect())
        .collect();
    if zero.iter().all(|z| z.is_empty()) {
        return Vec::new();
    }
    (0..n)
        .into_par_iter()
        .flat_map_iter(|a| {
            let mut found = Vec::new();
            for b in a + 1..n {
                if pts[a].inner(&pts[b]) >= -tol {
                    continue;
                }
                let common: Vec<usize> = zero[a]
                    .iter()
                    .cloned()
                    .filter(|&c| c > a && zero[b].binary_search(&c).is_ok())
                    .collect();
                for (k, &c) in common.iter().enumerate() {
                    for &d in &common[k + 1..] {
                        if pts[c].inner(&pts[d]) >= -tol {
                            continue;
                        }
                        let (m1, m2, p1, p2) = if segment_theta_change(&pts[a], &pts[c]) > 0.0 {
                            (a, b, c, d)
                        } else {
                            (c, d, a, b)
                        };
                        if let Ok(cr) = Crown::new(
                            pts[m1].clone(),
                            pts[m2].clone(),
                            pts[p1].clone(),
                            pts[p2].clone(),
                            tol,
                        ) {
                            found.push(cr);
                        }
                    }
                }
            }
            found
        })
        .collect()
}

/// A convex cone given by a membership oracle on ambient vectors.
pub trait ConvexBody: Sync {
    fn contains(&self, p: &DVector<f64>) -> bool;
}

/// Strict dual of a set of generators: <p|g> < 0 for all g. For a limit
/// set this is the invisible domain.
pub struct DualBody<'a> {
    pub generators: &'a [AmbientVector],
}

impl ConvexBody for DualBody<'_> {
    fn contains(&self, p: &DVector<f64>) -> bool {
        let pn = p / p.norm();
        self.generators.iter().all(|g| form(pn.as_slice(), g.as_slice()) < 0.0)
    }
}

/// Convex hull membership through NNLS residuals.
pub struct HullBody<'a> {
    pub core: &'a crate::convex::ConvexCore,
    pub tol: f64,
}

impl ConvexBody for HullBody<'_> {
    fn contains(&self, p: &DVector<f64>) -> bool {
        self.core.hull_residual(p) <= self.tol
    }
}

/// Affine chart {ell = 1} with ell = -<., z>.
#[derive(Clone, Debug)]
pub struct Chart {
    z: DVector<f64>,
}

impl Chart {
    pub fn new(z: &AmbientVector) -> Self {
        Self { z: z.coords().clone() }
    }

    pub fn ell(&self, p: &DVector<f64>) -> f64 {
        -form(p.as_slice(), self.z.as_slice())
    }

    pub fn to_chart(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        let l = self.ell(p);
        if l <= 0.0 {
            return Err(Error::ChordBoundaryNotFound("point outside the chart".into()));
        }
        Ok(p / l)
    }
}

const CHORD_BISECTIONS: usize = 80;
const CHORD_MAX_EXPANSION: f64 = 1e8;

/// Parameter s of the body boundary along p + s (q - p), searching from
/// s = 0 (inside) in the direction of `sign`.
fn chord_end(body: &dyn ConvexBody, p: &DVector<f64>, dir: &DVector<f64>, start: f64, sign: f64) -> Result<f64> {
    let at = |s: f64| p + dir * s;
    let mut inside = start;
    let mut step = 1.0;
    let mut outside = start + sign * step;
    while body.contains(&at(outside)) {
        inside = outside;
        step *= 2.0;
        outside = start + sign * step;
        if step > CHORD_MAX_EXPANSION {
            return Err(Error::ChordBoundaryNotFound("chord does not leave the body".into()));
        }
    }
    for _ in 0..CHORD_BISECTIONS {
        let m = 0.5 * (inside + outside);
        if body.contains(&at(m)) {
            inside = m;
        } else {
            outside = m;
        }
    }
    Ok(0.5 * (inside + outside))
}

/// Hilbert distance (1/2) ln of the cross-ratio, between chart points.
pub fn hilbert_distance_chart(body: &dyn ConvexBody, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    let dir = y - x;
    if dir.norm() <= 1e-15 * x.norm() {
        return Ok(0.0);
    }
    if !body.contains(x) || !body.contains(y) {
        return Err(Error::ChordBoundaryNotFound("endpoint is not strictly inside".into()));
    }
    let sa = chord_end(body, x, &dir, 0.0, -1.0)?;
    let sb = chord_end(body, x, &dir, 1.0, 1.0)?;
    if sa >= 0.0 || sb <= 1.0 {
        return Err(Error::ChordBoundaryNotFound("membership oracle is inconsistent".into()));
    }
    Ok(0.5 * (((1.0 - sa) * sb) / ((-sa) * (sb - 1.0))).ln())
}

pub fn hilbert_distance(body: &dyn ConvexBody, chart: &Chart, x: &AmbientVector, y: &AmbientVector) -> Result<f64> {
    hilbert_distance_chart(body, &chart.to_chart(x.coords())?, &chart.to_chart(y.coords())?)
}

/// Hilbert distance from u to the segment [a, b], by dense sampling and a
/// golden-section refinement.
fn distance_to_segment(body: &dyn ConvexBody, u: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    let samples = 64;
    let f = |s: f64| hilbert_distance_chart(body, u, &(a + (b - a) * s));
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=samples {
        let s = k as f64 / samples as f64;
        let d = f(s)?;
        if d < best.0 {
            best = (d, s);
        }
    }
    let h = 1.0 / samples as f64;
    let (mut lo, mut hi) = ((best.1 - h).max(0.0), (best.1 + h).min(1.0));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let c = hi - g * (hi - lo);
        let d = lo + g * (hi - lo);
        if f(c)? < f(d)? {
            hi = d;
        } else {
            lo = c;
        }
    }
    Ok(best.0.min(f(0.5 * (lo + hi))?))
}

/// For each t: d_h(u_t, [z, x_t] u [z, y_t]) where x_t, y_t lie at Hilbert
/// distance t from z towards the boundary points x, y and u_t is where the
/// line from z to the midpoint of [x, y] crosses [x_t, y_t].
pub fn divergence_probe(
    body: &dyn ConvexBody,
    chart: &Chart,
    x: &AmbientVector,
    y: &AmbientVector,
    z: &AmbientVector,
    ts: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let xc = chart.to_chart(x.coords())?;
    let yc = chart.to_chart(y.coords())?;
    let zc = chart.to_chart(z.coords())?;
    if !body.contains(&zc) {
        return Err(Error::ChordBoundaryNotFound("z is not inside".into()));
    }
    // x_t = z + s (x - z); the far chord end sits at s = -A
    let toward = |target: &DVector<f64>, t: f64| -> Result<DVector<f64>> {
        let dir = target - &zc;
        let a = -chord_end(body, &zc, &dir, 0.0, -1.0)?;
        let e = (2.0 * t).exp();
        Ok(&zc + dir * (a * (e - 1.0) / (1.0 + a * e)))
    };
    let mid = (&xc + &yc) * 0.5;
    ts.par_iter()
        .map(|&t| {
            if t == 0.0 {
                return Ok((t, 0.0));
            }
            let xt = toward(&xc, t)?;
            let yt = toward(&yc, t)?;
            // z + alpha (mid - z) = x_t + beta (y_t - x_t)
            let c1 = &mid - &zc;
            let c2 = &xt - &yt;
            let rhs = &xt - &zc;
            let m = DMatrix::from_columns(&[c1, c2]);
            let sol = (m.transpose() * &m)
                .try_inverse()
                .ok_or_else(|| Error::ChordBoundaryNotFound("degenerate triangle".into()))?
                * m.transpose()
                * rhs;
            let ut = &zc + (&mid - &zc) * sol[0];
            let d1 = distance_to_segment(body, &ut, &zc, &xt)?;
            let d2 = distance_to_segment(body, &ut, &zc, &yt)?;
            Ok((t, d1.min(d2)))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrownRecord {
    pub x_minus: Vec<f64>,
    pub y_minus: Vec<f64>,
    pub x_plus: Vec<f64>,
    pub y_plus: Vec<f64>,
}

impl From<&Crown> for CrownRecord {
    fn from(c: &Crown) -> Self {
        let v = |p: &AmbientVector| p.as_slice().to_vec();
        Self {
            x_minus: v(&c.x_minus),
            y_minus: v(&c.y_minus),
            x_plus: v(&c.x_plus),
            y_plus: v(&c.y_plus),
        }
    }
}
