//! Cosmological time on the past tight region of an invisible domain: the
//! realizing geodesic to the past horizon, the dual point and the normal.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambient::{conformal_to_ads, spherical_distance, AmbientVector};
use crate::domain::RegularDomain;
use crate::error::{Error, Result};
use crate::sphere::DiskMesh;
use crate::symspace::TimelikePlane;

pub const DEFAULT_TOL: f64 = 1e-9;

/// Competing maxima closer than this in arccos value are ambiguous...
const UNIQUENESS_MARGIN: f64 = 1e-6;
/// ...if their disk parameters are further apart than this many mesh steps.
const UNIQUENESS_SPREAD: f64 = 4.0;

/// The past horizon sampled over the interior of a disk mesh.
#[derive(Clone, Debug)]
pub struct PastHorizon {
    pub disk: Vec<DVector<f64>>,
    pub points: Vec<AmbientVector>,
    pub spacing: f64,
}

impl PastHorizon {
    pub fn new(domain: &RegularDomain, mesh: &DiskMesh, eps: f64) -> Result<Self> {
        let points = domain.horizon(crate::domain::Side::Past, mesh, eps)?;
        Ok(Self {
            disk: mesh.interior().cloned().collect(),
            points,
            spacing: mesh.spacing,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CosmoPoint {
    pub x: AmbientVector,
    pub tau: f64,
    pub retract: AmbientVector,
    pub dual: AmbientVector,
    pub normal: AmbientVector,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormalFieldReport {
    /// (step, max |d tau(v) + <v|nu>|) over the sampled points and tangents
    pub gradient: Vec<(f64, f64)>,
    pub lipschitz_pairs: usize,
    pub lipschitz_violations: usize,
    /// largest observed sqrt(q(d nu) / q(d c)) over pairs with q(d c) > 0
    pub max_ratio: f64,
}

fn lorentz_length(x: &AmbientVector, r: &AmbientVector) -> Option<f64> {
    let p = x.inner(r);
    (-1.0..=0.0).contains(&p).then(|| (-p).acos())
}

/// Orthonormal tangent basis of S^n at w (Euclidean).
fn tangent_basis(w: &DVector<f64>) -> Vec<DVector<f64>> {
    let dim = w.len();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for k in 0..dim {
        let mut e = DVector::zeros(dim);
        e[k] = 1.0;
        let mut v = &e - w * w.dot(&e);
        for b in &basis {
            v -= b * b.dot(&v);
        }
        if v.norm() > 1e-6 {
            basis.push(v.normalize());
        }
        if basis.len() == dim - 1 {
            break;
        }
    }
    basis
}

fn horizon_point(domain: &RegularDomain, w: &DVector<f64>) -> Option<AmbientVector> {
    if w[w.len() - 1] <= 1e-12 {
        return None;
    }
    let (lo, _) = domain.f_fields(w);
    conformal_to_ads(lo, w).ok()
}

/// Nelder-Mead maximization of the Lorentzian length from x to the past
/// horizon, over local coordinates of the disk around w0.
fn refine(domain: &RegularDomain, x: &AmbientVector, w0: &DVector<f64>, step: f64, iters: usize) -> (f64, DVector<f64>, AmbientVector) {
    let basis = tangent_basis(w0);
    let k = basis.len();
    let point = |c: &[f64]| {
        let mut w = w0.clone();
        for (b, ci) in basis.iter().zip(c) {
            w += b * *ci;
        }
        w.normalize()
    };
    let value = |c: &[f64]| -> f64 {
        let w = point(c);
        horizon_point(domain, &w)
            .and_then(|r| lorentz_length(x, &r))
            .map_or(f64::INFINITY, |t| -t)
    };
    let mut simplex: Vec<Vec<f64>> = vec![vec![0.0; k]];
    for i in 0..k {
        let mut v = vec![0.0; k];
        v[i] = step;
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|c| value(c)).collect();
    for _ in 0..iters {
        let mut order: Vec<usize> = (0..=k).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread: f64 = simplex[1..]
            .iter()
            .map(|c| c.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread < 1e-13 {
            break;
        }
        let centroid: Vec<f64> = (0..k)
            .map(|d| simplex[..k].iter().map(|c| c[d]).sum::<f64>() / k as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..k).map(|d| centroid[d] + t * (simplex[k][d] - centroid[d])).collect()
        };
        let refl = along(-1.0);
        let fr = value(&refl);
        if fr < vals[0] {
            let exp = along(-2.0);
            let fe = value(&exp);
            if fe < fr {
                simplex[k] = exp;
                vals[k] = fe;
            } else {
                simplex[k] = refl;
                vals[k] = fr;
            }
        } else if fr < vals[k - 1] {
            simplex[k] = refl;
            vals[k] = fr;
        } else {
            let con = if fr < vals[k] { along(-0.5) } else { along(0.5) };
            let fc = value(&con);
            if fc < vals[k].min(fr) {
                simplex[k] = con;
                vals[k] = fc;
            } else {
                for i in 1..=k {
                    simplex[i] = (0..k).map(|d| 0.5 * (simplex[0][d] + simplex[i][d])).collect();
                    vals[i] = value(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=k).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).expect("nonempty");
    let w = point(&simplex[best]);
    let r = horizon_point(domain, &w).expect("finite value implies a horizon point");
    (-vals[best], w, r)
}

/// tau(x), with the retraction onto the past horizon and the dual point.
pub fn cosmological_time(
    domain: &RegularDomain,
    x: &AmbientVector,
    horizon: &PastHorizon,
    refine_iters: usize,
    tol: f64,
) -> Result<CosmoPoint> {
    let x = x.to_ads()?;
    let scored: Vec<(f64, usize)> = horizon
        .points
        .par_iter()
        .enumerate()
        .filter_map(|(i, r)| lorentz_length(&x, r).map(|t| (t, i)))
        .collect();
    let &(best, arg) = scored
        .iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or(Error::NoPastHorizonVisible)?;
    for &(t, i) in &scored {
        if best - t < UNIQUENESS_MARGIN {
            let d = spherical_distance(horizon.disk[i].as_slice(), horizon.disk[arg].as_slice());
            if d > UNIQUENESS_SPREAD * horizon.spacing {
                return Err(Error::NonUniqueRetract { distance: d });
            }
        }
    }
    let (tau, retract) = if refine_iters > 0 {
        let (t, _, r) = refine(domain, &x, &horizon.disk[arg], 0.5 * horizon.spacing, refine_iters);
        if t >= best {
            (t, r)
        } else {
            (best, horizon.points[arg].clone())
        }
    } else {
        (best, horizon.points[arg].clone())
    };
    if tau >= FRAC_PI_2 - tol {
        return Err(Error::OutsideTightRegion { tau });
    }
    let dual = &(&x - &(&retract * tau.cos())) * (1.0 / tau.sin());
    let dual = dual.to_ads()?;
    let normal = &(&retract * -tau.sin()) + &(&dual * tau.cos());
    Ok(CosmoPoint {
        x,
        tau,
        retract,
        dual,
        normal,
    })
}

/// The timelike plane containing the realizing geodesic.
pub fn cosmological_geodesic(cp: &CosmoPoint) -> Result<TimelikePlane> {
    TimelikePlane::new(&cp.retract, &cp.dual)
}

/// Point of the realizing geodesic at parameter theta: cos(theta) r +
/// sin(theta) p.
pub fn geodesic_point(cp: &CosmoPoint, theta: f64) -> AmbientVector {
    &(&cp.retract * theta.cos()) + &(&cp.dual * theta.sin())
}

/// |d tau(v) + <v|nu>| by a forward difference of size h, for a tangent
/// vector v at x (projected onto x^perp and normalized).
pub fn gradient_residual(
    domain: &RegularDomain,
    cp: &CosmoPoint,
    v: &AmbientVector,
    horizon: &PastHorizon,
    h: f64,
    refine_iters: usize,
) -> Result<f64> {
    let x = &cp.x;
    let vt = v + &(x * v.inner(x));
    let vt = &vt * (1.0 / vt.norm());
    let xh = (x + &(&vt * h)).to_ads()?;
    let th = cosmological_time(domain, &xh, horizon, refine_iters, DEFAULT_TOL)?;
    Ok(((th.tau - cp.tau) / h + vt.inner(&cp.normal)).abs())
}

/// The point of the level set {tau = t} over the disk point w, by bisection
/// along the fiber.
pub fn level_set_point(
    domain: &RegularDomain,
    horizon: &PastHorizon,
    w: &DVector<f64>,
    t: f64,
    refine_iters: usize,
) -> Result<CosmoPoint> {
    let (lo, hi) = domain.f_fields(w);
    let tau_at = |theta: f64| -> Result<CosmoPoint> {
        cosmological_time(domain, &conformal_to_ads(theta, w)?, horizon, refine_iters, DEFAULT_TOL)
    };
    let mut a = lo + 1e-9;
    let mut b = hi.min(lo + FRAC_PI_2) - 1e-9;
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        match tau_at(m) {
            Ok(cp) if cp.tau < t => a = m,
            Ok(_) | Err(Error::OutsideTightRegion { .. }) => b = m,
            Err(Error::NoPastHorizonVisible) => a = m,
            Err(e) => return Err(e),
        }
    }
    tau_at(0.5 * (a + b))
}

/// Gradient residuals at the given steps, and the discrete 1-Lipschitz test
/// q(d nu) <= q(d c) (1 + tol) between consecutive level-set samples.
pub fn normal_field_check(
    domain: &RegularDomain,
    horizon: &PastHorizon,
    level: &[CosmoPoint],
    steps: &[f64],
    refine_iters: usize,
    tol: f64,
) -> Result<NormalFieldReport> {
    let mut gradient = Vec::new();
    for &h in steps {
        let mut worst: f64 = 0.0;
        for (i, cp) in level.iter().enumerate() {
            let next = &level[(i + 1) % level.len()];
            let dir = &next.x - &cp.x;
            if dir.norm() < 1e-12 {
                continue;
            }
            worst = worst.max(gradient_residual(domain, cp, &dir, horizon, h, refine_iters)?);
            worst = worst.max(gradient_residual(domain, cp, &cp.normal, horizon, h, refine_iters)?);
        }
        gradient.push((h, worst));
    }
    let mut violations = 0;
    let mut pairs = 0;
    let mut max_ratio: f64 = 0.0;
    for w in level.windows(2) {
        let dc = (&w[1].x - &w[0].x).q();
        let dn = (&w[1].normal - &w[0].normal).q();
        pairs += 1;
        if dn > dc * (1.0 + tol) + tol * tol {
            violations += 1;
        }
        if dc > 0.0 && dn > 0.0 {
            max_ratio = max_ratio.max((dn / dc).sqrt());
        }
    }
    Ok(NormalFieldReport {
        gradient,
        lipschitz_pairs: pairs,
        lipschitz_violations: violations,
        max_ratio,
    })
}
