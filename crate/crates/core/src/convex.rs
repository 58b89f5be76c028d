//! Convex cone hull of a sampled limit set, its dual, the boundary graphs
//! F- and F+ of the convex core, and support elements.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::achronal::LimitSetSamples;
use crate::ambient::{spherical_distance, wrap_angle, AmbientVector};
use crate::error::{Error, Result};
use crate::nnls::nnls;

pub const DEFAULT_TOL: f64 = 1e-7;

/// Ratio between the hull-membership tolerance used in fiber bisection and
/// the public tolerance; keeps degenerate fibers (F- = F+) tight.
const BISECTION_TOL_FACTOR: f64 = 1e-3;
const SCAN_POINTS: usize = 33;

#[derive(Clone, Debug)]
pub struct ConvexCore {
    generators: Vec<AmbientVector>,
    matrix: DMatrix<f64>,
    lifts: Option<Vec<f64>>,
    interior_seed: AmbientVector,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SupportKind {
    Spacelike,
    Degenerate,
    Timelike,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupportData {
    /// Unit Euclidean representative with <p|g> <= 0 for all generators.
    pub p: AmbientVector,
    pub kind: SupportKind,
    /// min over non-contact generators of -<p|g>
    pub margin: f64,
}

impl ConvexCore {
    pub fn new(limit_set: &LimitSetSamples, tol: f64) -> Result<Self> {
        let generators: Vec<AmbientVector> = limit_set.points().to_vec();
        if generators.len() < 2 {
            return Err(Error::DegenerateCore("fewer than two generators".into()));
        }
        let dim = generators[0].coords().len();
        let mut matrix = DMatrix::zeros(dim, generators.len());
        let mut mean = DVector::zeros(dim);
        for (j, g) in generators.iter().enumerate() {
            matrix.set_column(j, g.coords());
            mean += g.coords();
        }
        let seed = AmbientVector::from_dvector(mean)?;
        if seed.norm() == 0.0 {
            return Err(Error::DegenerateCore("generators sum to zero".into()));
        }
        let seed = seed.normalized()?;
        if seed.q() >= -tol {
            return Err(Error::DegenerateCore(format!(
                "mean of generators is not timelike (q = {:e})",
                seed.q()
            )));
        }
        let lifts = limit_set.lifted.as_ref().map(|g| g.values().to_vec());
        Ok(Self {
            generators,
            matrix,
            lifts,
            interior_seed: seed,
        })
    }

    pub fn generators(&self) -> &[AmbientVector] {
        &self.generators
    }

    pub fn interior_seed(&self) -> &AmbientVector {
        &self.interior_seed
    }

    pub fn dim_n(&self) -> usize {
        self.interior_seed.dim_n()
    }

    /// Sup-norm distance from the unit vector y to the convex cone.
    pub fn hull_residual(&self, y: &DVector<f64>) -> f64 {
        let yn = y / y.norm();
        nnls(&self.matrix, &yn).residual.amax()
    }

    pub fn hull_contains(&self, y: &AmbientVector, tol: f64) -> Result<bool> {
        if !y.is_normalized() {
            return Err(Error::InvalidInput("hull_contains expects a unit vector".into()));
        }
        let r = self.hull_residual(y.coords());
        if !r.is_finite() {
            return Err(Error::LpFailure("non-finite NNLS residual".into()));
        }
        Ok(r <= tol)
    }

    pub fn max_dual_product(&self, x: &AmbientVector) -> f64 {
        let xn = x.normalized().expect("nonzero");
        self.generators
            .iter()
            .map(|g| xn.inner(g))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn dual_contains(&self, x: &AmbientVector, tol: f64) -> bool {
        self.max_dual_product(x) <= tol
    }

    /// Interval of theta over the disk point w in which the fiber point
    /// (cos t, sin t, w_bar) is weakly dual to every generator.
    fn fiber_interval(&self, w: &DVector<f64>) -> Option<(f64, f64)> {
        let n = self.dim_n();
        let mut anchor = DVector::zeros(n + 1);
        let arcs: Vec<(f64, f64)> = self
            .generators
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let r = g.u().hypot(g.v());
                for k in 0..n {
                    anchor[k] = g.x()[k] / r;
                }
                anchor[n] = 0.0;
                let phi = match &self.lifts {
                    Some(l) => l[i],
                    None => g.v().atan2(g.u()),
                };
                (phi, spherical_distance(w.as_slice(), anchor.as_slice()))
            })
            .collect();
        if self.lifts.is_some() {
            let lo = arcs.iter().map(|(p, d)| p - d).fold(f64::NEG_INFINITY, f64::max);
            let hi = arcs.iter().map(|(p, d)| p + d).fold(f64::INFINITY, f64::min);
            return (lo <= hi).then_some((lo, hi));
        }
        let start = arcs
            .iter()
            .cloned()
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let (mut lo, mut hi) = (start.0 - start.1, start.0 + start.1);
        for &(phi, d) in &arcs {
            let mid = 0.5 * (lo + hi);
            let c = mid + wrap_angle(phi - mid);
            lo = lo.max(c - d);
            hi = hi.min(c + d);
            if lo > hi {
                return None;
            }
        }
        Some((lo, hi))
    }

    fn fiber_residual(&self, w: &DVector<f64>, theta: f64) -> f64 {
        self.hull_residual(&fiber_vector(w, theta))
    }

    /// (F-(w), F+(w)): the theta interval of the core over the disk point w.
    pub fn core_boundary(&self, w: &DVector<f64>, tol: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self
            .fiber_interval(w)
            .ok_or_else(|| Error::DegenerateCore("fiber misses the dual cone".into()))?;
        let mut best = (f64::INFINITY, lo);
        let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
        for k in 0..SCAN_POINTS {
            let t = lo + k as f64 * step;
            let r = self.fiber_residual(w, t);
            if r < best.0 {
                best = (r, t);
            }
        }
        // golden section on the bracket around the best scan point
        let (mut a, mut b) = ((best.1 - step).max(lo), (best.1 + step).min(hi));
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (self.fiber_residual(w, c), self.fiber_residual(w, d));
        for _ in 0..80 {
            if b - a < 1e-15 {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = self.fiber_residual(w, c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = self.fiber_residual(w, d);
            }
        }
        let (seed_r, seed) = [(fc, c), (fd, d), best]
            .into_iter()
            .fold((f64::INFINITY, 0.0), |x, y| if y.0 < x.0 { y } else { x });
        let inner_tol = tol * BISECTION_TOL_FACTOR;
        if seed_r > inner_tol {
            return Err(Error::DegenerateCore(format!(
                "fiber misses the hull (best residual {seed_r:e})"
            )));
        }
        let inside = |t: f64| self.fiber_residual(w, t) <= inner_tol;
        let bisect = |mut inn: f64, mut out: f64| {
            if inside(out) {
                return out;
            }
            for _ in 0..64 {
                let m = 0.5 * (inn + out);
                if inside(m) {
                    inn = m;
                } else {
                    out = m;
                }
                if (out - inn).abs() < 1e-14 {
                    break;
                }
            }
            inn
        };
        Ok((bisect(seed, lo), bisect(seed, hi)))
    }

    /// A support element at the boundary point b, maximizing the margin on
    /// generators not in the face of b.
    pub fn support_data(&self, b: &AmbientVector, tol: f64) -> Result<SupportData> {
        let bn = b.normalized()?;
        let dim = bn.coords().len();
        if let Some(g) = self
            .generators
            .iter()
            .find(|g| (g.coords() - bn.coords()).amax() <= tol)
        {
            return Ok(SupportData {
                p: g.clone(),
                kind: SupportKind::Degenerate,
                margin: 0.0,
            });
        }
        let sol = nnls(&self.matrix, bn.coords());
        if sol.residual.amax() > tol.sqrt() {
            return Err(Error::InvalidInput(format!(
                "point is not on the hull (residual {:e})",
                sol.residual.amax()
            )));
        }
        let tmax = sol.t.amax();
        let contact: Vec<bool> = sol.t.iter().map(|&t| t > 1e-9 * tmax).collect();

        let solve = |objective: Option<DVector<f64>>| -> Result<Option<(DVector<f64>, f64)>> {
            let mut lp = Problem::new(OptimizationDirection::Maximize);
            let vars: Vec<_> = (0..dim)
                .map(|i| lp.add_var(objective.as_ref().map_or(0.0, |o| o[i]), (-1.0, 1.0)))
                .collect();
            let s = lp.add_var(if objective.is_some() { 0.0 } else { 1.0 }, (-2.0, 1.0));
            let row = |v: &DVector<f64>| -> Vec<(microlp::Variable, f64)> {
                let mut jv = v.clone();
                jv[0] = -jv[0];
                jv[1] = -jv[1];
                vars.iter().cloned().zip(jv.iter().cloned()).collect()
            };
            lp.add_constraint(row(bn.coords()), ComparisonOp::Eq, 0.0);
            for (g, &c) in self.generators.iter().zip(&contact) {
                let mut r = row(g.coords());
                if c {
                    lp.add_constraint(r, ComparisonOp::Eq, 0.0);
                } else if objective.is_some() {
                    lp.add_constraint(r, ComparisonOp::Le, 0.0);
                } else {
                    r.push((s, 1.0));
                    lp.add_constraint(r, ComparisonOp::Le, 0.0);
                }
            }
            match lp.solve() {
                Ok(out) => {
                    let sol = out
                        .into_solution()
                        .map_err(|_| Error::LpFailure("solver interrupted".into()))?;
                    let p = DVector::from_iterator(dim, vars.iter().map(|v| sol[*v]));
                    Ok(Some((p, sol.objective())))
                }
                Err(microlp::Error::Infeasible) => Ok(None),
                Err(e) => Err(Error::LpFailure(e.to_string())),
            }
        };

        let mut found = match solve(None)? {
            Some((p, s)) if s > tol && p.amax() > tol => Some(p),
            Some(_) => None,
            None => return Err(Error::LpFailure("support LP infeasible".into())),
        };
        if found.is_none() {
            // zero margin: any nonzero element of the face's dual will do
            'dirs: for i in 0..dim {
                for sgn in [1.0, -1.0] {
                    let mut o = DVector::zeros(dim);
                    o[i] = sgn;
                    if let Some((p, obj)) = solve(Some(o))? {
                        if obj > tol {
                            found = Some(p);
                            break 'dirs;
                        }
                    }
                }
            }
        }
        let p = found.ok_or_else(|| Error::LpFailure("no nonzero support element".into()))?;
        let p = AmbientVector::from_dvector(p)?.normalized()?;
        let margin = self
            .generators
            .iter()
            .zip(&contact)
            .filter(|(_, c)| !**c)
            .map(|(g, _)| -p.inner(g))
            .fold(f64::INFINITY, f64::min);
        let q = p.q();
        let kind = if q < -tol {
            SupportKind::Spacelike
        } else if q > tol {
            SupportKind::Timelike
        } else {
            SupportKind::Degenerate
        };
        Ok(SupportData { p, kind, margin })
    }
}

/// Unit vector along the fiber (cos t, sin t, w_bar) over the disk point w.
pub fn fiber_vector(w: &DVector<f64>, theta: f64) -> DVector<f64> {
    let n = w.len() - 1;
    let mut y = DVector::zeros(n + 2);
    y[0] = theta.cos();
    y[1] = theta.sin();
    let scale = 1.0 / w.norm();
    for i in 0..n {
        y[i + 2] = w[i] * scale;
    }
    let norm = y.norm();
    y / norm
}
