//! Invisible domains E(Lambda) through the fields f- and f+, with membership
//! checked both in conformal coordinates and by signs of inner products.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::achronal::{is_purely_lightlike, LimitSetSamples, LipschitzGraph};
use crate::ambient::{ads_to_conformal, conformal_to_ads, spherical_distance, AmbientVector};
use crate::error::{Error, Result};
use crate::sphere::DiskMesh;

/// Below this, a disagreement between the two membership tests is rounding.
const MODEL_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Side {
    Past,
    Future,
}

#[derive(Clone, Debug)]
pub struct RegularDomain {
    limit_set: LimitSetSamples,
    // boundary sample s_i padded with a trailing 0, i.e. a point of S^n
    anchors: Vec<DVector<f64>>,
    values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub inside: bool,
    /// min(theta - f-, f+ - theta) with theta lifted next to the midpoint
    pub field_margin: f64,
    /// -max <y|lambda> over unit representatives
    pub product_margin: f64,
}

impl RegularDomain {
    pub fn new(limit_set: LimitSetSamples) -> Result<Self> {
        let g = limit_set
            .lifted
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("limit set needs a resolved lift".into()))?;
        if g.is_empty() {
            return Err(Error::InvalidInput("empty limit set".into()));
        }
        let n = g.dim_n();
        let anchors = g
            .samples()
            .iter()
            .map(|s| {
                let mut a = DVector::zeros(n + 1);
                a.rows_mut(0, n).copy_from(s);
                a
            })
            .collect();
        let values = g.values().to_vec();
        Ok(Self {
            limit_set,
            anchors,
            values,
        })
    }

    pub fn from_graph(g: LipschitzGraph) -> Result<Self> {
        Self::new(LimitSetSamples::from_graph(g))
    }

    pub fn limit_set(&self) -> &LimitSetSamples {
        &self.limit_set
    }

    pub fn graph(&self) -> &LipschitzGraph {
        self.limit_set.lifted.as_ref().expect("checked in new")
    }

    pub fn dim_n(&self) -> usize {
        self.limit_set.dim_n()
    }

    pub fn sample_count(&self) -> usize {
        self.values.len()
    }

    /// (f-(x), f+(x)) at a point x of the closed disk, as exact Sup/Inf over
    /// the sampled limit set.
    pub fn f_fields(&self, x: &DVector<f64>) -> (f64, f64) {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (a, &f) in self.anchors.iter().zip(&self.values) {
            let d = spherical_distance(x.as_slice(), a.as_slice());
            lo = lo.max(f - d);
            hi = hi.min(f + d);
        }
        (lo, hi)
    }

    pub fn f_fields_mesh(&self, mesh: &DiskMesh) -> Vec<(f64, f64)> {
        mesh.points.par_iter().map(|p| self.f_fields(p)).collect()
    }

    /// Membership of an AdS point by both characterizations.
    pub fn contains(&self, y: &AmbientVector) -> Result<Membership> {
        let (theta, disk) = ads_to_conformal(y, 1e-6)?;
        let (lo, hi) = self.f_fields(&disk);
        let mid = 0.5 * (lo + hi);
        let t = mid + crate::ambient::wrap_angle(theta - mid);
        let field_margin = (t - lo).min(hi - t);
        let yn = y.normalized()?;
        let max_prod = self
            .limit_set
            .points()
            .iter()
            .map(|l| yn.inner(l))
            .fold(f64::NEG_INFINITY, f64::max);
        let product_margin = -max_prod;
        let a = field_margin > 0.0;
        let b = product_margin > 0.0;
        if a != b && field_margin.abs() > MODEL_TOL && product_margin.abs() > MODEL_TOL {
            return Err(Error::ModelDisagreement {
                field_margin,
                product_margin,
            });
        }
        Ok(Membership {
            inside: a && b,
            field_margin,
            product_margin,
        })
    }

    /// Purely lightlike test: antipodal samples when available, otherwise
    /// collapse of the field interval at an interior mesh point.
    pub fn purely_lightlike(&self, mesh: &DiskMesh, eps: f64) -> bool {
        match is_purely_lightlike(self.graph(), eps) {
            Ok((b, _)) => b,
            Err(_) => mesh
                .interior()
                .any(|p| {
                    let (lo, hi) = self.f_fields(p);
                    hi - lo <= eps
                }),
        }
    }

    /// Graph of f- (past) or f+ (future) over the interior of the mesh, as
    /// AdS points.
    pub fn horizon(&self, side: Side, mesh: &DiskMesh, eps: f64) -> Result<Vec<AmbientVector>> {
        if self.purely_lightlike(mesh, eps) {
            return Err(Error::PurelyLightlike);
        }
        let pts: Vec<&DVector<f64>> = mesh.interior().collect();
        pts.par_iter()
            .map(|p| {
                let (lo, hi) = self.f_fields(p);
                conformal_to_ads(if side == Side::Past { lo } else { hi }, p)
            })
            .collect()
    }

    /// Graph of f-/f+ on the boundary sphere; an achronal sphere containing
    /// the limit set.
    pub fn boundary_extension(
        &self,
        side: Side,
        boundary: &[DVector<f64>],
        mesh: &DiskMesh,
        eps: f64,
    ) -> Result<LimitSetSamples> {
        if self.purely_lightlike(mesh, eps) {
            return Err(Error::PurelyLightlike);
        }
        let n = self.dim_n();
        let values = boundary
            .par_iter()
            .map(|s| {
                let mut a = DVector::zeros(n + 1);
                a.rows_mut(0, n).copy_from(s);
                let (lo, hi) = self.f_fields(&a);
                if side == Side::Past {
                    lo
                } else {
                    hi
                }
            })
            .collect();
        let g = LipschitzGraph::new(boundary.to_vec(), values, self.graph().lipschitz_tol)?;
        Ok(LimitSetSamples::from_graph(g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::achronal::{is_achronal, AchronalClass};
    use crate::ambient::DEFAULT_EPS;
    use crate::sphere::{disk_mesh, sphere_samples};
    use std::f64::consts::PI;

    fn fuchsian(n: usize, res: usize) -> RegularDomain {
        let s = sphere_samples(n, res, 1);
        let len = s.len();
        RegularDomain::from_graph(LipschitzGraph::new(s, vec![0.0; len], 1e-9).unwrap()).unwrap()
    }

    fn north(n: usize) -> DVector<f64> {
        let mut p = DVector::zeros(n + 1);
        p[n] = 1.0;
        p
    }

    #[test]
    fn fuchsian_fields_at_north_pole() {
        for n in [2, 3] {
            let d = fuchsian(n, 64);
            let (lo, hi) = d.f_fields(&north(n));
            assert!((lo + PI / 2.0).abs() < 1e-12 && (hi - PI / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fuchsian_membership_examples() {
        let d = fuchsian(2, 64);
        let a = AmbientVector::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let m = d.contains(&a).unwrap();
        assert!(m.inside);
        assert!((m.field_margin - PI / 2.0).abs() < 1e-12);
        let b = AmbientVector::new(vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let m = d.contains(&b).unwrap();
        assert!(!m.inside && m.product_margin.abs() < 1e-15);
    }

    #[test]
    fn fuchsian_horizon_and_extension() {
        let d = fuchsian(2, 64);
        let mesh = disk_mesh(2, 16, 0);
        let h = d.horizon(Side::Past, &mesh, DEFAULT_EPS).unwrap();
        // the first mesh point is the north pole
        assert!((&h[0] - &AmbientVector::new(vec![0.0, -1.0, 0.0, 0.0]).unwrap()).norm() < 1e-12);
        for p in &h {
            let max = d.limit_set().points().iter().map(|l| p.normalized().unwrap().inner(l)).fold(f64::NEG_INFINITY, f64::max);
            assert!(max <= DEFAULT_EPS && max > -0.05);
        }
        let ext = d
            .boundary_extension(Side::Future, &sphere_samples(2, 64, 0), &mesh, DEFAULT_EPS)
            .unwrap();
        assert!(ext.lifted.as_ref().unwrap().values().iter().all(|v| v.abs() < 1e-12));
        assert_ne!(is_achronal(&ext, DEFAULT_EPS).unwrap().class, AchronalClass::NotAchronal);
    }

    #[test]
    fn purely_lightlike_graph_has_no_domain() {
        let s = sphere_samples(2, 32, 0);
        let vals = s.iter().map(|p| PI - spherical_distance(p.as_slice(), s[0].as_slice())).collect();
        let d = RegularDomain::from_graph(LipschitzGraph::new(s, vals, 1e-9).unwrap()).unwrap();
        let mesh = disk_mesh(2, 16, 0);
        for (lo, hi) in d.f_fields_mesh(&mesh) {
            assert!((hi - lo).abs() < 1e-9);
        }
        assert!(matches!(d.horizon(Side::Past, &mesh, 1e-9), Err(Error::PurelyLightlike)));
    }
}
