//! Achronal subsets of the Einstein universe, as sampled 1-Lipschitz graphs
//! over S^{n-1} or as clouds of null vectors tested by pairwise signs.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambient::{
    cone_to_cyl, cyl_to_cone, sign_with_band, spherical_distance, AmbientVector, CylPoint,
    DEFAULT_EPS,
};
use crate::error::{Error, Result};

/// Sampled graph of a function f: Lambda_0 -> R with Lambda_0 in S^{n-1}.
#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzGraph {
    domain_samples: Vec<DVector<f64>>,
    values: Vec<f64>,
    pub lipschitz_tol: f64,
}

impl LipschitzGraph {
    pub fn new(domain_samples: Vec<DVector<f64>>, values: Vec<f64>, lipschitz_tol: f64) -> Result<Self> {
        if domain_samples.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} samples but {} values",
                domain_samples.len(),
                values.len()
            )));
        }
        if let Some(d) = domain_samples.first().map(|s| s.len()) {
            if d < 2 || domain_samples.iter().any(|s| s.len() != d) {
                return Err(Error::InvalidInput("inconsistent sample dimension".into()));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite graph value".into()));
        }
        let domain_samples = domain_samples
            .into_iter()
            .map(|s| {
                let n = s.norm();
                if n == 0.0 || !n.is_finite() {
                    Err(Error::InvalidInput("zero sample".into()))
                } else {
                    Ok(s / n)
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            domain_samples,
            values,
            lipschitz_tol,
        })
    }

    pub fn samples(&self) -> &[DVector<f64>] {
        &self.domain_samples
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim_n(&self) -> usize {
        self.domain_samples.first().map_or(0, |s| s.len())
    }

    pub fn cyl_points(&self) -> Vec<CylPoint> {
        self.domain_samples
            .iter()
            .zip(&self.values)
            .map(|(s, &t)| CylPoint::new(t, s.clone()).expect("unit sample"))
            .collect()
    }

    pub fn cone_points(&self) -> Vec<AmbientVector> {
        self.cyl_points().iter().map(cyl_to_cone).collect()
    }
}

/// Null vectors sampling an invariant set, optionally with resolved lifts.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitSetSamples {
    points: Vec<AmbientVector>,
    pub lifted: Option<LipschitzGraph>,
}

impl LimitSetSamples {
    /// Normalizes each point and checks that it is null within eps.
    pub fn new(points: Vec<AmbientVector>, eps: f64) -> Result<Self> {
        let points = points
            .into_iter()
            .map(|p| {
                let w = p.normalized()?;
                let q = w.q();
                if q.abs() > eps {
                    Err(Error::NotOnCone { q })
                } else {
                    Ok(w)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(n) = points.first().map(|p| p.dim_n()) {
            if points.iter().any(|p| p.dim_n() != n) {
                return Err(Error::InvalidInput("mixed dimensions".into()));
            }
        }
        Ok(Self {
            points,
            lifted: None,
        })
    }

    pub fn from_graph(graph: LipschitzGraph) -> Self {
        Self {
            points: graph.cone_points(),
            lifted: Some(graph),
        }
    }

    pub fn points(&self) -> &[AmbientVector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim_n(&self) -> usize {
        self.points.first().map_or(0, |p| p.dim_n())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AchronalClass {
    Acausal,
    AchronalNotAcausal,
    NotAchronal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AchronalReport {
    pub class: AchronalClass,
    /// A zero pair for ACHRONAL_NOT_ACAUSAL, the worst positive pair for
    /// NOT_ACHRONAL.
    pub witness: Option<(usize, usize)>,
    pub max_product: f64,
}

pub fn is_achronal(s: &LimitSetSamples, eps: f64) -> Result<AchronalReport> {
    let pts = s.points();
    if pts.len() < 2 {
        return Err(Error::InvalidInput("need at least two points".into()));
    }
    // per row: (max product, argmax, first zero partner)
    let rows: Vec<(f64, usize, Option<usize>)> = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut best = (f64::NEG_INFINITY, usize::MAX, None);
            for j in i + 1..pts.len() {
                let p = pts[i].inner(&pts[j]);
                if p > best.0 {
                    best.0 = p;
                    best.1 = j;
                }
                if best.2.is_none() && sign_with_band(p, eps) == 0 {
                    best.2 = Some(j);
                }
            }
            best
        })
        .collect();
    let (mut max_product, mut arg) = (f64::NEG_INFINITY, (0, 0));
    let mut zero = None;
    for (i, &(m, j, z)) in rows.iter().enumerate() {
        if j != usize::MAX && m > max_product {
            max_product = m;
            arg = (i, j);
        }
        if zero.is_none() {
            zero = z.map(|j| (i, j));
        }
    }
    let (class, witness) = match sign_with_band(max_product, eps) {
        1 => (AchronalClass::NotAchronal, Some(arg)),
        0 => (AchronalClass::AchronalNotAcausal, zero),
        _ => (AchronalClass::Acausal, None),
    };
    Ok(AchronalReport {
        class,
        witness,
        max_product,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphReport {
    pub passed: bool,
    /// min over pairs of d_S - |f(a) - f(b)|
    pub worst_slack: f64,
    pub worst_pair: Option<(usize, usize)>,
    pub sign_class: Option<AchronalClass>,
    pub characterizations_agree: bool,
}

/// Pairwise Lipschitz check plus the sign test on the cone representatives.
pub fn graph_check(g: &LipschitzGraph) -> GraphReport {
    let s = g.samples();
    let v = g.values();
    let rows: Vec<(f64, usize)> = (0..s.len())
        .into_par_iter()
        .map(|i| {
            let mut best = (f64::INFINITY, usize::MAX);
            for j in i + 1..s.len() {
                let slack = spherical_distance(s[i].as_slice(), s[j].as_slice()) - (v[i] - v[j]).abs();
                if slack < best.0 {
                    best = (slack, j);
                }
            }
            best
        })
        .collect();
    let (mut worst_slack, mut worst_pair) = (f64::INFINITY, None);
    for (i, &(sl, j)) in rows.iter().enumerate() {
        if j != usize::MAX && sl < worst_slack {
            worst_slack = sl;
            worst_pair = Some((i, j));
        }
    }
    let passed = worst_slack >= -g.lipschitz_tol;
    let sign_class = if g.len() >= 2 {
        is_achronal(&LimitSetSamples::from_graph(g.clone()), DEFAULT_EPS)
            .ok()
            .map(|r| r.class)
    } else {
        None
    };
    // A lift can fail the graph test while its projection is achronal (the
    // sign test only sees theta mod 2 pi), so agreement is one-directional
    // when the lift spans more than one sheet.
    let sign_ok = sign_class.is_none_or(|c| c != AchronalClass::NotAchronal);
    let spread = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - v.iter().cloned().fold(f64::INFINITY, f64::min);
    let characterizations_agree = if passed {
        sign_ok
    } else {
        !sign_ok || spread > PI
    };
    GraphReport {
        passed,
        worst_slack,
        worst_pair,
        sign_class,
        characterizations_agree,
    }
}

fn exact_key(v: &DVector<f64>) -> Vec<u64> {
    v.iter().map(|c| (c + 0.0).to_bits()).collect()
}

/// Index pairs (i, j) with samples[j] = -samples[i].
pub fn antipodal_pairs(samples: &[DVector<f64>]) -> Vec<(usize, usize)> {
    let map: HashMap<Vec<u64>, usize> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| (exact_key(s), i))
        .collect();
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        match map.get(&exact_key(&(-s))) {
            Some(&j) if j > i => pairs.push((i, j)),
            Some(_) => {}
            None => unmatched.push(i),
        }
    }
    if unmatched.len() <= 5000 {
        for (a, &i) in unmatched.iter().enumerate() {
            for &j in &unmatched[a + 1..] {
                if (&samples[i] + &samples[j]).norm() < 1e-9 {
                    pairs.push((i, j));
                }
            }
        }
    }
    pairs
}

/// True iff some sampled antipodal pair has |f(x) - f(-x)| >= pi - eps.
pub fn is_purely_lightlike(g: &LipschitzGraph, eps: f64) -> Result<(bool, Option<(usize, usize)>)> {
    let pairs = antipodal_pairs(g.samples());
    if pairs.is_empty() {
        return Err(Error::InsufficientSampling(
            "no antipodal sample pairs".into(),
        ));
    }
    let v = g.values();
    let (gap, pair) = pairs
        .iter()
        .map(|&(i, j)| ((v[i] - v[j]).abs(), (i, j)))
        .fold((f64::NEG_INFINITY, (0, 0)), |a, b| if b.0 > a.0 { b } else { a });
    Ok(if gap >= PI - eps {
        (true, Some(pair))
    } else {
        (false, None)
    })
}

/// Adds `segment_resolution` interior points on each lightlike segment
/// joining two orthogonal samples.
pub fn filling(s: &LimitSetSamples, segment_resolution: usize, eps: f64) -> Result<LimitSetSamples> {
    let report = is_achronal(s, eps)?;
    if report.class == AchronalClass::NotAchronal {
        return Err(Error::InvalidInput(
            "filling requires an achronal sample set".into(),
        ));
    }
    let pts = s.points();
    let mut out: Vec<AmbientVector> = pts.to_vec();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if sign_with_band(pts[i].inner(&pts[j]), eps) != 0 {
                continue;
            }
            for k in 1..=segment_resolution {
                let t = k as f64 / (segment_resolution + 1) as f64;
                let c = &(&pts[i] * t) + &(&pts[j] * (1.0 - t));
                out.push(c.normalized()?);
            }
        }
    }
    Ok(LimitSetSamples {
        points: out,
        lifted: None,
    })
}

/// Resolves theta lifts by nearest-representative propagation along a
/// minimal spanning tree of the sphere projections (Prim, O(N^2)).
///
/// Edges whose lifted values violate the Lipschitz bound are reported in
/// `LiftInconsistent` rather than silently repaired.
pub fn resolve_lift(s: &LimitSetSamples, eps: f64, lipschitz_tol: f64) -> Result<LipschitzGraph> {
    let cyl: Vec<CylPoint> = s
        .points()
        .iter()
        .map(|p| cone_to_cyl(p, eps.max(DEFAULT_EPS)))
        .collect::<Result<_>>()?;
    let n = cyl.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty sample set".into()));
    }
    let dist = |i: usize, j: usize| spherical_distance(cyl[i].sphere().as_slice(), cyl[j].sphere().as_slice());
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut theta = vec![0.0; n];
    let mut bad = Vec::new();
    best[0] = 0.0;
    for _ in 0..n {
        let mut u = usize::MAX;
        for i in 0..n {
            if !in_tree[i] && (u == usize::MAX || best[i] < best[u]) {
                u = i;
            }
        }
        in_tree[u] = true;
        theta[u] = if parent[u] == usize::MAX {
            cyl[u].theta
        } else {
            let tp = theta[parent[u]];
            let t = tp + crate::ambient::wrap_angle(cyl[u].theta - tp);
            if (t - tp).abs() > best[u] + lipschitz_tol {
                bad.push((parent[u], u));
            }
            t
        };
        for i in 0..n {
            if !in_tree[i] {
                let d = dist(u, i);
                if d < best[i] {
                    best[i] = d;
                    parent[i] = u;
                }
            }
        }
    }
    if !bad.is_empty() {
        return Err(Error::LiftInconsistent { edges: bad });
    }
    LipschitzGraph::new(
        cyl.iter().map(|c| c.sphere().clone()).collect(),
        theta,
        lipschitz_tol,
    )
}
