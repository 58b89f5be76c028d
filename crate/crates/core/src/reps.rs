//! Representation builders (Fuchsian, split, perturbed), limit-set samplers
//! and the bridge SL(2,R) x SL(2,R) -> SO0(2,2).

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::achronal::{LimitSetSamples, LipschitzGraph};
use crate::ambient::{form_deviation, signature_matrix, validate_isometry, AmbientVector, Isometry};
use crate::error::{Error, Result};
use crate::sphere::sphere_samples;

/// Rapidity of the default Schottky generators; ping-pong needs more than
/// 2 asinh(1) ~ 1.763 for two orthogonal boosts.
pub const SCHOTTKY_RAPIDITY: f64 = 2.5;

const VALIDATION_EPS: f64 = 1e-9;
const SPECTRAL_TOL: f64 = 1e-9;
pub const DEDUP_RESOLUTION: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RepKind {
    Fuchsian,
    Split { p: usize, q: usize },
    Perturbed { seed: u64, epsilon: f64 },
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupRep {
    pub generators: Vec<Isometry>,
    pub kind: RepKind,
    pub n: usize,
}

impl GroupRep {
    pub fn custom(n: usize, generators: Vec<DMatrix<f64>>) -> Result<Self> {
        let generators = generators
            .iter()
            .map(|m| {
                if m.nrows() != n + 2 {
                    return Err(Error::InvalidInput(format!(
                        "generator size {} does not match n + 2 = {}",
                        m.nrows(),
                        n + 2
                    )));
                }
                validate_isometry(m, VALIDATION_EPS)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            generators,
            kind: RepKind::Custom,
            n,
        })
    }

    /// Generators followed by their inverses; letter i and i ^ 1 are inverse.
    pub fn alphabet(&self) -> Vec<DMatrix<f64>> {
        self.generators
            .iter()
            .flat_map(|g| [g.matrix().clone(), g.inverse().matrix().clone()])
            .collect()
    }

    pub fn evaluate(&self, word: &[usize]) -> DMatrix<f64> {
        let letters = self.alphabet();
        let mut m = DMatrix::identity(self.n + 2, self.n + 2);
        for &l in word {
            m *= &letters[l];
        }
        m
    }
}

/// Reduced words of length 1..=max_len over the alphabet of `gens`
/// generators and their inverses (letter 2i+1 inverts 2i).
pub fn reduced_words(gens: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut frontier: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for l in 0..2 * gens {
                if w.last().is_some_and(|&p| p ^ 1 == l) {
                    continue;
                }
                let mut v = w.clone();
                v.push(l);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

pub fn so1n_form(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::identity(n + 1, n + 1);
    j[(0, 0)] = -1.0;
    j
}

pub fn check_so1n(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    if !m.is_square() || m.nrows() < 2 {
        return Err(Error::NotInSO1n(format!("shape {}x{}", m.nrows(), m.ncols())));
    }
    let j = so1n_form(m.nrows() - 1);
    let dev = (m.transpose() * &j * m - &j).amax();
    let scale = 1.0f64.max(m.amax().powi(2));
    if dev > tol * scale {
        return Err(Error::NotInSO1n(format!("form deviation {dev:e}")));
    }
    let det = m.clone().determinant();
    if det <= 0.0 {
        return Err(Error::NotInSO1n(format!("det {det}")));
    }
    if m[(0, 0)] <= 0.0 {
        return Err(Error::NotInSO1n("reverses time orientation".into()));
    }
    Ok(())
}

/// Boost of rapidity t in SO0(1,k) mixing coordinate 0 with `axis`.
pub fn so1n_boost(k: usize, axis: usize, t: f64) -> DMatrix<f64> {
    let mut m = DMatrix::identity(k + 1, k + 1);
    m[(0, 0)] = t.cosh();
    m[(axis, axis)] = t.cosh();
    m[(0, axis)] = t.sinh();
    m[(axis, 0)] = t.sinh();
    m
}

/// Two orthogonal boosts generating a Schottky subgroup of SO0(1,k).
pub fn default_schottky(k: usize) -> Vec<DMatrix<f64>> {
    if k == 1 {
        return vec![so1n_boost(1, 1, SCHOTTKY_RAPIDITY)];
    }
    vec![
        so1n_boost(k, 1, SCHOTTKY_RAPIDITY),
        so1n_boost(k, 2, SCHOTTKY_RAPIDITY),
    ]
}

/// Places an (k+1)x(k+1) matrix on the ambient indices `idx`.
fn embed(dim: usize, m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::identity(dim, dim);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            out[(i, j)] = m[(a, b)];
        }
    }
    out
}

/// SO0(1,n) acting on (u, x_1, ..., x_n), fixing v: the stabilizer of the
/// AdS point (0, 1, 0, ..., 0).
pub fn build_fuchsian(n: usize, gens: &[DMatrix<f64>]) -> Result<GroupRep> {
    if n < 2 {
        return Err(Error::InvalidInput("n must be at least 2".into()));
    }
    let idx: Vec<usize> = std::iter::once(0).chain(2..n + 2).collect();
    let generators = gens
        .iter()
        .map(|g| {
            if g.nrows() != n + 1 {
                return Err(Error::NotInSO1n(format!("expected size {}", n + 1)));
            }
            check_so1n(g, VALIDATION_EPS)?;
            validate_isometry(&embed(n + 2, g, &idx), VALIDATION_EPS)
        })
        .collect::<Result<_>>()?;
    Ok(GroupRep {
        generators,
        kind: RepKind::Fuchsian,
        n,
    })
}

pub fn default_fuchsian(n: usize) -> Result<GroupRep> {
    build_fuchsian(n, &default_schottky(n))
}

fn split_indices(p: usize, q: usize) -> (Vec<usize>, Vec<usize>) {
    let a = std::iter::once(0).chain(2..p + 2).collect();
    let b = std::iter::once(1).chain(p + 2..p + q + 2).collect();
    (a, b)
}

/// Block embedding of SO0(1,p) x SO0(1,q): the first factor acts on
/// (u, x_1..x_p), the second on (v, x_{p+1}..x_n).
pub fn build_split(p: usize, q: usize, gens_p: &[DMatrix<f64>], gens_q: &[DMatrix<f64>]) -> Result<GroupRep> {
    if p == 0 || q == 0 || p + q < 2 {
        return Err(Error::BadSignature(format!("need p, q >= 1, got ({p}, {q})")));
    }
    let n = p + q;
    let (ia, ib) = split_indices(p, q);
    let mut generators = Vec::new();
    for (gens, idx, k) in [(gens_p, &ia, p), (gens_q, &ib, q)] {
        for g in gens {
            if g.nrows() != k + 1 {
                return Err(Error::BadSignature(format!(
                    "block generator of size {} for factor of size {}",
                    g.nrows(),
                    k + 1
                )));
            }
            check_so1n(g, VALIDATION_EPS).map_err(|e| Error::BadSignature(e.to_string()))?;
            generators.push(validate_isometry(&embed(n + 2, g, idx), VALIDATION_EPS)?);
        }
    }
    Ok(GroupRep {
        generators,
        kind: RepKind::Split { p, q },
        n,
    })
}

pub fn default_split(p: usize, q: usize) -> Result<GroupRep> {
    if p == 0 || q == 0 {
        return Err(Error::BadSignature(format!("need p, q >= 1, got ({p}, {q})")));
    }
    build_split(p, q, &default_schottky(p), &default_schottky(q))
}

/// Lambda_{p,q} as a lifted graph: the sample (alpha, beta) of S^{n-1} maps
/// to the null vector (|alpha|, |beta|, alpha, beta), at theta =
/// arcsin |beta|.
pub fn split_limit_graph(p: usize, q: usize, samples: &[DVector<f64>]) -> Result<LipschitzGraph> {
    if p == 0 || q == 0 {
        return Err(Error::BadSignature(format!("need p, q >= 1, got ({p}, {q})")));
    }
    let values = samples
        .iter()
        .map(|s| {
            let b = s.rows(p, q).norm() / s.norm();
            b.clamp(0.0, 1.0).asin()
        })
        .collect();
    LipschitzGraph::new(samples.to_vec(), values, 1e-9)
}

pub fn split_limit_set(p: usize, q: usize, resolution: usize, seed: u64) -> Result<LimitSetSamples> {
    let s = sphere_samples(p + q, resolution, seed);
    Ok(LimitSetSamples::from_graph(split_limit_graph(p, q, &s)?))
}

/// The round sphere { theta = 0 }, limit set of every Fuchsian lattice.
pub fn fuchsian_limit_set(n: usize, resolution: usize, seed: u64) -> Result<LimitSetSamples> {
    let s = sphere_samples(n, resolution, seed);
    let len = s.len();
    Ok(LimitSetSamples::from_graph(LipschitzGraph::new(s, vec![0.0; len], 1e-9)?))
}

/// Newton iteration towards the nearest element of O(2,n) in the polar
/// sense: M <- M (3I - S) / 2 with S = J M^T J M.
pub fn project_to_group(m: &DMatrix<f64>) -> DMatrix<f64> {
    let j = signature_matrix(m.nrows() - 2);
    let id = DMatrix::<f64>::identity(m.nrows(), m.nrows());
    let mut m = m.clone();
    for _ in 0..50 {
        let s = &j * m.transpose() * &j * &m;
        let dev = (&s - &id).amax();
        m = &m * (&id * 3.0 - &s) * 0.5;
        if dev < 1e-15 {
            break;
        }
    }
    m
}

/// Multiplies each generator by exp(X) for a random X in so(2,n) of
/// Frobenius norm epsilon, then re-projects onto the group.
pub fn perturb(rep: &GroupRep, epsilon: f64, seed: u64) -> Result<GroupRep> {
    if epsilon < 0.0 || !epsilon.is_finite() {
        return Err(Error::InvalidInput("epsilon must be finite and >= 0".into()));
    }
    if epsilon == 0.0 {
        return Ok(rep.clone());
    }
    let dim = rep.n + 2;
    let j = signature_matrix(rep.n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut generators = Vec::new();
    for g in &rep.generators {
        let mut a = DMatrix::zeros(dim, dim);
        for r in 0..dim {
            for c in r + 1..dim {
                let x: f64 = rng.sample(StandardNormal);
                a[(r, c)] = x;
                a[(c, r)] = -x;
            }
        }
        let a = &a * (epsilon / a.norm());
        let m = project_to_group(&(g.matrix() * (&j * a).exp()));
        let dev = form_deviation(&m);
        let scale = 1.0f64.max(m.amax().powi(2));
        if dev > 1e-10 * scale {
            return Err(Error::ValidationFailedAfterProjection(format!("deviation {dev:e}")));
        }
        generators.push(
            validate_isometry(&m, 1e-10)
                .map_err(|e| Error::ValidationFailedAfterProjection(e.to_string()))?,
        );
    }
    Ok(GroupRep {
        generators,
        kind: RepKind::Perturbed { seed, epsilon },
        n: rep.n,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SampleMode {
    FixedPoints,
    Orbit,
}

/// Attracting eigendirection and |eigenvalue| of a matrix, by repeated
/// squaring followed by power steps until the Rayleigh quotient settles.
pub fn dominant_eigen(m: &DMatrix<f64>) -> Option<(DVector<f64>, f64)> {
    let dim = m.nrows();
    let mut p = m / m.amax();
    for _ in 0..12 {
        p = &p * &p;
        let s = p.amax();
        if s == 0.0 || !s.is_finite() {
            return None;
        }
        p /= s;
    }
    let col = (0..dim).max_by(|&a, &b| p.column(a).norm().total_cmp(&p.column(b).norm()))?;
    let mut v: DVector<f64> = p.column(col).into_owned();
    v /= v.norm();
    let mut rayleigh = f64::NAN;
    for _ in 0..200 {
        let w = m * &v;
        let r = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return None;
        }
        let next = w / norm;
        let done = (r - rayleigh).abs() <= 1e-12 * r.abs().max(1.0);
        rayleigh = r;
        let flip = if next.dot(&v) < 0.0 { -1.0 } else { 1.0 };
        v = next * flip;
        if done {
            break;
        }
    }
    Some((v, rayleigh.abs()))
}

/// Reference vector for the sign rule <lambda|c> < 0 on limit points.
fn sign_reference(rep: &GroupRep) -> DVector<f64> {
    let mut c = DVector::zeros(rep.n + 2);
    c[0] = 1.0;
    if matches!(rep.kind, RepKind::Split { .. }) {
        c[1] = 1.0;
    }
    c
}

fn orient(v: DVector<f64>, reference: &DVector<f64>) -> DVector<f64> {
    let s = crate::ambient::form(v.as_slice(), reference.as_slice());
    if s > 0.0 {
        -v
    } else {
        v
    }
}

/// Greedy deduplication at Euclidean resolution DEDUP_RESOLUTION. Points
/// closer than that would have inner products inside the sign band.
fn dedup(mut points: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    points.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut out: Vec<DVector<f64>> = Vec::new();
    let mut start = 0;
    for p in points {
        while start < out.len() && out[start][0] < p[0] - DEDUP_RESOLUTION {
            start += 1;
        }
        if !out[start..].iter().any(|q| (q - &p).norm() < DEDUP_RESOLUTION) {
            out.push(p);
        }
    }
    out
}

/// Word products for all reduced words up to `max_len`, by prefix.
fn word_products(rep: &GroupRep, max_len: usize) -> Vec<DMatrix<f64>> {
    let letters = rep.alphabet();
    let mut out = Vec::new();
    let mut frontier: Vec<(usize, DMatrix<f64>)> = vec![(usize::MAX, DMatrix::identity(rep.n + 2, rep.n + 2))];
    for _ in 0..max_len {
        let next: Vec<(usize, DMatrix<f64>)> = frontier
            .par_iter()
            .flat_map_iter(|(last, m)| {
                (0..letters.len())
                    .filter(move |&l| *last == usize::MAX || *last ^ 1 != l)
                    .map(|l| (l, m * &letters[l]))
                    .collect::<Vec<_>>()
            })
            .collect();
        out.extend(next.iter().map(|(_, m)| m.clone()));
        frontier = next;
    }
    out
}

pub fn sample_limit_set(rep: &GroupRep, word_length: usize, mode: SampleMode) -> Result<LimitSetSamples> {
    let dim = rep.n + 2;
    let id = DMatrix::<f64>::identity(dim, dim);
    if rep.generators.iter().all(|g| (g.matrix() - &id).amax() < 1e-14) {
        return LimitSetSamples::new(vec![], 1.0);
    }
    let reference = sign_reference(rep);
    let fixed = |m: &DMatrix<f64>| -> Option<DVector<f64>> {
        let (v, lambda) = dominant_eigen(m)?;
        (lambda > 1.0 + SPECTRAL_TOL).then(|| orient(v, &reference))
    };
    let words = word_products(rep, word_length);
    let points: Vec<DVector<f64>> = match mode {
        SampleMode::FixedPoints => words.par_iter().filter_map(fixed).collect(),
        SampleMode::Orbit => {
            let seed = rep
                .generators
                .iter()
                .find_map(|g| fixed(g.matrix()))
                .ok_or(Error::NoLoxodromicWords)?;
            std::iter::once(seed.clone())
                .chain(words.par_iter().map(|m| {
                    let w = m * &seed;
                    orient(&w / w.norm(), &reference)
                }).collect::<Vec<_>>())
                .collect()
        }
    };
    let points = dedup(points);
    if points.is_empty() {
        return Err(Error::NoLoxodromicWords);
    }
    let pts = points
        .into_iter()
        .map(AmbientVector::from_dvector)
        .collect::<Result<Vec<_>>>()?;
    LimitSetSamples::new(pts, 1e-6)
}

/// Matrix of A -> g1 A g2^{-1} in the coordinates u = (a+d)/2,
/// v = (b-c)/2, x1 = (a-d)/2, x2 = (b+c)/2, which carry -det to q.
pub fn so22_from_pslpair(g1: &Matrix2<f64>, g2: &Matrix2<f64>) -> Result<Isometry> {
    for g in [g1, g2] {
        let det = g.determinant();
        if (det - 1.0).abs() > 1e-9 * g.amax().powi(2).max(1.0) {
            return Err(Error::NotUnimodular { det });
        }
    }
    let g2inv = g2.try_inverse().ok_or(Error::NotUnimodular { det: 0.0 })?;
    let basis = [
        Matrix2::new(1.0, 0.0, 0.0, 1.0),
        Matrix2::new(0.0, 1.0, -1.0, 0.0),
        Matrix2::new(1.0, 0.0, 0.0, -1.0),
        Matrix2::new(0.0, 1.0, 1.0, 0.0),
    ];
    let mut m = DMatrix::zeros(4, 4);
    for (c, e) in basis.iter().enumerate() {
        let img = g1 * e * g2inv;
        let coords = sl2_to_coords(&img);
        for r in 0..4 {
            m[(r, c)] = coords[r];
        }
    }
    validate_isometry(&m, VALIDATION_EPS)
}

/// (u, v, x1, x2) of a 2x2 matrix.
pub fn sl2_to_coords(a: &Matrix2<f64>) -> [f64; 4] {
    let (aa, b, c, d) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    [(aa + d) / 2.0, (b - c) / 2.0, (aa - d) / 2.0, (b + c) / 2.0]
}

pub fn coords_to_sl2(x: &[f64]) -> Matrix2<f64> {
    Matrix2::new(x[0] + x[2], x[1] + x[3], x[3] - x[1], x[0] - x[2])
}

/// Representation spec as exchanged in JSON files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepSpec {
    pub kind: String,
    pub n: usize,
    pub generators: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RepSpec {
    pub fn from_rep(rep: &GroupRep) -> Self {
        let generators = rep
            .generators
            .iter()
            .map(|g| {
                let m = g.matrix();
                (0..m.nrows())
                    .flat_map(|r| (0..m.ncols()).map(move |c| m[(r, c)]))
                    .collect()
            })
            .collect();
        let (kind, p, q, epsilon, seed) = match rep.kind {
            RepKind::Fuchsian => ("fuchsian", None, None, None, None),
            RepKind::Split { p, q } => ("split", Some(p), Some(q), None, None),
            RepKind::Perturbed { seed, epsilon } => ("perturbed", None, None, Some(epsilon), Some(seed)),
            RepKind::Custom => ("custom", None, None, None, None),
        };
        Self {
            kind: kind.into(),
            n: rep.n,
            generators,
            p,
            q,
            epsilon,
            seed,
        }
    }

    /// Rebuilds the representation; generators are re-validated.
    pub fn to_rep(&self) -> Result<GroupRep> {
        let dim = self.n + 2;
        let mats = self
            .generators
            .iter()
            .map(|g| {
                if g.len() != dim * dim {
                    return Err(Error::InvalidInput(format!(
                        "generator with {} entries, expected {}",
                        g.len(),
                        dim * dim
                    )));
                }
                Ok(DMatrix::from_row_slice(dim, dim, g))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rep = GroupRep::custom(self.n, mats)?;
        rep.kind = match self.kind.as_str() {
            "fuchsian" => RepKind::Fuchsian,
            "split" => RepKind::Split {
                p: self.p.ok_or_else(|| Error::InvalidInput("split spec needs p".into()))?,
                q: self.q.ok_or_else(|| Error::InvalidInput("split spec needs q".into()))?,
            },
            "perturbed" => RepKind::Perturbed {
                seed: self.seed.unwrap_or(0),
                epsilon: self.epsilon.unwrap_or(0.0),
            },
            "custom" => RepKind::Custom,
            other => return Err(Error::InvalidInput(format!("unknown kind {other}"))),
        };
        Ok(rep)
    }
}
