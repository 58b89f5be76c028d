//! The quadratic space R^{2,n} with form q = -u^2 - v^2 + x_1^2 + ... + x_n^2,
//! causal sign tests, isometry validation and conformal coordinates.

use std::f64::consts::{PI, SQRT_2};
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-9;

/// Tolerance on the Euclidean norm for inputs that must be normalized.
const NORMALIZED_TOL: f64 = 1e-10;

/// Bilinear form on raw coordinate slices ordered (u, v, x_1, ..., x_n).
#[inline]
pub fn form(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = -a[0] * b[0] - a[1] * b[1];
    for i in 2..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(t: f64) -> f64 {
    let mut r = t.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Great-circle distance between unit vectors.
pub fn spherical_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut dm = 0.0;
    let mut dp = 0.0;
    for (x, y) in a.iter().zip(b) {
        dm += (x - y) * (x - y);
        dp += (x + y) * (x + y);
    }
    2.0 * dm.sqrt().atan2(dp.sqrt())
}

/// The signature matrix J = diag(-1, -1, 1, ..., 1) of size n+2.
pub fn signature_matrix(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::identity(n + 2, n + 2);
    j[(0, 0)] = -1.0;
    j[(1, 1)] = -1.0;
    j
}

/// A point of R^{2,n}.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbientVector(DVector<f64>);

impl AmbientVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        Self::from_dvector(DVector::from_vec(coords))
    }

    pub fn from_dvector(v: DVector<f64>) -> Result<Self> {
        if v.len() < 4 {
            return Err(Error::InvalidInput(format!(
                "ambient vector needs n+2 >= 4 coordinates, got {}",
                v.len()
            )));
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        Ok(Self(v))
    }

    pub fn dim_n(&self) -> usize {
        self.0.len() - 2
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn u(&self) -> f64 {
        self.0[0]
    }

    pub fn v(&self) -> f64 {
        self.0[1]
    }

    pub fn x(&self) -> &[f64] {
        &self.0.as_slice()[2..]
    }

    pub fn q(&self) -> f64 {
        form(self.as_slice(), self.as_slice())
    }

    pub fn inner(&self, other: &AmbientVector) -> f64 {
        form(self.as_slice(), other.as_slice())
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= NORMALIZED_TOL
    }

    /// Positive rescaling to unit Euclidean norm.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::InvalidInput("zero vector".into()));
        }
        Ok(Self(&self.0 / n))
    }

    /// Unit representative of the projective line, with the first nonzero
    /// entry of (u, v) positive. Only meaningful for +-identification; sign
    /// tests always use [`AmbientVector::normalized`].
    pub fn canonical(&self) -> Result<Self> {
        let n = self.normalized()?;
        let lead = if n.0[0].abs() > 1e-12 { n.0[0] } else { n.0[1] };
        Ok(if lead < 0.0 { -n } else { n })
    }

    /// Rescales so that q = -1 (timelike input only).
    pub fn to_ads(&self) -> Result<Self> {
        let q = self.q();
        if q >= 0.0 {
            return Err(Error::NotOnAdS { q });
        }
        Ok(Self(&self.0 / (-q).sqrt()))
    }
}

impl Add for &AmbientVector {
    type Output = AmbientVector;
    fn add(self, rhs: &AmbientVector) -> AmbientVector {
        AmbientVector(&self.0 + &rhs.0)
    }
}

impl Sub for &AmbientVector {
    type Output = AmbientVector;
    fn sub(self, rhs: &AmbientVector) -> AmbientVector {
        AmbientVector(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &AmbientVector {
    type Output = AmbientVector;
    fn mul(self, rhs: f64) -> AmbientVector {
        AmbientVector(&self.0 * rhs)
    }
}

impl Neg for AmbientVector {
    type Output = AmbientVector;
    fn neg(self) -> AmbientVector {
        AmbientVector(-self.0)
    }
}

pub fn q_eval(v: &AmbientVector) -> f64 {
    v.q()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CausalTag {
    Timelike,
    Lightlike,
    Spacelike,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CausalClass {
    pub tag: CausalTag,
    /// q of the unit representative.
    pub value: f64,
    pub marginal: bool,
}

pub fn classify(v: &AmbientVector, eps: f64) -> Result<CausalClass> {
    let value = v.normalized()?.q();
    let tag = if value < -eps {
        CausalTag::Timelike
    } else if value > eps {
        CausalTag::Spacelike
    } else {
        CausalTag::Lightlike
    };
    Ok(CausalClass {
        tag,
        value,
        marginal: value.abs() <= eps,
    })
}

/// Sign of <x|y> with a zero band of width eps. Both inputs must have unit
/// Euclidean norm so that eps has a fixed meaning.
pub fn causal_sign(x: &AmbientVector, y: &AmbientVector, eps: f64) -> Result<i8> {
    if x.dim_n() != y.dim_n() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    if !x.is_normalized() || !y.is_normalized() {
        return Err(Error::InvalidInput(
            "causal_sign expects unit Euclidean norm inputs".into(),
        ));
    }
    Ok(sign_with_band(x.inner(y), eps))
}

#[inline]
pub fn sign_with_band(value: f64, eps: f64) -> i8 {
    if value > eps {
        1
    } else if value < -eps {
        -1
    } else {
        0
    }
}

/// A point of the universal cover R x S^{n-1} of the Einstein universe.
#[derive(Clone, Debug, PartialEq)]
pub struct CylPoint {
    pub theta: f64,
    sphere: DVector<f64>,
}

impl CylPoint {
    pub fn new(theta: f64, sphere: DVector<f64>) -> Result<Self> {
        let n = sphere.norm();
        if !theta.is_finite() || n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidInput("bad cylinder point".into()));
        }
        Ok(Self {
            theta,
            sphere: sphere / n,
        })
    }

    pub fn sphere(&self) -> &DVector<f64> {
        &self.sphere
    }

    /// Index k of the sheet [-pi + 2k pi, pi + 2k pi) containing theta.
    pub fn covering_level(&self) -> i64 {
        ((self.theta + PI) / (2.0 * PI)).floor() as i64
    }
}

pub fn cone_to_cyl(v: &AmbientVector, eps: f64) -> Result<CylPoint> {
    let w = v.normalized()?;
    let q = w.q();
    if q.abs() > eps {
        return Err(Error::NotOnCone { q });
    }
    let r = w.u().hypot(w.v());
    let sphere = DVector::from_column_slice(w.x()) / r;
    CylPoint::new(w.v().atan2(w.u()), sphere)
}

/// The unit representative (cos t, sin t, s) / sqrt 2.
pub fn cyl_to_cone(p: &CylPoint) -> AmbientVector {
    let n = p.sphere.len();
    let mut c = DVector::zeros(n + 2);
    c[0] = p.theta.cos();
    c[1] = p.theta.sin();
    c.rows_mut(2, n).copy_from(&p.sphere);
    AmbientVector(c / SQRT_2)
}

fn check_ads(v: &AmbientVector, eps: f64) -> Result<()> {
    let q = v.q();
    if (q + 1.0).abs() > eps * (1.0 + v.norm().powi(2)) {
        return Err(Error::NotOnAdS { q });
    }
    Ok(())
}

/// AdS point to (theta, disk point on the open upper hemisphere of S^n).
pub fn ads_to_conformal(v: &AmbientVector, eps: f64) -> Result<(f64, DVector<f64>)> {
    check_ads(v, eps)?;
    let r = v.u().hypot(v.v());
    let n = v.dim_n();
    let mut disk = DVector::zeros(n + 1);
    for i in 0..n {
        disk[i] = v.x()[i] / r;
    }
    disk[n] = 1.0 / r;
    let norm = disk.norm();
    Ok((v.v().atan2(v.u()), disk / norm))
}

/// Inverse of [`ads_to_conformal`]; the disk point must have positive last
/// coordinate.
pub fn conformal_to_ads(theta: f64, disk: &DVector<f64>) -> Result<AmbientVector> {
    let n = disk.len() - 1;
    let h = disk[n] / disk.norm();
    if h <= 0.0 {
        return Err(Error::InvalidInput(
            "disk point on or below the equator has no AdS preimage".into(),
        ));
    }
    let r = 1.0 / h;
    let mut c = DVector::zeros(n + 2);
    c[0] = r * theta.cos();
    c[1] = r * theta.sin();
    let dn = disk.norm();
    for i in 0..n {
        c[i + 2] = r * disk[i] / dn;
    }
    Ok(AmbientVector(c))
}

/// Membership of y in the affine domain U(x) = { <x|y> < 0 }.
pub fn affine_domain_contains(x: &AmbientVector, y: &AmbientVector, eps: f64) -> Result<bool> {
    check_ads(x, eps.max(DEFAULT_EPS))?;
    check_ads(y, eps.max(DEFAULT_EPS))?;
    Ok(causal_sign(&x.normalized()?, &y.normalized()?, eps)? == -1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DualSide {
    Past,
    Future,
}

/// Whether y lies on one of the dual hyperplanes H^-(x), H^+(x), and which.
pub fn dual_hyperplane_contains(
    x: &AmbientVector,
    y: &AmbientVector,
    eps: f64,
) -> Result<Option<DualSide>> {
    check_ads(x, eps.max(DEFAULT_EPS))?;
    check_ads(y, eps.max(DEFAULT_EPS))?;
    if causal_sign(&x.normalized()?, &y.normalized()?, eps)? != 0 {
        return Ok(None);
    }
    let tx = x.v().atan2(x.u());
    let ty = y.v().atan2(y.u());
    Ok(Some(if wrap_angle(ty - tx) > 0.0 {
        DualSide::Future
    } else {
        DualSide::Past
    }))
}

/// Lorentzian distance between timelike-related AdS points (arccos(-<x|y>)).
pub fn lorentzian_distance(x: &AmbientVector, y: &AmbientVector) -> f64 {
    (-x.inner(y)).clamp(-1.0, 1.0).acos()
}

/// Conformal-model chronology margin between an ideal point `x` and a point
/// `y` of AdS or of the boundary: |dtheta| - d, with dtheta wrapped to
/// (-pi, pi] and d the round distance in the closed hemisphere. Positive
/// means causally related through a timelike curve.
pub fn conformal_chronology_margin(x: &AmbientVector, y: &AmbientVector, eps: f64) -> Result<f64> {
    let px = cone_to_cyl(x, eps)?;
    let n = x.dim_n();
    let (ty, disk) = if classify(y, eps)?.tag == CausalTag::Lightlike {
        let py = cone_to_cyl(y, eps)?;
        let mut d = DVector::zeros(n + 1);
        d.rows_mut(0, n).copy_from(py.sphere());
        (py.theta, d)
    } else {
        ads_to_conformal(&y.to_ads()?, 1e-6)?
    };
    let mut bx = DVector::zeros(n + 1);
    bx.rows_mut(0, n).copy_from(px.sphere());
    let d = spherical_distance(bx.as_slice(), disk.as_slice());
    Ok(wrap_angle(ty - px.theta).abs() - d)
}

/// Rate dtheta/ds of the theta coordinate along the curve through the cone
/// point `p` with tangent `t` (both in R^{2,n}).
pub fn theta_rate(p: &[f64], t: &[f64]) -> f64 {
    (p[0] * t[1] - p[1] * t[0]) / (p[0] * p[0] + p[1] * p[1])
}

/// An element of O(2,n) that passed (or was not yet run through) validation.
#[derive(Clone, Debug, PartialEq)]
pub struct Isometry {
    matrix: DMatrix<f64>,
    validated: bool,
}

impl Isometry {
    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n + 2, n + 2),
            validated: true,
        }
    }

    /// Wraps a matrix without checks. `validated` is false.
    pub fn unchecked(matrix: DMatrix<f64>) -> Self {
        Self {
            matrix,
            validated: false,
        }
    }

    pub(crate) fn trusted(matrix: DMatrix<f64>) -> Self {
        Self {
            matrix,
            validated: true,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn validated(&self) -> bool {
        self.validated
    }

    pub fn dim_n(&self) -> usize {
        self.matrix.nrows() - 2
    }

    pub fn apply(&self, x: &AmbientVector) -> AmbientVector {
        AmbientVector(&self.matrix * &x.0)
    }

    pub fn compose(&self, other: &Isometry) -> Isometry {
        Isometry {
            matrix: &self.matrix * &other.matrix,
            validated: self.validated && other.validated,
        }
    }

    /// Inverse via J M^T J.
    pub fn inverse(&self) -> Isometry {
        let j = signature_matrix(self.dim_n());
        Isometry {
            matrix: &j * self.matrix.transpose() * &j,
            validated: self.validated,
        }
    }
}

/// Largest entry of |M^T J M - J|.
pub fn form_deviation(m: &DMatrix<f64>) -> f64 {
    let j = signature_matrix(m.nrows() - 2);
    (m.transpose() * &j * m - &j).amax()
}

/// d theta of the image of the future vector d/dtheta at the probe point
/// (theta = 0, first axis); positive iff time orientation is preserved.
pub fn time_orientation_rate(m: &DMatrix<f64>) -> f64 {
    let dim = m.nrows();
    let mut p = DVector::zeros(dim);
    p[0] = 1.0;
    p[2] = 1.0;
    let mut t = DVector::zeros(dim);
    t[1] = 1.0;
    let mp = m * p;
    let mt = m * t;
    theta_rate(mp.as_slice(), mt.as_slice())
}

/// Checks M^T J M = J (entrywise, scaled by the squared magnitude of M),
/// det M > 0 and preservation of the time orientation.
pub fn validate_isometry(m: &DMatrix<f64>, eps: f64) -> Result<Isometry> {
    if !m.is_square() || m.nrows() < 4 {
        return Err(Error::InvalidInput(format!(
            "expected square matrix of size n+2 >= 4, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("non-finite matrix entry".into()));
    }
    let scale = 1.0f64.max(m.amax().powi(2));
    let deviation = form_deviation(m);
    if deviation > eps * scale {
        return Err(Error::FormViolation { deviation });
    }
    let det = m.clone().determinant();
    if det <= 0.0 {
        return Err(Error::OrientationViolation { det });
    }
    let dtheta = time_orientation_rate(m);
    if dtheta <= 0.0 {
        return Err(Error::TimeOrientationViolation { dtheta });
    }
    Ok(Isometry::trusted(m.clone()))
}

/// Rotation by `alpha` in the (u, v) plane.
pub fn uv_rotation(n: usize, alpha: f64) -> DMatrix<f64> {
    let mut m = DMatrix::identity(n + 2, n + 2);
    let (s, c) = alpha.sin_cos();
    m[(0, 0)] = c;
    m[(0, 1)] = -s;
    m[(1, 0)] = s;
    m[(1, 1)] = c;
    m
}

/// Hyperbolic rotation of rapidity `s` mixing coordinates `i` (negative) and
/// `j` (positive).
pub fn boost(n: usize, i: usize, j: usize, s: f64) -> DMatrix<f64> {
    let mut m = DMatrix::identity(n + 2, n + 2);
    let (sh, ch) = (s.sinh(), s.cosh());
    m[(i, i)] = ch;
    m[(j, j)] = ch;
    m[(i, j)] = sh;
    m[(j, i)] = sh;
    m
}
