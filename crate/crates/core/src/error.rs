use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("vector is not on the null cone (q = {q:e})")]
    NotOnCone { q: f64 },
    #[error("vector is not on AdS (q = {q:e})")]
    NotOnAdS { q: f64 },
    #[error("form check failed: max |M^T J M - J| = {deviation:e}")]
    FormViolation { deviation: f64 },
    #[error("orientation check failed: det = {det:e}")]
    OrientationViolation { det: f64 },
    #[error("time orientation check failed: image theta step = {dtheta:e}")]
    TimeOrientationViolation { dtheta: f64 },
    #[error("insufficient sampling: {0}")]
    InsufficientSampling(String),
    #[error("theta lift inconsistent on {} spanning-tree edges", edges.len())]
    LiftInconsistent { edges: Vec<(usize, usize)> },
    #[error("limit set is purely lightlike, invisible domain is empty")]
    PurelyLightlike,
    #[error("field test and product test disagree (field margin {field_margin:e}, product margin {product_margin:e})")]
    ModelDisagreement { field_margin: f64, product_margin: f64 },
    #[error("linear program failed: {0}")]
    LpFailure(String),
    #[error("degenerate convex core: {0}")]
    DegenerateCore(String),
    #[error("point is outside the past tight region (tau = {tau})")]
    OutsideTightRegion { tau: f64 },
    #[error("no sampled past horizon point is visible from the query point")]
    NoPastHorizonVisible,
    #[error("retraction is not unique at sample scale (argmax candidates {distance:e} apart)")]
    NonUniqueRetract { distance: f64 },
    #[error("vectors do not span a negative definite 2-plane")]
    DegenerateSpan,
    #[error("not a timelike plane (smallest singular value {sigma})")]
    InvalidPlane { sigma: f64 },
    #[error("tangent frame is not spacelike")]
    NonSpacelikeFrame,
    #[error("invalid crown: {0}")]
    InvalidCrown(String),
    #[error("chord boundary not found: {0}")]
    ChordBoundaryNotFound(String),
    #[error("matrix is not in SO0(1,n): {0}")]
    NotInSO1n(String),
    #[error("bad signature: {0}")]
    BadSignature(String),
    #[error("isometry validation failed after projection: {0}")]
    ValidationFailedAfterProjection(String),
    #[error("no loxodromic words up to the requested length")]
    NoLoxodromicWords,
    #[error("matrix is not unimodular (det = {det})")]
    NotUnimodular { det: f64 },
    #[error("path continuation step too large ({dtheta:.3} rad)")]
    StepTooLarge { dtheta: f64 },
    #[error("cocycle is not an integer (residual {residual:e})")]
    NonIntegerCocycle { residual: f64 },
    #[error("cocycle value {k} outside {{-1, 0, 1}}")]
    OutOfRange { k: i64 },
    #[error("graph is not invariant under the lifted action (residual {residual:e})")]
    GraphNotInvariant { residual: f64 },
    #[error("coboundary identity fails on {count} pairs")]
    CoboundaryMismatch { count: usize },
    #[error("lift shifts exceed the bound (|a| = {max_shift})")]
    UnboundedShifts { max_shift: i64 },
    #[error("no bounded cochain found for the combined representation")]
    CochainMissing,
}

impl Error {
    /// Variant name, used in CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::NotOnCone { .. } => "NotOnCone",
            Error::NotOnAdS { .. } => "NotOnAdS",
            Error::FormViolation { .. } => "FormViolation",
            Error::OrientationViolation { .. } => "OrientationViolation",
            Error::TimeOrientationViolation { .. } => "TimeOrientationViolation",
            Error::InsufficientSampling(_) => "InsufficientSampling",
            Error::LiftInconsistent { .. } => "LiftInconsistent",
            Error::PurelyLightlike => "PurelyLightlike",
            Error::ModelDisagreement { .. } => "ModelDisagreement",
            Error::LpFailure(_) => "LPFailure",
            Error::DegenerateCore(_) => "DegenerateCore",
            Error::OutsideTightRegion { .. } => "OutsideTightRegion",
            Error::NoPastHorizonVisible => "NoPastHorizonVisible",
            Error::NonUniqueRetract { .. } => "NonUniqueRetract",
            Error::DegenerateSpan => "DegenerateSpan",
            Error::InvalidPlane { .. } => "InvalidPlane",
            Error::NonSpacelikeFrame => "NonSpacelikeFrame",
            Error::InvalidCrown(_) => "InvalidCrown",
            Error::ChordBoundaryNotFound(_) => "ChordBoundaryNotFound",
            Error::NotInSO1n(_) => "NotIn_SO1n",
            Error::BadSignature(_) => "BadSignature",
            Error::ValidationFailedAfterProjection(_) => "ValidationFailedAfterProjection",
            Error::NoLoxodromicWords => "NoLoxodromicWords",
            Error::NotUnimodular { .. } => "NotUnimodular",
            Error::StepTooLarge { .. } => "StepTooLarge",
            Error::NonIntegerCocycle { .. } => "NonIntegerCocycle",
            Error::OutOfRange { .. } => "OutOfRange",
            Error::GraphNotInvariant { .. } => "GraphNotInvariant",
            Error::CoboundaryMismatch { .. } => "CoboundaryMismatch",
            Error::UnboundedShifts { .. } => "UnboundedShifts",
            Error::CochainMissing => "CochainMissing",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
