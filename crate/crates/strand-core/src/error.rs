use thiserror::Error;

/// Errors raised by grid construction, field algebra, geometry and dynamics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid {field} must be finite, got {value}")]
    NonFiniteBound { field: &'static str, value: f64 },

    #[error("grid n_nodes must be at least 3, got {n_nodes}")]
    TooFewNodes { n_nodes: usize },

    #[error("grid x_max ({x_max}) must exceed x_min ({x_min})")]
    EmptyInterval { x_min: f64, x_max: f64 },

    #[error("field has {actual} values but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("field value at node {node} is not finite")]
    NonFiniteValue { node: usize },

    #[error("{name} must be positive and finite, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("operands live on different grids")]
    GridMismatch,

    #[error(
        "configuration is not an embedding: slope {slope:e} at node {node} \
         (threshold {threshold:e})"
    )]
    NotEmbedding { node: usize, slope: f64, threshold: f64 },

    #[error(
        "singular state at t = {t}: |phi_x| = {phi_x:e} at node {node} \
         is below the embedding threshold {threshold:e}"
    )]
    SingularState { t: f64, node: usize, phi_x: f64, threshold: f64 },

    #[error("compact section must vanish on the boundary band: value {value:e} at node {node}")]
    CompactSupportViolation { node: usize, value: f64 },

    #[error("band width {band_width} does not leave interior nodes on a grid of {n_nodes}")]
    BandTooWide { band_width: usize, n_nodes: usize },

    #[error("compact support needs band_width >= 1")]
    ZeroBandWidth,

    #[error("path segment needs at least 3 knots, got {n_knots}")]
    TooFewKnots { n_knots: usize },

    #[error("path needs at least one segment")]
    EmptyPath,

    #[error("segments do not abut: previous segment ends at t = {t_end}, next starts at t = {t_start}")]
    SegmentsDoNotAbut { t_end: f64, t_start: f64 },

    #[error("path is discontinuous at the segment boundary t = {t}: configuration jump {max_jump:e}")]
    DiscontinuousPath { t: f64, max_jump: f64 },

    #[error("compact-mode path must pin the boundary band: node {node} moves within segment {segment}")]
    UnpinnedBand { segment: usize, node: usize },

    #[error("per-knot field has a different shape from the path (segment {segment}: {expected} vs {actual} knots)")]
    ShapeMismatch { segment: usize, expected: usize, actual: usize },

    #[error("knot index out of range: segment {segment}, knot {knot}")]
    KnotOutOfRange { segment: usize, knot: usize },

    #[error("variation half-width delta = {delta} is too large: path at s = {s} is not an embedding")]
    DeltaTooLarge { delta: f64, s: f64 },

    #[error("finite-difference step s_h = {s_h} must lie in (0, {max}]")]
    InvalidFdStep { s_h: f64, max: f64 },

    #[error("simulation horizon t_end = {t_end} does not exceed the start time {t_start}")]
    InvalidHorizon { t_start: f64, t_end: f64 },

    #[error("motion residual needs at least one trial")]
    NoTrials,
}

pub type Result<T> = std::result::Result<T, Error>;
