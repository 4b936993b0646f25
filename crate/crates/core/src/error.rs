use std::path::PathBuf;

use thiserror::Error;

use crate::grid::Layout;

/// Everything that can go wrong while building problems, plans, schedules or runs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown stencil preset `{0}` (expected one of 1d3p, 1d5p, 2d5p, 2d9p, 3d7p, 3d27p)")]
    UnknownPreset(String),

    #[error("unsupported vector length {0} (expected 4 or 8)")]
    UnsupportedVectorLength(usize),

    #[error("invalid grid extents {dims:?} for a {d}-dimensional stencil")]
    InvalidExtents { dims: Vec<usize>, d: usize },

    #[error("grid size overflows addressable memory")]
    SizeOverflow,

    #[error("layout {layout:?} is invalid here: {reason}")]
    InvalidLayout { layout: Layout, reason: String },

    #[error("layout mismatch: expected {expected}, found {found:?}")]
    LayoutMismatch { expected: &'static str, found: Layout },

    #[error("grid shape mismatch between source and destination")]
    ShapeMismatch,

    #[error("source and destination grids alias")]
    Aliased,

    #[error("missing dependency vector: {0}")]
    MissingDependency(String),

    #[error("plan lane count {plan} does not match vector set lane count {set}")]
    PlanLaneMismatch { plan: usize, set: usize },

    #[error("shuffle plan is not in single-assignment order: op {op} uses value {value} out of order")]
    CyclicPlan { op: usize, value: usize },

    #[error("register budget exceeded: k*(vl+1) + weights = {needed} > 4*vl = {available}")]
    RegisterBudget { needed: usize, available: usize },

    #[error("unsupported unroll-and-jam configuration: {0}")]
    UnsupportedJam(String),

    #[error("total steps {steps} is not divisible by the unrolling factor {k}")]
    StepsNotDivisible { steps: usize, k: usize },

    #[error("tiling constraint violated: {0}")]
    TileConstraint(String),

    #[error("cell {coords:?} updated twice at level {level}")]
    DoubleUpdate { coords: Vec<usize>, level: usize },

    #[error("method {method} cannot be combined with {what}")]
    InvalidCombination { method: String, what: String },

    #[error("{0}")]
    Usage(String),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
