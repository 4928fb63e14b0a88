use thiserror::Error;

use crate::mesh::Tag;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate cell {cell}: signed volume {volume:e}")]
    DegenerateCell { cell: usize, volume: f64 },

    #[error("unsupported MSH format version {0}")]
    UnsupportedMshVersion(String),

    #[error("MSH parse error at line {line}: {message}")]
    MshParse { line: usize, message: String },

    #[error("boundary facet with vertices {vertices:?} has no physical tag")]
    UntaggedFacet { vertices: Vec<usize> },

    #[error("inconsistent element dimensionality: {0}")]
    InconsistentDimension(String),

    #[error("invalid tag map: {0}")]
    InvalidTagMap(String),

    #[error("entry ({row}, {col}) out of bounds for a {nrows}x{ncols} matrix")]
    IndexOutOfBounds {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },

    #[error("matrix is singular: no pivot found at row {row}")]
    SingularMatrix { row: usize },

    #[error("matrix is numerically singular: factorization produced non-finite values")]
    NumericallySingular,

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("linear solve residual {achieved:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { achieved: f64, tolerance: f64 },

    #[error("boundary marker {0} has no boundary condition")]
    MissingBoundaryCondition(Tag),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("region {0:?} contains no boundary facets")]
    EmptyRegion(Vec<Tag>),

    #[error("solution was computed with configuration {found}, but the problem has {expected}")]
    ConfigurationMismatch { expected: String, found: String },

    #[error("Newton iteration diverged; residual log {log:?}")]
    NewtonDiverged { log: Vec<f64> },

    #[error("Newton iteration did not converge in {iterations} iterations; residual log {log:?}")]
    NewtonMaxIterations { iterations: usize, log: Vec<f64> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidMesh(_) => "invalid_mesh",
            Error::DegenerateCell { .. } => "degenerate_cell",
            Error::UnsupportedMshVersion(_) => "unsupported_msh_version",
            Error::MshParse { .. } => "msh_parse",
            Error::UntaggedFacet { .. } => "untagged_facet",
            Error::InconsistentDimension(_) => "inconsistent_dimension",
            Error::InvalidTagMap(_) => "invalid_tag_map",
            Error::IndexOutOfBounds { .. } => "index_out_of_bounds",
            Error::SingularMatrix { .. } => "singular_matrix",
            Error::NumericallySingular => "numerically_singular",
            Error::Factorization(_) => "factorization",
            Error::ResidualTooLarge { .. } => "residual_too_large",
            Error::MissingBoundaryCondition(_) => "missing_boundary_condition",
            Error::InvalidProblem(_) => "invalid_problem",
            Error::EmptyRegion(_) => "empty_region",
            Error::ConfigurationMismatch { .. } => "configuration_mismatch",
            Error::NewtonDiverged { .. } => "newton_diverged",
            Error::NewtonMaxIterations { .. } => "newton_max_iterations",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::AtLevel { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

impl Error {
    /// Machine-readable description: `kind`, `message` and, for errors
    /// raised while solving a mesh level, `level`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut value = serde_json::json!({
            "kind": self.kind(),
            "message": self.to_string(),
        });
        if let Error::AtLevel { level, .. } = self {
            value["level"] = serde_json::json!(level);
        }
        value
    }
}
