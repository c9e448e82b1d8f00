use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseIssue {
    Syntax(String),
    NonConforming(String),
    Invalid(String),
}

impl std::fmt::Display for ParseIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseIssue::Syntax(m) => write!(f, "syntax: {m}"),
            ParseIssue::NonConforming(m) => write!(f, "non-conforming mesh: {m}"),
            ParseIssue::Invalid(m) => write!(f, "invalid value: {m}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-conforming mesh: {0}")]
    NonConforming(String),

    #[error("cell is not star-shaped with respect to the chosen center")]
    NotStarShaped,

    #[error("parse error (field `{field}`{}): {issue}", line.map(|l| format!(", line {l}")).unwrap_or_default())]
    Parse { field: String, line: Option<usize>, issue: ParseIssue },

    #[error("degree {0} is too low: local degree of accuracy must be at least 2")]
    DegreeTooLow(usize),

    #[error("invalid degree {0}: uniform degree must be at least 2")]
    InvalidDegree(usize),

    #[error("monomial Gram matrix on cell {cell} is not numerically SPD at degree {degree}")]
    IllConditioned { cell: usize, degree: usize },

    #[error("projector matrix G is singular on cell {cell}")]
    SingularG { cell: usize },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("matrix is not symmetric positive definite")]
    NotSpd,

    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("oracle not converged: relative change {change:e} between the last two refinement levels")]
    UnconvergedOracle { change: f64 },

    #[error("degenerate bilinear map on element {element}")]
    DegenerateMap { element: usize },

    #[error("cell {cell}: {source}")]
    Cell {
        cell: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn in_cell(self, cell: usize) -> Self {
        match self {
            e @ Error::Cell { .. } => e,
            e => Error::Cell { cell, source: Box::new(e) },
        }
    }

    /// Innermost error, looking through cell annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Cell { source, .. } => source.root(),
            e => e,
        }
    }
}
