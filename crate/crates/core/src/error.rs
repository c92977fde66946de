use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} has zero variance")]
    ConstantColumn(usize),

    #[error("input contains NaN or infinite values")]
    NonFiniteInput,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("quadratic cost is not positive semidefinite")]
    NonPsdCost,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("debiasing QP for row {row} could not be made feasible")]
    InfeasibleBudget { row: usize },

    #[error("infeasible simulation targets: {0}")]
    InfeasibleTargets(String),

    #[error("non-positive variance at coordinate {0}")]
    NonPositiveVariance(usize),

    #[error("degenerate residual: n = {n} but pilot support has {support} variables")]
    DegenerateResidual { n: usize, support: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("node {node}: {source}")]
    Node {
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at_node(self, node: usize) -> Self {
        Error::Node {
            node,
            source: Box::new(self),
        }
    }

    pub fn at_replicate(self, replicate: usize) -> Self {
        Error::Replicate {
            replicate,
            source: Box::new(self),
        }
    }

    /// Strips node/replicate context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Node { source, .. } | Error::Replicate { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of the numerical machinery rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::NotConverged { .. }
                | Error::NonPsdCost
                | Error::NotPositiveDefinite
                | Error::InfeasibleBudget { .. }
                | Error::NonPositiveVariance(_)
                | Error::DegenerateResidual { .. }
        )
    }
}
