use thiserror::Error;

use crate::model::NodeSubset;

pub type Result<T, E = AoiError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AoiError {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid rate: {0}")]
    InvalidRate(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// The request exceeds a configured size limit; the message names the
    /// limit and, where useful, the alternative engine to use.
    #[error("capacity exceeded: {what} (limit {limit})")]
    Capacity { what: String, limit: usize },

    /// Some subset reachable from the query has no renewal inflow at all, so
    /// its age grows without bound.
    #[error("unbounded age: subset {subset} has zero total inflow rate")]
    Unbounded { subset: NodeSubset },

    #[error("infeasible sensing layout: (d+1)q < n for n={n}, q={q}, d={d}")]
    InfeasibleLayout { n: usize, q: usize, d: usize },

    /// A line-bound step produced a non-positive denominator.
    #[error("line bound regime violation at k={k}: denominator {denominator}")]
    RegimeViolation { k: usize, denominator: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("fit error: {0}")]
    Fit(String),
}
