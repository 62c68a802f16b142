//! Numerical toolkit for multidimensional screening problems.
//!
//! A problem is a preference `b(x, y)` between buyer types `x` and goods `y`,
//! a production cost `c(y)`, a type distribution, and a null good that must
//! be sold at cost. The crate samples such problems onto grids, checks the
//! regularity conditions (B0) to (B3u), reduces problems whose dimensions
//! differ to equal-dimensional ones, and searches for profit-maximizing
//! price schedules.

pub mod cluster;
pub mod conditions;
pub mod config;
pub mod domain;
pub mod expr;
pub mod par;
pub mod preference;
pub mod reduction;
pub mod solver;
pub mod transform;
pub mod verify;

use thiserror::Error;

pub use domain::{DiscreteProblem, ScreeningProblem, ToleranceSet};
pub use transform::{Price, PriceSchedule, UtilityProfile};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] expr::ParseError),
    #[error(transparent)]
    Domain(#[from] domain::DomainError),
    #[error(transparent)]
    Transform(#[from] transform::TransformError),
    #[error(transparent)]
    Reduction(#[from] reduction::ReductionError),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("precondition not met: {0}")]
    Precondition(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
