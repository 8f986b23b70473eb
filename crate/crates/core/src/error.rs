//! Crate-wide error type.

use crate::Cx;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The eigenvalue scan found a wrong number of roots inside a band
    /// localization window, even after adaptive refinement.
    #[error("band {band}: found {found} eigenvalues in the localization window, expected {expected}; scan resolution too coarse or data outside the solvable class")]
    BandIncomplete {
        band: usize,
        found: usize,
        expected: usize,
    },

    /// Kernel dimension of the boundary matrix disagrees with the detected
    /// eigenvalue multiplicity.
    #[error("rank mismatch at lambda = {lambda}: boundary matrix kernel has dimension {kernel_dim}, eigenvalue multiplicity is {multiplicity}")]
    RankMismatch {
        lambda: f64,
        kernel_dim: usize,
        multiplicity: usize,
    },

    /// Weyl matrix requested too close to an eigenvalue.
    #[error("lambda = {lambda} is too close to an eigenvalue: boundary matrix condition number {cond:.3e}")]
    NearEigenvalue { lambda: Cx, cond: f64 },

    /// The truncated main equation is numerically singular at a grid node.
    #[error("main equation ill-conditioned at node {node} (x = {x:.6}): estimated condition {cond:.3e} exceeds the limit {limit:.3e}")]
    IllConditioned {
        node: usize,
        x: f64,
        cond: f64,
        limit: f64,
    },

    /// Stability ratio denominator vanished while the coefficients differ.
    #[error("degenerate stability ratio: Z = {z:.3e} below 1e-14 while the coefficient distance is {distance:.3e}")]
    DegenerateZ { z: f64, distance: f64 },

    /// Structurally invalid input (dimensions, ordering, coverage).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Malformed JSON or schema violation.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
