//! Direct and inverse spectral problems for self-adjoint matrix
//! Sturm-Liouville operators on `(0, pi)` with Robin boundary conditions,
//! and for Sturm-Liouville operators on star-shaped graphs.
//!
//! The library covers three layers:
//!
//! * a forward solver (`direct`, `graph`) that computes eigenvalue bands,
//!   norming vectors, weight matrices and the Weyl matrix of a problem;
//! * a constructive inverse solver (`kernels`, `inverse`, `graph`) that
//!   assembles the linear main equation of the method of spectral mappings
//!   from spectral data and recovers the potential and the boundary
//!   matrices from its solution;
//! * stability diagnostics (`stability`) quantifying how far two spectral
//!   data sequences are from each other and whether data sits inside the
//!   class on which the inverse map is uniformly bounded.

pub mod direct;
pub mod error;
pub mod graph;
pub mod inverse;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod par;
pub mod problem;
pub mod spectral;
pub mod stability;
pub mod synth;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type Cx = num_complex::Complex64;
/// Dynamically sized complex matrix.
pub type CMat = nalgebra::DMatrix<Cx>;
/// Dynamically sized complex column vector.
pub type CVec = nalgebra::DVector<Cx>;

/// Hermiticity tolerance (operator norm) for coefficient validation.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Tolerance on the mean defect `h + H + 1/2 ∫ Q` for the restricted class.
pub const MEAN_DEFECT_TOL: f64 = 1e-8;
