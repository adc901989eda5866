//! Exact finite-N fluctuation statistics for the eigenvalues of the complex and
//! quaternion Ginibre ensembles.
//!
//! The crate computes covariances of linear eigenvalue statistics, counting
//! variances and cumulants from closed-form finite-N expressions, compares them
//! with their large-N laws, and cross-checks everything with Monte Carlo.

pub mod angular;
pub mod asymptotics;
pub mod dpp;
pub mod error;
pub mod exec;
pub mod mc;
pub mod radial;
pub mod specfun;

pub use error::{Error, Result};
