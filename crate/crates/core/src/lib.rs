//! Decide whether a Boolean CSP under a global cardinality constraint
//! Σx_i = (1−2p)n admits an assignment satisfying at least AVG + t
//! constraints.
//!
//! Large variance of the value polynomial certifies the answer through a
//! fourth-moment bound. Small variance lets the polynomial be rewritten on
//! the slice so that it depends on few variables, which are then enumerated.

pub mod error;
pub mod quad;
pub mod poly;
pub mod csp_model;
pub mod cardinal_dist;
pub mod oracle;
pub mod config;
pub mod linalg;
pub mod spectra;
pub mod rounding;
pub mod solver;
pub mod corpus;
pub mod cli;

pub use error::{Error, Result};
pub use poly::{Assignment, Basis, MultilinearPoly, Subset};
pub use quad::{Quad, Rational};
