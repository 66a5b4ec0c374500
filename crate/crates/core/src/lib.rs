//! Matrix-sign-function engine built on a logarithmic-sinc quadrature of the sign
//! integral, with solvers for Sylvester, Lyapunov, square-root, geometric-mean and
//! Riccati problems, a block-encoding resource ledger, and dense reference oracles.

pub mod care;
pub mod certificates;
pub mod ensemble;
pub mod error;
pub mod ledger;
pub mod matrix;
pub mod matrix_functions;
pub mod oracle;
pub mod quadrature;
pub mod sylvester;

pub use error::{Error, ErrorClass, Result};
pub use matrix::ComplexMatrix;
pub use num_complex::Complex64;
