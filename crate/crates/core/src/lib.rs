//! Galerkin POD-NN surrogates for parametric variational problems.
//!
//! The pipeline has four stages, each in its own module:
//!
//! * [`qmc`] draws Halton points and maps them to the parameter cube `[-1,1]^s`,
//! * [`problem`] solves the parametric P1 Galerkin problems that produce snapshots,
//! * [`pod`] extracts an X-orthonormal reduced basis from the snapshots,
//! * [`nn`] regresses the reduced coefficients with a tanh multilayer perceptron.
//!
//! [`analysis`] measures every error contribution and runs N-convergence studies,
//! [`io`] and [`config`] hold the on-disk formats, and [`cli`] wires it all into
//! the `podnn` binary.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod nn;
pub mod pod;
pub mod problem;
pub mod qmc;
pub mod tridiag;

pub use error::{Error, Result};
pub use num_complex::Complex64;
