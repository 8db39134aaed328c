//! Log-Laplace transforms and logarithmic small-ball asymptotics for
//! time-integrated negative Sobolev norms of cylindrical Brownian motion and
//! of solutions to diagonalizable stochastic parabolic equations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod error;
pub mod laplace;
pub mod montecarlo;
pub mod quadrature;
pub mod spectrum;
pub mod sytaya;
pub mod tauberian;

pub use error::{Error, Result};
