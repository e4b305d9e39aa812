//! Arbitrary-spin Hamiltonians with inverse-radius matrix potentials that admit a
//! generalized Laplace-Runge-Lenz vector.
//!
//! The crate is organized bottom-up:
//!
//! - [`spin_algebra`]: spin matrices, eigenprojectors of `S·n`, interaction matrices.
//! - [`operator_calculus`]: an exactly differentiable spinor field family used to
//!   check operator identities (commutators, Casimirs, determining equations).
//! - [`angular_basis`]: Clebsch-Gordan coefficients, spherical spinors and reduced
//!   angular matrices.
//! - [`so4_spectrum`]: algebraic spectra and nilpotency constraints.
//! - [`radial_solver`]: coupled-channel finite-difference eigensolvers and the
//!   closed-form / ODE-based eigenfunctions.
//! - [`special_functions`]: hypergeometric series.

pub mod angular_basis;
pub mod error;
pub mod operator_calculus;
pub mod parallel;
pub mod quadrature;
pub mod radial_solver;
pub mod so4_spectrum;
pub mod special_functions;
pub mod spin_algebra;

pub use error::{Error, Result};
pub use spin_algebra::SpinValue;
