//! Finite-dimensional matrix stochastic control driven by common and GUE noise,
//! together with the free-probability diagnostics used to check the large-`n`
//! behaviour of its value functions.
//!
//! Modules, bottom-up:
//!
//! * [`matrixcore`]: Hermitian matrices, normalized traces, eigendecomposition,
//!   functional calculus.
//! * [`randmat`]: reproducible GUE, GUE Brownian increments, Haar unitaries.
//! * [`ncpoly`]: non-commutative polynomials, free difference quotients and
//!   cyclic derivatives.
//! * [`nclaw`]: empirical non-commutative laws, the arctan metric, freeness
//!   statistics, semicircle references.
//! * [`gaussdisc`]: binning of the common noise and truncated-Gaussian analytics.
//! * [`laplacian`]: cylindrical functions, Hessians, GUE and free Laplacians.
//! * [`control`]: control problems, discrete policies, value optimization and
//!   the Boué–Dupuis functionals.

pub mod control;
pub mod error;
pub mod gaussdisc;
pub mod laplacian;
pub mod matrixcore;
pub mod nclaw;
pub mod ncpoly;
pub mod quad;
pub mod randmat;

pub use error::{Error, Result};
pub use num_complex::Complex64;
