//! Numerical computer-algebra engine for dynamical elliptic integrable
//! structures.
//!
//! The crate builds the odd theta function, Felder's dynamical elliptic
//! R-matrix, dynamical elliptic L-operators and the Manin matrices they
//! induce, the commuting trace families `t_m(u)` and the quantum
//! characteristic polynomial, and their degeneration to the elliptic
//! `gl_n` Gaudin model.  Every identity in that chain (DYBE, RLL, Manin
//! property, trace exchange, Newton identities, commutativity modulo the
//! Cartan ideal, ...) is verified by residual checks at randomly sampled
//! complex parameter points.
//!
//! The crate is `no_std`-compatible (`default-features = false`); it only
//! needs `alloc`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod cmath;
pub mod ctx;
pub mod error;
pub mod felder;
pub mod gaudin;
pub mod linalg;
pub mod lops;
pub mod opalg;
pub mod residual;
pub mod report;

pub mod sampling;
pub mod scalar;
pub mod theta;

pub use ctx::{Ctx, EllipticParams};
pub use error::{Error, Result};
pub use report::ResidualReport;
pub use sampling::SamplingPolicy;
pub use scalar::{ScalarExpr, VarId};

/// Complex double, the base scalar of the whole engine.
pub type C64 = num_complex::Complex64;

pub use ndarray;
pub use num_complex;
