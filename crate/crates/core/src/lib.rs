//! Exact and numerical invariants of spectral averages for similitude
//! symplectic groups.
//!
//! The crate has three exact layers and two numerical ones:
//!
//! * [`root_data`]: the root datum of GSp(2n) and its adjoint quotient,
//!   Weyl group combinatorics and the dominance order (exact integers).
//! * [`padic_cartan`]: Smith normal form, minor valuations, and the
//!   classification of integral similitude matrices into Cartan double
//!   cosets (exact big integers).
//! * [`local_gsp4`]: the rank-two local double-coset integrals against an
//!   additive character, both as closed-form case evaluations and as a
//!   residue-count oracle (exact rationals).
//! * [`arch_coeff`]: holomorphic discrete-series matrix coefficients, their
//!   integrability and Lp norms (floating point plus exact rational closed
//!   forms).
//! * [`geom_side`], [`measure`], [`error_bound`]: the assembled geometric
//!   side, its expansion in Weyl characters against the reference measure,
//!   and the off-diagonal error estimate.

pub mod arch_coeff;
pub mod arith;
pub mod error;
pub mod error_bound;
pub mod geom_side;
pub mod local_gsp4;
pub mod measure;
pub mod padic_cartan;
pub mod quadrature;
pub mod root_data;

pub use error::{Error, Result};
