//! Covariant continuum dynamics of a body embedded in a Riemannian space.
//!
//! The crate discretizes configurations `κ: I × B → S` of a body `B = [0,1]^d`
//! in a space manifold `S` given in a single chart, evaluates the nonlinear
//! equations of motion for smooth constitutive densities, and assembles
//! their covariant linearization together with independent numerical
//! oracles for every identity the linearization relies on.

// Tensor code indexes several arrays per loop; NaN-rejecting comparisons are
// written as negated orderings on purpose.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod constitutive;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod kinematics;
pub mod linearize;
pub mod oracle;
pub mod verify;

pub use error::{Error, Result};
