//! Numerical toolkit for the forced p-Laplacian oscillator with a jumping
//! nonlinearity,
//!
//! ```text
//! (phi_p(x'))' + a*phi_p(x+) - b*phi_p(x-) + f(x) = e(t)
//! ```
//!
//! built around the machinery that makes this equation tractable:
//! generalized p-trigonometric functions ([`ptrig`]), the closed-form
//! auxiliary orbit of the unperturbed asymmetric oscillator ([`jumping`]),
//! the action-angle chart and stroboscopic dynamics ([`dynamics`]), the
//! averaged potential and scaling diagnostics ([`reduction`]), and
//! experiment drivers for rotation numbers, twist, invariant curves, and
//! boundedness ([`analysis`]).

pub mod analysis;
pub mod dynamics;
mod error;
pub mod jumping;
pub mod ptrig;
pub mod quad;
pub mod reduction;
mod roots;

pub use error::{Error, HypothesisViolation, Result};
