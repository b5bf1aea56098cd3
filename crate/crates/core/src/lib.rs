//! Numerical workbench for hylomorphic solitary waves.
//!
//! Computes standing-wave profiles of the nonlinear Klein-Gordon equation
//! (Q-balls), planar vortices with angular momentum, and electrostatic
//! Klein-Gordon-Maxwell bound states, by minimizing the energy
//! `E(u, ω) = J(u) + ω² K(u)` at fixed charge `H(u, ω) = 2 ω K(u) = σ`.
//! An independent shooting integrator cross-validates the variational
//! solutions, and a built-in verification suite checks every identity the
//! construction is supposed to satisfy (Lagrange multiplier `λ = 2ω`,
//! frequency band `0 < ω < m`, gauge bound `qΦ < 1`, charge scaling, ...).

pub mod error;
pub mod potential;
pub mod grid;
pub mod functionals;
pub mod maxwell;
pub mod minimizer;
pub mod shooting;
pub mod analysis;
pub mod acceptance;

pub use error::{Error, Result};
