//! Stochastic disentanglement representation of the quantum quartic
//! oscillator `H = p²/2m + mω²x²/2 + λx⁴/4`.
//!
//! The evolution operator is written as a noise average of products of
//! three exponentials whose coefficients obey complex stochastic
//! differential equations. The crate integrates those equations, estimates
//! wave-packet moments and propagators by Monte Carlo, and checks them
//! against exact limits, a Crank–Nicolson grid solver, the Dyson series and
//! semiclassical formulas.

pub mod cli;
pub mod disentangle;
pub mod error;
pub mod model;
pub mod observables;
pub mod perturbation;
pub mod reference;
pub mod semiclassical;
pub mod stats;
pub mod wigner;

pub use error::{Error, Result};
pub use model::{ModelParams, Schedule};
pub use observables::{GaussianPacket, MomentEstimate, MonteCarlo, Which};
