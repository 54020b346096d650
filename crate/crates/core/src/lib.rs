//! Collective emission, dark/bright Bell modes, state transfer and probing
//! for two distant square arrays of two-level atoms coupled through free space.
//!
//! Units throughout: lengths in resonant wavelengths λ₀ (so `K0 = 2π`),
//! rates and energies in the single-atom decay rate γ_e, times in 1/γ_e.

pub mod analytics;
pub mod dynamics;
mod error;
pub mod geometry;
pub mod greens;
pub mod hamiltonian;
pub mod linalg;
pub mod probe;
pub mod seeding;
pub mod spectrum;

pub use error::{Error, Result};
pub use faer::c64;

/// Resonant wavenumber in units of 1/λ₀.
pub const K0: f64 = 2.0 * std::f64::consts::PI;

/// Cartesian position or displacement, in units of λ₀.
pub type Vec3 = [f64; 3];
