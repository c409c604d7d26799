//! Dynamics and analytics of an ideal quantum measurement: a tested spin
//! coupled to an N-spin Curie-Weiss magnet in contact with a phonon bath.
//!
//! The crate integrates the exact finite-N reduced dynamics of the
//! spin + magnet density matrix, the large-N Fokker-Planck registration
//! dynamics, and evaluates every characteristic time scale and failure
//! probability of the process in closed form.

pub mod bath;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod ode;
pub mod quad;
pub mod registration;
pub mod rng;
pub mod special;
pub mod subensembles;
pub mod truncation;
pub mod variants;

pub use error::CwError;
pub use model::ModelParams;
