//! Error type shared across the crate.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum CwError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "quadrature did not converge: target {target:.3e}, reached {reached:.3e} with {segments} segments"
    )]
    Quadrature {
        target: f64,
        reached: f64,
        segments: usize,
    },

    #[error("ODE step size collapsed at t = {t:.6e} (h = {h:.3e}); last good state kept")]
    StepCollapse { t: f64, h: f64 },

    #[error("normalization drifted by {drift:.3e} at t = {t:.6e}")]
    NormalizationDrift { t: f64, drift: f64 },

    #[error("no registration: coupling g = {g:.6e} is at or below the critical field h_c = {hc:.6e}")]
    NoRegistration { g: f64, hc: f64 },

    #[error("peak straddles the repulsive fixed point at m = {m_rep:.6e}; use the bifurcation Green function instead")]
    PeakStraddlesBifurcation { m_rep: f64 },

    #[error("regime violated: {0}")]
    RegimeViolated(String),

    #[error("unidentifiable: {0}")]
    Unidentifiable(String),

    #[error("bath damping cross-check failed: closed form and quadrature differ by {rel:.3e} at t = {t:.6e} (cutoff mismatch?)")]
    BathDampingMismatch { t: f64, rel: f64 },
}
