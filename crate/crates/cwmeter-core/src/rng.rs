//! Reproducible random number streams.
//!
//! One 64-bit root seed; independent tasks derive their generator from the
//! root seed plus a stream index (ChaCha streams), so parallel sweeps are
//! reproducible regardless of scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Generator for task number `stream` under a common `root_seed`.
pub fn task_rng(root_seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(root_seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal via Box-Muller (two uniforms, one deviate kept).
pub fn standard_normal(rng: &mut impl rand::Rng) -> f64 {
    loop {
        let u1: f64 = rng.gen::<f64>();
        if u1 <= f64::MIN_POSITIVE {
            continue;
        }
        let u2: f64 = rng.gen::<f64>();
        return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    }
}
