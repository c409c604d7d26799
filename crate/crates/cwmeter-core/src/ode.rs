//! Adaptive embedded Runge-Kutta integration (Dormand-Prince 5(4)).
//!
//! The state is a flat `&[f64]` slice; complex systems interleave real and
//! imaginary parts. Error control is per-component with mixed
//! absolute/relative weighting, as in classic DOPRI5 implementations.

use crate::error::CwError;

pub trait OdeSystem {
    /// dy/dt = rhs(t, y)
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]);
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeSystem for F {
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        self(t, y, dydt)
    }
}

// Dormand-Prince coefficients.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// error = y5 - y4
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

pub struct StepperOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_max: Option<f64>,
}

impl Default for StepperOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-14, h_init: None, h_max: None }
    }
}

/// Integrate from `t0` to `t1` in place. Returns the number of accepted steps.
pub fn integrate_to<S: OdeSystem>(
    sys: &S,
    y: &mut [f64],
    t0: f64,
    t1: f64,
    opts: &StepperOptions,
) -> Result<usize, CwError> {
    if t1 <= t0 {
        return Ok(0);
    }
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];

    let span = t1 - t0;
    let h_max = opts.h_max.unwrap_or(span);
    let mut t = t0;
    sys.rhs(t, y, &mut k1);
    let mut h = opts.h_init.unwrap_or_else(|| {
        // conservative guess from the initial slope
        let ynorm = y.iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
        let fnorm = k1.iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
        let guess = if fnorm > 0.0 {
            0.01 * (ynorm + opts.atol + opts.rtol) / fnorm
        } else {
            span / 100.0
        };
        guess.clamp(span * 1e-6, span / 10.0)
    });
    h = h.min(h_max).min(span);

    let mut accepted = 0usize;
    let h_min = span * 1e-14;
    let mut first_same_as_last = false;

    while t < t1 {
        if t + h > t1 {
            h = t1 - t;
        }
        if !first_same_as_last {
            sys.rhs(t, y, &mut k1);
        }
        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        sys.rhs(t + h / 5.0, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.rhs(t + 0.3 * h, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.rhs(t + 0.8 * h, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.rhs(t + 8.0 / 9.0 * h, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.rhs(t + h, &ytmp, &mut k6);
        for i in 0..n {
            ynew[i] =
                y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        sys.rhs(t + h, &ynew, &mut k7);

        let mut err: f64 = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            let r = e / sc;
            err += r * r;
        }
        err = (err / n as f64).sqrt();

        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&ynew);
            k1.copy_from_slice(&k7);
            first_same_as_last = true;
            accepted += 1;
        } else {
            first_same_as_last = true; // k1 still valid at unchanged t
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h = (h * factor).min(h_max);
        if h < h_min && t < t1 {
            return Err(CwError::StepCollapse { t, h });
        }
    }
    Ok(accepted)
}

/// Integrate and collect the state at each requested sample time.
/// `samples` must be non-decreasing and start at or after `t0`.
pub fn integrate_sampled<S: OdeSystem>(
    sys: &S,
    y0: &[f64],
    t0: f64,
    samples: &[f64],
    opts: &StepperOptions,
) -> Result<Vec<Vec<f64>>, CwError> {
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut out = Vec::with_capacity(samples.len());
    for &ts in samples {
        if ts < t {
            return Err(CwError::InvalidParameter(
                "sample times must be non-decreasing".into(),
            ));
        }
        integrate_to(sys, &mut y, t, ts, opts)?;
        t = ts;
        out.push(y.clone());
    }
    Ok(out)
}
