//! Imperfect-measurement analytics: a non-conserved tested observable
//! (transverse field b on the spin) and the two-apparatus simultaneous
//! measurement probability algebra.

use num_complex::Complex64;

use crate::dynamics::SpinState;
use crate::error::CwError;
use crate::model::ModelParams;
use crate::special::dawson;

/// Leakage of polarization from z toward the transverse directions when
/// the tested observable is not conserved (b > 0).
#[derive(Debug, Clone)]
pub struct LeakageReport {
    /// sqrt(2/N) hbar delta_0 / (gamma g)
    pub tau_leak: f64,
    pub tau_trunc: f64,
    /// stationary <s_y m> = (b/gN) <s_z(0)>
    pub sym_stationary: f64,
    /// peak magnitude of <s_x>: (b/g delta_0) sqrt(pi/2N) |<s_z(0)>|
    pub sx_peak: f64,
    /// ideality condition b << g sqrt(N gamma) with a factor-10 margin
    pub ideality_ok: bool,
    /// Born-rule deficit b^2/(2 N gamma g^2) <s_z(0)>
    pub sz_deficit: f64,
    pub r0: SpinState,
    pub params: ModelParams,
}

impl LeakageReport {
    /// <s_x(t)> for t >> tau_trunc (memory of r_ud(0) already lost):
    /// -(b/g d0) sqrt(pi/2N) <s_z(0)> exp[-(t/tau_leak)^2].
    pub fn sx(&self, t: f64) -> f64 {
        let x = t / self.tau_leak;
        -self.sx_peak_signed() * (-x * x).exp()
    }

    fn sx_peak_signed(&self) -> f64 {
        let p = &self.params;
        let d0 = p.delta0_sq().expect("validated").sqrt();
        p.b / (p.g * d0) * (std::f64::consts::PI / (2.0 * p.n as f64)).sqrt() * self.r0.sz()
    }

    /// <s_y(t)>: grows as t/tau_leak, decays as tau_leak/t; expressed
    /// through the Dawson integral.
    pub fn sy(&self, t: f64) -> f64 {
        let p = &self.params;
        let d0 = p.delta0_sq().expect("validated").sqrt();
        let x = t / self.tau_leak;
        // e^{-x^2} erfi(x) = (2/sqrt pi) D(x)
        p.b / (p.g * d0) * (std::f64::consts::PI / (2.0 * p.n as f64)).sqrt()
            * std::f64::consts::FRAC_2_SQRT_PI
            * dawson(x)
    }

    /// correlation <s_z m(t)> of the ideal registration branch
    pub fn szm(&self, t: f64) -> f64 {
        let p = &self.params;
        let tau_reg = 1.0 / (p.gamma * (p.j2 - p.temp));
        let m_b = p.g / (p.j2 - p.temp);
        m_b * ((t / tau_reg).exp() - 1.0) * self.r0.sz()
    }

    /// stationary <s_y m> (constant on tau_trunc << t <~ tau_reg)
    pub fn sym(&self) -> f64 {
        self.sym_stationary
    }

    /// <s_y m^2(t)> = (b delta_0 sqrt2 / g N^{3/2}) (t/tau_leak)
    pub fn sym2(&self, t: f64) -> f64 {
        let p = &self.params;
        let d0 = p.delta0_sq().expect("validated").sqrt();
        p.b * d0 * std::f64::consts::SQRT_2 / (p.g * (p.n as f64).powf(1.5)) * (t / self.tau_leak)
    }
}

/// Closed-form leakage dynamics; requires b << N g.
pub fn leakage_dynamics(p: &ModelParams, r0: SpinState) -> Result<LeakageReport, CwError> {
    if p.b <= 0.0 {
        // all transverse quantities vanish identically
        return Ok(LeakageReport {
            tau_leak: f64::INFINITY,
            tau_trunc: crate::truncation::tau_trunc(p)?,
            sym_stationary: 0.0,
            sx_peak: 0.0,
            ideality_ok: true,
            sz_deficit: 0.0,
            r0,
            params: p.clone(),
        });
    }
    if p.b >= p.n as f64 * p.g {
        return Err(CwError::RegimeViolated(format!(
            "leakage analysis needs b << N g (b = {}, Ng = {})",
            p.b,
            p.n as f64 * p.g
        )));
    }
    let d0 = p.delta0_sq()?.sqrt();
    let nf = p.n as f64;
    let tau_leak = (2.0 / nf).sqrt() * d0 / (p.gamma * p.g);
    let (ok, _, deficit) = ideality_condition(p, r0);
    Ok(LeakageReport {
        tau_leak,
        tau_trunc: crate::truncation::tau_trunc(p)?,
        sym_stationary: p.b / (p.g * nf) * r0.sz(),
        sx_peak: (p.b / (p.g * d0) * (std::f64::consts::PI / (2.0 * nf)).sqrt() * r0.sz()).abs(),
        ideality_ok: ok,
        sz_deficit: deficit,
        r0,
        params: p.clone(),
    })
}

/// Ideality check b << g sqrt(N gamma) with a factor-10 margin; returns
/// (ok, margin, Born-rule deficit b^2 <s_z(0)>/(2 N gamma g^2)).
pub fn ideality_condition(p: &ModelParams, r0: SpinState) -> (bool, f64, f64) {
    let bound = p.g * (p.n as f64 * p.gamma).sqrt();
    let margin = if p.b > 0.0 { bound / p.b } else { f64::INFINITY };
    let deficit = if p.b > 0.0 {
        p.b * p.b / (2.0 * p.n as f64 * p.gamma * p.g * p.g) * r0.sz()
    } else {
        0.0
    };
    (margin >= 10.0, margin, deficit)
}

/// Characteristic function Psi(lambda, t) = <s_- e^{i lambda m}> of the
/// leakage dynamics, by direct quadrature of the memory integral
/// -(b) int_0^t dt' exp[-(u/tau_tr + s)^2 + 2i(t'/tau_leak)(u/tau_tr + s)]
/// with u = t - t', s = lambda delta_0/sqrt(2N), weighted by r_uu and
/// (with tau_leak -> -tau_leak) r_dd.
pub fn leakage_characteristic_quadrature(
    p: &ModelParams,
    r0: SpinState,
    lambda: f64,
    t: f64,
) -> Result<Complex64, CwError> {
    let d0 = p.delta0_sq()?.sqrt();
    let nf = p.n as f64;
    let tau_tr = crate::truncation::tau_trunc(p)?;
    let tau_leak = (2.0 / nf).sqrt() * d0 / (p.gamma * p.g);
    let shift = lambda * d0 / (2.0 * nf).sqrt();
    let term = |sign: f64, weight: f64| -> Result<Complex64, CwError> {
        let re = crate::quad::integrate(
            |tp: f64| {
                let a = (t - tp) / tau_tr + shift;
                (-a * a).exp() * (2.0 * sign * tp / tau_leak * a).cos()
            },
            0.0,
            t,
            &[],
            1e-9,
            1e-14,
            60_000,
        )?;
        let im = crate::quad::integrate(
            |tp: f64| {
                let a = (t - tp) / tau_tr + shift;
                (-a * a).exp() * (2.0 * sign * tp / tau_leak * a).sin()
            },
            0.0,
            t,
            &[],
            1e-9,
            1e-14,
            60_000,
        )?;
        Ok(weight * Complex64::new(re.value, im.value))
    };
    let up = term(1.0, r0.ruu)?;
    let dn = term(-1.0, r0.rdd)?;
    Ok(-p.b * (up - dn))
}

/// Born-rule deficit from the direct double memory integral:
/// (4 b^2) Re int_0^t dt' int_0^{t'} dt''
///   exp[-((t'-t'')/tau_tr)^2 + 2i (t''/tau_leak)((t'-t'')/tau_tr)] <s_z(0)>.
pub fn deficit_quadrature(p: &ModelParams, r0: SpinState, t: f64) -> Result<f64, CwError> {
    let d0 = p.delta0_sq()?.sqrt();
    let nf = p.n as f64;
    let tau_tr = crate::truncation::tau_trunc(p)?;
    let tau_leak = (2.0 / nf).sqrt() * d0 / (p.gamma * p.g);
    // inner integral over u = t' - t'' in [0, t'] computed by quadrature for
    // each outer node
    let outer = crate::quad::integrate(
        |tp: f64| {
            let inner = crate::quad::integrate(
                |u: f64| {
                    let a = u / tau_tr;
                    (-a * a).exp() * (2.0 * (tp - u) / tau_leak * a).cos()
                },
                0.0,
                tp.min(8.0 * tau_tr),
                &[],
                1e-8,
                1e-14,
                20_000,
            )
            .map(|r| r.value)
            .unwrap_or(0.0);
            inner
        },
        0.0,
        t,
        &[],
        1e-7,
        1e-12,
        20_000,
    )?;
    Ok(4.0 * p.b * p.b * outer.value * r0.sz())
}

// ---------------------------------------------------------------------------
// Two-apparatus probability algebra
// ---------------------------------------------------------------------------

/// Outcome statistics of the simultaneous two-apparatus setup.
#[derive(Debug, Clone)]
pub struct DoubleApparatusStats {
    pub lambda: f64,
    pub lambda_prime: f64,
    /// P[(eps, eps')] with eps = +-1 on the z apparatus, eps' on the x one;
    /// order: [++, +-, -+, --]
    pub p: [f64; 4],
}

impl DoubleApparatusStats {
    pub fn get(&self, eps: i8, eps_prime: i8) -> f64 {
        match (eps, eps_prime) {
            (1, 1) => self.p[0],
            (1, -1) => self.p[1],
            (-1, 1) => self.p[2],
            (-1, -1) => self.p[3],
            _ => panic!("eps indices must be +-1"),
        }
    }

    /// observed two-apparatus correlation <eps eps'>
    pub fn observed_correlation(&self) -> f64 {
        self.p[0] - self.p[1] - self.p[2] + self.p[3]
    }

    /// quantum correlation inferred by undoing the efficiency factors;
    /// exceeds the observed one by 1/(lambda lambda') >= 2 when both
    /// efficiencies respect lambda^2 + lambda'^2 <= 1 with lambda = lambda'
    pub fn inferred_correlation(&self) -> Result<f64, CwError> {
        if self.lambda == 0.0 || self.lambda_prime == 0.0 {
            return Err(CwError::Unidentifiable(
                "vanishing efficiency factor: correlation not recoverable".into(),
            ));
        }
        Ok(self.observed_correlation() / (self.lambda * self.lambda_prime))
    }
}

/// Forward map P_{eps eps'} = (1 + eps lambda <s_z> + eps' lambda' <s_x>)/4.
pub fn double_apparatus_stats(
    lambda: f64,
    lambda_prime: f64,
    r0: SpinState,
) -> Result<DoubleApparatusStats, CwError> {
    if !(0.0..=1.0).contains(&lambda) || !(0.0..=1.0).contains(&lambda_prime) {
        return Err(CwError::InvalidParameter("efficiencies must lie in [0, 1]".into()));
    }
    if lambda * lambda + lambda_prime * lambda_prime > 1.0 + 1e-12 {
        return Err(CwError::InvalidParameter(
            "efficiencies must satisfy lambda^2 + lambda'^2 <= 1".into(),
        ));
    }
    let sz = r0.sz();
    let sx = r0.sx();
    let mut p = [0.0; 4];
    for (i, (eps, eps_p)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
        .iter()
        .enumerate()
    {
        p[i] = 0.25 * (1.0 + eps * lambda * sz + eps_p * lambda_prime * sx);
    }
    Ok(DoubleApparatusStats { lambda, lambda_prime, p })
}

/// Invert observed counts into (<s_z(0)>, <s_x(0)>).
pub fn invert_counts(stats: &DoubleApparatusStats) -> Result<(f64, f64), CwError> {
    if stats.lambda == 0.0 || stats.lambda_prime == 0.0 {
        return Err(CwError::Unidentifiable(
            "zero efficiency: initial polarization not identifiable".into(),
        ));
    }
    let p = &stats.p;
    let sz = (p[0] + p[1] - p[2] - p[3]) / stats.lambda;
    let sx = (p[0] - p[1] + p[2] - p[3]) / stats.lambda_prime;
    Ok((sz, sx))
}
