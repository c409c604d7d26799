//! Large-N registration dynamics: the Fokker-Planck solver for P(m, t),
//! peak ODEs, registration times, the bifurcation Green function, the
//! paramagnetic-decay (Suzuki) regime, wrong-registration and erasure
//! analytics.

use crate::error::CwError;
use crate::model::{
    critical_field, fixed_points, multiplicity_log_smooth, registration_shape_coefficient,
    ModelParams,
};
use crate::ode::{integrate_to, StepperOptions};
use crate::special::erfc;

/// Selectable drift/diffusion pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftVariant {
    /// bath-derived: v = gamma w(1 - m coth bw), w = gamma w(coth bw - m)
    Bath,
    /// detailed-balance form with constant transition time theta = 1/(gamma J)
    ThetaConstant,
    /// free-energy-gradient form with constant mobility C = gamma
    FreeEnergyGradient,
}

/// Drift velocity v(m) and diffusion coefficient w(m) in the sector with
/// field h; hbar = 1.
pub fn drift_diffusion(m: f64, h: f64, p: &ModelParams, variant: DriftVariant) -> (f64, f64) {
    let omega = h + p.j2 * m + p.j4 * m * m * m; // hbar omega_up
    let x = omega / p.temp;
    match variant {
        DriftVariant::Bath => {
            if x.abs() < 1e-5 {
                // coth(x) = 1/x + x/3 + O(x^3): both v and w stay finite
                let v = p.gamma * (omega - m * p.temp * (1.0 + x * x / 3.0));
                let w = p.gamma * (p.temp * (1.0 + x * x / 3.0) - m * omega);
                (v, w)
            } else {
                let coth = 1.0 / x.tanh();
                (p.gamma * omega * (1.0 - m * coth), p.gamma * omega * (coth - m))
            }
        }
        DriftVariant::ThetaConstant => {
            let theta = 1.0 / (p.gamma * p.j());
            ((x.tanh() - m) / theta, (1.0 - m * x.tanh()) / theta)
        }
        DriftVariant::FreeEnergyGradient => {
            let m_c = m.clamp(-1.0 + 1e-12, 1.0 - 1e-12);
            let slope = omega - 0.5 * p.temp * ((1.0 + m_c) / (1.0 - m_c)).ln();
            (p.gamma * slope, p.gamma * p.temp)
        }
    }
}

/// Transition time theta(m) recovered from the bath drift:
/// theta = hbar tanh(bw)/(gamma w), finite at the fixed points.
pub fn theta_of_m(m: f64, h: f64, p: &ModelParams) -> f64 {
    let omega = h + p.j2 * m + p.j4 * m * m * m;
    let x = omega / p.temp;
    if x.abs() < 1e-5 {
        (1.0 - x * x / 3.0) / (p.gamma * p.temp)
    } else {
        x.tanh() / (p.gamma * omega)
    }
}

/// Which sector field the distribution evolves under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sector {
    /// h = +g
    Up,
    /// h = -g
    Down,
    /// h = 0 (coupling switched off)
    Free,
}

impl Sector {
    pub fn field(&self, p: &ModelParams) -> f64 {
        match self {
            Sector::Up => p.g,
            Sector::Down => -p.g,
            Sector::Free => 0.0,
        }
    }
}

/// Probability density of the magnetization on a uniform mesh, stored in
/// the log domain (P spans exp(-O(N))).
#[derive(Debug, Clone)]
pub struct FokkerPlanckField {
    /// mesh points, uniform on [-1 + eps, 1 - eps]
    pub mesh: Vec<f64>,
    /// ln P at the mesh points (P integrates to one)
    pub log_p: Vec<f64>,
    pub time: f64,
    pub sector: Sector,
}

pub const DEFAULT_MESH: usize = 4096;
const MESH_INSET: f64 = 1e-6;

impl FokkerPlanckField {
    /// Gaussian initial profile of variance delta0^2/N centered at mu0.
    pub fn gaussian(
        p: &ModelParams,
        mu0: f64,
        sector: Sector,
        m_points: usize,
    ) -> Result<Self, CwError> {
        let d0sq = p.delta0_sq()?;
        let mesh = uniform_mesh(m_points);
        let nf = p.n as f64;
        let mut log_p: Vec<f64> =
            mesh.iter().map(|&m| -0.5 * nf * (m - mu0) * (m - mu0) / d0sq).collect();
        normalize_log(&mut log_p, &mesh);
        Ok(Self { mesh, log_p, time: 0.0, sector })
    }

    pub fn spacing(&self) -> f64 {
        self.mesh[1] - self.mesh[0]
    }

    /// integral of P dm
    pub fn norm(&self) -> f64 {
        let dm = self.spacing();
        let qmax = self.log_p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = self.log_p.iter().map(|&q| (q - qmax).exp()).sum();
        s * dm * qmax.exp()
    }

    pub fn mean(&self) -> f64 {
        let w = weights(&self.log_p);
        let tot: f64 = w.iter().sum();
        self.mesh.iter().zip(&w).map(|(&m, &p)| m * p).sum::<f64>() / tot
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        let w = weights(&self.log_p);
        let tot: f64 = w.iter().sum();
        self.mesh.iter().zip(&w).map(|(&m, &p)| (m - mu) * (m - mu) * p).sum::<f64>() / tot
    }

    /// probability mass at m < x
    pub fn mass_below(&self, x: f64) -> f64 {
        let w = weights(&self.log_p);
        let tot: f64 = w.iter().sum();
        self.mesh.iter().zip(&w).filter(|(&m, _)| m < x).map(|(_, &p)| p).sum::<f64>() / tot
    }

    /// density interpolated at m (linear in the log)
    pub fn density_at(&self, m: f64) -> f64 {
        let dm = self.spacing();
        let x = (m - self.mesh[0]) / dm;
        if x <= 0.0 {
            return self.log_p[0].exp();
        }
        let k = (x.floor() as usize).min(self.mesh.len() - 2);
        let f = x - k as f64;
        ((1.0 - f) * self.log_p[k] + f * self.log_p[k + 1]).exp()
    }

    /// dynamical free energy U - TS of this normalized sector profile
    pub fn dynamical_free_energy(&self, h: f64, p: &ModelParams) -> f64 {
        let nf = p.n as f64;
        let dm = self.spacing();
        let mut f = 0.0;
        for (&m, &q) in self.mesh.iter().zip(&self.log_p) {
            let pd = q.exp();
            if pd <= 0.0 {
                continue;
            }
            let e = -nf * (h * m + 0.5 * p.j2 * m * m + 0.25 * p.j4 * m.powi(4));
            let ln_ratio = q + (2.0 / nf).ln() - multiplicity_log_smooth(p.n, m);
            f += pd * (e + p.temp * ln_ratio) * dm;
        }
        f
    }
}

fn uniform_mesh(m_points: usize) -> Vec<f64> {
    let lo = -1.0 + MESH_INSET;
    let hi = 1.0 - MESH_INSET;
    (0..m_points).map(|j| lo + (hi - lo) * j as f64 / (m_points - 1) as f64).collect()
}

fn weights(log_p: &[f64]) -> Vec<f64> {
    let qmax = log_p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    log_p.iter().map(|&q| (q - qmax).exp()).collect()
}

fn normalize_log(log_p: &mut [f64], mesh: &[f64]) {
    let dm = mesh[1] - mesh[0];
    let qmax = log_p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = log_p.iter().map(|&q| (q - qmax).exp()).sum();
    let ln_z = qmax + (s * dm).ln();
    for q in log_p.iter_mut() {
        *q -= ln_z;
    }
}

/// Flux discretization of the drift term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvectionScheme {
    /// first-order upwind
    Upwind,
    /// second-order centered; stable here since the cell Peclet number
    /// N |v| dm / w stays below 2 for the couplings of interest
    Central,
}

pub struct FpOptions {
    pub variant: DriftVariant,
    pub scheme: AdvectionScheme,
    /// advection CFL safety factor
    pub safety: f64,
    /// abort when |norm - 1| drifts beyond this
    pub norm_tol: f64,
}

impl Default for FpOptions {
    fn default() -> Self {
        Self {
            variant: DriftVariant::Bath,
            scheme: AdvectionScheme::Upwind,
            safety: 0.75,
            norm_tol: 1e-6,
        }
    }
}

/// Per-sample diagnostics emitted along a trajectory.
#[derive(Debug, Clone)]
pub struct FpSample {
    pub time: f64,
    pub norm: f64,
    pub mean: f64,
    pub variance: f64,
    /// mass below each repulsive fixed point of the current sector
    pub tail_masses: Vec<(f64, f64)>,
    pub f_dyn: f64,
}

/// Method-of-lines right-hand side in the log variables q_j = ln P_j.
struct FpRhs {
    v_face: Vec<f64>, // v at the j+1/2 faces, length M-1
    w_node: Vec<f64>, // w at the nodes
    dm: f64,
    inv_n: f64,
    scheme: AdvectionScheme,
}

impl FpRhs {
    fn new(mesh: &[f64], h: f64, p: &ModelParams, opts: &FpOptions) -> Self {
        let dm = mesh[1] - mesh[0];
        let v_face: Vec<f64> = mesh
            .windows(2)
            .map(|w| drift_diffusion(0.5 * (w[0] + w[1]), h, p, opts.variant).0)
            .collect();
        let w_node: Vec<f64> =
            mesh.iter().map(|&m| drift_diffusion(m, h, p, opts.variant).1).collect();
        Self { v_face, w_node, dm, inv_n: 1.0 / p.n as f64, scheme: opts.scheme }
    }

    /// flux at face j+1/2 divided by P_j, given r_up = P_{j+1}/P_j
    fn flux_over(&self, j: usize, r_up: f64) -> f64 {
        let v = self.v_face[j];
        let adv = match self.scheme {
            AdvectionScheme::Upwind => {
                if v >= 0.0 {
                    v
                } else {
                    v * r_up
                }
            }
            AdvectionScheme::Central => 0.5 * v * (1.0 + r_up),
        };
        adv - self.inv_n * (self.w_node[j + 1] * r_up - self.w_node[j]) / self.dm
    }

    /// dq_j/dt = -(F_{j+1/2} - F_{j-1/2})/(dm P_j): the fluxes are expressed
    /// through the neighbour ratios exp(q_{j+-1} - q_j), so the exp(-O(N))
    /// dynamic range never materializes. Zero-flux boundaries. This form
    /// only drives the zero-mass deep tail (below 1e-304 of the peak), so
    /// the ratios are clamped to keep the fallback finite.
    fn eval(&self, q: &[f64], dq: &mut [f64]) {
        let mm = q.len();
        let ratio = |d: f64| d.min(30.0).exp();
        for j in 0..mm {
            let right = if j + 1 < mm { self.flux_over(j, ratio(q[j + 1] - q[j])) } else { 0.0 };
            let left = if j >= 1 {
                self.flux_over(j - 1, ratio(q[j] - q[j - 1])) * ratio(q[j - 1] - q[j])
            } else {
                0.0
            };
            dq[j] = -(right - left) / self.dm;
        }
    }

    /// Conservative right-hand side in shifted linear variables
    /// p_j = exp(q_j - q_ref): dp_j/dt telescopes exactly, so the total mass
    /// is conserved to round-off by any Runge-Kutta combination.
    fn eval_linear(&self, p: &[f64], dp: &mut [f64]) {
        let mm = p.len();
        // face fluxes (length mm + 1 with zero-flux ends)
        let mut flux = vec![0.0; mm + 1];
        for j in 0..mm - 1 {
            let adv = match self.scheme {
                AdvectionScheme::Upwind => {
                    let v = self.v_face[j];
                    if v >= 0.0 {
                        v * p[j]
                    } else {
                        v * p[j + 1]
                    }
                }
                AdvectionScheme::Central => 0.5 * self.v_face[j] * (p[j] + p[j + 1]),
            };
            flux[j + 1] =
                adv - self.inv_n * (self.w_node[j + 1] * p[j + 1] - self.w_node[j] * p[j]) / self.dm;
        }
        for j in 0..mm {
            dp[j] = -(flux[j + 1] - flux[j]) / self.dm;
        }
    }

    /// spectral-radius estimate of the Jacobian (diffusion-dominated)
    fn spectral_radius(&self, q: &[f64]) -> f64 {
        let mut rho: f64 = 0.0;
        let mm = q.len();
        for j in 0..mm {
            let r_up = if j + 1 < mm { (q[j + 1] - q[j]).exp().min(10.0) } else { 0.0 };
            let r_dn = if j >= 1 { (q[j - 1] - q[j]).exp().min(10.0) } else { 0.0 };
            let diff = self.inv_n * self.w_node[j] * (2.0 + r_up + r_dn) / (self.dm * self.dm);
            let adv =
                self.v_face[j.min(self.v_face.len() - 1)].abs() * (1.0 + r_up.max(r_dn)) / self.dm;
            rho = rho.max(diff + adv);
        }
        rho
    }
}

/// Second-order Runge-Kutta-Chebyshev sweep for an arbitrary right-hand
/// side; stable for dt * rho up to about 0.65 s^2.
fn rkc2_core<F: Fn(&[f64], &mut [f64])>(eval: F, y0: &mut Vec<f64>, dt: f64, s: usize) {
    let s = s.max(2);
    let eps = 2.0 / 13.0;
    let w0 = 1.0 + eps / (s * s) as f64;
    let mut tj = vec![0.0; s + 1];
    let mut dj = vec![0.0; s + 1];
    let mut d2j = vec![0.0; s + 1];
    tj[0] = 1.0;
    tj[1] = w0;
    dj[1] = 1.0;
    for j in 2..=s {
        tj[j] = 2.0 * w0 * tj[j - 1] - tj[j - 2];
        dj[j] = 2.0 * tj[j - 1] + 2.0 * w0 * dj[j - 1] - dj[j - 2];
        d2j[j] = 4.0 * dj[j - 1] + 2.0 * w0 * d2j[j - 1] - d2j[j - 2];
    }
    let w1 = dj[s] / d2j[s];
    let b = |j: usize| -> f64 {
        let j = j.max(2);
        d2j[j] / (dj[j] * dj[j])
    };
    let n = y0.len();
    let mut f0 = vec![0.0; n];
    eval(y0, &mut f0);
    let mut y_jm2 = y0.clone();
    let mut y_jm1 = vec![0.0; n];
    let mu1 = b(1) * w1;
    for i in 0..n {
        y_jm1[i] = y0[i] + dt * mu1 * f0[i];
    }
    let mut f = vec![0.0; n];
    let mut y_j = vec![0.0; n];
    for j in 2..=s {
        let bj = b(j);
        let mu = 2.0 * bj * w0 / b(j - 1);
        let nu = -bj / b(j - 2);
        let mu_t = 2.0 * bj * w1 / b(j - 1);
        let a_prev = 1.0 - b(j - 1) * tj[j - 1];
        let gamma_t = -a_prev * mu_t;
        eval(&y_jm1, &mut f);
        for i in 0..n {
            y_j[i] = (1.0 - mu - nu) * y0[i] + mu * y_jm1[i] + nu * y_jm2[i]
                + dt * (mu_t * f[i] + gamma_t * f0[i]);
        }
        std::mem::swap(&mut y_jm2, &mut y_jm1);
        std::mem::swap(&mut y_jm1, &mut y_j);
    }
    *y0 = y_jm1;
}

/// One conservative step: the bulk is advanced in shifted linear variables
/// exp(q - q_ref), whose flux form telescopes (mass conserved to round-off);
/// nodes that underflow the linear representation (q - q_ref < -700, i.e.
/// relative weight below 1e-304) are advanced in the log variables instead.
fn rkc2_step(rhs: &FpRhs, q: &mut Vec<f64>, dt: f64, s: usize) {
    let n = q.len();
    let qref = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let p0: Vec<f64> = q.iter().map(|&v| (v - qref).exp()).collect();
    let mut log_f0 = vec![0.0; n];
    rhs.eval(q, &mut log_f0);
    let mut p = p0.clone();
    rkc2_core(|y, dy| rhs.eval_linear(y, dy), &mut p, dt, s);
    for j in 0..n {
        if p0[j] > 0.0 && p[j] > 0.0 {
            q[j] = p[j].ln() + qref;
        } else {
            // deep tail: first-order log-space update, increment-limited
            q[j] += (dt * log_f0[j]).clamp(-30.0, 30.0);
            q[j] = q[j].min(qref); // the tail never overtakes the peak
        }
    }
}

/// Evolve the field under its sector Hamiltonian and sample diagnostics at
/// the given times; the field is left at the last sample.
pub fn evolve_fokker_planck(
    field: &mut FokkerPlanckField,
    p: &ModelParams,
    sample_times: &[f64],
    opts: &FpOptions,
) -> Result<Vec<FpSample>, CwError> {
    let h = field.sector.field(p);
    let rhs = FpRhs::new(&field.mesh, h, p, opts);
    let dm = field.spacing();
    let v_max = rhs.v_face.iter().fold(0.0_f64, |a, &v| a.max(v.abs())).max(1e-300);
    // advection-accuracy step; diffusion stiffness is absorbed by the
    // Chebyshev stages
    let dt_adv = opts.safety * dm / v_max;
    let repulsive: Vec<f64> = fixed_points(h, p).repulsive;
    let norm0 = field.norm();
    if (norm0 - 1.0).abs() > 1e-8 {
        return Err(CwError::InvalidParameter(format!("field not normalized: {norm0}")));
    }

    let mut out = Vec::with_capacity(sample_times.len());
    for &ts in sample_times {
        if ts < field.time {
            return Err(CwError::InvalidParameter("sample times must be non-decreasing".into()));
        }
        while field.time < ts {
            let rho = rhs.spectral_radius(&field.log_p).max(1e-300);
            // cap the stage count; shrink dt instead when the cap binds
            let s_max = 64.0_f64;
            let dt_stab = 0.55 * s_max * s_max / rho;
            let dt = dt_adv.min(ts - field.time).min(dt_stab);
            let s_stages = (((dt * rho / 0.55).sqrt()).ceil() as usize + 1).clamp(2, s_max as usize);
            rkc2_step(&rhs, &mut field.log_p, dt, s_stages);
            field.time += dt;
        }
        let norm = field.norm();
        if (norm - norm0).abs() > opts.norm_tol {
            return Err(CwError::NormalizationDrift { t: field.time, drift: (norm - norm0).abs() });
        }
        let tails = repulsive.iter().map(|&r| (r, field.mass_below(r))).collect();
        out.push(FpSample {
            time: field.time,
            norm,
            mean: field.mean(),
            variance: field.variance(),
            tail_masses: tails,
            f_dyn: field.dynamical_free_energy(h, p),
        });
    }
    Ok(out)
}

/// Position and width parameter of a single narrow peak.
#[derive(Debug, Clone, Copy)]
pub struct PeakState {
    pub mu: f64,
    /// width parameter D; the variance of m is D/N
    pub d_var: f64,
}

/// Integrate the coupled peak equations
/// d mu/dt = v(mu), dD/dt = 2 [D dv/dmu + w(mu)].
/// Fails if the peak comes within three standard deviations of a repulsive
/// fixed point (use the bifurcation Green function there instead).
pub fn peak_dynamics(
    p: &ModelParams,
    h: f64,
    d0: f64,
    sample_times: &[f64],
    variant: DriftVariant,
) -> Result<Vec<PeakState>, CwError> {
    let repulsive = fixed_points(h, p).repulsive;
    let guard = 3.0;
    let sys = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let (v, w) = drift_diffusion(y[0], h, p, variant);
        let dm = 1e-6;
        let vp = drift_diffusion(y[0] + dm, h, p, variant).0;
        let vm = drift_diffusion(y[0] - dm, h, p, variant).0;
        dy[0] = v;
        dy[1] = 2.0 * (y[1] * (vp - vm) / (2.0 * dm) + w);
    };
    let mut y = vec![0.0, d0 * d0];
    let mut t = 0.0;
    let opts = StepperOptions { rtol: 1e-10, atol: 1e-14, ..Default::default() };
    let mut out = Vec::with_capacity(sample_times.len());
    for &ts in sample_times {
        integrate_to(&sys, &mut y, t, ts, &opts)?;
        t = ts;
        let sigma = (y[1] / p.n as f64).sqrt();
        for &r in &repulsive {
            if (y[0] - r).abs() < guard * sigma {
                return Err(CwError::PeakStraddlesBifurcation { m_rep: r });
            }
        }
        out.push(PeakState { mu: y[0], d_var: y[1] });
    }
    Ok(out)
}

/// Width parameter from the quadrature form
/// D(mu) = v^2(mu) [d0^2/v^2(0) + int_0^mu 2 w/v^3 dmu'].
pub fn peak_width_quadrature(
    p: &ModelParams,
    h: f64,
    d0: f64,
    mu: f64,
    variant: DriftVariant,
) -> Result<f64, CwError> {
    let v_at = |m: f64| drift_diffusion(m, h, p, variant).0;
    let w_at = |m: f64| drift_diffusion(m, h, p, variant).1;
    let r = crate::quad::integrate(
        |m| 2.0 * w_at(m) / v_at(m).powi(3),
        0.0,
        mu,
        &[],
        1e-10,
        0.0,
        40_000,
    )?;
    let v0 = v_at(0.0);
    let vmu = v_at(mu);
    Ok(vmu * vmu * (d0 * d0 / (v0 * v0) + r.value))
}

/// Closed-form registration characteristics.
#[derive(Debug, Clone)]
pub enum RegistrationTimes {
    SecondOrder {
        /// hbar / gamma (J - T)
        tau_reg: f64,
        /// (1 + a) ln(m_F/m_B) tau_reg
        tau_reg_prime: f64,
        /// shape coefficient of the interpolation curve
        a: f64,
        m_f: f64,
        /// g / (J - T)
        m_b: f64,
        /// coupling margin over the false-registration bound (J-T) d1/sqrt N
        threshold_margin: f64,
    },
    FirstOrder {
        /// pi hbar m_c / (gamma T delta m_c)
        tau_reg: f64,
        m_c: f64,
        h_c: f64,
        delta_m_c: f64,
        /// margin of (g - h_c)/h_c over 8 (J/NT)^{2/5}
        threshold_margin: f64,
    },
}

impl RegistrationTimes {
    pub fn tau_reg(&self) -> f64 {
        match self {
            RegistrationTimes::SecondOrder { tau_reg, .. } => *tau_reg,
            RegistrationTimes::FirstOrder { tau_reg, .. } => *tau_reg,
        }
    }
}

pub fn registration_times(p: &ModelParams) -> Result<RegistrationTimes, CwError> {
    if p.first_order() {
        let (m_c, h_c) = critical_field(p)?;
        if p.g <= h_c {
            return Err(CwError::NoRegistration { g: p.g, hc: h_c });
        }
        let delta_m_c = (m_c * (p.g - h_c) / p.temp).sqrt();
        let tau_reg = std::f64::consts::PI * m_c / (p.gamma * p.temp * delta_m_c);
        let bound = 8.0 * (p.j() / (p.n as f64 * p.temp)).powf(0.4);
        Ok(RegistrationTimes::FirstOrder {
            tau_reg,
            m_c,
            h_c,
            delta_m_c,
            threshold_margin: ((p.g - h_c) / h_c) / bound,
        })
    } else {
        if p.temp >= p.j2 {
            return Err(CwError::RegimeViolated(
                "registration needs T below the Curie temperature".into(),
            ));
        }
        let tau_reg = 1.0 / (p.gamma * (p.j2 - p.temp));
        let m_f = fixed_points(0.0, p)
            .ferro_up
            .ok_or_else(|| CwError::RegimeViolated("no ferromagnetic root".into()))?;
        let a = registration_shape_coefficient(p, m_f);
        let m_b = p.m_b_linear()?;
        let d1 = p.delta1_sq()?.sqrt();
        let threshold = (p.j2 - p.temp) * d1 / (p.n as f64).sqrt();
        Ok(RegistrationTimes::SecondOrder {
            tau_reg,
            tau_reg_prime: tau_reg * (1.0 + a) * (m_f / m_b).ln(),
            a,
            m_f,
            m_b,
            threshold_margin: p.g / threshold,
        })
    }
}

/// Interpolated t(mu) along the registration path.
///
/// Second order: t/tau_reg = ln[(m_B + mu)/m_B] + a ln[m_F^2/(m_F^2 - mu^2)].
/// First order: the arctan plus log form through the bottleneck.
pub fn time_of_mu(p: &ModelParams, mu: f64) -> Result<f64, CwError> {
    match registration_times(p)? {
        RegistrationTimes::SecondOrder { tau_reg, a, m_f, m_b, .. } => {
            if !(0.0..m_f).contains(&mu) {
                return Err(CwError::Domain(format!("mu must lie in [0, m_F = {m_f})")));
            }
            Ok(tau_reg * (((m_b + mu) / m_b).ln() + a * (m_f * m_f / (m_f * m_f - mu * mu)).ln()))
        }
        RegistrationTimes::FirstOrder { tau_reg, m_c, delta_m_c, .. } => {
            if !(0.0..1.0).contains(&mu) {
                return Err(CwError::Domain("mu must lie in [0, 1)".into()));
            }
            let pi = std::f64::consts::PI;
            Ok(tau_reg / pi
                * (pi / 2.0
                    + ((mu - m_c) / delta_m_c).atan()
                    + delta_m_c / m_c
                        * (0.25 * (m_c * m_c / ((mu - m_c).powi(2) + delta_m_c * delta_m_c)).ln()
                            + (1.0 / 3.0) * ((mu + 2.0 * m_c) / (2.0 * m_c)).ln()
                            + p.temp / p.j() * (1.0 / (1.0 - mu * mu)).ln())))
        }
    }
}

/// Bottleneck interpolation mu(t) = m_c - delta m_c cot(pi t/tau_reg),
/// valid on [tau_reg/4, 3 tau_reg/4].
pub fn bottleneck_mu(p: &ModelParams, t: f64) -> Result<f64, CwError> {
    match registration_times(p)? {
        RegistrationTimes::FirstOrder { tau_reg, m_c, delta_m_c, .. } => {
            let x = std::f64::consts::PI * t / tau_reg;
            Ok(m_c - delta_m_c * x.cos() / x.sin())
        }
        _ => Err(CwError::RegimeViolated("bottleneck form needs the first-order regime".into())),
    }
}

/// Late-stage inversion mu(t) = m_F [1 - (m_F/m_B)^{1/a} e^{-t/(a tau_reg)}/2].
pub fn mu_late(p: &ModelParams, t: f64) -> Result<f64, CwError> {
    match registration_times(p)? {
        RegistrationTimes::SecondOrder { tau_reg, a, m_f, m_b, .. } => {
            Ok(m_f * (1.0 - 0.5 * (m_f / m_b).powf(1.0 / a) * (-t / (a * tau_reg)).exp()))
        }
        _ => Err(CwError::RegimeViolated("second-order form".into())),
    }
}

/// Low-temperature (a = 1) inversion of the full t(mu) relation.
pub fn mu_low_temperature(p: &ModelParams, t: f64) -> Result<f64, CwError> {
    match registration_times(p)? {
        RegistrationTimes::SecondOrder { tau_reg, m_f, m_b, .. } => {
            let e = (-t / tau_reg).exp();
            let inner = 4.0 * m_b * m_b * (m_f * m_f - m_b * m_b)
                + (2.0 * m_b * m_b - m_f * m_f * e).powi(2);
            Ok((inner.sqrt() - m_f * m_f * e) / (2.0 * m_b))
        }
        _ => Err(CwError::RegimeViolated("second-order form".into())),
    }
}

/// Backward drift flow: mu'(m, t) defined by t = int_{mu'}^{m} dm''/v(m'').
pub fn backward_flow(p: &ModelParams, h: f64, m: f64, t: f64) -> Result<f64, CwError> {
    let sys = |_t: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = -drift_diffusion(y[0], h, p, DriftVariant::Bath).0;
    };
    let mut y = vec![m];
    integrate_to(
        &sys,
        &mut y,
        0.0,
        t,
        &StepperOptions { rtol: 1e-11, atol: 1e-15, ..Default::default() },
    )?;
    Ok(y[0])
}

/// Green function of the linearized bifurcation problem (second order):
/// Gaussian in m' centered at the backward-flow image mu'(m, t), width
/// parameter D1(t) = T/(J-T)(1 - e^{-2t/tau_reg}), amplitude v(mu')/v(m).
pub fn green_function_bifurcation(
    m: f64,
    m_prime: f64,
    t: f64,
    p: &ModelParams,
    h: f64,
) -> Result<f64, CwError> {
    if t < 0.0 {
        return Err(CwError::Domain("t must be non-negative".into()));
    }
    let tau_reg = 1.0 / (p.gamma * (p.j2 - p.temp));
    let nf = p.n as f64;
    let d1t = (p.temp / (p.j2 - p.temp) * (1.0 - (-2.0 * t / tau_reg).exp())).max(1e-14);
    let mu_p = backward_flow(p, h, m, t)?;
    let v_m = drift_diffusion(m, h, p, DriftVariant::Bath).0;
    let v_mu = drift_diffusion(mu_p, h, p, DriftVariant::Bath).0;
    let amp = if v_m.abs() > 1e-300 { v_mu / v_m } else { 1.0 };
    let gauss = (nf / (2.0 * std::f64::consts::PI * d1t)).sqrt()
        * (-nf * (m_prime - mu_p) * (m_prime - mu_p) / (2.0 * d1t)).exp();
    Ok(amp * gauss)
}

/// Time-dependent spread delta_1(t)^2 = delta_0^2 + T/(J-T)(1 - e^{-2t/tau_reg}).
pub fn delta1_sq_of_t(p: &ModelParams, t: f64) -> Result<f64, CwError> {
    let tau_reg = 1.0 / (p.gamma * (p.j2 - p.temp));
    Ok(p.delta0_sq()? + p.temp / (p.j2 - p.temp) * (1.0 - (-2.0 * t / tau_reg).exp()))
}

/// Suzuki-regime profile P(m, t) = (1/sqrt pi)(dxi/dm) exp[-(xi - xi0)^2]
/// with xi = sqrt(N/2)(mu'(m,t) + m_B)/delta_1(t): the drift-flow Green
/// function convolved with the initial Gaussian (field h, initial bias mu0).
pub fn suzuki_profile(p: &ModelParams, h: f64, mu0: f64, m: f64, t: f64) -> Result<f64, CwError> {
    let nf = p.n as f64;
    let d1t = delta1_sq_of_t(p, t)?.sqrt();
    let mu_p = backward_flow(p, h, m, t)?;
    let m_b = if h == 0.0 { 0.0 } else { h / (p.j2 - p.temp) };
    let xi = (nf / 2.0).sqrt() * (mu_p + m_b) / d1t;
    let xi0 = (nf / 2.0).sqrt() * (m_b + mu0) / d1t;
    let v_m = drift_diffusion(m, h, p, DriftVariant::Bath).0;
    let v_mu = drift_diffusion(mu_p, h, p, DriftVariant::Bath).0;
    let dxi_dm = (nf / 2.0).sqrt() / d1t * (v_mu / v_m).abs();
    Ok(dxi_dm / std::f64::consts::PI.sqrt() * (-(xi - xi0) * (xi - xi0)).exp())
}

/// Characteristic times and checks of the spontaneous paramagnetic decay.
#[derive(Debug, Clone)]
pub struct ParamagneticDecay {
    /// tau_reg ln(alpha sqrt N)
    pub tau_para: f64,
    /// tau_reg ln[(m_F/delta_1) sqrt(N/6a)]
    pub tau_flat: f64,
    /// flat-profile height (N/2) P(0, tau_flat) = sqrt(3/pi)/m_F
    pub flat_height: f64,
    pub a: f64,
    pub m_f: f64,
    /// residual preparation field is ineffective below sqrt(T0(T0-J)/N)
    pub bias_bound: f64,
}

pub fn paramagnetic_decay(p: &ModelParams, alpha: f64) -> Result<ParamagneticDecay, CwError> {
    if p.first_order() {
        return Err(CwError::RegimeViolated(
            "spontaneous decay analytics apply to the second-order magnet".into(),
        ));
    }
    let tau_reg = 1.0 / (p.gamma * (p.j2 - p.temp));
    let m_f = fixed_points(0.0, p)
        .ferro_up
        .ok_or_else(|| CwError::RegimeViolated("no ferromagnetic root".into()))?;
    let a = registration_shape_coefficient(p, m_f);
    let d1 = p.delta1_sq()?.sqrt();
    let nf = p.n as f64;
    let bias_bound =
        if p.t0.is_finite() { (p.t0 * (p.t0 - p.j2) / nf).sqrt() } else { f64::INFINITY };
    Ok(ParamagneticDecay {
        tau_para: tau_reg * (alpha * nf.sqrt()).ln(),
        tau_flat: tau_reg * (m_f / d1 * (nf / (6.0 * a)).sqrt()).ln(),
        flat_height: (3.0 / std::f64::consts::PI).sqrt() / m_f,
        a,
        m_f,
        bias_bound,
    })
}

/// Probability of a wrong registration (second order):
/// P_- = erfc(lambda)/2 with lambda = sqrt(N/2)(m_B + mu0)/delta_1.
/// Returns (P_-, lambda).
pub fn wrong_registration_probability(p: &ModelParams, mu0: f64) -> Result<(f64, f64), CwError> {
    let m_b = p.m_b_linear()?;
    let d1 = p.delta1_sq()?.sqrt();
    let lambda = (p.n as f64 / 2.0).sqrt() * (m_b + mu0) / d1;
    Ok((0.5 * erfc(lambda), lambda))
}

/// The published fit 1.2 N^{-1/4} exp(-0.0014 N) of the wrong-registration
/// percentages at T = 0.65 J, g = 0.03 J.
pub fn wrong_registration_fit(n: usize) -> f64 {
    1.2 * (n as f64).powf(-0.25) * (-0.0014 * n as f64).exp()
}

/// Erasure time (hbar/gamma J) exp(DF/T) and the minimum N for the
/// registration-before-erasure inequality with a factor-10 margin.
pub fn erasure_time(p: &ModelParams) -> Result<(f64, f64), CwError> {
    let (df, _) = crate::model::barrier(p, 0.0)?;
    let tau = p.tau_j() * (df / p.temp).exp();
    let lhs = if p.first_order() {
        let (m_c, h_c) = critical_field(p)?;
        if p.g > h_c {
            p.j() / p.temp * (m_c * p.temp / (p.g - h_c)).sqrt()
        } else {
            f64::INFINITY
        }
    } else {
        p.j2 / (p.j2 - p.temp)
    };
    let per_n = df / (p.n as f64 * p.temp);
    let min_n = (10.0 * lhs).ln() / per_n;
    Ok((tau, min_n))
}
