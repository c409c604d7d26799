//! Exact finite-N master equations for the four blocks of the
//! spin + magnet density matrix, and the analytic N = 2 microscopic
//! pointer variant.
//!
//! The magnetization grid is discrete, the equations are tridiagonal in m
//! (one spin flip shifts m by 2/N), and the off-diagonal block is evolved
//! in the frame rotating with the Larmor phase 2 N g m t so that the
//! integrator only tracks the slow bath dynamics.

use num_complex::Complex64;

use crate::bath::{BathKernel, KernelTable};
use crate::error::CwError;
use crate::model::{multiplicity_log, MagnetizationGrid, ModelParams};
use crate::ode::{integrate_to, StepperOptions};
use crate::special::log_sum_exp;

/// Initial 2x2 density matrix of the tested spin.
#[derive(Debug, Clone, Copy)]
pub struct SpinState {
    pub ruu: f64,
    pub rdd: f64,
    pub rud: Complex64,
}

impl SpinState {
    pub fn new(ruu: f64, rdd: f64, rud: Complex64) -> Result<Self, CwError> {
        if ruu < 0.0 || rdd < 0.0 || (ruu + rdd - 1.0).abs() > 1e-12 {
            return Err(CwError::InvalidParameter("spin state must have trace one".into()));
        }
        if rud.norm_sqr() > ruu * rdd + 1e-12 {
            return Err(CwError::InvalidParameter("spin state not positive".into()));
        }
        Ok(Self { ruu, rdd, rud })
    }

    pub fn sz(&self) -> f64 {
        self.ruu - self.rdd
    }
    pub fn sx(&self) -> f64 {
        2.0 * self.rud.re
    }
    pub fn sy(&self) -> f64 {
        -2.0 * self.rud.im
    }
}

/// How the paramagnetic initial state of the magnet is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    /// exact Boltzmann weights G(m) exp[(N/T0)(J2 m^2/2 + J4 m^4/4)];
    /// reduces to the plain binomial G(m)/2^N for T0 = infinity
    ExactBoltzmann,
    /// large-N Gaussian of variance delta_0^2/N
    Gaussian,
}

/// The four blocks of the S + M state over the magnetization grid.
/// P_du is implicit as the conjugate of P_ud.
#[derive(Debug, Clone)]
pub struct JointDistribution {
    pub grid: MagnetizationGrid,
    pub p_uu: Vec<f64>,
    pub p_dd: Vec<f64>,
    /// off-diagonal block in the lab frame
    pub p_ud: Vec<Complex64>,
    pub time: f64,
    pub r0: SpinState,
}

impl JointDistribution {
    /// Product initial state r(0) x R_M(0) with a paramagnetic magnet.
    pub fn new_paramagnetic(
        p: &ModelParams,
        r0: SpinState,
        kind: InitialKind,
    ) -> Result<Self, CwError> {
        let grid = MagnetizationGrid::new(p.n);
        let pm = match kind {
            InitialKind::Gaussian => crate::model::initial_magnet_distribution(p)?,
            InitialKind::ExactBoltzmann => boltzmann_initial_distribution(p)?,
        };
        let p_uu: Vec<f64> = pm.iter().map(|&w| r0.ruu * w).collect();
        let p_dd: Vec<f64> = pm.iter().map(|&w| r0.rdd * w).collect();
        let p_ud: Vec<Complex64> = pm.iter().map(|&w| r0.rud * w).collect();
        Ok(Self { grid, p_uu, p_dd, p_ud, time: 0.0, r0 })
    }

    pub fn norm(&self) -> f64 {
        self.p_uu.iter().sum::<f64>() + self.p_dd.iter().sum::<f64>()
    }

    pub fn sector_up(&self) -> f64 {
        self.p_uu.iter().sum()
    }

    /// r_ud(t) = sum_m P_ud(m, t).
    pub fn rud(&self) -> Complex64 {
        self.p_ud.iter().sum()
    }

    pub fn mean_m_up(&self) -> f64 {
        let w: f64 = self.p_uu.iter().sum();
        self.grid.values.iter().zip(&self.p_uu).map(|(&m, &p)| m * p).sum::<f64>() / w
    }

    pub fn min_diag(&self) -> f64 {
        self.p_uu
            .iter()
            .chain(self.p_dd.iter())
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Exact discrete paramagnetic weights at preparation temperature T0.
pub fn boltzmann_initial_distribution(p: &ModelParams) -> Result<Vec<f64>, CwError> {
    if p.t0 <= p.j2 && p.t0.is_finite() && !p.first_order() {
        return Err(CwError::InvalidParameter(format!(
            "no paramagnetic preparation: T0 = {} <= J2 = {}",
            p.t0, p.j2
        )));
    }
    let grid = MagnetizationGrid::new(p.n);
    let nf = p.n as f64;
    let logs: Vec<f64> = grid
        .values
        .iter()
        .map(|&m| {
            let boltz = if p.t0.is_infinite() {
                0.0
            } else {
                nf / p.t0 * (0.5 * p.j2 * m * m + 0.25 * p.j4 * m.powi(4))
            };
            multiplicity_log(p.n, m).expect("grid value") + boltz
        })
        .collect();
    let lz = log_sum_exp(&logs);
    Ok(logs.iter().map(|&l| (l - lz).exp()).collect())
}

/// Magnet Hamiltonian in the spin-up (s = +1) or spin-down (s = -1) sector.
fn sector_hamiltonian(m: f64, s: f64, p: &ModelParams) -> f64 {
    -(p.n as f64) * (p.g * s * m + 0.5 * p.j2 * m * m + 0.25 * p.j4 * m.powi(4))
}

/// Kernel evaluation mode for the rate tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelMode {
    /// K~_t replaced by its infinite-time limit K~
    Markovian,
    /// finite-time windowed kernels frozen at the given time
    Windowed(f64),
}

/// Spin-flip excitation energies and bath rate factors on the grid.
pub struct RateTable {
    pub omega_up_plus: Vec<f64>,
    pub omega_up_minus: Vec<f64>,
    pub omega_dn_plus: Vec<f64>,
    pub omega_dn_minus: Vec<f64>,
    /// (gamma N) K~_t at the four frequencies (diagonal sectors)
    pub kt_up_plus: Vec<f64>,
    pub kt_up_minus: Vec<f64>,
    pub kt_dn_plus: Vec<f64>,
    pub kt_dn_minus: Vec<f64>,
    /// (gamma N) [K~_{t>}(Omega_up^-) + K~_{t<}(Omega_dn^-)] (off-diagonal)
    pub k_minus: Vec<Complex64>,
    /// (gamma N) [K~_{t>}(Omega_up^+) + K~_{t<}(Omega_dn^+)]
    pub k_plus: Vec<Complex64>,
}

/// Build the rate table. `table` carries tabulated K(u) for fast windowed
/// evaluation; it is not consulted in Markovian mode.
pub fn build_rates(
    p: &ModelParams,
    bath: &BathKernel,
    table: Option<&KernelTable>,
    mode: KernelMode,
) -> Result<RateTable, CwError> {
    let grid = MagnetizationGrid::new(p.n);
    let n = p.n;
    let pref = p.gamma * n as f64;
    let h_up: Vec<f64> = grid.values.iter().map(|&m| sector_hamiltonian(m, 1.0, p)).collect();
    let h_dn: Vec<f64> = grid.values.iter().map(|&m| sector_hamiltonian(m, -1.0, p)).collect();
    let omega = |h: &Vec<f64>, k: usize, up: bool| -> f64 {
        if up {
            if k + 1 <= n {
                h[k + 1] - h[k]
            } else {
                f64::NAN
            }
        } else if k >= 1 {
            h[k - 1] - h[k]
        } else {
            f64::NAN
        }
    };
    let mut rt = RateTable {
        omega_up_plus: (0..=n).map(|k| omega(&h_up, k, true)).collect(),
        omega_up_minus: (0..=n).map(|k| omega(&h_up, k, false)).collect(),
        omega_dn_plus: (0..=n).map(|k| omega(&h_dn, k, true)).collect(),
        omega_dn_minus: (0..=n).map(|k| omega(&h_dn, k, false)).collect(),
        kt_up_plus: vec![0.0; n + 1],
        kt_up_minus: vec![0.0; n + 1],
        kt_dn_plus: vec![0.0; n + 1],
        kt_dn_minus: vec![0.0; n + 1],
        k_minus: vec![Complex64::ZERO; n + 1],
        k_plus: vec![Complex64::ZERO; n + 1],
    };

    // windowed K~_{t>}(omega) evaluator; in the Markovian limit the real part
    // is K~(omega)/2 and the principal-value imaginary parts cancel in every
    // combination used below, so K~_{t>} reduces to K~/2.
    let gt = |w: f64| -> Result<Complex64, CwError> {
        if w.is_nan() {
            return Ok(Complex64::ZERO);
        }
        match mode {
            KernelMode::Markovian => Ok(Complex64::new(0.5 * bath.spectral(w), 0.0)),
            KernelMode::Windowed(t) => match table {
                Some(tab) => Ok(tab.windowed_gt(w, t)),
                None => bath.windowed(w, t).map(|(kgt, _, _)| kgt),
            },
        }
    };

    for k in 0..=n {
        let g_up_p = gt(rt.omega_up_plus[k])?;
        let g_up_m = gt(rt.omega_up_minus[k])?;
        let g_dn_p = gt(rt.omega_dn_plus[k])?;
        let g_dn_m = gt(rt.omega_dn_minus[k])?;
        rt.kt_up_plus[k] = pref * 2.0 * g_up_p.re;
        rt.kt_up_minus[k] = pref * 2.0 * g_up_m.re;
        rt.kt_dn_plus[k] = pref * 2.0 * g_dn_p.re;
        rt.kt_dn_minus[k] = pref * 2.0 * g_dn_m.re;
        rt.k_minus[k] = pref * (g_up_m + g_dn_m.conj());
        rt.k_plus[k] = pref * (g_up_p + g_dn_p.conj());
    }
    Ok(rt)
}

/// Right-hand side of the coupled blocks in the rotating frame.
///
/// State layout: [p_uu, p_dd, Re q, Im q] with P_ud = exp(2 i N g m t) q.
struct MasterSystem<'a> {
    p: &'a ModelParams,
    grid: &'a MagnetizationGrid,
    rates: &'a RateTable,
}

impl crate::ode::OdeSystem for MasterSystem<'_> {
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        let n = self.p.n;
        let len = n + 1;
        let (puu, rest) = y.split_at(len);
        let (pdd, rest) = rest.split_at(len);
        let (qre, qim) = rest.split_at(len);
        let m = &self.grid.values;
        let r = self.rates;

        dydt.fill(0.0);
        let (duu, rest) = dydt.split_at_mut(len);
        let (ddd, rest) = rest.split_at_mut(len);
        let (dqre, dqim) = rest.split_at_mut(len);

        // diagonal sectors: gain/loss balance, tridiagonal in m
        let flux_diag = |pvec: &[f64], kt_minus: &[f64], kt_plus: &[f64], dv: &mut [f64]| {
            for k in 0..=n {
                let mut acc = 0.0;
                if k + 1 <= n {
                    acc += (1.0 + m[k + 1]) * kt_minus[k + 1] * pvec[k + 1];
                }
                acc -= (1.0 + m[k]) * kt_minus[k] * pvec[k];
                if k >= 1 {
                    acc += (1.0 - m[k - 1]) * kt_plus[k - 1] * pvec[k - 1];
                }
                acc -= (1.0 - m[k]) * kt_plus[k] * pvec[k];
                dv[k] = acc;
            }
        };
        flux_diag(puu, &r.kt_up_minus, &r.kt_up_plus, duu);
        flux_diag(pdd, &r.kt_dn_minus, &r.kt_dn_plus, ddd);

        // off-diagonal sector: neighbour couplings carry exp(+-4 i g t) from
        // the Larmor factor absorbed into the frame
        let phase = Complex64::new(0.0, 4.0 * self.p.g * t).exp();
        let phase_c = phase.conj();
        let q = |j: usize| Complex64::new(qre[j], qim[j]);
        for k in 0..=n {
            let mut acc = Complex64::ZERO;
            if k + 1 <= n {
                acc += phase * ((1.0 + m[k + 1]) * r.k_minus[k + 1] * q(k + 1));
            }
            acc -= (1.0 + m[k]) * r.k_minus[k] * q(k);
            if k >= 1 {
                acc += phase_c * ((1.0 - m[k - 1]) * r.k_plus[k - 1] * q(k - 1));
            }
            acc -= (1.0 - m[k]) * r.k_plus[k] * q(k);
            // transverse field on S couples the blocks (b = 0 when ideal)
            if self.p.b != 0.0 {
                let lab = Complex64::new(0.0, 2.0 * n as f64 * self.p.g * m[k] * t).exp();
                acc += self.p.b * (pdd[k] - puu[k]) * lab.conj();
                let p_ud_lab = lab * q(k);
                duu[k] += 2.0 * self.p.b * p_ud_lab.re;
                ddd[k] -= 2.0 * self.p.b * p_ud_lab.re;
            }
            dqre[k] = acc.re;
            dqim[k] = acc.im;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvolveMode {
    Markovian,
    /// kernels re-evaluated per sample window, frozen at the window midpoint
    NonMarkovian,
}

pub struct EvolveOptions {
    pub mode: EvolveMode,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { mode: EvolveMode::Markovian, rtol: 1e-8, atol: 1e-14 }
    }
}

pub struct Trajectory {
    pub states: Vec<JointDistribution>,
    pub warnings: Vec<String>,
}

fn pack(state: &JointDistribution) -> Vec<f64> {
    let n = state.grid.n;
    let len = n + 1;
    let mut y = vec![0.0; 4 * len];
    y[..len].copy_from_slice(&state.p_uu);
    y[len..2 * len].copy_from_slice(&state.p_dd);
    for k in 0..=n {
        y[2 * len + k] = state.p_ud[k].re;
        y[3 * len + k] = state.p_ud[k].im;
    }
    y
}

fn unpack(
    y: &[f64],
    grid: &MagnetizationGrid,
    p: &ModelParams,
    t: f64,
    r0: SpinState,
) -> JointDistribution {
    let n = grid.n;
    let len = n + 1;
    let mut p_ud = Vec::with_capacity(len);
    for k in 0..=n {
        let q = Complex64::new(y[2 * len + k], y[3 * len + k]);
        let ph = Complex64::new(0.0, 2.0 * n as f64 * p.g * grid.values[k] * t).exp();
        p_ud.push(ph * q);
    }
    JointDistribution {
        grid: grid.clone(),
        p_uu: y[..len].to_vec(),
        p_dd: y[len..2 * len].to_vec(),
        p_ud,
        time: t,
        r0,
    }
}

/// Integrate the master equations from `state` (at t = 0) and sample at the
/// given times.
pub fn evolve_master(
    state: &JointDistribution,
    p: &ModelParams,
    sample_times: &[f64],
    opts: &EvolveOptions,
) -> Result<Trajectory, CwError> {
    if state.time != 0.0 {
        return Err(CwError::InvalidParameter("evolve_master expects a t = 0 state".into()));
    }
    let norm0 = state.norm();
    if (norm0 - 1.0).abs() > 1e-10 {
        return Err(CwError::InvalidParameter(format!("state not normalized: {norm0}")));
    }
    let mut warnings = Vec::new();
    let bath = BathKernel::from_params(p);
    let memory = bath.memory_time();
    if opts.mode == EvolveMode::Markovian {
        if let Some(&t_first) = sample_times.first() {
            if t_first < 10.0 * memory {
                warnings.push(format!(
                    "Markovian kernels requested at t = {t_first:.3e} < 10 hbar/(2 pi T) = {:.3e}",
                    10.0 * memory
                ));
            }
        }
    }
    let t_end = sample_times.last().cloned().unwrap_or(0.0);
    // Beyond a few memory times the windowed kernels are replaced by their
    // Markovian limits. This drops their static principal-value imaginary
    // parts (a small Lamb-type frequency renormalization) in the same way
    // the analytic treatment of the damping functions does.
    let markov_onset = 5.0 * memory;
    let table = if opts.mode == EvolveMode::NonMarkovian {
        Some(bath.tabulate(t_end.min(markov_onset) + memory)?)
    } else {
        None
    };
    let markov_rates = build_rates(p, &bath, None, KernelMode::Markovian)?;

    let grid = state.grid.clone();
    let mut y = pack(state);
    let stepper = StepperOptions { rtol: opts.rtol, atol: opts.atol, ..Default::default() };
    let mut t = 0.0;
    let mut out = Vec::with_capacity(sample_times.len());
    for &ts in sample_times {
        if ts < t {
            return Err(CwError::InvalidParameter("sample times must be non-decreasing".into()));
        }
        if ts > t {
            match opts.mode {
                EvolveMode::Markovian => {
                    let sys = MasterSystem { p, grid: &grid, rates: &markov_rates };
                    integrate_to(&sys, &mut y, t, ts, &stepper)?;
                }
                EvolveMode::NonMarkovian => {
                    if t >= markov_onset {
                        // windowed kernels have converged to the Markovian limit
                        let sys = MasterSystem { p, grid: &grid, rates: &markov_rates };
                        integrate_to(&sys, &mut y, t, ts, &stepper)?;
                    } else {
                        let t_stop = ts.min(markov_onset);
                        let t_mid = 0.5 * (t + t_stop);
                        let rates =
                            build_rates(p, &bath, table.as_ref(), KernelMode::Windowed(t_mid))?;
                        let sys = MasterSystem { p, grid: &grid, rates: &rates };
                        integrate_to(&sys, &mut y, t, t_stop, &stepper)?;
                        if ts > t_stop {
                            let sys = MasterSystem { p, grid: &grid, rates: &markov_rates };
                            integrate_to(&sys, &mut y, t_stop, ts, &stepper)?;
                        }
                    }
                }
            }
        }
        t = ts;
        let snap = unpack(&y, &grid, p, t, state.r0);
        let drift = (snap.norm() - norm0).abs();
        if drift > 1e-8 {
            return Err(CwError::NormalizationDrift { t, drift });
        }
        out.push(snap);
    }
    Ok(Trajectory { states: out, warnings })
}

/// Dynamical free energy F_dyn = U - T S of one diagonal sector
/// (pass the normalized distribution and the sector field h = +-g).
pub fn dynamical_free_energy(
    pdis: &[f64],
    grid: &MagnetizationGrid,
    h: f64,
    p: &ModelParams,
) -> f64 {
    let nf = p.n as f64;
    let mut u = 0.0;
    let mut s = 0.0;
    for (&m, &w) in grid.values.iter().zip(pdis) {
        if w <= 0.0 {
            continue;
        }
        let e = -nf * (h * m + 0.5 * p.j2 * m * m + 0.25 * p.j4 * m.powi(4));
        u += w * e;
        let ln_g = multiplicity_log(p.n, m).expect("grid value");
        s -= w * (w.ln() - ln_g);
    }
    u - p.temp * s
}

/// Gibbs weights ~ G(m) exp(-beta E(m)) in the sector with field h.
pub fn gibbs_distribution(p: &ModelParams, h: f64) -> Vec<f64> {
    let grid = MagnetizationGrid::new(p.n);
    let nf = p.n as f64;
    let logs: Vec<f64> = grid
        .values
        .iter()
        .map(|&m| {
            let e = -nf * (h * m + 0.5 * p.j2 * m * m + 0.25 * p.j4 * m.powi(4));
            multiplicity_log(p.n, m).expect("grid value") - e / p.temp
        })
        .collect();
    let lz = log_sum_exp(&logs);
    logs.iter().map(|&l| (l - lz).exp()).collect()
}

// ---------------------------------------------------------------------------
// N = 2 microscopic pointer
// ---------------------------------------------------------------------------

/// Roots of the monic cubic z^3 + a2 z^2 + a1 z + a0 (Cardano + polish).
pub fn cubic_roots(a2: Complex64, a1: Complex64, a0: Complex64) -> [Complex64; 3] {
    let third = 1.0 / 3.0;
    let p = a1 - a2 * a2 * third;
    let q = 2.0 * a2 * a2 * a2 / 27.0 - a2 * a1 * third + a0;
    let disc = (q * q * 0.25 + p * p * p / 27.0).sqrt();
    let u3a = -q * 0.5 + disc;
    let u3b = -q * 0.5 - disc;
    let u3 = if u3a.norm() >= u3b.norm() { u3a } else { u3b };
    let u = u3.powf(third);
    let omega = Complex64::new(-0.5, 0.75_f64.sqrt());
    let mut roots = [Complex64::ZERO; 3];
    for (i, w) in [Complex64::new(1.0, 0.0), omega, omega.conj()].iter().enumerate() {
        let uu = u * w;
        let y = if uu.norm() > 1e-300 { uu - p / (3.0 * uu) } else { uu };
        roots[i] = y - a2 * third;
    }
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let f = ((*r + a2) * *r + a1) * *r + a0;
            let df = (3.0 * *r + 2.0 * a2) * *r + a1;
            if df.norm() > 0.0 {
                *r -= f / df;
            }
        }
    }
    roots
}

/// Truncation regime of the N = 2 off-diagonal dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum N2Regime {
    Overdamped,
    Oscillatory,
}

/// Characteristic quantities of the N = 2 pointer.
#[derive(Debug, Clone)]
pub struct N2Report {
    /// hbar / (gamma J)
    pub tau: f64,
    /// 2 tau exp[(J - 2g)/T]
    pub tau_reg: f64,
    /// tau exp(J/T)
    pub tau_obs: f64,
    /// decay time of the off-diagonal block
    pub tau_trunc: f64,
    pub regime: N2Regime,
    /// epsilon = exp(-J/T), lambda = 4g/(gamma J)
    pub epsilon: f64,
    pub lambda: f64,
    /// eigenvalues -z/tau of the off-diagonal system: [z0, z1, z2]
    pub z: [Complex64; 3],
    /// equilibrium P(+1), P(-1); their ratio is exp(-4g/T)
    pub p1_inf: f64,
    pub pm1_inf: f64,
    /// regime condition T << 4g << J margins (4g/T, J/4g)
    pub margins: (f64, f64),
    pub warnings: Vec<String>,
}

/// Closed-form characteristics of the N = 2 model.
pub fn n2_report(p: &ModelParams) -> Result<N2Report, CwError> {
    if p.n != 2 {
        return Err(CwError::InvalidParameter("N = 2 analysis needs n = 2".into()));
    }
    let j = p.j2;
    if j <= 0.0 || p.j4 != 0.0 {
        return Err(CwError::InvalidParameter(
            "the microscopic pointer uses the pair coupling only (m^4 = m^2 for N = 2)".into(),
        ));
    }
    let tau = 1.0 / (p.gamma * j);
    let eps = (-j / p.temp).exp();
    let lambda = 4.0 * p.g / (p.gamma * j);
    let mut warnings = Vec::new();
    let margins = (4.0 * p.g / p.temp, j / (4.0 * p.g));
    if margins.0 < 3.0 || margins.1 < 3.0 {
        warnings.push(format!(
            "outside the pointer regime T << 4g << J: 4g/T = {:.2}, J/4g = {:.2}",
            margins.0, margins.1
        ));
    }
    // (z - 1)[(z - eps)^2 + lambda^2] - eps (z - eps) = 0, expanded monic
    let e = Complex64::new(eps, 0.0);
    let l2 = Complex64::new(lambda * lambda, 0.0);
    let a2 = Complex64::new(-(1.0 + 2.0 * eps), 0.0);
    let a1 = e * e + l2 + 2.0 * e - e;
    let a0 = -(e * e + l2) + e * e;
    let mut z = cubic_roots(a2, a1, a0);
    z.sort_by(|a, b| {
        (a - Complex64::ONE)
            .norm()
            .partial_cmp(&(b - Complex64::ONE).norm())
            .unwrap()
    });
    let (regime, tau_trunc) = if 2.0 * lambda < eps {
        let root = (eps * eps - 4.0 * lambda * lambda).sqrt();
        (N2Regime::Overdamped, tau / (2.0 * lambda * lambda) * (eps + root))
    } else {
        (
            N2Regime::Oscillatory,
            2.0 * (1.0 + lambda * lambda) / (eps * (1.0 + 2.0 * lambda * lambda)) * tau,
        )
    };
    let x = (-4.0 * p.g / p.temp).exp();
    Ok(N2Report {
        tau,
        tau_reg: 2.0 * tau * ((j - 2.0 * p.g) / p.temp).exp(),
        tau_obs: tau * (j / p.temp).exp(),
        tau_trunc,
        regime,
        epsilon: eps,
        lambda,
        z,
        p1_inf: 1.0 / (1.0 + x),
        pm1_inf: x / (1.0 + x),
        margins,
        warnings,
    })
}

/// Exact solution of the simplified Markovian three-level diagonal system
/// from the paramagnetic start P(0) = 1:
///   tau dP(0)/dt   = e_+ P(1) + e_- P(-1) - P(0)
///   tau dP(+-1)/dt = P(0)/2 - e_+- P(+-1),   e_+- = exp[-(J +- 2g)/T].
/// Returns (P(0), P(+1), P(-1)) at time t.
pub fn n2_diag_simplified(p: &ModelParams, t: f64) -> (f64, f64, f64) {
    let tau = 1.0 / (p.gamma * p.j2);
    let ep = (-(p.j2 + 2.0 * p.g) / p.temp).exp();
    let em = (-(p.j2 - 2.0 * p.g) / p.temp).exp();
    let b = 1.0 + ep + em;
    let c = 0.5 * (ep + em) + ep * em;
    let disc = (b * b - 4.0 * c).max(0.0).sqrt();
    let l1 = 0.5 * (b + disc);
    // the slow eigenvalue through the root product (the difference form
    // cancels catastrophically when c is exponentially small)
    let l2 = c / l1;
    // equilibrium (unnormalized): (2 ep em, em, ep)
    let zeq = 2.0 * ep * em + em + ep;
    let eq = [2.0 * ep * em / zeq, em / zeq, ep / zeq];
    // decaying modes: (M/tau + l) v = 0 gives v = (1, 1/(2(ep - l)), 1/(2(em - l)))
    let mode = |l: f64| -> [f64; 3] { [1.0, 0.5 / (ep - l), 0.5 / (em - l)] };
    let m1 = mode(l1);
    let m2 = mode(l2);
    // coefficients with (1, 0, 0) = eq + a1 m1 + a2 m2 (first two components)
    let det = m1[0] * m2[1] - m2[0] * m1[1];
    let r0 = 1.0 - eq[0];
    let r1 = -eq[1];
    let a1 = (r0 * m2[1] - r1 * m2[0]) / det;
    let a2 = (m1[0] * r1 - m1[1] * r0) / det;
    let f1 = (-l1 * t / tau).exp();
    let f2 = (-l2 * t / tau).exp();
    (
        eq[0] + a1 * m1[0] * f1 + a2 * m2[0] * f2,
        eq[1] + a1 * m1[1] * f1 + a2 * m2[1] * f2,
        eq[2] + a1 * m1[2] * f1 + a2 * m2[2] * f2,
    )
}

/// Two-stage analytic approximation for the same quantities.
pub fn n2_diag_analytic(p: &ModelParams, t: f64) -> (f64, f64, f64) {
    let tau = 1.0 / (p.gamma * p.j2);
    let tau_reg = 2.0 * tau * ((p.j2 - 2.0 * p.g) / p.temp).exp();
    let th = (2.0 * p.g / p.temp).tanh();
    let f = (-t / tau).exp();
    let fr = (-t / tau_reg).exp();
    (
        f,
        0.5 * ((1.0 - f) + th * (1.0 - fr)),
        0.5 * ((1.0 - f) - th * (1.0 - fr)),
    )
}

/// Exact solution of the simplified off-diagonal system
///   tau dP(0)/dt   = eps [P(1) + P(-1)] - P(0)
///   tau dP(+-1)/dt = +- i lambda P(+-1) + P(0)/2 - eps P(+-1)
/// from P(m, 0) = delta_{m,0}; returns (P(0), P(+1), P(-1)) per unit r_ud(0).
pub fn n2_offdiag_simplified(p: &ModelParams, t: f64) -> (Complex64, Complex64, Complex64) {
    let rep = n2_report(p).expect("N = 2 params");
    let tau = rep.tau;
    let (z0, z1, z2) = (rep.z[0], rep.z[1], rep.z[2]);
    let eps = Complex64::new(rep.epsilon, 0.0);
    let il = Complex64::new(0.0, rep.lambda);
    let e = |z: Complex64| (-z * t / tau).exp();
    let d01 = z0 - z1;
    let d12 = z1 - z2;
    let d02 = z0 - z2;
    let lam2 = Complex64::new(rep.lambda * rep.lambda, 0.0);
    let p0 = e(z0)
        - ((z1 - eps) * (z1 - eps) + lam2) / (d01 * d12) * (e(z1) - e(z0))
        - ((z2 - eps) * (z2 - eps) + lam2) / (d02 * (-d12)) * (e(z2) - e(z0));
    let pp = (z1 - eps - il) / (2.0 * d01 * d12) * (e(z1) - e(z0))
        + (z2 - eps - il) / (2.0 * d02 * (-d12)) * (e(z2) - e(z0));
    let pm = (z1 - eps + il) / (2.0 * d01 * d12) * (e(z1) - e(z0))
        + (z2 - eps + il) / (2.0 * d02 * (-d12)) * (e(z2) - e(z0));
    (p0, pp, pm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(n: usize, g: f64, gamma: f64, temp: f64) -> ModelParams {
        ModelParams { n, g, gamma, temp, j2: 1.0, j4: 0.0, ..Default::default() }
    }

    #[test]
    fn rate_symmetry_exact() {
        let p = params(64, 0.05, 1e-3, 0.65);
        let bath = BathKernel::from_params(&p);
        let rt = build_rates(&p, &bath, None, KernelMode::Markovian).unwrap();
        // Omega_i^+(m) = -Omega_i^-(m + dm), exactly in floating point
        for k in 0..64usize {
            assert_eq!(rt.omega_up_plus[k], -rt.omega_up_minus[k + 1]);
            assert_eq!(rt.omega_dn_plus[k], -rt.omega_dn_minus[k + 1]);
        }
    }

    #[test]
    fn rates_match_quoted_form() {
        let p = params(100, 0.05, 2e-3, 0.65);
        let bath = BathKernel::from_params(&p);
        let nf = p.n as f64;
        let tau_j = p.tau_j();
        for omega in [-1.7, -0.3, 0.4, 1.2] {
            let lhs = p.gamma * nf * bath.spectral(omega);
            let x: f64 = omega / (2.0 * p.temp);
            let rhs = nf * omega / (8.0 * p.j() * tau_j)
                * (1.0 / x.tanh() - 1.0)
                * (-omega.abs() / p.gamma_cut).exp();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
        let r0 = p.gamma * nf * bath.spectral(0.0);
        assert_relative_eq!(r0, p.gamma * nf * p.temp / 4.0, max_relative = 1e-12);
    }

    #[test]
    fn detailed_balance_of_rate_table() {
        let p = params(32, 0.03, 1e-3, 0.4);
        let bath = BathKernel::from_params(&p);
        let rt = build_rates(&p, &bath, None, KernelMode::Markovian).unwrap();
        for k in 1..32usize {
            let de = rt.omega_up_minus[k]; // energy change of the down flip
            let down = rt.kt_up_minus[k];
            let up = rt.kt_up_plus[k - 1]; // reverse flip, Om^+(m-dm) = -Om^-(m)
            assert_relative_eq!(down / up, (-de / p.temp).exp(), max_relative = 1e-10);
        }
    }

    #[test]
    fn cutoff_free_rates_close_below_gamma_over_100() {
        let p = params(16, 0.05, 1e-3, 0.65);
        let bath = BathKernel::from_params(&p);
        let no_cut = BathKernel { gamma_cut: 1e12, ..bath.clone() };
        for omega in [-0.5_f64, 0.2, 0.6] {
            assert!(omega.abs() < p.gamma_cut / 100.0);
            let rel = (bath.spectral(omega) - no_cut.spectral(omega)).abs() / no_cut.spectral(omega);
            assert!(rel < 0.01);
        }
    }

    #[test]
    fn free_precession_matches_cos_power_n() {
        // gamma -> 0: pure dephasing; the interaction picture makes the bath
        // terms exactly zero, leaving the Larmor phases
        let n = 200;
        let mut p = params(n, 0.05, 1e-30, 0.65);
        p.t0 = f64::INFINITY;
        let r0 = SpinState::new(0.5, 0.5, Complex64::new(0.25, 0.0)).unwrap();
        let state = JointDistribution::new_paramagnetic(&p, r0, InitialKind::ExactBoltzmann).unwrap();
        let tau_recur = std::f64::consts::FRAC_PI_2 / p.g;
        let times: Vec<f64> = (1..=40).map(|k| k as f64 / 40.0 * 2.0 * tau_recur).collect();
        let traj = evolve_master(&state, &p, &times, &EvolveOptions::default()).unwrap();
        for (snap, &t) in traj.states.iter().zip(&times) {
            let expect = r0.rud * (2.0 * p.g * t).cos().powi(n as i32);
            let got = snap.rud();
            assert!((got - expect).norm() < 1e-8, "t = {t}: got {got}, expect {expect}");
        }
        let at_recur = evolve_master(&state, &p, &[tau_recur], &EvolveOptions::default()).unwrap();
        let got = at_recur.states[0].rud();
        assert!((got - r0.rud).norm() < 1e-9); // (-1)^N = +1 for N = 200
    }

    #[test]
    fn gibbs_state_is_stationary_markovian() {
        let p = params(128, 0.05, 1e-3, 0.65);
        let bath = BathKernel::from_params(&p);
        let rt = build_rates(&p, &bath, None, KernelMode::Markovian).unwrap();
        let grid = MagnetizationGrid::new(p.n);
        let gibbs = gibbs_distribution(&p, p.g);
        let len = p.n + 1;
        let mut y = vec![0.0; 4 * len];
        y[..len].copy_from_slice(&gibbs);
        let mut dy = vec![0.0; 4 * len];
        let sys = MasterSystem { p: &p, grid: &grid, rates: &rt };
        crate::ode::OdeSystem::rhs(&sys, 0.0, &y, &mut dy);
        let scale = p.gamma * p.n as f64 * p.temp;
        for k in 0..len {
            assert!(dy[k].abs() / scale < 1e-10, "residual {} at grid point {k}", dy[k]);
        }
    }

    #[test]
    fn conservation_positivity_and_h_theorem() {
        let p = params(64, 0.05, 5e-3, 0.65);
        let r0 = SpinState::new(0.7, 0.3, Complex64::new(0.2, -0.1)).unwrap();
        let state = JointDistribution::new_paramagnetic(&p, r0, InitialKind::Gaussian).unwrap();
        let tau_j = p.tau_j();
        let times: Vec<f64> = (1..=10).map(|k| 0.8 * k as f64 * tau_j).collect();
        let traj = evolve_master(&state, &p, &times, &EvolveOptions::default()).unwrap();
        for snap in &traj.states {
            assert!((snap.norm() - 1.0).abs() < 1e-10);
            assert!((snap.sector_up() - 0.7).abs() < 1e-10);
            assert!(snap.min_diag() >= -1e-14);
        }
        let grid = MagnetizationGrid::new(p.n);
        let mut prev = f64::INFINITY;
        for snap in &traj.states {
            let pdis: Vec<f64> = snap.p_uu.iter().map(|&v| v / 0.7).collect();
            let f = dynamical_free_energy(&pdis, &grid, p.g, &p);
            assert!(f <= prev + 1e-10 * p.n as f64 * p.j());
            prev = f;
        }
    }

    #[test]
    fn cubic_solver_roundtrip() {
        let a2 = Complex64::new(-1.3, 0.4);
        let a1 = Complex64::new(0.2, -2.0);
        let a0 = Complex64::new(1.1, 0.7);
        for r in cubic_roots(a2, a1, a0) {
            let f = ((r + a2) * r + a1) * r + a0;
            assert!(f.norm() < 1e-10, "residual {f}");
        }
    }

    #[test]
    fn n2_closed_forms() {
        let p = ModelParams {
            n: 2,
            j2: 1.0,
            j4: 0.0,
            g: 0.05,
            gamma: 1e-3,
            temp: 0.02,
            ..Default::default()
        };
        let rep = n2_report(&p).unwrap();
        assert_relative_eq!(
            rep.pm1_inf / rep.p1_inf,
            (-4.0 * p.g / p.temp).exp(),
            max_relative = 1e-14
        );
        assert_eq!(rep.regime, N2Regime::Oscillatory);
        // simplified exact solution vs the two-stage analytic form
        for frac in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let t = frac * rep.tau_reg;
            let (p0s, p1s, pm1s) = n2_diag_simplified(&p, t);
            let (p0a, p1a, pm1a) = n2_diag_analytic(&p, t);
            assert!((p0s - p0a).abs() < 1e-3, "P0 at {frac} tau_reg");
            assert!((p1s - p1a).abs() < 1e-3, "P1 at {frac} tau_reg");
            assert!((pm1s - pm1a).abs() < 1e-3, "P-1 at {frac} tau_reg");
        }
        // intermediate plateau around 1/2 for tau << t << tau_reg
        let (_, p1, pm1) = n2_diag_simplified(&p, 40.0 * rep.tau);
        assert!((p1 - 0.5).abs() < 2.0 * rep.epsilon + 1e-3);
        assert!((pm1 - 0.5).abs() < 2.0 * rep.epsilon + 1e-3);
        // off-diagonal initial condition recovered at t = 0
        let (q0, qp, qm) = n2_offdiag_simplified(&p, 0.0);
        assert!((q0 - Complex64::ONE).norm() < 1e-10);
        assert!(qp.norm() < 1e-10 && qm.norm() < 1e-10);
    }

    #[test]
    fn full_master_equation_tracks_simplified_n2_forms() {
        // full rates vs the simplified system: branching corrections of
        // order 2g/J and exp(-J/T) bound the agreement
        let p = ModelParams {
            n: 2,
            j2: 1.0,
            j4: 0.0,
            g: 0.05,
            gamma: 1e-3,
            temp: 0.25,
            t0: f64::INFINITY,
            ..Default::default()
        };
        let rep = n2_report(&p).unwrap();
        // microcanonical paramagnetic start: P(0) = 1 on the 3-point grid
        let r0 = SpinState::new(1.0, 0.0, Complex64::ZERO).unwrap();
        let grid = MagnetizationGrid::new(2);
        let state = JointDistribution {
            grid,
            p_uu: vec![0.0, 1.0, 0.0],
            p_dd: vec![0.0, 0.0, 0.0],
            p_ud: vec![Complex64::ZERO; 3],
            time: 0.0,
            r0,
        };
        let times: Vec<f64> = [0.3, 1.0, 3.0].iter().map(|f| f * rep.tau_reg).collect();
        let traj = evolve_master(&state, &p, &times, &EvolveOptions::default()).unwrap();
        let bound = 2.0 * p.g / p.j2 + (-p.j2 / p.temp).exp();
        for (snap, &t) in traj.states.iter().zip(&times) {
            let (s0, s1, sm1) = n2_diag_simplified(&p, t);
            let full = [snap.p_uu[1], snap.p_uu[2], snap.p_uu[0]];
            for (f, s) in full.iter().zip([s0, s1, sm1]) {
                assert!(
                    (f - s).abs() < bound,
                    "t = {t}: full {f} vs simplified {s} (bound {bound})"
                );
            }
        }
    }

    #[test]
    fn n2_regime_boundary_by_eigenvalues() {
        let mk = |g: f64, gamma: f64| ModelParams {
            n: 2,
            j2: 1.0,
            j4: 0.0,
            g,
            gamma,
            temp: 0.25,
            ..Default::default()
        };
        let eps = (-4.0_f64).exp();
        let gamma = 0.5;
        let g_over = eps * gamma / 8.0 * 0.5;
        let g_osc = eps * gamma / 8.0 * 2.0;
        let rep_over = n2_report(&mk(g_over, gamma)).unwrap();
        let rep_osc = n2_report(&mk(g_osc, gamma)).unwrap();
        assert_eq!(rep_over.regime, N2Regime::Overdamped);
        assert_eq!(rep_osc.regime, N2Regime::Oscillatory);
        assert!(rep_over.z[1].im.abs() < 1e-12 && rep_over.z[2].im.abs() < 1e-12);
        assert!(rep_osc.z[1].im.abs() > 1e-12);
        assert_relative_eq!(rep_osc.z[1].im, -rep_osc.z[2].im, max_relative = 1e-8);
    }
}
