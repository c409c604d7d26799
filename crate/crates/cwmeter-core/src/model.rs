//! Model parameters, magnetization grid, equilibrium statics and the
//! consolidated time-scale report.
//!
//! Conventions: hbar = 1, k_B = 1. Energies are quoted in units of the
//! dominant spin coupling J = max(J2, J4); times either in 1/J or in
//! tau_J = 1/(gamma J).

use crate::error::CwError;
use crate::special::{ln_gamma, log_sum_exp};

/// All physical constants of the system + magnet + bath model.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// number of magnet spins
    pub n: usize,
    /// pair coupling (energy)
    pub j2: f64,
    /// quartic coupling (energy)
    pub j4: f64,
    /// system-magnet coupling (energy)
    pub g: f64,
    /// spread of the couplings g_n around g
    pub delta_g: f64,
    /// dimensionless magnet-bath coupling, in (0, 1)
    pub gamma: f64,
    /// bath temperature (energy units)
    pub temp: f64,
    /// preparation temperature; may be infinite
    pub t0: f64,
    /// Debye cutoff (angular frequency)
    pub gamma_cut: f64,
    /// transverse field on the tested spin (energy); 0 for an ideal setup
    pub b: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            n: 1000,
            j2: 1.0,
            j4: 0.0,
            g: 0.05,
            delta_g: 0.0,
            gamma: 1e-3,
            temp: 0.65,
            t0: f64::INFINITY,
            gamma_cut: 50.0 * (std::f64::consts::PI / 2.0).sqrt(),
            b: 0.0,
        }
    }
}

impl ModelParams {
    /// Validate hard constraints; returns soft-regime warnings.
    pub fn validate(&self) -> Result<Vec<String>, CwError> {
        if self.n == 0 {
            return Err(CwError::InvalidParameter("N must be positive".into()));
        }
        if self.j2 < 0.0 || self.j4 < 0.0 {
            return Err(CwError::InvalidParameter("J2 and J4 must be >= 0".into()));
        }
        if self.j2 + self.j4 <= 0.0 {
            return Err(CwError::InvalidParameter("J2 + J4 must be > 0".into()));
        }
        if self.g < 0.0 || self.delta_g < 0.0 {
            return Err(CwError::InvalidParameter("g and delta_g must be >= 0".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(CwError::InvalidParameter("gamma must lie in (0, 1)".into()));
        }
        if self.temp <= 0.0 {
            return Err(CwError::InvalidParameter("T must be > 0".into()));
        }
        if self.t0 <= 0.0 {
            return Err(CwError::InvalidParameter("T0 must be > 0 (or +inf)".into()));
        }
        if self.gamma_cut <= 0.0 {
            return Err(CwError::InvalidParameter("Gamma cutoff must be > 0".into()));
        }
        if self.b < 0.0 {
            return Err(CwError::InvalidParameter("b must be >= 0".into()));
        }
        Ok(self.regime_warnings())
    }

    /// Soft validity flags: weak coupling gamma << T/J, large cutoff hbar*Gamma >> J.
    pub fn regime_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let j = self.j();
        if self.gamma * j >= 0.1 * self.temp {
            w.push(format!(
                "weak-coupling condition gamma << T/J violated: gamma = {:.3e}, T/J = {:.3e}",
                self.gamma,
                self.temp / j
            ));
        }
        if self.gamma_cut <= 10.0 * j {
            w.push(format!(
                "large-cutoff condition Gamma >> J violated: Gamma = {:.3e}, J = {:.3e}",
                self.gamma_cut, j
            ));
        }
        w
    }

    /// Energy unit J = max(J2, J4).
    pub fn j(&self) -> f64 {
        self.j2.max(self.j4)
    }

    /// tau_J = hbar / (gamma J).
    pub fn tau_j(&self) -> f64 {
        1.0 / (self.gamma * self.j())
    }

    /// True if the zero-field transition is first order (3 J4 > J2).
    pub fn first_order(&self) -> bool {
        3.0 * self.j4 > self.j2
    }

    /// Initial width parameter delta_0^2 = T0 / (T0 - J2); equals 1 for
    /// T0 = infinity and for a purely quartic magnet.
    pub fn delta0_sq(&self) -> Result<f64, CwError> {
        if self.t0.is_infinite() || self.j2 == 0.0 {
            return Ok(if self.t0.is_infinite() { 1.0 } else { self.t0 / self.t0 });
        }
        if self.t0 <= self.j2 {
            return Err(CwError::InvalidParameter(format!(
                "no paramagnetic preparation: T0 = {} <= J2 = {}",
                self.t0, self.j2
            )));
        }
        Ok(self.t0 / (self.t0 - self.j2))
    }

    /// Spread width delta_1^2 = T0/(T0-J) + T/(J-T) entering the wrong
    /// registration estimate (second-order regime, J = J2).
    pub fn delta1_sq(&self) -> Result<f64, CwError> {
        let d0 = self.delta0_sq()?;
        if self.temp >= self.j2 {
            return Err(CwError::RegimeViolated(
                "delta_1 requires T < J2 (second-order registration regime)".into(),
            ));
        }
        Ok(d0 + self.temp / (self.j2 - self.temp))
    }

    /// Bifurcation scale m_B = g / (J2 - T) of the linearized drift (second order).
    pub fn m_b_linear(&self) -> Result<f64, CwError> {
        if self.temp >= self.j2 {
            return Err(CwError::RegimeViolated("m_B requires T < J2".into()));
        }
        Ok(self.g / (self.j2 - self.temp))
    }
}

/// The N+1 eigenvalues m_k = -1 + 2k/N of the magnetization per spin.
#[derive(Debug, Clone)]
pub struct MagnetizationGrid {
    pub n: usize,
    pub values: Vec<f64>,
}

impl MagnetizationGrid {
    pub fn new(n: usize) -> Self {
        let values = (0..=n).map(|k| -1.0 + 2.0 * k as f64 / n as f64).collect();
        Self { n, values }
    }

    pub fn spacing(&self) -> f64 {
        2.0 / self.n as f64
    }

    /// Index of a grid value, if `m` lies on the grid (1e-9 tolerance).
    pub fn index_of(&self, m: f64) -> Option<usize> {
        let k = (0.5 * (m + 1.0) * self.n as f64).round();
        if k < 0.0 || k > self.n as f64 {
            return None;
        }
        let k = k as usize;
        if (self.values[k] - m).abs() < 1e-9 {
            Some(k)
        } else {
            None
        }
    }
}

/// ln G(m): log multiplicity of the magnetization eigenvalue m.
pub fn multiplicity_log(n: usize, m: f64) -> Result<f64, CwError> {
    let grid_pos = 0.5 * (m + 1.0) * n as f64;
    let k = grid_pos.round();
    if (grid_pos - k).abs() > 1e-9 || k < 0.0 || k > n as f64 {
        return Err(CwError::Domain(format!("m = {m} is not on the grid of size {n}")));
    }
    let nf = n as f64;
    let n_up = k;
    let n_dn = nf - k;
    Ok(ln_gamma(nf + 1.0) - ln_gamma(n_up + 1.0) - ln_gamma(n_dn + 1.0))
}

/// ln G at continuous m (Stirling form of the binomial), used on PDE meshes.
pub fn multiplicity_log_smooth(n: usize, m: f64) -> f64 {
    let nf = n as f64;
    let n_up = 0.5 * nf * (1.0 + m);
    let n_dn = 0.5 * nf * (1.0 - m);
    ln_gamma(nf + 1.0) - ln_gamma(n_up + 1.0) - ln_gamma(n_dn + 1.0)
}

const M_CLAMP: f64 = 1.0 - 1e-12;

/// Free energy F(m) of the magnet in a field h (per Eq. of state statics).
///
/// F(m)/N = -J2 m^2/2 - J4 m^4/4 - h m + T [ (1+m)/2 ln (1+m)/2 + (1-m)/2 ln (1-m)/2 ]
/// plus, when `with_correction`, the O(1) term (T/2N) ln[(1-m^2)/4].
/// |m| is clamped at 1 - 1e-12 (the entropy diverges at the boundary).
pub fn free_energy(m: f64, h: f64, p: &ModelParams, with_correction: bool) -> f64 {
    let m = m.clamp(-M_CLAMP, M_CLAMP);
    let nf = p.n as f64;
    let up = 0.5 * (1.0 + m);
    let dn = 0.5 * (1.0 - m);
    let entropy = up * up.ln() + dn * dn.ln();
    let mut f = nf * (-0.5 * p.j2 * m * m - 0.25 * p.j4 * m.powi(4) - h * m + p.temp * entropy);
    if with_correction {
        f += 0.5 * p.temp * ((1.0 - m * m) / 4.0).ln();
    }
    f
}

/// dF/dm without the O(1) correction, per spin quantities times N.
pub fn free_energy_slope(m: f64, h: f64, p: &ModelParams) -> f64 {
    let m = m.clamp(-M_CLAMP, M_CLAMP);
    let nf = p.n as f64;
    nf * (-p.j2 * m - p.j4 * m.powi(3) - h + 0.5 * p.temp * ((1.0 + m) / (1.0 - m)).ln())
}

fn mean_field_residual(m: f64, h: f64, p: &ModelParams) -> f64 {
    ((h + p.j2 * m + p.j4 * m.powi(3)) / p.temp).tanh() - m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Attractive,
    Repulsive,
}

#[derive(Debug, Clone, Copy)]
pub struct FixedPoint {
    pub m: f64,
    pub stability: Stability,
}

/// All real roots of m = tanh[beta (h + J2 m + J4 m^3)], classified.
#[derive(Debug, Clone, Default)]
pub struct FixedPointSet {
    /// paramagnetic-like root (attractive root of smallest |m|), if any
    pub para: Option<f64>,
    /// largest attractive root (m_up), if positive
    pub ferro_up: Option<f64>,
    /// smallest attractive root (m_down), if negative
    pub ferro_down: Option<f64>,
    /// repulsive roots (bifurcations), ordered
    pub repulsive: Vec<f64>,
    /// degenerate double root detected at the critical field
    pub critical: Option<(f64, f64)>,
    /// every root with its stability tag, ordered by m
    pub all: Vec<FixedPoint>,
}

/// Locate the fixed points by a dense bracketing scan plus bisection.
pub fn fixed_points(h: f64, p: &ModelParams) -> FixedPointSet {
    const SCAN: usize = 10_000;
    const EDGE: f64 = 1.0 - 1e-6;
    let mut roots: Vec<f64> = Vec::new();
    let mut prev_m = -EDGE;
    let mut prev_f = mean_field_residual(prev_m, h, p);
    for k in 1..=SCAN {
        let m = -EDGE + 2.0 * EDGE * k as f64 / SCAN as f64;
        let f = mean_field_residual(m, h, p);
        if prev_f == 0.0 {
            roots.push(prev_m);
        } else if prev_f * f < 0.0 {
            roots.push(bisect(|x| mean_field_residual(x, h, p), prev_m, m, 1e-12));
        }
        prev_m = m;
        prev_f = f;
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let mut set = FixedPointSet::default();
    for &r in &roots {
        // stability from the slope of the residual: attractive if d/dm (tanh - m) < 0
        let dm = 1e-7;
        let slope = (mean_field_residual(r + dm, h, p) - mean_field_residual(r - dm, h, p)) / (2.0 * dm);
        let stability = if slope < 0.0 { Stability::Attractive } else { Stability::Repulsive };
        set.all.push(FixedPoint { m: r, stability });
        match stability {
            Stability::Attractive => {
                if set.para.is_none() || r.abs() < set.para.unwrap().abs() {
                    set.para = Some(r);
                }
                if r > 1e-9 && r > set.ferro_up.unwrap_or(f64::NEG_INFINITY) {
                    set.ferro_up = Some(r);
                }
                if r < -1e-9 && r < set.ferro_down.unwrap_or(f64::INFINITY) {
                    set.ferro_down = Some(r);
                }
            }
            Stability::Repulsive => set.repulsive.push(r),
        }
    }
    // the smallest-|m| attractive root is "paramagnetic" only when distinct
    // attractive roots surround it; when only two symmetric ferro roots
    // exist (h = 0 below Tc) there is no paramagnetic point.
    if let Some(mp) = set.para {
        if (set.ferro_up == Some(mp) && mp > 0.1) || (set.ferro_down == Some(mp) && mp < -0.1) {
            set.para = None;
        }
    }
    // degenerate double roots at the critical field: |F''| below threshold
    for fp in &set.all {
        let curv = second_derivative_f(fp.m, h, p);
        if curv.abs() < 1e-8 * p.n as f64 {
            set.critical = Some((fp.m, h));
        }
    }
    set
}

fn second_derivative_f(m: f64, h: f64, p: &ModelParams) -> f64 {
    let _ = h;
    let m = m.clamp(-M_CLAMP, M_CLAMP);
    p.n as f64 * (-p.j2 - 3.0 * p.j4 * m * m + p.temp / (1.0 - m * m))
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let c = 0.5 * (a + b);
        if (b - a).abs() < tol {
            return c;
        }
        let fc = f(c);
        if fa * fc <= 0.0 {
            b = c;
        } else {
            a = c;
            fa = fc;
        }
    }
    0.5 * (a + b)
}

/// Critical magnetization and field (first-order regime only): the point
/// where dF/dm and d2F/dm2 vanish simultaneously.
pub fn critical_field(p: &ModelParams) -> Result<(f64, f64), CwError> {
    if !p.first_order() {
        // second-order regime: any infinitesimal field tilts the landscape
        return Ok((f64::NAN, 0.0));
    }
    // d2F/dm2 = 0: T/(1-m^2) = J2 + 3 J4 m^2; smallest positive root.
    let f = |m: f64| p.temp / (1.0 - m * m) - p.j2 - 3.0 * p.j4 * m * m;
    let mut a = 1e-9;
    let mut found = None;
    let scan = 40_000;
    for k in 1..scan {
        let m = k as f64 / scan as f64 * (1.0 - 1e-9);
        if f(a) * f(m) < 0.0 {
            found = Some(bisect(&f, a, m, 1e-14));
            break;
        }
        a = m;
    }
    let m_c = found.ok_or_else(|| {
        CwError::RegimeViolated("no inflection point: temperature too high for metastability".into())
    })?;
    let h_c = p.temp * m_c.atanh() - p.j2 * m_c - p.j4 * m_c.powi(3);
    Ok((m_c, h_c))
}

/// Transition temperature: J2 for a second-order magnet; for a first-order
/// magnet the temperature where the ferromagnetic and paramagnetic minima
/// of F exchange stability, F(m_F) = F(0).
pub fn transition_temperature(p: &ModelParams) -> Result<f64, CwError> {
    if !p.first_order() {
        return Ok(p.j2);
    }
    let balance = |t: f64| -> f64 {
        let pt = ModelParams { temp: t, ..p.clone() };
        match fixed_points(0.0, &pt).ferro_up {
            Some(mf) => free_energy(mf, 0.0, &pt, false) - free_energy(0.0, 0.0, &pt, false),
            None => 1.0, // ferro minimum melted: paramagnet wins
        }
    };
    // bracket in T/J4 between deep-ferro and paramagnet-only regions
    let j = p.j();
    let mut lo = 0.2 * j;
    let mut hi = 0.55 * j;
    if balance(lo) > 0.0 || balance(hi) < 0.0 {
        return Err(CwError::RegimeViolated("could not bracket the first-order transition".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if balance(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * j {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Free-energy barrier at field h: max F on [0, m_of_minimum] minus the
/// ferromagnetic minimum. Returns (barrier, m_at_maximum).
pub fn barrier(p: &ModelParams, h: f64) -> Result<(f64, f64), CwError> {
    let set = fixed_points(h, p);
    let mf = set
        .ferro_up
        .ok_or_else(|| CwError::RegimeViolated("no ferromagnetic minimum".into()))?;
    // the maximum of F between the smaller attractive basin and m_F is at a
    // repulsive fixed point in [-1, mf]
    let mut best: Option<(f64, f64)> = None;
    for &r in &set.repulsive {
        let f = free_energy(r, h, p, false);
        if best.map_or(true, |(fb, _)| f > fb) {
            best = Some((f, r));
        }
    }
    let (fmax, mmax) = best.unwrap_or_else(|| {
        // second order at h = 0: the maximum sits at m = 0
        (free_energy(0.0, h, p, false), 0.0)
    });
    Ok((fmax - free_energy(mf, h, p, false), mmax))
}

/// Normalized initial magnet distribution on the discrete grid:
/// a Gaussian of variance delta_0^2/N.
pub fn initial_magnet_distribution(p: &ModelParams) -> Result<Vec<f64>, CwError> {
    let d0sq = p.delta0_sq()?;
    let grid = MagnetizationGrid::new(p.n);
    let nf = p.n as f64;
    let logs: Vec<f64> = grid.values.iter().map(|&m| -0.5 * nf * m * m / d0sq).collect();
    let lz = log_sum_exp(&logs);
    Ok(logs.iter().map(|&l| (l - lz).exp()).collect())
}

/// One entry of the time-scale report.
#[derive(Debug, Clone)]
pub struct TimescaleEntry {
    pub name: &'static str,
    /// value in absolute units (hbar/J = 1); infinite when the mechanism is absent
    pub value: f64,
    /// value in tau_J units
    pub in_tau_j: f64,
    /// empty when the closed form applies to the parameter regime
    pub flags: Vec<String>,
}

/// Every characteristic time of the measurement in one labeled map.
pub fn timescales_report(p: &ModelParams, delta_sub: Option<f64>) -> Vec<TimescaleEntry> {
    let mut out = Vec::new();
    let tau_j = p.tau_j();
    let d0 = p.delta0_sq().map(|v| v.sqrt());
    let nf = p.n as f64;

    let mut push = |name: &'static str, value: f64, flags: Vec<String>| {
        out.push(TimescaleEntry { name, value, in_tau_j: value / tau_j, flags });
    };

    match &d0 {
        Ok(d0) => {
            let v = if p.g > 0.0 { 1.0 / ((2.0 * nf).sqrt() * d0 * p.g) } else { f64::INFINITY };
            push("tau_trunc", v, vec![]);
        }
        Err(e) => push("tau_trunc", f64::NAN, vec![e.to_string()]),
    }
    push(
        "tau_recur",
        if p.g > 0.0 { std::f64::consts::FRAC_PI_2 / p.g } else { f64::INFINITY },
        vec![],
    );
    push(
        "tau_irrev_m",
        if p.delta_g > 0.0 { 1.0 / ((2.0 * nf).sqrt() * p.delta_g) } else { f64::INFINITY },
        if p.delta_g > 0.0 {
            vec![]
        } else {
            vec!["no coupling spread: magnet-induced irreversibility absent".into()]
        },
    );
    push(
        "tau_irrev_b",
        if p.g > 0.0 {
            2.0 * (p.g / p.temp).tanh() / (nf * p.gamma * p.g)
        } else {
            f64::INFINITY
        },
        vec![],
    );

    // registration times
    if p.first_order() {
        match critical_field(p) {
            Ok((m_c, h_c)) if p.g > h_c => {
                let tau_reg = std::f64::consts::PI / (p.gamma * p.temp)
                    * (m_c * p.temp / (p.g - h_c)).sqrt();
                push("tau_reg", tau_reg, vec![]);
                push(
                    "tau_reg_prime",
                    tau_reg,
                    vec!["first-order transition: both registration stages share tau_reg".into()],
                );
            }
            Ok((_, h_c)) => {
                push(
                    "tau_reg",
                    f64::INFINITY,
                    vec![format!("no registration: g = {:.4e} <= h_c = {:.4e}", p.g, h_c)],
                );
            }
            Err(e) => push("tau_reg", f64::NAN, vec![e.to_string()]),
        }
    } else if p.temp < p.j2 {
        let tau_reg = 1.0 / (p.gamma * (p.j2 - p.temp));
        push("tau_reg", tau_reg, vec![]);
        let set = fixed_points(0.0, p);
        match (set.ferro_up, p.m_b_linear()) {
            (Some(mf), Ok(mb)) if mb > 0.0 => {
                let a = registration_shape_coefficient(p, mf);
                push("tau_reg_prime", tau_reg * (1.0 + a) * (mf / mb).ln(), vec![]);
            }
            _ => push(
                "tau_reg_prime",
                f64::NAN,
                vec!["needs g > 0 and a ferromagnetic minimum".into()],
            ),
        }
        push("tau_para", tau_reg * (0.1 * nf.sqrt()).ln(), vec![]);
    } else {
        push(
            "tau_reg",
            f64::NAN,
            vec![format!("paramagnetic phase: T = {} >= J2 = {}", p.temp, p.j2)],
        );
    }

    match barrier(p, 0.0) {
        Ok((df, _)) => push("tau_eras", tau_j * (df / p.temp).exp(), vec![]),
        Err(e) => push("tau_eras", f64::NAN, vec![e.to_string()]),
    }

    match d0 {
        Ok(d0) if p.g > 0.0 => {
            push("tau_leak", (2.0 / nf).sqrt() * d0 / (p.gamma * p.g), vec![]);
        }
        _ => push("tau_leak", f64::INFINITY, vec![]),
    }

    match delta_sub {
        Some(d) if d > 0.0 => {
            let mut flags = vec![];
            if d >= nf.sqrt() * (p.j2 + p.j4) {
                flags.push("subensemble coupling not weak: Delta >= sqrt(N)(J2+J4)".into());
            }
            push("tau_sub", 1.0 / d, flags);
        }
        _ => push(
            "tau_sub",
            f64::NAN,
            vec!["requires the intra-apparatus coupling strength Delta".into()],
        ),
    }
    out
}

/// Shape coefficient a = T(J-T) / (J [T - J(1 - m_F^2)]) of the q = 2
/// registration curve.
pub fn registration_shape_coefficient(p: &ModelParams, m_f: f64) -> f64 {
    let j = p.j2;
    let t = p.temp;
    t * (j - t) / (j * (t - j * (1.0 - m_f * m_f)))
}
