//! Quasi-Ohmic phonon bath: spectral kernel and its finite-time windowed
//! variants, which drive every dissipative term of the dynamics.
//!
//! hbar = 1 throughout; K has units of energy squared.

use num_complex::Complex64;

use crate::error::CwError;
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffKind {
    /// exp(-|omega|/Gamma)
    Exponential,
    /// 4 G~^4 / (4 G~^4 + omega^4) with G~ = sqrt(2/pi) Gamma, which matches
    /// the exponential cutoff at small omega/Gamma
    QuasiLorentzian,
}

#[derive(Debug, Clone)]
pub struct BathKernel {
    pub gamma: f64,
    pub temp: f64,
    pub gamma_cut: f64,
    pub cutoff: CutoffKind,
}

impl BathKernel {
    pub fn new(gamma: f64, temp: f64, gamma_cut: f64, cutoff: CutoffKind) -> Self {
        Self { gamma, temp, gamma_cut, cutoff }
    }

    pub fn from_params(p: &crate::model::ModelParams) -> Self {
        Self::new(p.gamma, p.temp, p.gamma_cut, CutoffKind::Exponential)
    }

    fn cutoff_factor(&self, omega: f64) -> f64 {
        match self.cutoff {
            CutoffKind::Exponential => (-omega.abs() / self.gamma_cut).exp(),
            CutoffKind::QuasiLorentzian => {
                let gt = (2.0 / std::f64::consts::PI).sqrt() * self.gamma_cut;
                let g4 = 4.0 * gt.powi(4);
                g4 / (g4 + omega.powi(4))
            }
        }
    }

    /// Spectral kernel K~(omega) = (1/4) omega c(omega) / (e^{omega/T} - 1),
    /// with the omega -> 0 limit T/4 taken analytically.
    pub fn spectral(&self, omega: f64) -> f64 {
        let x = omega / self.temp;
        let bose = if x.abs() < 1e-5 {
            // omega/(e^x - 1) = T * x/(e^x-1) = T (1 - x/2 + x^2/12 - ...)
            self.temp * (1.0 - 0.5 * x + x * x / 12.0)
        } else {
            omega / x.exp_m1()
        };
        0.25 * bose * self.cutoff_factor(omega)
    }

    /// Memory time hbar/(2 pi T) of K(t).
    pub fn memory_time(&self) -> f64 {
        1.0 / (2.0 * std::f64::consts::PI * self.temp)
    }

    /// Windowed kernels at frequency `omega` and time `t >= 0`:
    /// returns (K~_{t>}, K~_{t<}, K~_t) with K~_{t<} = conj(K~_{t>}) and
    /// K~_t = 2 Re K~_{t>}, evaluated through the spectral representation.
    pub fn windowed(&self, omega: f64, t: f64) -> Result<(Complex64, Complex64, f64), CwError> {
        if t < 0.0 {
            return Err(CwError::InvalidParameter("windowed kernels need t >= 0".into()));
        }
        if t == 0.0 {
            return Ok((Complex64::ZERO, Complex64::ZERO, 0.0));
        }
        let omega_max = (20.0 * self.temp).max(10.0 * self.gamma_cut).max(10.0 * omega.abs());
        let mut pts = quad::oscillation_breakpoints(-omega_max, omega_max, t, 60_000);
        pts.push(0.0);
        pts.push(omega);
        pts.push(-omega);

        // Re K_> = (1/2pi) int K~(w') sin((w'-w)t)/(w'-w);
        // Im K_> = -(1/2pi) int K~(w') (cos((w'-w)t)-1)/(w'-w).
        let re = quad::integrate(
            |wp: f64| {
                let x = wp - omega;
                let w = if x.abs() < 1e-12 { t } else { (x * t).sin() / x };
                self.spectral(wp) * w
            },
            -omega_max,
            omega_max,
            &pts,
            1e-6,
            1e-14,
            200_000,
        )?;
        let im = quad::integrate(
            |wp: f64| {
                let x = wp - omega;
                let w = if x.abs() < 1e-12 {
                    // (cos(xt)-1)/x -> -x t^2/2
                    -0.5 * x * t * t
                } else {
                    ((x * t).cos() - 1.0) / x
                };
                -self.spectral(wp) * w
            },
            -omega_max,
            omega_max,
            &pts,
            1e-6,
            1e-14,
            200_000,
        )?;
        let kgt = Complex64::new(re.value, im.value) / (2.0 * std::f64::consts::PI);
        Ok((kgt, kgt.conj(), 2.0 * kgt.re))
    }

    /// Time-domain autocorrelation K(t) (diagnostics), from the pole sum of
    /// the exponential-cutoff kernel.
    pub fn time_domain(&self, t: f64) -> Result<Complex64, CwError> {
        if self.cutoff != CutoffKind::Exponential {
            return Err(CwError::InvalidParameter(
                "time-domain closed form requires the exponential cutoff".into(),
            ));
        }
        Ok(k_time_exponential(self.temp, self.gamma_cut, t))
    }

    /// Tabulated K(u) on [0, u_max] for fast windowed-kernel evaluation.
    ///
    /// Two resolutions: a fine segment resolving the 1/Gamma-wide burst at
    /// u = 0 and a coarse segment covering the thermal memory tail.
    pub fn tabulate(&self, t_max: f64) -> Result<KernelTable, CwError> {
        if self.cutoff != CutoffKind::Exponential {
            return Err(CwError::InvalidParameter(
                "fast kernel table requires the exponential cutoff".into(),
            ));
        }
        // K(u) is negligible beyond a few thermal memory times
        let u_cut = (12.0 / (std::f64::consts::PI * self.temp)).min(t_max.max(1e-12));
        let u_fine = (60.0 / self.gamma_cut).min(u_cut);
        let sample = |du: f64, lo: f64, n: usize| -> (Vec<f64>, Vec<f64>) {
            let mut re = Vec::with_capacity(n + 1);
            let mut im = Vec::with_capacity(n + 1);
            for k in 0..=n {
                let kt = k_time_exponential(self.temp, self.gamma_cut, lo + k as f64 * du);
                re.push(kt.re);
                im.push(kt.im);
            }
            (re, im)
        };
        let n_fine = 4096;
        let du_fine = u_fine / n_fine as f64;
        let (re_f, im_f) = sample(du_fine, 0.0, n_fine);
        let fine = Segment1d { lo: 0.0, du: du_fine, re: re_f, im: im_f };
        let coarse = if u_cut > u_fine * (1.0 + 1e-12) {
            let n_coarse = 6000;
            let du_c = (u_cut - u_fine) / n_coarse as f64;
            let (re_c, im_c) = sample(du_c, u_fine, n_coarse);
            Some(Segment1d { lo: u_fine, du: du_c, re: re_c, im: im_c })
        } else {
            None
        };
        Ok(KernelTable { fine, coarse })
    }
}

/// K(t) = (1/8 pi) [ sum_{n>=1} (1/G + n b - i t)^{-2} + sum_{n>=0} (1/G + n b + i t)^{-2} ].
fn k_time_exponential(temp: f64, gamma_cut: f64, t: f64) -> Complex64 {
    let beta = 1.0 / temp;
    let a = 1.0 / gamma_cut;
    let mut sum = Complex64::new(0.0, 0.0);
    let nterms = 400usize;
    for n in 0..=nterms {
        if n >= 1 {
            let z = Complex64::new(a + n as f64 * beta, -t);
            sum += 1.0 / (z * z);
        }
        let z = Complex64::new(a + n as f64 * beta, t);
        sum += 1.0 / (z * z);
    }
    // Euler-Maclaurin tail for both sums: sum_{n>N} (c + n b)^-2
    // with complex c = a -+ i t.
    for sgn in [-1.0, 1.0] {
        let c = Complex64::new(a, sgn * t);
        let nb = (nterms as f64 + 1.0) * beta;
        let z = c + nb;
        // integral + half endpoint + derivative correction
        sum += 1.0 / (beta * z) + 0.5 / (z * z) - beta / (6.0 * z * z * z);
    }
    sum / (8.0 * std::f64::consts::PI)
}

struct Segment1d {
    lo: f64,
    du: f64,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Segment1d {
    fn hi(&self) -> f64 {
        self.lo + self.du * (self.re.len() - 1) as f64
    }

    fn eval(&self, u: f64) -> Complex64 {
        let n = self.re.len() - 1;
        let x = ((u - self.lo) / self.du).clamp(0.0, n as f64);
        let k = (x.floor() as usize).min(n - 1);
        let f = x - k as f64;
        // cubic Catmull-Rom through neighbouring samples
        let idx = |i: isize| -> usize { (k as isize + i).clamp(0, n as isize) as usize };
        let cr = |v: &[f64]| -> f64 {
            let p0 = v[idx(-1)];
            let p1 = v[idx(0)];
            let p2 = v[idx(1)];
            let p3 = v[idx(2)];
            let a = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
            let b = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
            let c = -0.5 * p0 + 0.5 * p2;
            ((a * f + b) * f + c) * f + p1
        };
        Complex64::new(cr(&self.re), cr(&self.im))
    }

    /// Simpson integral of exp(-i omega u) K(u) over [a, b] within this segment.
    fn oscillatory_integral(&self, omega: f64, a: f64, b: f64) -> Complex64 {
        if b <= a {
            return Complex64::ZERO;
        }
        let period_limit = if omega.abs() > 1e-12 {
            std::f64::consts::PI / (8.0 * omega.abs())
        } else {
            f64::INFINITY
        };
        let h_target = period_limit.min(self.du).min((b - a) / 8.0);
        let mut n = ((b - a) / h_target).ceil() as usize;
        n = n.max(8);
        if n % 2 == 1 {
            n += 1;
        }
        let h = (b - a) / n as f64;
        let f = |u: f64| -> Complex64 {
            Complex64::new(0.0, -omega * u).exp() * self.eval(u)
        };
        let mut acc = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + k as f64 * h);
        }
        acc * (h / 3.0)
    }
}

/// Interpolation table for K(u), u >= 0 (K(-u) = conj K(u)).
pub struct KernelTable {
    fine: Segment1d,
    coarse: Option<Segment1d>,
}

impl KernelTable {
    /// Largest tabulated time.
    pub fn support(&self) -> f64 {
        self.coarse.as_ref().map_or(self.fine.hi(), |c| c.hi())
    }

    /// K~_{t>}(omega) = int_0^t du exp(-i omega u) K(u) via the table.
    pub fn windowed_gt(&self, omega: f64, t: f64) -> Complex64 {
        let upper = t.min(self.support());
        if upper <= 0.0 {
            return Complex64::ZERO;
        }
        let split = self.fine.hi().min(upper);
        let mut acc = self.fine.oscillatory_integral(omega, 0.0, split);
        if let Some(coarse) = &self.coarse {
            if upper > split {
                acc += coarse.oscillatory_integral(omega, split, upper);
            }
        }
        acc
    }
}
