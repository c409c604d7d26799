//! Subensemble relaxation: decay of coherent superpositions of the two
//! ferromagnetic wells under weak complex intra-apparatus interactions,
//! modeled by random matrices (GUE), factorized random ensembles, and a
//! repeated-collision map.

use nalgebra::{Complex, DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::CwError;
use crate::rng::{standard_normal, task_rng};
use crate::special::bessel_j1;

type CMat = DMatrix<Complex<f64>>;
type CVec = DVector<Complex<f64>>;

/// Coherent superposition across the two G-fold degenerate ferromagnetic
/// levels: |Psi> = sum_eta U_up[eta] |up, eta> + U_dn[eta] |dn, eta>.
#[derive(Debug, Clone)]
pub struct CatState {
    pub u_up: Vec<Complex64>,
    pub u_down: Vec<Complex64>,
}

impl CatState {
    pub fn new(u_up: Vec<Complex64>, u_down: Vec<Complex64>) -> Result<Self, CwError> {
        if u_up.len() != u_down.len() || u_up.is_empty() {
            return Err(CwError::InvalidParameter(
                "coefficient vectors must share a positive length".into(),
            ));
        }
        let norm: f64 = u_up.iter().chain(u_down.iter()).map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(CwError::InvalidParameter(format!("cat state not normalized: {norm}")));
        }
        Ok(Self { u_up, u_down })
    }

    /// random cat state with well weights q_up, 1 - q_up
    pub fn random<R: Rng>(g: usize, q_up: f64, rng: &mut R) -> Self {
        let mut draw = |n: usize| -> Vec<Complex64> {
            (0..n)
                .map(|_| Complex64::new(standard_normal(rng), standard_normal(rng)))
                .collect()
        };
        let up_raw = draw(g);
        let dn_raw = draw(g);
        let mut up = up_raw;
        let mut dn = dn_raw;
        let nu: f64 = up.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let nd: f64 = dn.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for c in up.iter_mut() {
            *c *= q_up.sqrt() / nu;
        }
        for c in dn.iter_mut() {
            *c *= (1.0 - q_up).sqrt() / nd;
        }
        Self { u_up: up, u_down: dn }
    }

    pub fn g(&self) -> usize {
        self.u_up.len()
    }

    pub fn q_up(&self) -> f64 {
        self.u_up.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn q_down(&self) -> f64 {
        self.u_down.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Which ensemble generates the weak intra-apparatus interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnsembleKind {
    /// Gaussian unitary ensemble with semicircle radius Delta
    Gue,
    /// Haar eigenvectors with independent Gaussian eigenvalues (spread Delta)
    FactorizedGaussian,
    /// repeated short collisions of duration delta_step
    Collisional { delta_step: f64, n_collisions: usize },
}

/// Relaxation kernel: ensemble kind plus the interaction strength Delta.
#[derive(Debug, Clone)]
pub struct RelaxationKernel {
    pub kind: EnsembleKind,
    pub delta: f64,
}

impl RelaxationKernel {
    /// tau_sub = hbar / Delta
    pub fn tau_sub(&self) -> f64 {
        1.0 / self.delta
    }

    /// weak-coupling flag Delta << sqrt(N) (J2 + J4)
    pub fn weakness_ok(&self, p: &crate::model::ModelParams) -> bool {
        self.delta < 0.1 * (p.n as f64).sqrt() * (p.j2 + p.j4)
    }

    /// collisional regime flag (delta_step * Delta)^2 << 1
    pub fn collisional_ok(&self) -> bool {
        match self.kind {
            EnsembleKind::Collisional { delta_step, .. } => {
                (delta_step * self.delta).powi(2) < 0.1
            }
            _ => true,
        }
    }
}

/// GUE decay functions: phi(t) = (2 tau/t) J1(t/tau) and the squared
/// off-diagonal/diagonal factors f_Y = f_X = phi^2.
pub fn gue_decay(t_over_tau: f64) -> (f64, f64, f64) {
    let x = t_over_tau.abs();
    let phi = if x < 1e-8 {
        1.0 - x * x / 8.0
    } else {
        2.0 * bessel_j1(x) / x
    };
    (phi, phi * phi, phi * phi)
}

/// Draw a G x G GUE matrix with semicircle radius `delta`: independent
/// complex Gaussian entries of variance delta^2/(2G), hermitized as
/// (A + A^dagger)/2 (element variance delta^2/4G, diagonal doubled).
pub fn sample_gue(g: usize, delta: f64, rng: &mut impl Rng) -> CMat {
    // E|V_ij|^2 = Delta^2/4G after hermitization, semicircle radius Delta
    let sigma = delta / (2.0 * (g as f64).sqrt());
    let mut a = CMat::zeros(g, g);
    for i in 0..g {
        for j in 0..g {
            a[(i, j)] = Complex::new(sigma * standard_normal(rng), sigma * standard_normal(rng));
        }
    }
    let h = (a.clone() + a.adjoint()) * Complex::new(0.5, 0.0);
    h
}

/// exp(-i V t) |psi> through the Hermitian eigendecomposition of V.
fn evolve_vector(v: &CMat, psi: &CVec, t: f64) -> CVec {
    let eig = nalgebra::SymmetricEigen::new(v.clone());
    let coeffs = eig.eigenvectors.adjoint() * psi;
    let phased = CVec::from_iterator(
        psi.len(),
        coeffs
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(c, &e)| *c * Complex::new(0.0, -e * t).exp()),
    );
    &eig.eigenvectors * phased
}

/// Result of the Monte-Carlo cat relaxation.
pub struct CatRelaxation {
    /// ensemble-averaged 2G x 2G density matrix (blocks: up then down)
    pub rho: CMat,
    /// Frobenius norm of the up-down (cat) block relative to its t = 0
    /// value, debiased for the O(1/sqrt draws) sampling floor
    pub cat_block_ratio: f64,
    /// trace distance of each diagonal block to q_i x (1/G)
    pub micro_distance_up: f64,
    pub micro_distance_down: f64,
    /// block weights (conserved)
    pub q_up: f64,
    pub q_down: f64,
}

/// Monte-Carlo average of U |Psi><Psi| U^dagger over kernel draws at time t.
/// Per-sample mode is bounded by the dense eigensolve budget (G <= 512).
pub fn relax_cat(
    state: &CatState,
    kernel: &RelaxationKernel,
    t: f64,
    seed: u64,
    n_draws: usize,
) -> Result<CatRelaxation, CwError> {
    let g = state.g();
    if g > 512 {
        return Err(CwError::InvalidParameter("per-sample mode is limited to G <= 512".into()));
    }
    let up0 = CVec::from_iterator(g, state.u_up.iter().map(|c| Complex::new(c.re, c.im)));
    let dn0 = CVec::from_iterator(g, state.u_down.iter().map(|c| Complex::new(c.re, c.im)));
    let mut rho = CMat::zeros(2 * g, 2 * g);
    for draw in 0..n_draws {
        let mut rng = task_rng(seed, draw as u64 + 1);
        let (up_t, dn_t) = match kernel.kind {
            EnsembleKind::Gue => {
                let v_up = sample_gue(g, kernel.delta, &mut rng);
                let v_dn = sample_gue(g, kernel.delta, &mut rng);
                (evolve_vector(&v_up, &up0, t), evolve_vector(&v_dn, &dn0, t))
            }
            EnsembleKind::FactorizedGaussian => {
                let (vec_up, ev_up) = sample_factorized(g, kernel.delta, &mut rng);
                let (vec_dn, ev_dn) = sample_factorized(g, kernel.delta, &mut rng);
                (
                    apply_factorized(&vec_up, &ev_up, &up0, t),
                    apply_factorized(&vec_dn, &ev_dn, &dn0, t),
                )
            }
            EnsembleKind::Collisional { delta_step, n_collisions } => {
                let mut u = up0.clone();
                let mut d = dn0.clone();
                let n_eff = ((t / delta_step).round() as usize).min(n_collisions);
                for _ in 0..n_eff {
                    let v_up = sample_gue(g, kernel.delta, &mut rng);
                    let v_dn = sample_gue(g, kernel.delta, &mut rng);
                    u = evolve_vector(&v_up, &u, delta_step);
                    d = evolve_vector(&v_dn, &d, delta_step);
                }
                (u, d)
            }
        };
        // accumulate |psi><psi| in the 2G space
        for i in 0..g {
            for j in 0..g {
                rho[(i, j)] += up_t[i] * up_t[j].conj();
                rho[(i, g + j)] += up_t[i] * dn_t[j].conj();
                rho[(g + i, j)] += dn_t[i] * up_t[j].conj();
                rho[(g + i, g + j)] += dn_t[i] * dn_t[j].conj();
            }
        }
    }
    rho /= Complex::new(n_draws as f64, 0.0);

    let q_up = state.q_up();
    let q_down = state.q_down();
    // debias: E||mean||_F^2 = ||true||_F^2 + q_up q_down / draws
    let cat_sq: f64 = rho.view((0, g), (g, g)).iter().map(|c| c.norm_sqr()).sum();
    let cat_now = (cat_sq - q_up * q_down / n_draws as f64).max(0.0).sqrt();
    let cat_0 = (q_up * q_down).sqrt();
    let micro = |block: &CMat, q: f64| -> f64 {
        // trace distance to q/G * identity
        let mut d = block.clone();
        for i in 0..g {
            d[(i, i)] -= Complex::new(q / g as f64, 0.0);
        }
        let eig = nalgebra::SymmetricEigen::new(d);
        0.5 * eig.eigenvalues.iter().map(|e| e.abs()).sum::<f64>()
    };
    Ok(CatRelaxation {
        cat_block_ratio: if cat_0 > 0.0 { cat_now / cat_0 } else { 0.0 },
        micro_distance_up: micro(&rho.view((0, 0), (g, g)).into_owned(), q_up),
        micro_distance_down: micro(&rho.view((g, g), (g, g)).into_owned(), q_down),
        q_up,
        q_down,
        rho,
    })
}

/// Exact GUE-ensemble-averaged state at time t (large-G closed form):
/// diagonal blocks phi^2 rho_i(0) + (1 - phi^2) q_i 1/G, cat blocks
/// phi^2 rho_ud(0), with phi = (2 tau_sub/t) J1(t/tau_sub).
pub fn averaged_cat_state(state: &CatState, kernel: &RelaxationKernel, t: f64) -> CMat {
    let g = state.g();
    let (_, f, _) = gue_decay(t * kernel.delta);
    let up = &state.u_up;
    let dn = &state.u_down;
    let mut rho = CMat::zeros(2 * g, 2 * g);
    for i in 0..g {
        for j in 0..g {
            let uu = Complex64::new(0.0, 0.0) + up[i] * up[j].conj();
            let dd = dn[i] * dn[j].conj();
            let ud = up[i] * dn[j].conj();
            rho[(i, j)] = Complex::new(f * uu.re, f * uu.im);
            rho[(g + i, g + j)] = Complex::new(f * dd.re, f * dd.im);
            rho[(i, g + j)] = Complex::new(f * ud.re, f * ud.im);
            rho[(g + j, i)] = Complex::new(f * ud.re, -f * ud.im);
        }
        rho[(i, i)] += Complex::new((1.0 - f) * state.q_up() / g as f64, 0.0);
        rho[(g + i, g + i)] += Complex::new((1.0 - f) * state.q_down() / g as f64, 0.0);
    }
    rho
}

/// Haar-like eigenvectors with independent Gaussian eigenvalues.
fn sample_factorized(g: usize, delta: f64, rng: &mut impl Rng) -> (CMat, Vec<f64>) {
    // complex Ginibre matrix orthonormalized by Gram-Schmidt
    let mut a = CMat::zeros(g, g);
    for i in 0..g {
        for j in 0..g {
            a[(i, j)] = Complex::new(standard_normal(rng), standard_normal(rng));
        }
    }
    let qr = a.qr();
    let q = qr.q();
    let evals: Vec<f64> = (0..g).map(|_| delta * standard_normal(rng)).collect();
    (q, evals)
}

fn apply_factorized(vectors: &CMat, evals: &[f64], psi: &CVec, t: f64) -> CVec {
    let coeffs = vectors.adjoint() * psi;
    let phased = CVec::from_iterator(
        psi.len(),
        coeffs.iter().zip(evals).map(|(c, &e)| *c * Complex::new(0.0, -e * t).exp()),
    );
    vectors * phased
}

/// Coefficients of the factorized-ensemble averaged map
/// rho_bar(t) = a(t) rho + b(t) 1/G, derived from Haar-averaging the
/// eigenvector rotations at fixed spectral factor |S(t)|^2 = |sum e^{itE}|^2:
/// a = (|S|^2 - 1)/(G^2 - 1), b = (G^2 - |S|^2)/(G^2 - 1).
pub fn factorized_map_coefficients(g: usize, s_abs_sq: f64) -> (f64, f64) {
    let g2 = (g * g) as f64;
    ((s_abs_sq - 1.0) / (g2 - 1.0), (g2 - s_abs_sq) / (g2 - 1.0))
}

/// Gaussian-spectrum ensemble average of |S(t)|^2:
/// G + G(G-1) exp(-t^2 Delta^2).
pub fn gaussian_spectrum_s2(g: usize, delta: f64, t: f64) -> f64 {
    let gf = g as f64;
    gf + gf * (gf - 1.0) * (-t * t * delta * delta).exp()
}

/// Report of the factorized-ensemble relaxation on a time grid.
pub struct FactorizedRelaxation {
    pub times: Vec<f64>,
    /// map coefficient a(t) with the Gaussian-spectrum average
    pub a_coeff: Vec<f64>,
    /// Monte-Carlo moments of Haar vectors: c22 = E|z1|^2|z2|^2, c40 = E|z1|^4
    pub c22_mc: f64,
    pub c40_mc: f64,
    pub c22_exact: f64,
}

/// Averaged map coefficients on a time grid plus Monte-Carlo Haar moments.
pub fn factorized_ensemble_relaxation(
    g: usize,
    delta: f64,
    times: &[f64],
    seed: u64,
    n_draws: usize,
) -> Result<FactorizedRelaxation, CwError> {
    if g < 2 {
        return Err(CwError::InvalidParameter("G must be at least 2".into()));
    }
    let a_coeff = times
        .iter()
        .map(|&t| factorized_map_coefficients(g, gaussian_spectrum_s2(g, delta, t)).0)
        .collect();
    // Haar moments by sampling normalized complex Gaussian vectors
    let mut rng = task_rng(seed, 0);
    let mut c22 = 0.0;
    let mut c40 = 0.0;
    for _ in 0..n_draws {
        let z: Vec<Complex64> = (0..g)
            .map(|_| Complex64::new(standard_normal(&mut rng), standard_normal(&mut rng)))
            .collect();
        let n2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
        let x1 = z[0].norm_sqr() / n2;
        let x2 = z[1].norm_sqr() / n2;
        c22 += x1 * x2;
        c40 += x1 * x1;
    }
    Ok(FactorizedRelaxation {
        times: times.to_vec(),
        a_coeff,
        c22_mc: c22 / n_draws as f64,
        c40_mc: c40 / n_draws as f64,
        c22_exact: 1.0 / (g as f64 * (g as f64 + 1.0)),
    })
}

/// Closed-form collisional map after n collisions of duration delta_step:
/// diagonal sectors    rho -> r^n rho + (1 - r^n) 1/G,  r = 1 - (dD)^2/4;
/// cross-sector blocks rho -> r^n rho.
pub fn collisional_map(
    rho: &CMat,
    kernel: &RelaxationKernel,
    n: usize,
    cross_sector: bool,
) -> Result<CMat, CwError> {
    let (delta_step, _) = match kernel.kind {
        EnsembleKind::Collisional { delta_step, n_collisions } => (delta_step, n_collisions),
        _ => {
            return Err(CwError::InvalidParameter("collisional kernel required".into()));
        }
    };
    if !kernel.collisional_ok() {
        return Err(CwError::RegimeViolated(format!(
            "collisional expansion needs (delta Delta)^2 << 1, got {}",
            (delta_step * kernel.delta).powi(2)
        )));
    }
    let g = rho.nrows();
    let r = (1.0 - 0.25 * (delta_step * kernel.delta).powi(2)).powi(n as i32);
    let mut out = rho * Complex::new(r, 0.0);
    if !cross_sector {
        let trace: Complex<f64> = (0..g).map(|i| rho[(i, i)]).sum();
        for i in 0..g {
            out[(i, i)] += trace * Complex::new((1.0 - r) / g as f64, 0.0);
        }
    }
    Ok(out)
}

/// Relaxation time of the collisional map: -delta / ln(1 - (d D)^2/4).
pub fn collisional_relaxation_time(kernel: &RelaxationKernel) -> Result<f64, CwError> {
    match kernel.kind {
        EnsembleKind::Collisional { delta_step, .. } => {
            let x = 0.25 * (delta_step * kernel.delta).powi(2);
            Ok(-delta_step / (1.0 - x).ln())
        }
        _ => Err(CwError::InvalidParameter("collisional kernel required".into())),
    }
}
