//! Globally adaptive Gauss-Kronrod quadrature (G7/K15 pair).
//!
//! A binary heap keeps the segment with the largest error estimate on top;
//! that segment is bisected until the requested tolerance or the evaluation
//! budget is reached. Oscillatory integrands are handled by seeding the
//! driver with panel boundaries tied to the oscillation period.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::CwError;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    pub evals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

fn qk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut res_gauss = WG[3] * fc;
    let mut res_kron = WGK[7] * fc;
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = h * x;
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        res_kron += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            res_gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = res_kron * h;
    let err = ((res_kron - res_gauss) * h).abs();
    (value, err)
}

/// Integrate `f` over `[a, b]`, optionally splitting first at interior
/// `breakpoints` (out-of-range entries are ignored).
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    rtol: f64,
    atol: f64,
    max_segments: usize,
) -> Result<QuadResult, CwError> {
    let mut pts: Vec<f64> = vec![a, b];
    pts.extend(breakpoints.iter().cloned().filter(|&p| p > a && p < b));
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();

    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut err = 0.0;
    let mut evals = 0usize;
    for w in pts.windows(2) {
        let (v, e) = qk15(&f, w[0], w[1]);
        evals += 15;
        value += v;
        err += e;
        heap.push(Segment { a: w[0], b: w[1], value: v, err: e });
    }

    while err > atol.max(rtol * value.abs()) {
        if heap.len() >= max_segments {
            return Err(CwError::Quadrature {
                target: atol.max(rtol * value.abs()),
                reached: err,
                segments: heap.len(),
            });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision
            heap.push(worst);
            break;
        }
        let (v1, e1) = qk15(&f, worst.a, mid);
        let (v2, e2) = qk15(&f, mid, worst.b);
        evals += 30;
        value += v1 + v2 - worst.value;
        err += e1 + e2 - worst.err;
        heap.push(Segment { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, err: e2 });
    }
    Ok(QuadResult { value, abs_err: err, evals })
}

/// Convenience wrapper with no seeded breakpoints.
pub fn integrate_simple<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rtol: f64,
) -> Result<QuadResult, CwError> {
    integrate(f, a, b, &[], rtol, 0.0, 4000)
}

/// Breakpoints for an integrand oscillating with angular frequency `omega`
/// over `[a, b]`: panels of about half a period, capped in number.
pub fn oscillation_breakpoints(a: f64, b: f64, omega: f64, cap: usize) -> Vec<f64> {
    let mut pts = Vec::new();
    if omega <= 0.0 {
        return pts;
    }
    let half_period = std::f64::consts::PI / omega;
    let n = ((b - a) / half_period).ceil() as usize;
    let n = n.min(cap);
    if n < 2 {
        return pts;
    }
    let h = (b - a) / n as f64;
    for k in 1..n {
        pts.push(a + h * k as f64);
    }
    pts
}
