//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Finite intervals are bisected where the local error estimate is largest.
//! Semi-infinite ranges are mapped onto `(0, 1]` with `x = a + (1 − u)/u`.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
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

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Stopping rule and work limit for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl QuadOptions {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            max_intervals: 500,
        }
    }
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self::new(1e-10, 1e-10)
    }
}

/// A converged integral and its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("quadrature failed to converge after {intervals} intervals: {value:e} ± {abs_error:e}{}",
    if *.non_finite { " (non-finite integrand)" } else { "" })]
pub struct QuadError {
    pub value: f64,
    pub abs_error: f64,
    pub intervals: usize,
    pub non_finite: bool,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
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
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64, bool) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_g = fc * WG[3];
    let mut res_k = fc * WGK[7];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    let mut finite = fc.is_finite();
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        finite &= f1.is_finite() && f2.is_finite();
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err, finite)
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    opts: QuadOptions,
) -> Result<Integral, QuadError> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            abs_error: 0.0,
            evaluations: 0,
        });
    }
    let (value, error, finite) = gk15(&mut f, a, b);
    let mut evaluations = 15;
    if !finite {
        return Err(QuadError {
            value,
            abs_error: error,
            intervals: 1,
            non_finite: true,
        });
    }
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;

    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= tol {
            // re-sum to shed accumulated rounding from incremental updates
            let (v, e) = heap
                .iter()
                .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
            return Ok(Integral {
                value: v,
                abs_error: e,
                evaluations,
            });
        }
        if heap.len() >= opts.max_intervals {
            break;
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if (worst.b - worst.a).abs() <= 1e3 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE) {
            heap.push(worst);
            break;
        }
        let (v1, e1, ok1) = gk15(&mut f, worst.a, mid);
        let (v2, e2, ok2) = gk15(&mut f, mid, worst.b);
        evaluations += 30;
        if !(ok1 && ok2) {
            return Err(QuadError {
                value: total,
                abs_error: total_err,
                intervals: heap.len() + 1,
                non_finite: true,
            });
        }
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    Err(QuadError {
        value: total,
        abs_error: total_err,
        intervals: heap.len(),
        non_finite: false,
    })
}

/// Integrates `f` over `[a, ∞)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    opts: QuadOptions,
) -> Result<Integral, QuadError> {
    integrate(
        |u| {
            let x = a + (1.0 - u) / u;
            let v = f(x);
            // the integrand must vanish at infinity, so 0·∞ is treated as 0
            if v == 0.0 {
                0.0
            } else {
                v / (u * u)
            }
        },
        0.0,
        1.0,
        opts,
    )
}
