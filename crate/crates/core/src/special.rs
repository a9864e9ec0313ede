//! Special functions used by the interference expressions.
//!
//! Gamma functions with a positive parameter come from `statrs`. The upper
//! incomplete gamma function with a negative, non-integer parameter is built on
//! top of them with the recurrence `Γ(s+1, x) = s·Γ(s, x) + x^s e^{-x}`.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::gamma as sgamma;

pub fn gamma(x: f64) -> f64 {
    sgamma::gamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    sgamma::ln_gamma(x)
}

/// Lower incomplete gamma `γ(a, x)` for `a > 0`, `x >= 0`.
pub fn lower_gamma(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return gamma(a);
    }
    sgamma::gamma_lr(a, x) * gamma(a)
}

/// Upper incomplete gamma `Γ(s, x)` for real `s` that is not a non-positive
/// integer, and `x > 0` (or `x = 0` when `s > 0`).
///
/// Negative parameters are lifted to `s + k > 0` and brought back down with
/// `Γ(s, x) = (Γ(s+1, x) − x^s e^{-x}) / s`.
pub fn upper_gamma(s: f64, x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    if s > 0.0 {
        if x <= 0.0 {
            return gamma(s);
        }
        return sgamma::gamma_ur(s, x) * gamma(s);
    }
    assert!(
        s.fract() != 0.0,
        "upper_gamma: non-positive integer parameter {s}"
    );
    if x <= 0.0 {
        return f64::INFINITY;
    }
    (upper_gamma(s + 1.0, x) - x.powf(s) * (-x).exp()) / s
}

/// Upper incomplete gamma by Legendre's continued fraction (modified Lentz).
///
/// Valid for any real `s` and `x > 0`; converges quickly once `x` exceeds
/// about one. Kept as an independent route for cross-checks.
pub fn upper_gamma_cf(s: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / if b.abs() < TINY { TINY } else { b };
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (s * x.ln() - x).exp() * h
}

/// Scaled complementary error function `e^{x²} erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 2.0 {
        return (x * x).exp() * libm::erfc(x);
    }
    // Continued fraction e^{x²} erfc(x) = (1/√π) · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..500 {
        let a = n as f64 / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / (f * PI.sqrt())
}

/// Gaussian tail `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// `e^{x²/2} Q(x)`, finite for all `x >= 0`.
pub fn scaled_q(x: f64) -> f64 {
    0.5 * erfcx(x / SQRT_2)
}

/// `∫₀^∞ exp(−a v² − b v) dv` for `a >= 0`, `b >= 0`, not both zero.
///
/// Equals `√(π/a) · e^{b²/4a} · Q(b/√(2a))`, evaluated through [`scaled_q`].
pub fn gauss_exp_integral(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        return 1.0 / b;
    }
    (PI / a).sqrt() * scaled_q(b / (2.0 * a).sqrt())
}

/// `∫₀^L exp(−a v² − b v) dv` for `a >= 0`, `b >= 0`, `L >= 0`.
pub fn gauss_exp_integral_finite(a: f64, b: f64, len: f64) -> f64 {
    if a == 0.0 {
        if b == 0.0 {
            return len;
        }
        return -(-b * len).exp_m1() / b;
    }
    let y = b / (2.0 * a).sqrt();
    let z = len * (2.0 * a).sqrt();
    // e^{y²/2}Q(y+z) = e^{(y+z)²/2}Q(y+z) · e^{−z(y + z/2)}
    let upper = scaled_q(y + z) * (-z * (y + 0.5 * z)).exp();
    (PI / a).sqrt() * (scaled_q(y) - upper)
}
