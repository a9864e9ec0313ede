//! Cooperative-user analysis under coded cooperation: decode probability at
//! the relay, the conditional rates of the two modes, the relay-to-UE link and
//! the combined mean rate.
//!
//! The BS-to-UE SINR of a cooperative UE is approximated by the BS-to-relay
//! SINR `γ₁`, since the UE lies within `R_r` of its relay.

use std::f64::consts::PI;

use serde::Serialize;

use crate::analytic_sinr::{
    check_threshold, quad_err, BsLink, CdfRoute, FadingLaw, RateResult, RsTier, INNER, OUTER,
};
use crate::cell_load::BusyProbabilities;
use crate::error::{Error, Result};
use crate::model::ValidatedParams;
use crate::quad::{integrate, integrate_to_infinity, QuadOptions};
use crate::special::{gamma, gauss_exp_integral_finite};

/// Tolerances of the `[0, T_th]` integral of the mode-1 rate.
pub const MODE1: QuadOptions = QuadOptions {
    abs_tol: 1e-10,
    rel_tol: 1e-10,
    max_intervals: 200,
};

const T_RATE_CUTOFF: f64 = 700.0;

/// Relay-to-UE downlink. The UE is uniform in the disc of radius `R_r`
/// around its relay; interferers are the active relays of density `λ_r'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsLink {
    pub lambda_active: f64,
    pub p_r: f64,
    pub r_relay: f64,
    pub alpha: f64,
    pub mu: f64,
    pub noise: f64,
    pub fading: FadingLaw,
}

impl RsLink {
    pub fn new(params: &ValidatedParams, busy: &BusyProbabilities) -> Self {
        Self {
            lambda_active: busy.lambda_r_active,
            p_r: params.derived().p_r,
            r_relay: params.r_relay,
            alpha: params.alpha,
            mu: params.mu,
            noise: params.noise,
            fading: FadingLaw::from_params(params),
        }
    }

    pub fn tier(&self) -> RsTier {
        RsTier {
            lambda_active: self.lambda_active,
            p_r: self.p_r,
            alpha: self.alpha,
            fading: self.fading,
        }
    }

    /// `ψ(α) = (2/α)πμ^{2/α}λ_r'Γ(−2/α)E[g^{2/α}]`; never positive.
    pub fn psi(&self) -> f64 {
        psi(self.alpha, self.mu, self.lambda_active, self.fading)
    }

    pub fn supports_special_case(&self) -> bool {
        self.alpha == 4.0 && matches!(self.fading, FadingLaw::Exponential { .. })
    }

    /// `P(γ₂ > T) = (1/R_r²)∫₀^{R_r²} exp(−μv^{α/2}σ²T/P_r + ψT^{2/α}v) dv`.
    pub fn coverage(&self, t: f64) -> Result<f64> {
        check_threshold(t)?;
        if t == 0.0 {
            return Ok(1.0);
        }
        let big_v = self.r_relay * self.r_relay;
        let a = self.mu * self.noise * t / self.p_r;
        let b = -self.psi() * t.powf(2.0 / self.alpha);
        let half = self.alpha / 2.0;
        // v = R_r²·ℓ·w with ℓ the shortest decay length in units of R_r²,
        // cut where the integrand is below e^{-60}
        let (ka, kb) = (a * big_v.powf(half), b * big_v);
        let ell = 1f64.min(ka.powf(-1.0 / half)).min(1.0 / kb);
        let (ka, kb) = (ka * ell.powf(half), kb * ell);
        if ka.is_nan() || ell == 0.0 {
            return Ok(0.0);
        }
        let upper = (1.0 / ell).min(60.0);
        let r = integrate(|w| (-ka * w.powf(half) - kb * w).exp(), 0.0, upper, INNER)
            .map(|mut i| {
                i.value *= ell;
                i
            })
            .map_err(quad_err("relay-link coverage"))?;
        Ok(r.value.clamp(0.0, 1.0))
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        Ok(1.0 - self.coverage(t)?)
    }

    /// Closed form for `α = 4` and exponential fading:
    /// `(1/R_r²)√(πP_r/(μTσ²)) e^{y²/2}(Q(y) − Q(y + R_r²√(2μTσ²/P_r)))`,
    /// `y = π²λ_r'√(P_r/(8μσ²))`.
    pub fn coverage_special(&self, t: f64) -> Result<f64> {
        if !self.supports_special_case() {
            return Err(Error::Unsupported(format!(
                "closed form needs alpha = 4 and exponential interference fading (alpha = {}, fading = {:?})",
                self.alpha, self.fading
            )));
        }
        check_threshold(t)?;
        let big_v = self.r_relay * self.r_relay;
        let a = self.mu * self.noise * t / self.p_r;
        let b = PI * PI * self.lambda_active * t.sqrt() / 2.0;
        Ok((gauss_exp_integral_finite(a, b, big_v) / big_v).clamp(0.0, 1.0))
    }

    pub fn cdf_special(&self, t: f64) -> Result<f64> {
        Ok(1.0 - self.coverage_special(t)?)
    }

    fn check_rate_finite(&self) -> Result<()> {
        if self.noise == 0.0 && self.lambda_active == 0.0 {
            return Err(Error::Divergent(
                "noise-free relay link without interferers has unbounded rate".into(),
            ));
        }
        Ok(())
    }

    fn rate_with(&self, cov: impl Fn(&Self, f64) -> Result<f64>) -> Result<RateResult> {
        self.check_rate_finite()?;
        let mut failure = None;
        let res = integrate_to_infinity(
            |t| {
                if t > T_RATE_CUTOFF {
                    return 0.0;
                }
                match cov(self, t.exp_m1()) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                }
            },
            0.0,
            OUTER,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let res = res.map_err(quad_err("relay-link mean rate"))?;
        Ok(RateResult::from_integral(res, 1.0, OUTER))
    }

    /// `τ₂ = E[ln(1 + γ₂)]`.
    pub fn mean_rate(&self) -> Result<RateResult> {
        self.rate_with(Self::coverage)
    }

    pub fn mean_rate_special(&self) -> Result<RateResult> {
        self.rate_with(Self::coverage_special)
    }
}

/// `ψ(α) = (2/α)πμ^{2/α}λ'Γ(−2/α)E[g^{2/α}]`.
pub fn psi(alpha: f64, mu: f64, lambda_active: f64, fading: FadingLaw) -> f64 {
    let delta = 2.0 / alpha;
    let v = delta * PI * mu.powf(delta) * lambda_active * gamma(-delta) * fading.moment(delta);
    debug_assert!(v <= 0.0, "psi must not be positive, got {v}");
    v
}

/// `Pr(γ₂ ≤ T)`.
pub fn rs_link_cdf(t: f64, params: &ValidatedParams, busy: &BusyProbabilities) -> Result<f64> {
    RsLink::new(params, busy).cdf(t)
}

/// `τ₂`.
pub fn rs_link_rate(params: &ValidatedParams, busy: &BusyProbabilities) -> Result<RateResult> {
    RsLink::new(params, busy).mean_rate()
}

/// `P_d = Pr(γ₁ ≥ T_th)`.
pub fn decode_probability(
    params: &ValidatedParams,
    busy: &BusyProbabilities,
    route: CdfRoute,
) -> Result<f64> {
    let link = BsLink::bs_to_relay(params, busy);
    let t_th = params.derived().t_th;
    match route {
        CdfRoute::General => link.coverage(t_th),
        CdfRoute::ClosedForm => link.coverage_special(t_th),
    }
}

fn bs_coverage(link: &BsLink, route: CdfRoute, t: f64) -> Result<f64> {
    match route {
        CdfRoute::General => link.coverage(t),
        CdfRoute::ClosedForm => link.coverage_special(t),
    }
}

/// `∫₀^{T_th} Pr(γ₁ < t)/(1 + t) dt`.
fn below_threshold_integral(link: &BsLink, route: CdfRoute, t_th: f64) -> Result<f64> {
    if t_th == 0.0 {
        return Ok(0.0);
    }
    let mut failure = None;
    let res = integrate(
        |t| match bs_coverage(link, route, t) {
            Ok(c) => (1.0 - c) / (1.0 + t),
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        t_th,
        MODE1,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(res.map_err(quad_err("mode-1 rate integral"))?.value)
}

/// `τ_m1 = ln(1+T_th) − (1/(1−P_d))∫₀^{T_th} Pr(γ₁<t)/(1+t) dt`, the mean
/// rate given the relay failed to decode. `None` when `P_d = 1`.
pub fn mode1_rate(
    params: &ValidatedParams,
    busy: &BusyProbabilities,
    route: CdfRoute,
) -> Result<Option<f64>> {
    let link = BsLink::bs_to_relay(params, busy);
    let t_th = params.derived().t_th;
    let p_d = bs_coverage(&link, route, t_th)?;
    mode1_given(&link, route, t_th, p_d)
}

fn mode1_given(link: &BsLink, route: CdfRoute, t_th: f64, p_d: f64) -> Result<Option<f64>> {
    if p_d >= 1.0 {
        return Ok(None);
    }
    let integral = below_threshold_integral(link, route, t_th)?;
    let v = t_th.ln_1p() - integral / (1.0 - p_d);
    Ok(Some(v.clamp(0.0, t_th.ln_1p())))
}

/// `τ₀ = (τ₁ − (1−P_d)τ_m1)/P_d`, the BS-to-UE rate given the relay decoded.
/// `None` when `P_d = 0`.
pub fn mode2_bs_rate(
    params: &ValidatedParams,
    busy: &BusyProbabilities,
    route: CdfRoute,
) -> Result<Option<f64>> {
    Ok(coop_rate(params, busy, route)?.tau_0_defined())
}

/// `τ₀` by integrating the conditional CCDF above threshold:
/// `ln(1+T_th) + (1/P_d)∫_{T_th}^∞ Pr(γ₁ > t)/(1 + t) dt`.
pub fn mode2_bs_rate_direct(
    params: &ValidatedParams,
    busy: &BusyProbabilities,
    route: CdfRoute,
) -> Result<Option<f64>> {
    let link = BsLink::bs_to_relay(params, busy);
    let t_th = params.derived().t_th;
    let p_d = bs_coverage(&link, route, t_th)?;
    if p_d <= 0.0 {
        return Ok(None);
    }
    let x0 = t_th.ln_1p();
    // t = e^x − 1 turns dt/(1+t) into dx
    let mut failure = None;
    let res = integrate_to_infinity(
        |x| {
            if x > T_RATE_CUTOFF {
                return 0.0;
            }
            match bs_coverage(&link, route, x.exp_m1()) {
                Ok(c) => c,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        x0,
        OUTER,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let tail = res
        .map_err(quad_err("conditional rate above threshold"))?
        .value;
    Ok(Some(x0 + tail / p_d))
}

/// Which conditional rates are undefined because their conditioning event has
/// probability zero; those rates are reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Degeneracy {
    /// `P_d = 1`: the relay always decodes, `τ_m1` is undefined.
    pub always_decodes: bool,
    /// `P_d = 0`: the relay never decodes, `τ₀` is undefined.
    pub never_decodes: bool,
}

/// Every intermediate of the cooperative rate, in nats per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoopRateBreakdown {
    pub t_th: f64,
    pub beta: f64,
    pub p_decode: f64,
    pub tau_1: f64,
    pub tau_0: f64,
    pub tau_2: f64,
    pub tau_m1: f64,
    pub tau_m2: f64,
    pub tau_c: f64,
    pub degeneracy: Degeneracy,
    /// Sum of the outer-quadrature error estimates of `τ₁` and `τ₂`.
    pub abs_error: f64,
}

impl CoopRateBreakdown {
    pub fn tau_0_defined(&self) -> Option<f64> {
        (!self.degeneracy.never_decodes).then_some(self.tau_0)
    }

    pub fn tau_m1_defined(&self) -> Option<f64> {
        (!self.degeneracy.always_decodes).then_some(self.tau_m1)
    }
}

/// `τ_c = (1−P_d)τ_m1 + P_d(βτ₀ + (1−β)τ₂)` with all intermediates.
pub fn coop_rate(
    params: &ValidatedParams,
    busy: &BusyProbabilities,
    route: CdfRoute,
) -> Result<CoopRateBreakdown> {
    let link = BsLink::bs_to_relay(params, busy);
    let rs = RsLink::new(params, busy);
    let t_th = params.derived().t_th;
    let beta = params.beta;
    let p_d = bs_coverage(&link, route, t_th)?;
    let (r1, r2) = match route {
        CdfRoute::General => (link.mean_rate()?, rs.mean_rate()?),
        CdfRoute::ClosedForm => (link.mean_rate_special()?, rs.mean_rate_special()?),
    };
    let tau_1 = r1.value;
    let tau_2 = r2.value;
    let m1 = mode1_given(&link, route, t_th, p_d)?;
    let degeneracy = Degeneracy {
        always_decodes: m1.is_none(),
        never_decodes: p_d <= 0.0,
    };
    let tau_m1 = m1.unwrap_or(0.0);
    let tau_0 = if degeneracy.never_decodes {
        0.0
    } else {
        (tau_1 - (1.0 - p_d) * tau_m1) / p_d
    };
    let tau_m2 = beta * tau_0 + (1.0 - beta) * tau_2;
    let tau_c = (1.0 - p_d) * tau_m1 + p_d * tau_m2;
    Ok(CoopRateBreakdown {
        t_th,
        beta,
        p_decode: p_d,
        tau_1,
        tau_0,
        tau_2,
        tau_m1,
        tau_m2,
        tau_c,
        degeneracy,
        abs_error: r1.abs_error + r2.abs_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic_sinr::laplace_rs_tier;
    use crate::cell_load::busy_probabilities;
    use crate::model::{validate, NetworkParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn setup(p: NetworkParams) -> (ValidatedParams, BusyProbabilities) {
        let v = validate(p).unwrap();
        let b = busy_probabilities(&v).unwrap();
        (v, b)
    }

    fn reference() -> (ValidatedParams, BusyProbabilities) {
        setup(NetworkParams::reference())
    }

    #[test]
    fn psi_sign_and_special_value() {
        let f = FadingLaw::Exponential { mu: 1.0 };
        assert_eq!(psi(4.0, 1.0, 0.0, f), 0.0);
        assert!(psi(3.0, 1.0, 1e-4, f) < 0.0);
        assert_relative_eq!(
            psi(4.0, 1.0, 2e-5, f),
            -PI * PI * 2e-5 / 2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn rs_coverage_matches_literal_distance_integral() {
        let (v, b) = reference();
        let mut rs = RsLink::new(&v, &b);
        rs.alpha = 3.4;
        let tier = rs.tier();
        for t in [0.3, 4.0, 60.0] {
            let literal = integrate(
                |r| {
                    let s = rs.mu * t * r.powf(rs.alpha) / rs.p_r;
                    (-s * rs.noise).exp() * laplace_rs_tier(s, &tier).unwrap() * 2.0 * r
                        / (rs.r_relay * rs.r_relay)
                },
                0.0,
                rs.r_relay,
                QuadOptions::new(1e-12, 1e-12),
            )
            .unwrap()
            .value;
            assert_relative_eq!(rs.coverage(t).unwrap(), literal, max_relative = 1e-9);
        }
    }

    #[test]
    fn rs_routes_agree() {
        let (v, b) = reference();
        let rs = RsLink::new(&v, &b);
        for t in [1e-3, 0.5, 5.0, 1e3, 1e6] {
            let g = rs.cdf(t).unwrap();
            let s = rs.cdf_special(t).unwrap();
            assert!((g - s).abs() < 1e-9, "T={t}: {g} vs {s}");
        }
        let g = rs.mean_rate().unwrap();
        let s = rs.mean_rate_special().unwrap();
        assert_relative_eq!(g.value, s.value, max_relative = 1e-6);
        assert!(g.abs_error <= g.tolerance);
    }

    #[test]
    fn rs_without_interference_or_noise() {
        let (v, b) = reference();
        let mut rs = RsLink::new(&v, &b);
        rs.lambda_active = 0.0;
        rs.noise = 1e-30;
        for t in [0.1, 10.0, 1e4] {
            assert!(rs.cdf(t).unwrap() < 1e-6);
        }
        rs.noise = 0.0;
        assert!(matches!(rs.mean_rate(), Err(Error::Divergent(_))));
    }

    #[test]
    fn decode_probability_routes_agree() {
        let (v, b) = reference();
        let g = decode_probability(&v, &b, CdfRoute::General).unwrap();
        let s = decode_probability(&v, &b, CdfRoute::ClosedForm).unwrap();
        assert!((g - s).abs() < 1e-8);
        assert!(g > 0.0 && g < 1.0);
    }

    #[test]
    fn decode_probability_tends_to_one_at_zero_target() {
        let mut p = NetworkParams::reference();
        p.r_th = 1e-9;
        let (v, b) = setup(p);
        assert!(decode_probability(&v, &b, CdfRoute::General).unwrap() > 1.0 - 1e-6);
        let m1 = mode1_rate(&v, &b, CdfRoute::General).unwrap().unwrap();
        assert!(m1 < 1e-8);
    }

    #[test]
    fn decode_probability_monotone_in_target_and_noise() {
        let mut prev = 1.0;
        for r_th in [0.1, 0.5, 1.0, 2.0, 4.0] {
            let mut p = NetworkParams::reference();
            p.r_th = r_th;
            let (v, b) = setup(p);
            let d = decode_probability(&v, &b, CdfRoute::General).unwrap();
            assert!(d <= prev);
            prev = d;
        }
        let mut prev = 1.0;
        for noise in [1e-14, 1e-11, 1e-9, 1e-7] {
            let mut p = NetworkParams::reference();
            p.noise = noise;
            let (v, b) = setup(p);
            let d = decode_probability(&v, &b, CdfRoute::General).unwrap();
            assert!(d <= prev);
            prev = d;
        }
    }

    #[test]
    fn breakdown_invariants_reference() {
        let (v, b) = reference();
        let c = coop_rate(&v, &b, CdfRoute::General).unwrap();
        assert!((0.0..=1.0).contains(&c.p_decode));
        let recomposed = c.p_decode * c.tau_0 + (1.0 - c.p_decode) * c.tau_m1;
        assert!((recomposed - c.tau_1).abs() < 1e-8);
        assert!(c.tau_m1 < c.t_th.ln_1p());
        assert!(c.tau_0 >= c.tau_m1);
        let (lo, hi) = (c.tau_m1.min(c.tau_m2), c.tau_m1.max(c.tau_m2));
        assert!(lo <= c.tau_c && c.tau_c <= hi);
        assert_eq!(c.degeneracy, Degeneracy::default());

        let s = coop_rate(&v, &b, CdfRoute::ClosedForm).unwrap();
        assert_relative_eq!(c.tau_c, s.tau_c, max_relative = 1e-6);
    }

    #[test]
    fn tau0_identity_matches_direct_conditional_integral() {
        let (v, b) = reference();
        let via_identity = mode2_bs_rate(&v, &b, CdfRoute::General).unwrap().unwrap();
        let direct = mode2_bs_rate_direct(&v, &b, CdfRoute::General)
            .unwrap()
            .unwrap();
        assert_relative_eq!(via_identity, direct, max_relative = 1e-6);
    }

    #[test]
    fn mode1_matches_conditional_expectation_by_parts() {
        // E[ln(1+γ) | γ < T] = ∫₀^T ln(1+t) dF(t)/F(T), differentiated numerically
        let (v, b) = reference();
        let link = BsLink::bs_to_relay(&v, &b);
        let t_th = v.derived().t_th;
        let f_th = link.cdf(t_th).unwrap();
        let h = 1e-6;
        let by_density = integrate(
            |t| {
                let lo = (t - h).max(0.0);
                let dens = (link.cdf(t + h).unwrap() - link.cdf(lo).unwrap()) / (t + h - lo);
                t.ln_1p() * dens
            },
            0.0,
            t_th,
            QuadOptions::new(1e-10, 1e-8),
        )
        .unwrap()
        .value
            / f_th;
        let m1 = mode1_rate(&v, &b, CdfRoute::General).unwrap().unwrap();
        assert_relative_eq!(m1, by_density, max_relative = 1e-5);
    }

    #[test]
    fn beta_edge_cases() {
        let mut p = NetworkParams::reference();
        p.beta = 1.0;
        let (v, b) = setup(p);
        let c = coop_rate(&v, &b, CdfRoute::ClosedForm).unwrap();
        assert_eq!(c.tau_m2, c.tau_0);
    }

    #[test]
    fn always_decoding_is_flagged() {
        let mut p = NetworkParams::reference();
        p.r_th = 0.0;
        let (v, b) = setup(p);
        let c = coop_rate(&v, &b, CdfRoute::ClosedForm).unwrap();
        assert!(c.degeneracy.always_decodes);
        assert_eq!(c.p_decode, 1.0);
        assert_eq!(c.tau_m1, 0.0);
        assert_eq!(c.tau_c, c.tau_m2);
        assert_eq!(c.tau_0, c.tau_1);
        assert!(mode1_rate(&v, &b, CdfRoute::ClosedForm).unwrap().is_none());
    }

    #[test]
    fn tau_c_continuous_in_beta() {
        let mut prev: Option<f64> = None;
        for k in 0..=20 {
            let mut p = NetworkParams::reference();
            p.beta = (k as f64 / 20.0).max(0.02);
            let (v, b) = setup(p);
            let c = coop_rate(&v, &b, CdfRoute::ClosedForm).unwrap().tau_c;
            if let Some(q) = prev {
                assert!((c - q).abs() < 0.5, "jump at beta={}", v.beta);
            }
            prev = Some(c);
        }
    }

    #[test]
    fn conditional_cdfs_are_valid() {
        let (v, b) = reference();
        let link = BsLink::bs_to_relay(&v, &b);
        let t_th = v.derived().t_th;
        let f_th = link.cdf(t_th).unwrap();
        let below = |t: f64| {
            if t >= t_th {
                1.0
            } else {
                link.cdf(t).unwrap() / f_th
            }
        };
        let above = |t: f64| {
            if t < t_th {
                0.0
            } else {
                (link.cdf(t).unwrap() - f_th) / (1.0 - f_th)
            }
        };
        assert!(below(0.0).abs() < 1e-12);
        assert_eq!(below(t_th), 1.0);
        assert_eq!(above(0.5 * t_th), 0.0);
        assert!(above(t_th).abs() < 1e-12);
        assert!(above(1e12) > 1.0 - 1e-4);
        let mut pb = 0.0;
        let mut pa = 0.0;
        for k in 0..100 {
            let t = 10f64.powf(-3.0 + 9.0 * k as f64 / 99.0);
            let (x, y) = (below(t), above(t));
            assert!(x + 1e-12 >= pb && y + 1e-12 >= pa);
            pb = x;
            pa = y;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn decomposition_holds(beta in 0.2f64..1.0, r_th in 0.1f64..3.0, noise_db in -110.0f64..-60.0) {
            let mut p = NetworkParams::reference();
            p.beta = beta;
            p.r_th = r_th;
            p.noise = crate::model::dbm_to_watts(noise_db);
            let (v, b) = setup(p);
            let c = coop_rate(&v, &b, CdfRoute::ClosedForm).unwrap();
            let recomposed = c.p_decode * c.tau_0 + (1.0 - c.p_decode) * c.tau_m1;
            prop_assert!((recomposed - c.tau_1).abs() < 1e-8);
            prop_assert!(c.tau_m1 <= c.t_th.ln_1p());
            prop_assert!(c.tau_0 + 1e-9 >= c.tau_m1);
            prop_assert!(c.tau_m1.min(c.tau_m2) <= c.tau_c + 1e-12);
            prop_assert!(c.tau_c <= c.tau_m1.max(c.tau_m2) + 1e-12);
        }
    }
}
