//! Downlink SINR distribution and mean rate of a BS-served link.
//!
//! The serving BS is the nearest point of a PPP of density `λ_b`; co-channel
//! interferers form the independently thinned process of density
//! `λ_b' = λ_b·P_busy` outside the serving distance. Two evaluation routes are
//! provided: a general one for any `α > 2` and interference fading law, and
//! the closed form for `α = 4` with exponential interference fading.

use std::f64::consts::PI;

use serde::Serialize;

use crate::cell_load::BusyProbabilities;
use crate::error::{Error, Result};
use crate::model::{InterfererFading, ValidatedParams};
use crate::quad::{integrate_to_infinity, Integral, QuadError, QuadOptions};
use crate::special::{gamma, gauss_exp_integral, lower_gamma, upper_gamma};

/// Tolerances of the innermost one-dimensional integrals (fading expectations,
/// distance integrals). Integrands are normalised to order one first.
pub(crate) const INNER: QuadOptions = QuadOptions {
    abs_tol: 1e-12,
    rel_tol: 1e-11,
    max_intervals: 400,
};

/// Tolerances of the outer rate integrals over `t = ln(1 + γ)`.
pub const OUTER: QuadOptions = QuadOptions {
    abs_tol: 1e-10,
    rel_tol: 1e-10,
    max_intervals: 400,
};

/// Beyond this `t` the rate integrands are below `e^{-t·2/α}` times an O(1)
/// constant and `e^t − 1` stops being representable.
const T_RATE_CUTOFF: f64 = 700.0;

pub(crate) fn quad_err(context: impl Into<String>) -> impl FnOnce(QuadError) -> Error {
    let context = context.into();
    move |e| Error::NotConverged {
        context,
        value: e.value,
        abs_error: e.abs_error,
    }
}

/// Which link a distribution or rate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkTag {
    /// BS to non-cooperative UE.
    BsNoncoop,
    /// BS to relay (and, under the approximation, BS to cooperative UE).
    BsCoop,
    /// Relay to cooperative UE.
    Rs,
}

/// Law of the power fading `g` on interference links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FadingLaw {
    /// `g ~ exp(mu)`, i.e. `P(g > x) = e^{−mu·x}`.
    Exponential { mu: f64 },
    /// `g = 1`.
    Unit,
}

impl FadingLaw {
    pub fn from_params(params: &ValidatedParams) -> Self {
        match params.interferer_fading {
            InterfererFading::Exponential => Self::Exponential { mu: params.mu },
            InterfererFading::UnitDeterministic => Self::Unit,
        }
    }

    /// `E[g^p]` for `p > −1`.
    pub fn moment(&self, p: f64) -> f64 {
        match *self {
            Self::Exponential { mu } => gamma(1.0 + p) / mu.powf(p),
            Self::Unit => 1.0,
        }
    }

    /// `E[h(g)]`.
    pub fn expect(&self, mut h: impl FnMut(f64) -> f64) -> Result<Integral, QuadError> {
        match *self {
            Self::Exponential { mu } => {
                integrate_to_infinity(|y| h(y / mu) * (-y).exp(), 0.0, INNER)
            }
            Self::Unit => Ok(Integral {
                value: h(1.0),
                abs_error: 0.0,
                evaluations: 1,
            }),
        }
    }

    fn is_exponential(&self) -> bool {
        matches!(self, Self::Exponential { .. })
    }
}

/// Interferer field of the BS tier as seen by one receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsTier {
    /// Density of active co-channel BSs, `λ_b'`.
    pub lambda_active: f64,
    /// Per-subchannel transmit power, watts.
    pub p_b: f64,
    pub alpha: f64,
    pub fading: FadingLaw,
}

/// Interferer field of the RS tier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsTier {
    /// Density of active co-channel RSs, `λ_r'`.
    pub lambda_active: f64,
    pub p_r: f64,
    pub alpha: f64,
    pub fading: FadingLaw,
}

/// Laplace transform `E[e^{−s·I}]` of the BS-tier interference when all
/// interferers lie farther than `r`:
///
/// `exp(−2πλ_b'·A)`, `A = −r²/2 + ((sP_b)^{2/α}/α)·E_g[g^{2/α}(Γ(−2/α, sP_b g r^{−α}) − Γ(−2/α))]`.
pub fn laplace_bs_tier(s: f64, r: f64, tier: &BsTier) -> Result<f64> {
    if !(s >= 0.0 && r >= 0.0 && tier.alpha > 2.0) {
        return Err(Error::InvalidArgument(format!(
            "laplace_bs_tier needs s >= 0, r >= 0, alpha > 2 (s={s}, r={r}, alpha={})",
            tier.alpha
        )));
    }
    if s == 0.0 || tier.lambda_active == 0.0 {
        return Ok(1.0);
    }
    let delta = 2.0 / tier.alpha;
    let sp = s * tier.p_b;
    let scale = sp * r.powf(-tier.alpha);
    let gamma_neg = gamma(-delta);
    let e = tier
        .fading
        .expect(|g| {
            let x = scale * g;
            if x == 0.0 {
                return 0.0;
            }
            g.powf(delta) * (upper_gamma(-delta, x) - gamma_neg)
        })
        .map_err(quad_err("fading expectation in BS-tier Laplace transform"))?;
    let area = -0.5 * r * r + sp.powf(delta) / tier.alpha * e.value;
    Ok((-2.0 * PI * tier.lambda_active * area.max(0.0)).exp())
}

/// Laplace transform of the RS-tier interference (no exclusion zone):
/// `exp(−πλ_r'(sP_r)^{2/α} Γ(1 − 2/α) E[g^{2/α}])`.
pub fn laplace_rs_tier(s: f64, tier: &RsTier) -> Result<f64> {
    if !(s >= 0.0 && tier.alpha > 2.0) {
        return Err(Error::InvalidArgument(format!(
            "laplace_rs_tier needs s >= 0 and alpha > 2 (s={s}, alpha={})",
            tier.alpha
        )));
    }
    if s == 0.0 || tier.lambda_active == 0.0 {
        return Ok(1.0);
    }
    let delta = 2.0 / tier.alpha;
    Ok((-PI
        * tier.lambda_active
        * (s * tier.p_r).powf(delta)
        * gamma(1.0 - delta)
        * tier.fading.moment(delta))
    .exp())
}

/// `φ(T, α) = (2/α)(μT)^{2/α} E_g[g^{2/α}(Γ(−2/α, μTg) − Γ(−2/α))]`.
///
/// One step of the incomplete-gamma recurrence turns the bracket into
/// `(x^{−δ}e^{−x} + γ(1−δ, x))/δ` with `δ = 2/α`, so the value is computed as
/// `E_g[e^{−x} + x^δ γ(1−δ, x)]`, `x = μTg`. In that form `φ(0) = 1` and
/// `φ` is increasing.
pub fn phi(t: f64, alpha: f64, mu: f64, fading: FadingLaw) -> Result<f64> {
    if !(t >= 0.0 && alpha > 2.0) {
        return Err(Error::InvalidArgument(format!(
            "phi needs T >= 0 and alpha > 2 (T={t}, alpha={alpha})"
        )));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let delta = 2.0 / alpha;
    let e = fading
        .expect(|g| {
            let x = mu * t * g;
            (-x).exp() + x.powf(delta) * lower_gamma(1.0 - delta, x)
        })
        .map_err(quad_err("fading expectation in phi"))?;
    Ok(e.value)
}

/// `κ(T) = πλ_b(1 + P_busy·√T(π/2 − arctan(1/√T)))`, the `α = 4`,
/// exponential-fading exponent of the serving-distance integral.
pub fn kappa(t: f64, lambda_b: f64, p_busy: f64) -> f64 {
    let sq = t.sqrt();
    // π/2 − arctan(1/x) = arctan(x) for x > 0
    PI * lambda_b * (1.0 + p_busy * sq * sq.atan())
}

/// `∫₀^∞ exp(−a v^{α/2} − b v) dv` by quadrature, `a >= 0`, `b > 0`.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub(crate) fn distance_integral(a: f64, b: f64, alpha: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::Unsupported(format!(
            "serving-distance exponent is not decaying (b = {b:e})"
        )));
    }
    if a == 0.0 {
        return Ok(1.0 / b);
    }
    if a.is_infinite() {
        return Ok(0.0);
    }
    let half = alpha / 2.0;
    // v = ℓ·w with ℓ the shorter of the two decay lengths
    let ell = (1.0 / b).min(a.powf(-1.0 / half));
    let (ka, kb) = (a * ell.powf(half), b * ell);
    let r = integrate_to_infinity(|w| (-ka * w.powf(half) - kb * w).exp(), 0.0, INNER)
        .map_err(quad_err("serving-distance integral"))?;
    Ok(r.value * ell)
}

/// Mean achievable rate with its quadrature diagnostics, in nats per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
    /// Absolute tolerance the outer integral was asked to meet.
    pub tolerance: f64,
}

impl RateResult {
    pub fn bits(&self) -> f64 {
        self.value / std::f64::consts::LN_2
    }

    pub(crate) fn from_integral(i: Integral, scale: f64, opts: QuadOptions) -> Self {
        let value = i.value * scale;
        Self {
            value,
            abs_error: i.abs_error * scale,
            evaluations: i.evaluations,
            tolerance: opts.abs_tol.max(opts.rel_tol * value.abs()),
        }
    }
}

/// A BS-served downlink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsLink {
    pub tag: LinkTag,
    pub lambda_b: f64,
    /// Busy probability of the subchannel partition the link uses.
    pub p_busy: f64,
    pub p_b: f64,
    pub alpha: f64,
    pub mu: f64,
    pub noise: f64,
    pub fading: FadingLaw,
}

impl BsLink {
    /// BS to non-cooperative UE on the `M_b1` partition.
    pub fn noncoop(params: &ValidatedParams, busy: &BusyProbabilities) -> Self {
        Self::with_busy(params, busy.p_b1, LinkTag::BsNoncoop)
    }

    /// BS to relay on the `M_b2` partition.
    pub fn bs_to_relay(params: &ValidatedParams, busy: &BusyProbabilities) -> Self {
        Self::with_busy(params, busy.p_b2, LinkTag::BsCoop)
    }

    fn with_busy(params: &ValidatedParams, p_busy: f64, tag: LinkTag) -> Self {
        Self {
            tag,
            lambda_b: params.lambda_b,
            p_busy,
            p_b: params.derived().p_b,
            alpha: params.alpha,
            mu: params.mu,
            noise: params.noise,
            fading: FadingLaw::from_params(params),
        }
    }

    pub fn lambda_active(&self) -> f64 {
        self.lambda_b * self.p_busy
    }

    pub fn tier(&self) -> BsTier {
        BsTier {
            lambda_active: self.lambda_active(),
            p_b: self.p_b,
            alpha: self.alpha,
            fading: self.fading,
        }
    }

    pub fn supports_special_case(&self) -> bool {
        self.alpha == 4.0 && self.fading.is_exponential()
    }

    fn require_special(&self) -> Result<()> {
        if self.supports_special_case() {
            Ok(())
        } else {
            Err(Error::Unsupported(format!(
                "closed form needs alpha = 4 and exponential interference fading (alpha = {}, fading = {:?})",
                self.alpha, self.fading
            )))
        }
    }

    /// `P(γ > T)` by integrating the Laplace transform over the serving
    /// distance `r ~ 2πλ_b r e^{−λ_bπr²}`.
    pub fn coverage_via_laplace(&self, t: f64) -> Result<f64> {
        check_threshold(t)?;
        if t == 0.0 {
            return Ok(1.0);
        }
        let tier = self.tier();
        let r0 = 1.0 / (PI * self.lambda_b).sqrt();
        let mut failure = None;
        let res = integrate_to_infinity(
            |x| {
                let r = x * r0;
                let s = self.mu * t * r.powf(self.alpha) / self.p_b;
                let noise_term = (-s * self.noise).exp();
                if noise_term == 0.0 {
                    return 0.0;
                }
                let density = 2.0 * x * (-x * x).exp();
                if density == 0.0 {
                    return 0.0;
                }
                match laplace_bs_tier(s, r, &tier) {
                    Ok(l) => noise_term * l * density,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                }
            },
            0.0,
            INNER,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let res = res.map_err(quad_err("coverage over serving distance"))?;
        Ok(res.value.clamp(0.0, 1.0))
    }

    /// `P(γ ≥ T) = πλ_b ∫ exp(−μv^{α/2}σ²T/P_b + πλ_b'v(1 − φ(T)) − πλ_b v) dv`.
    ///
    /// The `−1/P_busy` term of the textbook form is regrouped with `λ_b'` into
    /// `−πλ_b v`, so an idle partition needs no special casing.
    pub fn coverage(&self, t: f64) -> Result<f64> {
        check_threshold(t)?;
        let phi_t = phi(t, self.alpha, self.mu, self.fading)?;
        self.coverage_given_phi(t, phi_t)
    }

    fn coverage_given_phi(&self, t: f64, phi_t: f64) -> Result<f64> {
        let a = self.mu * self.noise * t / self.p_b;
        let b = PI * (self.lambda_b + self.lambda_active() * (phi_t - 1.0));
        let v = distance_integral(a, b, self.alpha)?;
        Ok((PI * self.lambda_b * v).clamp(0.0, 1.0))
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        Ok(1.0 - self.coverage(t)?)
    }

    /// Closed-form coverage for `α = 4` and exponential interference fading,
    /// `πλ_b √(πP_b/(μTσ²)) e^{κ²P_b/(4μTσ²)} Q(κ√(P_b/(2μTσ²)))`.
    pub fn coverage_special(&self, t: f64) -> Result<f64> {
        self.require_special()?;
        check_threshold(t)?;
        let a = self.mu * self.noise * t / self.p_b;
        let k = kappa(t, self.lambda_b, self.p_busy);
        Ok((PI * self.lambda_b * gauss_exp_integral(a, k)).clamp(0.0, 1.0))
    }

    pub fn cdf_special(&self, t: f64) -> Result<f64> {
        Ok(1.0 - self.coverage_special(t)?)
    }

    fn check_rate_finite(&self) -> Result<()> {
        if self.noise == 0.0 && self.lambda_active() == 0.0 {
            return Err(Error::Divergent(
                "noise-free link without interferers has unbounded rate".into(),
            ));
        }
        Ok(())
    }

    /// `E[ln(1 + γ)] = ∫₀^∞ P(γ > e^t − 1) dt`, each coverage term by the
    /// `φ` route.
    pub fn mean_rate(&self) -> Result<RateResult> {
        self.check_rate_finite()?;
        let mut failure = None;
        let res = integrate_to_infinity(
            |t| {
                if t > T_RATE_CUTOFF {
                    return 0.0;
                }
                let thr = t.exp_m1();
                match phi(thr, self.alpha, self.mu, self.fading)
                    .and_then(|p| self.coverage_given_phi(thr, p))
                {
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
        let res = res.map_err(quad_err("mean rate over t"))?;
        Ok(RateResult::from_integral(res, 1.0, OUTER))
    }

    /// Closed-form counterpart of [`BsLink::mean_rate`].
    pub fn mean_rate_special(&self) -> Result<RateResult> {
        self.require_special()?;
        self.check_rate_finite()?;
        let res = integrate_to_infinity(
            |t| {
                if t > T_RATE_CUTOFF {
                    return 0.0;
                }
                let thr = t.exp_m1();
                let a = self.mu * self.noise * thr / self.p_b;
                gauss_exp_integral(a, kappa(thr, self.lambda_b, self.p_busy))
            },
            0.0,
            OUTER,
        )
        .map_err(quad_err("closed-form mean rate over t"))?;
        Ok(RateResult::from_integral(res, PI * self.lambda_b, OUTER))
    }
}

pub(crate) fn check_threshold(t: f64) -> Result<()> {
    if t >= 0.0 && !t.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "SINR threshold must be >= 0, got {t}"
        )))
    }
}

/// `Pr(γ ≤ T)` of the non-cooperative link (general route).
pub fn sinr_cdf_noncoop(t: f64, params: &ValidatedParams, busy: &BusyProbabilities) -> Result<f64> {
    BsLink::noncoop(params, busy).cdf(t)
}

pub fn sinr_cdf_noncoop_special(
    t: f64,
    params: &ValidatedParams,
    busy: &BusyProbabilities,
) -> Result<f64> {
    BsLink::noncoop(params, busy).cdf_special(t)
}

/// `τ_nc = E[ln(1 + γ)]` (general route).
pub fn mean_rate_noncoop(params: &ValidatedParams, busy: &BusyProbabilities) -> Result<RateResult> {
    BsLink::noncoop(params, busy).mean_rate()
}

pub fn mean_rate_noncoop_special(
    params: &ValidatedParams,
    busy: &BusyProbabilities,
) -> Result<RateResult> {
    BsLink::noncoop(params, busy).mean_rate_special()
}

/// How a [`SinrCdf`] is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CdfRoute {
    General,
    ClosedForm,
}

/// An evaluable SINR distribution of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrCdf {
    link: CdfLink,
    route: CdfRoute,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CdfLink {
    Bs(BsLink),
    Rs(crate::analytic_coop::RsLink),
}

impl SinrCdf {
    pub fn bs(link: BsLink, route: CdfRoute) -> Self {
        Self {
            link: CdfLink::Bs(link),
            route,
        }
    }

    pub fn rs(link: crate::analytic_coop::RsLink, route: CdfRoute) -> Self {
        Self {
            link: CdfLink::Rs(link),
            route,
        }
    }

    pub fn tag(&self) -> LinkTag {
        match &self.link {
            CdfLink::Bs(l) => l.tag,
            CdfLink::Rs(_) => LinkTag::Rs,
        }
    }

    pub fn route(&self) -> CdfRoute {
        self.route
    }

    pub fn tolerance(&self) -> f64 {
        INNER.abs_tol
    }

    /// `Pr(γ ≤ T)`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        match (&self.link, self.route) {
            (CdfLink::Bs(l), CdfRoute::General) => l.cdf(t),
            (CdfLink::Bs(l), CdfRoute::ClosedForm) => l.cdf_special(t),
            (CdfLink::Rs(l), CdfRoute::General) => l.cdf(t),
            (CdfLink::Rs(l), CdfRoute::ClosedForm) => l.cdf_special(t),
        }
    }
}

/// An evaluable interference Laplace transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterferenceTransform {
    /// BS tier with interferers beyond `exclusion_radius`.
    Bs {
        tier: BsTier,
        exclusion_radius: f64,
    },
    Rs {
        tier: RsTier,
    },
}

impl InterferenceTransform {
    pub fn eval(&self, s: f64) -> Result<f64> {
        match self {
            Self::Bs {
                tier,
                exclusion_radius,
            } => laplace_bs_tier(s, *exclusion_radius, tier),
            Self::Rs { tier } => laplace_rs_tier(s, tier),
        }
    }
}
