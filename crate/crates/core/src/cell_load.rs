//! Per-cell load statistics: approximate Voronoi cell area, UE and relay
//! counts per cell, subchannel busy probabilities and thinned interferer
//! densities.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ValidatedParams;

/// Truncation target for count distributions.
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// Hard cap on pmf length for automatic truncation.
const MAX_SUPPORT: usize = 50_000_000;

/// Gamma shape of the normalised cell area.
pub const AREA_SHAPE: f64 = 3.5;

/// Approximate density of the area of a Poisson–Voronoi cell,
/// `f(S) = (343/15)·√(7/2π)·(Sλ)^{5/2}·exp(−7Sλ/2)·λ`.
///
/// This is the Gamma(7/2, rate 7λ/2) density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellAreaPdf {
    lambda_b: f64,
}

impl CellAreaPdf {
    pub fn new(lambda_b: f64) -> Result<Self> {
        if !(lambda_b.is_finite() && lambda_b > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cell area density needs lambda_b > 0, got {lambda_b}"
            )));
        }
        Ok(Self { lambda_b })
    }

    pub fn lambda_b(&self) -> f64 {
        self.lambda_b
    }

    pub fn density(&self, area: f64) -> f64 {
        if area < 0.0 {
            return 0.0;
        }
        let x = area * self.lambda_b;
        343.0 / 15.0 * (7.0 / (2.0 * PI)).sqrt() * x.powf(2.5) * (-3.5 * x).exp() * self.lambda_b
    }

    pub fn mean(&self) -> f64 {
        1.0 / self.lambda_b
    }

    pub fn mode(&self) -> f64 {
        (5.0 / 7.0) / self.lambda_b
    }

    /// Rate parameter of the equivalent Gamma law.
    pub fn rate(&self) -> f64 {
        AREA_SHAPE * self.lambda_b
    }
}

pub fn cell_area_pdf(lambda_b: f64) -> Result<CellAreaPdf> {
    CellAreaPdf::new(lambda_b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountKind {
    /// Poisson count over a random Voronoi cell area (non-cooperative UEs, relays).
    MixedPoissonVoronoi,
    /// Poisson count over a relay disc (cooperative UEs).
    PoissonDisc,
}

/// Truncated probability mass function of a per-cell count.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDistribution {
    pmf: Vec<f64>,
    mean: f64,
    kind: CountKind,
    tail_bound: f64,
}

impl CountDistribution {
    /// Builds the pmf from `ln P{U=0}` and the ratio `P{i+1}/P{i}`, which must
    /// be nonincreasing in `i`. Accumulates in log space.
    fn from_ratio(
        ln_p0: f64,
        ln_ratio: impl Fn(usize) -> f64,
        mean: f64,
        kind: CountKind,
        i_max: Option<usize>,
        min_support: usize,
        tol: f64,
    ) -> Result<Self> {
        let mut pmf = Vec::new();
        let mut ln_p = ln_p0;
        let mut i = 0usize;
        loop {
            pmf.push(ln_p.exp());
            let lr = ln_ratio(i);
            let tail = tail_bound(ln_p, lr);
            let stop = match i_max {
                Some(m) => i == m,
                None => i >= min_support && tail <= tol,
            };
            if stop {
                if tail > tol {
                    return Err(Error::TailMass {
                        i_max: i,
                        tail,
                        tolerance: tol,
                    });
                }
                return Ok(Self {
                    pmf,
                    mean,
                    kind,
                    tail_bound: tail,
                });
            }
            if i >= MAX_SUPPORT {
                return Err(Error::TailMass {
                    i_max: i,
                    tail,
                    tolerance: tol,
                });
            }
            ln_p += lr;
            i += 1;
        }
    }

    fn point_mass_at_zero(kind: CountKind) -> Self {
        Self {
            pmf: vec![1.0],
            mean: 0.0,
            kind,
            tail_bound: 0.0,
        }
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.pmf.get(i).copied().unwrap_or(0.0)
    }

    /// Analytic mean of the untruncated distribution.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `Σ i·P{U=i}` over the stored support.
    pub fn pmf_mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(i, p)| i as f64 * p).sum()
    }

    pub fn kind(&self) -> CountKind {
        self.kind
    }

    pub fn i_max(&self) -> usize {
        self.pmf.len() - 1
    }

    /// Certified upper bound on `P{U > i_max}`.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn cdf(&self, k: usize) -> f64 {
        self.pmf.iter().take(k + 1).sum()
    }

    /// `P{U > k}`.
    pub fn ccdf(&self, k: usize) -> f64 {
        (1.0 - self.cdf(k)).max(0.0)
    }

    /// `E[min(U, cap)]` as the series `Σ min(i, cap)·P{U=i}`.
    ///
    /// Beyond the truncation point `min(i, cap) = cap`, so the tail adds
    /// exactly `cap·P{U > i_max}` whenever `i_max >= cap`.
    pub fn expected_min(&self, cap: f64) -> f64 {
        let body: f64 = self
            .pmf
            .iter()
            .enumerate()
            .map(|(i, p)| (i as f64).min(cap) * p)
            .sum();
        if self.i_max() as f64 >= cap {
            let mass: f64 = self.pmf.iter().sum();
            body + cap * (1.0 - mass).max(0.0)
        } else {
            body
        }
    }

    /// `E[min(U, cap)] = ∫₀^cap P{U > x} dx`, summed over unit steps.
    pub fn expected_min_ccdf(&self, cap: f64) -> f64 {
        let whole = cap.floor() as usize;
        let frac = cap - cap.floor();
        let mut acc = 0.0;
        let mut cdf = 0.0;
        for k in 0..whole {
            cdf += self.prob(k);
            acc += (1.0 - cdf).max(0.0);
        }
        cdf += self.prob(whole);
        acc + frac * (1.0 - cdf).max(0.0)
    }
}

/// Geometric bound on the tail beyond the current term given its log ratio.
fn tail_bound(ln_p: f64, ln_ratio: f64) -> f64 {
    let r = ln_ratio.exp();
    if r >= 1.0 {
        f64::INFINITY
    } else {
        ln_p.exp() * r / (1.0 - r)
    }
}

fn check_density(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be finite and >= 0, got {v}"
        )))
    }
}

/// Count of points of a PPP with density `lambda_pts` falling into a cell whose
/// area follows [`CellAreaPdf`].
///
/// With `c = λ_pts/λ_b`, `P{U=i} = (7/2)^{7/2}·(c^i/i!)·(7/2)_i·(7/2 + c)^{−(7/2+i)}`,
/// the i-th Taylor coefficient of the generating function
/// `G(z) = (7/2)^{7/2}(7/2 − c(z − 1))^{−7/2}`.
///
/// With `i_max = None` the support grows until the tail bound drops below
/// [`TAIL_TOLERANCE`].
pub fn count_distribution_voronoi(
    lambda_pts: f64,
    lambda_b: f64,
    i_max: Option<usize>,
) -> Result<CountDistribution> {
    count_distribution_voronoi_with_tolerance(lambda_pts, lambda_b, i_max, TAIL_TOLERANCE)
}

/// Automatic truncation that also keeps every index up to `min_support`,
/// so that capped expectations `E[min(U, cap)]` with `cap <= min_support`
/// see the whole body of the distribution.
pub fn count_distribution_voronoi_covering(
    lambda_pts: f64,
    lambda_b: f64,
    min_support: usize,
) -> Result<CountDistribution> {
    voronoi_impl(lambda_pts, lambda_b, None, min_support, TAIL_TOLERANCE)
}

pub fn count_distribution_voronoi_with_tolerance(
    lambda_pts: f64,
    lambda_b: f64,
    i_max: Option<usize>,
    tol: f64,
) -> Result<CountDistribution> {
    voronoi_impl(lambda_pts, lambda_b, i_max, 0, tol)
}

fn voronoi_impl(
    lambda_pts: f64,
    lambda_b: f64,
    i_max: Option<usize>,
    min_support: usize,
    tol: f64,
) -> Result<CountDistribution> {
    check_density("lambda_pts", lambda_pts)?;
    CellAreaPdf::new(lambda_b)?;
    if lambda_pts == 0.0 {
        return Ok(CountDistribution::point_mass_at_zero(
            CountKind::MixedPoissonVoronoi,
        ));
    }
    let c = lambda_pts / lambda_b;
    let k = AREA_SHAPE;
    let ln_k_plus_c = (k + c).ln();
    let ln_p0 = k * (k.ln() - ln_k_plus_c);
    let ln_c = c.ln();
    CountDistribution::from_ratio(
        ln_p0,
        |i| {
            let i = i as f64;
            ln_c + (k + i).ln() - (i + 1.0).ln() - ln_k_plus_c
        },
        c,
        CountKind::MixedPoissonVoronoi,
        i_max,
        min_support,
        tol,
    )
}

/// Poisson count of cooperative UEs in a relay disc of radius `r_relay`.
pub fn count_distribution_disc(
    lambda_c: f64,
    r_relay: f64,
    i_max: Option<usize>,
) -> Result<CountDistribution> {
    disc_impl(lambda_c, r_relay, i_max, 0)
}

/// See [`count_distribution_voronoi_covering`].
pub fn count_distribution_disc_covering(
    lambda_c: f64,
    r_relay: f64,
    min_support: usize,
) -> Result<CountDistribution> {
    disc_impl(lambda_c, r_relay, None, min_support)
}

fn disc_impl(
    lambda_c: f64,
    r_relay: f64,
    i_max: Option<usize>,
    min_support: usize,
) -> Result<CountDistribution> {
    check_density("lambda_c", lambda_c)?;
    if !(r_relay.is_finite() && r_relay > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "relay radius must be > 0, got {r_relay}"
        )));
    }
    if lambda_c == 0.0 {
        return Ok(CountDistribution::point_mass_at_zero(
            CountKind::PoissonDisc,
        ));
    }
    let mean = lambda_c * PI * r_relay * r_relay;
    let ln_mean = mean.ln();
    CountDistribution::from_ratio(
        -mean,
        |i| ln_mean - ((i + 1) as f64).ln(),
        mean,
        CountKind::PoissonDisc,
        i_max,
        min_support,
        TAIL_TOLERANCE,
    )
}

/// Probability that a given subchannel of each partition is in use, and the
/// resulting densities of co-channel interferers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BusyProbabilities {
    pub p_b1: f64,
    pub p_b2: f64,
    pub p_r: f64,
    /// `λ_b·p_b1`: BSs active on a non-cooperative subchannel.
    pub lambda_b1_active: f64,
    /// `λ_b·p_b2`: BSs active on a cooperative subchannel.
    pub lambda_b2_active: f64,
    /// `λ_r·p_r`: RSs active on a relay subchannel.
    pub lambda_r_active: f64,
}

/// Count distributions of a cell together with the busy probabilities they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct CellLoad {
    pub u_nc: CountDistribution,
    pub u_r: CountDistribution,
    pub u_c: CountDistribution,
    pub busy: BusyProbabilities,
}

/// `E[min(U, cap)] / cap`.
pub fn busy_fraction(dist: &CountDistribution, cap: f64) -> f64 {
    (dist.expected_min(cap) / cap).clamp(0.0, 1.0)
}

pub fn cell_load(params: &ValidatedParams) -> Result<CellLoad> {
    let rho = params.derived().rho;
    let u_nc = count_distribution_voronoi_covering(
        params.lambda_nc,
        params.lambda_b,
        params.m_b1 as usize,
    )?;
    let u_r =
        count_distribution_voronoi_covering(params.lambda_r, params.lambda_b, rho.ceil() as usize)?;
    let u_c =
        count_distribution_disc_covering(params.lambda_c, params.r_relay, params.m_r as usize)?;
    let p_b1 = busy_fraction(&u_nc, f64::from(params.m_b1));
    let p_b2 = busy_fraction(&u_r, rho);
    let p_r = busy_fraction(&u_c, f64::from(params.m_r));
    let busy = BusyProbabilities {
        p_b1,
        p_b2,
        p_r,
        lambda_b1_active: params.lambda_b * p_b1,
        lambda_b2_active: params.lambda_b * p_b2,
        lambda_r_active: params.lambda_r * p_r,
    };
    Ok(CellLoad {
        u_nc,
        u_r,
        u_c,
        busy,
    })
}

pub fn busy_probabilities(params: &ValidatedParams) -> Result<BusyProbabilities> {
    cell_load(params).map(|l| l.busy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate, NetworkParams};
    use crate::quad::{integrate, QuadOptions};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const LB: f64 = 1e-5;

    #[test]
    fn area_pdf_normalised_with_mean_and_mode() {
        let pdf = cell_area_pdf(LB).unwrap();
        let opts = QuadOptions::new(1e-13, 1e-13);
        let upper = 50.0 / LB;
        let mass = integrate(|s| pdf.density(s), 0.0, upper, opts).unwrap();
        assert!((mass.value - 1.0).abs() < 1e-8, "{}", mass.value);
        let mean = integrate(|s| s * pdf.density(s), 0.0, upper, opts).unwrap();
        assert_relative_eq!(mean.value, 1e5, max_relative = 1e-6);

        // grid search for the mode
        let (mut best, mut arg) = (0.0, 0.0);
        for k in 1..20_000 {
            let s = k as f64 * 10.0;
            let d = pdf.density(s);
            if d > best {
                best = d;
                arg = s;
            }
        }
        assert!((arg - pdf.mode()).abs() <= 10.0, "{arg} vs {}", pdf.mode());
        assert_relative_eq!(pdf.mode(), 5.0 / 7.0 * 1e5, max_relative = 1e-12);
    }

    #[test]
    fn nonpositive_density_rejected() {
        assert!(cell_area_pdf(0.0).is_err());
        assert!(cell_area_pdf(-1.0).is_err());
    }

    #[test]
    fn empty_process() {
        let d = count_distribution_voronoi(0.0, LB, None).unwrap();
        assert_eq!(d.prob(0), 1.0);
        let d = count_distribution_disc(0.0, 20.0, None).unwrap();
        assert_eq!(d.prob(0), 1.0);
    }

    #[test]
    fn unit_ratio_values() {
        let d = count_distribution_voronoi(LB, LB, None).unwrap();
        assert_relative_eq!(
            d.prob(0),
            (1.0f64 + 2.0 / 7.0).powf(-3.5),
            max_relative = 1e-13
        );
        assert_relative_eq!(d.prob(1), (7.0f64 / 9.0).powf(4.5), max_relative = 1e-13);
        assert!((d.prob(0) - 0.4149).abs() < 1e-4);
        assert!((d.prob(1) - 0.3228).abs() < 1e-4);
    }

    #[test]
    fn pmf_matches_generating_function_derivatives() {
        // Taylor coefficients of G(z) = K (7/2 - c(z-1))^{-7/2} from the
        // binomial series: G = K (7/2+c)^{-7/2} (1 - c z/(7/2+c))^{-7/2}.
        let c = 3.7;
        let d = count_distribution_voronoi(c * LB, LB, None).unwrap();
        let k: f64 = 3.5;
        let q = c / (k + c);
        let mut coeff = k.powf(k) * (k + c).powf(-k);
        for i in 0..40 {
            assert_relative_eq!(d.prob(i), coeff, max_relative = 1e-12);
            coeff *= (k + i as f64) / (i as f64 + 1.0) * q;
        }
    }

    #[test]
    fn explicit_i_max_too_small_fails() {
        let err = count_distribution_voronoi(10.0 * LB, LB, Some(5)).unwrap_err();
        assert!(matches!(err, Error::TailMass { i_max: 5, .. }));
        assert!(count_distribution_disc(8e-4, 20.0, Some(2)).is_err());
    }

    #[test]
    fn disc_counts() {
        let r = (1.0 / PI).sqrt();
        let d = count_distribution_disc(1.0, r, None).unwrap();
        assert_relative_eq!(d.prob(1), (-1.0f64).exp(), max_relative = 1e-13);
        let d = count_distribution_disc(8e-4, 20.0, None).unwrap();
        assert!((d.mean() - 1.005).abs() < 1e-3);
    }

    #[test]
    fn truncation_respects_tail_tolerance() {
        for c in [0.01, 1.0, 9.0, 100.0, 3000.0] {
            let d = count_distribution_voronoi(c * LB, LB, None).unwrap();
            assert!(d.tail_bound() <= TAIL_TOLERANCE);
            let mass: f64 = d.pmf().iter().sum();
            assert!((1.0 - mass).abs() < 1e-9, "c={c} mass={mass}");
            assert!(d.pmf().iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn busy_no_users() {
        let mut p = NetworkParams::reference();
        p.lambda_nc = 0.0;
        let b = busy_probabilities(&validate(p).unwrap()).unwrap();
        assert_eq!(b.p_b1, 0.0);
        assert_eq!(b.lambda_b1_active, 0.0);
    }

    #[test]
    fn busy_single_channel_identity() {
        let mut p = NetworkParams::reference();
        p.m_b1 = 1;
        p.m_b2 = 284;
        let v = validate(p).unwrap();
        let load = cell_load(&v).unwrap();
        assert_relative_eq!(
            load.busy.p_b1,
            1.0 - load.u_nc.prob(0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn relay_saturation() {
        let mut p = NetworkParams::reference();
        p.lambda_c = 1.0; // ~1257 UEs per disc
        let b = busy_probabilities(&validate(p).unwrap()).unwrap();
        assert!(b.p_r > 1.0 - 1e-12);
    }

    #[test]
    fn non_integer_rho_caps_at_real_value() {
        let d = count_distribution_voronoi(9.0 * LB, LB, None).unwrap();
        let cap = 2.5;
        let direct: f64 = d
            .pmf()
            .iter()
            .enumerate()
            .map(|(i, p)| (i as f64).min(cap) * p)
            .sum();
        assert_relative_eq!(d.expected_min(cap), direct, max_relative = 1e-9);
        assert!(d.expected_min(2.0) < d.expected_min(cap));
        assert!(d.expected_min(cap) < d.expected_min(3.0));
    }

    proptest! {
        #[test]
        fn expected_min_two_ways(c in 0.0f64..400.0, cap in 1u32..300) {
            let d = count_distribution_voronoi_covering(c * LB, LB, cap as usize).unwrap();
            let cap = f64::from(cap);
            prop_assert!((d.expected_min(cap) - d.expected_min_ccdf(cap)).abs() < 1e-10);
        }

        #[test]
        fn expected_min_two_ways_disc(lc in 0.0f64..0.05, cap in 1u32..40) {
            let d = count_distribution_disc_covering(lc, 20.0, cap as usize).unwrap();
            let cap = f64::from(cap);
            prop_assert!((d.expected_min(cap) - d.expected_min_ccdf(cap)).abs() < 1e-10);
        }

        #[test]
        fn busy_monotone_in_density(a in 1e-7f64..1e-2, k in 1.01f64..4.0) {
            let mut p = NetworkParams::reference();
            p.lambda_nc = a;
            p.lambda_c = a;
            let lo = busy_probabilities(&validate(p.clone()).unwrap()).unwrap();
            p.lambda_nc = a * k;
            p.lambda_c = a * k;
            let hi = busy_probabilities(&validate(p).unwrap()).unwrap();
            prop_assert!(hi.p_b1 >= lo.p_b1);
            prop_assert!(hi.p_r >= lo.p_r);
            for b in [lo, hi] {
                prop_assert!((0.0..=1.0).contains(&b.p_b1));
                prop_assert!((0.0..=1.0).contains(&b.p_b2));
                prop_assert!((0.0..=1.0).contains(&b.p_r));
                prop_assert!(b.lambda_b1_active <= 1e-5 && b.lambda_b2_active <= 1e-5);
                prop_assert!(b.lambda_r_active <= 9e-5);
            }
        }
    }
}
