//! Monte Carlo oracle for the link SINRs, rates and energy efficiency.
//!
//! Every realization places the receiver of interest at the origin. The BS
//! process is sampled in full inside a disc holding about `window_scale²`
//! points on average so the nearest BS is found geometrically; interferers are
//! those points independently kept with the busy probability, plus a thinned
//! process sampled directly in the annulus out to the window of the thinned
//! density. Realization `k` draws from its own ChaCha stream, so results do not
//! depend on scheduling.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic_sinr::FadingLaw;
use crate::cell_load::BusyProbabilities;
use crate::energy::{consumed_power, EnergyEfficiencyResult, PowerModel, SiteClass};
use crate::error::{Error, Result};
use crate::model::ValidatedParams;

/// Streams per realization: non-cooperative geometry, cooperative geometry,
/// cell counts.
const PARTS: u64 = 3;
const PART_NONCOOP: u64 = 0;
const PART_COOP: u64 = 1;
const PART_COUNTS: u64 = 2;

/// Smallest `window_scale` keeping the BS window at least `10/√λ_b`.
pub const MIN_WINDOW_SCALE: f64 = 17.724_538_509_055_16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Guard {
    #[default]
    TypicalPointAtOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_realizations: usize,
    pub seed: u64,
    /// Window radius of a process of density `λ` is `window_scale/√(πλ)`,
    /// about `window_scale²` points.
    pub window_scale: f64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    pub guard: Guard,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_realizations: 10_000,
            seed: 0x5eed,
            window_scale: 30.0,
            workers: None,
            guard: Guard::TypicalPointAtOrigin,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_realizations == 0 {
            return Err(Error::InvalidArgument("n_realizations must be >= 1".into()));
        }
        if !(self.window_scale >= MIN_WINDOW_SCALE && self.window_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "window_scale must be >= {MIN_WINDOW_SCALE:.3} (ten mean BS spacings), got {}",
                self.window_scale
            )));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidArgument("workers must be >= 1".into()));
        }
        Ok(())
    }

    /// Window radius for a process of density `lambda`; infinite when empty.
    pub fn window_radius(&self, lambda: f64) -> f64 {
        self.window_scale / (PI * lambda).sqrt()
    }

    fn rng(&self, k: usize, part: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64 * PARTS + part);
        rng
    }
}

pub type Point = [f64; 2];

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn uniform_in_annulus<R: Rng>(rng: &mut R, inner: f64, outer: f64) -> Point {
    let r2 = inner * inner + rng.random::<f64>() * (outer * outer - inner * inner);
    let theta = 2.0 * PI * rng.random::<f64>();
    let r = r2.sqrt();
    [r * theta.cos(), r * theta.sin()]
}

fn poisson<R: Rng>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .expect("finite positive mean")
        .sample(rng) as usize
}

/// PPP of density `lambda` on the annulus `inner < |x| < outer`.
fn ppp_annulus<R: Rng>(rng: &mut R, lambda: f64, inner: f64, outer: f64) -> Vec<Point> {
    if lambda <= 0.0 || outer <= inner {
        return Vec::new();
    }
    let n = poisson(rng, lambda * PI * (outer * outer - inner * inner));
    (0..n)
        .map(|_| uniform_in_annulus(rng, inner, outer))
        .collect()
}

/// Fading sampler for interference and serving links.
#[derive(Debug, Clone, Copy)]
struct Fades {
    serving: Exp<f64>,
    interference: FadingLaw,
}

impl Fades {
    fn new(params: &ValidatedParams) -> Self {
        Self {
            serving: Exp::new(params.mu).expect("mu validated positive"),
            interference: FadingLaw::from_params(params),
        }
    }

    fn interferer<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.interference {
            FadingLaw::Exponential { mu } => Exp::new(mu).expect("positive rate").sample(rng),
            FadingLaw::Unit => 1.0,
        }
    }
}

/// SINR at `rx` from a server at distance `serving` with fade `h` and the
/// given interferers, each with an independent fade.
#[allow(clippy::too_many_arguments)]
pub fn link_sinr<R: Rng>(
    rng: &mut R,
    p_tx: f64,
    alpha: f64,
    noise: f64,
    serving_fade: f64,
    serving_distance: f64,
    interferer_distances: impl Iterator<Item = f64>,
    mut interferer_fade: impl FnMut(&mut R) -> f64,
) -> f64 {
    let signal = p_tx * serving_fade * serving_distance.powf(-alpha);
    let interference: f64 = interferer_distances
        .map(|d| p_tx * interferer_fade(rng) * d.powf(-alpha))
        .sum();
    signal / (interference + noise)
}

/// BS geometry around a receiver at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct BsGeometry {
    /// All BSs inside the full-density window.
    pub bs_points: Vec<Point>,
    pub serving: Point,
    /// Active co-channel BSs, server excluded.
    pub interferers: Vec<Point>,
    /// Times the window came up empty and was redrawn.
    pub resampled: u32,
}

fn sample_bs_geometry<R: Rng>(
    rng: &mut R,
    lambda_b: f64,
    p_busy: f64,
    mc: &McConfig,
) -> BsGeometry {
    let w_full = mc.window_radius(lambda_b);
    let mut resampled = 0;
    let bs_points = loop {
        let pts = ppp_annulus(rng, lambda_b, 0.0, w_full);
        if !pts.is_empty() {
            break pts;
        }
        resampled += 1;
    };
    let serving_idx = bs_points
        .iter()
        .enumerate()
        .min_by(|a, b| dist(*a.1, [0.0; 2]).total_cmp(&dist(*b.1, [0.0; 2])))
        .map(|(i, _)| i)
        .expect("non-empty");
    let serving = bs_points[serving_idx];
    let mut interferers: Vec<Point> = bs_points
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != serving_idx)
        .filter(|_| rng.random::<f64>() < p_busy)
        .map(|(_, p)| *p)
        .collect();
    let lambda_active = lambda_b * p_busy;
    if lambda_active > 0.0 {
        let w_active = mc.window_radius(lambda_active);
        interferers.extend(ppp_annulus(rng, lambda_active, w_full, w_active));
    }
    BsGeometry {
        bs_points,
        serving,
        interferers,
        resampled,
    }
}

/// One network realization seen by a non-cooperative UE and by a relay with
/// its cooperative UE.
#[derive(Debug, Clone, PartialEq)]
pub struct McRealization {
    pub k: usize,
    /// Geometry around the non-cooperative UE.
    pub noncoop: BsGeometry,
    /// Geometry around the relay.
    pub coop: BsGeometry,
    /// Active interfering relays around the relay at the origin.
    pub rs_points: Vec<Point>,
    /// Cooperative UE position, uniform in the relay disc.
    pub ue: Point,
    /// BS to non-cooperative UE.
    pub gamma: f64,
    /// BS to relay.
    pub gamma1: f64,
    /// BS to cooperative UE.
    pub gamma0: f64,
    /// Relay to cooperative UE.
    pub gamma2: f64,
    pub decoded: bool,
    pub counts: CellCounts,
}

/// Per-cell counts drawn from the cell-area law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellCounts {
    pub area: f64,
    pub u_nc: u64,
    pub u_r: u64,
    /// Cooperative UEs of one relay.
    pub u_c: u64,
}

/// Draws a cell area from the Gamma(3.5, 3.5λ_b) law and Poisson counts of
/// each population in it.
pub fn sample_cell_counts<R: Rng>(rng: &mut R, params: &ValidatedParams) -> CellCounts {
    let area = cell_area(rng, params.lambda_b);
    CellCounts {
        area,
        u_nc: poisson(rng, params.lambda_nc * area) as u64,
        u_r: poisson(rng, params.lambda_r * area) as u64,
        u_c: poisson(rng, params.lambda_c * PI * params.r_relay * params.r_relay) as u64,
    }
}

fn cell_area<R: Rng>(rng: &mut R, lambda_b: f64) -> f64 {
    Gamma::new(3.5, 1.0 / (3.5 * lambda_b))
        .expect("positive shape and scale")
        .sample(rng)
}

/// Counts of points of density `lambda_pts` in `n` independent cells, cell
/// `k` drawn from stream `k`.
pub fn sample_voronoi_counts(lambda_pts: f64, lambda_b: f64, n: usize, seed: u64) -> Vec<u64> {
    (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let area = cell_area(&mut rng, lambda_b);
            poisson(&mut rng, lambda_pts * area) as u64
        })
        .collect()
}

/// Realization `k`, a pure function of `(params, busy, mc.seed, k)`.
pub fn sample_realization(
    params: &ValidatedParams,
    busy: &BusyProbabilities,
    mc: &McConfig,
    k: usize,
) -> McRealization {
    let d = params.derived();
    let fades = Fades::new(params);
    let (alpha, noise) = (params.alpha, params.noise);

    let mut rng = mc.rng(k, PART_NONCOOP);
    let noncoop = sample_bs_geometry(&mut rng, params.lambda_b, busy.p_b1, mc);
    let h = fades.serving.sample(&mut rng);
    let gamma = link_sinr(
        &mut rng,
        d.p_b,
        alpha,
        noise,
        h,
        dist(noncoop.serving, [0.0; 2]),
        noncoop.interferers.iter().map(|p| dist(*p, [0.0; 2])),
        |r| fades.interferer(r),
    );

    let mut rng = mc.rng(k, PART_COOP);
    let coop = sample_bs_geometry(&mut rng, params.lambda_b, busy.p_b2, mc);
    let h1 = fades.serving.sample(&mut rng);
    let gamma1 = link_sinr(
        &mut rng,
        d.p_b,
        alpha,
        noise,
        h1,
        dist(coop.serving, [0.0; 2]),
        coop.interferers.iter().map(|p| dist(*p, [0.0; 2])),
        |r| fades.interferer(r),
    );
    let ue = uniform_in_annulus(&mut rng, 0.0, params.r_relay);
    let h0 = fades.serving.sample(&mut rng);
    let gamma0 = link_sinr(
        &mut rng,
        d.p_b,
        alpha,
        noise,
        h0,
        dist(coop.serving, ue),
        coop.interferers.iter().map(|p| dist(*p, ue)),
        |r| fades.interferer(r),
    );
    let lambda_r_active = busy.lambda_r_active;
    let rs_points = if lambda_r_active > 0.0 {
        ppp_annulus(
            &mut rng,
            lambda_r_active,
            0.0,
            mc.window_radius(lambda_r_active),
        )
    } else {
        Vec::new()
    };
    let h2 = fades.serving.sample(&mut rng);
    let gamma2 = link_sinr(
        &mut rng,
        d.p_r,
        alpha,
        noise,
        h2,
        dist(ue, [0.0; 2]),
        rs_points.iter().map(|p| dist(*p, ue)),
        |r| fades.interferer(r),
    );

    let mut rng = mc.rng(k, PART_COUNTS);
    let counts = sample_cell_counts(&mut rng, params);

    McRealization {
        k,
        noncoop,
        coop,
        rs_points,
        ue,
        gamma,
        gamma1,
        gamma0,
        gamma2,
        decoded: gamma1 >= d.t_th,
        counts,
    }
}

/// Per-realization outputs with the geometry dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleRow {
    pub k: usize,
    pub gamma: f64,
    pub gamma1: f64,
    pub gamma0: f64,
    pub gamma2: f64,
    pub decoded: bool,
    pub counts: CellCounts,
    pub resampled: u32,
    /// Nearest-BS distance of the non-cooperative UE.
    pub serving_distance: f64,
    /// Relay to cooperative UE distance.
    pub ue_distance: f64,
    /// Active RSs in the relay-tier window.
    pub n_rs_active: usize,
}

impl From<McRealization> for SampleRow {
    fn from(r: McRealization) -> Self {
        Self {
            k: r.k,
            gamma: r.gamma,
            gamma1: r.gamma1,
            gamma0: r.gamma0,
            gamma2: r.gamma2,
            decoded: r.decoded,
            counts: r.counts,
            resampled: r.noncoop.resampled + r.coop.resampled,
            serving_distance: dist(r.noncoop.serving, [0.0; 2]),
            ue_distance: dist(r.ue, [0.0; 2]),
            n_rs_active: r.rs_points.len(),
        }
    }
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}"))),
    }
}

/// All realizations, ordered by index.
pub fn simulate(
    params: &ValidatedParams,
    busy: &BusyProbabilities,
    mc: &McConfig,
) -> Result<Vec<SampleRow>> {
    mc.validate()?;
    in_pool(mc.workers, || {
        (0..mc.n_realizations)
            .into_par_iter()
            .map(|k| SampleRow::from(sample_realization(params, busy, mc, k)))
            .collect()
    })
}

/// Writes one CSV row per realization.
pub fn write_samples<W: Write>(rows: &[SampleRow], mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "k,gamma_noncoop,gamma1,gamma0,gamma2,decoded,u_nc,u_r,u_c"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{},{},{},{}",
            r.k,
            r.gamma,
            r.gamma1,
            r.gamma0,
            r.gamma2,
            u8::from(r.decoded),
            r.counts.u_nc,
            r.counts.u_r,
            r.counts.u_c
        )?;
    }
    Ok(())
}

/// Sample mean with standard error `sd/√n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_samples(xs: impl IntoIterator<Item = f64>) -> Self {
        let xs: Vec<f64> = xs.into_iter().collect();
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            se: (var / n as f64).sqrt(),
            n,
        }
    }

    /// `|mean − value| <= k·se`.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.se
    }

    /// Distance to `value` in standard errors.
    pub fn z(&self, value: f64) -> f64 {
        (self.mean - value) / self.se
    }
}

/// Right-continuous empirical distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        Self { sorted: samples }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&x| x <= t) as f64 / self.sorted.len() as f64
    }

    /// `sup_t |F_n(t) − F(t)|` for a continuous `F`, checked on both sides of
    /// every jump.
    pub fn sup_distance(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let fx = f(x);
                (fx - i as f64 / n)
                    .abs()
                    .max(((i + 1) as f64 / n - fx).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Two-sample sup distance.
    pub fn sup_distance_to(&self, other: &EmpiricalCdf) -> f64 {
        self.sorted
            .iter()
            .chain(other.sorted.iter())
            .map(|&t| (self.eval(t) - other.eval(t)).abs())
            .fold(0.0, f64::max)
    }
}

/// Which simulated SINR to look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McLink {
    /// BS to non-cooperative UE.
    Noncoop,
    /// BS to relay, `γ₁`.
    BsRelay,
    /// BS to cooperative UE, `γ₀`.
    BsUe,
    /// Relay to cooperative UE, `γ₂`.
    RsUe,
}

impl McLink {
    pub fn pick(self, r: &SampleRow) -> f64 {
        match self {
            Self::Noncoop => r.gamma,
            Self::BsRelay => r.gamma1,
            Self::BsUe => r.gamma0,
            Self::RsUe => r.gamma2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub link: McLink,
    pub cdf: EmpiricalCdf,
    /// `E[ln(1 + γ)]`, nats.
    pub mean_rate: MeanEstimate,
    /// Fraction of `γ ≥ T_th`, for the BS-to-relay link.
    pub decode: Option<MeanEstimate>,
}

/// Builds the estimate of one link from simulated rows.
pub fn link_estimate(link: McLink, rows: &[SampleRow], t_th: f64) -> McEstimate {
    let g: Vec<f64> = rows.iter().map(|r| link.pick(r)).collect();
    let mean_rate = MeanEstimate::from_samples(g.iter().map(|x| x.ln_1p()));
    let decode = (link == McLink::BsRelay)
        .then(|| MeanEstimate::from_samples(g.iter().map(|&x| f64::from(u8::from(x >= t_th)))));
    McEstimate {
        link,
        cdf: EmpiricalCdf::new(g),
        mean_rate,
        decode,
    }
}

pub fn estimate_sinr_cdf(
    link: McLink,
    params: &ValidatedParams,
    busy: &BusyProbabilities,
    mc: &McConfig,
) -> Result<McEstimate> {
    let rows = simulate(params, busy, mc)?;
    Ok(link_estimate(link, &rows, params.derived().t_th))
}

/// Simulated rates, nats per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McRates {
    pub tau_nc: MeanEstimate,
    pub tau_1: MeanEstimate,
    pub tau_2: MeanEstimate,
    pub p_decode: MeanEstimate,
    /// `E[ln(1+γ₁) | γ₁ < T_th]`.
    pub tau_m1: MeanEstimate,
    /// `E[ln(1+γ₁) | γ₁ ≥ T_th]`.
    pub tau_0: MeanEstimate,
    /// Cooperative rate with `γ₁` standing in for `γ₀`, as in the analysis.
    pub tau_c: MeanEstimate,
    /// Cooperative rate with the simulated `γ₀`.
    pub tau_c_true_gamma0: MeanEstimate,
    pub resampled: u64,
}

pub fn estimate_rates(rows: &[SampleRow], params: &ValidatedParams) -> McRates {
    let beta = params.beta;
    let coop = |r: &SampleRow, direct: f64| {
        if r.decoded {
            beta * direct.ln_1p() + (1.0 - beta) * r.gamma2.ln_1p()
        } else {
            r.gamma1.ln_1p()
        }
    };
    McRates {
        tau_nc: MeanEstimate::from_samples(rows.iter().map(|r| r.gamma.ln_1p())),
        tau_1: MeanEstimate::from_samples(rows.iter().map(|r| r.gamma1.ln_1p())),
        tau_2: MeanEstimate::from_samples(rows.iter().map(|r| r.gamma2.ln_1p())),
        p_decode: MeanEstimate::from_samples(rows.iter().map(|r| f64::from(u8::from(r.decoded)))),
        tau_m1: MeanEstimate::from_samples(
            rows.iter().filter(|r| !r.decoded).map(|r| r.gamma1.ln_1p()),
        ),
        tau_0: MeanEstimate::from_samples(
            rows.iter().filter(|r| r.decoded).map(|r| r.gamma1.ln_1p()),
        ),
        tau_c: MeanEstimate::from_samples(rows.iter().map(|r| coop(r, r.gamma1))),
        tau_c_true_gamma0: MeanEstimate::from_samples(rows.iter().map(|r| coop(r, r.gamma0))),
        resampled: rows.iter().map(|r| u64::from(r.resampled)).sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEnergyEfficiency {
    pub rates: McRates,
    /// Mean served non-cooperative UEs per cell.
    pub served_nc: MeanEstimate,
    /// Mean of `min(ρ, U_r)·min(M_r, U_c)`.
    pub served_coop: MeanEstimate,
    pub efficiency: EnergyEfficiencyResult,
}

/// Energy efficiency from simulated rates and simulated cell counts.
pub fn estimate_efficiency(
    rows: &[SampleRow],
    params: &ValidatedParams,
    model: &PowerModel,
) -> McEnergyEfficiency {
    let rates = estimate_rates(rows, params);
    let m_b1 = params.m_b1 as f64;
    let m_r = params.m_r as f64;
    let rho = params.derived().rho;
    let served_nc = MeanEstimate::from_samples(rows.iter().map(|r| m_b1.min(r.counts.u_nc as f64)));
    let served_coop = MeanEstimate::from_samples(
        rows.iter()
            .map(|r| rho.min(r.counts.u_r as f64) * m_r.min(r.counts.u_c as f64)),
    );
    let tau_s1 = served_nc.mean * rates.tau_nc.mean;
    let tau_s2 = served_coop.mean * rates.tau_c.mean;
    let p_bs = consumed_power(params.p_bs_total, SiteClass::Bs, model);
    let n = params.derived().n_relays_per_cell;
    let p_rs = if n > 0.0 {
        consumed_power(params.p_rs_total, SiteClass::Rs, model)
    } else {
        0.0
    };
    let denominator = p_bs + n * p_rs;
    let q = (tau_s1 + tau_s2) / denominator;
    McEnergyEfficiency {
        rates,
        served_nc,
        served_coop,
        efficiency: EnergyEfficiencyResult {
            q,
            q_bits: q / std::f64::consts::LN_2,
            tau_s1,
            tau_s2,
            denominator,
            p_consumed_bs: p_bs,
            p_consumed_rs: p_rs,
            n_relays: n,
        },
    }
}

pub fn estimate_rates_and_ee(
    params: &ValidatedParams,
    busy: &BusyProbabilities,
    model: &PowerModel,
    mc: &McConfig,
) -> Result<McEnergyEfficiency> {
    let rows = simulate(params, busy, mc)?;
    Ok(estimate_efficiency(&rows, params, model))
}
