//! Network parameters, unit conversions and validation.
//!
//! Everything is SI internally: meters, watts, densities in points per m².
//! Rates are carried in nats per channel use; dBm and bits only appear at the
//! configuration and reporting boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Fading law applied to interference links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InterfererFading {
    /// Power fading `g ~ exp(mu)`, the same law as the serving link.
    #[default]
    Exponential,
    /// `g = 1` on every interference link.
    UnitDeterministic,
}

/// All model constants of a relay-assisted downlink network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// BS density, points per m².
    pub lambda_b: f64,
    /// RS density, points per m².
    pub lambda_r: f64,
    /// Density of cooperative UEs inside RS discs, points per m².
    pub lambda_c: f64,
    /// Density of non-cooperative UEs, points per m².
    pub lambda_nc: f64,
    /// Total BS radiated power, watts.
    pub p_bs_total: f64,
    /// Total RS radiated power, watts.
    pub p_rs_total: f64,
    pub m_total: u32,
    pub m_b: u32,
    pub m_r: u32,
    /// Subchannels for non-cooperative BS transmissions.
    pub m_b1: u32,
    /// Subchannels for BS transmissions towards relays and their UEs.
    pub m_b2: u32,
    /// RS coverage radius, meters.
    pub r_relay: f64,
    /// Pathloss exponent.
    pub alpha: f64,
    /// Rayleigh fading rate parameter.
    pub mu: f64,
    /// Noise power, watts.
    pub noise: f64,
    /// Coded-cooperation parameter, fraction of the codeword sent in the first phase.
    pub beta: f64,
    /// Target rate for the relay to decode, bits per channel use.
    pub r_th: f64,
    pub interferer_fading: InterfererFading,
}

impl NetworkParams {
    /// Reference configuration: the default system table with the
    /// cooperative partition ratio set to one (`m_b2 = m_r`).
    pub fn reference() -> Self {
        Self {
            lambda_b: 1e-5,
            lambda_r: 9e-5,
            lambda_c: 8e-4,
            lambda_nc: 1e-4,
            p_bs_total: dbm_to_watts(43.0),
            p_rs_total: dbm_to_watts(33.0),
            m_total: 300,
            m_b: 285,
            m_r: 15,
            m_b1: 270,
            m_b2: 15,
            r_relay: 20.0,
            alpha: 4.0,
            mu: 1.0,
            noise: dbm_to_watts(-80.0),
            beta: 0.6,
            r_th: 0.5,
            interferer_fading: InterfererFading::Exponential,
        }
    }

    /// Sets `m_b2 = rho * m_r` and gives the rest of `m_b` to `m_b1`.
    pub fn with_rho(mut self, rho: u32) -> Self {
        self.m_b2 = rho * self.m_r;
        self.m_b1 = self.m_b.saturating_sub(self.m_b2);
        self
    }

    /// The cooperative partition ratio `m_b2 / m_r`, kept as an exact fraction.
    pub fn rho(&self) -> Rho {
        Rho {
            num: self.m_b2,
            den: self.m_r,
        }
    }
}

/// Exact rational `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rho {
    pub num: u32,
    pub den: u32,
}

impl Rho {
    pub fn value(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }
}

/// Quantities derived once from validated parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    /// Per-subchannel BS transmit power, watts.
    pub p_b: f64,
    /// Per-subchannel RS transmit power, watts.
    pub p_r: f64,
    /// Relay decode SINR threshold, `2^(r_th / beta) - 1`.
    pub t_th: f64,
    /// Mean number of relays per cell, `lambda_r / lambda_b`.
    pub n_relays_per_cell: f64,
    pub rho: f64,
}

/// Parameters that passed [`validate`], with derived quantities attached.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedParams {
    params: NetworkParams,
    derived: DerivedParams,
}

impl ValidatedParams {
    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn derived(&self) -> &DerivedParams {
        &self.derived
    }

    pub fn into_inner(self) -> NetworkParams {
        self.params
    }
}

impl std::ops::Deref for ValidatedParams {
    type Target = NetworkParams;

    fn deref(&self) -> &NetworkParams {
        &self.params
    }
}

struct Checker {
    violations: Vec<Violation>,
}

impl Checker {
    fn require(&mut self, ok: bool, field: &'static str, rule: &str, observed: impl ToString) {
        if !ok {
            self.violations.push(Violation {
                field,
                rule: rule.to_string(),
                observed: observed.to_string(),
            });
        }
    }
}

/// Checks every model invariant and attaches [`DerivedParams`].
///
/// All violations are collected, not just the first one.
pub fn validate(params: NetworkParams) -> Result<ValidatedParams> {
    let p = &params;
    let mut c = Checker {
        violations: Vec::new(),
    };

    for (name, v) in [
        ("lambda_r", p.lambda_r),
        ("lambda_c", p.lambda_c),
        ("lambda_nc", p.lambda_nc),
    ] {
        c.require(
            v.is_finite() && v >= 0.0,
            name,
            "density must be finite and >= 0",
            v,
        );
    }
    c.require(
        p.lambda_b.is_finite() && p.lambda_b > 0.0,
        "lambda_b",
        "BS density must be > 0",
        p.lambda_b,
    );
    c.require(
        p.p_bs_total.is_finite() && p.p_bs_total > 0.0,
        "p_bs_total",
        "power must be > 0",
        p.p_bs_total,
    );
    c.require(
        p.p_rs_total.is_finite() && p.p_rs_total > 0.0,
        "p_rs_total",
        "power must be > 0",
        p.p_rs_total,
    );
    c.require(
        p.alpha.is_finite() && p.alpha > 2.0,
        "alpha",
        "alpha must exceed 2",
        p.alpha,
    );
    c.require(p.mu.is_finite() && p.mu > 0.0, "mu", "mu must be > 0", p.mu);
    c.require(
        p.noise.is_finite() && p.noise >= 0.0,
        "noise",
        "noise must be >= 0",
        p.noise,
    );
    c.require(
        p.beta.is_finite() && p.beta > 0.0 && p.beta <= 1.0,
        "beta",
        "beta must lie in (0, 1]",
        p.beta,
    );
    c.require(
        p.r_th.is_finite() && p.r_th >= 0.0,
        "r_th",
        "target rate must be >= 0",
        p.r_th,
    );
    c.require(
        p.r_relay.is_finite() && p.r_relay > 0.0,
        "r_relay",
        "relay radius must be > 0",
        p.r_relay,
    );
    for (name, v) in [("m_b1", p.m_b1), ("m_b2", p.m_b2), ("m_r", p.m_r)] {
        c.require(
            v >= 1,
            name,
            "partition must hold at least one subchannel",
            v,
        );
    }
    c.require(
        u64::from(p.m_b1) + u64::from(p.m_b2) == u64::from(p.m_b),
        "m_b",
        "m_b1 + m_b2 must equal m_b",
        format!("{} + {} vs {}", p.m_b1, p.m_b2, p.m_b),
    );
    c.require(
        u64::from(p.m_b) + u64::from(p.m_r) == u64::from(p.m_total),
        "m_total",
        "m_b + m_r must equal m_total",
        format!("{} + {} vs {}", p.m_b, p.m_r, p.m_total),
    );

    if !c.violations.is_empty() {
        return Err(Error::InvalidParams(c.violations));
    }

    let derived = DerivedParams {
        p_b: p.p_bs_total / f64::from(p.m_b),
        p_r: p.p_rs_total / f64::from(p.m_r),
        t_th: (p.r_th / p.beta).exp2() - 1.0,
        n_relays_per_cell: p.lambda_r / p.lambda_b,
        rho: p.rho().value(),
    };
    Ok(ValidatedParams { params, derived })
}
