//! Consumed-power model and network energy efficiency.

use serde::{Deserialize, Serialize};

use crate::analytic_sinr::{BsLink, CdfRoute, FadingLaw, LinkTag};
use crate::cell_load::{busy_fraction, count_distribution_voronoi_covering, CellLoad};
use crate::error::{Error, Result};
use crate::model::ValidatedParams;

/// Affine map from radiated to consumed power per site,
/// `P̃ = a·P + b` with the RS offset scaled by `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub a_b: f64,
    /// BS offset, watts.
    pub b_b: f64,
    pub a_r: f64,
    /// RS offset before scaling, watts.
    pub b_r: f64,
    pub eta: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            a_b: 22.6,
            b_b: 412.4,
            a_r: 5.5,
            b_r: 32.0,
            eta: 1.0,
        }
    }
}

impl PowerModel {
    pub fn validate(&self) -> Result<()> {
        let ok = self.a_b > 0.0
            && self.a_r > 0.0
            && self.b_b >= 0.0
            && self.b_r >= 0.0
            && self.eta >= 0.0
            && [self.a_b, self.b_b, self.a_r, self.b_r, self.eta]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "power model needs positive slopes and non-negative offsets and eta, got {self:?}"
            )))
        }
    }

    pub fn with_eta(self, eta: f64) -> Self {
        Self { eta, ..self }
    }

    /// `η·b_r`.
    pub fn rs_offset(&self) -> f64 {
        self.eta * self.b_r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SiteClass {
    Bs,
    Rs,
}

/// Consumed power of a site radiating `radiated` watts.
pub fn consumed_power(radiated: f64, class: SiteClass, model: &PowerModel) -> f64 {
    match class {
        SiteClass::Bs => model.a_b * radiated + model.b_b,
        SiteClass::Rs => model.a_r * radiated + model.rs_offset(),
    }
}

/// Mean sum rate of one cell, split by user class, nats per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellThroughput {
    /// `E[min(M_b1, U_nc)]·τ_nc`.
    pub tau_s1: f64,
    /// `E[min(ρ, U_r)]·E[min(M_r, U_c)]·τ_c`.
    pub tau_s2: f64,
}

impl CellThroughput {
    pub fn total(&self) -> f64 {
        self.tau_s1 + self.tau_s2
    }
}

/// Cell throughput from the count distributions. The double sum over relay
/// and cooperative-UE counts factorises because the two counts are independent.
pub fn cell_throughput(
    params: &ValidatedParams,
    load: &CellLoad,
    tau_nc: f64,
    tau_c: f64,
) -> CellThroughput {
    let served_nc = load.u_nc.expected_min(f64::from(params.m_b1));
    let served_r = load.u_r.expected_min(params.derived().rho);
    let served_c = load.u_c.expected_min(f64::from(params.m_r));
    CellThroughput {
        tau_s1: served_nc * tau_nc,
        tau_s2: served_r * served_c * tau_c,
    }
}

/// Network energy efficiency and its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyEfficiencyResult {
    /// Nats per channel use per watt.
    pub q: f64,
    /// `q / ln 2`.
    pub q_bits: f64,
    pub tau_s1: f64,
    pub tau_s2: f64,
    /// `P̃_B + N·P̃_R`, watts.
    pub denominator: f64,
    pub p_consumed_bs: f64,
    pub p_consumed_rs: f64,
    /// Mean relays per cell, `λ_r/λ_b`.
    pub n_relays: f64,
}

fn assemble(throughput: CellThroughput, p_bs: f64, p_rs: f64, n: f64) -> EnergyEfficiencyResult {
    let denominator = p_bs + n * p_rs;
    let q = throughput.total() / denominator;
    EnergyEfficiencyResult {
        q,
        q_bits: q / std::f64::consts::LN_2,
        tau_s1: throughput.tau_s1,
        tau_s2: throughput.tau_s2,
        denominator,
        p_consumed_bs: p_bs,
        p_consumed_rs: p_rs,
        n_relays: n,
    }
}

/// `Q = (τ_s1 + τ_s2)/(P̃_B + N·P̃_R)`.
pub fn energy_efficiency(
    params: &ValidatedParams,
    load: &CellLoad,
    model: &PowerModel,
    tau_nc: f64,
    tau_c: f64,
) -> EnergyEfficiencyResult {
    let throughput = cell_throughput(params, load, tau_nc, tau_c);
    let p_bs = consumed_power(params.p_bs_total, SiteClass::Bs, model);
    let n = params.derived().n_relays_per_cell;
    let p_rs = if n > 0.0 {
        consumed_power(params.p_rs_total, SiteClass::Rs, model)
    } else {
        0.0
    };
    assemble(throughput, p_bs, p_rs, n)
}

/// Subchannels the relay-free network gives to its BSs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineAllocation {
    /// All `M` subchannels, power `P_B/M` each.
    #[default]
    AllSubchannels,
    /// Only the `M_b` BS subchannels, power `P_B/M_b` each.
    BsSubchannels,
}

/// Energy efficiency of the same BS layout without relays or cooperative
/// UEs, all BS subchannels serving non-cooperative UEs.
pub fn relay_free_baseline(
    params: &ValidatedParams,
    model: &PowerModel,
    allocation: BaselineAllocation,
    route: CdfRoute,
) -> Result<EnergyEfficiencyResult> {
    let m = match allocation {
        BaselineAllocation::AllSubchannels => params.m_total,
        BaselineAllocation::BsSubchannels => params.m_b,
    };
    let cap = f64::from(m);
    let u_nc = count_distribution_voronoi_covering(params.lambda_nc, params.lambda_b, m as usize)?;
    let p_busy = busy_fraction(&u_nc, cap);
    let link = BsLink {
        tag: LinkTag::BsNoncoop,
        lambda_b: params.lambda_b,
        p_busy,
        p_b: params.p_bs_total / cap,
        alpha: params.alpha,
        mu: params.mu,
        noise: params.noise,
        fading: FadingLaw::from_params(params),
    };
    let tau = match route {
        CdfRoute::General => link.mean_rate()?,
        CdfRoute::ClosedForm => link.mean_rate_special()?,
    };
    let throughput = CellThroughput {
        tau_s1: u_nc.expected_min(cap) * tau.value,
        tau_s2: 0.0,
    };
    let p_bs = consumed_power(params.p_bs_total, SiteClass::Bs, model);
    Ok(assemble(throughput, p_bs, 0.0, 0.0))
}
