//! One-call analytic evaluation of a parameter set: loads, rates and
//! energy efficiency.

use serde::Serialize;

use crate::analytic_coop::{coop_rate, CoopRateBreakdown};
use crate::analytic_sinr::{BsLink, CdfRoute, RateResult};
use crate::cell_load::{cell_load, BusyProbabilities, CellLoad};
use crate::energy::{energy_efficiency, EnergyEfficiencyResult, PowerModel};
use crate::error::Result;
use crate::model::ValidatedParams;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub busy: BusyProbabilities,
    pub tau_nc: RateResult,
    pub coop: CoopRateBreakdown,
    pub efficiency: EnergyEfficiencyResult,
}

/// Rates of both user classes for given loads.
pub fn rates(
    params: &ValidatedParams,
    busy: &BusyProbabilities,
    route: CdfRoute,
) -> Result<(RateResult, CoopRateBreakdown)> {
    let link = BsLink::noncoop(params, busy);
    let tau_nc = match route {
        CdfRoute::General => link.mean_rate()?,
        CdfRoute::ClosedForm => link.mean_rate_special()?,
    };
    Ok((tau_nc, coop_rate(params, busy, route)?))
}

pub fn evaluate_with_load(
    params: &ValidatedParams,
    load: &CellLoad,
    model: &PowerModel,
    route: CdfRoute,
) -> Result<Evaluation> {
    let (tau_nc, coop) = rates(params, &load.busy, route)?;
    let efficiency = energy_efficiency(params, load, model, tau_nc.value, coop.tau_c);
    Ok(Evaluation {
        busy: load.busy,
        tau_nc,
        coop,
        efficiency,
    })
}

pub fn evaluate(
    params: &ValidatedParams,
    model: &PowerModel,
    route: CdfRoute,
) -> Result<Evaluation> {
    let load = cell_load(params)?;
    evaluate_with_load(params, &load, model, route)
}
