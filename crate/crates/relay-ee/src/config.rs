//! Flat key-value study configuration.
//!
//! Every key names one model, power-model, simulation or grid field. Powers
//! may be given in watts or with a `_dbm` suffix. The subchannel split is
//! mandatory: either `m_b1` and `m_b2`, or `rho` (then `m_b2 = rho·m_r`).

use std::collections::BTreeMap;
use std::path::Path;

use relay_ee_core::analytic_sinr::CdfRoute;
use relay_ee_core::energy::{BaselineAllocation, PowerModel};
use relay_ee_core::mc::McConfig;
use relay_ee_core::model::{
    dbm_to_watts, validate, InterfererFading, NetworkParams, ValidatedParams,
};
use toml::Value;

use crate::sweep::{Axis, Scale};
use crate::CliError;

/// Keys accepted in a config file or through `--set`.
pub const KEYS: &[&str] = &[
    "lambda_b",
    "lambda_r",
    "lambda_c",
    "lambda_nc",
    "p_bs_total",
    "p_bs_total_dbm",
    "p_rs_total",
    "p_rs_total_dbm",
    "m_total",
    "m_b",
    "m_r",
    "m_b1",
    "m_b2",
    "rho",
    "r_relay",
    "alpha",
    "mu",
    "noise",
    "noise_dbm",
    "beta",
    "r_th",
    "interferer_fading",
    "a_b",
    "b_b",
    "a_r",
    "b_r",
    "eta",
    "seed",
    "mc_realizations",
    "window_scale",
    "route",
    "baseline",
    "t_db_min",
    "t_db_max",
    "t_db_points",
    "lambda_nc_min",
    "lambda_nc_max",
    "lambda_nc_points",
    "lambda_nc_scale",
    "lambda_c_min",
    "lambda_c_max",
    "lambda_c_points",
    "lambda_c_scale",
    "eta_min",
    "eta_max",
    "eta_points",
    "p_r_dbm",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CdfGrid {
    pub t_db_min: f64,
    pub t_db_max: f64,
    pub t_db_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    pub lambda_nc: Axis,
    pub lambda_c: Axis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid {
    pub eta: Axis,
    pub p_r_dbm: Vec<f64>,
}

/// A fully resolved study configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub params: ValidatedParams,
    pub power: PowerModel,
    pub mc: McConfig,
    pub route: CdfRoute,
    pub baseline: BaselineAllocation,
    pub cdf: CdfGrid,
    pub surface: SurfaceGrid,
    pub threshold: ThresholdGrid,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn as_f64(key: &str, v: &Value) -> Result<f64, CliError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(bad(key, format!("expected a number, got {other}"))),
    }
}

fn as_u64(key: &str, v: &Value) -> Result<u64, CliError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        other => Err(bad(
            key,
            format!("expected a non-negative integer, got {other}"),
        )),
    }
}

fn as_u32(key: &str, v: &Value) -> Result<u32, CliError> {
    u32::try_from(as_u64(key, v)?).map_err(|e| bad(key, e))
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str, CliError> {
    v.as_str()
        .ok_or_else(|| bad(key, format!("expected a string, got {v}")))
}

/// Raw key-value pairs, later entries overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, Value>,
}

impl RawConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, CliError> {
        let table: toml::Table = s.parse().map_err(|e| CliError::Config(format!("{e}")))?;
        let mut raw = Self::default();
        for (k, v) in table {
            raw.set(&k, v)?;
        }
        Ok(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn set(&mut self, key: &str, value: Value) -> Result<(), CliError> {
        if !KEYS.contains(&key) {
            return Err(bad(key, "unknown key"));
        }
        if matches!(value, Value::Table(_)) {
            return Err(bad(key, "nested tables are not supported"));
        }
        // a power given one way replaces the other spelling
        for (a, b) in [
            ("p_bs_total", "p_bs_total_dbm"),
            ("p_rs_total", "p_rs_total_dbm"),
            ("noise", "noise_dbm"),
        ] {
            if key == a {
                self.entries.remove(b);
            } else if key == b {
                self.entries.remove(a);
            }
        }
        if key == "rho" {
            self.entries.remove("m_b1");
            self.entries.remove("m_b2");
        } else if key == "m_b1" || key == "m_b2" {
            self.entries.remove("rho");
        }
        self.entries.insert(key.to_string(), value);
        Ok(())
    }

    /// Applies `key=value`, the value in TOML syntax (bare words are strings).
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
        let key = key.trim();
        let value = value.trim();
        let parsed = format!("v = {value}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(value.to_string()));
        self.set(key, parsed)
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key)
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        self.get(key).map_or(Ok(default), |v| as_f64(key, v))
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        self.get(key)
            .map_or(Ok(default as u64), |v| as_u64(key, v))
            .map(|v| v as usize)
    }

    fn power(&self, watts: &str, dbm: &str, default: f64) -> Result<f64, CliError> {
        match (self.get(watts), self.get(dbm)) {
            (Some(v), _) => as_f64(watts, v),
            (None, Some(v)) => as_f64(dbm, v).map(dbm_to_watts),
            (None, None) => Ok(default),
        }
    }

    fn axis(
        &self,
        name: &str,
        min: f64,
        max: f64,
        points: usize,
        scale: Scale,
    ) -> Result<Axis, CliError> {
        let scale = match self.get(&format!("{name}_scale")) {
            None => scale,
            Some(v) => match as_str(name, v)? {
                "linear" => Scale::Linear,
                "log" => Scale::Log,
                other => {
                    return Err(bad(
                        name,
                        format!("scale must be linear or log, got {other}"),
                    ))
                }
            },
        };
        let axis = Axis {
            name: name.to_string(),
            min: self.f64_or(&format!("{name}_min"), min)?,
            max: self.f64_or(&format!("{name}_max"), max)?,
            points: self.usize_or(&format!("{name}_points"), points)?,
            scale,
        };
        axis.validate()?;
        Ok(axis)
    }

    /// Resolves against the built-in defaults and validates the model.
    pub fn resolve(&self) -> Result<StudyConfig, CliError> {
        let d = NetworkParams::reference();
        let mut p = NetworkParams {
            lambda_b: self.f64_or("lambda_b", d.lambda_b)?,
            lambda_r: self.f64_or("lambda_r", d.lambda_r)?,
            lambda_c: self.f64_or("lambda_c", d.lambda_c)?,
            lambda_nc: self.f64_or("lambda_nc", d.lambda_nc)?,
            p_bs_total: self.power("p_bs_total", "p_bs_total_dbm", d.p_bs_total)?,
            p_rs_total: self.power("p_rs_total", "p_rs_total_dbm", d.p_rs_total)?,
            m_total: self
                .get("m_total")
                .map_or(Ok(d.m_total), |v| as_u32("m_total", v))?,
            m_b: self.get("m_b").map_or(Ok(d.m_b), |v| as_u32("m_b", v))?,
            m_r: self.get("m_r").map_or(Ok(d.m_r), |v| as_u32("m_r", v))?,
            m_b1: 0,
            m_b2: 0,
            r_relay: self.f64_or("r_relay", d.r_relay)?,
            alpha: self.f64_or("alpha", d.alpha)?,
            mu: self.f64_or("mu", d.mu)?,
            noise: self.power("noise", "noise_dbm", d.noise)?,
            beta: self.f64_or("beta", d.beta)?,
            r_th: self.f64_or("r_th", d.r_th)?,
            interferer_fading: match self.get("interferer_fading") {
                None => InterfererFading::default(),
                Some(v) => match as_str("interferer_fading", v)? {
                    "exponential" => InterfererFading::Exponential,
                    "unit-deterministic" => InterfererFading::UnitDeterministic,
                    other => {
                        return Err(bad(
                            "interferer_fading",
                            format!("expected exponential or unit-deterministic, got {other}"),
                        ))
                    }
                },
            },
        };
        match (self.get("rho"), self.get("m_b1"), self.get("m_b2")) {
            (Some(rho), _, _) => {
                let rho = as_f64("rho", rho)?;
                let m_b2 = rho * f64::from(p.m_r);
                if !(rho > 0.0 && (m_b2 - m_b2.round()).abs() < 1e-9) {
                    return Err(bad(
                        "rho",
                        format!("rho·m_r must be a positive integer, got {m_b2}"),
                    ));
                }
                p.m_b2 = m_b2.round() as u32;
                p.m_b1 = p.m_b.saturating_sub(p.m_b2);
            }
            (None, Some(a), Some(b)) => {
                p.m_b1 = as_u32("m_b1", a)?;
                p.m_b2 = as_u32("m_b2", b)?;
            }
            _ => {
                return Err(CliError::Config(
                    "the subchannel split is required: give m_b1 and m_b2, or rho".into(),
                ))
            }
        }
        let params = validate(p)?;

        let dp = PowerModel::default();
        let power = PowerModel {
            a_b: self.f64_or("a_b", dp.a_b)?,
            b_b: self.f64_or("b_b", dp.b_b)?,
            a_r: self.f64_or("a_r", dp.a_r)?,
            b_r: self.f64_or("b_r", dp.b_r)?,
            eta: self.f64_or("eta", dp.eta)?,
        };
        power.validate()?;

        let dm = McConfig::default();
        let mc = McConfig {
            n_realizations: self.usize_or("mc_realizations", dm.n_realizations)?,
            seed: self
                .get("seed")
                .map_or(Ok(dm.seed), |v| as_u64("seed", v))?,
            window_scale: self.f64_or("window_scale", dm.window_scale)?,
            workers: None,
            guard: dm.guard,
        };
        mc.validate()?;

        let route = match self.get("route").map(|v| as_str("route", v)).transpose()? {
            None | Some("closed-form") => CdfRoute::ClosedForm,
            Some("general") => CdfRoute::General,
            Some(other) => {
                return Err(bad(
                    "route",
                    format!("expected general or closed-form, got {other}"),
                ))
            }
        };
        if route == CdfRoute::ClosedForm
            && !(params.alpha == 4.0 && params.interferer_fading == InterfererFading::Exponential)
        {
            return Err(bad(
                "route",
                "closed-form needs alpha = 4 and exponential interferer fading",
            ));
        }
        let baseline = match self
            .get("baseline")
            .map(|v| as_str("baseline", v))
            .transpose()?
        {
            None | Some("all-subchannels") => BaselineAllocation::AllSubchannels,
            Some("bs-subchannels") => BaselineAllocation::BsSubchannels,
            Some(other) => {
                return Err(bad(
                    "baseline",
                    format!("expected all-subchannels or bs-subchannels, got {other}"),
                ))
            }
        };

        let cdf = CdfGrid {
            t_db_min: self.f64_or("t_db_min", -20.0)?,
            t_db_max: self.f64_or("t_db_max", 40.0)?,
            t_db_points: self.usize_or("t_db_points", 61)?,
        };
        if !(cdf.t_db_points >= 2 && cdf.t_db_max > cdf.t_db_min) {
            return Err(bad(
                "t_db_points",
                "need at least 2 points and t_db_max > t_db_min",
            ));
        }
        let surface = SurfaceGrid {
            lambda_nc: self.axis("lambda_nc", 1e-7, 1.0, 15, Scale::Log)?,
            lambda_c: self.axis("lambda_c", 1e-7, 1.0, 15, Scale::Log)?,
        };
        let p_r_dbm = match self.get("p_r_dbm") {
            None => vec![24.0, 33.0, 38.0],
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| as_f64("p_r_dbm", v))
                .collect::<Result<_, _>>()?,
            Some(v) => vec![as_f64("p_r_dbm", v)?],
        };
        if p_r_dbm.is_empty() {
            return Err(bad("p_r_dbm", "need at least one RS power"));
        }
        let threshold = ThresholdGrid {
            eta: self.axis("eta", 0.5, 1.5, 41, Scale::Linear)?,
            p_r_dbm,
        };
        Ok(StudyConfig {
            params,
            power,
            mc,
            route,
            baseline,
            cdf,
            surface,
            threshold,
        })
    }
}

impl StudyConfig {
    /// `key = value` lines recording every resolved field, in a fixed order.
    pub fn resolved_lines(&self) -> Vec<String> {
        let p = self.params.params();
        let fading = match p.interferer_fading {
            InterfererFading::Exponential => "exponential",
            InterfererFading::UnitDeterministic => "unit-deterministic",
        };
        let route = match self.route {
            CdfRoute::General => "general",
            CdfRoute::ClosedForm => "closed-form",
        };
        let baseline = match self.baseline {
            BaselineAllocation::AllSubchannels => "all-subchannels",
            BaselineAllocation::BsSubchannels => "bs-subchannels",
        };
        let axis = |a: &Axis| {
            format!(
                "{}..{} ({} points, {})",
                a.min,
                a.max,
                a.points,
                match a.scale {
                    Scale::Linear => "linear",
                    Scale::Log => "log",
                }
            )
        };
        vec![
            format!("lambda_b = {}", p.lambda_b),
            format!("lambda_r = {}", p.lambda_r),
            format!("lambda_c = {}", p.lambda_c),
            format!("lambda_nc = {}", p.lambda_nc),
            format!("p_bs_total = {}", p.p_bs_total),
            format!("p_rs_total = {}", p.p_rs_total),
            format!("m_total = {}", p.m_total),
            format!("m_b = {}", p.m_b),
            format!("m_r = {}", p.m_r),
            format!("m_b1 = {}", p.m_b1),
            format!("m_b2 = {}", p.m_b2),
            format!("rho = {}", self.params.derived().rho),
            format!("r_relay = {}", p.r_relay),
            format!("alpha = {}", p.alpha),
            format!("mu = {}", p.mu),
            format!("noise = {}", p.noise),
            format!("beta = {}", p.beta),
            format!("r_th = {}", p.r_th),
            format!("t_th = {}", self.params.derived().t_th),
            format!("interferer_fading = {fading}"),
            format!("a_b = {}", self.power.a_b),
            format!("b_b = {}", self.power.b_b),
            format!("a_r = {}", self.power.a_r),
            format!("b_r = {}", self.power.b_r),
            format!("eta = {}", self.power.eta),
            format!("seed = {}", self.mc.seed),
            format!("mc_realizations = {}", self.mc.n_realizations),
            format!("window_scale = {}", self.mc.window_scale),
            format!("route = {route}"),
            format!("baseline = {baseline}"),
            format!(
                "t_db = {}..{} ({} points)",
                self.cdf.t_db_min, self.cdf.t_db_max, self.cdf.t_db_points
            ),
            format!("lambda_nc axis = {}", axis(&self.surface.lambda_nc)),
            format!("lambda_c axis = {}", axis(&self.surface.lambda_c)),
            format!("eta axis = {}", axis(&self.threshold.eta)),
            format!("p_r_dbm = {:?}", self.threshold.p_r_dbm),
        ]
    }
}
