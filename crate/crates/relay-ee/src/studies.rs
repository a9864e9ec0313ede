//! The three studies (SINR distributions, efficiency surface, offset-power
//! threshold) and the load-distribution dump.

use std::path::PathBuf;

use rayon::prelude::*;
use relay_ee_core::analytic_sinr::{BsLink, SinrCdf};
use relay_ee_core::cell_load::{busy_probabilities, cell_load};
use relay_ee_core::energy::{energy_efficiency, relay_free_baseline, EnergyEfficiencyResult};
use relay_ee_core::evaluation::{evaluate, rates};
use relay_ee_core::mc::{
    estimate_efficiency, link_estimate, simulate, write_samples, McLink, SampleRow,
};
use relay_ee_core::model::{dbm_to_watts, validate, watts_to_dbm, ValidatedParams};

use crate::config::StudyConfig;
use crate::sweep::StudyKind;
use crate::CliError;

/// Which estimators a run uses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    pub skip_analytic: bool,
    pub skip_mc: bool,
    /// Worker threads for the whole study; `None` uses the global pool.
    pub workers: Option<usize>,
    pub dump_samples: Option<PathBuf>,
}

impl RunOptions {
    pub fn analytic(&self) -> bool {
        !self.skip_analytic
    }

    pub fn mc(&self) -> bool {
        !self.skip_mc
    }

    pub fn methods(&self) -> &'static str {
        match (self.analytic(), self.mc()) {
            (true, true) => "analytic,mc",
            (true, false) => "analytic",
            (false, true) => "mc",
            (false, false) => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(&'static str),
    Empty,
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Self::Num(v) => format!("{v}"),
            Self::Text(s) => (*s).to_string(),
            Self::Empty => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfSummary {
    /// `sup_T |F_mc(T) − F(T)|` of the non-cooperative link over all samples.
    pub sup_noncoop: Option<f64>,
    /// Same for the BS-to-relay link.
    pub sup_bs_relay: Option<f64>,
    /// Two-sample sup distance between simulated `γ₀` and `γ₁`.
    pub sup_gamma0_gamma1: Option<f64>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSummary {
    pub q_opt: f64,
    pub q_opt_bits: f64,
    pub argmax: (f64, f64),
    /// Every grid line rises monotonically up to its own maximum.
    pub monotone_rise: bool,
    /// Largest relative fall after a line's maximum.
    pub max_drop_after_peak: f64,
    /// Connected regions within 0.1% of the maximum.
    pub near_max_regions: usize,
    /// `(max − min)/max` over the top decade of both axes.
    pub plateau_variation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCurve {
    pub p_r_dbm: f64,
    pub q: Vec<f64>,
    pub strictly_decreasing: bool,
    /// Offset scale where the curve meets the relay-free baseline.
    pub crossing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSummary {
    pub eta: Vec<f64>,
    pub q_baseline: f64,
    pub curves: Vec<ThresholdCurve>,
    /// The lowest-power curve lies strictly above every other curve.
    pub lowest_power_dominates: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Summary {
    Cdf(CdfSummary),
    Surface(SurfaceSummary),
    Threshold(ThresholdSummary),
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutput {
    pub study: &'static str,
    pub methods: &'static str,
    pub table: Table,
    pub summary: Summary,
}

impl StudyOutput {
    /// `key = value` result lines for the CSV header.
    pub fn result_lines(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6}"));
        match &self.summary {
            Summary::Cdf(s) => vec![
                format!("mc_samples = {}", s.samples),
                format!("sup_distance_noncoop = {}", opt(s.sup_noncoop)),
                format!("sup_distance_bs_relay = {}", opt(s.sup_bs_relay)),
                format!("sup_distance_gamma0_gamma1 = {}", opt(s.sup_gamma0_gamma1)),
            ],
            Summary::Surface(s) => vec![
                format!("q_opt_nats = {:.6}", s.q_opt),
                format!("q_opt_bits = {:.6}", s.q_opt_bits),
                format!("argmax_lambda_nc = {}", s.argmax.0),
                format!("argmax_lambda_c = {}", s.argmax.1),
                format!("monotone_rise = {}", s.monotone_rise),
                format!("max_drop_after_peak = {:.6}", s.max_drop_after_peak),
                format!("near_max_regions = {}", s.near_max_regions),
                format!("plateau_variation = {:.6}", s.plateau_variation),
            ],
            Summary::Threshold(s) => {
                let mut v = vec![format!("q_baseline_nats = {:.6}", s.q_baseline)];
                for c in &s.curves {
                    v.push(format!(
                        "eta_th[{} dBm] = {}",
                        c.p_r_dbm,
                        c.crossing
                            .map_or("none in sweep range".to_string(), |x| format!("{x:.4}"))
                    ));
                    v.push(format!(
                        "strictly_decreasing[{} dBm] = {}",
                        c.p_r_dbm, c.strictly_decreasing
                    ));
                }
                v.push(format!(
                    "lowest_power_dominates = {}",
                    s.lowest_power_dominates
                ));
                v
            }
            Summary::None => Vec::new(),
        }
    }
}

fn in_pool<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    match workers {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("cannot build worker pool: {e}")))?
            .install(f),
    }
}

pub fn run(kind: StudyKind, cfg: &StudyConfig, opts: &RunOptions) -> Result<StudyOutput, CliError> {
    in_pool(opts.workers, || match kind {
        StudyKind::Cdf => run_cdf_study(cfg, opts),
        StudyKind::EeSurface => run_ee_surface(cfg, opts),
        StudyKind::Threshold => run_threshold_study(cfg, opts),
    })
}

fn dump(rows: &[SampleRow], opts: &RunOptions) -> Result<(), CliError> {
    if let Some(path) = &opts.dump_samples {
        let file = std::fs::File::create(path)?;
        write_samples(rows, std::io::BufWriter::new(file))?;
    }
    Ok(())
}

fn num_or_empty(v: Option<f64>) -> Cell {
    v.map_or(Cell::Empty, Cell::Num)
}

/// Distribution functions of the non-cooperative, BS-to-relay and
/// BS-to-cooperative-UE SINRs over a dB grid.
pub fn run_cdf_study(cfg: &StudyConfig, opts: &RunOptions) -> Result<StudyOutput, CliError> {
    let params = &cfg.params;
    let busy = busy_probabilities(params)?;
    let g = &cfg.cdf;
    let t_db: Vec<f64> = (0..g.t_db_points)
        .map(|i| g.t_db_min + (g.t_db_max - g.t_db_min) * i as f64 / (g.t_db_points - 1) as f64)
        .collect();
    let noncoop = SinrCdf::bs(BsLink::noncoop(params, &busy), cfg.route);
    let bs_relay = SinrCdf::bs(BsLink::bs_to_relay(params, &busy), cfg.route);

    let analytic: Vec<Option<(f64, f64)>> = if opts.analytic() {
        t_db.par_iter()
            .map(|&db| {
                let t = 10f64.powf(db / 10.0);
                Ok(Some((noncoop.eval(t)?, bs_relay.eval(t)?)))
            })
            .collect::<Result<_, relay_ee_core::Error>>()?
    } else {
        vec![None; t_db.len()]
    };

    let mut summary = CdfSummary {
        sup_noncoop: None,
        sup_bs_relay: None,
        sup_gamma0_gamma1: None,
        samples: 0,
    };
    let mc = if opts.mc() {
        let rows = simulate(params, &busy, &cfg.mc)?;
        dump(&rows, opts)?;
        let t_th = params.derived().t_th;
        let est_nc = link_estimate(McLink::Noncoop, &rows, t_th);
        let est_0 = link_estimate(McLink::BsUe, &rows, t_th);
        let est_1 = link_estimate(McLink::BsRelay, &rows, t_th);
        summary.samples = rows.len();
        summary.sup_gamma0_gamma1 = Some(est_0.cdf.sup_distance_to(&est_1.cdf));
        if opts.analytic() {
            summary.sup_noncoop = Some(sup_against(&est_nc.cdf, &noncoop)?);
            summary.sup_bs_relay = Some(sup_against(&est_1.cdf, &bs_relay)?);
        }
        Some((est_nc, est_0, est_1))
    } else {
        None
    };

    let rows = t_db
        .iter()
        .zip(&analytic)
        .map(|(&db, a)| {
            let t = 10f64.powf(db / 10.0);
            let mc_col = |pick: fn(&(_, _, _)) -> &relay_ee_core::mc::McEstimate| {
                num_or_empty(mc.as_ref().map(|m| pick(m).cdf.eval(t)))
            };
            vec![
                Cell::Num(db),
                num_or_empty(a.map(|x| x.0)),
                num_or_empty(a.map(|x| x.1)),
                mc_col(|m| &m.0),
                mc_col(|m| &m.1),
                mc_col(|m| &m.2),
            ]
        })
        .collect();
    Ok(StudyOutput {
        study: StudyKind::Cdf.tag(),
        methods: opts.methods(),
        table: Table {
            columns: vec![
                "T_dB",
                "analytic_noncoop",
                "analytic_bs_rs",
                "mc_noncoop",
                "mc_gamma0",
                "mc_gamma1",
            ],
            rows,
        },
        summary: Summary::Cdf(summary),
    })
}

fn sup_against(
    ecdf: &relay_ee_core::mc::EmpiricalCdf,
    cdf: &SinrCdf,
) -> Result<f64, relay_ee_core::Error> {
    let values: Vec<f64> = ecdf
        .samples()
        .par_iter()
        .map(|&t| cdf.eval(t))
        .collect::<Result<_, _>>()?;
    let mut it = values.into_iter();
    Ok(ecdf.sup_distance(|_| it.next().expect("one value per sample")))
}

const ENERGY_COLUMNS: [&str; 9] = [
    "lambda_nc",
    "lambda_c",
    "eta",
    "p_r_dbm",
    "tau_s1",
    "tau_s2",
    "p_consumed_total_w",
    "q_nats",
    "q_bits",
];

fn energy_cells(params: &ValidatedParams, eta: f64, e: &EnergyEfficiencyResult) -> Vec<Cell> {
    vec![
        Cell::Num(params.lambda_nc),
        Cell::Num(params.lambda_c),
        Cell::Num(eta),
        Cell::Num(watts_to_dbm(params.p_rs_total)),
        Cell::Num(e.tau_s1),
        Cell::Num(e.tau_s2),
        Cell::Num(e.denominator),
        Cell::Num(e.q),
        Cell::Num(e.q_bits),
    ]
}

fn with_densities(
    base: &ValidatedParams,
    lambda_nc: f64,
    lambda_c: f64,
) -> Result<ValidatedParams, CliError> {
    let mut p = base.params().clone();
    p.lambda_nc = lambda_nc;
    p.lambda_c = lambda_c;
    Ok(validate(p)?)
}

/// Efficiency over a `(λ_nc, λ_c)` grid.
pub fn run_ee_surface(cfg: &StudyConfig, opts: &RunOptions) -> Result<StudyOutput, CliError> {
    let xs = cfg.surface.lambda_nc.values();
    let ys = cfg.surface.lambda_c.values();
    let grid: Vec<(f64, f64)> = xs
        .iter()
        .flat_map(|&x| ys.iter().map(move |&y| (x, y)))
        .collect();
    let eta = cfg.power.eta;
    let mut rows = Vec::new();
    let mut q_grid = None;

    if opts.analytic() {
        let results: Vec<(ValidatedParams, EnergyEfficiencyResult)> = grid
            .par_iter()
            .map(|&(x, y)| {
                let p = with_densities(&cfg.params, x, y)?;
                let e = evaluate(&p, &cfg.power, cfg.route)?.efficiency;
                Ok((p, e))
            })
            .collect::<Result<_, CliError>>()?;
        for (p, e) in &results {
            let mut r = energy_cells(p, eta, e);
            r.push(Cell::Text("analytic"));
            rows.push(r);
        }
        q_grid = Some(results.iter().map(|(_, e)| e.q).collect::<Vec<_>>());
    }
    if opts.mc() {
        let mut qs = Vec::with_capacity(grid.len());
        for &(x, y) in &grid {
            let p = with_densities(&cfg.params, x, y)?;
            let busy = busy_probabilities(&p)?;
            let sim = simulate(&p, &busy, &cfg.mc)?;
            let e = estimate_efficiency(&sim, &p, &cfg.power).efficiency;
            let mut r = energy_cells(&p, eta, &e);
            r.push(Cell::Text("mc"));
            rows.push(r);
            qs.push(e.q);
        }
        q_grid.get_or_insert(qs);
    }
    let summary = match q_grid {
        Some(q) => Summary::Surface(summarize_surface(&xs, &ys, &q)),
        None => Summary::None,
    };
    let mut columns = ENERGY_COLUMNS.to_vec();
    columns.push("method");
    Ok(StudyOutput {
        study: StudyKind::EeSurface.tag(),
        methods: opts.methods(),
        table: Table { columns, rows },
        summary,
    })
}

/// Shape diagnostics of a row-major `xs × ys` grid of efficiencies.
pub fn summarize_surface(xs: &[f64], ys: &[f64], q: &[f64]) -> SurfaceSummary {
    let (nx, ny) = (xs.len(), ys.len());
    let at = |i: usize, j: usize| q[i * ny + j];
    let (mut best, mut arg) = (f64::NEG_INFINITY, (0, 0));
    for i in 0..nx {
        for j in 0..ny {
            if at(i, j) > best {
                best = at(i, j);
                arg = (i, j);
            }
        }
    }

    let mut lines: Vec<Vec<f64>> = (0..nx)
        .map(|i| (0..ny).map(|j| at(i, j)).collect())
        .collect();
    lines.extend((0..ny).map(|j| (0..nx).map(|i| at(i, j)).collect::<Vec<_>>()));
    let mut monotone_rise = true;
    let mut max_drop = 0.0f64;
    for line in &lines {
        let (k, peak) = line
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc },
            );
        let tol = 1e-9 * peak.abs();
        if line[..=k].windows(2).any(|w| w[1] < w[0] - tol) {
            monotone_rise = false;
        }
        if peak > 0.0 {
            let low = line[k..].iter().cloned().fold(f64::INFINITY, f64::min);
            max_drop = max_drop.max((peak - low) / peak);
        }
    }

    let near = |i: usize, j: usize| at(i, j) >= best * (1.0 - 1e-3);
    let mut seen = vec![false; nx * ny];
    let mut regions = 0;
    for i in 0..nx {
        for j in 0..ny {
            if seen[i * ny + j] || !near(i, j) {
                continue;
            }
            regions += 1;
            let mut stack = vec![(i, j)];
            seen[i * ny + j] = true;
            while let Some((a, b)) = stack.pop() {
                let mut nb = Vec::with_capacity(4);
                if a > 0 {
                    nb.push((a - 1, b));
                }
                if a + 1 < nx {
                    nb.push((a + 1, b));
                }
                if b > 0 {
                    nb.push((a, b - 1));
                }
                if b + 1 < ny {
                    nb.push((a, b + 1));
                }
                for (c, d) in nb {
                    if !seen[c * ny + d] && near(c, d) {
                        seen[c * ny + d] = true;
                        stack.push((c, d));
                    }
                }
            }
        }
    }

    let x_top = xs[nx - 1] / 10.0;
    let y_top = ys[ny - 1] / 10.0;
    let top: Vec<f64> = (0..nx)
        .filter(|&i| xs[i] >= x_top * (1.0 - 1e-12))
        .flat_map(|i| {
            (0..ny)
                .filter(|&j| ys[j] >= y_top * (1.0 - 1e-12))
                .map(move |j| (i, j))
        })
        .map(|(i, j)| at(i, j))
        .collect();
    let (lo, hi) = top
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });

    SurfaceSummary {
        q_opt: best,
        q_opt_bits: best / std::f64::consts::LN_2,
        argmax: (xs[arg.0], ys[arg.1]),
        monotone_rise,
        max_drop_after_peak: max_drop,
        near_max_regions: regions,
        plateau_variation: if hi > 0.0 { (hi - lo) / hi } else { 0.0 },
    }
}

/// First `η` where `q(η)` falls to `baseline`, by linear interpolation.
pub fn crossing(eta: &[f64], q: &[f64], baseline: f64) -> Option<f64> {
    let d: Vec<f64> = q.iter().map(|v| v - baseline).collect();
    if d.first() == Some(&0.0) {
        return eta.first().copied();
    }
    (0..d.len().saturating_sub(1)).find_map(|k| {
        let (a, b) = (d[k], d[k + 1]);
        if (a > 0.0) != (b > 0.0) || b == 0.0 {
            Some(eta[k] + a / (a - b) * (eta[k + 1] - eta[k]))
        } else {
            None
        }
    })
}

/// Efficiency versus the relay offset scale `η` for each relay power, with
/// the relay-free baseline.
pub fn run_threshold_study(cfg: &StudyConfig, opts: &RunOptions) -> Result<StudyOutput, CliError> {
    let etas = cfg.threshold.eta.values();
    let powers = &cfg.threshold.p_r_dbm;
    let base_params = &cfg.params;
    let baseline = relay_free_baseline(base_params, &cfg.power, cfg.baseline, cfg.route)?;
    let per_power: Vec<ValidatedParams> = powers
        .iter()
        .map(|&dbm| {
            let mut p = base_params.params().clone();
            p.p_rs_total = dbm_to_watts(dbm);
            validate(p)
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    let mut curves_q: Option<Vec<Vec<f64>>> = None;
    let base_cells = |r: &mut Vec<Cell>| {
        r.push(Cell::Num(baseline.q));
        r.push(Cell::Num(baseline.q_bits));
    };

    if opts.analytic() {
        let evaluated: Vec<Vec<EnergyEfficiencyResult>> = per_power
            .par_iter()
            .map(|p| {
                let load = cell_load(p)?;
                let (tau_nc, coop) = rates(p, &load.busy, cfg.route)?;
                Ok(etas
                    .iter()
                    .map(|&eta| {
                        energy_efficiency(
                            p,
                            &load,
                            &cfg.power.with_eta(eta),
                            tau_nc.value,
                            coop.tau_c,
                        )
                    })
                    .collect())
            })
            .collect::<Result<_, relay_ee_core::Error>>()?;
        for (p, curve) in per_power.iter().zip(&evaluated) {
            for (&eta, e) in etas.iter().zip(curve) {
                let mut r = energy_cells(p, eta, e);
                base_cells(&mut r);
                r.push(Cell::Text("analytic"));
                rows.push(r);
            }
        }
        curves_q = Some(
            evaluated
                .iter()
                .map(|c| c.iter().map(|e| e.q).collect())
                .collect(),
        );
    }
    if opts.mc() {
        let mut qs = Vec::new();
        for p in &per_power {
            let busy = busy_probabilities(p)?;
            let sim = simulate(p, &busy, &cfg.mc)?;
            let mut curve = Vec::with_capacity(etas.len());
            for &eta in &etas {
                let e = estimate_efficiency(&sim, p, &cfg.power.with_eta(eta)).efficiency;
                let mut r = energy_cells(p, eta, &e);
                base_cells(&mut r);
                r.push(Cell::Text("mc"));
                rows.push(r);
                curve.push(e.q);
            }
            qs.push(curve);
        }
        curves_q.get_or_insert(qs);
    }

    let summary = match curves_q {
        Some(qs) => {
            let curves: Vec<ThresholdCurve> = powers
                .iter()
                .zip(&qs)
                .map(|(&p_r_dbm, q)| ThresholdCurve {
                    p_r_dbm,
                    strictly_decreasing: q.windows(2).all(|w| w[1] < w[0]),
                    crossing: crossing(&etas, q, baseline.q),
                    q: q.clone(),
                })
                .collect();
            let lowest = powers
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            let lowest_power_dominates = (0..etas.len()).all(|k| {
                curves
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != lowest)
                    .all(|(_, c)| curves[lowest].q[k] > c.q[k])
            });
            Summary::Threshold(ThresholdSummary {
                eta: etas.clone(),
                q_baseline: baseline.q,
                curves,
                lowest_power_dominates,
            })
        }
        None => Summary::None,
    };
    let mut columns = ENERGY_COLUMNS.to_vec();
    columns.extend(["q_baseline_nats", "q_baseline_bits", "method"]);
    Ok(StudyOutput {
        study: StudyKind::Threshold.tag(),
        methods: opts.methods(),
        table: Table { columns, rows },
        summary,
    })
}

/// Probabilities of the per-cell counts `U_nc`, `U_r` and the per-relay
/// count `U_c`, zero beyond each truncation point.
pub fn run_pmf_dump(cfg: &StudyConfig) -> Result<StudyOutput, CliError> {
    let load = cell_load(&cfg.params)?;
    let n = load
        .u_nc
        .pmf()
        .len()
        .max(load.u_r.pmf().len())
        .max(load.u_c.pmf().len());
    let rows = (0..n)
        .map(|i| {
            vec![
                Cell::Num(i as f64),
                Cell::Num(load.u_nc.prob(i)),
                Cell::Num(load.u_r.prob(i)),
                Cell::Num(load.u_c.prob(i)),
            ]
        })
        .collect();
    Ok(StudyOutput {
        study: "pmf",
        methods: "analytic",
        table: Table {
            columns: vec!["i", "p_unc", "p_ur", "p_uc"],
            rows,
        },
        summary: Summary::None,
    })
}
