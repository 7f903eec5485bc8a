//! The four subcommands. Each returns a [`Report`] with a JSON body and CSV rows.

use std::fs::File;
use std::io::BufWriter;

use packetize::energy::{ecr, optimize_energy_under_delay};
use packetize::model::{expected_delay, interarrival_moments, service_moments, stability_report, utilization};
use packetize::optimizer::{delay_at, optimal_interval};
use packetize::sim::{run_simulation, run_simulation_traced, write_trace_csv};
use packetize::{DelayBreakdown, Error, Mode, SimulationResult, SystemParams};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, SweepVar};
use crate::error::CliError;
use crate::output::{round12, Report};

fn r(x: f64) -> f64 {
    round12(x)
}

fn ro(x: Option<f64>) -> Option<f64> {
    x.map(round12)
}

/// ECR is defined for efficient mode; an overflow leaves it blank.
fn ecr_if_defined(p: &SystemParams) -> Option<f64> {
    (p.mode == Mode::Efficient).then(|| ecr(p).ok()).flatten()
}

#[derive(Serialize)]
struct AnalyzeRow {
    interval: f64,
    mu: f64,
    formation: f64,
    waiting: f64,
    service: f64,
    total: f64,
    utilization: f64,
    min_channel_rate: f64,
    service_mean: f64,
    service_second_moment: f64,
    service_cv: f64,
    interarrival_mean: f64,
    interarrival_cv: f64,
    ecr: Option<f64>,
}

pub fn analyze(cfg: &RunConfig) -> Result<Report, CliError> {
    let p = &cfg.params;
    let st = stability_report(p)?;
    if !st.is_stable {
        return Err(Error::Unstable {
            utilization: st.utilization,
            min_channel_rate: st.min_channel_rate,
        }
        .into());
    }
    let d = expected_delay(p)?;
    let s = service_moments(p)?;
    let tau = interarrival_moments(p);
    let e = ecr_if_defined(p);
    let row = AnalyzeRow {
        interval: r(p.interval),
        mu: r(p.mu()),
        formation: r(d.formation),
        waiting: r(d.waiting),
        service: r(d.service),
        total: r(d.total),
        utilization: r(st.utilization),
        min_channel_rate: r(st.min_channel_rate),
        service_mean: r(s.mean),
        service_second_moment: r(s.second_moment),
        service_cv: r(s.cv()),
        interarrival_mean: r(tau.mean),
        interarrival_cv: r(tau.cv()),
        ecr: ro(e),
    };
    let body = json!({
        "delay": d,
        "service": { "moments": s, "cv": s.cv() },
        "interarrival": { "moments": tau, "cv": tau.cv() },
        "stability": st,
        "ecr": e,
    });
    Report::new(body, &[row])
}

#[derive(Debug, Serialize)]
struct SweepRow {
    value: f64,
    interval: Option<f64>,
    stable: bool,
    utilization: Option<f64>,
    formation: Option<f64>,
    waiting: Option<f64>,
    service: Option<f64>,
    total: Option<f64>,
    service_cv: Option<f64>,
    ecr: Option<f64>,
    sim_formation: Option<f64>,
    sim_waiting: Option<f64>,
    sim_service: Option<f64>,
    sim_total: Option<f64>,
    sim_total_stderr: Option<f64>,
    sim_diverged: Option<bool>,
}

fn with_variable(p: &SystemParams, var: SweepVar, v: f64) -> SystemParams {
    match var {
        SweepVar::Interval => p.with_interval(v),
        SweepVar::Beta => p.with_ber(v),
        SweepVar::Header => p.with_header_bits(v as u32),
        SweepVar::Rate => p.with_channel_rate(v),
    }
}

fn sweep_point(cfg: &RunConfig, v: f64) -> Result<SweepRow, CliError> {
    let spec = cfg.sweep.expect("validated");
    let p = with_variable(&cfg.params, spec.variable, v);
    p.validate().map_err(|e| CliError::Config(format!("sweep value {v}: {e}")))?;
    let interval = if spec.optimize && spec.variable != SweepVar::Interval {
        match optimal_interval(&p) {
            Ok(o) => Some(o.t_star),
            Err(Error::EmptyRange) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        Some(p.interval)
    };
    let mut row = SweepRow {
        value: r(v),
        interval: ro(interval),
        stable: false,
        utilization: None,
        formation: None,
        waiting: None,
        service: None,
        total: None,
        service_cv: None,
        ecr: None,
        sim_formation: None,
        sim_waiting: None,
        sim_service: None,
        sim_total: None,
        sim_total_stderr: None,
        sim_diverged: None,
    };
    let Some(t) = interval else {
        return Ok(row);
    };
    let q = p.with_interval(t);
    row.utilization = utilization(&q).ok().map(r);
    row.ecr = ro(ecr_if_defined(&q));
    match expected_delay(&q) {
        Ok(d) => {
            row.stable = true;
            row.formation = Some(r(d.formation));
            row.waiting = Some(r(d.waiting));
            row.service = Some(r(d.service));
            row.total = Some(r(d.total));
            row.service_cv = service_moments(&q).ok().map(|m| r(m.cv()));
        }
        Err(Error::Unstable { .. }) | Err(Error::Overflow { .. }) => {}
        Err(e) => return Err(e.into()),
    }
    if spec.simulate {
        let s = run_simulation(&q, &cfg.sim_or_default())?;
        row.sim_formation = Some(r(s.mean_formation));
        row.sim_waiting = Some(r(s.mean_waiting));
        row.sim_service = Some(r(s.mean_service));
        row.sim_total = Some(r(s.mean_total));
        row.sim_total_stderr = Some(r(s.stderr_total));
        row.sim_diverged = Some(s.diverged);
    }
    Ok(row)
}

pub fn sweep(cfg: &RunConfig) -> Result<Report, CliError> {
    let values = cfg.sweep.expect("validated").values();
    // rows come back in sweep order whatever order the points finish in
    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&v| sweep_point(cfg, v))
        .collect::<Result<_, _>>()?;
    let body = json!({ "rows": serde_json::to_value(&rows)? });
    Report::new(body, &rows)
}

#[derive(Serialize)]
struct OptimizeRow {
    mode: &'static str,
    t_star: f64,
    objective: f64,
    delay_at_t_star: f64,
    binding: String,
    evaluations: Option<usize>,
    window_lower: f64,
    window_upper: f64,
}

fn snake<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|x| x.as_str().map(str::to_owned))
        .unwrap_or_default()
}

pub fn optimize(cfg: &RunConfig) -> Result<Report, CliError> {
    let p = &cfg.params;
    match cfg.d_max {
        None => {
            let o = optimal_interval(p)?;
            let row = OptimizeRow {
                mode: "delay",
                t_star: r(o.t_star),
                objective: r(o.delay_at_t_star.total),
                delay_at_t_star: r(o.delay_at_t_star.total),
                binding: snake(&o.method),
                evaluations: Some(o.evaluations),
                window_lower: r(o.stable_range.lower),
                window_upper: r(o.stable_range.upper),
            };
            let body = json!({
                "mode": "delay",
                "t_star": o.t_star,
                "objective": o.delay_at_t_star.total,
                "binding": o.method,
                "evaluations": o.evaluations,
                "result": o,
            });
            Report::new(body, &[row])
        }
        Some(d_max) => {
            let e = optimize_energy_under_delay(p, d_max)?;
            let delay = delay_at(p, e.t_star_constrained)?;
            let row = OptimizeRow {
                mode: "energy",
                t_star: r(e.t_star_constrained),
                objective: r(e.ecr_at_star),
                delay_at_t_star: r(delay),
                binding: snake(&e.binding),
                evaluations: None,
                window_lower: r(e.corner_points[0]),
                window_upper: r(e.corner_points[1]),
            };
            let body = json!({
                "mode": "energy",
                "t_star": e.t_star_constrained,
                "objective": e.ecr_at_star,
                "binding": e.binding,
                "delay_at_t_star": delay,
                "result": e,
            });
            Report::new(body, &[row])
        }
    }
}

#[derive(Serialize)]
struct SimulateRow {
    n_symbols: u64,
    n_packets: u64,
    mean_formation: f64,
    mean_waiting: f64,
    mean_service: f64,
    mean_total: f64,
    stderr_total: f64,
    mean_packet_waiting: f64,
    mean_packet_service: f64,
    mean_retransmissions: f64,
    empirical_utilization: f64,
    diverged: bool,
    analytic_formation: Option<f64>,
    analytic_waiting: Option<f64>,
    analytic_service: Option<f64>,
    analytic_total: Option<f64>,
    rel_err_formation: Option<f64>,
    rel_err_waiting: Option<f64>,
    rel_err_service: Option<f64>,
    rel_err_total: Option<f64>,
}

fn relative_errors(s: &SimulationResult, d: &DelayBreakdown) -> DelayBreakdown {
    let e = |sim: f64, model: f64| (sim - model) / model;
    // the model's waiting and service means are per packet; the symbol
    // averages weight long packets more
    DelayBreakdown {
        formation: e(s.mean_formation, d.formation),
        waiting: e(s.mean_packet_waiting, d.waiting),
        service: e(s.mean_packet_service, d.service),
        total: e(s.mean_total, d.total),
    }
}

/// Runs the simulator. The returned error, if any, is reported after the
/// output has been written.
pub fn simulate(cfg: &RunConfig) -> Result<(Report, Option<CliError>), CliError> {
    let p = &cfg.params;
    let sim = cfg.sim_or_default();
    let s = match &cfg.trace_path {
        Some(path) => {
            let (s, trace) = run_simulation_traced(p, &sim)?;
            write_trace_csv(&trace.packets, BufWriter::new(File::create(path)?))?;
            s
        }
        None => run_simulation(p, &sim)?,
    };
    let analytic = expected_delay(p).ok();
    let rel = analytic.as_ref().map(|d| relative_errors(&s, d));
    let row = SimulateRow {
        n_symbols: s.n_symbols,
        n_packets: s.n_packets,
        mean_formation: r(s.mean_formation),
        mean_waiting: r(s.mean_waiting),
        mean_service: r(s.mean_service),
        mean_total: r(s.mean_total),
        stderr_total: r(s.stderr_total),
        mean_packet_waiting: r(s.mean_packet_waiting),
        mean_packet_service: r(s.mean_packet_service),
        mean_retransmissions: r(s.mean_retransmissions),
        empirical_utilization: r(s.empirical_utilization),
        diverged: s.diverged,
        analytic_formation: ro(analytic.map(|d| d.formation)),
        analytic_waiting: ro(analytic.map(|d| d.waiting)),
        analytic_service: ro(analytic.map(|d| d.service)),
        analytic_total: ro(analytic.map(|d| d.total)),
        rel_err_formation: ro(rel.map(|d| d.formation)),
        rel_err_waiting: ro(rel.map(|d| d.waiting)),
        rel_err_service: ro(rel.map(|d| d.service)),
        rel_err_total: ro(rel.map(|d| d.total)),
    };
    let body = json!({ "result": s, "analytic": analytic, "relative_error": rel });
    let deferred = (cfg.require_stable && s.diverged).then_some(CliError::Diverged(s.empirical_utilization));
    Ok((Report::new(body, &[row])?, deferred))
}
