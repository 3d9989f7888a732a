//! Config-driven experiments: single optimizations, parameter sweeps, the
//! two-TLS table, random-target statistics and pulse analysis. Every file
//! written carries the code version and the SHA-256 of the configuration.

mod config;
mod output;

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{
    Axis, ControlSection, Experiment, FileConfig, NonmarkovSection, OptimizationSection, QuditSection,
    RandomTargetsSection, SweepSection, TlsSection,
};
pub use output::{num, read_pulse_csv, write_csv, write_pulse_csv, Provenance, PULSE_HEADER, VERSION};

use crate::error::{Error, Result};
use crate::grape::{derive_seed, objective, optimize, OptimizationResult, StopReason};
use crate::lindblad::{average_fidelity, process_fidelity, reduced_channel, PiecewiseControl};
use crate::model::build_operators;
use crate::nonmarkov::{determinant_trace, DeterminantTrace};

/// Error of the best constant level shift in the absence of TLS coupling;
/// an optimized pulse must land below it to count as exploiting the TLS.
pub const BASELINE_ERROR: f64 = 0.40;

pub const MAX_AXES: usize = 2;

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

/// Result of [`run_optimize`].
#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub result: OptimizationResult,
    pub determinant: DeterminantTrace,
    pub beats_baseline: bool,
}

#[derive(Serialize)]
struct Summary<'a> {
    tlsctl_version: &'a str,
    config_sha256: &'a str,
    final_error: f64,
    baseline_error: f64,
    beats_baseline: bool,
    iterations: usize,
    stop_reason: StopReason,
    best_start: usize,
    start_errors: &'a [f64],
    gradient_norm_final: f64,
    wall_time_s: f64,
    markovian: bool,
    nonmarkovian_intervals_ns: Vec<[f64; 2]>,
}

/// Optimizes the configured target and writes `pulse.csv`, `history.csv`,
/// `determinant.csv` and `summary.toml` into `out`.
pub fn run_optimize(cfg: &FileConfig, workers: usize, out: &Path) -> Result<OptimizeOutcome> {
    let exp = cfg.experiment()?;
    let ops = build_operators(&exp.model)?;
    let result = pool(workers)?.install(|| optimize(&ops, &exp.optimization, exp.ramp.as_ref()))?;
    let determinant = determinant_trace(&ops, &result.best_control, cfg.nonmarkov.samples)?;
    let outcome = OptimizeOutcome {
        beats_baseline: result.final_error < BASELINE_ERROR,
        result,
        determinant,
    };

    create_dir(out)?;
    let hash = cfg.hash();
    let prov = Provenance::new(hash.clone());
    let r = &outcome.result;
    write_pulse_csv(&out.join("pulse.csv"), &prov, &r.best_control, cfg.frequency_convention)?;
    let history: Vec<Vec<String>> = r
        .error_history
        .iter()
        .enumerate()
        .map(|(i, e)| vec![i.to_string(), num(*e)])
        .collect();
    write_csv(&out.join("history.csv"), &prov, &["iteration", "error"], &history)?;
    write_determinant_csv(&out.join("determinant.csv"), &prov, &outcome.determinant)?;
    let summary = Summary {
        tlsctl_version: VERSION,
        config_sha256: &hash,
        final_error: r.final_error,
        baseline_error: BASELINE_ERROR,
        beats_baseline: outcome.beats_baseline,
        iterations: r.iterations,
        stop_reason: r.stop_reason,
        best_start: r.best_start,
        start_errors: &r.start_errors,
        gradient_norm_final: r.gradient_norm_final,
        wall_time_s: r.wall_time,
        markovian: outcome.determinant.nonmarkovian_intervals.is_empty(),
        nonmarkovian_intervals_ns: outcome
            .determinant
            .nonmarkovian_intervals
            .iter()
            .map(|&(a, b)| [a, b])
            .collect(),
    };
    let text = toml::to_string(&summary).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(out.join("summary.toml"), text)?;
    Ok(outcome)
}

pub fn write_determinant_csv(path: &Path, prov: &Provenance, tr: &DeterminantTrace) -> Result<()> {
    let rows: Vec<Vec<String>> = tr
        .times
        .iter()
        .zip(&tr.det_abs)
        .map(|(t, d)| {
            let backflow = tr.nonmarkovian_intervals.iter().any(|&(a, b)| *t > a && *t <= b);
            vec![num(*t), num(*d), u8::from(backflow).to_string()]
        })
        .collect();
    write_csv(path, prov, &["t_ns", "det_abs", "increasing"], &rows)
}

/// Outcome of one grid point; failures are kept as messages so one bad
/// point does not abort a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub index: usize,
    pub seed: u64,
    pub outcome: std::result::Result<PointSuccess, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSuccess {
    pub final_error: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
}

impl PointResult {
    pub fn error(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|s| s.final_error)
    }

    fn columns(&self) -> Vec<String> {
        match &self.outcome {
            Ok(s) => vec![
                num(s.final_error),
                s.iterations.to_string(),
                format!("{:?}", s.stop_reason),
                "ok".into(),
            ],
            Err(msg) => vec![String::new(), String::new(), String::new(), format!("failed: {msg}")],
        }
    }
}

const POINT_COLUMNS: [&str; 5] = ["seed", "final_error", "iterations", "stop_reason", "status"];

fn run_point(cfg: &FileConfig) -> Result<PointSuccess> {
    let exp = cfg.experiment()?;
    let ops = build_operators(&exp.model)?;
    let r = optimize(&ops, &exp.optimization, exp.ramp.as_ref())?;
    Ok(PointSuccess {
        final_error: r.final_error,
        iterations: r.iterations,
        stop_reason: r.stop_reason,
    })
}

/// Optimizes every configuration, giving point `k` the seed
/// `derive_seed(global_seed, k)`. Results are in input order whatever the
/// worker count.
pub fn run_points(configs: Vec<FileConfig>, global_seed: u64, workers: usize) -> Result<Vec<PointResult>> {
    let jobs: Vec<(usize, u64, FileConfig)> = configs
        .into_iter()
        .enumerate()
        .map(|(k, mut c)| {
            let seed = derive_seed(global_seed, k as u64);
            c.optimization.seed = seed;
            (k, seed, c)
        })
        .collect();
    Ok(pool(workers)?.install(|| {
        jobs.into_par_iter()
            .map(|(index, seed, c)| PointResult {
                index,
                seed,
                outcome: run_point(&c).map_err(|e| e.to_string()),
            })
            .collect()
    }))
}

/// One row of a sweep: the axis values and the optimization outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub params: Vec<f64>,
    pub point: PointResult,
}

/// Cartesian grid over the configured axes, first axis outermost.
pub fn sweep_grid(cfg: &FileConfig) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let axes = match &cfg.sweep {
        Some(s) => &s.axes,
        None => return Err(Error::config("sweep", "missing [sweep] section")),
    };
    if axes.is_empty() || axes.len() > MAX_AXES {
        return Err(Error::config("sweep.axes", format!("need 1 to {MAX_AXES} axes, got {}", axes.len())));
    }
    let mut grid: Vec<Vec<f64>> = vec![Vec::new()];
    for a in axes {
        if a.values.is_empty() {
            return Err(Error::config(format!("sweep.axes.{}", a.name), "no values"));
        }
        grid = grid
            .into_iter()
            .flat_map(|p| {
                a.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    Ok((axes.iter().map(|a| a.name.clone()).collect(), grid))
}

/// Runs the sweep and, when `out` is given, writes `sweep.csv` there.
pub fn run_sweep(cfg: &FileConfig, workers: usize, out: Option<&Path>) -> Result<Vec<SweepRow>> {
    let (names, grid) = sweep_grid(cfg)?;
    let mut configs = Vec::with_capacity(grid.len());
    for p in &grid {
        let mut c = cfg.clone();
        c.sweep = None;
        for (name, &v) in names.iter().zip(p) {
            c.set(name, v)?;
        }
        configs.push(c);
    }
    let points = run_points(configs, cfg.optimization.seed, workers)?;
    let rows: Vec<SweepRow> = grid
        .into_iter()
        .zip(points)
        .map(|(params, point)| SweepRow { params, point })
        .collect();
    if let Some(out) = out {
        create_dir(out)?;
        let mut header: Vec<&str> = vec!["index"];
        header.extend(names.iter().map(String::as_str));
        header.extend(POINT_COLUMNS);
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                let mut v = vec![r.point.index.to_string()];
                v.extend(r.params.iter().map(|x| num(*x)));
                v.push(r.point.seed.to_string());
                v.extend(r.point.columns());
                v
            })
            .collect();
        write_csv(&out.join("sweep.csv"), &Provenance::new(cfg.hash()), &header, &body)?;
    }
    Ok(rows)
}

/// Second-TLS parameters: spacing below the first TLS (MHz), coupling
/// (MHz), T1 (ns), and the reference gate error for that setting.
pub const TABLE1: [(f64, f64, f64, f64); 12] = [
    (50.0, 40.0, 2000.0, 3.076e-2),
    (50.0, 40.0, 200.0, 4.052e-2),
    (50.0, 40.0, 40.0, 7.867e-2),
    (50.0, 10.0, 2000.0, 3.196e-2),
    (50.0, 10.0, 200.0, 3.564e-2),
    (50.0, 10.0, 40.0, 4.241e-2),
    (450.0, 40.0, 2000.0, 1.659e-2),
    (450.0, 40.0, 200.0, 1.652e-2),
    (450.0, 40.0, 40.0, 1.758e-2),
    (450.0, 10.0, 2000.0, 1.663e-2),
    (450.0, 10.0, 200.0, 1.674e-2),
    (450.0, 10.0, 40.0, 1.675e-2),
];

/// Reference error with only the first TLS present.
pub const SINGLE_TLS_REFERENCE: f64 = 1.652e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub spacing_mhz: f64,
    pub coupling_mhz: f64,
    pub t1_ns: f64,
    pub reference_error: f64,
    pub point: PointResult,
}

/// `base` with a second TLS `spacing_mhz` below the first.
pub fn with_second_tls(base: &FileConfig, spacing_mhz: f64, coupling_mhz: f64, t1_ns: f64) -> Result<FileConfig> {
    let first = base
        .tls
        .first()
        .ok_or_else(|| Error::config("tls", "the table needs a first TLS"))?;
    let mut c = base.clone();
    c.sweep = None;
    c.tls.truncate(1);
    c.tls.push(TlsSection {
        detuning_mhz: first.detuning_mhz + spacing_mhz,
        coupling_mhz,
        t1_ns,
        t2_star_ns: None,
    });
    Ok(c)
}

/// Adds each second TLS of the table to `base`, optimizes, and writes
/// `table1.csv` when `out` is given.
pub fn run_table1(base: &FileConfig, workers: usize, out: Option<&Path>) -> Result<Vec<Table1Row>> {
    let configs = TABLE1
        .iter()
        .map(|&(d, s, t, _)| with_second_tls(base, d, s, t))
        .collect::<Result<Vec<_>>>()?;
    let points = run_points(configs, base.optimization.seed, workers)?;
    let rows: Vec<Table1Row> = TABLE1
        .iter()
        .zip(points)
        .map(|(&(spacing_mhz, coupling_mhz, t1_ns, reference_error), point)| Table1Row {
            spacing_mhz,
            coupling_mhz,
            t1_ns,
            reference_error,
            point,
        })
        .collect();
    if let Some(out) = out {
        create_dir(out)?;
        let mut header = vec!["index", "spacing_mhz", "coupling_mhz", "t1_ns", "reference_error"];
        header.extend(POINT_COLUMNS);
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                let mut v = vec![
                    r.point.index.to_string(),
                    num(r.spacing_mhz),
                    num(r.coupling_mhz),
                    num(r.t1_ns),
                    num(r.reference_error),
                    r.point.seed.to_string(),
                ];
                v.extend(r.point.columns());
                v
            })
            .collect();
        write_csv(&out.join("table1.csv"), &Provenance::new(base.hash()), &header, &body)?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomTargetsReport {
    /// Target seeds, in order.
    pub target_seeds: Vec<u64>,
    pub points: Vec<PointResult>,
    /// Error of the configured target under the same budget.
    pub reference: PointResult,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    /// `max / min` over the random targets.
    pub spread: f64,
    /// `max / reference`.
    pub ratio_to_reference: f64,
}

/// Optimizes `count` random diagonal targets plus the configured target as
/// reference. Failed points make the statistics NaN.
pub fn run_random_targets(cfg: &FileConfig, workers: usize, out: Option<&Path>) -> Result<RandomTargetsReport> {
    let rt = &cfg.random_targets;
    if rt.count == 0 {
        return Err(Error::config("random_targets.count", "must be at least 1"));
    }
    let target_seeds: Vec<u64> = (0..rt.count).map(|k| derive_seed(rt.seed, k as u64)).collect();
    let mut configs = vec![cfg.clone()];
    for s in &target_seeds {
        let mut c = cfg.clone();
        c.optimization.target = format!("random:{s}");
        configs.push(c);
    }
    configs[0].experiment()?;
    let mut points = run_points(configs, cfg.optimization.seed, workers)?;
    let reference = points.remove(0);
    let errors: Vec<f64> = points.iter().map(|p| p.error().unwrap_or(f64::NAN)).collect();
    let (min, max, median) = stats(&errors);
    let ref_err = reference.error().unwrap_or(f64::NAN);
    let report = RandomTargetsReport {
        spread: max / min,
        ratio_to_reference: max / ref_err,
        target_seeds,
        points,
        reference,
        min,
        max,
        median,
    };
    if let Some(out) = out {
        create_dir(out)?;
        let mut header = vec!["index", "target"];
        header.extend(POINT_COLUMNS);
        let mut body = Vec::new();
        let mut push = |p: &PointResult, target: String| {
            let mut v = vec![p.index.to_string(), target, p.seed.to_string()];
            v.extend(p.columns());
            body.push(v);
        };
        push(&report.reference, cfg.optimization.target.clone());
        for (p, s) in report.points.iter().zip(&report.target_seeds) {
            push(p, format!("random:{s}"));
        }
        let prov = Provenance::new(cfg.hash());
        write_csv(&out.join("random_targets.csv"), &prov, &header, &body)?;
        let stats = [
            ("min", min),
            ("max", max),
            ("median", median),
            ("spread", report.spread),
            ("reference_error", ref_err),
            ("ratio_to_reference", report.ratio_to_reference),
        ];
        let rows: Vec<Vec<String>> = stats.iter().map(|(k, v)| vec![k.to_string(), num(*v)]).collect();
        write_csv(&out.join("random_targets_summary.csv"), &prov, &["statistic", "value"], &rows)?;
    }
    Ok(report)
}

/// `(min, max, median)`; any NaN input yields NaN throughout.
pub fn stats(values: &[f64]) -> (f64, f64, f64) {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let median = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
    (s[0], s[n - 1], median)
}

/// Figures of merit of a given pulse for the configured model and target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub gate_error: f64,
    pub process_fidelity: f64,
    pub average_fidelity: f64,
    pub channel_trace_defect: f64,
    pub channel_det_abs: f64,
}

pub fn simulate(cfg: &FileConfig, control: &PiecewiseControl) -> Result<SimulationReport> {
    let model = cfg.model()?;
    let target = cfg.target()?;
    let ops = build_operators(&model)?;
    let ch = reduced_channel(&ops, control, control.total_time)?;
    Ok(SimulationReport {
        gate_error: objective(&ops, control, &target)?,
        process_fidelity: process_fidelity(&ch, &target),
        average_fidelity: average_fidelity(&ch, &target)?,
        channel_trace_defect: ch.trace_defect(),
        channel_det_abs: ch.determinant().norm(),
    })
}

/// Determinant trace of `control` (zero pulse when absent) for the
/// configured model.
pub fn run_nonmarkov(cfg: &FileConfig, control: Option<&PiecewiseControl>, out: Option<&Path>) -> Result<DeterminantTrace> {
    let model = cfg.model()?;
    let ops = build_operators(&model)?;
    let zero;
    let control = match control {
        Some(c) => c,
        None => {
            zero = PiecewiseControl::constant(cfg.control.gate_time_ns, cfg.n_slices()?, 0.0)?;
            &zero
        }
    };
    let tr = determinant_trace(&ops, control, cfg.nonmarkov.samples)?;
    if let Some(out) = out {
        create_dir(out)?;
        write_determinant_csv(&out.join("determinant.csv"), &Provenance::new(cfg.hash()), &tr)?;
    }
    Ok(tr)
}

#[cfg(test)]
mod tests;
