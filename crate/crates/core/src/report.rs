//! Runs a scenario end to end and writes the CSV artifacts.
//!
//! Every float is written with Rust's shortest round-trip formatting, so
//! the CSV files parse back to the exact in-memory values.

use std::fs;
use std::path::Path;
use std::time::Instant;

use csv::Writer;
use nalgebra::DVector;

use crate::dynamics::{trajectory, BoundSource, HammersteinOperator, Process};
use crate::engine::{
    certify_contraction, compute_l2, pullback_fibers, required_iterations, sweep_l2,
    ContractionCertificate, ErrorBudget,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::GridFunction;
use crate::model::Variant;
use crate::scenario::{ScenarioConfig, SemilinearConfig};

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberSummary {
    pub t: usize,
    pub sup_norm: f64,
    pub total: f64,
}

/// Outcome of one attractor computation.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub label: String,
    pub nodes: usize,
    pub theta: usize,
    pub certificate: ContractionCertificate,
    pub bound_source: BoundSource,
    /// Period product from the closed-form kernel bounds, when they exist.
    pub ell_closed_form: Option<f64>,
    pub budget: ErrorBudget,
    /// `l2` from the closed-form bounds in the configured mode.
    pub l2_closed_form: Option<f64>,
    /// Depth `S` implied by the closed-form `ell` and `l2`.
    pub steps_closed_form: Option<u64>,
    pub certified_error: f64,
    /// `max_t ||H_t(u*_t) - u*_{t+1}||`.
    pub invariance_defect: f64,
    /// `max_t ||u*_t - u*_{t+theta}||` with the second fiber computed forward.
    pub period_defect: f64,
    pub summaries: Vec<FiberSummary>,
    pub mean_total: f64,
    pub wall_time_secs: f64,
    pub warnings: Vec<String>,
}

impl RunReport {
    /// Key/value rows of `report.csv`.
    pub fn rows(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        vec![
            ("label", self.label.clone()),
            ("nodes", self.nodes.to_string()),
            ("theta", self.theta.to_string()),
            ("window", self.certificate.window.to_string()),
            (
                "bound_source",
                match self.bound_source {
                    BoundSource::Discrete => "discrete".into(),
                    BoundSource::ClosedForm => "closed-form".into(),
                },
            ),
            ("ell", fmt_f64(self.certificate.ell)),
            ("ell_closed_form", opt(self.ell_closed_form)),
            ("l2", fmt_f64(self.budget.l2)),
            ("l2_closed_form", opt(self.l2_closed_form)),
            ("tol", fmt_f64(self.budget.tol)),
            ("windows", self.budget.windows.to_string()),
            ("steps", self.budget.steps.to_string()),
            (
                "steps_closed_form",
                self.steps_closed_form.map(|s| s.to_string()).unwrap_or_default(),
            ),
            ("certified_error", fmt_f64(self.certified_error)),
            ("invariance_defect", fmt_f64(self.invariance_defect)),
            ("period_defect", fmt_f64(self.period_defect)),
            ("mean_total", fmt_f64(self.mean_total)),
            ("wall_time_secs", fmt_f64(self.wall_time_secs)),
            ("warnings", self.warnings.join("; ")),
        ]
    }
}

fn write_csv<P: AsRef<Path>>(path: P, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_states(path: &Path, start: i64, states: &[GridFunction]) -> Result<()> {
    let mut w = Writer::from_path(path)?;
    w.write_record(["t", "node", "x", "value"])?;
    for (k, u) in states.iter().enumerate() {
        let t = (start + k as i64).to_string();
        for (i, (&x, &v)) in u.grid().nodes().iter().zip(u.values()).enumerate() {
            w.write_record([t.as_str(), &i.to_string(), &fmt_f64(x), &fmt_f64(v)])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn closed_form_certificate(op: &HammersteinOperator, window: usize) -> Option<ContractionCertificate> {
    let lambdas = op.lipschitz_period(BoundSource::ClosedForm).ok()?;
    certify_contraction(&lambdas, window).ok()
}

/// Certifies, budgets and computes the periodic attractor of `cfg`.
///
/// With `out` set, writes `fibers.csv`, `totals.csv` and `report.csv` there.
pub fn run_attractor(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<RunReport> {
    run_attractor_with(cfg, out, Execution::default())
}

pub fn run_attractor_with(cfg: &ScenarioConfig, out: Option<&Path>, exec: Execution) -> Result<RunReport> {
    let clock = Instant::now();
    let mut op = cfg.operator()?;
    op.set_execution(exec);
    let theta = op.period();
    let u0 = cfg.initial.on_grid(&cfg.grid()?);

    let lambdas = op.lipschitz_period(cfg.certify)?;
    let cert = certify_contraction(&lambdas, theta)?;
    if !cert.is_valid() {
        return Err(Error::NoContraction { ell: cert.ell });
    }
    let l2 = sweep_l2(&op, &u0, cfg.certify)?;
    let budget = required_iterations(cert.ell, l2, cfg.tol, theta)?;

    let closed = closed_form_certificate(&op, theta);
    let l2_closed = compute_l2(&op, &u0, theta, cfg.l2_mode, BoundSource::ClosedForm).ok();
    let steps_closed = match (&closed, l2_closed) {
        (Some(c), Some(l2c)) if c.is_valid() => required_iterations(c.ell, l2c, cfg.tol, theta)
            .ok()
            .map(|b| b.steps),
        _ => None,
    };

    let fibers = pullback_fibers(&op, &cert, &budget, &u0, cfg.max_steps)?;
    let invariance_defect = fibers.invariance_defect(&op)?;
    let forward = fibers.forward_states(&op, (2 * theta).max(cfg.horizon) - 1)?;
    let period_defect = (0..theta)
        .map(|t| forward[t].sup_distance(&forward[t + theta]))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let summaries: Vec<FiberSummary> = fibers
        .fibers
        .iter()
        .enumerate()
        .map(|(t, u)| FiberSummary {
            t,
            sup_norm: u.sup_norm(),
            total: u.total_population(),
        })
        .collect();
    let mean_total = summaries.iter().map(|s| s.total).sum::<f64>() / theta as f64;

    let report = RunReport {
        label: cfg.label(),
        nodes: cfg.nodes,
        theta,
        certificate: cert,
        bound_source: cfg.certify,
        ell_closed_form: closed.map(|c| c.ell),
        budget,
        l2_closed_form: l2_closed,
        steps_closed_form: steps_closed,
        certified_error: fibers.certified_error,
        invariance_defect,
        period_defect,
        summaries,
        mean_total,
        wall_time_secs: clock.elapsed().as_secs_f64(),
        warnings: cfg.warnings(),
    };
    if let Some(dir) = out {
        write_run(dir, &report, &forward[..cfg.horizon])?;
    }
    Ok(report)
}

fn write_run(dir: &Path, report: &RunReport, states: &[GridFunction]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_states(&dir.join("fibers.csv"), 0, states)?;
    write_csv(
        dir.join("totals.csv"),
        &["t", "total", "sup_norm"],
        report
            .summaries
            .iter()
            .map(|s| vec![s.t.to_string(), fmt_f64(s.total), fmt_f64(s.sup_norm)]),
    )?;
    write_csv(
        dir.join("report.csv"),
        &["key", "value"],
        report.rows().into_iter().map(|(k, v)| vec![k.to_string(), v]),
    )
}

/// All four seasonal patterns run on the same scenario.
#[derive(Debug)]
pub struct Comparison {
    pub runs: Vec<(Variant, Result<RunReport>)>,
}

impl Comparison {
    /// Variant with the largest mean total population among successful runs.
    pub fn argmax(&self) -> Option<Variant> {
        self.runs
            .iter()
            .filter_map(|(v, r)| r.as_ref().ok().map(|r| (*v, r.mean_total)))
            .fold(None, |best: Option<(Variant, f64)>, (v, m)| match best {
                Some((_, bm)) if bm >= m => best,
                _ => Some((v, m)),
            })
            .map(|(v, _)| v)
    }

    pub fn means(&self) -> Vec<Option<f64>> {
        self.runs
            .iter()
            .map(|(_, r)| r.as_ref().ok().map(|r| r.mean_total))
            .collect()
    }

    /// First failure, if any run failed.
    pub fn first_error(&self) -> Option<&Error> {
        self.runs.iter().find_map(|(_, r)| r.as_ref().err())
    }
}

/// Runs the four seasonal patterns concurrently; failed variants are kept
/// alongside the successful ones. Writes per-variant subdirectories and
/// `comparison.csv` when `out` is set.
pub fn compare_inhomogeneities(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<Comparison> {
    let runs = Execution::default().map(&Variant::ALL, |&v| {
        let cfg = cfg.clone().with_variant(v);
        let dir = out.map(|d| d.join(v.label()));
        (v, run_attractor(&cfg, dir.as_deref()))
    });
    let cmp = Comparison { runs };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let best = cmp.argmax();
        write_csv(
            dir.join("comparison.csv"),
            &["variant", "mean_total", "certified_error", "steps", "argmax", "status"],
            cmp.runs.iter().map(|(v, r)| match r {
                Ok(r) => vec![
                    v.label().to_string(),
                    fmt_f64(r.mean_total),
                    fmt_f64(r.certified_error),
                    r.budget.steps.to_string(),
                    (best == Some(*v)).to_string(),
                    "ok".to_string(),
                ],
                Err(e) => vec![
                    v.label().to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    "false".to_string(),
                    e.to_string(),
                ],
            }),
        )?;
    }
    Ok(cmp)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzRow {
    pub t: usize,
    pub kernel_scale: f64,
    pub growth_lipschitz: f64,
    pub kernel_closed_form: Option<f64>,
    pub kernel_numeric: f64,
    pub lambda_closed_form: Option<f64>,
    pub lambda_numeric: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzTable {
    pub rows: Vec<LipschitzRow>,
    pub ell_closed_form: Option<f64>,
    pub ell_numeric: f64,
    pub steps_closed_form: Option<u64>,
    pub steps_numeric: Option<u64>,
}

/// Per-step Lipschitz constants over one period, closed form beside the
/// quadrature row sums, with the resulting `ell` and pullback depth `S`.
pub fn run_lipschitz_report(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<LipschitzTable> {
    let op = cfg.operator()?;
    let theta = op.period();
    let u0 = cfg.initial.on_grid(&cfg.grid()?);
    let rows: Vec<LipschitzRow> = (0..theta)
        .map(|t| {
            let ti = t as i64;
            LipschitzRow {
                t,
                kernel_scale: op.kernel().scale_at(ti),
                growth_lipschitz: op.growth().lipschitz(ti),
                kernel_closed_form: op.kernel_bound(ti, BoundSource::ClosedForm).ok(),
                kernel_numeric: op.kernel_row_sum(ti),
                lambda_closed_form: op.lipschitz_closed_form(ti).ok(),
                lambda_numeric: op.lipschitz_numeric(ti),
            }
        })
        .collect();
    let closed = closed_form_certificate(&op, theta);
    let numeric = certify_contraction(&op.lipschitz_period(BoundSource::Discrete)?, theta)?;
    let steps_closed = match &closed {
        Some(c) if c.is_valid() => compute_l2(&op, &u0, theta, cfg.l2_mode, BoundSource::ClosedForm)
            .and_then(|l2| required_iterations(c.ell, l2, cfg.tol, theta))
            .ok()
            .map(|b| b.steps),
        _ => None,
    };
    let steps_numeric = if numeric.is_valid() {
        sweep_l2(&op, &u0, BoundSource::Discrete)
            .and_then(|l2| required_iterations(numeric.ell, l2, cfg.tol, theta))
            .ok()
            .map(|b| b.steps)
    } else {
        None
    };
    let table = LipschitzTable {
        rows,
        ell_closed_form: closed.map(|c| c.ell),
        ell_numeric: numeric.ell,
        steps_closed_form: steps_closed,
        steps_numeric,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        write_csv(
            dir.join("lipschitz.csv"),
            &[
                "t",
                "kernel_scale",
                "growth_lipschitz",
                "kernel_closed_form",
                "kernel_numeric",
                "lambda_closed_form",
                "lambda_numeric",
            ],
            table.rows.iter().map(|r| {
                vec![
                    r.t.to_string(),
                    fmt_f64(r.kernel_scale),
                    fmt_f64(r.growth_lipschitz),
                    opt(r.kernel_closed_form),
                    fmt_f64(r.kernel_numeric),
                    opt(r.lambda_closed_form),
                    fmt_f64(r.lambda_numeric),
                ]
            }),
        )?;
        let steps = |s: Option<u64>| s.map(|s| s.to_string()).unwrap_or_default();
        write_csv(
            dir.join("lipschitz_summary.csv"),
            &["key", "value"],
            [
                vec!["ell_closed_form".into(), opt(table.ell_closed_form)],
                vec!["ell_numeric".into(), fmt_f64(table.ell_numeric)],
                vec!["steps_closed_form".into(), steps(table.steps_closed_form)],
                vec!["steps_numeric".into(), steps(table.steps_numeric)],
            ],
        )?;
    }
    Ok(table)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemilinearReport {
    pub period: usize,
    pub contraction: f64,
    pub fibers: Vec<DVector<f64>>,
    pub periods: u64,
    pub last_change: f64,
    pub wall_time_secs: f64,
}

/// Pullback fibers of a periodic semilinear system; writes `semilinear.csv`.
pub fn run_semilinear(cfg: &SemilinearConfig, out: Option<&Path>) -> Result<SemilinearReport> {
    let clock = Instant::now();
    let system = cfg.system()?;
    let limit = system.pullback_limit(0, cfg.tol, &cfg.initial)?;
    let report = SemilinearReport {
        period: system.period(),
        contraction: limit.contraction,
        fibers: limit.fibers.clone(),
        periods: limit.periods,
        last_change: limit.last_change,
        wall_time_secs: clock.elapsed().as_secs_f64(),
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_csv(
            dir.join("semilinear.csv"),
            &["t", "component", "value"],
            report.fibers.iter().enumerate().flat_map(|(t, f)| {
                f.iter()
                    .enumerate()
                    .map(move |(i, v)| vec![t.to_string(), i.to_string(), fmt_f64(*v)])
                    .collect::<Vec<_>>()
            }),
        )?;
    }
    Ok(report)
}

/// Forward trajectory from the initial condition at `t = 0`; writes
/// `trajectory.csv` (same columns as `fibers.csv`) and `totals.csv`.
pub fn simulate(cfg: &ScenarioConfig, steps: usize, out: Option<&Path>) -> Result<Vec<GridFunction>> {
    let op = cfg.operator()?;
    let u0 = cfg.initial.on_grid(op.grid());
    let seg = trajectory(&op, 0, steps, &u0)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_states(&dir.join("trajectory.csv"), 0, &seg.states)?;
        write_csv(
            dir.join("totals.csv"),
            &["t", "total", "sup_norm"],
            seg.states.iter().enumerate().map(|(t, u)| {
                vec![t.to_string(), fmt_f64(u.total_population()), fmt_f64(u.sup_norm())]
            }),
        )?;
    }
    Ok(seg.states)
}

#[derive(Debug)]
pub struct ConvergenceLevel {
    pub nodes: usize,
    pub result: Result<RunReport>,
}

/// Mean total population at each node count in `levels`.
pub fn convergence_study(
    cfg: &ScenarioConfig,
    levels: &[usize],
    out: Option<&Path>,
) -> Result<Vec<ConvergenceLevel>> {
    let study: Vec<ConvergenceLevel> = Execution::default().map(levels, |&n| ConvergenceLevel {
        nodes: n,
        result: run_attractor(&cfg.clone().with_nodes(n), None),
    });
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let mut prev: Option<f64> = None;
        let mut rows = Vec::new();
        for level in &study {
            match &level.result {
                Ok(r) => {
                    let change = prev.map(|p| fmt_f64((r.mean_total - p).abs())).unwrap_or_default();
                    rows.push(vec![
                        level.nodes.to_string(),
                        fmt_f64(r.mean_total),
                        change,
                        fmt_f64(r.certificate.ell),
                        r.budget.steps.to_string(),
                        "ok".to_string(),
                    ]);
                    prev = Some(r.mean_total);
                }
                Err(e) => {
                    rows.push(vec![
                        level.nodes.to_string(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        e.to_string(),
                    ]);
                    prev = None;
                }
            }
        }
        write_csv(
            dir.join("convergence.csv"),
            &["nodes", "mean_total", "change", "ell", "steps", "status"],
            rows,
        )?;
    }
    Ok(study)
}

/// Default semilinear demo when the scenario has no `[semilinear]` section.
pub fn semilinear_config(cfg: Option<&ScenarioConfig>) -> SemilinearConfig {
    cfg.and_then(|c| c.semilinear.clone())
        .unwrap_or_else(SemilinearConfig::scalar_demo)
}
