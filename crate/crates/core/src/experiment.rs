//! Experiment drivers shared by the CLI and the service. Each returns its
//! output files in memory; writing them is the caller's job.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::FilterKind;
use crate::noise::DiffWindow;
use crate::plot::{bar_panels, line_panels, BarPanel, LinePanel, Series};
use crate::provisioner::{LoopTelemetry, ProvisioningLoop, Topology};
use crate::scenario::{ControllerSettings, Scenario};
use crate::sim::{run_scenario, RunMetrics, ScenarioRun, StepRecord};
use crate::trace::{metrics_row, read_trace, write_metrics, write_table, write_trace};

pub const THREADS_ENV: &str = "PROVISIM_THREADS";

/// Output file name to contents.
pub type Files = BTreeMap<String, String>;

/// The six filter/topology combinations, SISO first.
pub fn all_variants() -> Vec<(FilterKind, Topology)> {
    Topology::ALL
        .iter()
        .flat_map(|&t| FilterKind::ALL.iter().map(move |&f| (f, t)))
        .collect()
}

pub fn variant_label(kind: FilterKind, topology: Topology) -> String {
    format!("{}-{}", kind.name(), topology.name())
}

/// Parses `kalman-siso` style labels; a bare filter name expands to both
/// topologies and `all` to every variant.
pub fn parse_variants(list: &[String]) -> Result<Vec<(FilterKind, Topology)>> {
    let mut out = Vec::new();
    for item in list.iter().flat_map(|s| s.split(',')).map(str::trim) {
        if item.is_empty() {
            continue;
        }
        if item.eq_ignore_ascii_case("all") {
            out.extend(all_variants());
            continue;
        }
        match item.split_once(['-', ':', '/']) {
            Some((f, t)) => out.push((f.parse()?, t.parse()?)),
            None => {
                let f: FilterKind = item.parse()?;
                out.extend(Topology::ALL.iter().map(|&t| (f, t)));
            }
        }
    }
    let mut seen = Vec::new();
    out.retain(|v| {
        let fresh = !seen.contains(v);
        seen.push(*v);
        fresh
    });
    Ok(out)
}

/// Runs `f` over `items` on a pool capped by `PROVISIM_THREADS`.
/// Results come back in input order.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| items.par_iter().map(f).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub run: ScenarioRun,
    pub files: Files,
}

pub fn run(s: &Scenario) -> Result<RunOutput> {
    s.validate()?;
    let spec = s.controller.spec()?;
    let run = run_scenario(&s.workload, &s.model, &spec, s.steps)?;
    let mut files = Files::new();
    files.insert("trace.csv".into(), write_trace(&run.records));
    files.insert("metrics.csv".into(), write_metrics(&run.metrics));
    let title = variant_label(spec.kind(), spec.topology);
    files.insert(
        "timeline.svg".into(),
        timeline_svg(&title, &run.records, s.model.slo_s),
    );
    Ok(RunOutput { run, files })
}

fn component_name(i: usize) -> String {
    match i {
        0 => "web (VM1)".into(),
        1 => "db (VM2)".into(),
        _ => format!("component {i}"),
    }
}

fn timeline_svg(title: &str, records: &[StepRecord], slo: f64) -> String {
    let n = records.first().map_or(0, |r| r.usage.len());
    let series = |f: &dyn Fn(&StepRecord) -> f64| -> Vec<(f64, f64)> {
        records.iter().map(|r| (r.k as f64, f(r))).collect()
    };
    let mut panels: Vec<LinePanel> = (0..n)
        .map(|i| LinePanel {
            title: format!("{title}: {}", component_name(i)),
            x_label: "sample".into(),
            y_label: "CPU %".into(),
            series: vec![
                Series::new("usage", series(&|r| r.usage[i])),
                Series::new("allocation", series(&|r| r.allocation[i])).dashed(),
                Series::new("demand", series(&|r| r.demand[i])),
            ],
            ..LinePanel::default()
        })
        .collect();
    let worst = records.iter().map(|r| r.mrt).fold(0.0, f64::max);
    panels.push(LinePanel {
        title: format!("{title}: mean response time"),
        x_label: "sample".into(),
        y_label: "mRT (s)".into(),
        series: vec![Series::new("mRT", series(&|r| r.mrt))],
        reference: Some((slo, "SLO".into())),
        log_y: worst > 20.0 * slo,
    });
    line_panels(&panels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub controller: String,
    pub filter: FilterKind,
    pub topology: Topology,
    pub workload_seed: u64,
    pub metrics: RunMetrics,
    pub telemetry: LoopTelemetry,
    pub flagged_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareOutput {
    pub rows: Vec<ComparisonRow>,
    pub files: Files,
}

pub const COMPARISON_COLUMNS: [&str; 10] = [
    "controller",
    "filter",
    "topology",
    "workload_seed",
    "CR",
    "avg_vm1_cpu",
    "avg_vm2_cpu",
    "AmRT",
    "SLOO",
    "flagged_steps",
];

/// Runs every variant on the scenario's workload and seed. θ and σ fall back
/// to each variant's own default unless the scenario pins them.
pub fn compare(s: &Scenario, variants: &[(FilterKind, Topology)]) -> Result<CompareOutput> {
    if variants.is_empty() {
        return Err(Error::usage("compare needs at least one controller"));
    }
    s.validate()?;
    let specs = variants
        .iter()
        .map(|&(f, t)| s.controller.spec_for(f, t))
        .collect::<Result<Vec<_>>>()?;
    let runs = par_map(&specs, |spec| {
        run_scenario(&s.workload, &s.model, spec, s.steps)
    })?;
    let rows: Vec<ComparisonRow> = variants
        .iter()
        .zip(runs)
        .map(|(&(filter, topology), run)| ComparisonRow {
            controller: variant_label(filter, topology),
            filter,
            topology,
            workload_seed: s.workload.seed,
            metrics: run.metrics,
            telemetry: run.telemetry,
            flagged_steps: run.flagged_steps,
        })
        .collect();

    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![
                r.controller.clone(),
                r.filter.name().to_string(),
                r.topology.name().to_string(),
                r.workload_seed.to_string(),
            ];
            cells.extend(metrics_row(&r.metrics));
            cells.push(r.flagged_steps.to_string());
            cells
        })
        .collect();
    let bars = |f: fn(&RunMetrics) -> f64| -> Vec<(String, f64)> {
        rows.iter().map(|r| (r.controller.clone(), f(&r.metrics))).collect()
    };
    let svg = bar_panels(&[
        BarPanel {
            title: "Average mean response time".into(),
            y_label: "AmRT (s)".into(),
            bars: bars(|m| m.avg_mrt),
        },
        BarPanel {
            title: "SLO obedience".into(),
            y_label: "SLOO".into(),
            bars: bars(|m| m.slo_obedience),
        },
    ]);
    let mut files = Files::new();
    files.insert(
        "comparison.csv".into(),
        write_table(&COMPARISON_COLUMNS, &table),
    );
    files.insert("comparison.svg".into(), svg);
    Ok(CompareOutput { rows, files })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    C,
    Theta,
    Sigma,
    T,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::C => "c",
            SweepParam::Theta => "theta",
            SweepParam::Sigma => "sigma",
            SweepParam::T => "T",
        }
    }

    fn key(self) -> &'static str {
        match self {
            SweepParam::C => "controller.c",
            SweepParam::Theta => "controller.theta",
            SweepParam::Sigma => "controller.sigma",
            SweepParam::T => "controller.T",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "c" | "C" => Ok(SweepParam::C),
            "theta" => Ok(SweepParam::Theta),
            "sigma" => Ok(SweepParam::Sigma),
            "T" | "t" | "window" => Ok(SweepParam::T),
            other => Err(Error::usage(format!(
                "unknown sweep parameter '{other}' (c, theta, sigma, T)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub metrics: RunMetrics,
    pub flagged_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub parameter: SweepParam,
    pub rows: Vec<SweepRow>,
    pub files: Files,
}

pub const SWEEP_COLUMNS: [&str; 4] = ["value", "AmRT", "SLOO", "CR"];

/// One run per value on the scenario's seed, everything else held fixed.
pub fn sweep(s: &Scenario, param: SweepParam, values: &[f64]) -> Result<SweepOutput> {
    if values.is_empty() {
        return Err(Error::usage("sweep needs at least one value"));
    }
    match (param, s.controller.filter) {
        (SweepParam::Theta, f) if f != FilterKind::Hinf => {
            return Err(Error::usage(format!(
                "a theta sweep needs controller.filter = hinf, not {}",
                f.name()
            )))
        }
        (SweepParam::Sigma, f) if f != FilterKind::Mcc => {
            return Err(Error::usage(format!(
                "a sigma sweep needs controller.filter = mcc, not {}",
                f.name()
            )))
        }
        _ => {}
    }
    let points = values
        .iter()
        .map(|&v| {
            if param == SweepParam::T && (v.fract() != 0.0 || v < 1.0) {
                return Err(Error::usage(format!("T values must be positive integers, got {v}")));
            }
            let mut point = s.clone();
            point.apply(param.key(), &v.to_string())?;
            point.validate()?;
            Ok(point)
        })
        .collect::<Result<Vec<_>>>()?;
    let runs = par_map(&points, |p| {
        run_scenario(&p.workload, &p.model, &p.controller.spec()?, p.steps)
    })?;

    let rows: Vec<SweepRow> = values
        .iter()
        .zip(&runs)
        .map(|(&value, run)| SweepRow {
            value,
            metrics: run.metrics,
            flagged_steps: run.flagged_steps,
        })
        .collect();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.value.to_string(),
                r.metrics.avg_mrt.to_string(),
                r.metrics.slo_obedience.to_string(),
                r.metrics.completed_requests.to_string(),
            ]
        })
        .collect();
    let mut files = Files::new();
    files.insert("sweep.csv".into(), write_table(&SWEEP_COLUMNS, &table));
    files.insert(
        "sweep.svg".into(),
        line_panels(&[LinePanel {
            title: format!("AmRT vs {}", param.name()),
            x_label: param.name().into(),
            y_label: "AmRT (s)".into(),
            series: vec![Series::new(
                variant_label(s.controller.filter, s.controller.topology),
                rows.iter().map(|r| (r.value, r.metrics.avg_mrt)).collect(),
            )],
            reference: Some((s.model.slo_s, "SLO".into())),
            log_y: false,
        }]),
    );
    if param == SweepParam::T {
        files.insert(
            "variance.svg".into(),
            variance_svg(&rows, &runs)?,
        );
    }
    Ok(SweepOutput {
        parameter: param,
        rows,
        files,
    })
}

/// Windowed process-variance estimate of the web tier over time, one line
/// per window size, each computed from that run's own observations.
fn variance_svg(rows: &[SweepRow], runs: &[ScenarioRun]) -> Result<String> {
    let mut series = Vec::new();
    for (row, run) in rows.iter().zip(runs) {
        let mut w = DiffWindow::new(1, row.value as usize)?;
        let mut pts = Vec::new();
        for r in &run.records {
            w.push(&r.observation[..1])?;
            if w.is_full() {
                pts.push((r.k as f64, w.siso_variance(0)?));
            }
        }
        series.push(Series::new(format!("T = {}", row.value), pts));
    }
    Ok(line_panels(&[LinePanel {
        title: "Windowed process-variance estimate, web tier".into(),
        x_label: "sample".into(),
        y_label: "W estimate (pp^2)".into(),
        series,
        reference: None,
        log_y: true,
    }]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRow {
    pub k: u64,
    pub component: usize,
    pub observation: f64,
    /// Allocation in force during sample `k`.
    pub allocation: f64,
    /// Prior prediction made after observing sample `k`; absent when the
    /// controller failed that step.
    pub prediction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutput {
    pub rows: Vec<ReplayRow>,
    pub telemetry: LoopTelemetry,
    pub files: Files,
}

pub const REPLAY_COLUMNS: [&str; 5] = ["k", "component", "observation", "allocation", "prediction"];

/// Feeds a recorded observation column through a controller.
pub fn replay(trace_csv: &str, settings: &ControllerSettings) -> Result<ReplayOutput> {
    let trace = read_trace(trace_csv)?;
    if trace.components == 0 {
        return Err(Error::Schema("trace has no rows".into()));
    }
    let spec = settings.spec()?;
    let mut lp = ProvisioningLoop::new(spec.clone(), trace.components)?;
    let mut rows = Vec::new();
    for rec in &trace.records {
        let in_force = lp.allocation().to_vec();
        let prediction = lp.control_step(&rec.observation).ok().map(|d| d.prediction);
        for (i, &a) in in_force.iter().enumerate() {
            rows.push(ReplayRow {
                k: rec.k,
                component: i,
                observation: rec.observation[i],
                allocation: a,
                prediction: prediction.as_ref().map(|p| p[i]),
            });
        }
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                r.component.to_string(),
                r.observation.to_string(),
                r.allocation.to_string(),
                r.prediction.map_or(String::new(), |p| p.to_string()),
            ]
        })
        .collect();
    let label = variant_label(spec.kind(), spec.topology);
    let panels: Vec<LinePanel> = (0..trace.components)
        .map(|i| {
            let col = |f: &dyn Fn(&ReplayRow) -> f64| -> Vec<(f64, f64)> {
                rows.iter()
                    .filter(|r| r.component == i)
                    .map(|r| (r.k as f64, f(r)))
                    .collect()
            };
            LinePanel {
                title: format!("replay with {label}: {}", component_name(i)),
                x_label: "sample".into(),
                y_label: "CPU %".into(),
                series: vec![
                    Series::new("observation", col(&|r| r.observation)),
                    Series::new("allocation", col(&|r| r.allocation)).dashed(),
                ],
                ..LinePanel::default()
            }
        })
        .collect();
    let mut files = Files::new();
    files.insert("replay.csv".into(), write_table(&REPLAY_COLUMNS, &table));
    files.insert("replay.svg".into(), line_panels(&panels));
    Ok(ReplayOutput {
        rows,
        telemetry: lp.telemetry().clone(),
        files,
    })
}
