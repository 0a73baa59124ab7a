//! CSV import/export of per-step simulation records and run metrics.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a trace
//! read back yields bit-identical values.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::sim::{RunMetrics, StepRecord};

pub const TRACE_COLUMNS: [&str; 9] = [
    "k",
    "component",
    "demand",
    "usage",
    "observation",
    "allocation",
    "backlog",
    "mrt",
    "cr",
];

pub const METRICS_COLUMNS: [&str; 5] = ["CR", "avg_vm1_cpu", "avg_vm2_cpu", "AmRT", "SLOO"];

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("writing to memory cannot fail");
    String::from_utf8(bytes).expect("csv output is ascii")
}

/// Writes a CSV with the given header and rows. Every cell is preformatted.
pub fn write_table<S: AsRef<str>>(header: &[&str], rows: &[Vec<S>]) -> String {
    let mut w = writer();
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.iter().map(|c| c.as_ref()))
            .expect("in-memory write");
    }
    finish(w)
}

pub fn write_trace(records: &[StepRecord]) -> String {
    let mut rows = Vec::new();
    for r in records {
        for i in 0..r.demand.len() {
            rows.push(vec![
                r.k.to_string(),
                i.to_string(),
                r.demand[i].to_string(),
                r.usage[i].to_string(),
                r.observation[i].to_string(),
                r.allocation[i].to_string(),
                r.backlog[i].to_string(),
                r.mrt.to_string(),
                r.completed[i].to_string(),
            ]);
        }
    }
    write_table(&TRACE_COLUMNS, &rows)
}

pub fn metrics_row(m: &RunMetrics) -> Vec<String> {
    vec![
        m.completed_requests.to_string(),
        m.avg_vm1_cpu.to_string(),
        m.avg_vm2_cpu.to_string(),
        m.avg_mrt.to_string(),
        m.slo_obedience.to_string(),
    ]
}

pub fn write_metrics(m: &RunMetrics) -> String {
    write_table(&METRICS_COLUMNS, &[metrics_row(m)])
}

/// A trace as read back from CSV. `flagged` is not part of the schema and
/// comes back false.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub components: usize,
    pub records: Vec<StepRecord>,
}

impl Trace {
    /// Observation vectors in sample order.
    pub fn observations(&self) -> impl Iterator<Item = &[f64]> {
        self.records.iter().map(|r| r.observation.as_slice())
    }
}

fn column_index(headers: &csv::StringRecord) -> Result<[usize; 9]> {
    let mut idx = [0usize; 9];
    for (slot, name) in idx.iter_mut().zip(TRACE_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))?;
    }
    Ok(idx)
}

/// Parses a trace in the export schema. Columns may appear in any order and
/// extra columns are ignored; every sample must list the same components.
pub fn read_trace(text: &str) -> Result<Trace> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
        .clone();
    let idx = column_index(&headers)?;

    let mut by_k: BTreeMap<u64, BTreeMap<usize, [f64; 6]>> = BTreeMap::new();
    let mut cr: BTreeMap<(u64, usize), u64> = BTreeMap::new();
    for (n, row) in rdr.records().enumerate() {
        // Header is line 1.
        let line = n + 2;
        let row = row.map_err(|e| Error::Schema(format!("line {line}: {e}")))?;
        let cell = |c: usize| row.get(idx[c]).unwrap_or("");
        let int = |c: usize| {
            cell(c).parse::<u64>().map_err(|_| {
                Error::Schema(format!(
                    "line {line}: column '{}' is not a non-negative integer: '{}'",
                    TRACE_COLUMNS[c],
                    cell(c)
                ))
            })
        };
        let real = |c: usize| {
            cell(c)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::Schema(format!(
                        "line {line}: column '{}' is not a finite number: '{}'",
                        TRACE_COLUMNS[c],
                        cell(c)
                    ))
                })
        };
        let k = int(0)?;
        let comp = int(1)? as usize;
        let vals = [real(2)?, real(3)?, real(4)?, real(5)?, real(6)?, real(7)?];
        if by_k.entry(k).or_default().insert(comp, vals).is_some() {
            return Err(Error::Schema(format!(
                "line {line}: duplicate row for sample {k}, component {comp}"
            )));
        }
        cr.insert((k, comp), int(8)?);
    }

    let components = by_k.values().next().map_or(0, BTreeMap::len);
    let mut records = Vec::with_capacity(by_k.len());
    for (k, comps) in by_k {
        if comps.len() != components || comps.keys().copied().ne(0..components) {
            return Err(Error::Schema(format!(
                "sample {k} does not list components 0..{components}"
            )));
        }
        let col = |j: usize| comps.values().map(|v| v[j]).collect::<Vec<f64>>();
        records.push(StepRecord {
            k,
            demand: col(0),
            usage: col(1),
            observation: col(2),
            allocation: col(3),
            backlog: col(4),
            mrt: comps[&0][5],
            completed: (0..components).map(|i| cr[&(k, i)]).collect(),
            flagged: false,
        });
    }
    Ok(Trace {
        components,
        records,
    })
}
