use std::collections::BTreeMap;
use std::io;

use dslad::MemoryReport;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl GradCheck {
    pub fn new(max_rel_err: f64, tolerance: f64) -> Self {
        Self { max_rel_err, tolerance, pass: max_rel_err <= tolerance }
    }
}

/// Wall-clock seconds, averaged over repetitions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Times {
    pub record_s: f64,
    pub reverse_s: f64,
}

impl Times {
    pub fn mean(runs: &[Times]) -> Times {
        let n = runs.len().max(1) as f64;
        Times {
            record_s: runs.iter().map(|t| t.record_s).sum::<f64>() / n,
            reverse_s: runs.iter().map(|t| t.reverse_s).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub case: String,
    pub config: serde_json::Value,
    pub statements: usize,
    pub rhs_ids: usize,
    pub constants: usize,
    pub bytes_by_stream: BTreeMap<String, usize>,
    pub grad_check: GradCheck,
    pub times: Times,
}

impl Report {
    pub fn new(case: impl Into<String>, config: impl Serialize, memory: &MemoryReport, grad_check: GradCheck, times: Times) -> Self {
        Self {
            case: case.into(),
            config: serde_json::to_value(config).expect("config serializes"),
            statements: memory.statements,
            rhs_ids: memory.rhs_ids,
            constants: memory.constants,
            bytes_by_stream: memory.bytes.clone(),
            grad_check,
            times,
        }
    }

    pub fn tape_bytes(&self) -> usize {
        self.bytes_by_stream.get("tape").copied().unwrap_or(0)
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CsvRow<'a> {
    case: &'a str,
    statements: usize,
    rhs_ids: usize,
    constants: usize,
    tape_bytes: usize,
    max_rel_err: f64,
    tolerance: f64,
    pass: bool,
    record_s: f64,
    reverse_s: f64,
}

/// One CSV row per report with the scalar fields of the JSON form.
pub fn write_csv<W: io::Write>(out: W, reports: &[Report]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(CsvRow {
            case: &r.case,
            statements: r.statements,
            rhs_ids: r.rhs_ids,
            constants: r.constants,
            tape_bytes: r.tape_bytes(),
            max_rel_err: r.grad_check.max_rel_err,
            tolerance: r.grad_check.tolerance,
            pass: r.grad_check.pass,
            record_s: r.times.record_s,
            reverse_s: r.times.reverse_s,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Adds the counts and stream bytes of `more` to `total`. Vector sizes and
/// reserved chunk memory are not cumulative and keep their maximum.
pub fn accumulate(total: &mut MemoryReport, more: &MemoryReport) {
    total.statements += more.statements;
    total.rhs_ids += more.rhs_ids;
    total.constants += more.constants;
    for (k, &v) in &more.bytes {
        let e = total.bytes.entry(k.clone()).or_insert(0);
        if k == "allocated" || k.starts_with("primal:") || k.starts_with("adjoint:") {
            *e = (*e).max(v);
        } else {
            *e += v;
        }
    }
}

pub fn empty_memory() -> MemoryReport {
    MemoryReport { statements: 0, rhs_ids: 0, constants: 0, bytes: BTreeMap::new() }
}
