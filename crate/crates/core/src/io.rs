//! Trial-log ingestion and report emission.
//!
//! Logs are JSON Lines, one evaluation event per line:
//!
//! ```text
//! {"submission":"adamw","workload":"wmt","study":0,"trial":3,"step":4000,"runtime_s":1520.5,"val":27.1,"test":26.8}
//! ```
//!
//! `test` and `status` are optional; `hparams` may carry the trial's
//! hyperparameter point on any of its lines.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::ValidationTable;
use crate::domain::{
    EvalEvent, ExtendedTime, HyperparameterPoint, MetricDirection, ScoreMatrix, TrialKey, TrialRecord,
    TrialStatus,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::scoring::{PerformanceProfile, ScoreReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialLogLine {
    pub submission: String,
    pub workload: String,
    pub study: u32,
    pub trial: u32,
    pub step: u64,
    pub runtime_s: f64,
    pub val: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hparams: Option<HyperparameterPoint>,
}

#[derive(Default)]
struct Pending {
    point: Option<HyperparameterPoint>,
    status: TrialStatus,
    events: BTreeMap<u64, EvalEvent>,
}

/// Groups log lines into trials. `origin` labels error messages.
fn group_lines<I>(lines: I) -> Result<Vec<TrialRecord>>
where
    I: IntoIterator<Item = (String, usize, TrialLogLine)>,
{
    let mut trials: BTreeMap<TrialKey, Pending> = BTreeMap::new();
    for (origin, line_no, rec) in lines {
        let malformed = |message: String| Error::MalformedLine {
            line: line_no,
            message: format!("{origin}{message}"),
        };
        if !(rec.runtime_s >= 0.0 && rec.runtime_s.is_finite()) {
            return Err(malformed(format!("runtime_s must be finite and >= 0, got {}", rec.runtime_s)));
        }
        let status = match &rec.status {
            Some(s) => s.parse::<TrialStatus>().map_err(|e| malformed(e.to_string()))?,
            None => TrialStatus::Completed,
        };
        let key = TrialKey {
            submission: rec.submission,
            workload: rec.workload,
            study: rec.study,
            trial: rec.trial,
        };
        let entry = trials.entry(key.clone()).or_default();
        if status != TrialStatus::Completed {
            entry.status = status;
        }
        if entry.point.is_none() {
            entry.point = rec.hparams;
        }
        let event = EvalEvent {
            step: rec.step,
            runtime: rec.runtime_s,
            validation: rec.val,
            test: rec.test,
        };
        if entry.events.insert(rec.step, event).is_some() {
            return Err(Error::DuplicateEvent(format!("{key} step {} ({origin}line {line_no})", rec.step)));
        }
    }
    trials
        .into_iter()
        .map(|(key, p)| {
            TrialRecord::new(key, p.point.unwrap_or_default(), p.events.into_values().collect(), p.status)
        })
        .collect()
}

fn read_lines<R: BufRead>(reader: R, origin: &str) -> Result<Vec<(String, usize, TrialLogLine)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(origin.trim_end_matches(": "), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrialLogLine = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: line_no,
            message: format!("{origin}{e}"),
        })?;
        out.push((origin.to_owned(), line_no, rec));
    }
    Ok(out)
}

/// Parses one JSON Lines stream into trials sorted by key, events sorted by step.
pub fn parse_trial_log<R: BufRead>(reader: R) -> Result<Vec<TrialRecord>> {
    group_lines(read_lines(reader, "")?)
}

pub fn parse_log_file(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    group_lines(read_lines(BufReader::new(file), &format!("{}: ", path.display()))?)
}

/// Parses every `*.jsonl` file under `dir` (or `dir` itself if it is a file).
/// Files are read concurrently and merged by trial key.
pub fn parse_log_dir(dir: impl AsRef<Path>, exec: Execution) -> Result<Vec<TrialRecord>> {
    let dir = dir.as_ref();
    if dir.is_file() {
        return parse_log_file(dir);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir.display().to_string(), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    let parsed = exec.map(&files, |path| {
        let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        read_lines(BufReader::new(file), &format!("{}: ", path.display()))
    });
    let mut lines = Vec::new();
    for p in parsed {
        lines.extend(p?);
    }
    group_lines(lines)
}

/// Writes trials back as JSON Lines. The point and a non-default status go on every line.
pub fn write_trial_log<W: Write>(trials: &[TrialRecord], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let io_err = |e| Error::io("<trial log>", e);
    for t in trials {
        for e in &t.events {
            let line = TrialLogLine {
                submission: t.key.submission.clone(),
                workload: t.key.workload.clone(),
                study: t.key.study,
                trial: t.key.trial,
                step: e.step,
                runtime_s: e.runtime,
                val: e.validation,
                test: e.test,
                status: (t.status != TrialStatus::Completed).then(|| t.status.to_string()),
                hparams: (!t.point.is_empty()).then(|| t.point.clone()),
            };
            serde_json::to_writer(&mut w, &line).map_err(|e| io_err(e.into()))?;
            w.write_all(b"\n").map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

fn csv_err(path: &str) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, e.into())
}

/// `submission,benchmark_score,<workload...>` with `inf` for infinite times.
pub fn write_leaderboard_csv<W: Write>(report: &ScoreReport, writer: W) -> Result<()> {
    let err = csv_err("<leaderboard>");
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["submission".to_string(), "benchmark_score".to_string()];
    header.extend(report.leaderboard.workloads.iter().cloned());
    w.write_record(&header).map_err(&err)?;
    for row in &report.leaderboard.rows {
        let mut rec = vec![row.submission.clone(), row.benchmark_score.to_string()];
        rec.extend(row.times.iter().map(ExtendedTime::to_string));
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io("<leaderboard>", e))
}

/// `tau,rho` rows up to `r_max`, preceded by a `(1, 0)` anchor when the first step lies above 1.
pub fn write_profile_csv<W: Write>(profile: &PerformanceProfile, r_max: f64, writer: W) -> Result<()> {
    let err = csv_err("<profile>");
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["tau", "rho"]).map_err(&err)?;
    if profile.breakpoints.first().is_none_or(|&(t, _)| t > 1.0) {
        w.write_record(["1", "0"]).map_err(&err)?;
    }
    for &(tau, rho) in profile.breakpoints.iter().take_while(|&&(t, _)| t <= r_max) {
        w.write_record([tau.to_string(), rho.to_string()]).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io("<profile>", e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

/// Writes `leaderboard.csv` plus `profiles/<submission>.csv`, or a single `report.json`.
pub fn write_score_report(report: &ScoreReport, out_dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    if report.leaderboard.rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let create = |p: &Path| File::create(p).map_err(|e| Error::io(p.display().to_string(), e));
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Json => {
            let path = out_dir.join("report.json");
            let file = create(&path)?;
            serde_json::to_writer_pretty(BufWriter::new(file), report)
                .map_err(|e| Error::io(path.display().to_string(), e.into()))?;
            written.push(path);
        }
        ReportFormat::Csv => {
            let path = out_dir.join("leaderboard.csv");
            write_leaderboard_csv(report, create(&path)?)?;
            written.push(path);
            let dir = out_dir.join("profiles");
            fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
            for p in &report.profiles {
                let path = dir.join(format!("{}.csv", p.submission_id));
                write_profile_csv(p, report.r_max, create(&path)?)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

fn parse_cell(cell: &str, line: usize) -> Result<Option<f64>> {
    let c = cell.trim();
    if c.is_empty() || c.eq_ignore_ascii_case("nan") || c.eq_ignore_ascii_case("missing") {
        return Ok(None);
    }
    c.parse().map(Some).map_err(|_| Error::MalformedLine {
        line,
        message: format!("cannot parse `{c}` as a number"),
    })
}

/// Labelled numeric table: header `id,<col...>`, then one row per id. Empty cells are `None`.
pub struct LabelledTable {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
    /// Set when a row labelled `direction` precedes the data.
    pub directions: Option<Vec<MetricDirection>>,
}

pub fn read_labelled_table<R: Read>(reader: R) -> Result<LabelledTable> {
    let mut r = csv::ReaderBuilder::new().flexible(false).trim(csv::Trim::All).from_reader(reader);
    let to_err = |e: csv::Error| Error::MalformedLine {
        line: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    };
    let columns: Vec<String> = r.headers().map_err(to_err)?.iter().skip(1).map(str::to_owned).collect();
    let mut rows = Vec::new();
    let mut directions = None;
    for rec in r.records() {
        let rec = rec.map_err(to_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let id = rec.get(0).unwrap_or_default().to_owned();
        if id == "direction" && rows.is_empty() && directions.is_none() {
            let dirs = rec
                .iter()
                .skip(1)
                .map(|c| c.parse::<MetricDirection>())
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::MalformedLine { line, message: e.to_string() })?;
            directions = Some(dirs);
            continue;
        }
        let cells = rec.iter().skip(1).map(|c| parse_cell(c, line)).collect::<Result<Vec<_>>>()?;
        rows.push((id, cells));
    }
    Ok(LabelledTable {
        columns,
        rows,
        directions,
    })
}

/// A validation table from a labelled CSV. Without a `direction` row every workload uses `default`.
pub fn read_validation_table<R: Read>(reader: R, default: MetricDirection) -> Result<ValidationTable> {
    let t = read_labelled_table(reader)?;
    let dirs = t.directions.unwrap_or_else(|| vec![default; t.columns.len()]);
    let (points, values): (Vec<_>, Vec<_>) = t.rows.into_iter().unzip();
    ValidationTable::new(
        t.columns.into_iter().zip(dirs).collect(),
        points,
        values.into_iter().flatten().collect(),
    )
}

/// Reads a time matrix CSV: `submission,<workload...>`; empty or `inf` cells are infinite.
pub fn read_time_matrix<R: Read>(reader: R) -> Result<ScoreMatrix> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let to_err = |e: csv::Error| Error::MalformedLine {
        line: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    };
    let workloads: Vec<String> = r.headers().map_err(to_err)?.iter().skip(1).map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(to_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let cells = rec
            .iter()
            .skip(1)
            .map(|c| {
                if c.is_empty() {
                    return Ok(ExtendedTime::Infinite);
                }
                c.parse::<ExtendedTime>().map_err(|e| Error::MalformedLine { line, message: e.to_string() })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((rec.get(0).unwrap_or_default().to_owned(), cells));
    }
    ScoreMatrix::from_rows(workloads, rows)
}

pub fn write_time_matrix<W: Write>(matrix: &ScoreMatrix, writer: W) -> Result<()> {
    let err = csv_err("<times>");
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["submission".to_string()];
    header.extend(matrix.workloads().iter().cloned());
    w.write_record(&header).map_err(&err)?;
    for (s, id) in matrix.submissions().iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(matrix.row(s).iter().map(ExtendedTime::to_string));
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io("<times>", e))
}
