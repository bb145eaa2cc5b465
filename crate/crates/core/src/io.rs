//! File formats: trace CSV, events CSV, fingerprint CSV and the structured
//! key-value report.
//!
//! All formats are line-oriented text. Trace headers are `#`-prefixed
//! key=value lines followed by a `time_s,voltage_mv` column header; voltages
//! serialize at 6 decimal places. Reports are `key = value` lines with dotted
//! keys and stable ordering, so identical inputs yield identical bytes.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::classifier::{default_table, FingerprintTable};
use crate::error::{Error, Result};
use crate::signal::{ChemicalResponseParams, EventKind, EventMarker, Trace};

const TRACE_COLUMNS: &str = "time_s,voltage_mv";
const EVENT_COLUMNS: &str = "time_s,kind,label";
const FINGERPRINT_COLUMNS: &str = "name,freq_mean,freq_sd,amp_mean,amp_sd";

/// Serialize a trace to the CSV-like text format.
pub fn trace_to_string(trace: &Trace) -> String {
    let mut out = String::new();
    out.push_str("# physarum-trace v1\n");
    let _ = writeln!(out, "# sample_rate_hz={}", trace.sample_rate_hz);
    let _ = writeln!(out, "# start_time_s={}", trace.start_time_s);
    let _ = writeln!(out, "# range_mv={}", trace.range_mv);
    for (k, v) in &trace.meta {
        let _ = writeln!(out, "# meta.{k}={v}");
    }
    out.push_str(TRACE_COLUMNS);
    out.push('\n');
    for (i, v) in trace.samples.iter().enumerate() {
        let _ = writeln!(out, "{:.6},{:.6}", trace.time_at(i), v);
    }
    out
}

pub fn write_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, trace_to_string(trace))?;
    Ok(())
}

/// Parse a trace, rejecting non-finite values and non-uniform time steps
/// (tolerance 1e-6 s).
pub fn trace_from_str(text: &str) -> Result<Trace> {
    let mut sample_rate_hz: Option<f64> = None;
    let mut start_time_s: f64 = 0.0;
    let mut range_mv: f64 = crate::signal::DEFAULT_RANGE_MV;
    let mut meta = BTreeMap::new();
    let mut samples = Vec::new();
    let mut saw_columns = false;
    let mut row_index = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            if saw_columns {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "header line after data rows".into(),
                });
            }
            let header = header.trim();
            if !header.contains('=') {
                continue; // format banner
            }
            let (key, value) = header.split_once('=').unwrap();
            let (key, value) = (key.trim(), value.trim());
            let parse_num = |v: &str| -> Result<f64> {
                v.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("invalid number for {key}: {v}"),
                })
            };
            match key {
                "sample_rate_hz" => sample_rate_hz = Some(parse_num(value)?),
                "start_time_s" => start_time_s = parse_num(value)?,
                "range_mv" => range_mv = parse_num(value)?,
                _ => {
                    if let Some(meta_key) = key.strip_prefix("meta.") {
                        meta.insert(meta_key.to_string(), value.to_string());
                    }
                }
            }
            continue;
        }
        if !saw_columns {
            if line != TRACE_COLUMNS {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected column header `{TRACE_COLUMNS}`, got `{line}`"),
                });
            }
            saw_columns = true;
            continue;
        }
        let (t_str, v_str) = line.split_once(',').ok_or_else(|| Error::Parse {
            line: lineno,
            msg: "expected `time,voltage` row".into(),
        })?;
        let t: f64 = t_str.trim().parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("invalid time: {t_str}"),
        })?;
        let v: f64 = v_str.trim().parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("invalid voltage: {v_str}"),
        })?;
        if !t.is_finite() || !v.is_finite() {
            return Err(Error::Parse {
                line: lineno,
                msg: "non-finite value".into(),
            });
        }
        let rate = sample_rate_hz.ok_or_else(|| Error::Parse {
            line: lineno,
            msg: "data row before sample_rate_hz header".into(),
        })?;
        let expected = start_time_s + row_index as f64 / rate;
        if (t - expected).abs() > 1e-6 {
            return Err(Error::Format(format!(
                "non-uniform time step at line {lineno}: {t} s, expected {expected} s"
            )));
        }
        samples.push(v);
        row_index += 1;
    }

    let sample_rate_hz = sample_rate_hz
        .ok_or_else(|| Error::Format("missing sample_rate_hz header".into()))?;
    if !saw_columns {
        return Err(Error::Format(format!(
            "missing `{TRACE_COLUMNS}` column header"
        )));
    }
    let trace = Trace {
        sample_rate_hz,
        start_time_s,
        range_mv,
        samples,
        meta,
    };
    trace.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(trace)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace> {
    trace_from_str(&fs::read_to_string(path)?)
}

pub fn events_to_string(events: &[EventMarker]) -> Result<String> {
    for w in events.windows(2) {
        if w[1].time_s < w[0].time_s {
            return Err(Error::Format("events must be time-sorted".into()));
        }
    }
    let mut out = String::new();
    out.push_str(EVENT_COLUMNS);
    out.push('\n');
    for e in events {
        let _ = writeln!(out, "{:.6},{},{}", e.time_s, e.kind.as_str(), e.label);
    }
    Ok(out)
}

pub fn write_events(events: &[EventMarker], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, events_to_string(events)?)?;
    Ok(())
}

pub fn events_from_str(text: &str) -> Result<Vec<EventMarker>> {
    let mut events: Vec<EventMarker> = Vec::new();
    let mut saw_columns = false;
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        if !saw_columns {
            if line != EVENT_COLUMNS {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected column header `{EVENT_COLUMNS}`, got `{line}`"),
                });
            }
            saw_columns = true;
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let t_str = parts.next().unwrap_or("");
        let kind_str = parts.next().ok_or_else(|| Error::Parse {
            line: lineno,
            msg: "missing event kind".into(),
        })?;
        let label = parts.next().unwrap_or("").to_string();
        let time_s: f64 = t_str.trim().parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("invalid time: {t_str}"),
        })?;
        let kind = EventKind::parse(kind_str.trim()).ok_or_else(|| Error::Parse {
            line: lineno,
            msg: format!("unknown event kind: {kind_str}"),
        })?;
        if kind == EventKind::ChemicalAdded && label.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                msg: "chemical_added event requires a label".into(),
            });
        }
        if let Some(prev) = events.last() {
            if time_s < prev.time_s {
                return Err(Error::Format(format!(
                    "events out of order at line {lineno}"
                )));
            }
        }
        events.push(EventMarker { time_s, kind, label });
    }
    if !saw_columns {
        return Err(Error::Format(format!(
            "missing `{EVENT_COLUMNS}` column header"
        )));
    }
    Ok(events)
}

pub fn read_events(path: impl AsRef<Path>) -> Result<Vec<EventMarker>> {
    events_from_str(&fs::read_to_string(path)?)
}

pub fn fingerprints_to_string(table: &FingerprintTable) -> String {
    let mut out = String::new();
    out.push_str(FINGERPRINT_COLUMNS);
    out.push('\n');
    for row in table.rows() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.name, row.freq_ratio_mean, row.freq_ratio_sd, row.amp_ratio_mean, row.amp_ratio_sd
        );
    }
    out
}

pub fn write_fingerprints(table: &FingerprintTable, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, fingerprints_to_string(table))?;
    Ok(())
}

/// Parse fingerprint rows and merge them over `base`: same-name rows replace
/// the base entry, new names append.
pub fn fingerprints_from_str(text: &str, base: FingerprintTable) -> Result<FingerprintTable> {
    let mut table = base;
    let mut saw_columns = false;
    let mut seen_in_file: Vec<String> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        if !saw_columns {
            if line != FINGERPRINT_COLUMNS {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected column header `{FINGERPRINT_COLUMNS}`, got `{line}`"),
                });
            }
            saw_columns = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let name = fields[0].trim().to_string();
        let mut nums = [0.0f64; 4];
        for (i, f) in fields[1..].iter().enumerate() {
            nums[i] = f.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid number: {f}"),
            })?;
        }
        let key = name.to_ascii_lowercase();
        if seen_in_file.contains(&key) {
            return Err(Error::Validation(format!(
                "duplicate fingerprint `{name}` at line {lineno}"
            )));
        }
        seen_in_file.push(key);
        let row = ChemicalResponseParams::new(name, nums[0], nums[1], nums[2], nums[3]);
        table.upsert(row)?;
    }
    if !saw_columns {
        return Err(Error::Format(format!(
            "missing `{FINGERPRINT_COLUMNS}` column header"
        )));
    }
    table.version = format!("{}+file", table.version);
    Ok(table)
}

/// Load the active fingerprint table: the embedded default when `path` is
/// `None`, otherwise the default overlaid with the file's rows.
pub fn load_fingerprints(path: Option<&Path>) -> Result<FingerprintTable> {
    match path {
        None => Ok(default_table()),
        Some(p) => fingerprints_from_str(&fs::read_to_string(p)?, default_table()),
    }
}

/// Ordered `key = value` report. Keys are dotted for nesting; rendering is
/// deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pairs: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) {
        self.pairs.push((key.into(), value.to_string()));
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }
}

/// Parse a report back into a key -> value map.
pub fn parse_report(text: &str) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            map.insert(k.trim().to_string(), v.to_string());
        }
    }
    map
}
