//! CSV formats: signal `t_s,gsr_au`, marker sidecar `event_id,t_s` and the
//! feature table `subject,group,event,dP2P,dMax,dMean,dAcc`.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use super::{EventMarker, FeatureRow, GsrTrace};
use crate::scenario::EventId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CsvError {
    #[error("{source_name}: row {row}, column `{column}`: {message}")]
    Field {
        source_name: String,
        row: usize,
        column: String,
        message: String,
    },
    #[error("{source_name}: {message}")]
    Format {
        source_name: String,
        message: String,
    },
}

pub const SIGNAL_HEADER: [&str; 2] = ["t_s", "gsr_au"];
pub const MARKER_HEADER: [&str; 2] = ["event_id", "t_s"];
pub const FEATURE_HEADER: [&str; 7] =
    ["subject", "group", "event", "dP2P", "dMax", "dMean", "dAcc"];

/// Rows of a headed CSV document with typed field access that reports
/// the row and column of any failure.
pub struct CsvTable {
    name: String,
    header: Vec<String>,
    rows: Vec<(usize, csv::StringRecord)>,
}

impl CsvTable {
    pub fn parse(name: &str, text: &str, expected: &[&str]) -> Result<Self, CsvError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| CsvError::Format {
                source_name: name.into(),
                message: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        if header != expected {
            return Err(CsvError::Format {
                source_name: name.into(),
                message: format!(
                    "expected header `{}`, found `{}`",
                    expected.join(","),
                    header.join(",")
                ),
            });
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| CsvError::Format {
                source_name: name.into(),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            rows.push((line, rec));
        }
        Ok(Self {
            name: name.into(),
            header,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Parses column `col` of data row `i`.
    pub fn get<T: FromStr>(&self, i: usize, col: usize) -> Result<T, CsvError>
    where
        T::Err: std::fmt::Display,
    {
        let (line, rec) = &self.rows[i];
        let raw = rec.get(col).unwrap_or("");
        raw.parse::<T>().map_err(|e| CsvError::Field {
            source_name: self.name.clone(),
            row: *line,
            column: self.header[col].clone(),
            message: format!("cannot parse `{raw}`: {e}"),
        })
    }

    pub fn finite(&self, i: usize, col: usize) -> Result<f64, CsvError> {
        let v: f64 = self.get(i, col)?;
        if v.is_finite() {
            Ok(v)
        } else {
            let (line, _) = &self.rows[i];
            Err(CsvError::Field {
                source_name: self.name.clone(),
                row: *line,
                column: self.header[col].clone(),
                message: "value is not finite".into(),
            })
        }
    }
}

pub fn write_signal(trace: &GsrTrace) -> String {
    let mut out = String::with_capacity(trace.samples.len() * 16);
    let _ = writeln!(out, "{}", SIGNAL_HEADER.join(","));
    for (i, v) in trace.samples.iter().enumerate() {
        let _ = writeln!(out, "{:.6},{}", i as f64 / trace.sample_rate, v);
    }
    out
}

pub fn write_markers(markers: &[EventMarker]) -> String {
    let mut out = format!("{}\n", MARKER_HEADER.join(","));
    for m in markers {
        let _ = writeln!(out, "{},{:.6}", m.event, m.t);
    }
    out
}

/// Reads a signal and its markers. The sample rate comes from the time
/// column; recordings must be uniformly sampled.
pub fn read_trace(
    subject: u32,
    signal_name: &str,
    signal: &str,
    marker_name: &str,
    markers: &str,
    baseline_s: f64,
) -> Result<GsrTrace, CsvError> {
    let sig = CsvTable::parse(signal_name, signal, &SIGNAL_HEADER)?;
    if sig.len() < 2 {
        return Err(CsvError::Format {
            source_name: signal_name.into(),
            message: "need at least two samples".into(),
        });
    }
    let mut samples = Vec::with_capacity(sig.len());
    let t0 = sig.finite(0, 0)?;
    let t1 = sig.finite(1, 0)?;
    let dt = t1 - t0;
    if !(dt > 0.0) {
        return Err(CsvError::Format {
            source_name: signal_name.into(),
            message: "time must increase".into(),
        });
    }
    for i in 0..sig.len() {
        let t = sig.finite(i, 0)?;
        if (t - t0 - i as f64 * dt).abs() > 0.5 * dt {
            return Err(CsvError::Field {
                source_name: signal_name.into(),
                row: i + 2,
                column: "t_s".into(),
                message: format!("non-uniform sampling at t = {t}"),
            });
        }
        samples.push(sig.finite(i, 1)?);
    }
    let t_last = sig.finite(sig.len() - 1, 0)?;
    let mk = CsvTable::parse(marker_name, markers, &MARKER_HEADER)?;
    let mut list = Vec::with_capacity(mk.len());
    for i in 0..mk.len() {
        list.push(EventMarker {
            event: mk.get::<EventId>(i, 0)?,
            t: mk.finite(i, 1)?,
        });
    }
    Ok(GsrTrace {
        subject,
        sample_rate: ((sig.len() - 1) as f64 / (t_last - t0) * 1e3).round() / 1e3,
        samples,
        markers: list,
        baseline: (0.0, baseline_s),
    })
}

pub fn write_features(rows: &[FeatureRow]) -> String {
    let mut out = format!("{}\n", FEATURE_HEADER.join(","));
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:e},{:e},{:e},{:e}",
            r.subject, r.group, r.event, r.d_p2p, r.d_max, r.d_mean, r.d_acc
        );
    }
    out
}

pub fn read_features(name: &str, text: &str) -> Result<Vec<FeatureRow>, CsvError> {
    let t = CsvTable::parse(name, text, &FEATURE_HEADER)?;
    (0..t.len())
        .map(|i| {
            Ok(FeatureRow {
                subject: t.get(i, 0)?,
                group: t.get(i, 1)?,
                event: t.get(i, 2)?,
                d_p2p: t.finite(i, 3)?,
                d_max: t.finite(i, 4)?,
                d_mean: t.finite(i, 5)?,
                d_acc: t.finite(i, 6)?,
            })
        })
        .collect()
}
