//! Neutral recording format.
//!
//! A recording is a CSV file with a three-line preamble followed by data:
//!
//! ```text
//! subject_id,fs,resp_kind
//! 0009,300,capnography
//! ppg,resp
//! 0.5123,0.0121
//! ...
//! ```
//!
//! Optional reference respiratory-rate annotations live next to it in
//! `<name>.rr.csv` with header `t_sec,rr_bpm`.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::resample::resample_to_30hz;
use crate::error::{Error, Result};
use crate::SAMPLE_RATE_HZ;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RespKind {
    Capnography,
    Impedance,
}

impl fmt::Display for RespKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RespKind::Capnography => "capnography",
            RespKind::Impedance => "impedance",
        })
    }
}

impl FromStr for RespKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "capnography" | "co2" => Ok(RespKind::Capnography),
            "impedance" | "ip" => Ok(RespKind::Impedance),
            other => Err(format!("unknown resp_kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RrAnnotation {
    pub time_s: f64,
    pub rr_bpm: f64,
}

/// One subject's synchronized PPG and respiratory reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub sample_rate: f64,
    pub ppg: Vec<f64>,
    pub resp_ref: Vec<f64>,
    pub resp_kind: RespKind,
    pub rr_annotations: Option<Vec<RrAnnotation>>,
}

impl Recording {
    pub fn new(
        subject_id: impl Into<String>,
        sample_rate: f64,
        ppg: Vec<f64>,
        resp_ref: Vec<f64>,
        resp_kind: RespKind,
        rr_annotations: Option<Vec<RrAnnotation>>,
    ) -> Result<Self> {
        if ppg.len() != resp_ref.len() {
            return Err(Error::Dataset(format!(
                "ppg has {} samples, reference has {}",
                ppg.len(),
                resp_ref.len()
            )));
        }
        if ppg.iter().chain(&resp_ref).any(|v| !v.is_finite()) {
            return Err(Error::Dataset("recording contains non-finite samples".into()));
        }
        Ok(Self {
            subject_id: subject_id.into(),
            sample_rate,
            ppg,
            resp_ref,
            resp_kind,
            rr_annotations,
        })
    }

    pub fn len(&self) -> usize {
        self.ppg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ppg.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    /// Mean of the annotated rates whose timestamps fall in `[start_s, end_s]`.
    pub fn mean_annotated_rr(&self, start_s: f64, end_s: f64) -> Option<f64> {
        let ann = self.rr_annotations.as_ref()?;
        let (sum, n) = ann
            .iter()
            .filter(|a| a.time_s >= start_s && a.time_s <= end_s)
            .fold((0.0, 0usize), |(s, n), a| (s + a.rr_bpm, n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}

/// `recordings/foo.csv` -> `recordings/foo.rr.csv`
pub fn annotation_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.rr.csv"))
}

fn ingestion(path: &Path, line: u64, reason: impl Into<String>) -> Error {
    Error::Ingestion {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ingestion(path, 0, e.to_string()))
}

fn parse_number(path: &Path, line: u64, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| ingestion(path, line, format!("non-numeric {what} value {field:?}")))?;
    if !v.is_finite() {
        return Err(ingestion(path, line, format!("non-finite {what} value {field:?}")));
    }
    Ok(v)
}

fn expect_header(path: &Path, line: u64, record: &csv::StringRecord, names: &[&str]) -> Result<()> {
    let got: Vec<&str> = record.iter().collect();
    if got != names {
        return Err(ingestion(
            path,
            line,
            format!("expected columns {} but found {}", names.join(","), got.join(",")),
        ));
    }
    Ok(())
}

/// Reads a recording and brings it to 30 Hz. Annotations are picked up from
/// the sibling `.rr.csv` file when present.
pub fn load_recording(path: &Path) -> Result<Recording> {
    let mut rdr = reader(path)?;
    let mut records = rdr.records();
    let mut next = |expect: &str| -> Result<(u64, csv::StringRecord)> {
        match records.next() {
            Some(Ok(r)) => {
                let line = r.position().map(|p| p.line()).unwrap_or(0);
                Ok((line, r))
            }
            Some(Err(e)) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                Err(ingestion(path, line, e.to_string()))
            }
            None => Err(ingestion(path, 0, format!("missing {expect}"))),
        }
    };

    let (line, header) = next("metadata header")?;
    expect_header(path, line, &header, &["subject_id", "fs", "resp_kind"])?;
    let (line, meta) = next("metadata row")?;
    if meta.len() != 3 {
        return Err(ingestion(path, line, "metadata row needs subject_id,fs,resp_kind"));
    }
    let subject_id = meta[0].to_string();
    if subject_id.is_empty() {
        return Err(ingestion(path, line, "empty subject_id"));
    }
    let fs = parse_number(path, line, &meta[1], "fs")?;
    if fs <= 0.0 {
        return Err(ingestion(path, line, format!("sampling rate must be positive, got {fs}")));
    }
    let resp_kind: RespKind = meta[2].parse().map_err(|e: String| ingestion(path, line, e))?;
    let (line, columns) = next("column header")?;
    expect_header(path, line, &columns, &["ppg", "resp"])?;

    let mut ppg = Vec::new();
    let mut resp = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            ingestion(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 2 {
            return Err(ingestion(path, line, format!("expected 2 columns, found {}", rec.len())));
        }
        ppg.push(parse_number(path, line, &rec[0], "ppg")?);
        resp.push(parse_number(path, line, &rec[1], "resp")?);
    }
    if ppg.is_empty() {
        return Err(ingestion(path, 4, "no data rows"));
    }

    let (ppg, resp) = if fs == SAMPLE_RATE_HZ {
        (ppg, resp)
    } else {
        let ppg = resample_to_30hz(&ppg, fs).map_err(|e| ingestion(path, 2, e.to_string()))?;
        let resp = resample_to_30hz(&resp, fs).map_err(|e| ingestion(path, 2, e.to_string()))?;
        (ppg, resp)
    };

    let ann_path = annotation_path(path);
    let rr_annotations = if ann_path.exists() {
        Some(load_annotations(&ann_path)?)
    } else {
        None
    };
    Recording::new(subject_id, SAMPLE_RATE_HZ, ppg, resp, resp_kind, rr_annotations)
}

pub fn load_annotations(path: &Path) -> Result<Vec<RrAnnotation>> {
    let mut rdr = reader(path)?;
    let mut out = Vec::new();
    let mut seen_header = false;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            ingestion(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if !seen_header {
            expect_header(path, line, &rec, &["t_sec", "rr_bpm"])?;
            seen_header = true;
            continue;
        }
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 2 {
            return Err(ingestion(path, line, format!("expected 2 columns, found {}", rec.len())));
        }
        out.push(RrAnnotation {
            time_s: parse_number(path, line, &rec[0], "t_sec")?,
            rr_bpm: parse_number(path, line, &rec[1], "rr_bpm")?,
        });
    }
    if !seen_header {
        return Err(ingestion(path, 1, "missing t_sec,rr_bpm header"));
    }
    Ok(out)
}

/// Writes `recording` (and its annotations, if any) in the neutral format.
/// Values are printed with the shortest round-trip representation, so the
/// output is byte-for-byte reproducible.
pub fn write_recording(recording: &Recording, path: &Path) -> Result<()> {
    let io = |e| Error::io(format!("writing {}", path.display()), e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "subject_id,fs,resp_kind").map_err(io)?;
    writeln!(
        w,
        "{},{},{}",
        recording.subject_id, recording.sample_rate, recording.resp_kind
    )
    .map_err(io)?;
    writeln!(w, "ppg,resp").map_err(io)?;
    for (p, r) in recording.ppg.iter().zip(&recording.resp_ref) {
        writeln!(w, "{p},{r}").map_err(io)?;
    }
    w.flush().map_err(io)?;

    if let Some(ann) = &recording.rr_annotations {
        let ann_path = annotation_path(path);
        let io = |e| Error::io(format!("writing {}", ann_path.display()), e);
        let mut w = BufWriter::new(File::create(&ann_path).map_err(io)?);
        writeln!(w, "t_sec,rr_bpm").map_err(io)?;
        for a in ann {
            writeln!(w, "{},{}", a.time_s, a.rr_bpm).map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    Ok(())
}

/// Loads every recording in `dir` (all `*.csv` files except annotation
/// files), sorted by file name.
pub fn load_dataset(dir: &Path) -> Result<Vec<Recording>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(format!("reading {}", dir.display()), e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            name.ends_with(".csv") && !name.ends_with(".rr.csv")
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Dataset(format!("no recordings found in {}", dir.display())));
    }
    paths.iter().map(|p| load_recording(p)).collect()
}
