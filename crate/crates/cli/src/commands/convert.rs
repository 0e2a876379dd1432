//! Foreign CSV exports to the recording format. The input needs a header
//! row; the PPG and respiratory columns are picked by name, so exports such
//! as `PLETH`/`RESP` or `pleth_y`/`co2_y` work without editing.

use std::path::{Path, PathBuf};

use ppg_resp::data::{resample_to_30hz, write_recording, Recording, RrAnnotation};
use ppg_resp::SAMPLE_RATE_HZ;
use serde_json::json;

use super::Context;
use crate::args::ConvertArgs;
use crate::error::{CliError, Result};
use crate::run::{file_stem_for, RunDir};

fn data_error(path: &Path, line: u64, reason: String) -> CliError {
    ppg_resp::Error::Ingestion {
        path: path.to_path_buf(),
        line,
        reason,
    }
    .into()
}

/// Reads the named columns of a headed CSV file as numbers.
pub fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| data_error(path, 0, e.to_string()))?;
    let headers = rdr.headers().map_err(|e| data_error(path, 1, e.to_string()))?.clone();
    let index: Vec<usize> = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == *n)
                .ok_or_else(|| data_error(path, 1, format!("no column named {n:?}")))
        })
        .collect::<Result<_>>()?;
    let mut columns = vec![Vec::new(); names.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| data_error(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        for (col, &i) in columns.iter_mut().zip(&index) {
            let field = rec.get(i).unwrap_or("");
            let v: f64 = field
                .parse()
                .map_err(|_| data_error(path, line, format!("non-numeric value {field:?} in column {}", &headers[i])))?;
            if !v.is_finite() {
                return Err(data_error(path, line, format!("non-finite value in column {}", &headers[i])));
            }
            col.push(v);
        }
    }
    Ok(columns)
}

pub fn run(args: &ConvertArgs, ctx: &Context) -> Result<PathBuf> {
    if !args.input.exists() {
        return Err(CliError::Config(format!("input {} does not exist", args.input.display())));
    }
    let mut cols = read_columns(&args.input, &[&args.ppg_column, &args.resp_column])?;
    let resp = cols.pop().expect("two columns");
    let ppg = cols.pop().expect("two columns");
    let ppg = resample_to_30hz(&ppg, args.fs)?;
    let resp = resample_to_30hz(&resp, args.fs)?;
    let mut inputs = vec![args.input.clone()];
    let annotations = match &args.rr {
        Some(path) => {
            inputs.push(path.clone());
            let cols = read_columns(path, &[&args.rr_time_column, &args.rr_column])?;
            Some(
                cols[0]
                    .iter()
                    .zip(&cols[1])
                    .map(|(&time_s, &rr_bpm)| RrAnnotation { time_s, rr_bpm })
                    .collect(),
            )
        }
        None => None,
    };
    let rec = Recording::new(args.subject.clone(), SAMPLE_RATE_HZ, ppg, resp, args.kind.into(), annotations)?;
    let run = RunDir::create(&ctx.out, "convert")?;
    let data = run.subdir("data")?;
    write_recording(&rec, &data.join(format!("{}.csv", file_stem_for(&rec.subject_id))))?;
    run.finish(
        None,
        json!({
            "input": args.input, "fs": args.fs, "subject": args.subject,
            "ppg_column": args.ppg_column, "resp_column": args.resp_column,
            "kind": rec.resp_kind.to_string(), "rr": args.rr,
        }),
        &inputs,
        json!({ "samples": rec.len() }),
    )
}
