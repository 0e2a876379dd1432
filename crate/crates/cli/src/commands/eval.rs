use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use ppg_resp::data::{load_dataset, InputScaling, Recording};
use ppg_resp::evaluation::{
    evaluate_predictions, predict_recording, EvaluationWindow, MetricsReport, SubjectPredictions, SubjectWindows,
    DEFAULT_COMPONENTS,
};
use ppg_resp::model::{load_weights, EncoderDecoderModel};
use ppg_resp::training::{loso_pls, run_parallel, TrainConfig};
use ppg_resp::SAMPLE_RATE_HZ;
use serde::Serialize;
use serde_json::json;

use super::train::{subjects_path, FOLDS_DIR, GLOBAL_MODEL, TRAIN_CONFIG};
use super::Context;
use crate::args::EvalArgs;
use crate::config::{pick, require_path};
use crate::error::{CliError, Result};
use crate::run::{file_stem_for, write_json, write_text, RunDir};

/// 22 and 52 fused segments.
pub const DEFAULT_WINDOWS_S: [f64; 2] = [30.6, 60.6];
pub const METRICS: &str = "metrics.json";

/// Where the weights for each evaluated subject come from.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    Single(PathBuf),
    /// One `<subject>.bin` per held-out subject.
    PerSubject(PathBuf),
}

/// Resolves a weight argument and the training run it came from.
pub fn locate_weights(path: &Path) -> Result<(WeightSource, Option<PathBuf>)> {
    if path.is_file() {
        return Ok((WeightSource::Single(path.to_path_buf()), path.parent().map(Path::to_path_buf)));
    }
    if path.join(FOLDS_DIR).is_dir() {
        return Ok((WeightSource::PerSubject(path.join(FOLDS_DIR)), Some(path.to_path_buf())));
    }
    if path.join(GLOBAL_MODEL).is_file() {
        return Ok((WeightSource::Single(path.join(GLOBAL_MODEL)), Some(path.to_path_buf())));
    }
    if path.file_name().is_some_and(|n| n == FOLDS_DIR) {
        return Ok((WeightSource::PerSubject(path.to_path_buf()), path.parent().map(Path::to_path_buf)));
    }
    Err(CliError::Config(format!(
        "{} is neither a weight file nor a training run directory",
        path.display()
    )))
}

/// Input scaling recorded by the training run, if any.
pub fn recorded_scaling(run_dir: Option<&Path>) -> Option<InputScaling> {
    let text = fs::read_to_string(run_dir?.join(TRAIN_CONFIG)).ok()?;
    serde_json::from_str::<TrainConfig>(&text).ok().map(|c| c.input_scaling)
}

pub fn resolve_scaling(flag: Option<InputScaling>, ctx: &Context, run_dir: Option<&Path>) -> InputScaling {
    pick(flag, ctx.file.input_scaling.or_else(|| recorded_scaling(run_dir)), InputScaling::default())
}

#[derive(Debug, Clone, Serialize)]
pub struct Leak {
    pub subject_id: String,
    pub weights: PathBuf,
}

/// Model and weight path per recording, in recording order.
fn load_models(source: &WeightSource, recordings: &[Recording]) -> Result<Vec<(EncoderDecoderModel, PathBuf)>> {
    match source {
        WeightSource::Single(path) => {
            let model = load_weights(path)?;
            Ok(recordings.iter().map(|_| (model.clone(), path.clone())).collect())
        }
        WeightSource::PerSubject(dir) => recordings
            .iter()
            .map(|r| {
                let path = dir.join(format!("{}.bin", file_stem_for(&r.subject_id)));
                if !path.is_file() {
                    return Err(ppg_resp::Error::Dataset(format!(
                        "no fold weights for subject {} in {}",
                        r.subject_id,
                        dir.display()
                    ))
                    .into());
                }
                Ok((load_weights(&path)?, path))
            })
            .collect(),
    }
}

/// Recordings whose weights were trained on the same subject.
fn find_leaks(recordings: &[Recording], weights: &[PathBuf]) -> Vec<Leak> {
    let mut leaks = Vec::new();
    for (rec, path) in recordings.iter().zip(weights) {
        let Ok(list) = fs::read_to_string(subjects_path(path)) else {
            continue;
        };
        if list.lines().any(|s| s == rec.subject_id) {
            warn!(
                "leakage: subject {} was part of the training set of {}",
                rec.subject_id,
                path.display()
            );
            leaks.push(Leak {
                subject_id: rec.subject_id.clone(),
                weights: path.clone(),
            });
        }
    }
    leaks
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub windows_s: Vec<f64>,
    pub input_scaling: InputScaling,
    pub model: Vec<MetricsReport>,
    pub pls: Option<Vec<MetricsReport>>,
    pub pls_components: Option<usize>,
    pub leakage: Vec<Leak>,
}

fn window_label(seconds: f64) -> String {
    format!("{seconds}s")
}

fn write_window_csv(path: &Path, subjects: &[SubjectWindows]) -> Result<()> {
    write_text(path, |w| {
        writeln!(w, "subject,window_start_s,rr_est,rr_ref,abs_err")?;
        for s in subjects {
            for r in &s.windows {
                writeln!(w, "{},{},{},{},{}", r.subject_id, r.window_start_s, r.rr_est, r.rr_ref, r.abs_err)?;
            }
        }
        Ok(())
    })
}

fn write_waveforms(dir: &Path, model: &[SubjectPredictions], pls: Option<&[SubjectPredictions]>) -> Result<()> {
    for (i, p) in model.iter().enumerate() {
        let fused = p.fused()?;
        let pls_fused = pls.map(|all| all[i].fused()).transpose()?;
        let path = dir.join(format!("{}.csv", file_stem_for(&p.subject_id)));
        write_text(&path, |w| {
            write!(w, "t_sec,reference,model")?;
            if pls_fused.is_some() {
                write!(w, ",pls")?;
            }
            writeln!(w)?;
            for (t, v) in fused.iter().enumerate() {
                write!(w, "{},{},{v}", t as f64 / SAMPLE_RATE_HZ, p.reference[t])?;
                if let Some(b) = &pls_fused {
                    write!(w, ",{}", b[t])?;
                }
                writeln!(w)?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

pub fn run(args: &EvalArgs, ctx: &Context) -> Result<PathBuf> {
    let data = require_path(args.data.clone(), ctx.file.data.clone(), "data")?;
    let weights_arg = require_path(args.weights.clone(), ctx.file.weights.clone(), "weights")?;
    let (source, train_run) = locate_weights(&weights_arg)?;
    let scaling = resolve_scaling(args.scaling.map(Into::into), ctx, train_run.as_deref());
    let windows_s = pick(args.windows.clone(), ctx.file.windows.clone(), DEFAULT_WINDOWS_S.to_vec());
    let windows = windows_s
        .iter()
        .map(|&s| EvaluationWindow::from_seconds(s))
        .collect::<ppg_resp::Result<Vec<_>>>()?;
    let use_pls = args.pls || ctx.file.eval.pls.unwrap_or(false);
    let components = pick(args.pls_components, ctx.file.eval.pls_components, DEFAULT_COMPONENTS);

    let recordings = load_dataset(&data)?;
    let models = load_models(&source, &recordings)?;
    let weight_paths: Vec<PathBuf> = models.iter().map(|(_, p)| p.clone()).collect();
    let leakage = find_leaks(&recordings, &weight_paths);
    let predictions = run_parallel(recordings.len(), ctx.jobs, |i| {
        predict_recording(&models[i].0, &recordings[i], scaling)
    })?;
    let model_reports = evaluate_predictions(&predictions, &recordings, &windows)?;

    let pls_predictions = if use_pls {
        let pls = loso_pls(&recordings, components, scaling, ctx.jobs)?;
        Some(run_parallel(recordings.len(), ctx.jobs, |i| {
            predict_recording(&pls[i], &recordings[i], scaling)
        })?)
    } else {
        None
    };
    let pls_reports = pls_predictions
        .as_ref()
        .map(|p| evaluate_predictions(p, &recordings, &windows))
        .transpose()?;

    let run = RunDir::create(&ctx.out, "eval")?;
    for (i, &s) in windows_s.iter().enumerate() {
        write_window_csv(&run.join(format!("rr_windows_{}.csv", window_label(s))), &model_reports[i].1)?;
        if let Some(p) = &pls_reports {
            write_window_csv(&run.join(format!("pls_rr_windows_{}.csv", window_label(s))), &p[i].1)?;
        }
    }
    write_waveforms(&run.subdir("waveforms")?, &predictions, pls_predictions.as_deref())?;
    let report = EvalReport {
        windows_s: windows_s.clone(),
        input_scaling: scaling,
        model: model_reports.into_iter().map(|(m, _)| m).collect(),
        pls: pls_reports.map(|r| r.into_iter().map(|(m, _)| m).collect()),
        pls_components: use_pls.then_some(components),
        leakage,
    };
    write_json(&run.join(METRICS), &report)?;
    for m in &report.model {
        println!(
            "window {} s: RR mAE {:.3} bpm, mMAE {:.3} bpm, waveform MAE {:?}",
            m.window_s, m.rr_mae, m.rr_mmae, m.waveform_mae_median
        );
    }
    run.finish(
        None,
        json!({
            "data": data, "weights": weights_arg, "windows_s": windows_s,
            "input_scaling": scaling, "pls": use_pls, "pls_components": components, "jobs": ctx.jobs,
        }),
        &[data, weights_arg],
        json!({ "leakage": report.leakage.len() }),
    )
}
