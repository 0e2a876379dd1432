use std::io::Write;
use std::path::{Path, PathBuf};

use ppg_resp::data::segment::segment_training_with;
use ppg_resp::data::{load_dataset, Recording};
use ppg_resp::model::{build_model, load_weights, save_weights, EncoderDecoderModel, ModelConfig};
use ppg_resp::training::{loso_cv, loso_transfer, train, transfer_retrain, FoldResult, TrainConfig};
use serde_json::json;

use super::Context;
use crate::args::TrainArgs;
use crate::config::{pick, require_path};
use crate::error::Result;
use crate::run::{file_stem_for, write_json, write_text, RunDir};

/// Resolved training configuration saved next to the weights; evaluation
/// reads its input scaling from here.
pub const TRAIN_CONFIG: &str = "train_config.json";
pub const FOLDS_DIR: &str = "folds";
pub const GLOBAL_MODEL: &str = "model.bin";

pub fn resolve(args: &TrainArgs, ctx: &Context) -> TrainConfig {
    let base = ctx.file.train.clone().unwrap_or_default();
    TrainConfig {
        epochs: pick(args.epochs, None, base.epochs),
        batch_size: pick(args.batch_size, None, base.batch_size),
        learning_rate: pick(args.learning_rate, None, base.learning_rate),
        keep_probability: pick(args.keep_probability, None, base.keep_probability),
        seed: pick(args.seed, ctx.file.seed, base.seed),
        input_scaling: pick(args.scaling.map(Into::into), ctx.file.input_scaling, base.input_scaling),
        ..base
    }
}

/// `<stem>.subjects.txt` next to a weight file lists the subjects it was
/// trained on, one per line.
pub fn subjects_path(weights: &Path) -> PathBuf {
    let stem = weights.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    weights.with_file_name(format!("{stem}.subjects.txt"))
}

fn write_model(model: &EncoderDecoderModel, path: &Path, subjects: &[String]) -> Result<()> {
    save_weights(model, path, true)?;
    write_text(&subjects_path(path), |w| subjects.iter().try_for_each(|s| writeln!(w, "{s}")))
}

fn write_loss(path: &Path, history: &[f64]) -> Result<()> {
    write_text(path, |w| {
        writeln!(w, "epoch,loss")?;
        history.iter().enumerate().try_for_each(|(e, l)| writeln!(w, "{},{l}", e + 1))
    })
}

fn write_folds(run: &RunDir, folds: &[FoldResult]) -> Result<()> {
    let dir = run.subdir(FOLDS_DIR)?;
    let loss = run.subdir("loss")?;
    for f in folds {
        let stem = file_stem_for(&f.held_out_subject);
        write_model(&f.model, &dir.join(format!("{stem}.bin")), &f.train_subjects)?;
        write_loss(&loss.join(format!("{stem}.csv")), &f.loss_history)?;
    }
    write_text(&run.join("folds.csv"), |w| {
        writeln!(w, "fold,held_out_subject,train_subjects,train_segments,final_loss")?;
        folds.iter().enumerate().try_for_each(|(i, f)| {
            writeln!(
                w,
                "{},{},{},{},{}",
                i + 1,
                f.held_out_subject,
                f.train_subjects.join(";"),
                f.train_segments,
                f.loss_history.last().copied().unwrap_or(f64::NAN)
            )
        })
    })
}

fn train_global(
    recordings: &[Recording],
    pretrained: Option<&EncoderDecoderModel>,
    config: &TrainConfig,
) -> Result<(EncoderDecoderModel, Vec<f64>)> {
    if let Some(p) = pretrained {
        return Ok(transfer_retrain(p, recordings, config)?);
    }
    let mut segments = Vec::new();
    for r in recordings {
        segments.extend(segment_training_with(r, config.input_scaling)?);
    }
    let mut model = build_model(&ModelConfig::default(), config.seed)?;
    let history = train(&mut model, &segments, config)?;
    Ok((model, history))
}

pub fn run(args: &TrainArgs, ctx: &Context) -> Result<PathBuf> {
    let data = require_path(args.data.clone(), ctx.file.data.clone(), "data")?;
    let config = resolve(args, ctx);
    config.validate()?;
    let recordings = load_dataset(&data)?;
    let pretrained = match &args.pretrained {
        Some(p) => Some(load_weights(p)?),
        None => None,
    };
    let began = std::time::Instant::now();
    let run = RunDir::create(&ctx.out, "train")?;
    write_json(&run.join(TRAIN_CONFIG), &config)?;
    let mut inputs = vec![data];
    inputs.extend(args.pretrained.clone());

    let notes = if args.no_loso {
        let (model, history) = train_global(&recordings, pretrained.as_ref(), &config)?;
        let subjects: Vec<String> = recordings.iter().map(|r| r.subject_id.clone()).collect();
        write_model(&model, &run.join(GLOBAL_MODEL), &subjects)?;
        write_loss(&run.join("loss.csv"), &history)?;
        json!({ "mode": "global", "wall_clock_s": began.elapsed().as_secs_f64() })
    } else {
        let folds = match &pretrained {
            Some(p) => loso_transfer(p, &recordings, &config, ctx.jobs)?,
            None => loso_cv(&recordings, &ModelConfig::default(), &config, ctx.jobs)?,
        };
        write_folds(&run, &folds)?;
        let per_fold: serde_json::Map<String, serde_json::Value> = folds
            .iter()
            .map(|f| (f.held_out_subject.clone(), json!(f.wall_clock.as_secs_f64())))
            .collect();
        json!({
            "mode": "loso",
            "folds": folds.len(),
            "wall_clock_s": began.elapsed().as_secs_f64(),
            "fold_wall_clock_s": per_fold,
        })
    };
    run.finish(
        Some(config.seed),
        json!({ "train": config, "no_loso": args.no_loso, "pretrained": args.pretrained, "jobs": ctx.jobs }),
        &inputs,
        notes,
    )
}
