use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use ppg_resp::data::load_dataset;
use ppg_resp::evaluation::median;
use ppg_resp::interpret::{kernel_rr_distribution, write_distribution_csv, write_kernel_weights_csv};
use ppg_resp::model::load_weights;
use serde_json::json;

use super::eval::{locate_weights, resolve_scaling, WeightSource};
use super::Context;
use crate::args::InterpretArgs;
use crate::config::{pick, require_path};
use crate::error::{CliError, Result};
use crate::run::RunDir;

pub const DISTRIBUTION_CSV: &str = "kernel_rr.csv";
pub const KERNEL_WEIGHTS_CSV: &str = "kernel_weights.csv";

pub fn run(args: &InterpretArgs, ctx: &Context) -> Result<PathBuf> {
    let data = require_path(args.data.clone(), ctx.file.data.clone(), "data")?;
    let weights_arg = require_path(args.weights.clone(), ctx.file.weights.clone(), "weights")?;
    let (source, train_run) = locate_weights(&weights_arg)?;
    let WeightSource::Single(weights) = source else {
        return Err(CliError::Config(
            "interpret needs a single model; pass a weight file or a run trained with --no-loso".into(),
        ));
    };
    let scaling = resolve_scaling(args.scaling.map(Into::into), ctx, train_run.as_deref());
    let mode = pick(args.mode.map(Into::into), ctx.file.interpret.mode, Default::default());
    let model = load_weights(&weights)?;
    let recordings = load_dataset(&data)?;
    let dist = kernel_rr_distribution(&model, &recordings, mode, scaling)?;
    if dist.skipped > 0 {
        eprintln!("{} windows had no reference rate annotations and were skipped", dist.skipped);
    }

    let run = RunDir::create(&ctx.out, "interpret")?;
    let create = |name: &str| {
        let path = run.join(name);
        File::create(&path).map(BufWriter::new).map_err(CliError::io(path))
    };
    write_distribution_csv(&dist, create(DISTRIBUTION_CSV)?)?;
    write_kernel_weights_csv(&model, create(KERNEL_WEIGHTS_CSV)?)?;
    let summary: Vec<_> = dist
        .per_kernel
        .iter()
        .enumerate()
        .map(|(k, rates)| json!({ "kernel": k + 1, "windows": rates.len(), "median_rr_bpm": median(rates) }))
        .collect();
    for s in &summary {
        println!("kernel {}: {} windows, median RR {}", s["kernel"], s["windows"], s["median_rr_bpm"]);
    }
    run.finish(
        None,
        json!({ "data": data, "weights": weights, "mode": mode, "input_scaling": scaling }),
        &[data, weights],
        json!({ "attributed": dist.attributions.len(), "skipped": dist.skipped, "kernels": summary }),
    )
}
