use std::path::PathBuf;

use ppg_resp::data::{generate_synthetic, write_recording, SynthConfig};
use serde_json::json;

use super::Context;
use crate::args::SynthArgs;
use crate::config::pick;
use crate::error::Result;
use crate::run::{file_stem_for, RunDir};

pub fn resolve(args: &SynthArgs, ctx: &Context) -> SynthConfig {
    let base = ctx.file.synth.clone().unwrap_or_default();
    SynthConfig {
        n_subjects: pick(args.subjects, None, base.n_subjects),
        duration_s: pick(args.duration, None, base.duration_s),
        seed: pick(args.seed, ctx.file.seed, base.seed),
        resp_rate_bpm: (
            pick(args.rr_min, None, base.resp_rate_bpm.0),
            pick(args.rr_max, None, base.resp_rate_bpm.1),
        ),
        noise_std: pick(args.noise_std, None, base.noise_std),
        ..base
    }
}

/// Writes `data/<subject>.csv` and `data/<subject>.rr.csv` for every
/// synthetic subject.
pub fn run(args: &SynthArgs, ctx: &Context) -> Result<PathBuf> {
    let config = resolve(args, ctx);
    let recordings = generate_synthetic(&config)?;
    let run = RunDir::create(&ctx.out, "synth")?;
    let data = run.subdir("data")?;
    for rec in &recordings {
        write_recording(rec, &data.join(format!("{}.csv", file_stem_for(&rec.subject_id))))?;
    }
    log::info!("wrote {} recordings to {}", recordings.len(), data.display());
    run.finish(
        Some(config.seed),
        json!({ "synth": config }),
        &[],
        json!({ "subjects": recordings.iter().map(|r| &r.subject_id).collect::<Vec<_>>() }),
    )
}
