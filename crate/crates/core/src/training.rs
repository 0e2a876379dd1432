//! Mini-batch training, leave-one-subject-out cross-validation and
//! retraining of a pretrained model on a new dataset.

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::segment::segment_training_with;
use crate::data::{InputScaling, Recording, SegmentPair};
use crate::error::{Error, Result};
use crate::evaluation::{pls_train, predict_recording, PlsModel, SubjectPredictions};
use crate::model::{build_model, EncoderDecoderModel, ModelConfig, ModelGrads};
use crate::nn::{mse_loss, AdamConfig, FeatureMap};
use crate::seed::mix_seed;

const SHUFFLE_STREAM: u64 = 0x5348_5546;
const DROPOUT_STREAM: u64 = 0x4452_4f50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub keep_probability: f64,
    pub adam: AdamConfig,
    /// Start retraining with fresh optimizer moments.
    pub reset_adam_on_transfer: bool,
    pub input_scaling: InputScaling,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 200,
            seed: 0,
            keep_probability: 0.5,
            adam: AdamConfig::default(),
            reset_adam_on_transfer: true,
            input_scaling: InputScaling::ZScore,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Parameter(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch size must be positive".into()));
        }
        if !(self.keep_probability > 0.0 && self.keep_probability <= 1.0) {
            return Err(Error::Parameter(format!(
                "keep probability {} not in (0, 1]",
                self.keep_probability
            )));
        }
        let a = &self.adam;
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.epsilon > 0.0) {
            return Err(Error::Parameter(format!("invalid Adam settings {a:?}")));
        }
        Ok(())
    }
}

/// Trains `model` in place and returns the mean training loss of every
/// epoch (measured with dropout active, as seen by the optimizer).
///
/// The visiting order is a Fisher-Yates shuffle per epoch and every sample
/// draws its dropout masks from its own seed, so the run is a pure function
/// of the model, the segments and `config`.
pub fn train(model: &mut EncoderDecoderModel, segments: &[SegmentPair], config: &TrainConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if segments.is_empty() {
        return Err(Error::Dataset("no training segments".into()));
    }
    let window = model.config().window;
    let samples = segments
        .iter()
        .map(|s| {
            if s.input.len() != window || s.target.len() != window {
                return Err(Error::Shape(format!(
                    "{} segment at {} has {}/{} samples, model window is {window}",
                    s.subject_id,
                    s.start_index,
                    s.input.len(),
                    s.target.len()
                )));
            }
            Ok((FeatureMap::from_signal(&s.input)?, FeatureMap::from_signal(&s.target)?))
        })
        .collect::<Result<Vec<_>>>()?;

    model.set_keep_probability(config.keep_probability)?;
    if model.adam_states().iter().all(|s| s.step_count == 0) {
        model.reset_optimizer(config.adam);
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, SHUFFLE_STREAM));
    let dropout_base = mix_seed(config.seed, DROPOUT_STREAM);
    let mut grads = ModelGrads::zeros_like(model);
    let mut history = Vec::with_capacity(config.epochs);
    let mut visited = 0u64;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            grads.fill(0.0);
            let mut batch_loss = 0.0;
            for &idx in chunk {
                let (input, target) = &samples[idx];
                let trace = model.forward_trace(input, true, mix_seed(dropout_base, visited))?;
                visited += 1;
                let (loss, grad_out) = mse_loss(trace.output(), target)?;
                batch_loss += loss;
                model.backward(&trace, &grad_out, &mut grads)?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            grads.scale(1.0 / chunk.len() as f64);
            model.apply_gradients(&grads, config.learning_rate)?;
            epoch_loss += batch_loss;
        }
        let mean = epoch_loss / samples.len() as f64;
        debug!("epoch {epoch}: loss {mean:.6}");
        history.push(mean);
    }
    Ok(history)
}

/// Inference-mode mean squared error over `segments`.
pub fn evaluate_mse(model: &EncoderDecoderModel, segments: &[SegmentPair]) -> Result<f64> {
    if segments.is_empty() {
        return Err(Error::Dataset("no segments to evaluate".into()));
    }
    let mut total = 0.0;
    for s in segments {
        let out = model.predict(&s.input)?;
        total += mse_loss(&FeatureMap::from_signal(&out)?, &FeatureMap::from_signal(&s.target)?)?.0;
    }
    Ok(total / segments.len() as f64)
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub held_out_subject: String,
    pub train_subjects: Vec<String>,
    pub train_segments: usize,
    pub model: EncoderDecoderModel,
    pub loss_history: Vec<f64>,
    pub wall_clock: Duration,
}

fn check_subjects(recordings: &[Recording]) -> Result<()> {
    if recordings.len() < 2 {
        return Err(Error::Dataset(format!(
            "leave-one-subject-out needs at least 2 subjects, got {}",
            recordings.len()
        )));
    }
    let mut seen = HashSet::new();
    for r in recordings {
        if !seen.insert(r.subject_id.as_str()) {
            return Err(Error::Dataset(format!("duplicate subject id {}", r.subject_id)));
        }
    }
    Ok(())
}

/// Runs `task(k)` for `k in 0..n` on up to `jobs` threads and returns the
/// results in index order.
pub fn run_parallel<T: Send>(n: usize, jobs: usize, task: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let jobs = jobs.clamp(1, n.max(1));
    if jobs == 1 {
        return (0..n).map(task).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= n {
                    break;
                }
                let result = task(k);
                slots.lock().expect("worker panicked")[k] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every index ran"))
        .collect()
}

fn training_segments(recordings: &[Recording], scaling: InputScaling) -> Result<Vec<Vec<SegmentPair>>> {
    recordings.iter().map(|r| segment_training_with(r, scaling)).collect()
}

fn fold_inputs<'a>(per_subject: &'a [Vec<SegmentPair>], held_out: usize) -> Vec<SegmentPair> {
    per_subject
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != held_out)
        .flat_map(|(_, segs): (usize, &'a Vec<SegmentPair>)| segs.iter().cloned())
        .collect()
}

fn run_folds(
    recordings: &[Recording],
    config: &TrainConfig,
    jobs: usize,
    start: impl Fn() -> Result<EncoderDecoderModel> + Sync,
) -> Result<Vec<FoldResult>> {
    check_subjects(recordings)?;
    config.validate()?;
    let per_subject = training_segments(recordings, config.input_scaling)?;
    run_parallel(recordings.len(), jobs, |k| {
        let began = Instant::now();
        let segments = fold_inputs(&per_subject, k);
        let mut model = start()?;
        let loss_history = train(&mut model, &segments, config)?;
        let held_out_subject = recordings[k].subject_id.clone();
        info!(
            "fold {}/{} ({held_out_subject}): {} segments, final loss {:.5}",
            k + 1,
            recordings.len(),
            segments.len(),
            loss_history.last().copied().unwrap_or(f64::NAN)
        );
        Ok(FoldResult {
            held_out_subject,
            train_subjects: recordings
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != k)
                .map(|(_, r)| r.subject_id.clone())
                .collect(),
            train_segments: segments.len(),
            model,
            loss_history,
            wall_clock: began.elapsed(),
        })
    })
}

/// One fold per subject: a fresh model (initialized from `config.seed`) is
/// trained on every other subject's training segments.
pub fn loso_cv(
    recordings: &[Recording],
    model_config: &ModelConfig,
    config: &TrainConfig,
    jobs: usize,
) -> Result<Vec<FoldResult>> {
    run_folds(recordings, config, jobs, || build_model(model_config, config.seed))
}

/// Continues training a copy of `pretrained` on the training segments of
/// `recordings`.
pub fn transfer_retrain(
    pretrained: &EncoderDecoderModel,
    recordings: &[Recording],
    config: &TrainConfig,
) -> Result<(EncoderDecoderModel, Vec<f64>)> {
    let segments: Vec<SegmentPair> = training_segments(recordings, config.input_scaling)?
        .into_iter()
        .flatten()
        .collect();
    let mut model = retrain_start(pretrained, config);
    let history = train(&mut model, &segments, config)?;
    Ok((model, history))
}

fn retrain_start(pretrained: &EncoderDecoderModel, config: &TrainConfig) -> EncoderDecoderModel {
    let mut model = pretrained.clone();
    if config.reset_adam_on_transfer {
        model.reset_optimizer(config.adam);
    }
    model
}

/// Leave-one-subject-out retraining: every fold starts from `pretrained`.
pub fn loso_transfer(
    pretrained: &EncoderDecoderModel,
    recordings: &[Recording],
    config: &TrainConfig,
    jobs: usize,
) -> Result<Vec<FoldResult>> {
    run_folds(recordings, config, jobs, || Ok(retrain_start(pretrained, config)))
}

/// Fits a PLS model on the inputs and targets of `segments`.
pub fn train_pls(segments: &[SegmentPair], n_components: usize) -> Result<PlsModel> {
    let x: Vec<Vec<f64>> = segments.iter().map(|s| s.input.clone()).collect();
    let y: Vec<Vec<f64>> = segments.iter().map(|s| s.target.clone()).collect();
    pls_train(&x, &y, n_components)
}

/// The PLS baseline on the same leave-one-subject-out folds as [`loso_cv`].
pub fn loso_pls(
    recordings: &[Recording],
    n_components: usize,
    scaling: InputScaling,
    jobs: usize,
) -> Result<Vec<PlsModel>> {
    check_subjects(recordings)?;
    let per_subject = training_segments(recordings, scaling)?;
    run_parallel(recordings.len(), jobs, |k| train_pls(&fold_inputs(&per_subject, k), n_components))
}

/// Test-set outputs of each fold's model on its held-out recording, in
/// recording order.
pub fn held_out_predictions(
    folds: &[FoldResult],
    recordings: &[Recording],
    scaling: InputScaling,
) -> Result<Vec<SubjectPredictions>> {
    recordings
        .iter()
        .map(|r| {
            let fold = folds
                .iter()
                .find(|f| f.held_out_subject == r.subject_id)
                .ok_or_else(|| Error::Dataset(format!("no fold holds out {}", r.subject_id)))?;
            predict_recording(&fold.model, r, scaling)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, segment_training, SynthConfig};

    fn small_model() -> EncoderDecoderModel {
        build_model(&ModelConfig::shrunken(), 3).unwrap()
    }

    fn small_segment(phase: f64) -> SegmentPair {
        let input: Vec<f64> = (0..32).map(|i| ((i as f64) * 0.4 + phase).sin()).collect();
        let target: Vec<f64> = (0..32).map(|i| 0.5 + 0.4 * ((i as f64) * 0.2 + phase).cos()).collect();
        SegmentPair {
            input,
            target,
            subject_id: "s".into(),
            start_index: 0,
        }
    }

    #[test]
    fn memorizes_one_segment() {
        let mut model = build_model(&ModelConfig::default(), 5).unwrap();
        let rec = generate_synthetic(&SynthConfig {
            n_subjects: 1,
            duration_s: 20.0,
            ..SynthConfig::default()
        })
        .unwrap()
        .remove(0);
        let seg = segment_training(&rec).unwrap().remove(0);
        let config = TrainConfig::default();
        let history = train(&mut model, std::slice::from_ref(&seg), &config).unwrap();
        assert_eq!(history.len(), 200);
        let mse = evaluate_mse(&model, &[seg]).unwrap();
        assert!(mse < 0.01, "mse {mse}");
    }

    #[test]
    fn zero_epochs_leave_model_unchanged() {
        let mut model = small_model();
        let before = model.clone();
        let config = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let history = train(&mut model, &[small_segment(0.0)], &config).unwrap();
        assert!(history.is_empty());
        assert_eq!(model.layers(), before.layers());
    }

    #[test]
    fn deterministic_and_decreasing() {
        let segs: Vec<SegmentPair> = (0..10).map(|i| small_segment(i as f64 * 0.3)).collect();
        let config = TrainConfig {
            epochs: 30,
            batch_size: 4,
            learning_rate: 3e-3,
            ..TrainConfig::default()
        };
        let mut a = small_model();
        let mut b = small_model();
        let ha = train(&mut a, &segs, &config).unwrap();
        let hb = train(&mut b, &segs, &config).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a.layers(), b.layers());
        assert!(ha.last().unwrap() < ha.first().unwrap());
    }

    #[test]
    fn rejects_empty_and_misshapen_input() {
        let mut model = small_model();
        assert!(train(&mut model, &[], &TrainConfig::default()).is_err());
        let mut seg = small_segment(0.0);
        seg.input.pop();
        assert!(matches!(
            train(&mut model, &[seg], &TrainConfig::default()),
            Err(Error::Shape(_))
        ));
    }

    fn synthetic(n: usize) -> Vec<Recording> {
        generate_synthetic(&SynthConfig {
            n_subjects: n,
            duration_s: 30.0,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn folds_partition_subjects() {
        let recs = synthetic(3);
        let config = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let folds = loso_cv(&recs, &ModelConfig::default(), &config, 1).unwrap();
        assert_eq!(folds.len(), 3);
        for (fold, rec) in folds.iter().zip(&recs) {
            assert_eq!(fold.held_out_subject, rec.subject_id);
            assert!(!fold.train_subjects.contains(&fold.held_out_subject));
            assert_eq!(fold.train_subjects.len(), 2);
            assert_eq!(fold.train_segments, 2 * 3);
        }
        let parallel = loso_cv(&recs, &ModelConfig::default(), &config, 3).unwrap();
        for (a, b) in folds.iter().zip(&parallel) {
            assert_eq!(a.model.layers(), b.model.layers());
        }
    }

    #[test]
    fn loso_needs_two_distinct_subjects() {
        let recs = synthetic(2);
        let config = TrainConfig::default();
        assert!(matches!(
            loso_cv(&recs[..1], &ModelConfig::default(), &config, 1),
            Err(Error::Dataset(_))
        ));
        let dup = vec![recs[0].clone(), recs[0].clone()];
        assert!(matches!(
            loso_cv(&dup, &ModelConfig::default(), &config, 1),
            Err(Error::Dataset(_))
        ));
    }

    #[test]
    fn zero_epoch_retraining_returns_pretrained() {
        let recs = synthetic(2);
        let pretrained = build_model(&ModelConfig::default(), 8).unwrap();
        let config = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let (model, history) = transfer_retrain(&pretrained, &recs, &config).unwrap();
        assert!(history.is_empty());
        assert_eq!(model.layers(), pretrained.layers());
        let folds = loso_transfer(&pretrained, &recs, &config, 1).unwrap();
        assert_eq!(folds.len(), 2);
    }

    #[test]
    fn pls_folds_match_subjects() {
        let recs = synthetic(3);
        let models = loso_pls(&recs, 5, InputScaling::ZScore, 1).unwrap();
        assert_eq!(models.len(), 3);
        assert!(models.iter().all(|m| m.n_components == 5));
    }
}
