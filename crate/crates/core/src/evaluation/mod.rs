//! Fusion of sliding outputs, rate and duty-cycle estimation, error metrics
//! and the linear baseline.

pub mod fft;
pub mod fusion;
pub mod metrics;
pub mod pls;
pub mod rr;

pub use fusion::{fuse_at_offsets, fuse_segments, EvaluationWindow};
pub use metrics::{
    aggregate_metrics, median, pearson_corr, quantile, waveform_mae, MetricsReport, SubjectSummary, SubjectWindows,
    WindowResult,
};
pub use pls::{pls_train, PlsModel, DEFAULT_COMPONENTS};
pub use rr::{duty_cycle, estimate_rr_fft, RrEstimator, DEFAULT_BAND_BPM, DEFAULT_PAD_TO};

use log::warn;

use crate::data::segment::segment_test_with;
use crate::data::{normalize_target, InputScaling, Recording, TEST_STRIDE};
use crate::error::{Error, Result};
use crate::model::EncoderDecoderModel;
use crate::SAMPLE_RATE_HZ;

/// Anything that maps one normalized input window to one output window.
pub trait WindowPredictor {
    fn predict_window(&self, input: &[f64]) -> Result<Vec<f64>>;
}

impl WindowPredictor for EncoderDecoderModel {
    fn predict_window(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.predict(input)
    }
}

impl WindowPredictor for PlsModel {
    fn predict_window(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.predict(input)
    }
}

/// Outputs for every test segment of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectPredictions {
    pub subject_id: String,
    /// Output of segment `k`, which starts at sample `k * TEST_STRIDE`.
    pub outputs: Vec<Vec<f64>>,
    /// The min-max normalized reference respiratory waveform.
    pub reference: Vec<f64>,
}

impl SubjectPredictions {
    /// All outputs fused into one waveform starting at sample 0.
    pub fn fused(&self) -> Result<Vec<f64>> {
        let placed: Vec<(usize, &[f64])> = self
            .outputs
            .iter()
            .enumerate()
            .map(|(k, o)| (k * TEST_STRIDE, o.as_slice()))
            .collect();
        fuse_at_offsets(&placed)
    }

    /// Mean absolute error of the fused output over the span it covers.
    pub fn waveform_mae(&self) -> Result<f64> {
        let fused = self.fused()?;
        waveform_mae(&fused, &self.reference[..fused.len()])
    }
}

pub fn predict_recording<P: WindowPredictor + ?Sized>(
    predictor: &P,
    recording: &Recording,
    scaling: InputScaling,
) -> Result<SubjectPredictions> {
    let segments = segment_test_with(recording, scaling)?;
    if segments.is_empty() {
        return Err(Error::Dataset(format!(
            "{}: recording is shorter than one window",
            recording.subject_id
        )));
    }
    let outputs = segments
        .iter()
        .map(|s| predictor.predict_window(&s.input))
        .collect::<Result<Vec<_>>>()?;
    Ok(SubjectPredictions {
        subject_id: recording.subject_id.clone(),
        outputs,
        reference: normalize_target(&recording.resp_ref)?,
    })
}

/// Slides `window` over the recording one segment (one second) at a time
/// and estimates rate and duty cycle from each fused window. The reference
/// rate is the mean annotation inside the window when annotations exist,
/// otherwise the FFT estimate of the reference waveform. Windows where
/// either rate cannot be estimated are counted as skipped.
pub fn evaluate_subject(
    predictions: &SubjectPredictions,
    recording: &Recording,
    window: EvaluationWindow,
    estimator: &RrEstimator,
) -> Result<SubjectWindows> {
    let n = window.n_segments();
    let len = window.len_samples();
    let count = predictions.outputs.len();
    let mut windows = Vec::new();
    let mut skipped = 0;
    for k in 0..(count + 1).saturating_sub(n) {
        let start = k * TEST_STRIDE;
        let fused = fuse_segments(&predictions.outputs[k..k + n], window)?;
        let reference = &predictions.reference[start..start + len];
        let start_s = start as f64 / SAMPLE_RATE_HZ;
        let end_s = start_s + window.duration_s();
        let rr_ref = match recording.mean_annotated_rr(start_s, end_s) {
            Some(rr) => Ok(rr),
            None => estimator.estimate(reference),
        };
        let (rr_est, rr_ref) = match (estimator.estimate(&fused), rr_ref) {
            (Ok(e), Ok(r)) => (e, r),
            (e, r) => {
                let err = e.err().or(r.err()).expect("one side failed");
                warn!("{}: skipping window at {start_s} s: {err}", predictions.subject_id);
                skipped += 1;
                continue;
            }
        };
        windows.push(WindowResult {
            subject_id: predictions.subject_id.clone(),
            window_start_s: start_s,
            rr_est,
            rr_ref,
            abs_err: (rr_est - rr_ref).abs(),
            duty_est: duty_cycle(&fused),
            duty_ref: duty_cycle(reference),
        });
    }
    Ok(SubjectWindows {
        subject_id: predictions.subject_id.clone(),
        windows,
        waveform_mae: Some(predictions.waveform_mae()?),
        skipped_windows: skipped,
    })
}

/// Predicts every recording with `predictor` and aggregates one report per
/// requested window.
pub fn evaluate<P: WindowPredictor + ?Sized>(
    predictor: &P,
    recordings: &[Recording],
    windows: &[EvaluationWindow],
    scaling: InputScaling,
) -> Result<Vec<(MetricsReport, Vec<SubjectWindows>)>> {
    let predictions = recordings
        .iter()
        .map(|r| predict_recording(predictor, r, scaling))
        .collect::<Result<Vec<_>>>()?;
    evaluate_predictions(&predictions, recordings, windows)
}

/// Aggregates already computed predictions; `predictions[i]` belongs to
/// `recordings[i]`.
pub fn evaluate_predictions(
    predictions: &[SubjectPredictions],
    recordings: &[Recording],
    windows: &[EvaluationWindow],
) -> Result<Vec<(MetricsReport, Vec<SubjectWindows>)>> {
    if predictions.len() != recordings.len() {
        return Err(Error::Shape(format!(
            "{} prediction sets for {} recordings",
            predictions.len(),
            recordings.len()
        )));
    }
    let estimator = RrEstimator::default();
    windows
        .iter()
        .map(|&w| {
            let subjects = predictions
                .iter()
                .zip(recordings)
                .map(|(p, r)| evaluate_subject(p, r, w, &estimator))
                .collect::<Result<Vec<_>>>()?;
            Ok((aggregate_metrics(w, &subjects)?, subjects))
        })
        .collect()
}
