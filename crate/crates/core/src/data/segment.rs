//! Cutting recordings into model-sized windows.

use log::warn;

use super::normalize::{normalize_target, scale_input, InputScaling};
use super::recording::Recording;
use crate::error::Result;
use crate::model::WINDOW_LEN;

/// Non-overlapping training windows per 480 s recording.
pub const TRAIN_SEGMENTS: usize = 50;
/// One second at 30 Hz.
pub const TEST_STRIDE: usize = 30;

/// A PPG input window and its normalized respiratory target.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPair {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub subject_id: String,
    pub start_index: usize,
}

fn make_pair(
    recording: &Recording,
    target: &[f64],
    start: usize,
    scaling: InputScaling,
) -> Result<SegmentPair> {
    let input = scale_input(&recording.ppg[start..start + WINDOW_LEN], scaling)?;
    Ok(SegmentPair {
        input,
        target: target[start..start + WINDOW_LEN].to_vec(),
        subject_id: recording.subject_id.clone(),
        start_index: start,
    })
}

/// Up to 50 consecutive non-overlapping windows from the start of the
/// recording. Constant PPG windows are skipped with a warning.
pub fn segment_training(recording: &Recording) -> Result<Vec<SegmentPair>> {
    segment_training_with(recording, InputScaling::ZScore)
}

pub fn segment_training_with(recording: &Recording, scaling: InputScaling) -> Result<Vec<SegmentPair>> {
    let target = normalize_target(&recording.resp_ref)?;
    let available = recording.len() / WINDOW_LEN;
    if available < TRAIN_SEGMENTS {
        warn!(
            "{}: only {} samples, producing {available} training segments instead of {TRAIN_SEGMENTS}",
            recording.subject_id,
            recording.len()
        );
    }
    let mut out = Vec::with_capacity(available.min(TRAIN_SEGMENTS));
    for s in 0..available.min(TRAIN_SEGMENTS) {
        let start = s * WINDOW_LEN;
        match make_pair(recording, &target, start, scaling) {
            Ok(pair) => out.push(pair),
            Err(e) => warn!("{}: skipping training window at {start}: {e}", recording.subject_id),
        }
    }
    Ok(out)
}

/// Number of sliding test windows for a recording of `len` samples.
pub fn test_segment_count(len: usize) -> usize {
    if len < WINDOW_LEN {
        0
    } else {
        (len - WINDOW_LEN) / TEST_STRIDE + 1
    }
}

/// Windows every second (30 samples). A constant PPG window cannot be
/// standardized; it is replaced by zeros so the windows still tile the
/// recording.
pub fn segment_test(recording: &Recording) -> Result<Vec<SegmentPair>> {
    segment_test_with(recording, InputScaling::ZScore)
}

pub fn segment_test_with(recording: &Recording, scaling: InputScaling) -> Result<Vec<SegmentPair>> {
    let target = normalize_target(&recording.resp_ref)?;
    let n = test_segment_count(recording.len());
    let mut out = Vec::with_capacity(n);
    for s in 0..n {
        let start = s * TEST_STRIDE;
        let pair = match make_pair(recording, &target, start, scaling) {
            Ok(pair) => pair,
            Err(e) => {
                warn!("{}: zeroing test window at {start}: {e}", recording.subject_id);
                SegmentPair {
                    input: vec![0.0; WINDOW_LEN],
                    target: target[start..start + WINDOW_LEN].to_vec(),
                    subject_id: recording.subject_id.clone(),
                    start_index: start,
                }
            }
        };
        out.push(pair);
    }
    Ok(out)
}
