//! Averaging overlapping output segments into one continuous waveform.

use serde::{Deserialize, Serialize};

use crate::data::TEST_STRIDE;
use crate::error::{Error, Result};
use crate::model::WINDOW_LEN;
use crate::SAMPLE_RATE_HZ;

/// An evaluation window made of `n_segments` consecutive 1-s-shifted test
/// segments; it spans `(n_segments - 1) + 9.6` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EvaluationWindow {
    n_segments: usize,
}

impl EvaluationWindow {
    pub fn new(n_segments: usize) -> Result<Self> {
        if n_segments == 0 {
            return Err(Error::Parameter("an evaluation window needs at least one segment".into()));
        }
        Ok(Self { n_segments })
    }

    /// Window from its duration in seconds, e.g. 30.6 -> 22 segments.
    pub fn from_seconds(seconds: f64) -> Result<Self> {
        let segment_s = WINDOW_LEN as f64 / SAMPLE_RATE_HZ;
        let extra = seconds - segment_s;
        let whole = extra.round();
        if !(extra > -1e-6) || (extra - whole).abs() > 1e-6 {
            return Err(Error::Parameter(format!(
                "window of {seconds} s is not 9.6 s plus a whole number of seconds"
            )));
        }
        Self::new(whole as usize + 1)
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    pub fn duration_s(&self) -> f64 {
        (self.n_segments - 1) as f64 + WINDOW_LEN as f64 / SAMPLE_RATE_HZ
    }

    pub fn len_samples(&self) -> usize {
        (self.n_segments - 1) * TEST_STRIDE + WINDOW_LEN
    }
}

/// Per-sample mean of segments placed at explicit sample offsets. The
/// fused signal runs from the earliest start to the latest end; every
/// sample in that span must be covered.
pub fn fuse_at_offsets(segments: &[(usize, &[f64])]) -> Result<Vec<f64>> {
    let start = segments.iter().map(|(s, _)| *s).min().ok_or(Error::FusionGap { index: 0 })?;
    let end = segments.iter().map(|(s, v)| s + v.len()).max().unwrap_or(start);
    let mut sum = vec![0.0; end - start];
    let mut count = vec![0usize; end - start];
    for (offset, values) in segments {
        let o = offset - start;
        for (i, v) in values.iter().enumerate() {
            sum[o + i] += v;
            count[o + i] += 1;
        }
    }
    if let Some(index) = count.iter().position(|&c| c == 0) {
        return Err(Error::FusionGap { index });
    }
    Ok(sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect())
}

/// Fuses `window.n_segments()` outputs produced at the 30-sample test stride.
pub fn fuse_segments<S: AsRef<[f64]>>(outputs: &[S], window: EvaluationWindow) -> Result<Vec<f64>> {
    if outputs.len() > window.n_segments() {
        return Err(Error::Parameter(format!(
            "{} outputs for a {}-segment window",
            outputs.len(),
            window.n_segments()
        )));
    }
    if outputs.iter().any(|o| o.as_ref().len() != WINDOW_LEN) {
        return Err(Error::Shape(format!("every output must have {WINDOW_LEN} samples")));
    }
    if outputs.len() < window.n_segments() {
        let covered = if outputs.is_empty() { 0 } else { (outputs.len() - 1) * TEST_STRIDE + WINDOW_LEN };
        return Err(Error::FusionGap { index: covered });
    }
    let placed: Vec<(usize, &[f64])> = outputs
        .iter()
        .enumerate()
        .map(|(i, o)| (i * TEST_STRIDE, o.as_ref()))
        .collect();
    fuse_at_offsets(&placed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn window_naming() {
        assert_eq!(EvaluationWindow::from_seconds(30.6).unwrap().n_segments(), 22);
        assert_eq!(EvaluationWindow::from_seconds(60.6).unwrap().n_segments(), 52);
        assert_eq!(EvaluationWindow::from_seconds(9.6).unwrap().n_segments(), 1);
        assert!(EvaluationWindow::from_seconds(30.0).is_err());
        let w = EvaluationWindow::new(22).unwrap();
        assert!((w.duration_s() - 30.6).abs() < 1e-12);
        assert_eq!(w.len_samples(), 918);
    }

    #[test]
    fn constant_segments() {
        let outs = vec![vec![0.3; 288]; 5];
        let fused = fuse_segments(&outs, EvaluationWindow::new(5).unwrap()).unwrap();
        assert_eq!(fused.len(), 408);
        assert!(fused.iter().all(|&v| (v - 0.3).abs() < 1e-15));
    }

    #[test]
    fn single_segment() {
        let seg: Vec<f64> = (0..288).map(|i| i as f64).collect();
        let fused = fuse_segments(&[seg.clone()], EvaluationWindow::new(1).unwrap()).unwrap();
        assert_eq!(fused, seg);
    }

    #[test]
    fn half_overlap_averages() {
        let a = vec![1.0; 4];
        let b = vec![3.0; 4];
        let fused = fuse_at_offsets(&[(0, &a), (2, &b)]).unwrap();
        assert_eq!(fused, vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
    }

    #[test]
    fn gaps_are_errors() {
        let a = vec![1.0; 2];
        assert!(matches!(
            fuse_at_offsets(&[(0, &a), (3, &a)]),
            Err(Error::FusionGap { index: 2 })
        ));
        let outs = vec![vec![0.0; 288]; 3];
        assert!(matches!(
            fuse_segments(&outs, EvaluationWindow::new(4).unwrap()),
            Err(Error::FusionGap { index: 348 })
        ));
    }

    proptest! {
        #[test]
        fn matches_brute_force_mean(
            starts in prop::collection::vec(0usize..40, 1..8),
            seed in 0u64..1000,
        ) {
            let segs: Vec<(usize, Vec<f64>)> = starts
                .iter()
                .enumerate()
                .map(|(j, &s)| (s, (0..12).map(|i| ((seed + (j * 31 + i) as u64) as f64 * 0.61).sin()).collect()))
                .collect();
            let borrowed: Vec<(usize, &[f64])> = segs.iter().map(|(s, v)| (*s, v.as_slice())).collect();
            let lo = *starts.iter().min().unwrap();
            let hi = starts.iter().max().unwrap() + 12;
            let result = fuse_at_offsets(&borrowed);
            let all_covered = (lo..hi).all(|t| segs.iter().any(|(s, v)| t >= *s && t < s + v.len()));
            prop_assert_eq!(result.is_ok(), all_covered);
            for t in lo..hi {
                let covering: Vec<f64> = segs
                    .iter()
                    .filter(|(s, v)| t >= *s && t < s + v.len())
                    .map(|(s, v)| v[t - s])
                    .collect();
                match &result {
                    Ok(fused) => {
                        prop_assert!(!covering.is_empty());
                        let mut sum = 0.0;
                        for c in &covering { sum += c; }
                        prop_assert_eq!(fused[t - lo], sum / covering.len() as f64);
                    }
                    Err(Error::FusionGap { index }) => {
                        if covering.is_empty() { prop_assert!(*index <= t - lo); }
                    }
                    Err(e) => prop_assert!(false, "unexpected error {e}"),
                }
            }
        }
    }
}
