//! Error statistics and the aggregate report.

use serde::{Deserialize, Serialize};

use super::fusion::EvaluationWindow;
use crate::error::{Error, Result};

/// Mean absolute difference between two equally long waveforms.
pub fn waveform_mae(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    if estimate.len() != reference.len() || estimate.is_empty() {
        return Err(Error::Shape(format!(
            "waveform lengths {} and {} differ or are zero",
            estimate.len(),
            reference.len()
        )));
    }
    Ok(estimate
        .iter()
        .zip(reference)
        .map(|(e, r)| (e - r).abs())
        .sum::<f64>()
        / estimate.len() as f64)
}

pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("series lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::UndefinedCorrelation("need at least 3 points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("a series is constant".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Linear-interpolation quantile (`q` in [0, 1]) of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Rate and duty-cycle results for one evaluation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub subject_id: String,
    pub window_start_s: f64,
    pub rr_est: f64,
    pub rr_ref: f64,
    pub abs_err: f64,
    pub duty_est: f64,
    pub duty_ref: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectWindows {
    pub subject_id: String,
    pub windows: Vec<WindowResult>,
    /// Mean absolute error of the whole fused output against the reference.
    pub waveform_mae: Option<f64>,
    /// Windows for which no rate could be estimated.
    pub skipped_windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectSummary {
    pub subject_id: String,
    pub n_windows: usize,
    pub rr_mean_abs_error: Option<f64>,
    pub waveform_mae: Option<f64>,
    pub duty_pearson_r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub window_s: f64,
    pub n_segments: usize,
    pub n_subjects: usize,
    pub n_windows: usize,
    pub skipped_windows: usize,
    /// Median absolute rate error over all windows (mAE).
    pub rr_mae: f64,
    /// Median over subjects of each subject's mean absolute error (mMAE).
    pub rr_mmae: f64,
    pub rr_abs_err_q25: f64,
    pub rr_abs_err_q75: f64,
    pub waveform_mae_median: Option<f64>,
    pub waveform_mae_q25: Option<f64>,
    pub waveform_mae_q75: Option<f64>,
    pub duty_mean_abs_error: f64,
    pub duty_median_abs_error: f64,
    /// Pearson r of estimated vs reference duty cycle over all windows.
    pub duty_pearson_r: Option<f64>,
    /// Median of the per-subject duty-cycle correlations that are defined.
    pub duty_median_subject_r: Option<f64>,
    pub subjects: Vec<SubjectSummary>,
    pub rr_abs_errors: Vec<f64>,
}

pub fn aggregate_metrics(window: EvaluationWindow, subjects: &[SubjectWindows]) -> Result<MetricsReport> {
    let all: Vec<&WindowResult> = subjects.iter().flat_map(|s| &s.windows).collect();
    if all.is_empty() {
        return Err(Error::EmptyReport);
    }
    let rr_abs_errors: Vec<f64> = all.iter().map(|w| w.abs_err).collect();
    let summaries: Vec<SubjectSummary> = subjects
        .iter()
        .map(|s| {
            let errs: Vec<f64> = s.windows.iter().map(|w| w.abs_err).collect();
            let de: Vec<f64> = s.windows.iter().map(|w| w.duty_est).collect();
            let dr: Vec<f64> = s.windows.iter().map(|w| w.duty_ref).collect();
            SubjectSummary {
                subject_id: s.subject_id.clone(),
                n_windows: s.windows.len(),
                rr_mean_abs_error: mean(&errs),
                waveform_mae: s.waveform_mae,
                duty_pearson_r: pearson_corr(&de, &dr).ok(),
            }
        })
        .collect();
    let subject_means: Vec<f64> = summaries.iter().filter_map(|s| s.rr_mean_abs_error).collect();
    let wave: Vec<f64> = subjects.iter().filter_map(|s| s.waveform_mae).collect();
    let duty_err: Vec<f64> = all.iter().map(|w| (w.duty_est - w.duty_ref).abs()).collect();
    let duty_est: Vec<f64> = all.iter().map(|w| w.duty_est).collect();
    let duty_ref: Vec<f64> = all.iter().map(|w| w.duty_ref).collect();
    let subject_r: Vec<f64> = summaries.iter().filter_map(|s| s.duty_pearson_r).collect();

    Ok(MetricsReport {
        window_s: window.duration_s(),
        n_segments: window.n_segments(),
        n_subjects: subjects.len(),
        n_windows: all.len(),
        skipped_windows: subjects.iter().map(|s| s.skipped_windows).sum(),
        rr_mae: median(&rr_abs_errors).expect("non-empty"),
        rr_mmae: median(&subject_means).expect("non-empty"),
        rr_abs_err_q25: quantile(&rr_abs_errors, 0.25).expect("non-empty"),
        rr_abs_err_q75: quantile(&rr_abs_errors, 0.75).expect("non-empty"),
        waveform_mae_median: median(&wave),
        waveform_mae_q25: quantile(&wave, 0.25),
        waveform_mae_q75: quantile(&wave, 0.75),
        duty_mean_abs_error: mean(&duty_err).expect("non-empty"),
        duty_median_abs_error: median(&duty_err).expect("non-empty"),
        duty_pearson_r: pearson_corr(&duty_est, &duty_ref).ok(),
        duty_median_subject_r: median(&subject_r),
        subjects: summaries,
        rr_abs_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    fn subject(id: &str, errors: &[f64]) -> SubjectWindows {
        SubjectWindows {
            subject_id: id.into(),
            windows: errors
                .iter()
                .enumerate()
                .map(|(i, &e)| WindowResult {
                    subject_id: id.into(),
                    window_start_s: i as f64,
                    rr_est: 10.0 + e,
                    rr_ref: 10.0,
                    abs_err: e,
                    duty_est: 40.0 + i as f64,
                    duty_ref: 40.0 + 2.0 * i as f64,
                })
                .collect(),
            waveform_mae: Some(0.2),
            skipped_windows: 0,
        }
    }

    fn window() -> EvaluationWindow {
        EvaluationWindow::new(22).unwrap()
    }

    #[test]
    fn single_subject() {
        let r = aggregate_metrics(window(), &[subject("a", &[1.0, 2.0, 3.0])]).unwrap();
        assert_eq!(r.rr_mae, 2.0);
        assert_eq!(r.rr_mmae, 2.0);
        assert!((r.duty_pearson_r.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_subjects() {
        let r = aggregate_metrics(window(), &[subject("a", &[1.0, 1.0]), subject("b", &[3.0, 3.0])]).unwrap();
        assert_eq!(r.rr_mmae, 2.0);
        assert_eq!(r.n_windows, 4);
    }

    #[test]
    fn zero_errors() {
        let r = aggregate_metrics(window(), &[subject("a", &[0.0; 4]), subject("b", &[0.0; 2])]).unwrap();
        assert_eq!((r.rr_mae, r.rr_mmae), (0.0, 0.0));
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(aggregate_metrics(window(), &[]), Err(Error::EmptyReport)));
        assert!(matches!(aggregate_metrics(window(), &[subject("a", &[])]), Err(Error::EmptyReport)));
    }

    #[test]
    fn waveform_mae_examples() {
        let r = vec![0.1, 0.5, 0.9];
        assert_eq!(waveform_mae(&r, &r).unwrap(), 0.0);
        let e: Vec<f64> = r.iter().map(|v| v + 0.1).collect();
        assert!((waveform_mae(&e, &r).unwrap() - 0.1).abs() < 1e-15);
        assert!(waveform_mae(&e, &r[..2]).is_err());
    }

    #[test]
    fn pearson_examples() {
        let x: Vec<f64> = (0..10_000).map(|i| ((i * 7919) % 10007) as f64).collect();
        assert!((pearson_corr(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_corr(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        let mut shuffled = x.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(5));
        assert!(pearson_corr(&x, &shuffled).unwrap().abs() < 0.05);
        assert!(matches!(pearson_corr(&[1.0; 5], &x[..5]), Err(Error::UndefinedCorrelation(_))));
        assert!(pearson_corr(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), Some(2.0));
        assert_eq!(median(&[]), None);
    }
}
