//! Partial least squares (PLS2) regression baseline.
//!
//! Components are extracted NIPALS-style: the weight vector of each component
//! is the converged fixed point of the NIPALS inner loop, i.e. the dominant
//! left singular vector of the deflated cross-covariance `X'Y`. The loop runs
//! on the 288x288 cross-covariance rather than the n x 288 data, which gives
//! the same components at a fraction of the cost for long training sets.
//! Rotations `R` map centered inputs directly to scores, so `X` itself is
//! never deflated and `B = R Q'`.

use log::warn;
use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

pub const DEFAULT_COMPONENTS: usize = 25;
const MIN_SCORE_NORM: f64 = 1e-12;
const TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct PlsModel {
    pub n_components: usize,
    pub x_mean: Vec<f64>,
    pub y_mean: Vec<f64>,
    /// Input weights, one column per component.
    pub weights: Array2<f64>,
    /// Input loadings.
    pub x_loadings: Array2<f64>,
    /// Output loadings.
    pub y_loadings: Array2<f64>,
    /// Regression matrix on centered data, inputs x outputs.
    pub coefficients: Array2<f64>,
}

fn to_matrix(rows: &[Vec<f64>], name: &str) -> Result<Array2<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 0 {
        return Err(Error::Shape(format!("{name} is empty")));
    }
    let mut m = Array2::zeros((rows.len(), cols));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Shape(format!("{name} row {i} has {} columns, expected {cols}", row.len())));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("{name} row {i} column {j} is not finite")));
        }
        m.row_mut(i).assign(&ArrayView1::from(row));
    }
    Ok(m)
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Dominant left singular vector of `s` by power iteration on `S S'`,
/// started from the column of `s` with the largest norm (the NIPALS choice
/// of the highest-variance response column).
fn dominant_direction(s: &Array2<f64>) -> Option<Array1<f64>> {
    let start = (0..s.ncols())
        .map(|j| (j, s.column(j).dot(&s.column(j))))
        .fold(None, |best: Option<(usize, f64)>, (j, v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((j, v)),
        })?;
    if start.1 == 0.0 {
        return None;
    }
    let mut w = s.column(start.0).to_owned();
    w /= norm(&w);
    for _ in 0..MAX_ITERATIONS {
        let mut next = s.dot(&s.t().dot(&w));
        let n = norm(&next);
        if n == 0.0 {
            return None;
        }
        next /= n;
        let change = norm(&(&next - &w));
        w = next;
        if change < TOLERANCE {
            break;
        }
    }
    Some(w)
}

/// Fits a PLS2 model with up to `n_components` latent components. Fewer are
/// kept (with a warning) when the data run out of rank.
pub fn pls_train(x: &[Vec<f64>], y: &[Vec<f64>], n_components: usize) -> Result<PlsModel> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} input rows but {} target rows", x.len(), y.len())));
    }
    if n_components == 0 || x.len() <= n_components {
        return Err(Error::Parameter(format!(
            "need more rows ({}) than components ({n_components}), and at least one component",
            x.len()
        )));
    }
    let mut xm = to_matrix(x, "inputs")?;
    let mut ym = to_matrix(y, "targets")?;
    let x_mean = xm.mean_axis(Axis(0)).expect("non-empty");
    let y_mean = ym.mean_axis(Axis(0)).expect("non-empty");
    xm -= &x_mean;
    ym -= &y_mean;
    let (p, q) = (xm.ncols(), ym.ncols());
    let mut s = xm.t().dot(&ym);
    let s_scale = s.iter().map(|v| v * v).sum::<f64>().sqrt();

    let mut weights = Vec::new();
    let mut rotations: Vec<Array1<f64>> = Vec::new();
    let mut x_loadings: Vec<Array1<f64>> = Vec::new();
    let mut y_loadings = Vec::new();
    for a in 0..n_components.min(p) {
        let remaining = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        if remaining <= TOLERANCE * s_scale {
            warn!("PLS stopped at {a} components: no covariance left to explain");
            break;
        }
        let Some(w) = dominant_direction(&s) else {
            warn!("PLS stopped at {a} components: degenerate weight vector");
            break;
        };
        let mut r = w.clone();
        for (rj, pj) in rotations.iter().zip(&x_loadings) {
            r = r - rj * pj.dot(&w);
        }
        let t = xm.dot(&r);
        let tt = t.dot(&t);
        if tt.sqrt() < MIN_SCORE_NORM {
            warn!("PLS stopped at {a} components: score norm {} below {MIN_SCORE_NORM}", tt.sqrt());
            break;
        }
        let pa = xm.t().dot(&t) / tt;
        let qa = ym.t().dot(&t) / tt;
        // S <- S - p q' (t't)
        for i in 0..p {
            for j in 0..q {
                s[[i, j]] -= pa[i] * qa[j] * tt;
            }
        }
        weights.push(w);
        rotations.push(r);
        x_loadings.push(pa);
        y_loadings.push(qa);
    }
    if rotations.is_empty() {
        return Err(Error::DegenerateSignal("PLS found no component with a usable score".into()));
    }
    if rotations.len() < n_components {
        warn!("PLS kept {} of {n_components} requested components", rotations.len());
    }
    let stack = |cols: &[Array1<f64>], rows: usize| {
        let mut m = Array2::zeros((rows, cols.len()));
        for (k, c) in cols.iter().enumerate() {
            m.column_mut(k).assign(c);
        }
        m
    };
    let r = stack(&rotations, p);
    let qm = stack(&y_loadings, q);
    Ok(PlsModel {
        n_components: rotations.len(),
        x_mean: x_mean.to_vec(),
        y_mean: y_mean.to_vec(),
        weights: stack(&weights, p),
        x_loadings: stack(&x_loadings, p),
        y_loadings: qm.clone(),
        coefficients: r.dot(&qm.t()),
    })
}

impl PlsModel {
    pub fn input_len(&self) -> usize {
        self.x_mean.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_len() {
            return Err(Error::Shape(format!("PLS input has {} samples, expected {}", x.len(), self.input_len())));
        }
        let centered = &ArrayView1::from(x) - &ArrayView1::from(&self.x_mean);
        let y = centered.dot(&self.coefficients) + ArrayView1::from(&self.y_mean);
        Ok(y.to_vec())
    }

    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}
