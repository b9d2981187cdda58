//! Linear scaling in logit space: `expit(alpha + beta * logit f)` fitted by
//! least squares.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::optim::{minimize, Evaluation, NewtonOptions};
use crate::data::{expit, logit, CalibratedModel, Grid, Method, ScoredDataset};
use crate::error::{Error, Result};

pub(crate) const LS_GRAD_TOL: f64 = 1e-9;
pub(crate) const LS_MAX_ITER: usize = 500;

/// Rows aggregated by distinct input score: squared loss only needs the
/// row count and label sum at each logit.
#[derive(Debug, Clone, Default)]
pub(crate) struct ScalingProblem {
    z: Vec<f64>,
    weight: Vec<f64>,
    sum_y: Vec<f64>,
    total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScalingFit {
    pub alpha: f64,
    pub beta: f64,
    pub mse: f64,
    pub identity_mse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
}

impl ScalingProblem {
    pub(crate) fn from_rows<I>(rows: I, clip: f64) -> Self
    where
        I: IntoIterator<Item = (f64, u8)>,
    {
        let mut map: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
        for (s, y) in rows {
            let e = map.entry((s + 0.0).to_bits()).or_insert((0.0, 0.0));
            e.0 += 1.0;
            e.1 += y as f64;
        }
        let mut p = ScalingProblem::default();
        for (bits, (w, sy)) in map {
            let s = f64::from_bits(bits);
            p.z.push(logit(s.clamp(clip, 1.0 - clip)));
            p.weight.push(w);
            p.sum_y.push(sy);
            p.total += w;
        }
        p
    }

    fn loss(&self, a: f64, b: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.z.len() {
            let s = expit(a + b * self.z[i]);
            // sum over rows of (y - s)^2 with y in {0,1}
            acc += self.weight[i] * s * s - 2.0 * s * self.sum_y[i] + self.sum_y[i];
        }
        acc / self.total
    }

    fn evaluate(&self, x: &DVector<f64>) -> Evaluation {
        let (a, b) = (x[0], x[1]);
        let mut g = [0.0; 2];
        let mut h = [0.0; 3];
        let mut value = 0.0;
        for i in 0..self.z.len() {
            let z = self.z[i];
            let w = self.weight[i];
            let sy = self.sum_y[i];
            let s = expit(a + b * z);
            let d1 = s * (1.0 - s);
            let d2 = d1 * (1.0 - 2.0 * s);
            value += w * s * s - 2.0 * s * sy + sy;
            let r = w * s - sy;
            let gi = 2.0 * r * d1;
            let hi = 2.0 * (r * d2 + w * d1 * d1);
            g[0] += gi;
            g[1] += gi * z;
            h[0] += hi;
            h[1] += hi * z;
            h[2] += hi * z * z;
        }
        let t = self.total;
        Evaluation {
            value: value / t,
            grad: DVector::from_vec(vec![g[0] / t, g[1] / t]),
            hess: DMatrix::from_row_slice(2, 2, &[h[0] / t, h[1] / t, h[1] / t, h[2] / t]),
        }
    }

    /// Minimises the squared loss from the identity map `(0, 1)`.
    pub(crate) fn solve(&self) -> ScalingFit {
        let identity_mse = self.loss(0.0, 1.0);
        let r = minimize(
            &[0.0, 1.0],
            NewtonOptions { grad_tol: LS_GRAD_TOL, max_iter: LS_MAX_ITER, jitter: 0.0 },
            |x| self.evaluate(x),
        );
        let (mut alpha, mut beta, mut mse) = (r.x[0], r.x[1], r.value);
        if !(mse <= identity_mse) {
            (alpha, beta, mse) = (0.0, 1.0, identity_mse);
        }
        ScalingFit {
            alpha,
            beta,
            mse,
            identity_mse,
            iterations: r.iterations,
            converged: r.converged,
            grad_norm: r.grad_norm,
        }
    }
}

/// Fits the two scaling parameters on the whole dataset.
pub fn fit_ls_params(calib: &ScoredDataset, clip: f64) -> Result<ScalingFit> {
    if calib.len() < 2 {
        return Err(Error::EmptyDataset);
    }
    let problem = ScalingProblem::from_rows(calib.scores().iter().copied().zip(calib.labels().iter().copied()), clip);
    Ok(problem.solve())
}

/// Linear scaling calibrator. Non-convergence is reported with the best
/// iterate in the error.
pub fn fit_ls(calib: &ScoredDataset, grid: Grid, clip: f64) -> Result<CalibratedModel> {
    let fit = fit_ls_params(calib, clip)?;
    if !fit.converged {
        return Err(Error::NoConvergence {
            iterations: fit.iterations,
            grad_norm: fit.grad_norm,
            best: vec![fit.alpha, fit.beta],
        });
    }
    Ok(CalibratedModel {
        grid,
        method: Method::Ls,
        patches: Vec::new(),
        coefficients: vec![fit.alpha, fit.beta],
        group_names: calib.groups().names().to_vec(),
        clip,
    })
}
