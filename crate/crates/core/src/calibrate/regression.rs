//! Group-conditional unbiased regression, linear (least squares on group
//! indicators) and logistic (cross-entropy on logit score plus group
//! indicators).

use nalgebra::{DMatrix, DVector};

use super::optim::{minimize, Evaluation, NewtonOptions};
use crate::data::{expit, logit, CalibratedModel, Grid, GroupMatrix, Method, ScoredDataset};
use crate::error::{Error, Result};

const GCUR_JITTER: f64 = 1e-10;
const GCUR_TARGET: f64 = 1e-8;
const GCULR_GRAD_TOL: f64 = 1e-8;
const GCULR_MAX_ITER: usize = 200;
const GCULR_JITTER: f64 = 1e-10;
const SEPARATION_NORM: f64 = 30.0;
const SEPARATION_RIDGE: f64 = 1e-4;

/// A fitted regression calibrator plus fit diagnostics.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub model: CalibratedModel,
    /// Fraction of calibration rows whose prediction was clipped into [0,1].
    pub clip_rate: f64,
    /// Columns dropped as exact duplicates of an earlier column.
    pub dropped: Vec<String>,
    /// Groups with no calibration rows; their coefficient is zero.
    pub empty: Vec<String>,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

/// Indices of usable group columns: nonempty and not duplicating an
/// earlier column.
fn usable_columns(groups: &GroupMatrix) -> (Vec<usize>, Vec<String>, Vec<String>) {
    let mut keep: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    let mut empty = Vec::new();
    for k in 0..groups.len() {
        if groups.count(k) == 0 {
            empty.push(groups.name(k).to_string());
        } else if keep.iter().any(|&j| groups.column(j) == groups.column(k)) {
            dropped.push(groups.name(k).to_string());
        } else {
            keep.push(k);
        }
    }
    (keep, dropped, empty)
}

fn warnings_for(dropped: &[String], empty: &[String]) -> Vec<String> {
    let mut w: Vec<String> = empty.iter().map(|g| format!("group {g:?} is empty in calibration data; skipped")).collect();
    w.extend(dropped.iter().map(|g| format!("group {g:?} duplicates an earlier column; dropped")));
    for msg in &w {
        log::warn!("{msg}");
    }
    w
}

/// Largest |mean(label - prediction)| over the nonempty groups.
pub fn max_group_residual(ds: &ScoredDataset, predictions: &[f64]) -> f64 {
    let g = ds.groups();
    (0..g.len())
        .filter_map(|k| {
            let col = g.column(k);
            let (mut n, mut r) = (0usize, 0.0f64);
            for i in (0..ds.len()).filter(|&i| col[i]) {
                n += 1;
                r += ds.labels()[i] as f64 - predictions[i];
            }
            (n > 0).then(|| (r / n as f64).abs())
        })
        .fold(0.0, f64::max)
}

/// `f + sum_g lambda_g g` with lambda minimising the in-sample MSE.
pub fn fit_gcur(calib: &ScoredDataset, grid: Grid, clip: f64) -> Result<RegressionFit> {
    if calib.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let groups = calib.groups();
    let (keep, dropped, empty) = usable_columns(groups);
    let warnings = warnings_for(&dropped, &empty);
    let n = calib.len();
    let d = keep.len();
    let nf = n as f64;

    // Gram matrix of indicator columns is the overlap mass
    let mut gram = DMatrix::<f64>::zeros(d, d);
    for (a, &ka) in keep.iter().enumerate() {
        for (b, &kb) in keep.iter().enumerate().skip(a) {
            let overlap = (0..n).filter(|&i| groups.contains(i, ka) && groups.contains(i, kb)).count() as f64 / nf;
            gram[(a, b)] = overlap;
            gram[(b, a)] = overlap;
        }
        gram[(a, a)] += GCUR_JITTER;
    }
    let chol = gram.clone().cholesky().ok_or_else(|| Error::RankDeficient { dropped: dropped.clone() })?;

    let mut lambda = DVector::<f64>::zeros(d);
    let mut fitted: Vec<f64> = calib.scores().to_vec();
    let mut iterations = 0;
    // iterative refinement removes the bias the jitter introduces along
    // (near-)null directions of the Gram matrix
    for _ in 0..50 {
        iterations += 1;
        let mut rhs = DVector::<f64>::zeros(d);
        for (a, &k) in keep.iter().enumerate() {
            let col = groups.column(k);
            rhs[a] = (0..n).filter(|&i| col[i]).map(|i| calib.labels()[i] as f64 - fitted[i]).sum::<f64>() / nf;
        }
        lambda += chol.solve(&rhs);
        for (i, f) in fitted.iter_mut().enumerate() {
            *f = calib.scores()[i] + keep.iter().enumerate().filter(|(_, &k)| groups.contains(i, k)).map(|(a, _)| lambda[a]).sum::<f64>();
        }
        let worst = keep
            .iter()
            .map(|&k| {
                let col = groups.column(k);
                let c = groups.count(k) as f64;
                ((0..n).filter(|&i| col[i]).map(|i| calib.labels()[i] as f64 - fitted[i]).sum::<f64>() / c).abs()
            })
            .fold(0.0, f64::max);
        if worst <= 1e-13 {
            break;
        }
    }
    let worst = max_group_residual(calib, &fitted);
    if worst > GCUR_TARGET {
        return Err(Error::RankDeficient { dropped });
    }

    let mut coefficients = vec![0.0; groups.len()];
    for (a, &k) in keep.iter().enumerate() {
        coefficients[k] = lambda[a];
    }
    let clipped = fitted.iter().filter(|&&f| !(0.0..=1.0).contains(&f)).count();
    Ok(RegressionFit {
        model: CalibratedModel {
            grid,
            method: Method::Gcur,
            patches: Vec::new(),
            coefficients,
            group_names: groups.names().to_vec(),
            clip,
        },
        clip_rate: clipped as f64 / nf,
        dropped,
        empty,
        iterations,
        warnings,
    })
}

struct LogisticProblem<'a> {
    z: Vec<f64>,
    labels: &'a [u8],
    groups: &'a GroupMatrix,
    keep: Vec<usize>,
    ridge: f64,
}

impl LogisticProblem<'_> {
    fn dim(&self) -> usize {
        1 + self.keep.len()
    }

    fn features(&self, i: usize, out: &mut Vec<f64>) {
        out.clear();
        out.push(self.z[i]);
        out.extend(self.keep.iter().map(|&k| if self.groups.contains(i, k) { 1.0 } else { 0.0 }));
    }

    fn evaluate(&self, theta: &DVector<f64>) -> Evaluation {
        let d = self.dim();
        let n = self.z.len() as f64;
        let mut value = 0.0;
        let mut grad = DVector::<f64>::zeros(d);
        let mut hess = DMatrix::<f64>::zeros(d, d);
        let mut x = Vec::with_capacity(d);
        for i in 0..self.z.len() {
            self.features(i, &mut x);
            let u: f64 = x.iter().zip(theta.iter()).map(|(a, b)| a * b).sum();
            let y = self.labels[i] as f64;
            // log(1 + e^u) - y u, computed stably
            let softplus = if u > 0.0 { u + (-u).exp().ln_1p() } else { u.exp().ln_1p() };
            value += softplus - y * u;
            let p = expit(u);
            let w = p * (1.0 - p);
            for a in 0..d {
                if x[a] == 0.0 {
                    continue;
                }
                grad[a] += (p - y) * x[a];
                for b in a..d {
                    if x[b] != 0.0 {
                        hess[(a, b)] += w * x[a] * x[b];
                    }
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
        }
        value /= n;
        grad /= n;
        hess /= n;
        if self.ridge > 0.0 {
            value += 0.5 * self.ridge * theta.norm_squared();
            grad += theta * self.ridge;
            for a in 0..d {
                hess[(a, a)] += self.ridge;
            }
        }
        Evaluation { value, grad, hess }
    }

    fn solve(&self) -> (Vec<f64>, usize, bool, f64) {
        let mut x0 = vec![0.0; self.dim()];
        x0[0] = 1.0;
        let opts = NewtonOptions { grad_tol: GCULR_GRAD_TOL, max_iter: GCULR_MAX_ITER, jitter: GCULR_JITTER };
        let r = minimize(&x0, opts, |t| self.evaluate(t));
        // a couple of extra Newton steps take the score equations to
        // rounding level once inside the quadratic region
        let polish = minimize(&r.x, NewtonOptions { grad_tol: 1e-14, max_iter: 3, ..opts }, |t| self.evaluate(t));
        let (x, gn) = if polish.value <= r.value { (polish.x, polish.grad_norm) } else { (r.x, r.grad_norm) };
        (x, r.iterations + polish.iterations, r.converged, gn)
    }
}

/// `expit(theta_0 logit f + sum_g theta_g g)` by Newton/IRLS on the
/// cross-entropy.
pub fn fit_gculr(calib: &ScoredDataset, grid: Grid, clip: f64) -> Result<RegressionFit> {
    if calib.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let groups = calib.groups();
    let (keep, dropped, empty) = usable_columns(groups);
    let mut warnings = warnings_for(&dropped, &empty);
    let mut problem = LogisticProblem {
        z: calib.scores().iter().map(|&s| logit(s.clamp(clip, 1.0 - clip))).collect(),
        labels: calib.labels(),
        groups,
        keep,
        ridge: 0.0,
    };
    let (mut theta, mut iterations, mut converged, mut gn) = problem.solve();
    let norm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
    if norm > SEPARATION_NORM || !converged {
        let msg = format!(
            "logistic fit diverging (|theta| = {norm:.3e}, converged = {converged}); refitting with ridge {SEPARATION_RIDGE}"
        );
        log::warn!("{msg}");
        warnings.push(msg);
        problem.ridge = SEPARATION_RIDGE;
        let (t, it, c, g) = problem.solve();
        theta = t;
        iterations += it;
        converged = c;
        gn = g;
    }
    if !converged {
        return Err(Error::NoConvergence { iterations, grad_norm: gn, best: theta });
    }
    let mut coefficients = vec![0.0; 1 + groups.len()];
    coefficients[0] = theta[0];
    for (a, &k) in problem.keep.iter().enumerate() {
        coefficients[1 + k] = theta[1 + a];
    }
    Ok(RegressionFit {
        model: CalibratedModel {
            grid,
            method: Method::Gculr,
            patches: Vec::new(),
            coefficients,
            group_names: groups.names().to_vec(),
            clip,
        },
        clip_rate: 0.0,
        dropped,
        empty,
        iterations,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::predict;
    use crate::data::DEFAULT_CLIP;

    fn grid() -> Grid {
        Grid::new(10).unwrap()
    }

    #[test]
    fn intercept_only_shift() {
        // labels mean 0.1 above the scores
        let scores = vec![0.2, 0.4, 0.6, 0.2, 0.4, 0.6, 0.2, 0.4, 0.6, 0.2];
        let mean_s: f64 = scores.iter().sum::<f64>() / 10.0;
        let target = mean_s + 0.1;
        let ones = (target * 10.0).round() as usize;
        let labels: Vec<u8> = (0..10).map(|i| (i < ones) as u8).collect();
        let d = ScoredDataset::ungrouped(scores, labels).unwrap();
        let fit = fit_gcur(&d, grid(), DEFAULT_CLIP).unwrap();
        let expect = ones as f64 / 10.0 - mean_s;
        assert!((fit.model.coefficients[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn two_disjoint_groups_hand_solved() {
        // rows 0,1 in group a with scores 0.2 too high; rows 2,3 in b 0.2 too low
        let g = GroupMatrix::from_columns(
            4,
            vec!["a".into(), "b".into()],
            vec![vec![true, true, false, false], vec![false, false, true, true]],
        )
        .unwrap();
        let d = ScoredDataset::new(vec![0.7, 0.7, 0.3, 0.3], vec![1, 0, 1, 0], g).unwrap();
        let fit = fit_gcur(&d, grid(), DEFAULT_CLIP).unwrap();
        // ALL is the sum of a and b; the minimum-norm split puts (almost)
        // nothing on ALL -- roundoff over the jitter leaks ~1e-8 into the
        // null direction, which predictions do not see
        let c = &fit.model.coefficients;
        assert!(c[0].abs() < 1e-6, "{c:?}");
        assert!((c[0] + c[1] + 0.2).abs() < 1e-12 && (c[0] + c[2] - 0.2).abs() < 1e-12, "{c:?}");
        let out = predict(&fit.model, d.scores(), d.groups()).unwrap();
        assert!(max_group_residual(&d, &out) < 1e-12);
    }

    #[test]
    fn duplicate_and_empty_columns_reported() {
        let g = GroupMatrix::from_columns(
            3,
            vec!["a".into(), "a2".into(), "none".into()],
            vec![vec![true, false, true], vec![true, false, true], vec![false; 3]],
        )
        .unwrap();
        let d = ScoredDataset::new(vec![0.3, 0.6, 0.5], vec![1, 0, 1], g).unwrap();
        let fit = fit_gcur(&d, grid(), DEFAULT_CLIP).unwrap();
        assert_eq!(fit.dropped, vec!["a2"]);
        assert_eq!(fit.empty, vec!["none"]);
        assert_eq!(fit.model.coefficients[2], 0.0);
        assert_eq!(fit.model.coefficients[3], 0.0);
    }

    #[test]
    fn logistic_score_equations_hold() {
        let g = GroupMatrix::from_columns(
            8,
            vec!["a".into()],
            vec![vec![true, true, true, false, false, true, false, false]],
        )
        .unwrap();
        let d = ScoredDataset::new(vec![0.2, 0.4, 0.6, 0.8, 0.3, 0.7, 0.5, 0.1], vec![0, 1, 1, 1, 0, 0, 1, 0], g).unwrap();
        let fit = fit_gculr(&d, grid(), DEFAULT_CLIP).unwrap();
        let out = predict(&fit.model, d.scores(), d.groups()).unwrap();
        assert!(max_group_residual(&d, &out) < 1e-9);
    }
}
