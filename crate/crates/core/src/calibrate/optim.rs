//! Damped Newton minimisation for the small smooth problems behind linear
//! scaling and logistic regression.

use nalgebra::{DMatrix, DVector};

pub(crate) struct Evaluation {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NewtonOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Always added to the Hessian diagonal.
    pub jitter: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Newton direction with Levenberg damping grown until the system is
/// positive definite and the step descends.
fn direction(e: &Evaluation, jitter: f64) -> DVector<f64> {
    let d = e.grad.len();
    let scale = (0..d).map(|i| e.hess[(i, i)].abs()).fold(0.0f64, f64::max).max(1e-12);
    let mut mu = jitter;
    for _ in 0..40 {
        let mut h = e.hess.clone();
        for i in 0..d {
            h[(i, i)] += mu;
        }
        if let Some(ch) = h.cholesky() {
            let step = ch.solve(&(-&e.grad));
            if step.dot(&e.grad) < 0.0 && step.iter().all(|v| v.is_finite()) {
                return step;
            }
        }
        mu = if mu < scale * 1e-10 { scale * 1e-10 } else { mu * 10.0 };
    }
    -e.grad.clone()
}

pub(crate) fn minimize<F>(x0: &[f64], opts: NewtonOptions, eval: F) -> NewtonResult
where
    F: Fn(&DVector<f64>) -> Evaluation,
{
    let mut x = DVector::from_column_slice(x0);
    let mut e = eval(&x);
    let mut iterations = 0;
    loop {
        let gn = inf_norm(&e.grad);
        if gn < opts.grad_tol {
            return NewtonResult { x: x.iter().copied().collect(), value: e.value, grad_norm: gn, iterations, converged: true };
        }
        if iterations >= opts.max_iter {
            return NewtonResult { x: x.iter().copied().collect(), value: e.value, grad_norm: gn, iterations, converged: false };
        }
        iterations += 1;
        let mut step = direction(&e, opts.jitter);
        let mut accepted = None;
        for attempt in 0..2 {
            let slope = step.dot(&e.grad);
            let mut t = 1.0;
            while t > 1e-14 {
                let cand = &x + &step * t;
                let ce = eval(&cand);
                // near the optimum the predicted decrease drops below the
                // loss's resolution; fall back to the gradient norm there
                let flat = (ce.value - e.value).abs() <= 1e-13 * (1.0 + e.value.abs());
                if ce.value.is_finite() && (ce.value <= e.value + 1e-4 * t * slope || flat && inf_norm(&ce.grad) < gn) {
                    accepted = Some((cand, ce));
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() || attempt == 1 {
                break;
            }
            step = -e.grad.clone();
        }
        match accepted {
            Some((nx, ne)) => {
                let stalled = ne.value >= e.value && inf_norm(&ne.grad) >= gn;
                x = nx;
                e = ne;
                if stalled {
                    let gn = inf_norm(&e.grad);
                    return NewtonResult { x: x.iter().copied().collect(), value: e.value, grad_norm: gn, iterations, converged: gn < opts.grad_tol };
                }
            }
            None => {
                return NewtonResult { x: x.iter().copied().collect(), value: e.value, grad_norm: gn, iterations, converged: false };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_converges_in_one_step() {
        let r = minimize(&[3.0, -2.0], NewtonOptions { grad_tol: 1e-12, max_iter: 10, jitter: 0.0 }, |x| {
            let a = x[0] - 1.0;
            let b = x[1] + 0.5;
            Evaluation {
                value: a * a + 4.0 * b * b,
                grad: DVector::from_vec(vec![2.0 * a, 8.0 * b]),
                hess: DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 8.0])),
            }
        });
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-12 && (r.x[1] + 0.5).abs() < 1e-12);
        assert!(r.iterations <= 2);
    }

    #[test]
    fn nonconvex_start_still_descends() {
        // f(x) = x^4 - x^2 has a local max at 0; start just off it
        let r = minimize(&[0.1], NewtonOptions { grad_tol: 1e-10, max_iter: 100, jitter: 0.0 }, |x| {
            let v = x[0];
            Evaluation {
                value: v.powi(4) - v * v,
                grad: DVector::from_vec(vec![4.0 * v.powi(3) - 2.0 * v]),
                hess: DMatrix::from_element(1, 1, 12.0 * v * v - 2.0),
            }
        });
        assert!(r.converged);
        assert!((r.x[0] - 0.5f64.sqrt()).abs() < 1e-8);
    }
}
