//! L1/L2-regularized logistic regression on pooled data.
//!
//! Objective: `(1/n) sum [softplus(z_i) - y_i z_i] + penalty(w)` with
//! `z = w'x + b`; the bias is never penalized.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hblr::special::sigmoid;

const GRAD_TOL: f64 = 1e-8;
const OBJ_TOL: f64 = 1e-10;
const MAX_NEWTON: usize = 200;
const MAX_PROX: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub penalty: Penalty,
    pub lambda: f64,
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Argument(format!(
                "input has dimension {}, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        self.decision(x).map(sigmoid)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn check_labels(y: &[f64]) -> Result<()> {
    let pos = y.iter().filter(|&&v| v == 1.0).count();
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Argument("labels must be 0 or 1".into()));
    }
    if pos == 0 || pos == y.len() {
        return Err(Error::DegenerateData("training data contains a single class".into()));
    }
    Ok(())
}

/// Smooth part: average logistic loss, plus `lambda/2 |w|^2` for L2.
pub fn smooth_objective(x: &DMatrix<f64>, y: &[f64], w: &DVector<f64>, b: f64, l2: f64) -> f64 {
    let z = x * w;
    let loss: f64 = z.iter().zip(y).map(|(&z, &y)| softplus(z + b) - y * (z + b)).sum();
    loss / y.len() as f64 + 0.5 * l2 * w.norm_squared()
}

/// Gradient of [`smooth_objective`] with respect to `(w, b)`.
pub fn smooth_gradient(x: &DMatrix<f64>, y: &[f64], w: &DVector<f64>, b: f64, l2: f64) -> (DVector<f64>, f64) {
    let n = y.len() as f64;
    let z = x * w;
    let r = DVector::from_iterator(y.len(), z.iter().zip(y).map(|(&z, &y)| sigmoid(z + b) - y));
    let gw = x.tr_mul(&r) / n + w * l2;
    (gw, r.sum() / n)
}

pub fn objective(x: &DMatrix<f64>, y: &[f64], model: &LinearModel) -> f64 {
    let w = DVector::from_column_slice(&model.weights);
    match model.penalty {
        Penalty::L2 => smooth_objective(x, y, &w, model.bias, model.lambda),
        Penalty::L1 => smooth_objective(x, y, &w, model.bias, 0.0) + model.lambda * w.abs().sum(),
    }
}

pub fn fit_logreg(x: &DMatrix<f64>, y: &[f64], penalty: Penalty, lambda: f64) -> Result<LinearModel> {
    fit_logreg_traced(x, y, penalty, lambda).map(|(m, _)| m)
}

/// Like [`fit_logreg`], also returning the objective after every accepted step.
pub fn fit_logreg_traced(
    x: &DMatrix<f64>,
    y: &[f64],
    penalty: Penalty,
    lambda: f64,
) -> Result<(LinearModel, Vec<f64>)> {
    if x.nrows() != y.len() {
        return Err(Error::Argument(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Argument(format!("regularization strength must be finite and >= 0, got {lambda}")));
    }
    check_labels(y)?;
    let p = y.iter().sum::<f64>() / y.len() as f64;
    let w0 = DVector::zeros(x.ncols());
    let b0 = (p / (1.0 - p)).ln();
    let (w, b, trace) = match penalty {
        Penalty::L2 => newton(x, y, w0, b0, lambda),
        Penalty::L1 => proximal(x, y, w0, b0, lambda),
    };
    if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
        return Err(Error::DegenerateData("logistic regression diverged".into()));
    }
    Ok((
        LinearModel {
            weights: w.iter().copied().collect(),
            bias: b,
            penalty,
            lambda,
        },
        trace,
    ))
}

fn newton(x: &DMatrix<f64>, y: &[f64], mut w: DVector<f64>, mut b: f64, lambda: f64) -> (DVector<f64>, f64, Vec<f64>) {
    let n = y.len();
    let d = x.ncols();
    let mut xa = DMatrix::from_element(n, d + 1, 1.0);
    xa.view_mut((0, 0), (n, d)).copy_from(x);
    let mut f = smooth_objective(x, y, &w, b, lambda);
    let mut trace = vec![f];
    for _ in 0..MAX_NEWTON {
        let (gw, gb) = smooth_gradient(x, y, &w, b, lambda);
        let mut g = DVector::zeros(d + 1);
        g.rows_mut(0, d).copy_from(&gw);
        g[d] = gb;
        if g.norm() < GRAD_TOL {
            break;
        }
        let z = &xa * DVector::from_iterator(d + 1, w.iter().copied().chain([b]));
        let mut xs = xa.clone();
        for (i, mut row) in xs.row_iter_mut().enumerate() {
            let s = sigmoid(z[i]);
            row *= (s * (1.0 - s) / n as f64).sqrt();
        }
        let mut h = xs.tr_mul(&xs);
        for j in 0..d {
            h[(j, j)] += lambda;
        }
        let step = loop {
            if let Some(ch) = h.clone().cholesky() {
                break ch.solve(&g);
            }
            let jitter = 1e-10 * (1.0 + h.diagonal().amax());
            for j in 0..=d {
                h[(j, j)] += jitter;
            }
        };
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-16 {
            let wn = &w - step.rows(0, d) * t;
            let bn = b - step[d] * t;
            let fn_ = smooth_objective(x, y, &wn, bn, lambda);
            if fn_ <= f - 1e-4 * t * slope {
                w = wn;
                b = bn;
                f = fn_;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(f);
    }
    (w, b, trace)
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

fn proximal(x: &DMatrix<f64>, y: &[f64], mut w: DVector<f64>, mut b: f64, lambda: f64) -> (DVector<f64>, f64, Vec<f64>) {
    let total = |w: &DVector<f64>, b: f64| smooth_objective(x, y, w, b, 0.0) + lambda * w.abs().sum();
    let mut obj = total(&w, b);
    let mut trace = vec![obj];
    let mut t = 1.0;
    for _ in 0..MAX_PROX {
        let f = smooth_objective(x, y, &w, b, 0.0);
        let (gw, gb) = smooth_gradient(x, y, &w, b, 0.0);
        t *= 2.0;
        let (wn, bn) = loop {
            let wn = (&w - &gw * t).map(|v| soft_threshold(v, t * lambda));
            let bn = b - gb * t;
            let dw = &wn - &w;
            let db = bn - b;
            let model = f + gw.dot(&dw) + gb * db + (dw.norm_squared() + db * db) / (2.0 * t);
            if smooth_objective(x, y, &wn, bn, 0.0) <= model + 1e-15 * f.abs() || t < 1e-20 {
                break (wn, bn);
            }
            t *= 0.5;
        };
        let next = total(&wn, bn);
        w = wn;
        b = bn;
        let change = (obj - next).abs();
        obj = next;
        trace.push(obj);
        if change < OBJ_TOL {
            break;
        }
    }
    (w, b, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(seed: u64, n: usize, d: usize) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
        let mut y: Vec<f64> = (0..n).map(|_| f64::from(rng.random::<bool>() as u8)).collect();
        y[0] = 0.0;
        y[1] = 1.0;
        (x, y)
    }

    #[test]
    fn gradient_matches_central_differences() {
        for seed in 0..10 {
            let (x, y) = random_problem(seed, 15, 4);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let w = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
            let b = rng.random_range(-1.0..1.0);
            let (gw, gb) = smooth_gradient(&x, &y, &w, b, 0.3);
            let h = 1e-5;
            let mut fd = Vec::new();
            for j in 0..4 {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[j] += h;
                wm[j] -= h;
                fd.push((smooth_objective(&x, &y, &wp, b, 0.3) - smooth_objective(&x, &y, &wm, b, 0.3)) / (2.0 * h));
            }
            fd.push((smooth_objective(&x, &y, &w, b + h, 0.3) - smooth_objective(&x, &y, &w, b - h, 0.3)) / (2.0 * h));
            let an: Vec<f64> = gw.iter().copied().chain([gb]).collect();
            let num: f64 = an.iter().zip(&fd).map(|(a, f)| (a - f).powi(2)).sum::<f64>().sqrt();
            let den: f64 = an.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(num / den < 1e-5, "seed {seed}: {}", num / den);
        }
    }

    #[test]
    fn separable_toy_l2() {
        let x = DMatrix::from_row_slice(6, 2, &[1.0, 1.0, 2.0, 1.5, 1.5, 2.5, -1.0, -1.0, -2.0, -0.5, -1.5, -2.0]);
        let y = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let m = fit_logreg(&x, &y, Penalty::L2, 1e-3).unwrap();
        for i in 0..6 {
            let p = m.predict_proba(&[x[(i, 0)], x[(i, 1)]]).unwrap();
            assert_eq!(p > 0.5, y[i] == 1.0);
        }
    }

    #[test]
    fn newton_decreases_monotonically_to_stationarity() {
        let (x, y) = random_problem(3, 40, 5);
        let (m, trace) = fit_logreg_traced(&x, &y, Penalty::L2, 0.05).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
        let (gw, gb) = smooth_gradient(&x, &y, &DVector::from_column_slice(&m.weights), m.bias, 0.05);
        assert!((gw.norm_squared() + gb * gb).sqrt() < 1e-8);
    }

    #[test]
    fn huge_l1_gives_prior_logit() {
        let (x, y) = random_problem(4, 30, 3);
        let m = fit_logreg(&x, &y, Penalty::L1, 1e6).unwrap();
        assert!(m.weights.iter().all(|&w| w == 0.0));
        let p = y.iter().sum::<f64>() / 30.0;
        assert!((m.bias - (p / (1.0 - p)).ln()).abs() < 1e-9);
    }

    #[test]
    fn l1_reaches_subgradient_optimality() {
        let (x, y) = random_problem(5, 50, 4);
        let lambda = 0.02;
        let m = fit_logreg(&x, &y, Penalty::L1, lambda).unwrap();
        let (gw, gb) = smooth_gradient(&x, &y, &DVector::from_column_slice(&m.weights), m.bias, 0.0);
        assert!(gb.abs() < 1e-4);
        for (g, w) in gw.iter().zip(&m.weights) {
            if *w == 0.0 {
                assert!(g.abs() <= lambda + 1e-4);
            } else {
                assert!((g + lambda * w.signum()).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn errors_and_edge_cases() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        assert!(matches!(fit_logreg(&x, &[1.0, 1.0], Penalty::L2, 1.0), Err(Error::DegenerateData(_))));
        assert!(fit_logreg(&x, &[1.0, 0.0], Penalty::L2, -1.0).is_err());
        assert!(fit_logreg(&x, &[1.0], Penalty::L2, 1.0).is_err());
        let zero = LinearModel { weights: vec![0.0; 3], bias: 0.0, penalty: Penalty::L2, lambda: 1.0 };
        assert_eq!(zero.predict_proba(&[1.0, -4.0, 2.0]).unwrap(), 0.5);
        assert!(matches!(zero.predict_proba(&[1.0]), Err(Error::Argument(_))));
    }

    #[test]
    fn sample_order_does_not_matter() {
        let (x, y) = random_problem(6, 20, 3);
        let perm: Vec<usize> = (0..20).rev().collect();
        let xp = x.select_rows(&perm);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let a = fit_logreg(&x, &y, Penalty::L2, 0.1).unwrap();
        let b = fit_logreg(&xp, &yp, Penalty::L2, 0.1).unwrap();
        for (u, v) in a.weights.iter().zip(&b.weights) {
            assert!((u - v).abs() < 1e-9);
        }
    }
}
