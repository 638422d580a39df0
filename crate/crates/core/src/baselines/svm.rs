//! Soft-margin SVM trained on the dual with SMO pairwise updates.
//!
//! Working-set selection is the maximal violating pair over
//! `m_i = -y_i G_i`, scanned in index order with strict comparisons so the
//! lowest index wins ties.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }

    pub fn gram(&self, x: &[Vec<f64>]) -> DMatrix<f64> {
        let n = x.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.eval(&x[i], &x[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoOptions {
    /// Stop once the maximal KKT violation drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SmoOptions {
    fn default() -> Self {
        Self { tol: 1e-3, max_iter: 10_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub max_violation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub dim: usize,
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Argument(format!(
                "input has dimension {}, model expects {}",
                x.len(),
                self.dim
            )));
        }
        let s: f64 = self
            .support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * self.kernel.eval(sv, x))
            .sum();
        Ok(s + self.bias)
    }

    /// Label 1 when the decision value is non-negative.
    pub fn predict_label(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.decision(x)? >= 0.0))
    }
}

fn in_up(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

/// Maximal violating pair `(i, j, m_i - m_j)`, if both sets are non-empty.
fn select_pair(grad: &[f64], alpha: &[f64], y: &[f64], c: f64) -> Option<(usize, usize, f64)> {
    let mut up: Option<(usize, f64)> = None;
    let mut low: Option<(usize, f64)> = None;
    for t in 0..y.len() {
        let m = -y[t] * grad[t];
        if in_up(y[t], alpha[t], c) && up.is_none_or(|(_, best)| m > best) {
            up = Some((t, m));
        }
        if in_low(y[t], alpha[t], c) && low.is_none_or(|(_, best)| m < best) {
            low = Some((t, m));
        }
    }
    match (up, low) {
        (Some((i, mi)), Some((j, mj))) => Some((i, j, mi - mj)),
        _ => None,
    }
}

/// Solves `min 1/2 a'Qa - 1'a` s.t. `0 <= a <= C`, `y'a = 0`, `Q_ij = y_i y_j K_ij`.
/// `on_step` sees the multipliers after every pair update.
pub fn solve_dual(
    gram: &DMatrix<f64>,
    y: &[f64],
    c: f64,
    opts: SmoOptions,
    mut on_step: impl FnMut(&[f64]),
) -> Result<DualSolution> {
    let n = y.len();
    if gram.nrows() != n || gram.ncols() != n {
        return Err(Error::Argument("kernel matrix does not match labels".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Argument(format!("C must be positive, got {c}")));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::Argument("SVM labels must be +1 or -1".into()));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::DegenerateData("training data contains a single class".into()));
    }

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;
    let mut violation = f64::INFINITY;
    while iterations < opts.max_iter {
        let Some((i, j, gap)) = select_pair(&grad, &alpha, y, c) else {
            violation = 0.0;
            break;
        };
        violation = gap;
        if gap < opts.tol {
            break;
        }
        iterations += 1;
        let eta = (gram[(i, i)] + gram[(j, j)] - 2.0 * gram[(i, j)]).max(1e-12);
        let mut t = gap / eta;
        let room_i = if y[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let room_j = if y[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        t = t.min(room_i).min(room_j);

        let old_i = alpha[i];
        let old_j = alpha[j];
        alpha[i] = if t == room_i { if y[i] > 0.0 { c } else { 0.0 } } else { old_i + y[i] * t };
        alpha[j] = if t == room_j { if y[j] > 0.0 { 0.0 } else { c } } else { old_j - y[j] * t };
        let di = (alpha[i] - old_i) * y[i];
        let dj = (alpha[j] - old_j) * y[j];
        for k in 0..n {
            grad[k] += y[k] * (gram[(k, i)] * di + gram[(k, j)] * dj);
        }
        on_step(&alpha);
    }

    let mut free_sum = 0.0;
    let mut free = 0usize;
    let mut up_max = f64::NEG_INFINITY;
    let mut low_min = f64::INFINITY;
    for t in 0..n {
        let m = -y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += m;
            free += 1;
        }
        if in_up(y[t], alpha[t], c) {
            up_max = up_max.max(m);
        }
        if in_low(y[t], alpha[t], c) {
            low_min = low_min.min(m);
        }
    }
    let bias = if free > 0 {
        free_sum / free as f64
    } else if up_max.is_finite() && low_min.is_finite() {
        0.5 * (up_max + low_min)
    } else if up_max.is_finite() {
        up_max
    } else {
        low_min
    };
    Ok(DualSolution { alpha, bias, iterations, max_violation: violation })
}

pub fn dual_objective(gram: &DMatrix<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    alpha.iter().sum::<f64>() - 0.5 * quad(gram, y, alpha)
}

/// `1/2 |w|^2 + C sum hinge(y_i f(x_i))` for `w = sum alpha_i y_i phi(x_i)`.
pub fn primal_objective(gram: &DMatrix<f64>, y: &[f64], alpha: &[f64], bias: f64, c: f64) -> f64 {
    let n = y.len();
    let hinge: f64 = (0..n)
        .map(|i| {
            let f: f64 = (0..n).map(|j| alpha[j] * y[j] * gram[(i, j)]).sum::<f64>() + bias;
            (1.0 - y[i] * f).max(0.0)
        })
        .sum();
    0.5 * quad(gram, y, alpha) + c * hinge
}

fn quad(gram: &DMatrix<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += alpha[i] * alpha[j] * y[i] * y[j] * gram[(i, j)];
        }
    }
    s
}

/// Fits on rows `x` with labels in {0, 1}.
pub fn fit_svm(x: &[Vec<f64>], y: &[f64], kernel: Kernel, c: f64) -> Result<SvmModel> {
    fit_svm_with(x, y, kernel, c, SmoOptions::default())
}

pub fn fit_svm_with(x: &[Vec<f64>], y: &[f64], kernel: Kernel, c: f64, opts: SmoOptions) -> Result<SvmModel> {
    if let Kernel::Rbf { gamma } = kernel {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Argument(format!("RBF gamma must be positive, got {gamma}")));
        }
    }
    if x.len() != y.len() {
        return Err(Error::Argument(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let dim = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != dim) {
        return Err(Error::Data("rows have differing dimensions".into()));
    }
    let signs: Vec<f64> = y.iter().map(|&v| if v == 1.0 { 1.0 } else if v == 0.0 { -1.0 } else { f64::NAN }).collect();
    let gram = kernel.gram(x);
    let sol = solve_dual(&gram, &signs, c, opts, |_| {})?;
    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(x[i].clone());
            dual_coef.push(a * signs[i]);
        }
    }
    Ok(SvmModel { kernel, c, support_vectors, dual_coef, bias: sol.bias, dim })
}
