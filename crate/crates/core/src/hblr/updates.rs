//! Coordinate-ascent updates. Each one maximizes the assembled bound over one
//! block of variational parameters with all others held fixed.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::data::HblrData;
use super::special::{digamma, jj_lambda, XI_FLOOR};
use super::{HblrHyperParams, VariationalState};
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Per-row, per-cluster moments `theta_k' x` and `E[(w_k' x)^2]`.
pub(crate) struct Moments {
    pub proj: DMatrix<f64>,
    pub second: DMatrix<f64>,
}

pub(crate) fn moments(state: &VariationalState, data: &HblrData) -> Moments {
    let n = data.n_rows();
    let k = state.k();
    let mut proj = DMatrix::zeros(n, k);
    let mut second = DMatrix::zeros(n, k);
    for c in 0..k {
        let p = &data.x * &state.theta[c];
        let xg = &data.x * &state.gamma[c];
        for i in 0..n {
            let quad = xg.row(i).dot(&data.x.row(i));
            proj[(i, c)] = p[i];
            second[(i, c)] = quad + p[i] * p[i];
        }
    }
    Moments { proj, second }
}

/// `E[ln v_k] + sum_{j<k} E[ln(1 - v_j)]` for every cluster, with `v_K = 1`.
pub(crate) fn expected_log_weights(state: &VariationalState) -> Vec<f64> {
    let k = state.k();
    let mut out = Vec::with_capacity(k);
    let mut acc = 0.0;
    for c in 0..k {
        if c + 1 < k {
            let (a, b) = (state.stick_a[c], state.stick_b[c]);
            let total = digamma(a + b);
            out.push(acc + digamma(a) - total);
            acc += digamma(b) - total;
        } else {
            out.push(acc);
        }
    }
    out
}

pub fn init_state(data: &HblrData, hp: &HblrHyperParams) -> Result<VariationalState> {
    hp.validate()?;
    if data.n_tasks() == 0 {
        return Err(Error::Data("no tasks to fit".into()));
    }
    let d = data.dim();
    if let Some(mu) = &hp.prior_mean {
        if mu.len() != d {
            return Err(Error::Data(format!("prior mean has dimension {}, data {d}", mu.len())));
        }
    }
    let k = hp.k;
    let m = data.n_tasks();

    let mut phi = DMatrix::zeros(m, k);
    for (t, id) in data.task_ids.iter().enumerate() {
        let mut rng = rng_for(hp.seed, &format!("hblr/phi/{id}"));
        let row: Vec<f64> = (0..k)
            .map(|_| 1.0 / k as f64 + hp.init_perturbation * rng.random::<f64>())
            .collect();
        let total: f64 = row.iter().sum();
        for (c, v) in row.into_iter().enumerate() {
            phi[(t, c)] = v / total;
        }
    }

    let theta = (0..k)
        .map(|c| {
            let mut rng = rng_for(hp.seed, &format!("hblr/theta/{c}"));
            DVector::from_fn(d, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                0.1 * z
            })
        })
        .collect();
    let gamma = vec![DMatrix::identity(d, d) * hp.prior_var; k];

    let mut state = VariationalState {
        phi,
        stick_a: vec![1.0; k - 1],
        stick_b: vec![1.0; k - 1],
        tau1: hp.tau10,
        tau2: hp.tau20,
        theta,
        gamma,
        xi: DVector::from_element(data.n_rows(), 1.0),
        bound: f64::NEG_INFINITY,
    };
    update_sticks(&mut state);
    update_alpha(&mut state, hp);
    Ok(state)
}

/// `xi_i^2 = sum_k phi_{m(i),k} x_i' (Gamma_k + theta_k theta_k') x_i`.
pub fn update_local_bounds(state: &mut VariationalState, data: &HblrData) {
    let mom = moments(state, data);
    local_bounds_from(state, data, &mom);
}

pub(crate) fn local_bounds_from(state: &mut VariationalState, data: &HblrData, mom: &Moments) {
    for i in 0..data.n_rows() {
        let t = data.task_of(i);
        let s: f64 = (0..state.k()).map(|c| state.phi[(t, c)] * mom.second[(i, c)]).sum();
        state.xi[i] = s.max(0.0).sqrt().max(XI_FLOOR);
    }
}

/// Gaussian factor of every cluster:
/// `Gamma_k^{-1} = Sigma^{-1} + 2 sum phi lambda(xi) x x'`,
/// `theta_k = Gamma_k (Sigma^{-1} mu + sum phi (y - 1/2) x)`.
pub fn update_cluster_gaussians(
    state: &mut VariationalState,
    data: &HblrData,
    hp: &HblrHyperParams,
    sweep: usize,
) -> Result<()> {
    let d = data.dim();
    let inv_var = 1.0 / hp.prior_var;
    let lambdas: Vec<f64> = state.xi.iter().map(|&x| jj_lambda(x)).collect();
    let prior_term = hp
        .prior_mean
        .as_ref()
        .map_or_else(|| DVector::zeros(d), |mu| DVector::from_column_slice(mu) * inv_var);

    let updated: Vec<Result<(DVector<f64>, DMatrix<f64>)>> = (0..state.k())
        .into_par_iter()
        .map(|c| {
            let n = data.n_rows();
            let mut scale = DVector::zeros(n);
            let mut resid = DVector::zeros(n);
            for i in 0..n {
                let w = state.phi[(data.task_of(i), c)];
                scale[i] = (2.0 * w * lambdas[i]).sqrt();
                resid[i] = w * (data.y[i] - 0.5);
            }
            let mut xs = data.x.clone();
            for mut col in xs.column_iter_mut() {
                col.component_mul_assign(&scale);
            }
            let mut precision = xs.tr_mul(&xs);
            for j in 0..d {
                precision[(j, j)] += inv_var;
            }
            let rhs = data.x.tr_mul(&resid) + &prior_term;
            let chol = precision.cholesky().ok_or_else(|| Error::Inference {
                sweep,
                message: format!("cluster {c} precision is not positive definite"),
            })?;
            let theta = chol.solve(&rhs);
            let mut cov = chol.inverse();
            cov = (&cov + cov.transpose()) * 0.5;
            Ok((theta, cov))
        })
        .collect();
    for (c, r) in updated.into_iter().enumerate() {
        let (theta, cov) = r?;
        state.theta[c] = theta;
        state.gamma[c] = cov;
    }
    Ok(())
}

/// Task memberships:
/// `ln phi_{m,k} = E[ln pi_k] + sum_i [(y - 1/2) theta_k' x - lambda(xi) E[(w_k' x)^2]] + const`.
pub fn update_memberships(state: &mut VariationalState, data: &HblrData) {
    let mom = moments(state, data);
    memberships_from(state, data, &mom);
}

pub(crate) fn memberships_from(state: &mut VariationalState, data: &HblrData, mom: &Moments) {
    let k = state.k();
    let prior = expected_log_weights(state);
    for (t, range) in data.ranges.iter().enumerate() {
        let mut logits = prior.clone();
        for i in range.clone() {
            let lam = jj_lambda(state.xi[i]);
            let r = data.y[i] - 0.5;
            for (c, l) in logits.iter_mut().enumerate() {
                *l += r * mom.proj[(i, c)] - lam * mom.second[(i, c)];
            }
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        for c in 0..k {
            state.phi[(t, c)] = (logits[c] - max).exp() / total;
        }
    }
}

/// `a_k = 1 + sum_m phi_{m,k}`, `b_k = E[alpha] + sum_m sum_{j>k} phi_{m,j}`.
pub fn update_sticks(state: &mut VariationalState) {
    let k = state.k();
    let expected_alpha = state.tau1 / state.tau2;
    let mass: Vec<f64> = (0..k).map(|c| state.phi.column(c).sum()).collect();
    let mut tail = 0.0;
    for c in (0..k.saturating_sub(1)).rev() {
        tail += mass[c + 1];
        state.stick_a[c] = 1.0 + mass[c];
        state.stick_b[c] = expected_alpha + tail;
    }
}

/// `tau_1 = tau10 + K - 1`, `tau_2 = tau20 - sum_{k<K} E[ln(1 - v_k)]`.
pub fn update_alpha(state: &mut VariationalState, hp: &HblrHyperParams) {
    let k = state.k();
    state.tau1 = hp.tau10 + (k - 1) as f64;
    state.tau2 = hp.tau20
        - state
            .stick_a
            .iter()
            .zip(&state.stick_b)
            .map(|(&a, &b)| digamma(b) - digamma(a + b))
            .sum::<f64>();
}
