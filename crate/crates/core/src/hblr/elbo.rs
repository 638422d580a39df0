//! The assembled evidence lower bound.
//!
//! ```text
//! L = sum_i [ln s(xi) - xi/2 + lambda(xi) xi^2
//!            + sum_k phi_k ((y - 1/2) theta_k'x - lambda(xi) E[(w_k'x)^2])]   likelihood (JJ bound)
//!   + sum_m sum_k phi_{m,k} E[ln pi_k] + H[q(c)]                               memberships
//!   + sum_{k<K} (E[ln alpha] + (E[alpha] - 1) E[ln(1 - v_k)] + H[q(v_k)])      sticks
//!   + E[ln Ga(alpha; tau10, tau20)] + H[q(alpha)]                               concentration
//!   - sum_k KL(N(theta_k, Gamma_k) || N(mu, sigma^2 I))                         cluster weights
//! ```

use super::data::HblrData;
use super::special::{beta_entropy, digamma, gamma_entropy, jj_lambda, ln_gamma, log_sigmoid};
use super::updates::{expected_log_weights, moments, Moments};
use super::{HblrHyperParams, VariationalState};

/// Breakdown of the bound into its additive terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundTerms {
    pub likelihood: f64,
    pub memberships: f64,
    pub sticks: f64,
    pub alpha: f64,
    pub weights: f64,
}

impl BoundTerms {
    pub fn total(&self) -> f64 {
        self.likelihood + self.memberships + self.sticks + self.alpha + self.weights
    }
}

pub fn elbo(state: &VariationalState, data: &HblrData, hp: &HblrHyperParams) -> f64 {
    bound_terms(state, data, hp).total()
}

pub fn bound_terms(state: &VariationalState, data: &HblrData, hp: &HblrHyperParams) -> BoundTerms {
    bound_terms_with(state, data, hp, None)
}

/// As [`bound_terms`], reusing `mom` when it matches the current Gaussians.
pub(crate) fn bound_terms_with(
    state: &VariationalState,
    data: &HblrData,
    hp: &HblrHyperParams,
    mom: Option<&Moments>,
) -> BoundTerms {
    let k = state.k();
    let d = state.theta.first().map_or(0, |t| t.len());

    let mut likelihood = 0.0;
    if data.n_rows() > 0 {
        let owned;
        let mom = match mom {
            Some(m) => m,
            None => {
                owned = moments(state, data);
                &owned
            }
        };
        for i in 0..data.n_rows() {
            let t = data.task_of(i);
            let xi = state.xi[i];
            let lam = jj_lambda(xi);
            let r = data.y[i] - 0.5;
            let mut mix = 0.0;
            for c in 0..k {
                mix += state.phi[(t, c)] * (r * mom.proj[(i, c)] - lam * mom.second[(i, c)]);
            }
            likelihood += log_sigmoid(xi) - 0.5 * xi + lam * xi * xi + mix;
        }
    }

    let log_weights = expected_log_weights(state);
    let mut memberships = 0.0;
    for t in 0..state.phi.nrows() {
        for (c, lw) in log_weights.iter().enumerate() {
            let p = state.phi[(t, c)];
            if p > 0.0 {
                memberships += p * (lw - p.ln());
            }
        }
    }

    let expected_alpha = state.tau1 / state.tau2;
    let expected_ln_alpha = digamma(state.tau1) - state.tau2.ln();
    let sticks: f64 = state
        .stick_a
        .iter()
        .zip(&state.stick_b)
        .map(|(&a, &b)| {
            let e_ln_1mv = digamma(b) - digamma(a + b);
            expected_ln_alpha + (expected_alpha - 1.0) * e_ln_1mv + beta_entropy(a, b)
        })
        .sum();

    let alpha = hp.tau10 * hp.tau20.ln() - ln_gamma(hp.tau10) + (hp.tau10 - 1.0) * expected_ln_alpha
        - hp.tau20 * expected_alpha
        + gamma_entropy(state.tau1, state.tau2);

    let var = hp.prior_var;
    let mut weights = 0.0;
    for c in 0..k {
        let theta = &state.theta[c];
        let gamma = &state.gamma[c];
        let diff_sq: f64 = match &hp.prior_mean {
            Some(mu) => theta.iter().zip(mu).map(|(t, m)| (t - m) * (t - m)).sum(),
            None => theta.norm_squared(),
        };
        let ln_det = gamma
            .clone()
            .cholesky()
            .map_or(f64::NEG_INFINITY, |ch| 2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>());
        let kl = 0.5 * (gamma.trace() / var + diff_sq / var - d as f64 + d as f64 * var.ln() - ln_det);
        weights -= kl;
    }

    BoundTerms {
        likelihood,
        memberships,
        sticks,
        alpha,
        weights,
    }
}
