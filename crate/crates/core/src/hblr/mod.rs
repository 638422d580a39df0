//! Hierarchical Bayesian logistic regression with a Dirichlet-process prior.
//!
//! Task `m` has weights `w_m` drawn from `G ~ DP(alpha, N(mu, sigma^2 I))`,
//! `alpha ~ Gamma(tau10, tau20)` (shape, rate). The posterior is approximated
//! by the truncated stick-breaking mean-field family
//!
//! ```text
//! q = prod_m Mult(c_m; phi_m) * prod_{k<K} Beta(v_k; a_k, b_k) * Gamma(alpha; tau1, tau2)
//!     * prod_k N(w*_k; theta_k, Gamma_k),      v_K = 1
//! ```
//!
//! and fitted by coordinate ascent. The logistic likelihood is replaced by
//! the Jaakkola-Jordan quadratic bound with one parameter `xi` per training
//! instance, which makes every update closed-form and the assembled bound
//! ([`elbo`]) monotone under each of them.

mod data;
mod elbo;
mod io;
pub mod special;
mod updates;

pub use data::{design_row, HblrData};
pub use elbo::{bound_terms, elbo, BoundTerms};
pub use io::{read_model, write_membership_csv, write_model, HblrModelFile, MODEL_FORMAT_VERSION};
pub use updates::{init_state, update_alpha, update_cluster_gaussians, update_local_bounds, update_memberships, update_sticks};

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{NormalizationStats, TaskFeatureSet};
use special::sigmoid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HblrHyperParams {
    /// Truncation level (maximum number of clusters).
    pub k: usize,
    pub tau10: f64,
    pub tau20: f64,
    /// Prior mean of the base measure; `None` is the zero vector.
    pub prior_mean: Option<Vec<f64>>,
    /// `sigma^2` in the base covariance `sigma^2 I`.
    pub prior_var: f64,
    pub max_sweeps: usize,
    pub rel_tol: f64,
    pub seed: u64,
    /// Append a constant 1 to every feature vector.
    pub intercept: bool,
    /// Predict unseen tasks with the expected stick weights instead of failing.
    pub cold_start: bool,
    /// Size of the random perturbation added to the uniform initial memberships.
    pub init_perturbation: f64,
}

impl Default for HblrHyperParams {
    fn default() -> Self {
        Self {
            k: 4,
            tau10: 0.01,
            tau20: 0.1,
            prior_mean: None,
            prior_var: 10.0,
            max_sweeps: 500,
            rel_tol: 1e-6,
            seed: 0,
            intercept: true,
            cold_start: false,
            init_perturbation: 1.0,
        }
    }
}

impl HblrHyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if !(self.tau10 > 0.0 && self.tau10.is_finite()) || !(self.tau20 > 0.0 && self.tau20.is_finite()) {
            return bad("tau10 and tau20 must be positive");
        }
        if !(self.prior_var > 0.0 && self.prior_var.is_finite()) {
            return bad("prior_var must be positive");
        }
        if self.max_sweeps == 0 {
            return bad("max_sweeps must be positive");
        }
        if !(self.rel_tol >= 0.0) {
            return bad("rel_tol must be non-negative");
        }
        if !(self.init_perturbation >= 0.0 && self.init_perturbation.is_finite()) {
            return bad("init_perturbation must be non-negative");
        }
        Ok(())
    }
}

/// All variational parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationalState {
    /// `M x K` row-stochastic membership matrix.
    pub phi: DMatrix<f64>,
    /// Beta parameters of the sticks `v_1 .. v_{K-1}`.
    pub stick_a: Vec<f64>,
    pub stick_b: Vec<f64>,
    /// Gamma (shape, rate) of the concentration.
    pub tau1: f64,
    pub tau2: f64,
    pub theta: Vec<DVector<f64>>,
    pub gamma: Vec<DMatrix<f64>>,
    /// Local bound parameter per training row.
    pub xi: DVector<f64>,
    pub bound: f64,
}

impl VariationalState {
    pub fn k(&self) -> usize {
        self.theta.len()
    }

    /// `E[pi_k] = E[v_k] prod_{j<k} (1 - E[v_j])`, summing to one.
    pub fn expected_stick_weights(&self) -> Vec<f64> {
        let k = self.k();
        let mut out = Vec::with_capacity(k);
        let mut remaining = 1.0;
        for c in 0..k {
            if c + 1 < k {
                let ev = self.stick_a[c] / (self.stick_a[c] + self.stick_b[c]);
                out.push(remaining * ev);
                remaining *= 1.0 - ev;
            } else {
                out.push(remaining);
            }
        }
        out
    }

    pub fn expected_alpha(&self) -> f64 {
        self.tau1 / self.tau2
    }
}

/// Which membership vector weights the cluster predictions.
#[derive(Clone, Copy, Debug)]
pub enum TaskRef<'a> {
    Known(&'a str),
    Unseen,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedHblr {
    pub state: VariationalState,
    pub hyper: HblrHyperParams,
    pub normalizer: Option<NormalizationStats>,
    pub task_ids: Vec<String>,
    pub task_index: BTreeMap<String, usize>,
    /// Bound after initialization and after every sweep.
    pub bound_trace: Vec<f64>,
    pub converged: bool,
}

/// Runs coordinate ascent (local bounds, Gaussians, memberships, sticks,
/// concentration) until the relative change of the bound drops below
/// `rel_tol` or `max_sweeps` is reached.
pub fn fit(sets: &[TaskFeatureSet], hp: &HblrHyperParams) -> Result<TrainedHblr> {
    let data = HblrData::from_task_sets(sets, hp.intercept)?;
    fit_data(&data, hp)
}

pub fn fit_data(data: &HblrData, hp: &HblrHyperParams) -> Result<TrainedHblr> {
    let state = init_state(data, hp)?;
    fit_from(data, hp, state)
}

/// Runs coordinate ascent from a caller-supplied state, e.g. a warm start.
pub fn fit_from(data: &HblrData, hp: &HblrHyperParams, mut state: VariationalState) -> Result<TrainedHblr> {
    hp.validate()?;
    state.bound = elbo(&state, data, hp);
    let mut trace = vec![state.bound];
    let mut converged = false;
    // Moments depend only on the Gaussians, so one evaluation per sweep
    // serves the bound, the memberships and the next local-bound update.
    let mut mom = updates::moments(&state, data);
    for sweep in 1..=hp.max_sweeps {
        updates::local_bounds_from(&mut state, data, &mom);
        update_cluster_gaussians(&mut state, data, hp, sweep)?;
        mom = updates::moments(&state, data);
        updates::memberships_from(&mut state, data, &mom);
        update_sticks(&mut state);
        update_alpha(&mut state, hp);
        let bound = elbo::bound_terms_with(&state, data, hp, Some(&mom)).total();
        if !bound.is_finite() {
            return Err(Error::Inference {
                sweep,
                message: format!("bound became {bound}"),
            });
        }
        let previous = state.bound;
        state.bound = bound;
        trace.push(bound);
        if ((bound - previous) / previous.abs()).abs() < hp.rel_tol {
            converged = true;
            break;
        }
    }
    let task_index = data
        .task_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i))
        .collect();
    Ok(TrainedHblr {
        state,
        hyper: hp.clone(),
        normalizer: None,
        task_ids: data.task_ids.clone(),
        task_index,
        bound_trace: trace,
        converged,
    })
}

/// `sigma(theta' x / sqrt(1 + pi/8 x' Gamma x))`, the probit-style
/// approximation of `E[sigma(w' x)]` under `w ~ N(theta, Gamma)`.
pub fn mackay_probability(theta: &DVector<f64>, gamma: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    let mean = theta.dot(x);
    let var = (gamma * x).dot(x);
    sigmoid(mean / (1.0 + PI / 8.0 * var).sqrt())
}

impl TrainedHblr {
    pub fn with_normalizer(mut self, stats: NormalizationStats) -> Self {
        self.normalizer = Some(stats);
        self
    }

    pub fn k(&self) -> usize {
        self.state.k()
    }

    /// Feature dimension expected by [`Self::predict_proba`].
    pub fn feature_dim(&self) -> usize {
        let d = self.state.theta[0].len();
        if self.hyper.intercept {
            d - 1
        } else {
            d
        }
    }

    pub fn task_weights(&self, task: TaskRef<'_>) -> Result<Vec<f64>> {
        match task {
            TaskRef::Known(id) => match self.task_index.get(id) {
                Some(&row) => Ok(self.state.phi.row(row).iter().copied().collect()),
                None if self.hyper.cold_start => Ok(self.state.expected_stick_weights()),
                None => Err(Error::UnknownTask(id.to_string())),
            },
            TaskRef::Unseen => Ok(self.state.expected_stick_weights()),
        }
    }

    /// Probability of pain for an already-normalized feature vector.
    pub fn predict_proba(&self, task: TaskRef<'_>, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_dim() {
            return Err(Error::Argument(format!(
                "feature dimension {} does not match model dimension {}",
                x.len(),
                self.feature_dim()
            )));
        }
        let weights = self.task_weights(task)?;
        let x = DVector::from_vec(design_row(x, self.hyper.intercept));
        Ok(weights
            .iter()
            .zip(self.state.theta.iter().zip(&self.state.gamma))
            .map(|(w, (theta, gamma))| w * mackay_probability(theta, gamma, &x))
            .sum())
    }

    /// Learned memberships, one row per training task in training order.
    pub fn membership_matrix(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let rows = self
            .state
            .phi
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        (self.task_ids.clone(), rows)
    }
}
