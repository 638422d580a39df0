//! Versioned JSON model file and membership CSV export.
//!
//! The local bound parameters `xi` are training-only and not stored; a
//! loaded model carries an empty `xi`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{HblrHyperParams, TrainedHblr, VariationalState};
use crate::error::{Error, Result};
use crate::features::NormalizationStats;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HblrModelFile {
    pub format_version: u32,
    pub hyper: HblrHyperParams,
    pub task_ids: Vec<String>,
    pub phi: Vec<Vec<f64>>,
    pub stick_a: Vec<f64>,
    pub stick_b: Vec<f64>,
    pub tau1: f64,
    pub tau2: f64,
    pub theta: Vec<Vec<f64>>,
    /// `gamma[k][row][col]`.
    pub gamma: Vec<Vec<Vec<f64>>>,
    pub bound: f64,
    pub bound_trace: Vec<f64>,
    pub converged: bool,
    pub normalizer: Option<NormalizationStats>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::parse(0, format!("{what}: ragged matrix")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

impl From<&TrainedHblr> for HblrModelFile {
    fn from(m: &TrainedHblr) -> Self {
        let s = &m.state;
        Self {
            format_version: MODEL_FORMAT_VERSION,
            hyper: m.hyper.clone(),
            task_ids: m.task_ids.clone(),
            phi: rows_of(&s.phi),
            stick_a: s.stick_a.clone(),
            stick_b: s.stick_b.clone(),
            tau1: s.tau1,
            tau2: s.tau2,
            theta: s.theta.iter().map(|t| t.iter().copied().collect()).collect(),
            gamma: s.gamma.iter().map(rows_of).collect(),
            bound: s.bound,
            bound_trace: m.bound_trace.clone(),
            converged: m.converged,
            normalizer: m.normalizer.clone(),
        }
    }
}

impl HblrModelFile {
    pub fn into_model(self) -> Result<TrainedHblr> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::parse(
                0,
                format!("unsupported model format version {}", self.format_version),
            ));
        }
        let k = self.theta.len();
        let d = self.theta.first().map_or(0, Vec::len);
        let consistent = k == self.hyper.k
            && self.gamma.len() == k
            && self.stick_a.len() + 1 == k
            && self.stick_b.len() + 1 == k
            && self.phi.len() == self.task_ids.len()
            && self.phi.iter().all(|r| r.len() == k)
            && self.theta.iter().all(|t| t.len() == d)
            && self.gamma.iter().all(|g| g.len() == d && g.iter().all(|r| r.len() == d));
        if !consistent {
            return Err(Error::parse(0, "model arrays have inconsistent shapes"));
        }
        let phi = if self.phi.is_empty() {
            DMatrix::zeros(0, k)
        } else {
            matrix_from_rows(&self.phi, "phi")?
        };
        let gamma = self
            .gamma
            .iter()
            .map(|g| matrix_from_rows(g, "gamma"))
            .collect::<Result<Vec<_>>>()?;
        let task_index: BTreeMap<String, usize> = self
            .task_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Ok(TrainedHblr {
            state: VariationalState {
                phi,
                stick_a: self.stick_a,
                stick_b: self.stick_b,
                tau1: self.tau1,
                tau2: self.tau2,
                theta: self.theta.into_iter().map(DVector::from_vec).collect(),
                gamma,
                xi: DVector::zeros(0),
                bound: self.bound,
            },
            hyper: self.hyper,
            normalizer: self.normalizer,
            task_ids: self.task_ids,
            task_index,
            bound_trace: self.bound_trace,
            converged: self.converged,
        })
    }
}

pub fn write_model(path: impl AsRef<Path>, model: &TrainedHblr) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&HblrModelFile::from(model)).map_err(|e| Error::Serialize(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<TrainedHblr> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: HblrModelFile = serde_json::from_str(&text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
    file.into_model()
}

/// `task_id,phi_1,...,phi_K`, one row per task.
pub fn write_membership_csv<W: Write>(mut out: W, task_ids: &[String], rows: &[Vec<f64>]) -> std::io::Result<()> {
    let k = rows.first().map_or(0, Vec::len);
    write!(out, "task_id")?;
    for c in 1..=k {
        write!(out, ",phi_{c}")?;
    }
    writeln!(out)?;
    for (id, row) in task_ids.iter().zip(rows) {
        write!(out, "{id}")?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()
}
