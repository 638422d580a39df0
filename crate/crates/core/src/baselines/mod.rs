//! Pooled single-task baselines: L1/L2 logistic regression and linear/RBF
//! SVMs, with hyperparameters picked by an inner stratified k-fold grid.

pub mod logreg;
pub mod svm;

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, NormalizationStats};
use crate::seed::rng_for;

pub use logreg::{fit_logreg, LinearModel, Penalty};
pub use svm::{fit_svm, fit_svm_with, Kernel, SmoOptions, SvmModel};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    LogregL1,
    LogregL2,
    SvmLinear,
    SvmRbf,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::LogregL1 => "logreg-l1",
            BaselineKind::LogregL2 => "logreg-l2",
            BaselineKind::SvmLinear => "svm-linear",
            BaselineKind::SvmRbf => "svm-rbf",
        }
    }
}

/// Candidate hyperparameters. RBF widths are `gamma_scale / D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineGrid {
    pub lambdas: Vec<f64>,
    pub c: Vec<f64>,
    pub gamma_scale: Vec<f64>,
    pub inner_folds: usize,
}

impl Default for BaselineGrid {
    fn default() -> Self {
        Self {
            lambdas: vec![1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2],
            c: vec![0.1, 1.0, 10.0],
            gamma_scale: vec![0.1, 1.0, 10.0],
            inner_folds: 5,
        }
    }
}

impl BaselineGrid {
    pub fn validate(&self) -> Result<()> {
        if self.inner_folds < 2 {
            return Err(Error::Config(format!("inner_folds must be >= 2, got {}", self.inner_folds)));
        }
        if self.lambdas.is_empty() || self.c.is_empty() || self.gamma_scale.is_empty() {
            return Err(Error::Config("baseline grids must be non-empty".into()));
        }
        if self.lambdas.iter().any(|&l| !(l >= 0.0)) {
            return Err(Error::Config("lambdas must be >= 0".into()));
        }
        if self.c.iter().chain(&self.gamma_scale).any(|&v| !(v > 0.0)) {
            return Err(Error::Config("C and gamma scales must be positive".into()));
        }
        Ok(())
    }
}

/// One concrete hyperparameter setting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaselineParams {
    Logreg { penalty: Penalty, lambda: f64 },
    Svm { kernel: Kernel, c: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaselineModel {
    Logreg(LinearModel),
    Svm(SvmModel),
}

impl BaselineModel {
    /// Probability for logistic models; `1.0`/`0.0` by decision sign for SVMs.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        match self {
            BaselineModel::Logreg(m) => m.predict_proba(x),
            BaselineModel::Svm(m) => m.predict_label(x).map(f64::from),
        }
    }
}

pub fn candidates(kind: BaselineKind, grid: &BaselineGrid, dim: usize) -> Vec<BaselineParams> {
    let d = dim.max(1) as f64;
    match kind {
        BaselineKind::LogregL1 | BaselineKind::LogregL2 => {
            let penalty = if kind == BaselineKind::LogregL1 { Penalty::L1 } else { Penalty::L2 };
            grid.lambdas.iter().map(|&lambda| BaselineParams::Logreg { penalty, lambda }).collect()
        }
        BaselineKind::SvmLinear => grid.c.iter().map(|&c| BaselineParams::Svm { kernel: Kernel::Linear, c }).collect(),
        BaselineKind::SvmRbf => grid
            .c
            .iter()
            .flat_map(|&c| {
                grid.gamma_scale
                    .iter()
                    .map(move |&g| BaselineParams::Svm { kernel: Kernel::Rbf { gamma: g / d }, c })
            })
            .collect(),
    }
}

pub fn fit_params(x: &[Vec<f64>], y: &[f64], params: BaselineParams) -> Result<BaselineModel> {
    match params {
        BaselineParams::Logreg { penalty, lambda } => {
            let m = to_matrix(x)?;
            fit_logreg(&m, y, penalty, lambda).map(BaselineModel::Logreg)
        }
        BaselineParams::Svm { kernel, c } => fit_svm(x, y, kernel, c).map(BaselineModel::Svm),
    }
}

fn to_matrix(x: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::Data("rows have differing dimensions".into()));
    }
    Ok(DMatrix::from_fn(x.len(), d, |i, j| x[i][j]))
}

/// Label-stratified split of `0..n` into `k` folds: each class is shuffled,
/// then dealt round-robin, continuing the rotation across classes.
pub fn stratified_folds(y: &[f64], k: usize, seed: u64, tag: &str) -> Vec<Vec<usize>> {
    let mut rng = rng_for(seed, tag);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in [1.0, 0.0] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

fn accuracy(model: &BaselineModel, x: &[Vec<f64>], y: &[f64], idx: &[usize]) -> Result<f64> {
    let mut hits = 0usize;
    for &i in idx {
        let p = model.score(&x[i])?;
        if (p >= 0.5) == (y[i] == 1.0) {
            hits += 1;
        }
    }
    Ok(hits as f64 / idx.len().max(1) as f64)
}

/// Picks the grid point with the best inner-CV accuracy (first one on ties)
/// and refits it on all of `x`.
pub fn select_and_fit(
    kind: BaselineKind,
    x: &[Vec<f64>],
    y: &[f64],
    grid: &BaselineGrid,
    seed: u64,
) -> Result<(BaselineModel, BaselineParams)> {
    grid.validate()?;
    let dim = x.first().map_or(0, Vec::len);
    let cands = candidates(kind, grid, dim);
    let best = if cands.len() == 1 {
        cands[0]
    } else {
        let folds = stratified_folds(y, grid.inner_folds, seed, "baselines/inner");
        let mut best: Option<(BaselineParams, f64)> = None;
        for &p in &cands {
            let mut total = 0.0;
            for (f, test) in folds.iter().enumerate() {
                let train: Vec<usize> = folds
                    .iter()
                    .enumerate()
                    .filter(|&(g, _)| g != f)
                    .flat_map(|(_, v)| v.iter().copied())
                    .collect();
                let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
                let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                let model = fit_params(&tx, &ty, p)?;
                total += accuracy(&model, x, y, test)?;
            }
            let score = total / folds.len() as f64;
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((p, score));
            }
        }
        best.map(|(p, _)| p).ok_or_else(|| Error::Config("empty baseline grid".into()))?
    };
    Ok((fit_params(x, y, best)?, best))
}

/// Rows and 0/1 labels of pooled feature vectors.
pub fn pooled<'a>(vectors: impl IntoIterator<Item = &'a FeatureVector>) -> (Vec<Vec<f64>>, Vec<f64>) {
    vectors.into_iter().map(|v| (v.values.clone(), v.label.as_f64())).unzip()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineModelFile {
    pub format_version: u32,
    pub model_type: BaselineKind,
    pub params: BaselineParams,
    pub model: BaselineModel,
    pub normalizer: Option<NormalizationStats>,
}

pub fn write_baseline_model(path: impl AsRef<Path>, file: &BaselineModelFile) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(file).map_err(|e| Error::Serialize(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_baseline_model(path: impl AsRef<Path>) -> Result<BaselineModelFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: BaselineModelFile =
        serde_json::from_str(&text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::parse(0, format!("unsupported model format version {}", file.format_version)));
    }
    Ok(file)
}
