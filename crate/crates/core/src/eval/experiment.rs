use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{balance_downsample, compute_metrics, make_folds, FoldPlan, Metrics};
use crate::baselines::{pooled, select_and_fit, BaselineGrid, BaselineKind, BaselineParams};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, NormalizationStats, TaskFeatureSet};
use crate::hblr::{self, HblrHyperParams, TaskRef};
use crate::seed::sub_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelSpec {
    Hblr { hyper: HblrHyperParams },
    Baseline { kind: BaselineKind, grid: BaselineGrid },
}

impl ModelSpec {
    pub fn name(&self) -> String {
        match self {
            ModelSpec::Hblr { hyper } => format!("hblr-k{}", hyper.k),
            ModelSpec::Baseline { kind, .. } => kind.name().to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub folds: usize,
    pub seed: u64,
    /// Downsample the larger class within each task before splitting.
    pub balance: bool,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self { folds: 10, seed: 0, balance: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub model: String,
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected: Option<BaselineParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    pub metrics: Metrics,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

impl MetricSummary {
    fn from_fn(f: impl Fn(&dyn Fn(&Metrics) -> f64) -> f64) -> Self {
        Self {
            accuracy: f(&|m| m.accuracy),
            precision: f(&|m| m.precision),
            recall: f(&|m| m.recall),
            f1: f(&|m| m.f1),
            macro_precision: f(&|m| m.macro_precision),
            macro_recall: f(&|m| m.macro_recall),
            macro_f1: f(&|m| m.macro_f1),
        }
    }
}

/// Mean and population standard deviation over the folds of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub n_folds: usize,
    pub mean: MetricSummary,
    pub std: MetricSummary,
}

impl ModelSummary {
    pub fn from_folds(model: &str, folds: &[&FoldResult]) -> Self {
        let n = folds.len().max(1) as f64;
        let mean = MetricSummary::from_fn(|get| folds.iter().map(|r| get(&r.metrics)).sum::<f64>() / n);
        let std = MetricSummary::from_fn(|get| {
            let mu = folds.iter().map(|r| get(&r.metrics)).sum::<f64>() / n;
            (folds.iter().map(|r| (get(&r.metrics) - mu).powi(2)).sum::<f64>() / n).sqrt()
        });
        Self { model: model.to_string(), n_folds: folds.len(), mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub folds: usize,
    pub balanced: bool,
    pub n_tasks: usize,
    pub n_instances: usize,
    pub models: Vec<ModelSpec>,
    pub summaries: Vec<ModelSummary>,
    /// Ordered by model, then fold index.
    pub per_fold: Vec<FoldResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub membership_csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl ExperimentReport {
    pub fn summary(&self, model: &str) -> Option<&ModelSummary> {
        self.summaries.iter().find(|s| s.model == model)
    }
}

struct FoldData {
    train: Vec<TaskFeatureSet>,
    test: Vec<FeatureVector>,
}

fn fold_data(sets: &[TaskFeatureSet], plan: &FoldPlan, f: usize) -> Result<Option<FoldData>> {
    let mut train_raw = Vec::with_capacity(sets.len());
    let mut test = Vec::new();
    for (t, s) in sets.iter().enumerate() {
        let (tr, te) = plan.split(t, f, s.len());
        test.extend(te.iter().map(|&i| s.rows[i].clone()));
        if !tr.is_empty() {
            train_raw.push(TaskFeatureSet {
                task_id: s.task_id.clone(),
                rows: tr.iter().map(|&i| s.rows[i].clone()).collect(),
            });
        }
    }
    if test.is_empty() {
        return Ok(None);
    }
    let stats = NormalizationStats::fit(train_raw.iter().flat_map(|s| s.rows.iter()))?;
    let train = train_raw
        .iter()
        .map(|s| {
            Ok(TaskFeatureSet {
                task_id: s.task_id.clone(),
                rows: s.rows.iter().map(|r| stats.apply(r)).collect::<Result<_>>()?,
            })
        })
        .collect::<Result<_>>()?;
    let test = test.iter().map(|r| stats.apply(r)).collect::<Result<_>>()?;
    Ok(Some(FoldData { train, test }))
}

fn run_fold(spec: &ModelSpec, data: &FoldData, f: usize, seed: u64) -> Result<FoldResult> {
    let labels: Vec<u8> = data.test.iter().map(|r| r.label.as_u8()).collect();
    let n_train = data.train.iter().map(TaskFeatureSet::len).sum();
    let mut result = FoldResult {
        model: spec.name(),
        fold: f,
        n_train,
        n_test: data.test.len(),
        selected: None,
        sweeps: None,
        converged: None,
        metrics: Metrics::from_counts(0, 0, 0, 0),
    };
    let scores: Vec<f64> = match spec {
        ModelSpec::Hblr { hyper } => {
            let hp = HblrHyperParams { seed: sub_seed(seed, &format!("eval/hblr/fold/{f}")), ..hyper.clone() };
            let model = hblr::fit(&data.train, &hp)?;
            result.sweeps = Some(model.bound_trace.len() - 1);
            result.converged = Some(model.converged);
            data.test
                .iter()
                .map(|r| {
                    let task = if model.task_index.contains_key(&r.task_id) {
                        TaskRef::Known(&r.task_id)
                    } else if hp.cold_start {
                        TaskRef::Unseen
                    } else {
                        return Err(Error::UnknownTask(r.task_id.clone()));
                    };
                    model.predict_proba(task, &r.values)
                })
                .collect::<Result<_>>()?
        }
        ModelSpec::Baseline { kind, grid } => {
            let (x, y) = pooled(data.train.iter().flat_map(|s| s.rows.iter()));
            let inner = sub_seed(seed, &format!("eval/baseline/fold/{f}"));
            let (model, params) = select_and_fit(*kind, &x, &y, grid, inner)?;
            result.selected = Some(params);
            data.test.iter().map(|r| model.score(&r.values)).collect::<Result<_>>()?
        }
    };
    result.metrics = compute_metrics(&scores, &labels, 0.5)?;
    Ok(result)
}

/// Per-task cross-validation of every model in `models`. Normalization is
/// fitted on each training fold. Folds run in parallel; the report order is
/// canonical.
pub fn run_experiment(sets: &[TaskFeatureSet], models: &[ModelSpec], opts: &ExperimentOptions) -> Result<ExperimentReport> {
    if models.is_empty() {
        return Err(Error::Argument("no models to evaluate".into()));
    }
    let data = if opts.balance { balance_downsample(sets, opts.seed)? } else { sets.to_vec() };
    let plan = make_folds(&data, opts.folds, opts.seed)?;
    let folds: Vec<Option<FoldData>> = (0..opts.folds)
        .into_par_iter()
        .map(|f| fold_data(&data, &plan, f))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..models.len())
        .flat_map(|m| (0..opts.folds).map(move |f| (m, f)))
        .filter(|&(_, f)| folds[f].is_some())
        .collect();
    let per_fold: Vec<FoldResult> = jobs
        .par_iter()
        .map(|&(m, f)| run_fold(&models[m], folds[f].as_ref().expect("filtered"), f, opts.seed))
        .collect::<Result<_>>()?;

    let summaries = models
        .iter()
        .map(|spec| {
            let name = spec.name();
            let rows: Vec<&FoldResult> = per_fold.iter().filter(|r| r.model == name).collect();
            ModelSummary::from_folds(&name, &rows)
        })
        .collect();
    Ok(ExperimentReport {
        seed: opts.seed,
        folds: opts.folds,
        balanced: opts.balance,
        n_tasks: data.len(),
        n_instances: data.iter().map(TaskFeatureSet::len).sum(),
        models: models.to_vec(),
        summaries,
        per_fold,
        membership_csv: None,
        config: None,
    })
}

pub fn write_report(path: impl AsRef<Path>, report: &ExperimentReport) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Serialize(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn write_fold_csv<W: Write>(out: W, report: &ExperimentReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let ser = |e: csv::Error| Error::Serialize(e.to_string());
    w.write_record([
        "model", "fold", "n_train", "n_test", "accuracy", "precision", "recall", "f1", "macro_precision",
        "macro_recall", "macro_f1", "tp", "fp", "fn", "tn",
    ])
    .map_err(ser)?;
    for r in &report.per_fold {
        let m = &r.metrics;
        w.write_record([
            r.model.clone(),
            r.fold.to_string(),
            r.n_train.to_string(),
            r.n_test.to_string(),
            m.accuracy.to_string(),
            m.precision.to_string(),
            m.recall.to_string(),
            m.f1.to_string(),
            m.macro_precision.to_string(),
            m.macro_recall.to_string(),
            m.macro_f1.to_string(),
            m.tp.to_string(),
            m.fp.to_string(),
            m.fn_.to_string(),
            m.tn.to_string(),
        ])
        .map_err(ser)?;
    }
    w.flush().map_err(|e| Error::Serialize(e.to_string()))
}
