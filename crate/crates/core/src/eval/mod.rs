//! Experiment harness: per-task balancing, stratified per-task folds,
//! metrics, cross-validated model comparison and cluster-recovery scoring.

mod experiment;
mod metrics;

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::features::TaskFeatureSet;
use crate::seed::rng_for;

pub use experiment::{
    run_experiment, write_fold_csv, write_report, ExperimentOptions, ExperimentReport, FoldResult, MetricSummary,
    ModelSpec, ModelSummary,
};
pub use metrics::{compute_metrics, Metrics};

/// Equalizes class counts within every task by keeping a seeded subset of
/// the larger class. Kept rows retain their original order.
pub fn balance_downsample(sets: &[TaskFeatureSet], seed: u64) -> Result<Vec<TaskFeatureSet>> {
    let missing: Vec<String> = sets
        .iter()
        .filter(|s| s.count(Label::Pain) == 0 || s.count(Label::NoPain) == 0)
        .map(|s| s.task_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Balancing(missing));
    }
    Ok(sets
        .iter()
        .map(|s| {
            let pain = s.count(Label::Pain);
            let no_pain = s.count(Label::NoPain);
            let (major, keep) = if pain > no_pain { (Label::Pain, no_pain) } else { (Label::NoPain, pain) };
            let major_idx: Vec<usize> = (0..s.len()).filter(|&i| s.rows[i].label == major).collect();
            let mut keep_major = vec![false; major_idx.len()];
            if pain != no_pain {
                let mut rng = rng_for(seed, &format!("balance/{}", s.task_id));
                for j in sample(&mut rng, major_idx.len(), keep) {
                    keep_major[j] = true;
                }
            } else {
                keep_major.fill(true);
            }
            let mut drop = vec![false; s.len()];
            for (j, &i) in major_idx.iter().enumerate() {
                drop[i] = !keep_major[j];
            }
            TaskFeatureSet {
                task_id: s.task_id.clone(),
                rows: s.rows.iter().zip(&drop).filter(|(_, &d)| !d).map(|(r, _)| r.clone()).collect(),
            }
        })
        .collect())
}

/// Per-task `k`-fold assignment. `test[f]` lists the row indices (within the
/// task) held out in fold `f`; training rows are the complement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskFolds {
    pub task_id: String,
    pub test: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub tasks: Vec<TaskFolds>,
}

impl FoldPlan {
    /// `(train, test)` row indices of `task` in fold `f`.
    pub fn split(&self, task: usize, f: usize, n_rows: usize) -> (Vec<usize>, Vec<usize>) {
        let test = self.tasks[task].test[f].clone();
        let mut held = vec![false; n_rows];
        for &i in &test {
            held[i] = true;
        }
        ((0..n_rows).filter(|&i| !held[i]).collect(), test)
    }
}

/// Stratified per task: pain rows then no-pain rows, each shuffled, dealt
/// round-robin over folds. Each task's fold order is then rotated by a
/// seeded offset so that no fold is dominated by one class across the
/// cohort. Tasks with fewer than `k` rows leave some folds without test rows.
pub fn make_folds(sets: &[TaskFeatureSet], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Argument(format!("need at least 2 folds, got {k}")));
    }
    if sets.iter().all(|s| s.is_empty()) {
        return Err(Error::Argument("no instances to split".into()));
    }
    let tasks = sets
        .iter()
        .map(|s| {
            let y: Vec<f64> = s.rows.iter().map(|r| r.label.as_f64()).collect();
            let mut test = crate::baselines::stratified_folds(&y, k, seed, &format!("folds/{}", s.task_id));
            let offset = rng_for(seed, &format!("folds/offset/{}", s.task_id)).random_range(0..k);
            test.rotate_right(offset);
            TaskFolds { task_id: s.task_id.clone(), test }
        })
        .collect();
    Ok(FoldPlan { k, seed, tasks })
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Argument("partitions have different sizes".into()));
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let c2 = |n: u64| (n * n.saturating_sub(1) / 2) as f64;
    let index: f64 = table.values().map(|&n| c2(n)).sum();
    let sa: f64 = rows.values().map(|&n| c2(n)).sum();
    let sb: f64 = cols.values().map(|&n| c2(n)).sum();
    let total = c2(a.len() as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Hard-assigns each task to its argmax cluster and scores against `truth`.
pub fn cluster_recovery(task_ids: &[String], memberships: &[Vec<f64>], truth: &BTreeMap<String, usize>) -> Result<f64> {
    if task_ids.len() != memberships.len() {
        return Err(Error::Argument("membership rows do not match task ids".into()));
    }
    if task_ids.len() != truth.len() {
        return Err(Error::Argument(format!(
            "{} tasks in model but {} in ground truth",
            task_ids.len(),
            truth.len()
        )));
    }
    let mut pred = Vec::with_capacity(task_ids.len());
    let mut gold = Vec::with_capacity(task_ids.len());
    for (id, row) in task_ids.iter().zip(memberships) {
        let g = truth
            .get(id)
            .ok_or_else(|| Error::Argument(format!("task {id} missing from ground truth")))?;
        pred.push(argmax(row));
        gold.push(*g);
    }
    adjusted_rand_index(&pred, &gold)
}
