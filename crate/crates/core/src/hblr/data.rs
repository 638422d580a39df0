use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::features::TaskFeatureSet;

/// Stacked design matrix of all tasks, rows grouped by task.
#[derive(Clone, Debug)]
pub struct HblrData {
    pub task_ids: Vec<String>,
    /// One design row per instance; with an intercept the last column is 1.
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub ranges: Vec<Range<usize>>,
    task_of_row: Vec<usize>,
}

impl HblrData {
    pub fn from_task_sets(sets: &[TaskFeatureSet], intercept: bool) -> Result<Self> {
        let tasks = sets
            .iter()
            .map(|s| {
                let rows = s
                    .rows
                    .iter()
                    .map(|r| design_row(&r.values, intercept))
                    .collect();
                let y = s.rows.iter().map(|r| r.label.as_f64()).collect();
                (s.task_id.clone(), rows, y)
            })
            .collect();
        Self::from_design(tasks)
    }

    /// Builds from explicit design rows: `(task_id, rows, labels in {0, 1})`.
    pub fn from_design(tasks: Vec<(String, Vec<Vec<f64>>, Vec<f64>)>) -> Result<Self> {
        let dim = tasks
            .iter()
            .flat_map(|(_, rows, _)| rows.first())
            .map(Vec::len)
            .next()
            .unwrap_or(0);
        let mut task_ids = Vec::with_capacity(tasks.len());
        let mut ranges = Vec::with_capacity(tasks.len());
        let mut task_of_row = Vec::new();
        let mut flat = Vec::new();
        let mut y = Vec::new();
        for (m, (id, rows, labels)) in tasks.into_iter().enumerate() {
            if rows.is_empty() {
                return Err(Error::Data(format!("task `{id}` has no instances")));
            }
            if rows.len() != labels.len() {
                return Err(Error::Data(format!("task `{id}`: {} rows but {} labels", rows.len(), labels.len())));
            }
            if let Some(r) = rows.iter().find(|r| r.len() != dim) {
                return Err(Error::Data(format!(
                    "task `{id}` has dimension {}, expected {dim}",
                    r.len()
                )));
            }
            if let Some(l) = labels.iter().find(|&&l| l != 0.0 && l != 1.0) {
                return Err(Error::Data(format!("task `{id}` has label {l}, expected 0 or 1")));
            }
            if task_ids.contains(&id) {
                return Err(Error::Data(format!("duplicate task `{id}`")));
            }
            let start = y.len();
            for (r, l) in rows.into_iter().zip(labels) {
                flat.extend(r);
                y.push(l);
                task_of_row.push(m);
            }
            ranges.push(start..y.len());
            task_ids.push(id);
        }
        let x = DMatrix::from_row_slice(y.len(), dim, &flat);
        Ok(Self {
            task_ids,
            x,
            y,
            ranges,
            task_of_row,
        })
    }

    pub fn n_tasks(&self) -> usize {
        self.task_ids.len()
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn task_of(&self, row: usize) -> usize {
        self.task_of_row[row]
    }
}

pub fn design_row(values: &[f64], intercept: bool) -> Vec<f64> {
    let mut row = values.to_vec();
    if intercept {
        row.push(1.0);
    }
    row
}
