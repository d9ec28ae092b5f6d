//! Threshold selection from longitudinal counts and its cross-validated
//! evaluation.
//!
//! Supervised selection minimizes the squared count error against ground
//! truth. Unsupervised selection fits a line per (subject, threshold) and
//! minimizes the summed residuals. Ties go to the smallest threshold.

mod manifest;
mod stats;

pub use manifest::{LongitudinalManifest, SubjectEntry, TimepointEntry};
pub use stats::{linear_fit, linear_fit_at, paired_ttest, LinearFit, TTest};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::{sweep, Grid, Method};
use crate::error::{Error, Result};
use crate::volume_io::load_volume;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Supervised,
    Unsupervised,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Supervised => "supervised",
            Mode::Unsupervised => "unsupervised",
        }
    }
}

/// `entries[i][j][t]`: count for subject `i`, grid index `j`, timepoint `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    pub method: Method,
    pub theta_grid: Vec<f64>,
    pub t_index: Vec<Vec<u32>>,
    pub entries: Vec<Vec<Vec<usize>>>,
}

impl CountTable {
    /// Builds a table from `y[i][j][t]` with timepoints `1..=T` per subject.
    pub fn from_counts(
        method: Method,
        theta_grid: Vec<f64>,
        entries: Vec<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        let mut t_index = Vec::with_capacity(entries.len());
        for (i, rows) in entries.iter().enumerate() {
            if rows.len() != theta_grid.len() {
                return Err(Error::InvalidArgument(format!(
                    "subject {i} has {} grid rows, expected {}",
                    rows.len(),
                    theta_grid.len()
                )));
            }
            let nt = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != nt) {
                return Err(Error::InvalidArgument(format!(
                    "subject {i} has ragged timepoint rows"
                )));
            }
            t_index.push((1..=nt as u32).collect());
        }
        Ok(CountTable {
            method,
            theta_grid,
            t_index,
            entries,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.entries.len()
    }

    fn series(&self, i: usize, j: usize) -> &[usize] {
        &self.entries[i][j]
    }
}

/// Counts every manifest volume along `grid`, on at most `jobs` threads
/// (`None`: rayon's default). Each volume is loaded once and, for the
/// persistence method, its diagram is reused across the grid.
pub fn build_count_table(
    manifest: &LongitudinalManifest,
    grid: &Grid,
    method: Method,
    mask_eps: f32,
    jobs: Option<usize>,
) -> Result<CountTable> {
    let cells: Vec<(usize, usize)> = manifest
        .subjects
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.timepoints.len()).map(move |t| (i, t)))
        .collect();
    let work = || {
        cells
            .par_iter()
            .map(|&(i, t)| {
                let path = &manifest.subjects[i].timepoints[t].volume_path;
                load_volume(path).map(|vol| sweep(&vol, method, grid, mask_eps).counts)
            })
            .collect::<Vec<Result<Vec<usize>>>>()
    };
    let results = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let mut entries: Vec<Vec<Vec<usize>>> = manifest
        .subjects
        .iter()
        .map(|s| vec![vec![0; s.timepoints.len()]; grid.len()])
        .collect();
    for (&(i, t), r) in cells.iter().zip(results) {
        for (j, c) in r?.into_iter().enumerate() {
            entries[i][j][t] = c;
        }
    }
    Ok(CountTable {
        method,
        theta_grid: grid.values().to_vec(),
        t_index: manifest
            .subjects
            .iter()
            .map(|s| s.timepoints.iter().map(|t| t.t_index).collect())
            .collect(),
        entries,
    })
}

/// Objective per grid index and its first minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub theta: f64,
    pub objective: Vec<f64>,
}

fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = j;
        }
    }
    best
}

fn selection(table: &CountTable, objective: Vec<f64>) -> Selection {
    let index = argmin_first(&objective);
    Selection {
        index,
        theta: table.theta_grid[index],
        objective,
    }
}

fn check_gt_shape(table: &CountTable, gt: &[Vec<usize>]) -> Result<()> {
    let ok = gt.len() == table.n_subjects()
        && gt
            .iter()
            .zip(&table.t_index)
            .all(|(g, ts)| g.len() == ts.len());
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "ground truth does not match the count table's shape".into(),
        ))
    }
}

fn supervised_objective(table: &CountTable, gt: &[Vec<usize>], subjects: &[usize]) -> Vec<f64> {
    (0..table.theta_grid.len())
        .map(|j| {
            subjects
                .iter()
                .flat_map(|&i| {
                    table
                        .series(i, j)
                        .iter()
                        .zip(&gt[i])
                        .map(|(&y, &g)| (g as f64 - y as f64).powi(2))
                })
                .sum()
        })
        .collect()
}

fn unsupervised_objective(table: &CountTable, subjects: &[usize]) -> Result<Vec<f64>> {
    (0..table.theta_grid.len())
        .map(|j| {
            subjects.iter().try_fold(0.0, |acc, &i| {
                let ts: Vec<f64> = table.t_index[i].iter().map(|&t| t as f64).collect();
                let ys: Vec<f64> = table.series(i, j).iter().map(|&y| y as f64).collect();
                Ok(acc + linear_fit_at(&ts, &ys)?.sse)
            })
        })
        .collect()
}

fn select_on(
    table: &CountTable,
    mode: Mode,
    gt: Option<&[Vec<usize>]>,
    subjects: &[usize],
) -> Result<Selection> {
    let objective = match mode {
        Mode::Supervised => {
            let gt = gt.ok_or_else(|| {
                Error::InvalidArgument("supervised mode needs ground truth".into())
            })?;
            supervised_objective(table, gt, subjects)
        }
        Mode::Unsupervised => unsupervised_objective(table, subjects)?,
    };
    Ok(selection(table, objective))
}

/// Grid index minimizing the squared error against `gt[i][t]`.
pub fn supervised_select(table: &CountTable, gt: &[Vec<usize>]) -> Result<Selection> {
    check_gt_shape(table, gt)?;
    let all: Vec<usize> = (0..table.n_subjects()).collect();
    select_on(table, Mode::Supervised, Some(gt), &all)
}

/// Grid index minimizing the summed residuals of per-subject line fits.
pub fn unsupervised_select(table: &CountTable) -> Result<Selection> {
    let all: Vec<usize> = (0..table.n_subjects()).collect();
    select_on(table, Mode::Unsupervised, None, &all)
}

/// Subject indices of each fold: shuffled by `seed`, then cut into
/// contiguous runs whose sizes differ by at most one (larger runs first).
pub fn fold_partition(n_subjects: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!(
            "cross-validation needs at least 2 folds, got {folds}"
        )));
    }
    if n_subjects < folds {
        return Err(Error::TooFewSubjects {
            subjects: n_subjects,
            folds,
        });
    }
    let mut order: Vec<usize> = (0..n_subjects).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n_subjects / folds, n_subjects % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for k in 0..folds {
        let len = base + usize::from(k < extra);
        out.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

/// Cross-validated errors of one (method, mode) pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub fold_maes: Vec<f64>,
    /// Selected grid index per fold.
    pub fold_choices: Vec<usize>,
    /// `|gt - y|` per test case, ordered by subject then timepoint.
    pub case_errors: Vec<f64>,
}

impl CrossValidation {
    pub fn mean_mae(&self) -> f64 {
        self.fold_maes.iter().sum::<f64>() / self.fold_maes.len() as f64
    }
}

/// Selects on the training subjects of each fold and scores the held-out
/// fold against ground truth, in both modes.
pub fn cross_validate(
    table: &CountTable,
    gt: &[Vec<usize>],
    mode: Mode,
    folds: usize,
    seed: u64,
) -> Result<CrossValidation> {
    check_gt_shape(table, gt)?;
    let parts = fold_partition(table.n_subjects(), folds, seed)?;
    let mut case_err: Vec<Vec<f64>> = gt.iter().map(|g| vec![0.0; g.len()]).collect();
    let mut fold_maes = Vec::with_capacity(folds);
    let mut fold_choices = Vec::with_capacity(folds);
    for (k, test) in parts.iter().enumerate() {
        let train: Vec<usize> = parts
            .iter()
            .enumerate()
            .filter(|&(q, _)| q != k)
            .flat_map(|(_, p)| p.iter().copied())
            .collect();
        let sel = select_on(table, mode, Some(gt), &train)?;
        let (mut sum, mut n) = (0.0, 0usize);
        for &i in test {
            for (t, (&y, &g)) in table.series(i, sel.index).iter().zip(&gt[i]).enumerate() {
                let e = (g as f64 - y as f64).abs();
                case_err[i][t] = e;
                sum += e;
                n += 1;
            }
        }
        fold_maes.push(sum / n as f64);
        fold_choices.push(sel.index);
    }
    Ok(CrossValidation {
        fold_maes,
        fold_choices,
        case_errors: case_err.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectivePoint {
    pub theta: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineComparison {
    #[serde(flatten)]
    pub test: TTest,
    pub baseline: &'static str,
}

/// Selection over all subjects plus, when ground truth exists,
/// cross-validated MAE.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub mode: Mode,
    pub method: Method,
    pub theta_star: f64,
    pub objective_by_theta: Vec<ObjectivePoint>,
    pub fold_maes: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ttest: Option<BaselineComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Box<CalibrationReport>>,
}

/// Report and per-case test errors (empty without ground truth).
pub fn calibrate(
    table: &CountTable,
    gt: Option<&[Vec<usize>]>,
    mode: Mode,
    folds: usize,
    seed: u64,
) -> Result<(CalibrationReport, Vec<f64>)> {
    if let Some(g) = gt {
        check_gt_shape(table, g)?;
    }
    let all: Vec<usize> = (0..table.n_subjects()).collect();
    let sel = select_on(table, mode, gt, &all)?;
    let cv = match gt {
        Some(g) => Some(cross_validate(table, g, mode, folds, seed)?),
        None => None,
    };
    let report = CalibrationReport {
        mode,
        method: table.method,
        theta_star: sel.theta,
        objective_by_theta: table
            .theta_grid
            .iter()
            .zip(&sel.objective)
            .map(|(&theta, &objective)| ObjectivePoint { theta, objective })
            .collect(),
        fold_maes: cv.as_ref().map(|c| c.fold_maes.clone()).unwrap_or_default(),
        mean_mae: cv.as_ref().map(CrossValidation::mean_mae),
        ttest: None,
        baseline: None,
    };
    Ok((report, cv.map(|c| c.case_errors).unwrap_or_default()))
}

/// Attaches the baseline report and a paired t-test of the per-case errors
/// (primary minus baseline).
pub fn compare_with_baseline(
    mut primary: CalibrationReport,
    primary_errors: &[f64],
    baseline: CalibrationReport,
    baseline_errors: &[f64],
) -> Result<CalibrationReport> {
    if !primary_errors.is_empty() {
        let tt = paired_ttest(primary_errors, baseline_errors)?;
        primary.ttest = Some(BaselineComparison {
            test: tt,
            baseline: Method::DirectThreshold.as_str(),
        });
    }
    primary.baseline = Some(Box::new(baseline));
    Ok(primary)
}
