use std::io::Write;

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::forest::{fit_forest, ForestConfig};
use super::tree::{Criterion, MaxFeatures};
use super::{check_training, evaluate_arrays};
use crate::fmt::g9;
use crate::rng;
use crate::{Error, Result};

/// Candidate values for each forest hyperparameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub n_estimators: Vec<usize>,
    pub max_features: Vec<MaxFeatures>,
    pub max_depth: Vec<usize>,
    pub criterion: Vec<Criterion>,
}

impl ParamGrid {
    /// 3 · 3 · 6 · 2 = 108 cells.
    pub fn full() -> Self {
        Self {
            n_estimators: vec![50, 100, 200],
            max_features: vec![MaxFeatures::All, MaxFeatures::Sqrt, MaxFeatures::Log2],
            max_depth: vec![2, 4, 5, 6, 7, 8],
            criterion: vec![Criterion::Gini, Criterion::Entropy],
        }
    }

    pub fn single(cfg: ForestConfig) -> Self {
        Self {
            n_estimators: vec![cfg.n_estimators],
            max_features: vec![cfg.max_features],
            max_depth: vec![cfg.max_depth],
            criterion: vec![cfg.criterion],
        }
    }

    pub fn cells(&self) -> Vec<ForestConfig> {
        let mut out = Vec::new();
        for &n_estimators in &self.n_estimators {
            for &max_features in &self.max_features {
                for &max_depth in &self.max_depth {
                    for &criterion in &self.criterion {
                        out.push(ForestConfig {
                            n_estimators,
                            max_features,
                            max_depth,
                            criterion,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Assigns every row to one of `k` folds, class by class, after a seeded shuffle.
pub fn stratified_folds(y: &[u8], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng::seeded(seed);
    let mut fold = vec![0; y.len()];
    let mut next = 0;
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub config: ForestConfig,
    pub fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSearch {
    pub best: ForestConfig,
    pub table: Vec<CvRow>,
}

impl GridSearch {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n_estimators,max_features,max_depth,criterion,mean_accuracy")?;
        for r in &self.table {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.config.n_estimators,
                r.config.max_features.as_str(),
                r.config.max_depth,
                r.config.criterion.as_str(),
                g9(r.mean_accuracy)
            )?;
        }
        Ok(())
    }
}

/// Stratified k-fold cross-validated accuracy for every grid cell.
///
/// The winner has the highest mean accuracy; ties go to fewer estimators,
/// then smaller depth, then table order.
pub fn grid_search(x: ArrayView2<f64>, y: &[u8], grid: &ParamGrid, k_folds: usize, seed: u64) -> Result<GridSearch> {
    check_training(x, y)?;
    if k_folds < 2 {
        return Err(Error::InvalidConfig("cross-validation needs at least 2 folds".into()));
    }
    if x.nrows() < 2 * k_folds {
        return Err(Error::TooSmall(format!(
            "{} rows for {k_folds}-fold cross-validation (need {})",
            x.nrows(),
            2 * k_folds
        )));
    }
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(Error::InvalidConfig("empty parameter grid".into()));
    }
    let fold = stratified_folds(y, k_folds, seed);
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..k_folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| fold[i] == f);
            (train, test)
        })
        .collect();

    let mut table = Vec::with_capacity(cells.len());
    for (c, cfg) in cells.iter().enumerate() {
        let mut fold_accuracy = Vec::with_capacity(k_folds);
        for (f, (train, test)) in splits.iter().enumerate() {
            let xtr = x.select(Axis(0), train);
            let ytr: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            let xte = x.select(Axis(0), test);
            let yte: Vec<u8> = test.iter().map(|&i| y[i]).collect();
            let forest_seed = rng::derive_seed(rng::derive_seed(seed, c as u64), f as u64);
            let forest = fit_forest(xtr.view(), &ytr, cfg, forest_seed)?;
            fold_accuracy.push(evaluate_arrays(&forest, xte.view(), &yte)?.accuracy);
        }
        let mean_accuracy = fold_accuracy.iter().sum::<f64>() / k_folds as f64;
        table.push(CvRow {
            config: *cfg,
            fold_accuracy,
            mean_accuracy,
        });
    }
    let best = table
        .iter()
        .reduce(|best, row| {
            let better = row.mean_accuracy > best.mean_accuracy
                || (row.mean_accuracy == best.mean_accuracy
                    && (row.config.n_estimators, row.config.max_depth)
                        < (best.config.n_estimators, best.config.max_depth));
            if better {
                row
            } else {
                best
            }
        })
        .expect("nonempty table")
        .config;
    Ok(GridSearch { best, table })
}
