use std::path::Path;

use ndarray::ArrayView2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree_on, Criterion, DecisionTree, MaxFeatures};
use super::{check_training, check_width, Classifier};
use crate::rng;
use crate::{Error, Result};

pub const FOREST_FORMAT: &str = "pgsc-forest";
pub const FOREST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub max_features: MaxFeatures,
    pub max_depth: usize,
    pub criterion: Criterion,
}

impl Default for ForestConfig {
    /// Centre of the search grid: 100 trees, `sqrt` features, depth 6, Gini.
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_features: MaxFeatures::Sqrt,
            max_depth: 6,
            criterion: Criterion::Gini,
        }
    }
}

/// How each tree's training rows are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Sampling {
    /// `n` draws with replacement.
    #[default]
    Bootstrap,
    /// Every row exactly once, in order.
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub config: ForestConfig,
    pub seed: u64,
    pub trees: Vec<DecisionTree>,
}

/// The `n` row indices a tree trains on under bootstrap sampling.
pub fn bootstrap_rows(n: usize, tree_seed: u64) -> Vec<usize> {
    let mut rng = rng::seeded(tree_seed);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn fit_one(x: ArrayView2<f64>, y: &[u8], cfg: &ForestConfig, sampling: Sampling, seed: u64, i: usize) -> DecisionTree {
    let tree_seed = rng::derive_seed(seed, i as u64);
    let mut rows = match sampling {
        Sampling::Bootstrap => bootstrap_rows(x.nrows(), tree_seed),
        Sampling::Identity => (0..x.nrows()).collect(),
    };
    let split_rng = rng::seeded(rng::derive_seed(tree_seed, 1));
    fit_tree_on(x, y, &mut rows, cfg.criterion, cfg.max_depth, cfg.max_features, split_rng)
}

/// Bagged forest. Tree `i` draws all of its randomness from
/// `derive_seed(seed, i)`, so the result does not depend on how trees are
/// scheduled across threads.
pub fn fit_forest_with(
    x: ArrayView2<f64>,
    y: &[u8],
    cfg: &ForestConfig,
    seed: u64,
    sampling: Sampling,
) -> Result<RandomForest> {
    check_training(x, y)?;
    if cfg.n_estimators == 0 {
        return Err(Error::InvalidConfig("a forest needs at least one tree".into()));
    }
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(cfg.n_estimators);
    let mut trees: Vec<Option<DecisionTree>> = vec![None; cfg.n_estimators];
    let chunk = cfg.n_estimators.div_ceil(workers);
    std::thread::scope(|scope| {
        for (c, slots) in trees.chunks_mut(chunk).enumerate() {
            scope.spawn(move || {
                for (j, slot) in slots.iter_mut().enumerate() {
                    *slot = Some(fit_one(x, y, cfg, sampling, seed, c * chunk + j));
                }
            });
        }
    });
    Ok(RandomForest {
        config: *cfg,
        seed,
        trees: trees.into_iter().map(|t| t.expect("every tree fitted")).collect(),
    })
}

pub fn fit_forest(x: ArrayView2<f64>, y: &[u8], cfg: &ForestConfig, seed: u64) -> Result<RandomForest> {
    fit_forest_with(x, y, cfg, seed, Sampling::Bootstrap)
}

#[derive(Serialize, Deserialize)]
struct ForestDocument {
    format: String,
    version: u32,
    #[serde(flatten)]
    forest: RandomForest,
}

impl RandomForest {
    pub fn features(&self) -> usize {
        self.trees.first().map_or(0, |t| t.features)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ForestDocument {
            format: FOREST_FORMAT.into(),
            version: FOREST_VERSION,
            forest: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ForestDocument = serde_json::from_str(text)?;
        if doc.format != FOREST_FORMAT || doc.version != FOREST_VERSION {
            return Err(Error::Format(format!(
                "expected {FOREST_FORMAT} v{FOREST_VERSION}, found {} v{}",
                doc.format, doc.version
            )));
        }
        if doc.forest.trees.is_empty() {
            return Err(Error::Format("forest without trees".into()));
        }
        let width = doc.forest.features();
        for tree in &doc.forest.trees {
            tree.validate()?;
            if tree.features != width {
                return Err(Error::Format("trees disagree on feature count".into()));
            }
        }
        Ok(doc.forest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl Classifier for RandomForest {
    /// Mean leaf probability of class 1 across trees.
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        check_width(self.features(), x)?;
        let l = self.trees.len() as f64;
        Ok(x
            .rows()
            .into_iter()
            .map(|r| self.trees.iter().map(|t| t.leaf_probability(r)[1]).sum::<f64>() / l)
            .collect())
    }

    /// Majority vote of the trees; an even split defers to the mean probability.
    fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<u8>> {
        check_width(self.features(), x)?;
        let l = self.trees.len();
        Ok(x
            .rows()
            .into_iter()
            .map(|r| {
                let mut votes = 0usize;
                let mut mass = 0.0;
                for t in &self.trees {
                    let p = t.leaf_probability(r)[1];
                    votes += (p > 0.5) as usize;
                    mass += p;
                }
                if 2 * votes > l {
                    1
                } else if 2 * votes < l {
                    0
                } else {
                    (mass / l as f64 > 0.5) as u8
                }
            })
            .collect())
    }
}
