use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{check_training, Classifier};
use crate::rng::{self, Rng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    #[default]
    Gini,
    /// Shannon entropy in bits.
    Entropy,
}

impl Criterion {
    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
        }
    }

    /// Impurity of a node holding `counts[c]` samples of class `c`.
    pub fn impurity(self, counts: [usize; 2]) -> f64 {
        let n = (counts[0] + counts[1]) as f64;
        if n == 0.0 {
            return 0.0;
        }
        let p = [counts[0] as f64 / n, counts[1] as f64 / n];
        match self {
            Criterion::Gini => 1.0 - p[0] * p[0] - p[1] * p[1],
            Criterion::Entropy => -p.iter().filter(|&&q| q > 0.0).map(|q| q * q.log2()).sum::<f64>(),
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            other => Err(Error::InvalidConfig(format!("unknown split criterion '{other}'"))),
        }
    }
}

/// Number of candidate features examined at each split.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    #[default]
    All,
    Sqrt,
    Log2,
}

impl MaxFeatures {
    pub fn as_str(self) -> &'static str {
        match self {
            MaxFeatures::All => "all",
            MaxFeatures::Sqrt => "sqrt",
            MaxFeatures::Log2 => "log2",
        }
    }

    pub fn count(self, features: usize) -> usize {
        let d = features as f64;
        let k = match self {
            MaxFeatures::All => features,
            MaxFeatures::Sqrt => d.sqrt().floor() as usize,
            MaxFeatures::Log2 => d.log2().floor() as usize,
        };
        k.clamp(1, features.max(1))
    }
}

impl std::str::FromStr for MaxFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(MaxFeatures::All),
            "sqrt" => Ok(MaxFeatures::Sqrt),
            "log2" => Ok(MaxFeatures::Log2),
            other => Err(Error::InvalidConfig(format!("unknown max_features '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Class probabilities `[P(y = 0), P(y = 1)]`.
    Leaf { probability: [f64; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub max_depth: usize,
    pub criterion: Criterion,
    pub features: usize,
}

impl DecisionTree {
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_probability(&self, row: ArrayView1<f64>) -> [f64; 2] {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { probability } => return probability,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Format("tree without nodes".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= self.features
                        || !threshold.is_finite()
                        || left <= i
                        || right <= i
                        || left >= self.nodes.len()
                        || right >= self.nodes.len()
                    {
                        return Err(Error::Format(format!("malformed split node {i}")));
                    }
                }
                Node::Leaf { probability } => {
                    if probability.iter().any(|p| !(0.0..=1.0).contains(p))
                        || (probability[0] + probability[1] - 1.0).abs() > 1e-9
                    {
                        return Err(Error::Format(format!("leaf {i} probabilities do not sum to 1")));
                    }
                }
            }
        }
        Ok(())
    }
}

impl Classifier for DecisionTree {
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        super::check_width(self.features, x)?;
        Ok(x.rows().into_iter().map(|r| self.leaf_probability(r)[1]).collect())
    }
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [u8],
    criterion: Criterion,
    max_depth: usize,
    subset: usize,
    rng: Rng,
    nodes: Vec<Node>,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn counts(&self, rows: &[usize]) -> [usize; 2] {
        let ones = rows.iter().filter(|&&r| self.y[r] == 1).count();
        [rows.len() - ones, ones]
    }

    fn leaf(counts: [usize; 2]) -> Node {
        let n = (counts[0] + counts[1]) as f64;
        let p1 = counts[1] as f64 / n;
        Node::Leaf {
            probability: [1.0 - p1, p1],
        }
    }

    fn best_split(&mut self, rows: &[usize], counts: [usize; 2]) -> Option<Candidate> {
        let d = self.x.ncols();
        let mut features: Vec<usize> = if self.subset < d {
            index::sample(&mut self.rng, d, self.subset).into_vec()
        } else {
            (0..d).collect()
        };
        features.sort_unstable();

        let n = rows.len() as f64;
        let parent = self.criterion.impurity(counts);
        let mut best: Option<Candidate> = None;
        let mut column: Vec<(f64, u8)> = Vec::with_capacity(rows.len());
        for f in features {
            column.clear();
            column.extend(rows.iter().map(|&r| (self.x[[r, f]], self.y[r])));
            column.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = [0usize; 2];
            for i in 0..column.len() - 1 {
                left[column[i].1 as usize] += 1;
                let (lo, hi) = (column[i].0, column[i + 1].0);
                if lo == hi {
                    continue;
                }
                let right = [counts[0] - left[0], counts[1] - left[1]];
                let nl = (i + 1) as f64;
                let child = (nl * self.criterion.impurity(left) + (n - nl) * self.criterion.impurity(right)) / n;
                let gain = parent - child;
                let better = match &best {
                    None => true,
                    Some(b) => gain > b.gain + 1e-12,
                };
                if better {
                    let mid = lo + (hi - lo) / 2.0;
                    best = Some(Candidate {
                        gain,
                        feature: f,
                        threshold: if mid < hi { mid } else { lo },
                    });
                }
            }
        }
        best.filter(|b| b.gain > -1e-12)
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let slot = self.nodes.len();
        let counts = self.counts(rows);
        self.nodes.push(Self::leaf(counts));
        if depth >= self.max_depth || counts[0] == 0 || counts[1] == 0 {
            return slot;
        }
        let Some(split) = self.best_split(rows, counts) else {
            return slot;
        };
        let mut cut = 0;
        for i in 0..rows.len() {
            if self.x[[rows[i], split.feature]] <= split.threshold {
                rows.swap(i, cut);
                cut += 1;
            }
        }
        let (l, r) = rows.split_at_mut(cut);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        slot
    }
}

/// Greedy CART tree on the rows listed in `rows` (repeats allowed).
pub(crate) fn fit_tree_on(
    x: ArrayView2<f64>,
    y: &[u8],
    rows: &mut [usize],
    criterion: Criterion,
    max_depth: usize,
    max_features: MaxFeatures,
    rng: Rng,
) -> DecisionTree {
    let mut builder = Builder {
        x,
        y,
        criterion,
        max_depth,
        subset: max_features.count(x.ncols()),
        rng,
        nodes: Vec::new(),
    };
    builder.grow(rows, 0);
    DecisionTree {
        nodes: builder.nodes,
        max_depth,
        criterion,
        features: x.ncols(),
    }
}

/// Fits one tree on every training row.
///
/// Splits maximize impurity decrease over midpoints between sorted distinct
/// feature values, preferring the lowest feature and then the lowest
/// threshold on ties. Zero-gain splits are taken while the node is impure and
/// depth remains. A single-class input yields a single leaf.
pub fn fit_tree(
    x: ArrayView2<f64>,
    y: &[u8],
    criterion: Criterion,
    max_depth: usize,
    max_features: MaxFeatures,
    seed: u64,
) -> Result<DecisionTree> {
    check_training(x, y)?;
    let mut rows: Vec<usize> = (0..x.nrows()).collect();
    Ok(fit_tree_on(x, y, &mut rows, criterion, max_depth, max_features, rng::seeded(seed)))
}
