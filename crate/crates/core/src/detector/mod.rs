//! Classifiers that separate real (`y = 0`) from generated (`y = 1`) messages:
//! a bagged random forest plus KNN, logistic regression and linear SVM
//! baselines, with precision/recall/F1/accuracy taking `y = 1` as positive.

mod baselines;
mod forest;
mod search;
mod tree;

pub use baselines::{fit_linear_svm, fit_logistic, Knn, LinearKind, LinearModel, Standardizer, KNN_K, SVM_LAMBDA};
pub use forest::{
    bootstrap_rows, fit_forest, fit_forest_with, ForestConfig, RandomForest, Sampling, FOREST_FORMAT, FOREST_VERSION,
};
pub use search::{grid_search, stratified_folds, CvRow, GridSearch, ParamGrid};
pub use tree::{fit_tree, Criterion, DecisionTree, MaxFeatures, Node};

use std::io::Write;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::fmt::g9;
use crate::message::Dataset;
use crate::{Error, Result};

pub trait Classifier {
    /// Probability of `y = 1` per row.
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Vec<f64>>;

    fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<u8>> {
        Ok(self.predict_proba(x)?.into_iter().map(|p| (p > 0.5) as u8).collect())
    }
}

pub(crate) fn check_width(expected: usize, x: ArrayView2<f64>) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::ShapeMismatch(format!(
            "model expects {expected} features, input has {}",
            x.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn check_training(x: ArrayView2<f64>, y: &[u8]) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::Empty("training set".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    if let Some(bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidConfig(format!("label {bad} is not binary")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("features must be finite".into()));
    }
    Ok(())
}

/// Features and labels of a labelled dataset.
pub fn labelled(ds: &Dataset) -> Result<(ArrayView2<'_, f64>, &[u8])> {
    let labels = ds
        .labels()
        .ok_or_else(|| Error::InvalidConfig("dataset has no labels".into()))?;
    Ok((ds.features().view(), labels))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(predicted: &[u8], actual: &[u8]) -> Result<Self> {
        if predicted.len() != actual.len() {
            return Err(Error::ShapeMismatch("prediction and label counts differ".into()));
        }
        let mut c = Confusion::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p == 1, a == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl Metrics {
    /// Undefined ratios (no predicted or no actual positives) are reported as 0.
    pub fn from_confusion(c: Confusion) -> Result<Self> {
        if c.total() == 0 {
            return Err(Error::Empty("test set".into()));
        }
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Ok(Self {
            precision,
            recall,
            f1,
            accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
        })
    }

    pub const CSV_HEADER: &'static str = "model,precision,recall,f1,accuracy";

    pub fn csv_row(&self, model: &str) -> String {
        format!(
            "{model},{},{},{},{}",
            g9(self.precision),
            g9(self.recall),
            g9(self.f1),
            g9(self.accuracy)
        )
    }
}

pub fn write_metrics_csv<W: Write>(rows: &[(String, Metrics)], mut out: W) -> Result<()> {
    writeln!(out, "{}", Metrics::CSV_HEADER)?;
    for (name, m) in rows {
        writeln!(out, "{}", m.csv_row(name))?;
    }
    Ok(())
}

pub fn evaluate_arrays(model: &dyn Classifier, x: ArrayView2<f64>, y: &[u8]) -> Result<Metrics> {
    if x.nrows() == 0 {
        return Err(Error::Empty("test set".into()));
    }
    Metrics::from_confusion(Confusion::from_predictions(&model.predict(x)?, y)?)
}

/// Table-style metrics on a labelled test set.
pub fn evaluate(model: &dyn Classifier, test: &Dataset) -> Result<Metrics> {
    let (x, y) = labelled(test)?;
    evaluate_arrays(model, x, y)
}

/// KNN, logistic regression and linear SVM fitted on the same data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub knn: Knn,
    pub logistic: LinearModel,
    pub linear_svm: LinearModel,
}

/// All three baselines are deterministic functions of the data; `seed` is
/// accepted for interface symmetry with the forest.
pub fn fit_baselines(x: ArrayView2<f64>, y: &[u8], _seed: u64) -> Result<Baselines> {
    Ok(Baselines {
        knn: Knn::fit(x, y, KNN_K)?,
        logistic: fit_logistic(x, y)?,
        linear_svm: fit_linear_svm(x, y)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    struct Constant(u8);

    impl Classifier for Constant {
        fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
            Ok(vec![self.0 as f64; x.nrows()])
        }
    }

    #[test]
    fn closed_form_metrics() {
        let x = ndarray::Array2::<f64>::zeros((4, 1));
        let y = [0, 1, 0, 1];
        let pos = evaluate_arrays(&Constant(1), x.view(), &y).unwrap();
        assert_eq!((pos.precision, pos.recall, pos.accuracy), (0.5, 1.0, 0.5));
        assert!((pos.f1 - 2.0 / 3.0).abs() < 1e-15);
        let neg = evaluate_arrays(&Constant(0), x.view(), &y).unwrap();
        assert_eq!((neg.precision, neg.recall, neg.f1, neg.accuracy), (0.0, 0.0, 0.0, 0.5));
        let perfect = Metrics::from_confusion(Confusion { tp: 3, tn: 2, ..Default::default() }).unwrap();
        assert_eq!((perfect.precision, perfect.recall, perfect.f1, perfect.accuracy), (1.0, 1.0, 1.0, 1.0));
        assert!(Metrics::from_confusion(Confusion::default()).is_err());
    }

    #[test]
    fn metrics_csv() {
        let m = Metrics { precision: 1.0, recall: 0.5, f1: 2.0 / 3.0, accuracy: 0.75 };
        let mut buf = Vec::new();
        write_metrics_csv(&[("random_forest".into(), m)], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "model,precision,recall,f1,accuracy\nrandom_forest,1,0.5,0.666666667,0.75\n"
        );
    }

    #[test]
    fn width_and_label_checks() {
        let x = ndarray::Array2::<f64>::zeros((2, 2));
        assert!(check_training(x.view(), &[0, 2]).is_err());
        assert!(check_training(x.view(), &[0]).is_err());
        let tree = fit_tree(x.view(), &[0, 1], Criterion::Gini, 2, MaxFeatures::All, 0).unwrap();
        assert!(tree.predict(ndarray::Array2::<f64>::zeros((1, 3)).view()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn metric_identities(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..200)) {
            let (p, a): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
            let c = Confusion::from_predictions(&p, &a).unwrap();
            let m = Metrics::from_confusion(c).unwrap();
            let correct = p.iter().zip(&a).filter(|(x, y)| x == y).count();
            prop_assert_eq!(m.accuracy, correct as f64 / p.len() as f64);
            if m.precision + m.recall > 0.0 {
                prop_assert_eq!(m.f1, 2.0 * m.precision * m.recall / (m.precision + m.recall));
            } else {
                prop_assert_eq!(m.f1, 0.0);
            }
            for v in [m.precision, m.recall, m.f1, m.accuracy] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
