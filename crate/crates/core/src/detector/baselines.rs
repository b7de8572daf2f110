use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{check_training, check_width, Classifier};
use crate::nn::{bce_loss, sigmoid, Activation, AdamState, DenseLayer, Mlp};
use crate::Result;

pub const KNN_K: usize = 5;
pub const SVM_LAMBDA: f64 = 1e-3;
const LOGISTIC_LR: f64 = 0.05;
const LOGISTIC_ITERATIONS: usize = 1000;
const SVM_STEP: f64 = 0.5;
const SVM_ITERATIONS: usize = 2000;

/// Per-feature centring and scaling fitted on training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Population statistics; constant features keep scale 1.
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let n = x.nrows() as f64;
        let mean: Vec<f64> = x.mean_axis(Axis(0)).map(|m| m.to_vec()).unwrap_or_default();
        let scale = x
            .columns()
            .into_iter()
            .zip(&mean)
            .map(|(c, m)| {
                let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for (f, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[f]) / self.scale[f];
            }
        }
        out
    }
}

/// k-nearest neighbours on standardized features with Euclidean distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    standardizer: Standardizer,
    points: Array2<f64>,
    labels: Vec<u8>,
}

impl Knn {
    pub fn fit(x: ArrayView2<f64>, y: &[u8], k: usize) -> Result<Self> {
        check_training(x, y)?;
        if k == 0 {
            return Err(crate::Error::InvalidConfig("k must be positive".into()));
        }
        let standardizer = Standardizer::fit(x);
        Ok(Self {
            k: k.min(x.nrows()),
            points: standardizer.transform(x),
            standardizer,
            labels: y.to_vec(),
        })
    }

    /// Checks a deserialized model for internal consistency.
    pub fn validate(&self) -> Result<()> {
        let (rows, cols) = self.points.dim();
        if rows == 0 || rows != self.labels.len() || self.k == 0 || self.k > rows {
            return Err(crate::Error::Format("knn points, labels and k disagree".into()));
        }
        if self.standardizer.mean.len() != cols || self.standardizer.scale.len() != cols {
            return Err(crate::Error::Format("knn standardizer width differs from its points".into()));
        }
        if self.labels.iter().any(|&y| y > 1) || self.points.iter().any(|v| !v.is_finite()) {
            return Err(crate::Error::Format("knn holds invalid training data".into()));
        }
        Ok(())
    }

    pub fn features(&self) -> usize {
        self.points.ncols()
    }

    /// Training indices of the `k` nearest points; equal distances go to the lower index.
    pub fn neighbours(&self, query: ArrayView1<f64>) -> Vec<usize> {
        let q = self
            .standardizer
            .transform(query.view().insert_axis(Axis(0)))
            .row(0)
            .to_owned();
        let mut d: Vec<(f64, usize)> = self
            .points
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.truncate(self.k);
        d.into_iter().map(|(_, i)| i).collect()
    }
}

impl Classifier for Knn {
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        check_width(self.points.ncols(), x)?;
        Ok(x
            .rows()
            .into_iter()
            .map(|r| {
                let nb = self.neighbours(r);
                nb.iter().filter(|&&i| self.labels[i] == 1).count() as f64 / nb.len() as f64
            })
            .collect())
    }

    /// Majority of the neighbours; an even split goes to the nearest one.
    fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<u8>> {
        check_width(self.points.ncols(), x)?;
        Ok(x
            .rows()
            .into_iter()
            .map(|r| {
                let nb = self.neighbours(r);
                let ones = nb.iter().filter(|&&i| self.labels[i] == 1).count();
                match (2 * ones).cmp(&nb.len()) {
                    std::cmp::Ordering::Greater => 1,
                    std::cmp::Ordering::Less => 0,
                    std::cmp::Ordering::Equal => self.labels[nb[0]],
                }
            })
            .collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    Logistic,
    Svm,
}

/// `y = 1` exactly when `ω_0 + ω·x ≥ 0`, with weights in raw feature units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    /// `[ω_0, ω_1, …, ω_N]`.
    pub weights: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(kind: LinearKind, features: usize) -> Self {
        Self {
            kind,
            weights: vec![0.0; features + 1],
        }
    }

    pub fn margin(&self, row: ArrayView1<f64>) -> f64 {
        self.weights[0] + row.iter().zip(&self.weights[1..]).map(|(x, w)| x * w).sum::<f64>()
    }

    /// Maps weights learned on standardized inputs back to raw units.
    fn from_standardized(kind: LinearKind, bias: f64, w: &[f64], s: &Standardizer) -> Self {
        let mut weights = Vec::with_capacity(w.len() + 1);
        let raw: Vec<f64> = w.iter().zip(&s.scale).map(|(w, sc)| w / sc).collect();
        weights.push(bias - raw.iter().zip(&s.mean).map(|(w, m)| w * m).sum::<f64>());
        weights.extend(raw);
        Self { kind, weights }
    }
}

impl Classifier for LinearModel {
    /// Logistic probability for either kind (`σ(margin)`).
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        check_width(self.weights.len() - 1, x)?;
        Ok(x.rows().into_iter().map(|r| sigmoid(self.margin(r))).collect())
    }

    fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<u8>> {
        check_width(self.weights.len() - 1, x)?;
        Ok(x.rows().into_iter().map(|r| (self.margin(r) >= 0.0) as u8).collect())
    }
}

/// Logistic regression: a single sigmoid unit trained by full-batch Adam on
/// binary cross-entropy over standardized features.
pub fn fit_logistic(x: ArrayView2<f64>, y: &[u8]) -> Result<LinearModel> {
    check_training(x, y)?;
    let s = Standardizer::fit(x);
    let xs = s.transform(x);
    let d = x.ncols();
    let layer = DenseLayer::from_parts(Array2::zeros((1, d)), Array1::zeros(1), Activation::Sigmoid)?;
    let mut net = Mlp::from_layers(vec![layer])?;
    let mut opt = AdamState::new(LOGISTIC_LR);
    let targets: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    for _ in 0..LOGISTIC_ITERATIONS {
        let cache = net.forward(xs.view())?;
        let preds: Vec<f64> = cache.output().iter().copied().collect();
        let loss = bce_loss(&preds, &targets)?;
        let grad = Array2::from_shape_vec((preds.len(), 1), loss.gradient)
            .map_err(|e| crate::Error::ShapeMismatch(e.to_string()))?;
        let grads = net.backward(&cache, grad.view())?;
        net.apply_adam(&grads, &mut opt)?;
    }
    let layer = &net.layers()[0];
    let w: Vec<f64> = layer.weights().row(0).to_vec();
    Ok(LinearModel::from_standardized(LinearKind::Logistic, layer.biases()[0], &w, &s))
}

/// Linear SVM: full-batch subgradient descent on
/// `λ/2·‖w‖² + mean(max(0, 1 − y·(w·x + b)))` with `y ∈ {−1, +1}` and step
/// `η_0/√t`. The bias is not regularized.
pub fn fit_linear_svm(x: ArrayView2<f64>, y: &[u8]) -> Result<LinearModel> {
    check_training(x, y)?;
    let s = Standardizer::fit(x);
    let xs = s.transform(x);
    let (n, d) = xs.dim();
    let signs: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for t in 1..=SVM_ITERATIONS {
        let mut gw: Vec<f64> = w.iter().map(|wi| SVM_LAMBDA * wi).collect();
        let mut gb = 0.0;
        for (row, &yi) in xs.rows().into_iter().zip(&signs) {
            let m = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            if yi * m < 1.0 {
                for (g, v) in gw.iter_mut().zip(row.iter()) {
                    *g -= yi * v / n as f64;
                }
                gb -= yi / n as f64;
            }
        }
        let step = SVM_STEP / (t as f64).sqrt();
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= step * g;
        }
        b -= step * gb;
    }
    Ok(LinearModel::from_standardized(LinearKind::Svm, b, &w, &s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::evaluate_arrays;
    use ndarray::array;

    fn xor() -> (Array2<f64>, Vec<u8>) {
        (array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]], vec![0, 1, 1, 0])
    }

    fn separable() -> (Array2<f64>, Vec<u8>) {
        let mut rng = crate::rng::seeded(8);
        let mut x = Array2::zeros((120, 2));
        let mut y = Vec::new();
        for i in 0..120 {
            let label = (i % 2) as u8;
            x[[i, 0]] = rand::Rng::random::<f64>(&mut rng) + 3.0 * label as f64;
            x[[i, 1]] = 100.0 * rand::Rng::random::<f64>(&mut rng) - 500.0 * label as f64;
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn knn_one_returns_own_label() {
        let (x, y) = separable();
        let knn = Knn::fit(x.view(), &y, 1).unwrap();
        assert_eq!(knn.predict(x.view()).unwrap(), y);
    }

    #[test]
    fn knn_distance_ties_use_lower_index() {
        let x = array![[1.0], [-1.0], [1.0], [-1.0]];
        let knn = Knn::fit(x.view(), &[0, 1, 1, 0], 2).unwrap();
        assert_eq!(knn.neighbours(array![0.0].view()), vec![0, 1]);
    }

    #[test]
    fn zero_weight_logistic_is_undecided() {
        let m = LinearModel::zeros(LinearKind::Logistic, 3);
        assert_eq!(m.predict_proba(array![[1.0, 2.0, 3.0]].view()).unwrap(), vec![0.5]);
    }

    #[test]
    fn all_baselines_solve_separable_data() {
        let (x, y) = separable();
        let knn = Knn::fit(x.view(), &y, KNN_K).unwrap();
        let lr = fit_logistic(x.view(), &y).unwrap();
        let svm = fit_linear_svm(x.view(), &y).unwrap();
        for model in [&knn as &dyn Classifier, &lr, &svm] {
            assert_eq!(evaluate_arrays(model, x.view(), &y).unwrap().accuracy, 1.0);
        }
        assert_eq!(lr.weights.len(), 3);
    }

    #[test]
    fn linear_models_cannot_solve_xor() {
        let (x, y) = xor();
        for model in [fit_logistic(x.view(), &y).unwrap(), fit_linear_svm(x.view(), &y).unwrap()] {
            assert!(evaluate_arrays(&model, x.view(), &y).unwrap().accuracy <= 0.75);
        }
    }

    #[test]
    fn standardized_and_raw_margins_agree() {
        let (x, y) = separable();
        let svm = fit_linear_svm(x.view(), &y).unwrap();
        let s = Standardizer::fit(x.view());
        let xs = s.transform(x.view());
        // Refit in standardized space must classify identically to the folded model.
        let svm_std = fit_linear_svm(xs.view(), &y).unwrap();
        assert_eq!(svm.predict(x.view()).unwrap(), svm_std.predict(xs.view()).unwrap());
    }
}
