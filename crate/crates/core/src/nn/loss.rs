use crate::{Error, Result};

/// Predictions are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before any logarithm.
pub const PROB_CLAMP: f64 = 1e-7;

/// Scalar loss plus its gradient with respect to each prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct Loss {
    pub value: f64,
    pub gradient: Vec<f64>,
}

fn clamp(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Mean binary cross-entropy `-[y ln p + (1 - y) ln(1 - p)]` over the batch.
pub fn bce_loss(predictions: &[f64], targets: &[f64]) -> Result<Loss> {
    if predictions.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Empty("binary cross-entropy over an empty batch".into()));
    }
    let n = predictions.len() as f64;
    let mut value = 0.0;
    let gradient = predictions
        .iter()
        .zip(targets)
        .map(|(&p, &y)| {
            let p = clamp(p);
            value -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
            (-y / p + (1.0 - y) / (1.0 - p)) / n
        })
        .collect();
    Ok(Loss {
        value: value / n,
        gradient,
    })
}

/// Mean of `ln(1 - p)`: the generator term of the minimax objective, minimized directly.
pub fn mean_log_complement(predictions: &[f64]) -> Result<Loss> {
    if predictions.is_empty() {
        return Err(Error::Empty("generator loss over an empty batch".into()));
    }
    let n = predictions.len() as f64;
    let mut value = 0.0;
    let gradient = predictions
        .iter()
        .map(|&p| {
            let p = clamp(p);
            value += (1.0 - p).ln();
            -1.0 / ((1.0 - p) * n)
        })
        .collect();
    Ok(Loss {
        value: value / n,
        gradient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn half_probability_on_positive_target() {
        let loss = bce_loss(&[0.5], &[1.0]).unwrap();
        assert!((loss.value - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((loss.gradient[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn exact_predictions_have_near_zero_loss() {
        let loss = bce_loss(&[1.0, 0.0, 1.0], &[1.0, 0.0, 1.0]).unwrap();
        assert!(loss.value <= 1e-6);
        assert!(loss.value >= 0.0);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(bce_loss(&[0.2, 0.3], &[1.0]).is_err());
    }

    #[test]
    fn log_complement_gradient() {
        let loss = mean_log_complement(&[0.5, 0.75]).unwrap();
        assert!((loss.value - (0.5f64.ln() + 0.25f64.ln()) / 2.0).abs() < 1e-12);
        assert!((loss.gradient[0] + 1.0).abs() < 1e-12);
        assert!((loss.gradient[1] + 2.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn bce_nonnegative_and_zero_only_at_targets(
            pairs in prop::collection::vec((0.0f64..=1.0, any::<bool>()), 1..32)
        ) {
            let p: Vec<f64> = pairs.iter().map(|x| x.0).collect();
            let y: Vec<f64> = pairs.iter().map(|x| if x.1 { 1.0 } else { 0.0 }).collect();
            let loss = bce_loss(&p, &y).unwrap();
            prop_assert!(loss.value >= 0.0);
            let exact = p.iter().zip(&y).all(|(a, b)| (a - b).abs() <= PROB_CLAMP);
            if !exact {
                let worst = p.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if worst > 1e-3 {
                    prop_assert!(loss.value > 1e-6);
                }
            }
        }
    }
}
