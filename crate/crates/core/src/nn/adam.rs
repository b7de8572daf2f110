use crate::{Error, Result};

/// Bias-corrected Adam state for a fixed list of parameter tensors.
///
/// Moments are allocated on the first step and must keep the same shapes afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        Self::with_hyperparameters(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyperparameters(lr: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            epsilon,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    fn ensure_shapes(&mut self, grads: &[&[f64]]) -> Result<()> {
        if self.first.is_empty() && self.step == 0 {
            self.first = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.second = self.first.clone();
            return Ok(());
        }
        let same = self.first.len() == grads.len()
            && self.first.iter().zip(grads).all(|(m, g)| m.len() == g.len());
        if same {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(
                "gradient tensors do not match the optimizer's moment shapes".into(),
            ))
        }
    }
}

/// One Adam update of every tensor in `params` using the matching entry of `grads`.
pub fn adam_step(params: &mut [&mut [f64]], grads: &[&[f64]], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.iter().zip(grads).any(|(p, g)| p.len() != g.len()) {
        return Err(Error::ShapeMismatch("parameters and gradients differ in shape".into()));
    }
    state.ensure_shapes(grads)?;
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);
    for (k, (param, grad)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.first[k];
        let v = &mut state.second[k];
        for i in 0..param.len() {
            let g = grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] / correction1;
            let v_hat = v[i] / correction2;
            param[i] -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn minimize_quadratic(steps: usize) -> f64 {
        let mut w = [0.0];
        let mut state = AdamState::new(0.02);
        for _ in 0..steps {
            let g = [2.0 * (w[0] - 3.0)];
            adam_step(&mut [&mut w[..]], &[&g[..]], &mut state).unwrap();
        }
        w[0]
    }

    #[test]
    fn reaches_quadratic_minimum() {
        let w = minimize_quadratic(2000);
        assert!((w - 3.0).abs() < 1e-3, "w = {w}");
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut w = [1.25, -4.0];
        let mut state = AdamState::new(0.02);
        for _ in 0..100 {
            adam_step(&mut [&mut w[..]], &[&[0.0, 0.0][..]], &mut state).unwrap();
        }
        assert_eq!(w, [1.25, -4.0]);
    }

    #[test]
    fn identical_runs_are_identical() {
        assert_eq!(minimize_quadratic(500).to_bits(), minimize_quadratic(500).to_bits());
    }

    #[test]
    fn shape_change_is_rejected() {
        let mut w = [0.0, 0.0];
        let mut state = AdamState::new(0.1);
        adam_step(&mut [&mut w[..]], &[&[1.0, 1.0][..]], &mut state).unwrap();
        let mut u = [0.0];
        assert!(adam_step(&mut [&mut u[..]], &[&[1.0][..]], &mut state).is_err());
        assert!(adam_step(&mut [&mut w[..]], &[&[1.0][..]], &mut state).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        // Once moments saturate under a constant gradient the step is -lr * sign(g),
        // whatever the gradient's magnitude.
        #[test]
        fn step_direction_is_minus_sign_of_gradient(g in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
            let mut w = [0.0];
            let mut state = AdamState::new(0.01);
            for _ in 0..5000 {
                adam_step(&mut [&mut w[..]], &[&[g][..]], &mut state).unwrap();
            }
            let before = w[0];
            adam_step(&mut [&mut w[..]], &[&[g][..]], &mut state).unwrap();
            let delta = w[0] - before;
            prop_assert_eq!(delta.signum(), -g.signum());
            prop_assert!((delta.abs() - 0.01).abs() < 1e-4);
        }
    }
}
