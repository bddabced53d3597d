//! Adam with bias correction, keyed by parameter id.

use std::collections::HashMap;

use super::{DiffError, GradientMap, ParamId, Tensor};

/// Optimizer state: per-parameter first/second moments plus the shared
/// step counter and hyperparameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    moments: HashMap<ParamId, (Vec<f64>, Vec<f64>)>,
}

impl AdamState {
    pub fn new(learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            moments: HashMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One Adam update over `params` using the gradients in `grads`.
    /// Parameters without an entry in `grads` are left untouched; moments
    /// are zero-initialized on first sight.
    pub fn step(
        &mut self,
        params: &mut [&mut Tensor],
        grads: &GradientMap,
    ) -> Result<(), DiffError> {
        let known: Vec<Option<ParamId>> = params.iter().map(|p| p.param_id()).collect();
        for (id, _) in grads.iter() {
            if !known.contains(&Some(id)) {
                return Err(DiffError::UnknownParam { param: id });
            }
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);

        for p in params.iter_mut() {
            let id = match p.param_id() {
                Some(id) => id,
                None => continue,
            };
            let g = match grads.get(id) {
                Some(g) => g,
                None => continue,
            };
            if g.shape() != p.shape() {
                return Err(DiffError::GradShape {
                    param: id,
                    grad: g.shape().to_vec(),
                    param_shape: p.shape().to_vec(),
                });
            }
            let n = p.len();
            let (m, v) = self
                .moments
                .entry(id)
                .or_insert_with(|| (vec![0.0; n], vec![0.0; n]));
            let data = p.data_mut();
            let gd = g.data();
            for i in 0..n {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gd[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gd[i] * gd[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                data[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::Tape;

    fn grad_of(param: &Tensor, g: Vec<f64>) -> GradientMap {
        // Build a gradient map through the tape so the plumbing is the same
        // one training uses: loss = sum(p * c) has dL/dp = c.
        let mut tape = Tape::new();
        let np = tape.leaf(param);
        let nc = tape.constant(param.shape().to_vec(), g);
        let prod = tape.mul(np, nc).unwrap();
        let loss = tape.sum(prod);
        tape.backward(loss).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = Tensor::param(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
        let before = p.data().to_vec();
        let grads = grad_of(&p, vec![0.0; 3]);
        let mut state = AdamState::new(0.1);
        for _ in 0..5 {
            state.step(&mut [&mut p], &grads).unwrap();
        }
        assert_eq!(p.data(), &before[..]);
        assert_eq!(state.step_count(), 5);
    }

    #[test]
    fn single_step_matches_hand_oracle() {
        // p=1, g=1, lr=0.1: m=0.1, v=0.001, m_hat=1, v_hat=1,
        // p' = 1 - 0.1 * 1/(1 + 1e-8).
        let mut p = Tensor::param(vec![1], vec![1.0]).unwrap();
        let grads = grad_of(&p, vec![1.0]);
        let mut state = AdamState::new(0.1);
        state.step(&mut [&mut p], &grads).unwrap();
        let want = 1.0 - 0.1 * (1.0 / (1.0 + 1e-8));
        assert!((p.data()[0] - want).abs() <= 1e-15);
    }

    #[test]
    fn two_steps_match_scalar_reference() {
        // Independent scalar re-implementation of Adam, run for two steps
        // with a constant gradient.
        let (lr, b1, b2, eps) = (0.05, 0.9, 0.999, 1e-8);
        let g = 0.75;
        let mut theta = 0.2;
        let (mut m, mut v) = (0.0, 0.0);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1_pow(b1, t));
            let vh = v / (1.0 - b1_pow(b2, t));
            theta -= lr * mh / (vh.sqrt() + eps);
        }

        let mut p = Tensor::param(vec![1], vec![0.2]).unwrap();
        let grads = grad_of(&p, vec![g]);
        let mut state = AdamState::new(lr);
        state.step(&mut [&mut p], &grads).unwrap();
        state.step(&mut [&mut p], &grads).unwrap();
        assert!((p.data()[0] - theta).abs() <= 1e-15, "{} vs {theta}", p.data()[0]);
    }

    fn b1_pow(b: f64, t: u32) -> f64 {
        b.powi(t as i32)
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = Tensor::param(vec![2], vec![0.0, 0.0]).unwrap();
        // Forge a gradient of the wrong shape by leafing a same-id clone
        // with different dims is impossible through the public API, so
        // check the unknown-parameter path instead.
        let other = Tensor::param(vec![2], vec![1.0, 1.0]).unwrap();
        let grads = grad_of(&other, vec![1.0, 1.0]);
        let mut state = AdamState::new(0.1);
        assert!(matches!(
            state.step(&mut [&mut p], &grads),
            Err(DiffError::UnknownParam { .. })
        ));
    }
}
