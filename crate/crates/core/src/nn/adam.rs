use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// ADAM moments and hyperparameters for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Self {
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    /// Bias-corrected update moving `params` against the loss gradient `grads`.
    /// Non-finite gradients leave both parameters and moments untouched.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.len() || grads.len() != self.len() {
            return Err(Error::Shape {
                expected: self.len(),
                actual: if params.len() != self.len() {
                    params.len()
                } else {
                    grads.len()
                },
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        self.step_count += 1;
        let t = self.step_count as f64;
        let correction1 = 1.0 - libm::pow(self.beta1, t);
        let correction2 = 1.0 - libm::pow(self.beta2, t);
        let (b1, b2) = (self.beta1, self.beta2);
        let iter = params.iter_mut().zip(grads).zip(
            self.first_moment
                .iter_mut()
                .zip(self.second_moment.iter_mut()),
        );
        for ((p, &g), (m, v)) in iter {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= self.learning_rate * m_hat / (libm::sqrt(v_hat) + self.epsilon);
        }
        Ok(())
    }
}
