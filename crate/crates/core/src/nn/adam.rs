use super::{ensure_finite, NnError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Multiplier applied to the learning rate at each epoch end.
    pub lr_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 3e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, lr_decay: 0.995 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        Self { config, lr: config.learning_rate, m: vec![0.0; n_params], v: vec![0.0; n_params], step: 0 }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NnError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NnError::Shape { layer: "adam".into(), expected: self.m.len(), got: grads.len() });
        }
        ensure_finite(grads, "gradients")?;
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + c.epsilon);
        }
        Ok(())
    }

    pub fn end_epoch(&mut self) {
        self.lr *= self.config.lr_decay;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut adam = Adam::new(AdamConfig::default(), 1);
        let mut p = [0.5];
        adam.step(&mut p, &[1.0]).unwrap();
        // m_hat = v_hat = 1, so the step is lr / (1 + eps)
        let expected = 0.5 - 3e-4 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] - (0.5 - 3e-4)).abs() < 1e-9);
    }

    #[test]
    fn zero_grad_and_zero_lr_leave_params() {
        let mut adam = Adam::new(AdamConfig::default(), 2);
        let mut p = [0.1, -0.2];
        adam.step(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(p, [0.1, -0.2]);
        let mut adam = Adam::new(AdamConfig { learning_rate: 0.0, ..AdamConfig::default() }, 2);
        adam.step(&mut p, &[3.0, -1.0]).unwrap();
        assert_eq!(p, [0.1, -0.2]);
    }

    #[test]
    fn decay_and_bad_grads() {
        let mut adam = Adam::new(AdamConfig::default(), 1);
        adam.end_epoch();
        assert!((adam.learning_rate() - 3e-4 * 0.995).abs() < 1e-18);
        assert!(adam.step(&mut [0.0], &[f64::INFINITY]).is_err());
    }
}
