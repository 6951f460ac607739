/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam state over a flat parameter buffer, with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Adam {
            config,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_parameter_steps() {
        let cfg = AdamConfig::default();
        let mut adam = Adam::new(1, cfg);
        let mut p = [1.0];
        adam.step(&mut p, &[0.5]);
        // m = 0.05, v = 0.00025; m_hat = 0.5, v_hat = 0.25
        let expected = 1.0 - 1e-3 * 0.5 / (0.5 + 1e-8);
        assert_eq!(p[0], expected);

        adam.step(&mut p, &[-0.25]);
        let m: f64 = 0.9 * 0.05 + 0.1 * -0.25;
        let v: f64 = 0.999 * 0.00025 + 0.001 * 0.0625;
        let m_hat = m / (1.0 - 0.81);
        let v_hat = v / (1.0 - 0.999f64 * 0.999);
        let expected2 = expected - 1e-3 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p[0] - expected2).abs() < 1e-16);
        assert_eq!(adam.steps(), 2);
    }
}
