use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-12,
            weight_decay: 1.0,
        }
    }
}

/// Adam with decoupled weight decay over a flat parameter vector.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub cfg: AdamWConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamW {
    pub fn new(n_params: usize, cfg: AdamWConfig) -> Self {
        AdamW {
            cfg,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn lr(&self) -> f64 {
        self.cfg.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.cfg.lr = lr;
    }

    /// `p <- p - lr (m̂ / (sqrt(v̂) + eps) + wd p)`
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), self.m.len());
        debug_assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let AdamWConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.cfg;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * (m_hat / (v_hat.sqrt() + eps) + weight_decay * *p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut opt = AdamW::new(
            3,
            AdamWConfig {
                weight_decay: 0.0,
                ..Default::default()
            },
        );
        let mut p = vec![1.0, -2.0, 0.5];
        opt.step(&mut p, &[0.0; 3]);
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn pure_decay_step() {
        let mut opt = AdamW::new(
            1,
            AdamWConfig {
                lr: 0.1,
                weight_decay: 1.0,
                ..Default::default()
            },
        );
        let mut p = vec![1.0];
        opt.step(&mut p, &[0.0]);
        assert!((p[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn step_counter() {
        let mut opt = AdamW::new(2, AdamWConfig::default());
        let mut p = vec![0.0; 2];
        for k in 1..=5 {
            opt.step(&mut p, &[1.0, -1.0]);
            assert_eq!(opt.steps(), k);
        }
    }

    #[test]
    fn first_step_moves_by_lr_against_the_gradient() {
        let mut opt = AdamW::new(
            2,
            AdamWConfig {
                lr: 0.01,
                weight_decay: 0.0,
                ..Default::default()
            },
        );
        let mut p = vec![0.0, 0.0];
        opt.step(&mut p, &[3.0, -0.2]);
        assert!((p[0] + 0.01).abs() < 1e-12);
        assert!((p[1] - 0.01).abs() < 1e-12);
    }
}
