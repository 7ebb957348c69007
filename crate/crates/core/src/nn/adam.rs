//! Adam optimizer with bias correction.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state for a fixed list of parameter buffers; the caller must
/// present the same buffers in the same order on every step.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step_count: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, param_sizes: &[usize]) -> Adam {
        Adam {
            config,
            step_count: 0,
            m: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update over (param, grad) buffer pairs. Non-finite gradients are
    /// an explicit error; nothing is mutated in that case.
    pub fn step(&mut self, params_and_grads: &mut [(&mut [f64], &[f64])]) -> Result<()> {
        if params_and_grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch(format!(
                "adam: {} buffers vs {} states",
                params_and_grads.len(),
                self.m.len()
            )));
        }
        for (i, (p, g)) in params_and_grads.iter().enumerate() {
            if p.len() != self.m[i].len() || g.len() != p.len() {
                return Err(Error::ShapeMismatch(format!("adam buffer {i}")));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient buffer {i}")));
            }
        }
        self.step_count += 1;
        let t = self.step_count as f64;
        let c = &self.config;
        let bias1 = 1.0 - c.beta1.powf(t);
        let bias2 = 1.0 - c.beta2.powf(t);
        for (i, (p, g)) in params_and_grads.iter_mut().enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for j in 0..p.len() {
                m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
                v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
                let m_hat = m[j] / bias1;
                let v_hat = v[j] / bias2;
                p[j] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let cfg = AdamConfig::default();
        let mut adam = Adam::new(cfg, &[2]);
        let mut p = vec![1.0, -2.0];
        let g = vec![0.37, -5.0];
        adam.step(&mut [(&mut p, &g)]).unwrap();
        // bias-corrected step 1 is -lr * g / (|g| + eps') ~ -lr * sign(g)
        assert!((p[0] - (1.0 - cfg.lr)).abs() < 1e-6);
        assert!((p[1] - (-2.0 + cfg.lr)).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut adam = Adam::new(AdamConfig::default(), &[3]);
        let mut p = vec![0.5, -0.5, 2.0];
        let orig = p.clone();
        let g = vec![0.0; 3];
        for _ in 0..5 {
            adam.step(&mut [(&mut p, &g)]).unwrap();
        }
        assert_eq!(p, orig);
    }

    #[test]
    fn three_step_trace_matches_hand_recurrence() {
        let cfg = AdamConfig {
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        };
        let mut adam = Adam::new(cfg, &[1]);
        let mut p = vec![0.7];
        let grads = [0.4, -0.9, 0.15];

        // independent recurrence
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 0.7f64);
        for (t, &g) in grads.iter().enumerate() {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let m_hat = m / (1.0 - 0.9f64.powi(t as i32 + 1));
            let v_hat = v / (1.0 - 0.999f64.powi(t as i32 + 1));
            x -= 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        }

        for &g in &grads {
            adam.step(&mut [(&mut p, &[g])]).unwrap();
        }
        assert!((p[0] - x).abs() < 1e-10, "adam {} vs hand {x}", p[0]);
    }

    #[test]
    fn non_finite_gradient_is_an_error() {
        let mut adam = Adam::new(AdamConfig::default(), &[1]);
        let mut p = vec![1.0];
        let g = vec![f64::NAN];
        assert!(matches!(
            adam.step(&mut [(&mut p, &g)]),
            Err(Error::NonFinite(_))
        ));
        assert_eq!(p, vec![1.0]);
    }
}
