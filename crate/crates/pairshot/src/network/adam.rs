//! Adam optimizer with bias correction and per-epoch step decay of the
//! learning rate.

use crate::error::{Error, Result};

use super::NetworkParams;

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub base_lr: f64,
    /// Multiplicative learning-rate decay applied at each completed epoch.
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            base_lr: 1e-3,
            decay: 0.96,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer state: step count, completed epochs, and first/second moment
/// buffers shaped like the parameters they track.
#[derive(Clone, Debug)]
pub struct AdamState {
    cfg: AdamConfig,
    step: u64,
    epochs_completed: u32,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(cfg: AdamConfig, params: &NetworkParams) -> Self {
        let first_moment = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        let second_moment = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        AdamState {
            cfg,
            step: 0,
            epochs_completed: 0,
            first_moment,
            second_moment,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn epochs_completed(&self) -> u32 {
        self.epochs_completed
    }

    /// base_lr × decay^(completed epochs).
    pub fn effective_lr(&self) -> f64 {
        self.cfg.base_lr * self.cfg.decay.powi(self.epochs_completed as i32)
    }

    pub fn advance_epoch(&mut self) {
        self.epochs_completed += 1;
    }

    /// One Adam update. Gradients must be finite and shaped like the
    /// parameters; parameters are checked finite afterwards.
    pub fn step(&mut self, params: &mut NetworkParams, grads: &NetworkParams) -> Result<()> {
        let grad_tensors = grads.tensors();
        let mut param_tensors = params.tensors_mut();
        if grad_tensors.len() != param_tensors.len() {
            return Err(Error::invalid("gradient structure does not match parameters"));
        }
        for (g, p) in grad_tensors.iter().zip(param_tensors.iter()) {
            if g.shape() != p.shape() {
                return Err(Error::invalid(format!(
                    "gradient shape {:?} does not match parameter shape {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
            if !g.is_finite() {
                return Err(Error::Diverged("non-finite gradient".into()));
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let lr = self.effective_lr();
        let bias1 = 1.0 - self.cfg.beta1.powi(t);
        let bias2 = 1.0 - self.cfg.beta2.powi(t);
        for (idx, grad) in grad_tensors.iter().enumerate() {
            let m = &mut self.first_moment[idx];
            let v = &mut self.second_moment[idx];
            let p = param_tensors[idx].data_mut();
            for (i, &g) in grad.data().iter().enumerate() {
                m[i] = self.cfg.beta1 * m[i] + (1.0 - self.cfg.beta1) * g;
                v[i] = self.cfg.beta2 * v[i] + (1.0 - self.cfg.beta2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + self.cfg.epsilon);
            }
        }
        drop(param_tensors);
        if !params.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite parameter after step {}",
                self.step
            )));
        }
        Ok(())
    }
}
