//! SGD and Adam parameter updates.

use crate::autodiff::params::{Gradients, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl OptimizerKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sgd" => Some(OptimizerKind::Sgd),
            "adam" => Some(OptimizerKind::Adam),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Optional global-norm gradient clip.
    pub grad_clip: Option<f64>,
}

impl OptimizerConfig {
    pub fn adam(learning_rate: f64) -> Self {
        assert!(learning_rate >= 0.0, "learning rate must not be negative");
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            grad_clip: None,
        }
    }

    pub fn sgd(learning_rate: f64) -> Self {
        assert!(learning_rate >= 0.0, "learning rate must not be negative");
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            grad_clip: None,
        }
    }
}

/// Optimizer state: Adam moments aligned entry-by-entry with the store.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, params: &ParamStore) -> Self {
        let m = params.iter().map(|(_, _, _, d)| vec![0.0; d.len()]).collect();
        let v = params.iter().map(|(_, _, _, d)| vec![0.0; d.len()]).collect();
        Optimizer {
            config,
            step: 0,
            m,
            v,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Moment arrays, aligned with the parameter store (for checkpoints).
    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.m, &self.v)
    }

    pub fn restore(&mut self, step: u64, m: Vec<Vec<f64>>, v: Vec<Vec<f64>>) {
        self.step = step;
        self.m = m;
        self.v = v;
    }

    /// One update from already-accumulated gradients. Frozen parameters are
    /// left untouched.
    pub fn apply(&mut self, params: &mut ParamStore, grads: &Gradients) {
        let mut scale = 1.0;
        if let Some(clip) = self.config.grad_clip {
            let norm = grads.global_norm();
            if norm > clip {
                scale = clip / norm;
            }
        }
        self.step += 1;
        let lr = self.config.learning_rate;
        match self.config.kind {
            OptimizerKind::Sgd => {
                for id in 0..params.len() {
                    if !params.is_trainable(id) {
                        continue;
                    }
                    let g = grads.get(id);
                    let p = params.get_mut(id);
                    for (pv, gv) in p.iter_mut().zip(g) {
                        *pv -= lr * scale * gv;
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps) = (self.config.beta1, self.config.beta2, self.config.eps);
                let bc1 = 1.0 - b1.powi(self.step as i32);
                let bc2 = 1.0 - b2.powi(self.step as i32);
                for id in 0..params.len() {
                    if !params.is_trainable(id) {
                        continue;
                    }
                    let g = grads.get(id);
                    let p = params.get_mut(id);
                    let m = &mut self.m[id];
                    let v = &mut self.v[id];
                    for i in 0..p.len() {
                        let gi = g[i] * scale;
                        m[i] = b1 * m[i] + (1.0 - b1) * gi;
                        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                        let mhat = m[i] / bc1;
                        let vhat = v[i] / bc2;
                        p[i] -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
    }
}
