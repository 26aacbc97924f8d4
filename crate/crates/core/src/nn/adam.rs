use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ParamStore;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.5,
            beta2: 0.9,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter tensor in
/// store order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub first: Vec<Vec<f32>>,
    pub second: Vec<Vec<f32>>,
}

#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    pub state: AdamState,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let zeros: Vec<Vec<f32>> = store.iter().map(|p| alloc::vec![0.0; p.numel()]).collect();
        Self {
            config,
            state: AdamState {
                step: 0,
                first: zeros.clone(),
                second: zeros,
            },
        }
    }

    /// Applies one update from the accumulated gradients. Gradients are left
    /// untouched; callers zero them before the next accumulation.
    pub fn step(&mut self, store: &mut ParamStore) {
        let c = self.config;
        self.state.step += 1;
        let t = self.state.step as f64;
        let bc1 = 1.0 - libm::pow(c.beta1 as f64, t);
        let bc2 = 1.0 - libm::pow(c.beta2 as f64, t);
        let step_size = (c.learning_rate as f64 / bc1) as f32;
        let bc2_sqrt = libm::sqrt(bc2) as f32;
        for ((p, m), v) in store
            .iter_mut()
            .zip(self.state.first.iter_mut())
            .zip(self.state.second.iter_mut())
        {
            for (((w, g), m), v) in p.value.iter_mut().zip(&p.grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                let denom = libm::sqrtf(*v) / bc2_sqrt + c.eps;
                *w -= step_size * *m / denom;
            }
        }
    }
}
