use crate::error::{Error, Result};

use super::{Gradients, Network, Real};

pub const DEFAULT_LEARNING_RATE: f64 = 2e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

fn update<T: Real>(params: &mut [T], m: &mut [T], v: &mut [T], grads: &[T], lr_t: T, b1: T, b2: T, eps_t: T) {
    let one = T::one();
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = b1 * m[i] + (one - b1) * g;
        v[i] = b2 * v[i] + (one - b2) * g * g;
        params[i] = params[i] - lr_t * m[i] / (v[i].sqrt() + eps_t);
    }
}

impl<T: Real> Network<T> {
    /// One bias-corrected Adam update. Non-finite gradients leave the state untouched.
    pub fn adam_step(&mut self, grads: &Gradients<T>, lr: f64, cfg: &AdamConfig) -> Result<()> {
        if grads.layers.len() != self.layers.len()
            || grads
                .layers
                .iter()
                .zip(&self.layers)
                .any(|(g, l)| g.weight.len() != l.weight.len() || g.bias.len() != l.bias.len())
        {
            return Err(Error::ShapeMismatch("gradient shapes do not match the network".into()));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradients".into()));
        }
        self.step += 1;
        let t = self.step as f64;
        let c1 = 1.0 - cfg.beta1.powf(t);
        let c2 = 1.0 - cfg.beta2.powf(t);
        // Bias correction folded into the step size and epsilon:
        //   p -= lr · (m/c1) / (sqrt(v/c2) + eps)
        //      = (lr·√c2/c1) · m / (sqrt(v) + eps·√c2)
        let lr_t = T::of(lr * c2.sqrt() / c1);
        let eps_t = T::of(cfg.epsilon * c2.sqrt());
        let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            update(&mut layer.weight, &mut layer.m_weight, &mut layer.v_weight, &g.weight, lr_t, b1, b2, eps_t);
            update(&mut layer.bias, &mut layer.m_bias, &mut layer.v_bias, &g.bias, lr_t, b1, b2, eps_t);
        }
        Ok(())
    }
}
