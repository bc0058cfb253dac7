//! Adam optimizer over the network's parameter tensors.

use super::{Params, SegNet};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Params,
    v: Params,
}

impl Adam {
    pub fn new(net: &SegNet, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: net.zero_grads(), v: net.zero_grads() }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update.
    pub fn step(&mut self, net: &mut SegNet, grads: &Params) -> Result<()> {
        let shape = |p: &Params| p.iter().map(|t| t.iter().map(Vec::len).collect::<Vec<_>>()).collect::<Vec<_>>();
        if shape(grads) != shape(&self.m) || shape(net.params()) != shape(&self.m) {
            return Err(Error::ShapeMismatch("gradient shapes do not match the optimizer state".into()));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let params = net.params_mut();
        for (((p, g), m), v) in params.iter_mut().flatten().zip(grads.iter().flatten()).zip(self.m.iter_mut().flatten()).zip(self.v.iter_mut().flatten()) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_step_moves_each_parameter_by_lr() {
        let cfg = NetConfig { bw_in: 8, widths: vec![2], ..NetConfig::default() };
        let mut net = SegNet::from_config(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let before = net.params().clone();
        let mut grads = net.zero_grads();
        grads.iter_mut().flatten().flatten().enumerate().for_each(|(i, g)| *g = if i % 2 == 0 { 3.0 } else { -0.5 });
        let mut opt = Adam::new(&net, 1e-3);
        opt.step(&mut net, &grads).unwrap();
        for ((a, b), g) in before.iter().flatten().flatten().zip(net.params().iter().flatten().flatten()).zip(grads.iter().flatten().flatten()) {
            assert!(((a - b) - 1e-3 * g.signum()).abs() < 1e-9);
        }
    }
}
