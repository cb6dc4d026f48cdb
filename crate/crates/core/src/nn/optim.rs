use serde::{Deserialize, Serialize};

use super::Param;

/// Adaptive-moment optimizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    t: u64,
    #[serde(skip)]
    m: Vec<Vec<f32>>,
    #[serde(skip)]
    v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(lr: f32) -> Self {
        Adam::with_betas(lr, 0.9, 0.999)
    }

    pub fn with_betas(lr: f32, beta1: f32, beta2: f32) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Apply one update from the accumulated gradients, then clear them.
    pub fn step(&mut self, params: Vec<&mut Param>) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        assert_eq!(
            self.m.len(),
            params.len(),
            "optimizer bound to a different parameter set"
        );
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let step = self.lr * bc2.sqrt() / bc1;
        for (k, p) in params.into_iter().enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for t in 0..p.value.len() {
                let g = p.grad[t];
                m[t] = self.beta1 * m[t] + (1.0 - self.beta1) * g;
                v[t] = self.beta2 * v[t] + (1.0 - self.beta2) * g * g;
                p.value[t] -= step * m[t] / (v[t].sqrt() + self.eps * bc2.sqrt());
            }
            p.zero_grad();
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// Plain stochastic gradient descent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sgd {
    pub lr: f32,
}

impl Sgd {
    pub fn new(lr: f32) -> Self {
        Sgd { lr }
    }

    pub fn step(&mut self, params: Vec<&mut Param>) {
        for p in params {
            for t in 0..p.value.len() {
                p.value[t] -= self.lr * p.grad[t];
            }
            p.zero_grad();
        }
    }
}
