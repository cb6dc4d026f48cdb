use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// A trainable array with its accumulated gradient.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Param {
    pub value: Vec<f32>,
    #[serde(skip)]
    pub grad: Vec<f32>,
}

impl Param {
    pub fn zeros(len: usize) -> Self {
        Param {
            value: vec![0.0; len],
            grad: vec![0.0; len],
        }
    }

    pub fn filled(len: usize, v: f32) -> Self {
        Param {
            value: vec![v; len],
            grad: vec![0.0; len],
        }
    }

    /// He-normal initialization: N(0, 2 / fan_in).
    pub fn he_normal(len: usize, fan_in: usize, rng: &mut impl Rng) -> Self {
        let std = (2.0 / fan_in.max(1) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("finite std");
        let value = (0..len).map(|_| normal.sample(rng) as f32).collect();
        Param {
            value,
            grad: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        if self.grad.len() != self.value.len() {
            self.grad = vec![0.0; self.value.len()];
        } else {
            self.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }
}

/// Anything that owns trainable parameters, visited in a fixed order.
pub trait Module {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    /// Non-trainable state that still has to be checkpointed (batch-norm running statistics).
    fn buffers(&self) -> Vec<&Vec<f32>> {
        Vec::new()
    }

    fn buffers_mut(&mut self) -> Vec<&mut Vec<f32>> {
        Vec::new()
    }

    fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Flatten parameters and buffers into one vector.
    fn export_state(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.num_params());
        for p in self.params() {
            out.extend_from_slice(&p.value);
        }
        for b in self.buffers() {
            out.extend_from_slice(b);
        }
        out
    }

    /// Load a vector produced by [`Module::export_state`] on an identically shaped module.
    fn import_state(&mut self, state: &[f32]) -> Result<(), String> {
        let expected: usize = self.params().iter().map(|p| p.len()).sum::<usize>()
            + self.buffers().iter().map(|b| b.len()).sum::<usize>();
        if expected != state.len() {
            return Err(format!(
                "state length {} does not match module size {}",
                state.len(),
                expected
            ));
        }
        let mut off = 0;
        for p in self.params_mut() {
            let n = p.value.len();
            p.value.copy_from_slice(&state[off..off + n]);
            off += n;
        }
        for b in self.buffers_mut() {
            let n = b.len();
            b.copy_from_slice(&state[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Hard copy of all parameter values and buffers from `other`.
    fn copy_from(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let state = other.export_state();
        self.import_state(&state)
            .expect("copy between identically shaped modules");
    }
}
