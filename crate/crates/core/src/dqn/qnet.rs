use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Act, Activation, Conv2d, Layer, Linear, MaxPool2, Seq, Tensor};

/// Output-layer weights start at this fraction of He scale so initial
/// Q-values sit well inside the reward range.
const HEAD_INIT_GAIN: f32 = 0.1;

/// Convolutional Q-network: 3×3 same-padded conv + ReLU + 2×2 max-pool per
/// entry of `filters`, then a linear layer with one output per action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetworkSpec {
    pub grid_size: usize,
    pub n_actions: usize,
    pub filters: Vec<usize>,
    pub in_channels: usize,
}

impl QNetworkSpec {
    pub fn new(grid_size: usize, n_actions: usize) -> Self {
        QNetworkSpec {
            grid_size,
            n_actions,
            filters: vec![16, 32, 64, 128],
            in_channels: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pools = self.filters.len() as u32;
        if self.n_actions == 0 || self.filters.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "invalid Q-network spec {self:?}"
            )));
        }
        if !self.grid_size.is_multiple_of(1 << pools) {
            return Err(Error::InvalidConfig(format!(
                "grid {} not divisible by 2^{pools} for the Q-network pooling stack",
                self.grid_size
            )));
        }
        Ok(())
    }

    pub fn flat_features(&self) -> usize {
        let side = self.grid_size >> self.filters.len();
        self.filters.last().copied().unwrap_or(0) * side * side
    }
}

#[derive(Debug, Clone)]
pub struct QNetwork {
    pub spec: QNetworkSpec,
    net: Seq,
}

crate::delegate_module!(QNetwork, net);

impl QNetwork {
    pub fn new(spec: QNetworkSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let mut net = Seq::new();
        let mut cin = spec.in_channels;
        for &f in &spec.filters {
            net = net
                .push(Layer::Conv(Conv2d::new(cin, f, 3, 1, 1, rng)))
                .push(Layer::Act(Act::new(Activation::Relu)))
                .push(Layer::Pool(MaxPool2::new()));
            cin = f;
        }
        let mut head = Linear::new(spec.flat_features(), spec.n_actions, rng);
        head.weight
            .value
            .iter_mut()
            .for_each(|w| *w *= HEAD_INIT_GAIN);
        net = net.push(Layer::Linear(head));
        Ok(QNetwork { spec, net })
    }

    /// Q-values `[n, |A|, 1, 1]` for a batch of `[n, 2, L, L]` states.
    pub fn forward(&self, states: &Tensor) -> Tensor {
        self.net.forward(states)
    }

    pub fn forward_train(&mut self, states: &Tensor) -> Tensor {
        // No stochastic layers, so any rng will do.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        self.net.forward_train(states, &mut rng)
    }

    pub fn backward(&mut self, dq: &Tensor) {
        self.net.backward(dq);
    }
}
