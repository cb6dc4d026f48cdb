use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    conv_out, sigmoid, Act, Activation, BatchNorm2d, Conv2d, Layer, Module, Param, Seq, Tensor,
};

/// PatchGAN layout: three stride-2 blocks, one stride-1 block and a
/// stride-1 single-channel head, all with 4×4 kernels (70×70 receptive field).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorSpec {
    pub base_filters: usize,
    pub width_divisor: usize,
    pub max_multiplier: usize,
    pub in_channels: usize,
    pub leaky_slope: f32,
}

impl Default for DiscriminatorSpec {
    fn default() -> Self {
        DiscriminatorSpec {
            base_filters: 256,
            width_divisor: 32,
            max_multiplier: 8,
            in_channels: 4,
            leaky_slope: 0.2,
        }
    }
}

const KERNEL: usize = 4;
const STRIDES: [usize; 5] = [2, 2, 2, 1, 1];

impl DiscriminatorSpec {
    pub fn width(&self, k: usize) -> usize {
        (self.base_filters / self.width_divisor.max(1)).max(1)
            * (1usize << k).min(self.max_multiplier)
    }

    /// Receptive field of one output entry, in input pixels.
    pub fn receptive_field(&self) -> usize {
        STRIDES.iter().rev().fold(1, |rf, &s| (rf - 1) * s + KERNEL)
    }

    /// Patch-map side length for an `n × n` input, if the input is large enough.
    pub fn output_size(&self, n: usize) -> Option<usize> {
        let mut len = n;
        for s in STRIDES {
            if len + 2 < KERNEL {
                return None;
            }
            len = conv_out(len, KERNEL, s, 1);
        }
        (len >= 1).then_some(len)
    }
}

#[derive(Debug, Clone)]
pub struct PatchDiscriminator {
    pub spec: DiscriminatorSpec,
    net: Seq,
}

impl PatchDiscriminator {
    pub fn new(spec: DiscriminatorSpec, rng: &mut impl Rng) -> Self {
        let mut net = Seq::new();
        let mut cin = spec.in_channels;
        for (k, &s) in STRIDES[..4].iter().enumerate() {
            let cout = spec.width(k);
            net = net.push(Layer::Conv(Conv2d::new(cin, cout, KERNEL, s, 1, rng)));
            if k > 0 {
                net = net.push(Layer::Bn(BatchNorm2d::new(cout)));
            }
            net = net.push(Layer::Act(Act::new(Activation::LeakyRelu(
                spec.leaky_slope,
            ))));
            cin = cout;
        }
        net = net.push(Layer::Conv(Conv2d::new(cin, 1, KERNEL, STRIDES[4], 1, rng)));
        PatchDiscriminator { spec, net }
    }

    fn check(&self, x: &Tensor) -> Result<()> {
        if x.c != self.spec.in_channels || x.h != x.w {
            return Err(Error::shape(
                format!("[n, {}, L, L]", self.spec.in_channels),
                format!("{:?}", x.shape()),
            ));
        }
        if self.spec.output_size(x.h).is_none() {
            return Err(Error::InvalidConfig(format!(
                "input {}x{} too small for the patch discriminator",
                x.h, x.w
            )));
        }
        Ok(())
    }

    /// Patch logits `[n, 1, P, P]` for a concatenated (condition, maps) batch.
    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        self.check(x)?;
        Ok(self.net.forward(x))
    }

    /// Per-patch realism probabilities in (0, 1).
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.logits(x)?.map(sigmoid))
    }

    pub fn logits_train(&mut self, x: &Tensor, rng: &mut ChaCha8Rng) -> Tensor {
        self.net.forward_train(x, rng)
    }

    /// Gradient with respect to the logits in, gradient w.r.t. the input out.
    pub fn backward(&mut self, dlogits: &Tensor) -> Tensor {
        self.net.backward(dlogits)
    }
}

impl Module for PatchDiscriminator {
    fn params(&self) -> Vec<&Param> {
        self.net.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.net.params_mut()
    }

    fn buffers(&self) -> Vec<&Vec<f32>> {
        self.net.buffers()
    }

    fn buffers_mut(&mut self) -> Vec<&mut Vec<f32>> {
        self.net.buffers_mut()
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    #[test]
    fn receptive_field_is_seventy() {
        assert_eq!(DiscriminatorSpec::default().receptive_field(), 70);
    }

    #[test]
    fn patch_map_sizes() {
        let spec = DiscriminatorSpec {
            width_divisor: 64,
            ..Default::default()
        };
        assert_eq!(spec.output_size(128), Some(14));
        assert_eq!(spec.output_size(256), Some(30));
        assert_eq!(spec.output_size(64), Some(6));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = PatchDiscriminator::new(spec, &mut rng);
        for (n, p) in [(128, 14), (256, 30)] {
            let x = Tensor::from_vec(
                1,
                4,
                n,
                n,
                (0..4 * n * n)
                    .map(|i| ((i % 7) as f32) / 7.0 - 0.5)
                    .collect(),
            );
            let out = d.forward(&x).unwrap();
            assert_eq!(out.shape(), [1, 1, p, p]);
            assert!(out.data.iter().all(|&v| v > 0.0 && v < 1.0));
        }
        assert!(d.forward(&Tensor::zeros(1, 4, 8, 8)).is_err());
        assert!(d.forward(&Tensor::zeros(1, 2, 64, 64)).is_err());
    }
}
