use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::gan::{unet_decoder, GeneratorSpec, MapModel, ModelKind, SkipNet};
use crate::nn::{Act, Activation, Conv2d, ConvTranspose2d, Layer, MaxPool2, Seq, Tensor};

/// Plain UNet regressor: each encoder level is a 3×3 convolution, ReLU and
/// 2×2 max-pooling; decoder levels are transposed convolutions with ReLU
/// and mirrored skip concatenation. No normalization, no dropout.
#[derive(Debug, Clone)]
pub struct UNetRegressor {
    pub spec: GeneratorSpec,
    net: SkipNet,
}

crate::delegate_module!(UNetRegressor, net);

impl UNetRegressor {
    pub fn new(spec: &GeneratorSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let spec = GeneratorSpec {
            dropout_rate: 0.0,
            ..spec.clone()
        };
        let encoder = (0..spec.depth)
            .map(|i| {
                let cin = if i == 0 {
                    spec.in_channels
                } else {
                    spec.width(i - 1)
                };
                Seq::new()
                    .push(Layer::Conv(Conv2d::new(cin, spec.width(i), 3, 1, 1, rng)))
                    .push(Layer::Act(Act::new(Activation::Relu)))
                    .push(Layer::Pool(MaxPool2::new()))
            })
            .collect();
        let decoder = unet_decoder(&spec, false, rng);
        Ok(UNetRegressor {
            spec,
            net: SkipNet { encoder, decoder },
        })
    }
}

impl MapModel for UNetRegressor {
    fn forward(&self, x: &Tensor) -> Tensor {
        self.net.forward(x, None)
    }

    fn forward_train(&mut self, x: &Tensor, rng: &mut ChaCha8Rng) -> Tensor {
        self.net.forward_train(x, rng)
    }

    fn backward(&mut self, dy: &Tensor) {
        self.net.backward(dy)
    }

    fn kind(&self) -> ModelKind {
        ModelKind::UnetRegressor
    }

    fn skip_connections(&self) -> usize {
        self.spec.depth - 1
    }
}

pub const AUTOENCODER_LEVELS: usize = 4;

/// Convolutional autoencoder: four stride-2 encoder layers, a 3×3
/// bottleneck and four transposed-convolution decoder layers, no skips.
#[derive(Debug, Clone)]
pub struct ConvAutoencoder {
    pub spec: GeneratorSpec,
    net: Seq,
}

crate::delegate_module!(ConvAutoencoder, net);

impl ConvAutoencoder {
    pub fn new(spec: &GeneratorSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let levels = AUTOENCODER_LEVELS;
        let mut net = Seq::new();
        let mut cin = spec.in_channels;
        for i in 0..levels {
            net = net
                .push(Layer::Conv(Conv2d::new(cin, spec.width(i), 4, 2, 1, rng)))
                .push(Layer::Act(Act::new(Activation::Relu)));
            cin = spec.width(i);
        }
        net = net
            .push(Layer::Conv(Conv2d::new(cin, cin, 3, 1, 1, rng)))
            .push(Layer::Act(Act::new(Activation::Relu)));
        for i in (0..levels).rev() {
            let (cout, act) = if i == 0 {
                (spec.out_channels, Activation::Tanh)
            } else {
                (spec.width(i - 1), Activation::Relu)
            };
            net = net
                .push(Layer::ConvT(ConvTranspose2d::new(
                    spec.width(i),
                    cout,
                    4,
                    2,
                    1,
                    rng,
                )))
                .push(Layer::Act(Act::new(act)));
        }
        Ok(ConvAutoencoder {
            spec: spec.clone(),
            net,
        })
    }
}

impl MapModel for ConvAutoencoder {
    fn forward(&self, x: &Tensor) -> Tensor {
        self.net.forward(x)
    }

    fn forward_train(&mut self, x: &Tensor, rng: &mut ChaCha8Rng) -> Tensor {
        self.net.forward_train(x, rng)
    }

    fn backward(&mut self, dy: &Tensor) {
        self.net.backward(dy);
    }

    fn kind(&self) -> ModelKind {
        ModelKind::Autoencoder
    }

    fn skip_connections(&self) -> usize {
        0
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;
    use crate::gan::Generator;

    #[test]
    fn output_shape_parity_with_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let spec = GeneratorSpec::for_grid(32, 256);
        let x = Tensor::from_vec(
            3,
            2,
            32,
            32,
            (0..3 * 2 * 32 * 32).map(|i| (i % 2) as f32).collect(),
        );
        let g = Generator::new(spec.clone(), &mut rng).unwrap();
        let u = UNetRegressor::new(&spec, &mut rng).unwrap();
        let a = ConvAutoencoder::new(&spec, &mut rng).unwrap();
        let want = g.forward(&x).shape();
        for y in [u.forward(&x), a.forward(&x)] {
            assert_eq!(y.shape(), want);
            assert!(y.data.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
        assert_eq!(a.skip_connections(), 0);
        assert!(u.skip_connections() > 0);
    }
}
