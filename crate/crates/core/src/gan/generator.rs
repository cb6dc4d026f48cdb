use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    add_assign, concat_channels, split_channels, Act, Activation, BatchNorm2d, Conv2d,
    ConvTranspose2d, Dropout, Layer, Seq, Tensor,
};

use super::{MapModel, ModelKind};

/// UNet generator shape. Channel width of encoder block `k` is
/// `max(1, base_filters / width_divisor) · min(2^k, max_multiplier)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub depth: usize,
    pub base_filters: usize,
    /// Divides the nominal filter counts so the desk-scale profile fits a CPU budget.
    pub width_divisor: usize,
    pub max_multiplier: usize,
    pub kernel: usize,
    pub stride: usize,
    pub dropout_rate: f32,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            depth: 7,
            base_filters: 256,
            width_divisor: 32,
            max_multiplier: 8,
            kernel: 4,
            stride: 2,
            dropout_rate: 0.5,
            in_channels: 2,
            out_channels: 2,
        }
    }
}

impl GeneratorSpec {
    /// Full-depth generator for an `n × n` grid (1×1 bottleneck).
    pub fn for_grid(n: usize, base_filters: usize) -> Self {
        GeneratorSpec {
            depth: n.trailing_zeros() as usize,
            base_filters,
            ..GeneratorSpec::default()
        }
    }

    pub fn base_width(&self) -> usize {
        (self.base_filters / self.width_divisor.max(1)).max(1)
    }

    pub fn width(&self, k: usize) -> usize {
        self.base_width() * (1usize << k.min(16)).min(self.max_multiplier)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::InvalidConfig(format!(
                "generator depth {} must be >= 2",
                self.depth
            )));
        }
        if self.kernel != 4 || self.stride != 2 {
            return Err(Error::Unsupported(format!(
                "generator blocks use kernel 4 / stride 2, got {} / {}",
                self.kernel, self.stride
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate)
            || self.width_divisor == 0
            || self.max_multiplier == 0
        {
            return Err(Error::InvalidConfig(format!(
                "invalid generator spec {self:?}"
            )));
        }
        Ok(())
    }

    pub fn check_grid(&self, n: usize) -> Result<()> {
        if n == 0 || !n.is_multiple_of(1 << self.depth) {
            return Err(Error::InvalidConfig(format!(
                "grid size {n} is not divisible by 2^{}",
                self.depth
            )));
        }
        Ok(())
    }
}

/// Encoder stack whose outputs feed mirrored decoder blocks: decoder block
/// `t` sees the previous decoder output concatenated with encoder output
/// `depth − 1 − t`. The innermost encoder output enters decoder block 0 alone.
#[derive(Debug, Clone)]
pub(crate) struct SkipNet {
    pub(crate) encoder: Vec<Seq>,
    pub(crate) decoder: Vec<Seq>,
}

crate::impl_module_fields!(SkipNet, encoder, decoder);

impl SkipNet {
    fn depth(&self) -> usize {
        self.encoder.len()
    }

    pub(crate) fn forward(&self, x: &Tensor, zero_skip: Option<usize>) -> Tensor {
        let d = self.depth();
        let mut skips = Vec::with_capacity(d);
        let mut h = x.clone();
        for blk in &self.encoder {
            h = blk.forward(&h);
            skips.push(h.clone());
        }
        if let Some(k) = zero_skip.filter(|&k| k < d - 1) {
            skips[k] = skips[k].zeros_like();
        }
        let mut h = self.decoder[0].forward(&skips[d - 1]);
        for t in 1..d {
            h = self.decoder[t].forward(&concat_channels(&h, &skips[d - 1 - t]));
        }
        h
    }

    pub(crate) fn forward_train(&mut self, x: &Tensor, rng: &mut ChaCha8Rng) -> Tensor {
        let d = self.depth();
        let mut skips = Vec::with_capacity(d);
        let mut h = x.clone();
        for blk in &mut self.encoder {
            h = blk.forward_train(&h, rng);
            skips.push(h.clone());
        }
        let mut h = self.decoder[0].forward_train(&skips[d - 1], rng);
        for t in 1..d {
            h = self.decoder[t].forward_train(&concat_channels(&h, &skips[d - 1 - t]), rng);
        }
        h
    }

    pub(crate) fn backward(&mut self, dy: &Tensor) {
        let d = self.depth();
        let mut dskip: Vec<Option<Tensor>> = vec![None; d];
        let mut dh = dy.clone();
        for t in (1..d).rev() {
            let dcat = self.decoder[t].backward(&dh);
            let (dprev, ds) = split_channels(&dcat, dcat.c / 2);
            dskip[d - 1 - t] = Some(ds);
            dh = dprev;
        }
        let mut dh = self.decoder[0].backward(&dh);
        for k in (0..d).rev() {
            if let Some(ds) = &dskip[k] {
                add_assign(&mut dh, ds);
            }
            dh = self.encoder[k].backward(&dh);
        }
    }
}

/// Decoder blocks shared by the generator and the plain UNet regressor.
pub(crate) fn unet_decoder(
    spec: &GeneratorSpec,
    with_bn_dropout: bool,
    rng: &mut impl Rng,
) -> Vec<Seq> {
    let d = spec.depth;
    let (k, s) = (spec.kernel, spec.stride);
    let mut decoder = Vec::with_capacity(d);
    for t in 0..d {
        let cin = if t == 0 {
            spec.width(d - 1)
        } else {
            2 * spec.width(d - 1 - t)
        };
        if t == d - 1 {
            decoder.push(
                Seq::new()
                    .push(Layer::ConvT(ConvTranspose2d::new(
                        cin,
                        spec.out_channels,
                        k,
                        s,
                        1,
                        rng,
                    )))
                    .push(Layer::Act(Act::new(Activation::Tanh))),
            );
            continue;
        }
        let cout = spec.width(d - 2 - t);
        let mut blk = Seq::new()
            .push(Layer::ConvT(ConvTranspose2d::new(cin, cout, k, s, 1, rng)))
            .push(Layer::Act(Act::new(Activation::Relu)));
        if with_bn_dropout {
            blk = blk.push(Layer::Bn(BatchNorm2d::new(cout)));
            if t < 3 && spec.dropout_rate > 0.0 {
                blk = blk.push(Layer::Dropout(Dropout::new(spec.dropout_rate)));
            }
        }
        decoder.push(blk);
    }
    decoder
}

/// Encoder–decoder generator with mirrored skip connections.
#[derive(Debug, Clone)]
pub struct Generator {
    pub spec: GeneratorSpec,
    net: SkipNet,
}

crate::delegate_module!(Generator, net);

impl Generator {
    pub fn new(spec: GeneratorSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let d = spec.depth;
        let mut encoder = Vec::with_capacity(d);
        for i in 0..d {
            let cin = if i == 0 {
                spec.in_channels
            } else {
                spec.width(i - 1)
            };
            let mut blk = Seq::new()
                .push(Layer::Conv(Conv2d::new(
                    cin,
                    spec.width(i),
                    spec.kernel,
                    spec.stride,
                    1,
                    rng,
                )))
                .push(Layer::Act(Act::new(Activation::Relu)));
            if i > 0 && i < d - 1 {
                blk = blk.push(Layer::Bn(BatchNorm2d::new(spec.width(i))));
            }
            encoder.push(blk);
        }
        let decoder = unet_decoder(&spec, true, rng);
        Ok(Generator {
            spec,
            net: SkipNet { encoder, decoder },
        })
    }

    /// Inference pass with encoder output `zero_skip` (if any) replaced by
    /// zeros on its way to the decoder.
    pub fn forward_with_skip_zeroed(&self, x: &Tensor, zero_skip: Option<usize>) -> Tensor {
        self.net.forward(x, zero_skip)
    }

    pub fn encoder_has_batch_norm(&self) -> Vec<bool> {
        self.net.encoder.iter().map(Seq::has_batch_norm).collect()
    }

    pub fn decoder_has_dropout(&self) -> Vec<bool> {
        self.net.decoder.iter().map(Seq::has_dropout).collect()
    }
}

impl MapModel for Generator {
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
        ModelKind::NpeGan
    }

    fn skip_connections(&self) -> usize {
        self.spec.depth - 1
    }
}
