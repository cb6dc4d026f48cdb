//! Conditional GAN surrogate: UNet generator, PatchGAN discriminator,
//! adversarial + L1 training, and the shared map-model interface used by
//! the regression baselines.

mod discriminator;
mod generator;
mod train;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use discriminator::{DiscriminatorSpec, PatchDiscriminator};
pub(crate) use generator::{unet_decoder, SkipNet};
pub use generator::{Generator, GeneratorSpec};
pub use train::{
    evaluate_model, train_gan, train_regressor, ChannelMetrics, EpochMetrics, EvalReport,
    GanTrainConfig, SurrogateHeader, TrainedSurrogate,
};

use crate::baselines::{ConvAutoencoder, UNetRegressor};
use crate::error::{Error, Result};
use crate::nn::{Module, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    NpeGan,
    UnetRegressor,
    Autoencoder,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::NpeGan => "npe-gan",
            ModelKind::UnetRegressor => "unet-regressor",
            ModelKind::Autoencoder => "autoencoder",
        }
    }
}

/// Image-to-image network mapping `[n, 2, L, L]` conditions to `[n, 2, L, L]` maps in `[-1, 1]`.
pub trait MapModel: Module + Send + Sync {
    /// Inference mode: deterministic, read-only.
    fn forward(&self, x: &Tensor) -> Tensor;
    fn forward_train(&mut self, x: &Tensor, rng: &mut ChaCha8Rng) -> Tensor;
    /// Accumulate parameter gradients for the last `forward_train`.
    fn backward(&mut self, dy: &Tensor);
    fn kind(&self) -> ModelKind;
    fn skip_connections(&self) -> usize;
}

pub fn build_model(
    kind: ModelKind,
    spec: &GeneratorSpec,
    rng: &mut impl Rng,
) -> Result<Box<dyn MapModel>> {
    Ok(match kind {
        ModelKind::NpeGan => Box::new(Generator::new(spec.clone(), rng)?),
        ModelKind::UnetRegressor => Box::new(UNetRegressor::new(spec, rng)?),
        ModelKind::Autoencoder => Box::new(ConvAutoencoder::new(spec, rng)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CganLosses {
    pub d_loss: f64,
    /// BCE of the fake patches against the "real" label.
    pub g_adversarial: f64,
    pub l1: f64,
    pub g_loss: f64,
}

const PROB_EPS: f64 = 1e-7;

fn bce(p: f64, label: f64) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

fn mean_bce(p: &Tensor, label: f64) -> f64 {
    p.data.iter().map(|&v| bce(v as f64, label)).sum::<f64>() / p.data.len().max(1) as f64
}

/// Discriminator loss `BCE(D_real, 1) + BCE(D_fake, 0)` and generator loss
/// `BCE(D_fake, 1) + λ·mean|y − ŷ|`, each averaged over patches.
pub fn cgan_losses(
    d_real: &Tensor,
    d_fake: &Tensor,
    y: &Tensor,
    y_hat: &Tensor,
    lambda_l1: f64,
) -> Result<CganLosses> {
    if !d_real.same_shape(d_fake) {
        return Err(Error::shape(
            format!("{:?}", d_real.shape()),
            format!("{:?}", d_fake.shape()),
        ));
    }
    if !y.same_shape(y_hat) {
        return Err(Error::shape(
            format!("{:?}", y.shape()),
            format!("{:?}", y_hat.shape()),
        ));
    }
    let d_loss = mean_bce(d_real, 1.0) + mean_bce(d_fake, 0.0);
    let g_adversarial = mean_bce(d_fake, 1.0);
    let l1 = y
        .data
        .iter()
        .zip(&y_hat.data)
        .map(|(a, b)| (*a as f64 - *b as f64).abs())
        .sum::<f64>()
        / y.data.len().max(1) as f64;
    Ok(CganLosses {
        d_loss,
        g_adversarial,
        l1,
        g_loss: g_adversarial + lambda_l1 * l1,
    })
}
