use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    build_model, DiscriminatorSpec, GeneratorSpec, MapModel, ModelKind, PatchDiscriminator,
};
use crate::dataset::{decode_maps, encode_input, Channel, EncodingSpec, Sample};
use crate::error::{Error, Result};
use crate::grid::Px;
use crate::io::Checkpoint;
use crate::metrics;
use crate::nn::{concat_channels, sigmoid, split_channels, Adam, Module, Sgd, Tensor};
use crate::oracle::RadioMaps;
use crate::scene::SceneSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanTrainConfig {
    pub epochs: usize,
    pub lambda_l1: f64,
    pub batch_size: usize,
    /// Adam step size for the generator (or the regressor).
    pub g_lr: f32,
    pub g_beta1: f32,
    /// Plain SGD step size for the discriminator.
    pub d_lr: f32,
    /// Stop after this many optimizer steps even if epochs remain.
    pub max_steps: Option<usize>,
    /// Evaluate on the held-out set every this many epochs; 0 disables.
    pub eval_every: usize,
}

impl Default for GanTrainConfig {
    fn default() -> Self {
        GanTrainConfig {
            epochs: 100,
            lambda_l1: 100.0,
            batch_size: 16,
            g_lr: 2e-4,
            g_beta1: 0.5,
            d_lr: 0.01,
            max_steps: None,
            eval_every: 1,
        }
    }
}

impl GanTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "epochs and batch_size must be >= 1".into(),
            ));
        }
        if !(self.lambda_l1 >= 0.0) || !(self.g_lr > 0.0) || !(self.d_lr > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "invalid training config {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub ssim: f64,
    /// Dynamic range used for SSIM.
    pub ssim_range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rss: ChannelMetrics,
    pub exposure: ChannelMetrics,
    /// Mean of the two channel MAEs (dB).
    pub mae_mean: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub steps: usize,
    pub g_loss: f64,
    pub d_loss: Option<f64>,
    pub l1: f64,
    pub eval: Option<EvalReport>,
}

/// Everything needed to rebuild a trained model, stored as the checkpoint header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateHeader {
    pub kind: ModelKind,
    pub grid_size: usize,
    pub spec: GeneratorSpec,
    pub discriminator: Option<DiscriminatorSpec>,
    pub config: GanTrainConfig,
    pub seed: u64,
    pub encoding: EncodingSpec,
    pub initial_eval: Option<EvalReport>,
    pub history: Vec<EpochMetrics>,
}

pub struct TrainedSurrogate {
    pub header: SurrogateHeader,
    pub model: Box<dyn MapModel>,
    pub discriminator: Option<PatchDiscriminator>,
}

impl std::fmt::Debug for TrainedSurrogate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrainedSurrogate")
            .field("header", &self.header)
            .finish_non_exhaustive()
    }
}

const EVAL_BATCH: usize = 16;

fn batch_forward(model: &dyn MapModel, inputs: &[&Tensor]) -> Tensor {
    model.forward(&Tensor::stack(inputs))
}

fn channel_metrics(acc: &[(f64, f64, f64)], range: f64) -> ChannelMetrics {
    let n = acc.len().max(1) as f64;
    ChannelMetrics {
        mae: acc.iter().map(|a| a.0).sum::<f64>() / n,
        rmse: acc.iter().map(|a| a.1).sum::<f64>() / n,
        ssim: acc.iter().map(|a| a.2).sum::<f64>() / n,
        ssim_range: range,
    }
}

/// MAE/RMSE over outdoor pixels and SSIM over whole maps, all in dB and
/// averaged over samples.
pub fn evaluate_model(
    model: &dyn MapModel,
    samples: &[Sample],
    enc: &EncodingSpec,
) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("evaluation set is empty".into()));
    }
    let n = samples[0].grid_size();
    let mut rss = Vec::with_capacity(samples.len());
    let mut exp = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(EVAL_BATCH) {
        let pred = batch_forward(model, &chunk.iter().map(|s| &s.input).collect::<Vec<_>>());
        for (i, s) in chunk.iter().enumerate() {
            let p = decode_maps(pred.sample(i), s.input.sample(0), n, enc)?;
            let r = decode_maps(s.target.sample(0), s.input.sample(0), n, enc)?;
            let m = &r.valid_mask;
            rss.push((
                metrics::mae(&r.rss_dbm, &p.rss_dbm, m)?,
                metrics::rmse(&r.rss_dbm, &p.rss_dbm, m)?,
                metrics::ssim(&r.rss_dbm, &p.rss_dbm, enc.span(Channel::Rss))?,
            ));
            exp.push((
                metrics::mae(&r.exposure_dbuv, &p.exposure_dbuv, m)?,
                metrics::rmse(&r.exposure_dbuv, &p.exposure_dbuv, m)?,
                metrics::ssim(
                    &r.exposure_dbuv,
                    &p.exposure_dbuv,
                    enc.span(Channel::Exposure),
                )?,
            ));
        }
    }
    let rss = channel_metrics(&rss, enc.span(Channel::Rss));
    let exposure = channel_metrics(&exp, enc.span(Channel::Exposure));
    Ok(EvalReport {
        rss,
        exposure,
        mae_mean: 0.5 * (rss.mae + exposure.mae),
        n_samples: samples.len(),
    })
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Mean BCE of logits against `label` and its gradient w.r.t. the logits.
fn bce_logits(logits: &Tensor, label: f32) -> (f64, Tensor) {
    let count = logits.data.len() as f32;
    let loss = logits
        .data
        .iter()
        .map(|&l| {
            if label > 0.5 {
                softplus(-l as f64)
            } else {
                softplus(l as f64)
            }
        })
        .sum::<f64>()
        / count as f64;
    (loss, logits.map(|l| (sigmoid(l) - label) / count))
}

struct StepLosses {
    g_loss: f64,
    d_loss: Option<f64>,
    l1: f64,
}

#[allow(clippy::too_many_arguments)]
fn train_step(
    model: &mut dyn MapModel,
    disc: Option<&mut PatchDiscriminator>,
    g_opt: &mut Adam,
    d_opt: &mut Sgd,
    x: &Tensor,
    y: &Tensor,
    lambda_l1: f64,
    rng: &mut ChaCha8Rng,
) -> StepLosses {
    let fake = model.forward_train(x, rng);
    let numel = fake.data.len() as f32;
    let l1 = fake
        .data
        .iter()
        .zip(&y.data)
        .map(|(a, b)| (a - b).abs() as f64)
        .sum::<f64>()
        / numel as f64;
    let lam = lambda_l1 as f32;
    let mut dfake = Tensor::from_vec(
        fake.n,
        fake.c,
        fake.h,
        fake.w,
        fake.data
            .iter()
            .zip(&y.data)
            .map(|(a, b)| lam * (a - b).signum() * ((a != b) as u8 as f32) / numel)
            .collect(),
    );
    let (g_loss, d_loss) = match disc {
        Some(d) => {
            let real_in = concat_channels(x, y);
            let fake_in = concat_channels(x, &fake);
            let (l_real, g_real) = bce_logits(&d.logits_train(&real_in, rng), 1.0);
            d.backward(&g_real);
            let (l_fake, g_fake) = bce_logits(&d.logits_train(&fake_in, rng), 0.0);
            d.backward(&g_fake);
            d_opt.step(d.params_mut());

            let (g_adv, g_logits) = bce_logits(&d.logits_train(&fake_in, rng), 1.0);
            let dinput = d.backward(&g_logits);
            d.zero_grad();
            let (_, dadv) = split_channels(&dinput, x.c);
            crate::nn::add_assign(&mut dfake, &dadv);
            (g_adv + lambda_l1 * l1, Some(l_real + l_fake))
        }
        None => (l1, None),
    };
    model.backward(&dfake);
    g_opt.step(model.params_mut());
    StepLosses { g_loss, d_loss, l1 }
}

/// Shared loop: adversarial + L1 when a discriminator is given, plain L1 otherwise.
#[allow(clippy::too_many_arguments)]
fn fit(
    header: &mut SurrogateHeader,
    model: &mut dyn MapModel,
    mut disc: Option<&mut PatchDiscriminator>,
    train: &[Sample],
    test: &[Sample],
    rng: &mut ChaCha8Rng,
    mut on_epoch: impl FnMut(&SurrogateHeader, &dyn MapModel, Option<&PatchDiscriminator>) -> Result<()>,
) -> Result<()> {
    let cfg = header.config.clone();
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    let enc = header.encoding;
    if cfg.eval_every > 0 && !test.is_empty() {
        header.initial_eval = Some(evaluate_model(model, test, &enc)?);
    }
    let mut g_opt = Adam::with_betas(cfg.g_lr, cfg.g_beta1, 0.999);
    let mut d_opt = Sgd::new(cfg.d_lr);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut steps = 0usize;
    'epochs: for epoch in 1..=cfg.epochs {
        order.shuffle(rng);
        let (mut g_sum, mut d_sum, mut l1_sum, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            // A lone sample gives degenerate batch statistics.
            if chunk.len() < 2 && train.len() >= 2 {
                continue;
            }
            let x = Tensor::stack(&chunk.iter().map(|&i| &train[i].input).collect::<Vec<_>>());
            let y = Tensor::stack(&chunk.iter().map(|&i| &train[i].target).collect::<Vec<_>>());
            let l = train_step(
                model,
                disc.as_deref_mut(),
                &mut g_opt,
                &mut d_opt,
                &x,
                &y,
                cfg.lambda_l1,
                rng,
            );
            if !l.g_loss.is_finite() || l.d_loss.is_some_and(|d| !d.is_finite()) {
                return Err(Error::Diverged(format!(
                    "non-finite loss at epoch {epoch}, step {steps}"
                )));
            }
            g_sum += l.g_loss;
            d_sum += l.d_loss.unwrap_or(0.0);
            l1_sum += l.l1;
            batches += 1;
            steps += 1;
            if cfg.max_steps.is_some_and(|m| steps >= m) {
                break;
            }
        }
        let b = batches.max(1) as f64;
        let eval = if cfg.eval_every > 0 && epoch % cfg.eval_every == 0 && !test.is_empty() {
            Some(evaluate_model(model, test, &enc)?)
        } else {
            None
        };
        header.history.push(EpochMetrics {
            epoch,
            steps,
            g_loss: g_sum / b,
            d_loss: disc.is_some().then_some(d_sum / b),
            l1: l1_sum / b,
            eval,
        });
        log::debug!(
            "{} epoch {epoch}: g_loss {:.4} l1 {:.4}",
            header.kind.label(),
            g_sum / b,
            l1_sum / b
        );
        on_epoch(header, model, disc.as_deref())?;
        if cfg.max_steps.is_some_and(|m| steps >= m) {
            break 'epochs;
        }
    }
    Ok(())
}

fn rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let init = ChaCha8Rng::seed_from_u64(seed);
    let mut train = ChaCha8Rng::seed_from_u64(seed);
    train.set_stream(1);
    (init, train)
}

fn check_grid(spec: &GeneratorSpec, train: &[Sample]) -> Result<usize> {
    let n = train
        .first()
        .map(Sample::grid_size)
        .ok_or_else(|| Error::InvalidConfig("training set is empty".into()))?;
    spec.check_grid(n)?;
    Ok(n)
}

/// Train the conditional GAN. When `checkpoint` is given the archive is
/// rewritten after every epoch.
pub fn train_gan(
    train: &[Sample],
    test: &[Sample],
    encoding: &EncodingSpec,
    spec: &GeneratorSpec,
    config: &GanTrainConfig,
    seed: u64,
    checkpoint: Option<&Path>,
) -> Result<TrainedSurrogate> {
    let n = check_grid(spec, train)?;
    let (mut init, mut rng) = rngs(seed);
    let mut model = build_model(ModelKind::NpeGan, spec, &mut init)?;
    let dspec = DiscriminatorSpec {
        base_filters: spec.base_filters,
        width_divisor: spec.width_divisor,
        max_multiplier: spec.max_multiplier,
        in_channels: spec.in_channels + spec.out_channels,
        ..DiscriminatorSpec::default()
    };
    if dspec.output_size(n).is_none() {
        return Err(Error::InvalidConfig(format!(
            "grid {n} too small for the patch discriminator"
        )));
    }
    let mut disc = PatchDiscriminator::new(dspec.clone(), &mut init);
    let mut header = SurrogateHeader {
        kind: ModelKind::NpeGan,
        grid_size: n,
        spec: spec.clone(),
        discriminator: Some(dspec),
        config: config.clone(),
        seed,
        encoding: *encoding,
        initial_eval: None,
        history: Vec::new(),
    };
    fit(
        &mut header,
        model.as_mut(),
        Some(&mut disc),
        train,
        test,
        &mut rng,
        |h, m, d| match checkpoint {
            Some(path) => to_checkpoint(h, m, d)?.save(path),
            None => Ok(()),
        },
    )?;
    Ok(TrainedSurrogate {
        header,
        model,
        discriminator: Some(disc),
    })
}

/// Train a regression baseline with the L1 loss alone.
pub fn train_regressor(
    kind: ModelKind,
    train: &[Sample],
    test: &[Sample],
    encoding: &EncodingSpec,
    spec: &GeneratorSpec,
    config: &GanTrainConfig,
    seed: u64,
    checkpoint: Option<&Path>,
) -> Result<TrainedSurrogate> {
    let n = check_grid(spec, train)?;
    let (mut init, mut rng) = rngs(seed);
    let mut model = build_model(kind, spec, &mut init)?;
    let mut header = SurrogateHeader {
        kind,
        grid_size: n,
        spec: spec.clone(),
        discriminator: None,
        config: config.clone(),
        seed,
        encoding: *encoding,
        initial_eval: None,
        history: Vec::new(),
    };
    fit(
        &mut header,
        model.as_mut(),
        None,
        train,
        test,
        &mut rng,
        |h, m, _| match checkpoint {
            Some(path) => to_checkpoint(h, m, None)?.save(path),
            None => Ok(()),
        },
    )?;
    Ok(TrainedSurrogate {
        header,
        model,
        discriminator: None,
    })
}

fn to_checkpoint(
    header: &SurrogateHeader,
    model: &dyn MapModel,
    disc: Option<&PatchDiscriminator>,
) -> Result<Checkpoint> {
    let mut ck = Checkpoint::new(serde_json::to_value(header)?);
    ck.push("model", model.export_state());
    if let Some(d) = disc {
        ck.push("discriminator", d.export_state());
    }
    Ok(ck)
}

impl TrainedSurrogate {
    /// An untrained model, mostly useful for tests and latency probes.
    pub fn untrained(
        kind: ModelKind,
        grid_size: usize,
        spec: &GeneratorSpec,
        seed: u64,
    ) -> Result<Self> {
        spec.check_grid(grid_size)?;
        let model = build_model(kind, spec, &mut ChaCha8Rng::seed_from_u64(seed))?;
        let header = SurrogateHeader {
            kind,
            grid_size,
            spec: spec.clone(),
            discriminator: None,
            config: GanTrainConfig::default(),
            seed,
            encoding: EncodingSpec::default(),
            initial_eval: None,
            history: Vec::new(),
        };
        Ok(TrainedSurrogate {
            header,
            model,
            discriminator: None,
        })
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        to_checkpoint(
            &self.header,
            self.model.as_ref(),
            self.discriminator.as_ref(),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint()?.save(path)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let header: SurrogateHeader = serde_json::from_value(ck.header.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = build_model(header.kind, &header.spec, &mut rng)?;
        model
            .import_state(ck.blob("model")?)
            .map_err(Error::Checkpoint)?;
        let discriminator = match (&header.discriminator, ck.blob("discriminator")) {
            (Some(spec), Ok(state)) => {
                let mut d = PatchDiscriminator::new(spec.clone(), &mut rng);
                d.import_state(state).map_err(Error::Checkpoint)?;
                Some(d)
            }
            _ => None,
        };
        Ok(TrainedSurrogate {
            header,
            model,
            discriminator,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    pub fn final_eval(&self) -> Option<EvalReport> {
        self.header.history.iter().rev().find_map(|e| e.eval)
    }

    pub fn evaluate(&self, samples: &[Sample]) -> Result<EvalReport> {
        evaluate_model(self.model.as_ref(), samples, &self.header.encoding)
    }

    /// Predict maps for a batch of `[2, L, L]` conditions in one forward pass.
    pub fn predict_batch(&self, inputs: &[Tensor]) -> Result<Vec<RadioMaps>> {
        let n = self.header.grid_size;
        for t in inputs {
            if t.shape() != [1, 2, n, n] {
                return Err(Error::shape(
                    format!("[1, 2, {n}, {n}]"),
                    format!("{:?}", t.shape()),
                ));
            }
        }
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let pred = self
            .model
            .forward(&Tensor::stack(&inputs.iter().collect::<Vec<_>>()));
        (0..inputs.len())
            .map(|i| {
                decode_maps(
                    pred.sample(i),
                    inputs[i].sample(0),
                    n,
                    &self.header.encoding,
                )
            })
            .collect()
    }

    /// Predicted maps for `scene` with transmitters at `txs`.
    pub fn predict_scene(&self, scene: &SceneSpec, txs: &[Px]) -> Result<RadioMaps> {
        if scene.grid_size() != self.header.grid_size {
            return Err(Error::shape(self.header.grid_size, scene.grid_size()));
        }
        let mut out = self.predict_batch(&[encode_input(scene, txs)])?;
        Ok(out.pop().expect("one prediction"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{augment, generate_dataset, split, DatasetConfig};
    use crate::scene::SceneGenerator;

    fn tiny(n_samples: usize) -> (Vec<Sample>, EncodingSpec) {
        let mut cfg = DatasetConfig::toy(n_samples, 11);
        cfg.generator = SceneGenerator::for_grid(32);
        let ds = generate_dataset(&cfg).unwrap();
        (ds.samples, cfg.encoding)
    }

    fn fast_config() -> GanTrainConfig {
        GanTrainConfig {
            epochs: 2,
            batch_size: 4,
            eval_every: 1,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_loss_trace() {
        let (samples, enc) = tiny(8);
        let spec = GeneratorSpec::for_grid(32, 128);
        let run = || {
            train_gan(
                &samples,
                &samples[..2],
                &enc,
                &spec,
                &fast_config(),
                4,
                None,
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.header.history, b.header.history);
        assert!(a.header.initial_eval.is_some());
        assert!(a
            .header
            .history
            .iter()
            .all(|e| e.d_loss.is_some() && e.eval.is_some()));
    }

    #[test]
    fn checkpoint_round_trip_predicts_identically() {
        let (samples, enc) = tiny(6);
        let spec = GeneratorSpec::for_grid(32, 128);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.ckpt");
        let t = train_gan(
            &samples,
            &samples[..2],
            &enc,
            &spec,
            &fast_config(),
            1,
            Some(&path),
        )
        .unwrap();
        let back = TrainedSurrogate::load(&path).unwrap();
        assert_eq!(back.header, t.header);
        let inputs: Vec<Tensor> = samples.iter().map(|s| s.input.clone()).collect();
        let a = t.predict_batch(&inputs).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a, back.predict_batch(&inputs).unwrap());
        assert_eq!(a[0].rss_dbm.size(), 32);
        assert!(t.predict_batch(&[Tensor::zeros(1, 2, 8, 8)]).is_err());
    }

    #[test]
    fn regressors_train_and_split_cleanly() {
        let (samples, enc) = tiny(10);
        let (train, test) = split(augment(&samples, false), 0.2, 0).unwrap();
        let spec = GeneratorSpec::for_grid(32, 256);
        for kind in [ModelKind::UnetRegressor, ModelKind::Autoencoder] {
            let t =
                train_regressor(kind, &train, &test, &enc, &spec, &fast_config(), 0, None).unwrap();
            assert_eq!(t.header.kind, kind);
            assert!(t.header.history.iter().all(|e| e.d_loss.is_none()));
            assert!(t.final_eval().unwrap().mae_mean.is_finite());
        }
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let (_, enc) = tiny(1);
        let spec = GeneratorSpec::for_grid(32, 128);
        assert!(train_gan(&[], &[], &enc, &spec, &fast_config(), 0, None).is_err());
    }
}
