use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::median;
use crate::dataset::{augment, split, Dataset, Sample, Variant};
use crate::error::Result;
use crate::gan::{train_gan, train_regressor, EvalReport, ModelKind, TrainedSurrogate};

/// Train/test sides shared by every run of a study. The test side always
/// holds the augmented variants of held-out base samples.
#[derive(Debug, Clone)]
pub struct StudyData {
    pub train_augmented: Vec<Sample>,
    pub train_original: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl StudyData {
    pub fn new(dataset: &Dataset, cfg: &ExperimentConfig) -> Result<Self> {
        let all = augment(&dataset.samples, cfg.dataset.include_rot180);
        let (train_augmented, test) = split(all, cfg.dataset.val_ratio, cfg.seed)?;
        let train_original = train_augmented
            .iter()
            .filter(|s| s.variant == Variant::Original)
            .cloned()
            .collect();
        Ok(StudyData {
            train_augmented,
            train_original,
            test,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunKey {
    pub model: ModelKind,
    pub filters: usize,
    pub augmentation: bool,
    pub seed: u64,
}

impl RunKey {
    pub fn file_stem(&self) -> String {
        let aug = if self.augmentation { "aug" } else { "noaug" };
        format!(
            "{}-f{}-{aug}-s{}",
            self.model.label(),
            self.filters,
            self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRun {
    pub key: RunKey,
    pub initial: EvalReport,
    #[serde(rename = "final")]
    pub last: EvalReport,
    pub wall_time_s: f64,
}

/// Train one model and score it on the shared test side.
pub fn run_training(
    cfg: &ExperimentConfig,
    dataset: &Dataset,
    data: &StudyData,
    key: RunKey,
    checkpoint_dir: Option<&Path>,
) -> Result<(TrainingRun, TrainedSurrogate)> {
    let start = Instant::now();
    let spec = cfg.generator_spec(key.filters);
    let train = if key.augmentation {
        &data.train_augmented
    } else {
        &data.train_original
    };
    let ckpt = checkpoint_dir.map(|d| d.join(format!("{}.ckpt", key.file_stem())));
    let enc = dataset.encoding();
    let model = match key.model {
        ModelKind::NpeGan => train_gan(
            train,
            &data.test,
            enc,
            &spec,
            &cfg.gan.train,
            key.seed,
            ckpt.as_deref(),
        )?,
        kind => train_regressor(
            kind,
            train,
            &data.test,
            enc,
            &spec,
            &cfg.gan.train,
            key.seed,
            ckpt.as_deref(),
        )?,
    };
    let initial = match model.header.initial_eval {
        Some(e) => e,
        None => TrainedSurrogate::untrained(key.model, dataset.grid_size(), &spec, key.seed)?
            .evaluate(&data.test)?,
    };
    let last = match model.final_eval() {
        Some(e)
            if model
                .header
                .history
                .last()
                .is_some_and(|h| h.eval.is_some()) =>
        {
            e
        }
        _ => model.evaluate(&data.test)?,
    };
    let run = TrainingRun {
        key,
        initial,
        last,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((run, model))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricMedians {
    pub mae: f64,
    pub rmse: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub model: ModelKind,
    pub filters: usize,
    pub augmentation: bool,
    pub seeds: Vec<u64>,
    pub rss: MetricMedians,
    pub exposure: MetricMedians,
    /// Median over seeds of the mean channel MAE.
    pub mae_mean: f64,
}

fn summarize(runs: &[&TrainingRun]) -> CellSummary {
    let k = runs[0].key;
    let med = |f: &dyn Fn(&EvalReport) -> f64| {
        median(&runs.iter().map(|r| f(&r.last)).collect::<Vec<_>>())
    };
    CellSummary {
        model: k.model,
        filters: k.filters,
        augmentation: k.augmentation,
        seeds: runs.iter().map(|r| r.key.seed).collect(),
        rss: MetricMedians {
            mae: med(&|e| e.rss.mae),
            rmse: med(&|e| e.rss.rmse),
            ssim: med(&|e| e.rss.ssim),
        },
        exposure: MetricMedians {
            mae: med(&|e| e.exposure.mae),
            rmse: med(&|e| e.exposure.rmse),
            ssim: med(&|e| e.exposure.ssim),
        },
        mae_mean: med(&|e| e.mae_mean),
    }
}

/// Augmentation × filter-count grid for the cGAN plus, optionally, the
/// regression baselines at the default width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub runs: Vec<TrainingRun>,
    pub ablation: Vec<CellSummary>,
    pub models: Vec<CellSummary>,
}

impl StudyReport {
    pub fn cell(&self, filters: usize, augmentation: bool) -> Option<&CellSummary> {
        self.ablation
            .iter()
            .find(|c| c.filters == filters && c.augmentation == augmentation)
    }

    pub fn model(&self, kind: ModelKind) -> Option<&CellSummary> {
        self.models.iter().find(|c| c.model == kind)
    }

    /// Fixed-width text tables, one block per channel.
    pub fn to_text(&self) -> String {
        let mut out = format!("config {}\nseeds {:?}\n", self.config_hash, self.seeds);
        let row = |out: &mut String, label: String, m: &MetricMedians| {
            let _ = writeln!(
                out,
                "{label:<28} {:>8.3} {:>8.3} {:>8.4}",
                m.mae, m.rmse, m.ssim
            );
        };
        for (name, pick) in [("RSS", 0), ("Exposure", 1)] {
            let metric = |c: &CellSummary| if pick == 0 { c.rss } else { c.exposure };
            let _ = writeln!(
                out,
                "\n{name} (dB, median over seeds)\n{:<28} {:>8} {:>8} {:>8}",
                "cell", "MAE", "RMSE", "SSIM"
            );
            for c in &self.ablation {
                let aug = if c.augmentation { "aug" } else { "no-aug" };
                row(
                    &mut out,
                    format!("npe-gan {aug} f{}", c.filters),
                    &metric(c),
                );
            }
            for c in &self.models {
                row(
                    &mut out,
                    format!("{} f{}", c.model.label(), c.filters),
                    &metric(c),
                );
            }
        }
        out
    }
}

/// Run every cell of the study. `on_run` sees each finished run.
pub fn run_study(
    cfg: &ExperimentConfig,
    dataset: &Dataset,
    checkpoint_dir: Option<&Path>,
    mut on_run: impl FnMut(&TrainingRun),
) -> Result<StudyReport> {
    let data = StudyData::new(dataset, cfg)?;
    let mut keys = Vec::new();
    for &augmentation in &[true, false] {
        for &filters in &cfg.ablation.filters {
            for &seed in &cfg.ablation.seeds {
                keys.push(RunKey {
                    model: ModelKind::NpeGan,
                    filters,
                    augmentation,
                    seed,
                });
            }
        }
    }
    if cfg.ablation.compare_models {
        for model in [ModelKind::UnetRegressor, ModelKind::Autoencoder] {
            for &seed in &cfg.ablation.seeds {
                keys.push(RunKey {
                    model,
                    filters: cfg.gan.filters,
                    augmentation: true,
                    seed,
                });
            }
        }
    }
    let mut runs = Vec::with_capacity(keys.len());
    for key in keys {
        let (run, _) = run_training(cfg, dataset, &data, key, checkpoint_dir)?;
        log::info!(
            "{} final MAE {:.3} dB in {:.1}s",
            key.file_stem(),
            run.last.mae_mean,
            run.wall_time_s
        );
        on_run(&run);
        runs.push(run);
    }
    let group = |pred: &dyn Fn(&RunKey) -> bool| -> Vec<&TrainingRun> {
        runs.iter().filter(|r| pred(&r.key)).collect()
    };
    let mut ablation = Vec::new();
    for &augmentation in &[true, false] {
        for &filters in &cfg.ablation.filters {
            let g = group(&|k| {
                k.model == ModelKind::NpeGan
                    && k.filters == filters
                    && k.augmentation == augmentation
            });
            ablation.push(summarize(&g));
        }
    }
    let mut models = Vec::new();
    if cfg.ablation.compare_models {
        for model in [
            ModelKind::NpeGan,
            ModelKind::UnetRegressor,
            ModelKind::Autoencoder,
        ] {
            let g = group(&|k| k.model == model && k.filters == cfg.gan.filters && k.augmentation);
            if !g.is_empty() {
                models.push(summarize(&g));
            }
        }
    }
    Ok(StudyReport {
        config_hash: cfg.hash(),
        seeds: cfg.ablation.seeds.clone(),
        runs,
        ablation,
        models,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_dataset;

    #[test]
    fn tiny_study_has_full_structure() {
        let mut cfg = ExperimentConfig::default();
        cfg.dataset.n_samples = 12;
        cfg.dataset.grid_size = 32;
        cfg.dataset.val_ratio = 0.25;
        cfg.gan.train.epochs = 1;
        cfg.ablation.seeds = vec![0];
        let ds = generate_dataset(&cfg.dataset_config()).unwrap();
        let mut seen = 0;
        let report = run_study(&cfg, &ds, None, |_| seen += 1).unwrap();
        assert_eq!(seen, 8);
        assert_eq!(report.ablation.len(), 6);
        assert_eq!(report.models.len(), 3);
        assert!(report.cell(256, true).is_some());
        let text = report.to_text();
        assert!(text.contains("RSS") && text.contains("Exposure") && text.contains("autoencoder"));
        let json = serde_json::to_string(&report).unwrap();
        assert_eq!(serde_json::from_str::<StudyReport>(&json).unwrap(), report);
    }
}
