use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::baselines::{brute_force, random_search, SearchResult};
use crate::dqn::{self, CurvePoint};
use crate::env::{EnvConfig, PlacementEnv};
use crate::error::Result;
use crate::gan::TrainedSurrogate;
use crate::predictor::{OraclePredictor, Predictor, PredictorKind, SurrogatePredictor};
use crate::scene::SceneSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementCase {
    pub scene_seed: u64,
    pub n_bs: usize,
    pub random: SearchResult,
    pub brute: SearchResult,
    pub dqn: SearchResult,
    pub dqn_train_time_s: f64,
    /// `CR(random) ≤ CR(dqn) ≤ CR(brute)`.
    pub sandwich: bool,
    pub curve: Vec<CurvePoint>,
}

impl PlacementCase {
    pub fn dqn_to_bf(&self) -> f64 {
        if self.brute.cr > 0.0 {
            self.dqn.cr / self.brute.cr
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub n_bs: usize,
    pub bf_wall_time_s: f64,
    pub dqn_wall_time_s: f64,
    pub bf_evals: usize,
    /// Brute-force time over DQN inference time.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub config_hash: String,
    pub seed: u64,
    pub predictor: PredictorKind,
    pub cases: Vec<PlacementCase>,
    pub timing: Vec<TimingRow>,
    pub sandwich_holds: bool,
}

impl ComparisonReport {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "config {}\npredictor {:?}\n\n",
            self.config_hash, self.predictor
        );
        out.push_str(&format!(
            "{:<12} {:>4} {:>9} {:>9} {:>9} {:>9}\n",
            "scene", "BS", "random", "dqn", "brute", "sandwich"
        ));
        for c in &self.cases {
            out.push_str(&format!(
                "{:<12} {:>4} {:>9.4} {:>9.4} {:>9.4} {:>9}\n",
                c.scene_seed, c.n_bs, c.random.cr, c.dqn.cr, c.brute.cr, c.sandwich
            ));
        }
        out.push_str(&format!(
            "\n{:>4} {:>12} {:>12} {:>8} {:>10}\n",
            "BS", "brute (s)", "dqn (s)", "evals", "ratio"
        ));
        for t in &self.timing {
            out.push_str(&format!(
                "{:>4} {:>12.4} {:>12.5} {:>8} {:>10.1}\n",
                t.n_bs, t.bf_wall_time_s, t.dqn_wall_time_s, t.bf_evals, t.ratio
            ));
        }
        out
    }

    pub fn timing_for(&self, n_bs: usize) -> Option<&TimingRow> {
        self.timing.iter().find(|t| t.n_bs == n_bs)
    }
}

fn mix(a: u64, b: u64, c: u64) -> u64 {
    a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(1_000_003) ^ c
}

/// Random search, brute force and a freshly trained DQN on one scene.
pub fn compare_on_scene(
    cfg: &ExperimentConfig,
    predictor: Arc<dyn Predictor>,
    scene_seed: u64,
    n_bs: usize,
    policy_dir: Option<&Path>,
) -> Result<PlacementCase> {
    let t = cfg.env.thresholds;
    let stride = cfg.env.candidate_stride;
    let seed = mix(cfg.seed, scene_seed, n_bs as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let random = random_search(
        predictor.as_ref(),
        &[],
        n_bs,
        stride,
        cfg.compare.random_trials,
        &t,
        &mut rng,
    )?;
    let bf_stride = if n_bs == 2 {
        cfg.compare.bf_pair_stride.unwrap_or(stride)
    } else {
        stride
    };
    let brute = brute_force(
        predictor.as_ref(),
        &[],
        n_bs,
        bf_stride,
        cfg.compare.bf_candidate_limit,
        &t,
    )?;

    let env_cfg = EnvConfig {
        n_bs_budget: n_bs,
        ..cfg.env.clone()
    };
    let mut env = PlacementEnv::new(predictor, env_cfg)?;
    let trained = dqn::train(&mut env, &[], &cfg.dqn, seed)?;
    if let Some(dir) = policy_dir {
        trained
            .policy
            .save(&dir.join(format!("policy-scene{scene_seed}-bs{n_bs}.ckpt")))?;
    }
    let placed = trained.policy.place(&mut env, &[], n_bs)?;
    let dqn = SearchResult {
        placements: placed.placements,
        cr: placed.cr,
        er: placed.er,
        evals: n_bs,
        wall_time_s: placed.wall_time_s,
    };
    let sandwich = random.cr <= dqn.cr && dqn.cr <= brute.cr;
    Ok(PlacementCase {
        scene_seed,
        n_bs,
        random,
        brute,
        dqn,
        dqn_train_time_s: trained.wall_time_s,
        sandwich,
        curve: trained.curve,
    })
}

pub fn make_predictor(
    scene: &SceneSpec,
    surrogate: Option<&Arc<TrainedSurrogate>>,
) -> Result<Arc<dyn Predictor>> {
    Ok(match surrogate {
        Some(m) => Arc::new(SurrogatePredictor::new(scene, m.clone())?),
        None => Arc::new(OraclePredictor::new(scene)),
    })
}

/// Every configured scene × station count, followed by timing aggregates.
pub fn run_comparison(
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
    mut on_case: impl FnMut(&PlacementCase),
) -> Result<ComparisonReport> {
    let surrogate = match &cfg.compare.gan_checkpoint {
        Some(p) => Some(Arc::new(TrainedSurrogate::load(p)?)),
        None => None,
    };
    let generator = cfg.scene_generator();
    let mut cases = Vec::new();
    for &scene_seed in &cfg.compare.scene_seeds {
        let scene = generator.generate(scene_seed)?;
        let predictor = make_predictor(&scene, surrogate.as_ref())?;
        for &n_bs in &cfg.compare.n_bs {
            let case = compare_on_scene(cfg, predictor.clone(), scene_seed, n_bs, out_dir)?;
            log::info!(
                "scene {scene_seed} bs {n_bs}: random {:.4} dqn {:.4} brute {:.4}",
                case.random.cr,
                case.dqn.cr,
                case.brute.cr
            );
            on_case(&case);
            cases.push(case);
        }
    }
    let timing = cfg
        .compare
        .n_bs
        .iter()
        .map(|&n_bs| {
            let sel: Vec<&PlacementCase> = cases.iter().filter(|c| c.n_bs == n_bs).collect();
            let k = sel.len().max(1) as f64;
            let bf = sel.iter().map(|c| c.brute.wall_time_s).sum::<f64>() / k;
            let dq = sel.iter().map(|c| c.dqn.wall_time_s).sum::<f64>() / k;
            TimingRow {
                n_bs,
                bf_wall_time_s: bf,
                dqn_wall_time_s: dq,
                bf_evals: sel.first().map_or(0, |c| c.brute.evals),
                ratio: bf / dq.max(1e-9),
            }
        })
        .collect();
    Ok(ComparisonReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        predictor: if surrogate.is_some() {
            PredictorKind::SurrogateGan
        } else {
            PredictorKind::OracleDirect
        },
        sandwich_holds: cases.iter().all(|c| c.sandwich),
        cases,
        timing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_comparison_report() {
        let mut cfg = ExperimentConfig::default();
        cfg.dataset.grid_size = 32;
        cfg.compare.scene_seeds = vec![5];
        cfg.dqn.episodes = 6;
        cfg.dqn.batch_size = 2;
        let report = run_comparison(&cfg, None, |_| {}).unwrap();
        assert_eq!(report.cases.len(), 2);
        assert_eq!(report.timing.len(), 2);
        let two = &report.cases[1];
        assert_eq!(two.dqn.placements.len(), 2);
        let n = report.cases[0].brute.evals;
        assert_eq!(two.brute.evals, n * (n - 1) / 2);
        for c in &report.cases {
            assert!(c.random.cr <= c.brute.cr + 1e-12);
        }
        assert!(report.to_text().contains("ratio"));
    }
}
