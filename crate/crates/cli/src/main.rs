use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use emfplan_core::baselines::{brute_force, random_search};
use emfplan_core::dataset::{generate_dataset, random_txs, Dataset};
use emfplan_core::dqn::{self, curve_csv, CurvePoint, Policy};
use emfplan_core::gan::{ModelKind, TrainedSurrogate};
use emfplan_core::harness::{
    coverage_masks_svg, learning_curve_svg, make_predictor, map_panels_svg, run_comparison,
    run_study, run_training, ExperimentConfig, RunKey, StudyData,
};
use emfplan_core::io::{ensure_dir, load_scene, save_scene, write_bytes, write_json, write_maps};
use emfplan_core::predictor::{evaluate_placement, Predictor};
use emfplan_core::{EnvConfig, OraclePredictor, PlacementEnv, Px, SceneSpec};
use emfplan_service::{AppState, LoadedScene, PredictorMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "emfplan",
    version,
    about = "EMF-aware base-station placement toolkit"
)]
struct Cli {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Random,
    Brute,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    NpeGan,
    UnetRegressor,
    Autoencoder,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::NpeGan => ModelKind::NpeGan,
            ModelArg::UnetRegressor => ModelKind::UnetRegressor,
            ModelArg::Autoencoder => ModelKind::Autoencoder,
        }
    }
}

#[derive(clap::Args)]
struct SceneArgs {
    /// Scene manifest (JSON with a sibling building PNG).
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Generate a scene with this seed instead of loading one.
    #[arg(long, conflicts_with = "scene")]
    scene_seed: Option<u64>,
    /// Surrogate checkpoint; the oracle is used when omitted.
    #[arg(long)]
    gan: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the paired scene/map dataset.
    Dataset,
    /// Compute oracle maps for transmitters on a scene.
    Oracle {
        #[command(flatten)]
        scene: SceneArgs,
        /// Transmitter pixel as `row,col`; repeatable.
        #[arg(long = "tx", value_parser = parse_px)]
        txs: Vec<Px>,
        /// Place this many random transmitters instead.
        #[arg(long)]
        random_txs: Option<usize>,
    },
    /// Train the surrogate (or a regression baseline).
    TrainGan {
        /// Dataset directory; generated from the config when omitted.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "npe-gan")]
        model: ModelArg,
        #[arg(long)]
        filters: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        no_augmentation: bool,
    },
    /// Train the placement agent on one scene.
    TrainDqn {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value_t = 1)]
        n_bs: usize,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Score a surrogate on a dataset, or a placement on a scene.
    Evaluate {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long = "tx", value_parser = parse_px)]
        txs: Vec<Px>,
        /// Greedy placement with this policy checkpoint.
        #[arg(long)]
        dqn: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        n_bs: usize,
    },
    /// Random-search or brute-force placement.
    Baseline {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long, default_value_t = 1)]
        n_bs: usize,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Augmentation × width grid plus model comparison.
    Ablation {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Random vs DQN vs brute force on held-out scenes, with timing.
    Compare,
    /// Render figures from saved artifacts.
    Plots {
        /// Learning-curve CSV from `train-dqn` or `compare`.
        #[arg(long)]
        curve: Vec<PathBuf>,
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long = "tx", value_parser = parse_px)]
        txs: Vec<Px>,
    },
    /// Run the planning HTTP API.
    Serve {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        gan: Option<PathBuf>,
        #[arg(long)]
        dqn: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Predictor used when a request does not choose one.
        #[arg(long, value_enum, default_value = "gan")]
        mode: ModeArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Gan,
    Oracle,
}

fn parse_px(s: &str) -> Result<Px, String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected row,col, got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_scene(args: &SceneArgs, cfg: &ExperimentConfig) -> Result<SceneSpec> {
    Ok(match (&args.scene, args.scene_seed) {
        (Some(p), _) => load_scene(p).with_context(|| format!("loading scene {}", p.display()))?,
        (None, Some(s)) => cfg.scene_generator().generate(s)?,
        (None, None) => cfg.scene_generator().generate(cfg.seed)?,
    })
}

fn resolve_predictor(args: &SceneArgs, scene: &SceneSpec) -> Result<Arc<dyn Predictor>> {
    let surrogate = match &args.gan {
        Some(p) => Some(Arc::new(
            TrainedSurrogate::load(p).with_context(|| format!("loading {}", p.display()))?,
        )),
        None => None,
    };
    Ok(make_predictor(scene, surrogate.as_ref())?)
}

fn resolve_dataset(path: Option<&Path>, cfg: &ExperimentConfig) -> Result<Dataset> {
    Ok(match path {
        Some(p) => Dataset::load(p).with_context(|| format!("loading dataset {}", p.display()))?,
        None => generate_dataset(&cfg.dataset_config())?,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())?;
    Ok(())
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_curve(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    write_text(path, &curve_csv(curve))
}

fn read_curve(path: &Path) -> Result<Vec<CurvePoint>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            bail!("{}:{}: expected 4 columns", path.display(), k + 1);
        }
        out.push(CurvePoint {
            episode: f[0].parse()?,
            ret: f[1].parse()?,
            epsilon: f[2].parse()?,
            loss: if f[3].is_empty() {
                None
            } else {
                Some(f[3].parse()?)
            },
        });
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let out = ensure_dir(&cli.out)?;
    match &cli.command {
        Command::Dataset => {
            let ds = generate_dataset(&cfg.dataset_config())?;
            ds.save(&out.join("dataset"))?;
            print_json(&json!({
                "samples": ds.samples.len(),
                "skipped_scenes": ds.manifest.skipped_scenes,
                "dir": out.join("dataset"),
                "config_hash": cfg.hash(),
            }))?;
        }
        Command::Oracle {
            scene,
            txs,
            random_txs: n_random,
        } => {
            let s = resolve_scene(scene, &cfg)?;
            let txs = match n_random {
                Some(n) => random_txs(&s, *n, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?,
                None => txs.clone(),
            };
            let pred = OraclePredictor::new(&s);
            let maps = pred.predict(&txs)?;
            save_scene(&s, &out.join("scene.json"))?;
            write_maps(&out.join("maps"), &maps)?;
            let r = evaluate_placement(&pred, &txs, &cfg.env.thresholds)?;
            print_json(&json!({"tx_list": txs, "CR": r.cr, "ER": r.er, "maps": out.join("maps")}))?;
        }
        Command::TrainGan {
            dataset,
            model,
            filters,
            epochs,
            no_augmentation,
        } => {
            let mut cfg = cfg.clone();
            if let Some(e) = epochs {
                cfg.gan.train.epochs = *e;
            }
            let ds = resolve_dataset(dataset.as_deref(), &cfg)?;
            let data = StudyData::new(&ds, &cfg)?;
            let key = RunKey {
                model: (*model).into(),
                filters: filters.unwrap_or(cfg.gan.filters),
                augmentation: !no_augmentation,
                seed: cfg.seed,
            };
            let ckpt_dir = ensure_dir(&out.join("checkpoints"))?;
            let (run, _) = run_training(&cfg, &ds, &data, key, Some(&ckpt_dir))?;
            write_json(&out.join(format!("{}.json", key.file_stem())), &run)?;
            print_json(&json!({
                "checkpoint": ckpt_dir.join(format!("{}.ckpt", key.file_stem())),
                "initial_mae": run.initial.mae_mean,
                "final": run.last,
                "wall_time_s": run.wall_time_s,
            }))?;
        }
        Command::TrainDqn {
            scene,
            n_bs,
            episodes,
        } => {
            let s = resolve_scene(scene, &cfg)?;
            let pred = resolve_predictor(scene, &s)?;
            let mut dqn_cfg = cfg.dqn.clone();
            if let Some(e) = episodes {
                dqn_cfg.episodes = *e;
            }
            let mut env = PlacementEnv::new(
                pred,
                EnvConfig {
                    n_bs_budget: *n_bs,
                    ..cfg.env.clone()
                },
            )?;
            let trained = dqn::train(&mut env, &[], &dqn_cfg, cfg.seed)?;
            trained.policy.save(&out.join("policy.ckpt"))?;
            save_scene(&s, &out.join("scene.json"))?;
            write_curve(&out.join("learning_curve.csv"), &trained.curve)?;
            let placed = trained.policy.place(&mut env, &[], *n_bs)?;
            env.write_trace(&out.join("trace.jsonl"))?;
            print_json(&json!({
                "policy": out.join("policy.ckpt"),
                "placements": placed.placements,
                "CR": placed.cr,
                "ER": placed.er,
                "train_time_s": trained.wall_time_s,
            }))?;
        }
        Command::Evaluate {
            scene,
            dataset,
            txs,
            dqn: policy_path,
            n_bs,
        } => {
            if let Some(d) = dataset {
                let Some(g) = &scene.gan else {
                    bail!("--dataset needs --gan")
                };
                let model = TrainedSurrogate::load(g)?;
                let ds = Dataset::load(d)?;
                let data = StudyData::new(&ds, &cfg)?;
                let report = model.evaluate(&data.test)?;
                write_json(&out.join("evaluation.json"), &report)?;
                print_json(&report)?;
            } else if let Some(p) = policy_path {
                let s = resolve_scene(scene, &cfg)?;
                let policy = Policy::load(p)?;
                let env_cfg = EnvConfig {
                    n_bs_budget: *n_bs,
                    candidate_stride: policy.header.candidate_stride,
                    ..cfg.env.clone()
                };
                let mut env = PlacementEnv::new(resolve_predictor(scene, &s)?, env_cfg)?;
                let placed = policy.place(&mut env, txs, *n_bs)?;
                print_json(&placed)?;
            } else {
                let s = resolve_scene(scene, &cfg)?;
                let r = evaluate_placement(
                    resolve_predictor(scene, &s)?.as_ref(),
                    txs,
                    &cfg.env.thresholds,
                )?;
                print_json(&json!({"tx_list": txs, "CR": r.cr, "ER": r.er}))?;
            }
        }
        Command::Baseline {
            scene,
            method,
            n_bs,
            trials,
            stride,
        } => {
            let s = resolve_scene(scene, &cfg)?;
            let pred = resolve_predictor(scene, &s)?;
            let stride = stride.unwrap_or(cfg.env.candidate_stride);
            let t = &cfg.env.thresholds;
            let result = match method {
                Method::Random => random_search(
                    pred.as_ref(),
                    &[],
                    *n_bs,
                    stride,
                    *trials,
                    t,
                    &mut ChaCha8Rng::seed_from_u64(cfg.seed),
                )?,
                Method::Brute => brute_force(
                    pred.as_ref(),
                    &[],
                    *n_bs,
                    stride,
                    cfg.compare.bf_candidate_limit,
                    t,
                )?,
            };
            write_json(&out.join("baseline.json"), &result)?;
            print_json(&result)?;
        }
        Command::Ablation { dataset } => {
            let ds = resolve_dataset(dataset.as_deref(), &cfg)?;
            let ckpt_dir = ensure_dir(&out.join("checkpoints"))?;
            let report = run_study(&cfg, &ds, Some(&ckpt_dir), |r| {
                eprintln!(
                    "{}: MAE {:.3} dB ({:.0}s)",
                    r.key.file_stem(),
                    r.last.mae_mean,
                    r.wall_time_s
                );
            })?;
            write_json(&out.join("ablation.json"), &report)?;
            let text = report.to_text();
            write_text(&out.join("ablation.txt"), &text)?;
            println!("{text}");
        }
        Command::Compare => {
            let policies = ensure_dir(&out.join("policies"))?;
            let report = run_comparison(&cfg, Some(&policies), |c| {
                eprintln!(
                    "scene {} bs {}: random {:.4} dqn {:.4} brute {:.4}",
                    c.scene_seed, c.n_bs, c.random.cr, c.dqn.cr, c.brute.cr
                );
            })?;
            for c in &report.cases {
                write_curve(
                    &out.join(format!("curve-scene{}-bs{}.csv", c.scene_seed, c.n_bs)),
                    &c.curve,
                )?;
            }
            write_json(&out.join("compare.json"), &report)?;
            let text = report.to_text();
            write_text(&out.join("compare.txt"), &text)?;
            println!("{text}");
        }
        Command::Plots { curve, scene, txs } => {
            let mut written = Vec::new();
            for path in curve {
                let c = read_curve(path)?;
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("curve");
                let target = out.join(format!("{stem}.svg"));
                learning_curve_svg(&c, "DQN convergence", &target)?;
                written.push(target);
            }
            if scene.scene.is_some() || scene.scene_seed.is_some() {
                let s = resolve_scene(scene, &cfg)?;
                let reference = OraclePredictor::new(&s).predict(txs)?;
                let predicted = resolve_predictor(scene, &s)?.predict(txs)?;
                let maps_path = out.join("map_panels.svg");
                map_panels_svg(&reference, &predicted, txs, &maps_path)?;
                let masks_path = out.join("coverage_masks.svg");
                coverage_masks_svg(&predicted, &cfg.env.thresholds, txs, &masks_path)?;
                written.extend([maps_path, masks_path]);
            }
            if written.is_empty() {
                bail!("nothing to plot: pass --curve and/or --scene/--scene-seed");
            }
            print_json(&json!({ "files": written }))?;
        }
        Command::Serve {
            scene,
            gan,
            dqn: policy_path,
            port,
            host,
            mode,
        } => {
            let s = load_scene(scene)?;
            let surrogate = gan
                .as_deref()
                .map(TrainedSurrogate::load)
                .transpose()?
                .map(Arc::new);
            let policy = policy_path.as_deref().map(Policy::load).transpose()?;
            let mode = match mode {
                ModeArg::Gan => PredictorMode::Gan,
                ModeArg::Oracle => PredictorMode::Oracle,
            };
            let state = AppState::with_scene(mode, LoadedScene::new(s, surrogate, policy)?);
            let addr: SocketAddr = format!("{host}:{port}").parse()?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(emfplan_service::serve(addr, state))?;
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
