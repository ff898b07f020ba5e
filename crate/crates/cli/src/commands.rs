use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use navtl::env::{render as render_obs, sweep_move, AgentPose, FloorPlan, Preset};
use navtl::eval::{
    checkpoint_id, compare_train_types, evaluate_msf as eval_msf, export_q_heatmap, spawn_poses, EvalReport,
    EvalSettings,
};
use navtl::nn::accounting::percent_truncated;
use navtl::nn::{build_reference_network, count_flops, load_checkpoint, save_checkpoint, Network, NnError, TrainType};
use navtl::trainer::{argmax, desk_spec, TrainOutcome};

use crate::config::RunConfig;
use crate::output::{pgm, OutDir, CONFIG_SNAPSHOT};
use crate::{usage, Common};

pub const PLAN_EXT: &str = "plan";

pub fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
    }
    Ok(cfg)
}

pub fn parse_train_type(s: &str) -> Result<TrainType> {
    s.parse().map_err(|e: NnError| usage(e.to_string()))
}

pub fn load_plan(path: &Path) -> Result<FloorPlan> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("floor plan {}: {e}", path.display())))?;
    FloorPlan::from_text(&text).map_err(|e| usage(format!("floor plan {}: {e}", path.display())))
}

pub fn load_network(path: &Path, cfg: &RunConfig) -> Result<Network> {
    if !path.is_file() {
        return Err(usage(format!("checkpoint {} not found", path.display())));
    }
    let spec = desk_spec(&cfg.train)?;
    load_checkpoint(path, &spec).map_err(|e| match e {
        NnError::Io(_) => anyhow::Error::new(e).context(format!("reading {}", path.display())),
        other => usage(format!("checkpoint {}: {other}", path.display())),
    })
}

#[derive(Serialize)]
pub struct Summary {
    pub steps: u64,
    pub gradient_steps: u64,
    pub stop_reason: String,
    pub episodes: usize,
    pub final_moving_avg: f64,
    pub total_reward: f64,
    pub checkpoint_id: String,
}

impl Summary {
    pub fn of<S>(out: &TrainOutcome<S>) -> Self {
        Self {
            steps: out.steps,
            gradient_steps: out.gradient_steps,
            stop_reason: out.stop_reason.to_string(),
            episodes: out.log.complete_episodes(),
            final_moving_avg: out.log.moving_avg(),
            total_reward: out.total_reward,
            checkpoint_id: checkpoint_id(&out.network),
        }
    }
}

/// Checkpoint, return log, summary and config snapshot of one training run.
pub fn write_training<S>(dir: &OutDir, ckpt: &str, out: &TrainOutcome<S>, cfg: &RunConfig) -> Result<()> {
    save_checkpoint(&out.network, &dir.path(ckpt)).with_context(|| format!("saving {ckpt}"))?;
    dir.write("returns.csv", out.log.to_csv())?;
    dir.write("summary.toml", toml::to_string(&Summary::of(out))?)?;
    dir.write(CONFIG_SNAPSHOT, cfg.to_toml())?;
    Ok(())
}

pub fn gen_env(preset: &str, count: usize, seed: u64, out: &Path) -> Result<()> {
    if count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    let jobs: Vec<(Preset, u64, String)> = if preset == "meta" {
        if count > navtl::env::presets::META_COUNT {
            return Err(usage(format!("there are only {} meta presets", navtl::env::presets::META_COUNT)));
        }
        (0..count).map(|k| (Preset::Meta(k), seed, Preset::Meta(k).name())).collect()
    } else {
        let p: Preset = preset.parse().map_err(|e: navtl::env::EnvError| usage(e.to_string()))?;
        if count == 1 {
            vec![(p, seed, p.name())]
        } else {
            (0..count).map(|i| (p, seed + i as u64, format!("{}-{i}", p.name()))).collect()
        }
    };
    let dir = OutDir::create(out)?;
    for (p, s, file) in jobs {
        let plan = p.generate(s)?;
        dir.write(&format!("{file}.{PLAN_EXT}"), plan.to_text())?;
    }
    dir.write_manifest()
}

/// Floor plans in `dir`, sorted by file name.
pub fn load_library(dir: &Path) -> Result<Vec<FloorPlan>> {
    let entries = std::fs::read_dir(dir).map_err(|e| usage(format!("environment directory {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == PLAN_EXT))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(usage(format!("no .{PLAN_EXT} files in {}", dir.display())));
    }
    paths.iter().map(|p| load_plan(p)).collect()
}

pub fn train_offline(common: &Common, envs: &Path, steps: Option<u64>) -> Result<()> {
    let mut cfg = resolve(common)?;
    if let Some(s) = steps {
        cfg.train.max_steps = s;
    }
    cfg.validate()?;
    let library = load_library(envs)?;
    let out = navtl::trainer::train_offline(&library, &cfg.train)?;
    let dir = OutDir::create(&common.out)?;
    write_training(&dir, "meta.ckpt", &out, &cfg)?;
    println!(
        "{} steps, {} episodes, moving average {:.3}",
        out.steps,
        out.log.complete_episodes(),
        out.log.moving_avg()
    );
    dir.write_manifest()
}

pub fn train_online(
    common: &Common,
    env: &Path,
    init: &Path,
    baseline: Option<f64>,
    train_type: Option<&str>,
    steps: Option<u64>,
) -> Result<()> {
    let mut cfg = resolve(common)?;
    if let Some(tt) = train_type {
        cfg.train.train_type = parse_train_type(tt)?;
    }
    if let Some(s) = steps {
        cfg.train.max_steps = s;
    }
    cfg.validate()?;
    let plan = load_plan(env)?;
    let meta = load_network(init, &cfg)?;
    let out = navtl::trainer::train_online(&plan, &meta, &cfg.train, baseline)?;
    let dir = OutDir::create(&common.out)?;
    write_training(&dir, "online.ckpt", &out, &cfg)?;
    println!(
        "{}: {} after {} steps, moving average {:.3}",
        cfg.train.train_type,
        out.stop_reason,
        out.steps,
        out.log.moving_avg()
    );
    dir.write_manifest()
}

pub fn eval_settings(cfg: &RunConfig) -> EvalSettings {
    EvalSettings {
        n_spawns: cfg.eval.n_spawns,
        seed: cfg.train.seed,
        cap_m: cfg.eval.cap_m,
        d_crash: cfg.train.d_crash,
    }
}

pub fn evaluate(plan: &FloorPlan, net: &Network, cfg: &RunConfig) -> Result<EvalReport> {
    Ok(eval_msf(plan, net, &cfg.train.action, &cfg.train.camera, &eval_settings(cfg))?)
}

/// `TYPE=PATH` or a bare path, which is labelled e2e.
fn parse_ckpt_arg(arg: &str) -> Result<(TrainType, PathBuf)> {
    match arg.split_once('=') {
        Some((tt, path)) => Ok((parse_train_type(tt)?, PathBuf::from(path))),
        None => Ok((TrainType::E2e, PathBuf::from(arg))),
    }
}

pub fn evaluate_msf(
    common: &Common,
    env: &Path,
    ckpts: &[String],
    spawns: Option<usize>,
    cap: Option<f64>,
) -> Result<()> {
    let mut cfg = resolve(common)?;
    if let Some(n) = spawns {
        cfg.eval.n_spawns = n;
    }
    if let Some(c) = cap {
        cfg.eval.cap_m = c;
    }
    cfg.validate()?;
    let plan = load_plan(env)?;
    let mut reports = vec![];
    for arg in ckpts {
        let (tt, path) = parse_ckpt_arg(arg)?;
        let net = load_network(&path, &cfg)?;
        reports.push((tt, evaluate(&plan, &net, &cfg)?));
    }
    let table = compare_train_types(&reports, &desk_spec(&cfg.train)?).map_err(|e| usage(e.to_string()))?;
    for row in &table.rows {
        println!("{}: msf {:.2} m, {:.3} of e2e", row.train_type, row.report.msf, row.ratio_vs_e2e);
    }
    let dir = OutDir::create(&common.out)?;
    dir.write("msf.csv", table.to_csv())?;
    dir.write(CONFIG_SNAPSHOT, cfg.to_toml())?;
    dir.write_manifest()
}

pub fn cost_report(spec: &str, all: bool, train_type: Option<&str>, config: Option<&Path>, out: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    cfg.validate()?;
    let net = match spec {
        "reference" => build_reference_network(cfg.train.action.action_count())?,
        "desk" => desk_spec(&cfg.train)?,
        other => return Err(usage(format!("unknown spec '{other}', expected reference or desk"))),
    };
    let types = match (all, train_type) {
        (false, Some(tt)) => vec![parse_train_type(tt)?],
        (true, Some(_)) => return Err(usage("--all-train-types and --train-type are exclusive")),
        _ => TrainType::ALL.to_vec(),
    };
    let mut csv = String::from("train_type,trainable_weights,percent_weights,trainable_flops,total_flops,conv_flops\n");
    let mut layers = String::from("train_type,layer,weights,flops,trainable\n");
    println!("{:<6} {:>12} {:>8} {:>14} {:>14}", "type", "weights", "%", "trainable FLOPs", "total FLOPs");
    for tt in types {
        let r = count_flops(&net, tt);
        let pct = percent_truncated(r.trainable_weights, r.total_weights);
        let _ = writeln!(
            csv,
            "{tt},{},{pct:.2},{},{},{}",
            r.trainable_weights, r.trainable_flops, r.total_flops, r.conv_flops
        );
        for l in &r.layers {
            let _ = writeln!(layers, "{tt},{},{},{},{}", l.name, l.weights, l.flops, l.trainable);
        }
        println!(
            "{:<6} {:>12} {:>8.2} {:>14} {:>14}",
            tt.as_str(),
            r.trainable_weights,
            pct,
            r.trainable_flops,
            r.total_flops
        );
    }
    let dir = OutDir::create(out)?;
    dir.write("cost.csv", csv)?;
    dir.write("layers.csv", layers)?;
    dir.write(CONFIG_SNAPSHOT, cfg.to_toml())?;
    dir.write_manifest()
}

const CHANNELS: [&str; 3] = ["depth", "texture", "incidence"];

/// Greedy flight from the first evaluation spawn. Without a checkpoint the
/// agent keeps taking the centre action.
pub fn render(common: &Common, env: &Path, ckpt: Option<&Path>, steps: usize) -> Result<()> {
    let cfg = resolve(common)?;
    cfg.validate()?;
    let plan = load_plan(env)?;
    let net = ckpt.map(|p| load_network(p, &cfg)).transpose()?;
    let action = &cfg.train.action;
    let mut pose: AgentPose = spawn_poses(&plan, 1, cfg.train.seed)?[0];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    let dir = OutDir::create(&common.out)?;
    for k in 0..steps {
        let obs = render_obs(&plan, &pose, &cfg.train.camera)?;
        for (c, name) in CHANNELS.iter().enumerate() {
            dir.write(&format!("frame_{k:03}_{name}.pgm"), pgm(&obs, c))?;
        }
        let a = match &net {
            Some(net) => {
                dir.write(&format!("heatmap_{k:03}.csv"), export_q_heatmap(net, &obs.data, action)?.to_csv())?;
                argmax(&net.q_values(&obs.data)?)
            }
            None => action.action_count() / 2,
        };
        let step = action.execute_action(&pose, a, &mut rng)?;
        let moved = sweep_move(&plan, &AgentPose { yaw: step.yaw, ..pose }, step.displacement, cfg.train.d_crash);
        pose = moved.pose;
        if moved.collided && k + 1 < steps {
            println!("collision after {} steps", k + 1);
            break;
        }
    }
    dir.write(CONFIG_SNAPSHOT, cfg.to_toml())?;
    dir.write_manifest()
}
