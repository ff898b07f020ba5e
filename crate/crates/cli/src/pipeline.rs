//! Offline training, then online fine-tuning and evaluation over the
//! experiment grid: each test preset with its action-space variants, each
//! with every train type.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;

use navtl::action::Variant;
use navtl::env::presets::mix;
use navtl::env::Preset;
use navtl::eval::compare_train_types;
use navtl::nn::TrainType;
use navtl::trainer::{desk_spec, TrainConfig};

use crate::commands::{evaluate, load_network, resolve, write_training, PLAN_EXT};
use crate::output::{OutDir, CONFIG_SNAPSHOT};
use crate::{usage, Common};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub preset: Preset,
    pub variant: Variant,
    pub train_type: TrainType,
}

impl Cell {
    pub fn id(&self) -> String {
        format!("{}-{}-{}", self.preset, self.variant.name(), self.train_type)
    }
}

pub fn grid() -> Vec<Cell> {
    let groups = [
        (Preset::CloudLike, vec![Variant::Normal, Variant::Dilated(Variant::DILATION)]),
        (Preset::CondoLike, vec![Variant::Normal, Variant::Rotated(Variant::ROTATION)]),
        (Preset::TwistyLike, vec![Variant::Normal]),
    ];
    let mut cells = vec![];
    for (preset, variants) in groups {
        for variant in variants {
            for train_type in TrainType::ALL {
                cells.push(Cell { preset, variant, train_type });
            }
        }
    }
    cells
}

pub fn run(common: &Common, meta: Option<&Path>, dry_run: bool) -> Result<()> {
    let cfg = resolve(common)?;
    cfg.validate()?;
    let cells = grid();
    if dry_run {
        for (k, c) in cells.iter().enumerate() {
            println!("{k:>2} {:<12} {:<8} {}", c.preset.name(), c.variant.name(), c.train_type);
        }
        return Ok(());
    }
    let seed = cfg.train.seed;
    let dir = OutDir::create(&common.out)?;

    let meta_net = match meta {
        Some(path) => {
            if !path.is_file() {
                return Err(usage(format!("meta checkpoint {} not found", path.display())));
            }
            load_network(path, &cfg)?
        }
        None => {
            let library: Vec<_> =
                (0..cfg.pipeline.meta_envs).map(|k| Preset::Meta(k).generate(seed)).collect::<Result<_, _>>()?;
            for plan in &library {
                dir.write(&format!("meta/{}.{PLAN_EXT}", plan.name), plan.to_text())?;
            }
            let offline_cfg =
                TrainConfig { max_steps: cfg.pipeline.offline_steps, train_type: TrainType::E2e, ..cfg.train.clone() };
            let out = navtl::trainer::train_offline(&library, &offline_cfg)?;
            let snapshot = crate::config::RunConfig { train: offline_cfg, ..cfg.clone() };
            write_training(&OutDir::create(&dir.path("meta"))?, "meta.ckpt", &out, &snapshot)?;
            println!("offline: {} steps, moving average {:.3}", out.steps, out.log.moving_avg());
            out.network
        }
    };

    let mut results =
        String::from("env,variant,train_type,stop_reason,steps,msf_m,ratio_vs_e2e,trainable_weights,trainable_flops\n");
    for group in cells.chunks(TrainType::ALL.len()) {
        let (preset, variant) = (group[0].preset, group[0].variant);
        let plan = preset.generate(seed)?;
        dir.write(&format!("envs/{}.{PLAN_EXT}", plan.name), plan.to_text())?;
        let mut baseline = None;
        let mut reports = vec![];
        let mut stops = vec![];
        for cell in group {
            let index = cells.iter().position(|c| c == cell).unwrap() as u64;
            let budget = cfg.pipeline.online_steps;
            let cell_cfg = crate::config::RunConfig {
                train: TrainConfig {
                    action: cfg.train.action.with_variant(variant),
                    train_type: cell.train_type,
                    seed: mix(seed, 0xce11, index),
                    max_steps: if cell.train_type == TrainType::E2e { budget } else { 2 * budget },
                    ..cfg.train.clone()
                },
                ..cfg.clone()
            };
            let out = navtl::trainer::train_online(&plan, &meta_net, &cell_cfg.train, baseline)?;
            if cell.train_type == TrainType::E2e {
                baseline = Some(out.log.moving_avg());
            }
            write_training(
                &OutDir::create(&dir.path(&format!("cells/{}", cell.id())))?,
                "online.ckpt",
                &out,
                &cell_cfg,
            )?;
            // spawns come from the global seed so every cell flies the same routes
            let eval_cfg =
                crate::config::RunConfig { train: TrainConfig { seed, ..cell_cfg.train.clone() }, ..cell_cfg };
            reports.push((cell.train_type, evaluate(&plan, &out.network, &eval_cfg)?));
            stops.push((out.stop_reason, out.steps));
            println!("{}: {} after {} steps", cell.id(), out.stop_reason, out.steps);
        }
        let table = compare_train_types(&reports, &desk_spec(&cfg.train)?)?;
        dir.write(&format!("msf/{}-{}.csv", preset, variant.name()), table.to_csv())?;
        for (row, (stop, steps)) in table.rows.iter().zip(stops) {
            let _ = writeln!(
                results,
                "{},{},{},{stop},{steps},{},{},{},{}",
                preset,
                variant.name(),
                row.train_type,
                row.report.msf,
                row.ratio_vs_e2e,
                row.trainable_weights,
                row.trainable_flops
            );
        }
    }
    dir.write("results.csv", results)?;
    dir.write(CONFIG_SNAPSHOT, cfg.to_toml())?;
    dir.write_manifest()
}
