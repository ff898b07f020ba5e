//! Mean Safe Flight evaluation, Q-value heatmaps and train-type comparison.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action::{ActionError, ActionSpaceSpec};
use crate::env::presets::mix;
use crate::env::{render, sweep_move, AgentPose, Camera, EnvError, FloorPlan, D_CRASH};
use crate::nn::checkpoint::encode;
use crate::nn::spec::fnv1a64;
use crate::nn::{count_flops, count_trainable_weights, Network, NetworkSpec, NnError, TrainType};
use crate::trainer::argmax;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error("reports are not comparable: {0}")]
    Mismatch(String),
    #[error("comparison needs an e2e report as the reference")]
    MissingBaseline,
    #[error("invalid evaluation settings: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub n_spawns: usize,
    pub seed: u64,
    pub cap_m: f64,
    pub d_crash: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { n_spawns: 10, seed: 0, cap_m: 2000.0, d_crash: D_CRASH }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub env_name: String,
    /// FNV-1a digest of the evaluated checkpoint bytes.
    pub checkpoint_id: String,
    pub cap_m: f64,
    pub spawns: Vec<AgentPose>,
    pub distances: Vec<f64>,
    pub msf: f64,
}

/// Start poses for MSF runs: a pure function of `(plan, n, seed)`, so every
/// compared network flies from exactly the same places.
///
/// Each pose lies on a segment's centre line within 1.5 m of its midpoint,
/// facing along the segment with up to 0.2 rad of yaw jitter.
pub fn spawn_poses(plan: &FloorPlan, n: usize, seed: u64) -> Result<Vec<AgentPose>, EvalError> {
    if plan.spawn_points.is_empty() {
        return Err(EnvError::Geometry(format!("floor plan '{}' has no spawn points", plan.name)).into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0x5eed, 0));
    let mut poses = Vec::with_capacity(n);
    for _ in 0..n {
        let base = plan.spawn_points[rng.gen_range(0..plan.spawn_points.len())];
        let along = rng.gen_range(-1.5..=1.5);
        let jitter = rng.gen_range(-0.2..=0.2);
        let candidate =
            AgentPose::new(base.x + along * base.yaw.cos(), base.y + along * base.yaw.sin(), base.z, base.yaw + jitter);
        poses.push(if plan.pose_clearance(&candidate) >= 0.5 { candidate } else { base });
    }
    Ok(poses)
}

/// Distance flown greedily from `start` before the first collision, capped
/// at `settings.cap_m`. Action noise stays on; the final step is shortened so
/// the flight stops exactly at the cap.
pub fn fly(
    plan: &FloorPlan,
    network: &Network,
    action: &ActionSpaceSpec,
    camera: &Camera,
    start: AgentPose,
    settings: &EvalSettings,
    rng: &mut ChaCha8Rng,
) -> Result<f64, EvalError> {
    let (cap_m, d_crash) = (settings.cap_m, settings.d_crash);
    let mut pose = start;
    let mut flown = 0.0;
    while flown < cap_m {
        let obs = render(plan, &pose, camera)?;
        let q = network.q_values(&obs.data)?;
        let step = action.execute_action(&pose, argmax(&q), rng)?;
        let scale = ((cap_m - flown) / action.r_m).min(1.0);
        let d = step.displacement.map(|c| c * scale);
        let turned = AgentPose { yaw: step.yaw, ..pose };
        let moved = sweep_move(plan, &turned, d, d_crash);
        flown += moved.distance;
        pose = moved.pose;
        if moved.collided {
            break;
        }
        if scale < 1.0 {
            flown = cap_m;
        }
    }
    Ok(flown)
}

pub fn evaluate_msf(
    plan: &FloorPlan,
    network: &Network,
    action: &ActionSpaceSpec,
    camera: &Camera,
    settings: &EvalSettings,
) -> Result<EvalReport, EvalError> {
    if settings.n_spawns == 0 {
        return Err(EvalError::InvalidArgument("n_spawns must be at least 1".into()));
    }
    if !(settings.cap_m >= 0.0 && settings.cap_m.is_finite()) {
        return Err(EvalError::InvalidArgument(format!("cap {}", settings.cap_m)));
    }
    let expected = [camera.height, camera.width, 3];
    if network.input_shape() != expected || network.output_len() != action.action_count() {
        return Err(NnError::ShapeMismatch {
            context: "network vs camera/action space".into(),
            expected: vec![camera.height, camera.width, 3, action.action_count()],
            actual: [network.input_shape(), &[network.output_len()]].concat(),
        }
        .into());
    }
    let spawns = spawn_poses(plan, settings.n_spawns, settings.seed)?;
    let mut distances = Vec::with_capacity(spawns.len());
    for (k, &start) in spawns.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(settings.seed, 0xf17e, k as u64));
        distances.push(fly(plan, network, action, camera, start, settings, &mut rng)?);
    }
    let msf = distances.iter().sum::<f64>() / distances.len() as f64;
    Ok(EvalReport {
        env_name: plan.name.clone(),
        checkpoint_id: checkpoint_id(network),
        cap_m: settings.cap_m,
        spawns,
        distances,
        msf,
    })
}

pub fn checkpoint_id(network: &Network) -> String {
    format!("{:016x}", fnv1a64(&encode(network)))
}

/// Q values laid out on the `N x N` action grid and min-max normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub n: usize,
    /// `values[j * n + i]` for yaw bin `i` and pitch bin `j`.
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }

    /// One line per pitch bin `j`, one column per yaw bin `i`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.values.chunks(self.n) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

pub fn export_q_heatmap(
    network: &Network,
    observation: &[f32],
    action: &ActionSpaceSpec,
) -> Result<Heatmap, EvalError> {
    let q = network.q_values(observation)?;
    if q.len() != action.action_count() {
        return Err(NnError::ShapeMismatch {
            context: "heatmap Q vector".into(),
            expected: vec![action.action_count()],
            actual: vec![q.len()],
        }
        .into());
    }
    let n = action.n;
    let mut values = vec![0.0; n * n];
    for (a, &v) in q.iter().enumerate() {
        let (i, j) = action.index_to_bin(a)?;
        values[j * n + i] = v as f64;
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi > lo {
        values.iter_mut().for_each(|v| *v = (*v - lo) / (hi - lo));
    } else {
        values.iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(Heatmap { n, values })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub train_type: TrainType,
    pub report: EvalReport,
    pub ratio_vs_e2e: f64,
    pub trainable_weights: u64,
    pub trainable_flops: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

pub const COMPARISON_HEADER: &str =
    "train_type,spawn_id,distance_m,msf_m,ratio_vs_e2e,trainable_weights,trainable_flops";

impl Comparison {
    pub fn row(&self, tt: TrainType) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.train_type == tt)
    }

    /// One line per (train type, spawn).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(COMPARISON_HEADER);
        out.push('\n');
        for r in &self.rows {
            for (k, d) in r.report.distances.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.train_type, k, d, r.report.msf, r.ratio_vs_e2e, r.trainable_weights, r.trainable_flops
                );
            }
        }
        out
    }
}

/// Tabulate reports by train type against the e2e reference. Every report
/// must come from the same environment, spawn list and cap.
pub fn compare_train_types(reports: &[(TrainType, EvalReport)], spec: &NetworkSpec) -> Result<Comparison, EvalError> {
    let (_, base) = reports.iter().find(|(tt, _)| *tt == TrainType::E2e).ok_or(EvalError::MissingBaseline)?;
    for (tt, r) in reports {
        if r.env_name != base.env_name {
            return Err(EvalError::Mismatch(format!("{tt} ran on '{}', e2e on '{}'", r.env_name, base.env_name)));
        }
        if r.cap_m != base.cap_m {
            return Err(EvalError::Mismatch(format!("{tt} capped at {} m, e2e at {} m", r.cap_m, base.cap_m)));
        }
        if r.spawns != base.spawns {
            return Err(EvalError::Mismatch(format!("{tt} used different spawn poses")));
        }
    }
    let mut seen = Vec::new();
    let mut rows = Vec::with_capacity(reports.len());
    for (tt, r) in reports {
        if seen.contains(tt) {
            return Err(EvalError::Mismatch(format!("two reports for {tt}")));
        }
        seen.push(*tt);
        let ratio = if base.msf > 0.0 {
            r.msf / base.msf
        } else if r.msf == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        rows.push(ComparisonRow {
            train_type: *tt,
            report: r.clone(),
            ratio_vs_e2e: ratio,
            trainable_weights: count_trainable_weights(spec, *tt),
            trainable_flops: count_flops(spec, *tt).trainable_flops,
        });
    }
    Ok(Comparison { rows })
}
