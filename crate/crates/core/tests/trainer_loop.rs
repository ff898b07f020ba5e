mod common;

use navtl::env::{Camera, FloorPlan, Preset};
use navtl::nn::{build_desk_network, build_linear_network, Network, Tensor, TrainType};
use navtl::replay::ReplayConfig;
use navtl::trainer::{
    compute_reward, ddqn_target, epsilon_greedy, train, train_offline, train_online, EnvStep, Environment, StopReason,
    TrainConfig, TrainError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small, fast settings for loop-level tests on real floor plans.
fn small_config(seed: u64, steps: u64) -> TrainConfig {
    TrainConfig {
        camera: Camera { height: 16, width: 16, ..Camera::default() },
        max_steps: steps,
        n_target: 50,
        n_batch: 8,
        switch_interval: Some(25),
        max_episode_steps: 40,
        seed,
        replay: ReplayConfig { capacity: 1024, ..ReplayConfig::default() },
        lr: 1e-3,
        ..TrainConfig::default()
    }
}

/// Counts its own steps; never terminates.
#[derive(Debug)]
struct Counter {
    position: u64,
    reward: f64,
}

impl Environment for Counter {
    type State = u64;

    fn observe(&self) -> Result<Vec<f32>, TrainError> {
        Ok(vec![(self.position % 7) as f32 / 7.0, 1.0])
    }

    fn step(&mut self, _action: usize, _rng: &mut ChaCha8Rng) -> Result<EnvStep, TrainError> {
        self.position += 1;
        Ok(EnvStep { reward: self.reward, terminal: false })
    }

    fn respawn(&mut self, _rng: &mut ChaCha8Rng) {}

    fn initial_state(&self) -> u64 {
        0
    }

    fn save(&self) -> u64 {
        self.position
    }

    fn restore(&mut self, state: u64) {
        self.position = state;
    }
}

fn counter_config(steps: u64, m: Option<u64>) -> TrainConfig {
    TrainConfig {
        max_steps: steps,
        switch_interval: m,
        n_batch: 4,
        max_episode_steps: 1000,
        replay: ReplayConfig { capacity: 64, ..ReplayConfig::default() },
        ..TrainConfig::default()
    }
}

#[test]
fn tabular_corridor_recovers_optimal_policy() {
    let optimal = common::tabular::optimal_policy();
    for seed in [0, 1, 2] {
        assert_eq!(common::tabular::learned_policy(seed).unwrap(), optimal, "seed {seed}");
    }
}

#[test]
fn switching_cycles_environments_and_restores_state() {
    let mut envs: Vec<Counter> = (0..3).map(|_| Counter { position: 0, reward: 0.0 }).collect();
    let net = Network::new(build_linear_network(2, 3).unwrap(), 0).unwrap();
    let out = train(&mut envs, net, &counter_config(65, Some(10)), |_| false).unwrap();
    let expected: Vec<usize> = (0..65).map(|t| (t / 10) % 3).collect();
    assert_eq!(out.env_trace, expected);
    let steps: Vec<u64> = out.switches.iter().map(|s| s.step).collect();
    assert_eq!(steps, vec![10, 20, 30, 40, 50, 60]);
    // each environment resumes where it was left; first visits start at 0
    let restored: Vec<u64> = out.switches.iter().map(|s| s.restored).collect();
    assert_eq!(restored, vec![0, 0, 10, 10, 10, 20]);
    let saved: Vec<u64> = out.switches.iter().map(|s| s.saved).collect();
    assert_eq!(saved, vec![10, 10, 10, 20, 20, 20]);
    assert_eq!(envs.iter().map(|e| e.position).collect::<Vec<_>>(), vec![25, 20, 20]);
}

#[test]
fn no_switch_interval_stays_on_one_environment() {
    let mut envs: Vec<Counter> = (0..3).map(|_| Counter { position: 0, reward: 0.0 }).collect();
    let net = Network::new(build_linear_network(2, 3).unwrap(), 0).unwrap();
    let out = train(&mut envs, net, &counter_config(50, None), |_| false).unwrap();
    assert!(out.env_trace.iter().all(|&e| e == 0));
    assert!(out.switches.is_empty());
}

#[test]
fn non_finite_loss_reports_the_step() {
    let mut envs = [Counter { position: 0, reward: f64::MAX }];
    let net = Network::new(build_linear_network(2, 3).unwrap(), 0).unwrap();
    let cfg = TrainConfig { n_train: 1, ..counter_config(50, None) };
    match train(&mut envs, net, &cfg, |_| false) {
        Err(TrainError::Divergence { step, .. }) => assert_eq!(step, 4),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn logged_returns_account_for_every_reward() {
    let lib: Vec<FloorPlan> = (0..2).map(|k| Preset::Meta(k).generate(4).unwrap()).collect();
    let out = train_offline(&lib, &small_config(3, 400)).unwrap();
    assert!(out.log.complete_episodes() > 3);
    assert!((out.log.total_return() - out.total_reward).abs() < 1e-9);
    assert_eq!(out.log.records().iter().map(|r| r.steps).sum::<u64>(), out.steps);
    assert!(out.gradient_steps > 0);
}

#[test]
fn same_seed_gives_identical_logs() {
    let lib: Vec<FloorPlan> = (0..2).map(|k| Preset::Meta(k).generate(4).unwrap()).collect();
    let a = train_offline(&lib, &small_config(8, 200)).unwrap();
    let b = train_offline(&lib, &small_config(8, 200)).unwrap();
    let c = train_offline(&lib, &small_config(9, 200)).unwrap();
    assert_eq!(a.log.to_csv(), b.log.to_csv());
    assert!(a.network.weights_bit_equal(&b.network));
    assert_ne!(a.log.to_csv(), c.log.to_csv());
}

#[test]
fn offline_requires_e2e() {
    let lib = vec![Preset::Meta(0).generate(1).unwrap()];
    let cfg = TrainConfig { train_type: TrainType::Last3, ..small_config(0, 10) };
    assert!(matches!(train_offline(&lib, &cfg), Err(TrainError::Config(_))));
}

#[test]
fn online_stops_immediately_on_zero_baseline() {
    let plan = Preset::CloudLike.generate(1).unwrap();
    let cfg = small_config(0, 100);
    let init = Network::new(build_desk_network(16, 16, 25).unwrap(), 0).unwrap();
    let out = train_online(&plan, &init, &cfg, Some(0.0)).unwrap();
    assert_eq!(out.stop_reason, StopReason::Matched);
    assert_eq!(out.steps, 0);
    let out = train_online(&plan, &init, &cfg, Some(1e9)).unwrap();
    assert_eq!(out.stop_reason, StopReason::Cap);
    assert_eq!(out.steps, 100);
}

#[test]
fn online_rejects_a_foreign_network() {
    let plan = Preset::CloudLike.generate(1).unwrap();
    let init = Network::new(build_desk_network(20, 20, 25).unwrap(), 0).unwrap();
    assert!(train_online(&plan, &init, &small_config(0, 10), None).is_err());
}

#[test]
fn online_last2_leaves_frozen_layers_untouched() {
    let plan = Preset::CondoLike.generate(2).unwrap();
    let init = Network::new(build_desk_network(16, 16, 25).unwrap(), 5).unwrap();
    let cfg = TrainConfig { train_type: TrainType::Last2, ..small_config(1, 300) };
    let out = train_online(&plan, &init, &cfg, None).unwrap();
    let trained = ["v_fc3", "a_fc3", "value_head", "advantage_head"];
    for (name, before) in init.layer_params() {
        let after = out.network.params(name).unwrap();
        let same = before.weight.data().iter().zip(after.weight.data()).all(|(a, b)| a.to_bits() == b.to_bits())
            && before.bias.data().iter().zip(after.bias.data()).all(|(a, b)| a.to_bits() == b.to_bits());
        assert_eq!(same, !trained.contains(&name), "{name}");
    }
}

#[test]
fn reward_examples() {
    let cfg = TrainConfig { reward_rays: 33, ..TrainConfig::default() };
    let wall =
        |x: f64| FloorPlan::from_text(&format!("name w\nfloor_z 0\nceil_z 30\nwall {x} -80 {x} 80 2\n")).unwrap();
    let pose = navtl::env::AgentPose::new(0.0, 0.0, 15.0, 0.0);
    assert_eq!(compute_reward(&wall(1.5), &pose, true, &cfg), (-1.0, true));
    let (r, t) = compute_reward(&wall(1.5), &pose, false, &cfg);
    assert!((r - 0.5).abs() < 1e-12 && !t);
    assert_eq!(compute_reward(&wall(6.0), &pose, false, &cfg), (1.0, false));
}

#[test]
fn synced_networks_reduce_to_the_max_backup() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for seed in 0..20 {
        let net = Network::new(build_desk_network(16, 16, 9).unwrap(), seed).unwrap();
        let target = net.target_copy();
        let next = Tensor::new(vec![4, 16, 16, 3], (0..4 * 16 * 16 * 3).map(|_| rng.gen()).collect()).unwrap();
        let rewards = [0.1, -0.4, 0.9, 0.0];
        let y = ddqn_target(&net, &target, &rewards, &next, &[false; 4], 0.99).unwrap();
        let q = net.forward(&next).unwrap();
        for k in 0..4 {
            let max = q.item(k).iter().copied().fold(f32::MIN, f32::max);
            assert_eq!(y[k], (rewards[k] as f64 + 0.99 * max as f64) as f32);
        }
    }
}

#[test]
fn full_exploration_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let q: Vec<f32> = (0..25).map(|i| i as f32).collect();
    let mut counts = [0u32; 25];
    let n = 100_000;
    for _ in 0..n {
        counts[epsilon_greedy(&q, 1.0, &mut rng)] += 1;
    }
    let expected = n as f64 / 25.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // chi-square critical value, 24 degrees of freedom, p = 0.01
    assert!(chi2 < 42.98, "chi2 = {chi2}");
    assert_eq!(epsilon_greedy(&q, 0.0, &mut rng), 24);
}
