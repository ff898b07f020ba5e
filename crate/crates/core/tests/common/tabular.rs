use navtl::nn::{build_linear_network, Network};
use navtl::replay::ReplayConfig;
use navtl::trainer::corridor::{self, CorridorEnv};
use navtl::trainer::{argmax, train, TrainConfig, TrainError};

pub const GAMMA: f64 = 0.9;

pub fn config(seed: u64) -> TrainConfig {
    TrainConfig {
        gamma: GAMMA,
        epsilon_anneal_steps: Some(10_000),
        n_target: 100,
        n_train: 1,
        n_batch: 32,
        switch_interval: None,
        max_steps: 20_000,
        max_episode_steps: 100,
        lr: 5e-3,
        seed,
        replay: ReplayConfig { capacity: 4096, ..ReplayConfig::default() },
        ..TrainConfig::default()
    }
}

/// Train on the corridor and return the greedy action per interior cell.
pub fn learned_policy(seed: u64) -> Result<Vec<Option<usize>>, TrainError> {
    let net = Network::new(build_linear_network(corridor::CELLS, corridor::ACTIONS)?, seed)?;
    let out = train(&mut [CorridorEnv::default()], net, &config(seed), |_| false)?;
    (1..corridor::CELLS - 1).map(|c| Ok(Some(argmax(&out.network.q_values(&corridor::one_hot(c))?)))).collect()
}

pub fn optimal_policy() -> Vec<Option<usize>> {
    corridor::greedy_policy(&corridor::value_iteration(GAMMA))
}
