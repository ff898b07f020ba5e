use std::collections::VecDeque;
use std::fmt::Write as _;

/// One finished (or, for the last row of a run, cut-short) episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// Global step count when the episode ended.
    pub step: u64,
    pub episode: u64,
    pub episode_return: f64,
    pub moving_avg: f64,
    pub epsilon: f64,
    pub env_index: usize,
    /// Mean training loss over the episode's gradient steps.
    pub loss: Option<f64>,
    pub steps: u64,
    /// False only for an episode still running when training stopped.
    pub complete: bool,
}

/// Per-episode returns with a moving average over the last `window`
/// complete episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnLog {
    window: usize,
    recent: VecDeque<f64>,
    records: Vec<EpisodeRecord>,
}

pub const CSV_HEADER: &str = "step,episode,episode_return,moving_avg,epsilon,env_index,loss";

impl ReturnLog {
    pub fn new(window: usize) -> Self {
        assert!(window > 0, "moving-average window must be positive");
        Self { window, recent: VecDeque::with_capacity(window), records: Vec::new() }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn records(&self) -> &[EpisodeRecord] {
        &self.records
    }

    pub fn complete_episodes(&self) -> usize {
        self.records.iter().filter(|r| r.complete).count()
    }

    /// Mean of the last `window` complete returns; 0 before any episode ends.
    pub fn moving_avg(&self) -> f64 {
        if self.recent.is_empty() {
            0.0
        } else {
            self.recent.iter().sum::<f64>() / self.recent.len() as f64
        }
    }

    /// Sum of every logged return, partial episodes included.
    pub fn total_return(&self) -> f64 {
        self.records.iter().map(|r| r.episode_return).sum()
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn record(
        &mut self,
        step: u64,
        episode_return: f64,
        steps: u64,
        epsilon: f64,
        env_index: usize,
        loss: Option<f64>,
        complete: bool,
    ) {
        if complete {
            if self.recent.len() == self.window {
                self.recent.pop_front();
            }
            self.recent.push_back(episode_return);
        }
        let record = EpisodeRecord {
            step,
            episode: self.records.len() as u64,
            episode_return,
            moving_avg: self.moving_avg(),
            epsilon,
            env_index,
            loss,
            steps,
            complete,
        };
        self.records.push(record);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let loss = r.loss.map(|l| l.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.step, r.episode, r.episode_return, r.moving_avg, r.epsilon, r.env_index, loss
            );
        }
        out
    }
}
