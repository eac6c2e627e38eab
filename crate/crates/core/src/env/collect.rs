//! Data collection phase: run the baseline learner and label its episodes.

use rand::seq::index::sample;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::GridSim;
use crate::formula::Tick;
use crate::rl::{RunRng, TauLearner};
use crate::semantics::{LabeledTrajectory, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LabelingRule {
    /// Positive iff the episode's cumulative reward exceeds the threshold.
    RewardAbove { threshold: f64 },
    /// Positive iff the episode lasted at least `ticks`; positives lose
    /// their final state.
    LengthAtLeast { ticks: Tick },
}

impl LabelingRule {
    pub fn is_positive(&self, traj: &Trajectory, total_reward: f64) -> bool {
        match *self {
            LabelingRule::RewardAbove { threshold } => total_reward > threshold,
            LabelingRule::LengthAtLeast { ticks } => traj.horizon() >= ticks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CollectError {
    #[error("no positive trajectories among {0} episodes")]
    NoPositives(usize),
    #[error("no negative trajectories among {0} episodes")]
    NoNegatives(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectionReport {
    pub episodes: usize,
    pub positives: usize,
    pub negatives_total: usize,
    pub negatives_sampled: usize,
    /// Cumulative reward of every collection episode.
    pub curve: Vec<f64>,
}

/// Runs `episodes` learning episodes of `learner`, keeps every positive and
/// `negatives` uniformly sampled negatives (all of them if fewer exist).
pub fn collect_phase(
    learner: &mut TauLearner<GridSim<'_>>,
    episodes: usize,
    rule: LabelingRule,
    negatives: usize,
    seed: u64,
) -> Result<(Vec<LabeledTrajectory>, CollectionReport), CollectError> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let mut curve = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let rec = learner.run_episode();
        let total = rec.total();
        curve.push(total);
        let mut traj = Trajectory::new(rec.states);
        if rule.is_positive(&traj, total) {
            if matches!(rule, LabelingRule::LengthAtLeast { .. }) && traj.states.len() > 1 {
                traj.states.pop();
            }
            pos.push(LabeledTrajectory { trajectory: traj, label: 1, reward: Some(total) });
        } else {
            neg.push(LabeledTrajectory { trajectory: traj, label: -1, reward: Some(total) });
        }
    }
    if pos.is_empty() {
        return Err(CollectError::NoPositives(episodes));
    }
    if neg.is_empty() {
        return Err(CollectError::NoNegatives(episodes));
    }
    let negatives_total = neg.len();
    let mut rng = RunRng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, neg.len(), negatives.min(neg.len())).into_vec();
    picked.sort_unstable();
    let report = CollectionReport {
        episodes,
        positives: pos.len(),
        negatives_total,
        negatives_sampled: picked.len(),
        curve,
    };
    let mut data = pos;
    data.extend(picked.into_iter().map(|i| neg[i].clone()));
    Ok((data, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvState, Heading};

    #[test]
    fn labeling_rules() {
        let t = Trajectory::new(vec![EnvState::new(0, 0, Heading::N); 20]);
        assert!(!LabelingRule::LengthAtLeast { ticks: 20 }.is_positive(&t, 0.0));
        let t21 = Trajectory::new(vec![EnvState::new(0, 0, Heading::N); 21]);
        assert!(LabelingRule::LengthAtLeast { ticks: 20 }.is_positive(&t21, 0.0));
        assert!(LabelingRule::RewardAbove { threshold: 0.0 }.is_positive(&t, 100.0));
        assert!(!LabelingRule::RewardAbove { threshold: 0.0 }.is_positive(&t, -10.0));
    }
}
