//! Hidden reward evaluators of the gridworld tasks.

use serde::{Deserialize, Serialize};

use super::{EnvError, EnvState, GridEnvConfig};
use crate::formula::{Region, Tick};
use crate::semantics::Trajectory;

/// Rectangle `[x_lo, x_hi, y_lo, y_hi]`, bounds inclusive.
pub type Rect = [i64; 4];

fn inside(b: &Rect, s: &EnvState) -> bool {
    let (x, y) = (s.x as i64, s.y as i64);
    b[0] <= x && x <= b[1] && b[2] <= y && y <= b[3]
}

/// Reach green, stay for `dwell` more ticks, then reach yellow, all by the
/// horizon; one terminal reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case1Task {
    pub green: Rect,
    pub yellow: Rect,
    pub dwell: Tick,
    #[serde(default = "default_success")]
    pub reward_success: f64,
    #[serde(default = "default_fail")]
    pub reward_fail: f64,
}

/// Collect reward in green cells while returning to one fixed blue region at
/// least every `return_period` ticks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case2Task {
    pub greens: Vec<Rect>,
    pub blues: Vec<Rect>,
    pub return_period: Tick,
    #[serde(default = "default_green")]
    pub reward_per_green_tick: f64,
    #[serde(default = "default_violation")]
    pub reward_violation: f64,
}

fn default_success() -> f64 {
    100.0
}
fn default_fail() -> f64 {
    -10.0
}
fn default_green() -> f64 {
    100.0
}
fn default_violation() -> f64 {
    -800.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum TaskSpec {
    Case1(Case1Task),
    Case2(Case2Task),
}

impl TaskSpec {
    pub fn case1_source() -> Self {
        TaskSpec::Case1(Case1Task {
            green: [3, 4, 3, 5],
            yellow: [7, 8, 5, 8],
            dwell: 4,
            reward_success: 100.0,
            reward_fail: -10.0,
        })
    }

    pub fn case1_target() -> Self {
        TaskSpec::Case1(Case1Task {
            green: [5, 6, 6, 7],
            yellow: [5, 7, 1, 2],
            dwell: 5,
            reward_success: 100.0,
            reward_fail: -10.0,
        })
    }

    pub fn case2_source() -> Self {
        TaskSpec::Case2(Case2Task {
            greens: vec![[0, 1, 4, 4], [3, 4, 0, 0]],
            blues: vec![[2, 3, 2, 3]],
            return_period: 8,
            reward_per_green_tick: 100.0,
            reward_violation: -800.0,
        })
    }

    pub fn case2_target() -> Self {
        TaskSpec::Case2(Case2Task {
            greens: vec![[2, 3, 6, 6], [4, 5, 6, 6], [2, 3, 0, 1], [4, 5, 0, 1]],
            blues: vec![[2, 3, 3, 4], [4, 5, 3, 4]],
            return_period: 10,
            reward_per_green_tick: 100.0,
            reward_violation: -800.0,
        })
    }

    pub(crate) fn validate(&self, cfg: &GridEnvConfig) -> Result<(), EnvError> {
        let check = |name: &str, b: &Rect| {
            let ok = b[0] <= b[1]
                && b[2] <= b[3]
                && b[0] >= 0
                && b[2] >= 0
                && b[1] < cfg.width as i64
                && b[3] < cfg.height as i64;
            if ok {
                Ok(())
            } else {
                Err(EnvError::Invalid(format!("{name} region {b:?} is empty or outside the grid")))
            }
        };
        match self {
            TaskSpec::Case1(t) => {
                check("green", &t.green)?;
                check("yellow", &t.yellow)?;
                if t.dwell < 1 {
                    return Err(EnvError::Invalid("dwell must be at least 1".into()));
                }
            }
            TaskSpec::Case2(t) => {
                t.greens.iter().try_for_each(|b| check("green", b))?;
                t.blues.iter().try_for_each(|b| check("blue", b))?;
                if t.blues.is_empty() {
                    return Err(EnvError::Invalid("at least one blue region is required".into()));
                }
                if t.return_period < 1 {
                    return Err(EnvError::Invalid("return period must be at least 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Regions of the task as formula predicates, in declaration order.
    pub fn regions(&self) -> Vec<(String, Region)> {
        let r = |b: &Rect| Region::rect(b[0], b[1], b[2], b[3]).expect("validated rectangle");
        match self {
            TaskSpec::Case1(t) => vec![("green".into(), r(&t.green)), ("yellow".into(), r(&t.yellow))],
            TaskSpec::Case2(t) => t
                .greens
                .iter()
                .enumerate()
                .map(|(i, b)| (format!("green{}", i + 1), r(b)))
                .chain(t.blues.iter().enumerate().map(|(i, b)| (format!("blue{}", i + 1), r(b))))
                .collect(),
        }
    }
}

/// Reward and termination of one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickOutcome {
    pub reward: f64,
    pub done: bool,
}

/// Incremental evaluator that consumes one state per tick.
#[derive(Debug, Clone)]
pub enum TaskTracker<'a> {
    Case1 {
        task: &'a Case1Task,
        horizon: Tick,
        run: Tick,
        dwelled: bool,
        success: bool,
    },
    Case2 {
        task: &'a Case2Task,
        horizon: Tick,
        committed: Option<usize>,
        last_visit: i64,
    },
}

impl<'a> TaskTracker<'a> {
    /// Starts an episode at `s0` (tick 0).
    pub fn new(task: &'a TaskSpec, horizon: Tick, s0: &EnvState) -> Self {
        let mut tr = match task {
            TaskSpec::Case1(t) => TaskTracker::Case1 {
                task: t,
                horizon,
                run: 0,
                dwelled: false,
                success: false,
            },
            TaskSpec::Case2(t) => TaskTracker::Case2 {
                task: t,
                horizon,
                committed: None,
                last_visit: -1,
            },
        };
        tr.advance(0, s0);
        tr
    }

    /// Consumes the state reached at tick `t >= 1`.
    pub fn observe(&mut self, t: Tick, s: &EnvState) -> TickOutcome {
        let violated = self.advance(t, s);
        match self {
            TaskTracker::Case1 { task, horizon, success, .. } => {
                let done = t >= *horizon;
                let reward = match (done, *success) {
                    (false, _) => 0.0,
                    (true, true) => task.reward_success,
                    (true, false) => task.reward_fail,
                };
                TickOutcome { reward, done }
            }
            TaskTracker::Case2 { task, horizon, .. } => {
                if violated {
                    TickOutcome { reward: task.reward_violation, done: true }
                } else {
                    let green = task.greens.iter().any(|b| inside(b, s));
                    TickOutcome {
                        reward: if green { task.reward_per_green_tick } else { 0.0 },
                        done: t >= *horizon,
                    }
                }
            }
        }
    }

    /// Updates the internal state; returns whether the Case 2 rule broke at `t`.
    fn advance(&mut self, t: Tick, s: &EnvState) -> bool {
        match self {
            TaskTracker::Case1 { task, run, dwelled, success, .. } => {
                if *dwelled && inside(&task.yellow, s) {
                    *success = true;
                }
                *run = if inside(&task.green, s) { *run + 1 } else { 0 };
                if *run > task.dwell {
                    *dwelled = true;
                }
                false
            }
            TaskTracker::Case2 { task, committed, last_visit, .. } => {
                if committed.is_none() {
                    *committed = task.blues.iter().position(|b| inside(b, s));
                }
                match committed {
                    Some(b) if inside(&task.blues[*b], s) => {
                        *last_visit = t as i64;
                        false
                    }
                    _ => t as i64 - *last_visit > task.return_period as i64,
                }
            }
        }
    }

    pub fn succeeded(&self) -> bool {
        matches!(self, TaskTracker::Case1 { success: true, .. })
    }
}

/// Hidden evaluation of a whole trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Reward received on reaching tick `t`, for `t = 1..`.
    pub rewards: Vec<f64>,
    /// Tick at which the episode ended before the horizon.
    pub terminated_early: Option<Tick>,
}

impl Outcome {
    pub fn total(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

pub fn ground_truth_outcome(task: &TaskSpec, horizon: Tick, traj: &Trajectory) -> Outcome {
    let mut tr = TaskTracker::new(task, horizon, &traj.states[0]);
    let mut rewards = Vec::new();
    for (t, s) in traj.states.iter().enumerate().skip(1) {
        let out = tr.observe(t as Tick, s);
        rewards.push(out.reward);
        if out.done {
            let early = (t as Tick) < horizon;
            return Outcome { rewards, terminated_early: early.then_some(t as Tick) };
        }
    }
    Outcome { rewards, terminated_early: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Heading;

    fn st(x: i32, y: i32) -> EnvState {
        EnvState::new(x, y, Heading::N)
    }

    #[test]
    fn case1_success_and_failure() {
        let task = TaskSpec::case1_source();
        let mut states = vec![st(0, 0); 41];
        for s in states.iter_mut().take(8).skip(3) {
            *s = st(3, 4);
        }
        states[25] = st(7, 6);
        let out = ground_truth_outcome(&task, 40, &Trajectory::new(states.clone()));
        assert_eq!(out.rewards.len(), 40);
        assert_eq!(out.rewards[39], 100.0);
        assert_eq!(out.total(), 100.0);
        assert_eq!(out.terminated_early, None);

        let never = ground_truth_outcome(&task, 40, &Trajectory::new(vec![st(0, 0); 41]));
        assert_eq!(never.total(), -10.0);

        // yellow before the dwell completes does not count
        states[25] = st(0, 0);
        states[7] = st(7, 6);
        assert_eq!(ground_truth_outcome(&task, 40, &Trajectory::new(states)).total(), -10.0);
    }

    #[test]
    fn case2_violation_after_period() {
        let task = TaskSpec::case2_source();
        let mut states = vec![st(0, 2); 26];
        states[0] = st(2, 2);
        let out = ground_truth_outcome(&task, 25, &Trajectory::new(states));
        assert_eq!(out.terminated_early, Some(9));
        assert_eq!(*out.rewards.last().unwrap(), -800.0);
        assert_eq!(out.rewards.len(), 9);
    }

    #[test]
    fn case2_never_blue_breaks_at_period() {
        let task = TaskSpec::case2_source();
        let out = ground_truth_outcome(&task, 25, &Trajectory::new(vec![st(0, 4); 26]));
        assert_eq!(out.terminated_early, Some(8));
        // seven green ticks before the violation
        assert_eq!(out.total(), 7.0 * 100.0 - 800.0);
    }

    #[test]
    fn case2_commitment_to_first_blue() {
        let task = TaskSpec::case2_target();
        let mut states = vec![st(0, 0); 41];
        // start in blue 1, hop to blue 2 for the rest of the episode
        states[0] = st(2, 3);
        for s in states.iter_mut().skip(1) {
            *s = st(4, 3);
        }
        let out = ground_truth_outcome(&task, 40, &Trajectory::new(states));
        assert_eq!(out.terminated_early, Some(11));
    }
}
