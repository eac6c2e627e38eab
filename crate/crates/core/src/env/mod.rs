//! Gridworld MDP with heading-based motion and slip noise, plus the hidden
//! reward evaluators of the two gridworld tasks.

mod collect;
mod task;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::formula::{Tick, Valuation};

pub use collect::{collect_phase, CollectError, CollectionReport, LabelingRule};
pub use task::{ground_truth_outcome, Case1Task, Case2Task, Outcome, Rect, TaskSpec, TaskTracker, TickOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Heading {
    N,
    E,
    S,
    W,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::N, Heading::E, Heading::S, Heading::W];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Option<Self> {
        Heading::ALL.get(i as usize).copied()
    }

    /// Unit step; north is `+y`.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Heading::N => (0, 1),
            Heading::E => (1, 0),
            Heading::S => (0, -1),
            Heading::W => (-1, 0),
        }
    }

    pub fn left(self) -> Self {
        Heading::ALL[(self as usize + 3) % 4]
    }

    pub fn right(self) -> Self {
        Heading::ALL[(self as usize + 1) % 4]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EnvState {
    pub x: i32,
    pub y: i32,
    pub heading: Heading,
}

impl EnvState {
    pub fn new(x: i32, y: i32, heading: Heading) -> Self {
        EnvState { x, y, heading }
    }
}

impl Valuation for EnvState {
    fn value(&self, var: &str) -> Option<i64> {
        match var {
            "x" => Some(self.x as i64),
            "y" => Some(self.y as i64),
            "heading" => Some(self.heading.index() as i64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Straight,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Straight, Action::Left, Action::Right];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Action::ALL[i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEnvConfig {
    pub width: i32,
    pub height: i32,
    pub slip_straight: f64,
    pub stick_turn: f64,
    pub horizon: u32,
    pub task: TaskSpec,
    #[serde(default = "default_true")]
    pub heading_in_state: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("invalid environment: {0}")]
    Invalid(String),
}

impl GridEnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.width < 1 || self.height < 1 {
            return Err(EnvError::Invalid("grid must be at least 1x1".into()));
        }
        for (name, p) in [("slip_straight", self.slip_straight), ("stick_turn", self.stick_turn)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(EnvError::Invalid(format!("{name} = {p} is not a probability")));
            }
        }
        if self.horizon < 1 {
            return Err(EnvError::Invalid("horizon must be at least 1".into()));
        }
        self.task.validate(self)
    }

    pub fn in_bounds(&self, x: i32, y: i32) -> bool {
        (0..self.width).contains(&x) && (0..self.height).contains(&y)
    }

    fn clamp(&self, x: i32, y: i32) -> (i32, i32) {
        (x.clamp(0, self.width - 1), y.clamp(0, self.height - 1))
    }

    pub fn num_states(&self) -> usize {
        (self.width * self.height * 4) as usize
    }

    /// Dense index over `(y, x, heading)`.
    pub fn state_index(&self, s: &EnvState) -> usize {
        ((s.y * self.width + s.x) * 4 + s.heading.index() as i32) as usize
    }

    pub fn state_at(&self, idx: usize) -> EnvState {
        let h = Heading::from_index((idx % 4) as u8).expect("idx % 4 < 4");
        let cell = (idx / 4) as i32;
        EnvState::new(cell % self.width, cell / self.width, h)
    }

    pub fn states(&self) -> impl Iterator<Item = EnvState> + '_ {
        (0..self.num_states()).map(|i| self.state_at(i))
    }

    /// Uniform over all cells and headings.
    pub fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvState {
        self.state_at(rng.gen_range(0..self.num_states()))
    }

    /// Drops the heading when it is configured out of the learner's state.
    pub fn observe(&self, s: EnvState) -> EnvState {
        if self.heading_in_state {
            s
        } else {
            EnvState { heading: Heading::N, ..s }
        }
    }

    /// Exact successor distribution of one action, merged over coinciding cells.
    pub fn outcomes(&self, s: &EnvState, a: Action) -> Vec<(EnvState, f64)> {
        let mut out: Vec<(EnvState, f64)> = Vec::with_capacity(3);
        let mut add = |t: EnvState, p: f64| {
            if p <= 0.0 {
                return;
            }
            match out.iter_mut().find(|(u, _)| *u == t) {
                Some((_, q)) => *q += p,
                None => out.push((t, p)),
            }
        };
        match a {
            Action::Straight => {
                let (dx, dy) = s.heading.delta();
                let (ix, iy) = (s.x + dx, s.y + dy);
                let (cx, cy) = self.clamp(ix, iy);
                add(EnvState::new(cx, cy, s.heading), 1.0 - self.slip_straight);
                for (lx, ly) in lateral(ix, iy, s.heading) {
                    let (cx, cy) = self.clamp(lx, ly);
                    add(EnvState::new(cx, cy, s.heading), self.slip_straight / 2.0);
                }
            }
            Action::Left | Action::Right => {
                let turned = if a == Action::Left { s.heading.left() } else { s.heading.right() };
                add(EnvState { heading: turned, ..*s }, 1.0 - self.stick_turn);
                add(*s, self.stick_turn);
            }
        }
        out
    }
}

fn lateral(x: i32, y: i32, h: Heading) -> [(i32, i32); 2] {
    let (lx, ly) = h.left().delta();
    [(x + lx, y + ly), (x - lx, y - ly)]
}

/// One stochastic transition.
pub fn env_step<R: Rng + ?Sized>(cfg: &GridEnvConfig, s: &EnvState, a: Action, rng: &mut R) -> EnvState {
    match a {
        Action::Straight => {
            let (dx, dy) = s.heading.delta();
            let (mut tx, mut ty) = (s.x + dx, s.y + dy);
            if rng.gen::<f64>() < cfg.slip_straight {
                let side = lateral(tx, ty, s.heading)[rng.gen_range(0..2)];
                (tx, ty) = side;
            }
            let (cx, cy) = cfg.clamp(tx, ty);
            EnvState::new(cx, cy, s.heading)
        }
        Action::Left | Action::Right => {
            if rng.gen::<f64>() < cfg.stick_turn {
                *s
            } else {
                let h = if a == Action::Left { s.heading.left() } else { s.heading.right() };
                EnvState { heading: h, ..*s }
            }
        }
    }
}

/// Episode simulator: environment dynamics plus the hidden task evaluator.
#[derive(Debug, Clone)]
pub struct GridSim<'a> {
    cfg: &'a GridEnvConfig,
    state: EnvState,
    t: Tick,
    tracker: Option<TaskTracker<'a>>,
}

impl<'a> GridSim<'a> {
    pub fn new(cfg: &'a GridEnvConfig) -> Self {
        GridSim { cfg, state: EnvState::new(0, 0, Heading::N), t: 0, tracker: None }
    }

    pub fn config(&self) -> &'a GridEnvConfig {
        self.cfg
    }

    /// Starts an episode at a given state.
    pub fn reset_to(&mut self, s0: EnvState) -> EnvState {
        self.state = s0;
        self.t = 0;
        self.tracker = Some(TaskTracker::new(&self.cfg.task, self.cfg.horizon, &s0));
        s0
    }

    pub fn state(&self) -> EnvState {
        self.state
    }

    pub fn tick(&self) -> Tick {
        self.t
    }
}

impl crate::rl::Simulator for GridSim<'_> {
    type State = EnvState;

    fn reset(&mut self, rng: &mut crate::rl::RunRng) -> EnvState {
        let s0 = self.cfg.random_state(rng);
        self.reset_to(s0)
    }

    fn step(&mut self, action: usize, rng: &mut crate::rl::RunRng) -> crate::rl::Transition<EnvState> {
        let next = env_step(self.cfg, &self.state, Action::from_index(action), rng);
        self.t += 1;
        self.state = next;
        let out = self
            .tracker
            .as_mut()
            .expect("reset before stepping")
            .observe(self.t, &next);
        crate::rl::Transition { state: next, reward: out.reward, done: out.done }
    }

    fn key(&self, s: &EnvState) -> EnvState {
        self.cfg.observe(*s)
    }
}
