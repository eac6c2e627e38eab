//! Tabular Q-learning over history keys (the baseline) and over states
//! extended with an automaton configuration.

mod io;

use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::automata::{ClockValue, DtaConfig, LocId, TickDta};
use crate::formula::{Sdnf, Valuation};

pub use io::{read_qtable, write_qtable, KeyText, QTableIoError};

/// Random number generator owned by one learning run.
pub type RunRng = ChaCha8Rng;

/// Mixes a stage or node identifier into a base seed.
pub fn sub_seed(base: u64, tag: u64) -> u64 {
    base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Number of actions of every simulator.
pub const NUM_ACTIONS: usize = 3;

pub type ActionValues = [f64; NUM_ACTIONS];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RlError {
    #[error("formula has {disjuncts} disjuncts but {dtas} automata were given")]
    DtaCount { disjuncts: usize, dtas: usize },
    #[error("automaton {0} was not compiled from the matching disjunct")]
    DtaMismatch(usize),
    #[error("invalid learning parameters: {0}")]
    Params(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<S> {
    pub state: S,
    pub reward: f64,
    pub done: bool,
}

/// Episodic environment with a fixed action set of size [`NUM_ACTIONS`].
pub trait Simulator {
    type State: Copy + Eq + Hash + std::fmt::Debug;

    /// Samples an initial state and starts a new episode.
    fn reset(&mut self, rng: &mut RunRng) -> Self::State;

    fn step(&mut self, action: usize, rng: &mut RunRng) -> Transition<Self::State>;

    /// Part of the state the learner may condition on.
    fn key(&self, s: &Self::State) -> Self::State {
        *s
    }
}

/// Linear annealing from `start` to `end` over `anneal_episodes`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_episodes: usize,
}

impl EpsilonSchedule {
    pub fn constant(eps: f64) -> Self {
        EpsilonSchedule { start: eps, end: eps, anneal_episodes: 0 }
    }

    pub fn value(&self, episode: usize) -> f64 {
        if episode >= self.anneal_episodes {
            return self.end;
        }
        let frac = episode as f64 / self.anneal_episodes as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnParams {
    pub alpha: f64,
    pub gamma: f64,
    pub tau: usize,
    pub epsilon: EpsilonSchedule,
    pub episodes: usize,
    pub seed: u64,
    /// Learning rate in episode `e` is `alpha / (1 + alpha_decay * e)`.
    #[serde(default)]
    pub alpha_decay: f64,
}

impl Default for LearnParams {
    fn default() -> Self {
        LearnParams {
            alpha: 0.8,
            gamma: 0.99,
            tau: 5,
            epsilon: EpsilonSchedule { start: 1.0, end: 0.05, anneal_episodes: 50_000 },
            episodes: 100_000,
            seed: 0,
            alpha_decay: 0.0,
        }
    }
}

impl LearnParams {
    pub fn validate(&self) -> Result<(), RlError> {
        if !(self.alpha >= 0.0 && self.alpha <= 1.0) {
            return Err(RlError::Params(format!("alpha = {} outside [0,1]", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(RlError::Params(format!("gamma = {} outside (0,1]", self.gamma)));
        }
        if self.tau < 1 {
            return Err(RlError::Params("tau must be at least 1".into()));
        }
        let eps = [self.epsilon.start, self.epsilon.end];
        if eps.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(RlError::Params("epsilon outside [0,1]".into()));
        }
        if self.alpha_decay < 0.0 {
            return Err(RlError::Params("alpha_decay must be non-negative".into()));
        }
        Ok(())
    }

    fn alpha_at(&self, episode: usize) -> f64 {
        self.alpha / (1.0 + self.alpha_decay * episode as f64)
    }
}

/// Action values keyed by state; absent keys read as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable<K: Eq + Hash> {
    map: FxHashMap<K, ActionValues>,
}

impl<K: Eq + Hash> Default for QTable<K> {
    fn default() -> Self {
        QTable { map: FxHashMap::default() }
    }
}

impl<K: Eq + Hash + Clone> QTable<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, k: &K) -> ActionValues {
        self.map.get(k).copied().unwrap_or([0.0; NUM_ACTIONS])
    }

    pub fn contains(&self, k: &K) -> bool {
        self.map.contains_key(k)
    }

    pub fn set(&mut self, k: K, v: ActionValues) {
        self.map.insert(k, v);
    }

    pub fn max(&self, k: &K) -> f64 {
        self.get(k).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Q(k,a) <- (1-alpha) Q(k,a) + alpha * target`.
    pub fn update(&mut self, k: &K, a: usize, target: f64, alpha: f64) {
        if let Some(v) = self.map.get_mut(k) {
            v[a] = (1.0 - alpha) * v[a] + alpha * target;
        } else {
            let mut v = [0.0; NUM_ACTIONS];
            v[a] = alpha * target;
            self.map.insert(k.clone(), v);
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &ActionValues)> {
        self.map.iter()
    }
}

impl<K: Eq + Hash> FromIterator<(K, ActionValues)> for QTable<K> {
    fn from_iter<I: IntoIterator<Item = (K, ActionValues)>>(iter: I) -> Self {
        QTable { map: iter.into_iter().collect() }
    }
}

/// Greedy choice with uniformly random tie-breaking.
pub fn greedy_action(values: &ActionValues, rng: &mut RunRng) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: SmallVec<[usize; NUM_ACTIONS]> = (0..NUM_ACTIONS).filter(|&a| values[a] == best).collect();
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.gen_range(0..ties.len())]
    }
}

fn epsilon_greedy(values: &ActionValues, eps: f64, rng: &mut RunRng) -> usize {
    if eps > 0.0 && rng.gen::<f64>() < eps {
        rng.gen_range(0..NUM_ACTIONS)
    } else {
        greedy_action(values, rng)
    }
}

/// States visited and rewards received in one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord<S> {
    pub states: Vec<S>,
    pub rewards: Vec<f64>,
}

impl<S> EpisodeRecord<S> {
    pub fn total(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Current state followed by the `tau - 1` previous ones, oldest first.
pub type TauKey<S> = SmallVec<[S; 5]>;

/// Baseline learner over history keys.
#[derive(Debug, Clone)]
pub struct TauLearner<Sim: Simulator> {
    sim: Sim,
    params: LearnParams,
    q: QTable<TauKey<Sim::State>>,
    rng: RunRng,
    episode: usize,
}

impl<Sim: Simulator + Clone> TauLearner<Sim> {
    pub fn new(sim: Sim, params: LearnParams) -> Result<Self, RlError> {
        params.validate()?;
        let rng = RunRng::seed_from_u64(params.seed);
        Ok(TauLearner { sim, params, q: QTable::new(), rng, episode: 0 })
    }

    pub fn q(&self) -> &QTable<TauKey<Sim::State>> {
        &self.q
    }

    pub fn into_q(self) -> QTable<TauKey<Sim::State>> {
        self.q
    }

    pub fn episodes_done(&self) -> usize {
        self.episode
    }

    /// One exploring, learning episode.
    pub fn run_episode(&mut self) -> EpisodeRecord<Sim::State> {
        let eps = self.params.epsilon.value(self.episode);
        let alpha = self.params.alpha_at(self.episode);
        let rec = tau_episode(&mut self.sim, QAccess::Learn(&mut self.q, alpha), &self.params, eps, &mut self.rng);
        self.episode += 1;
        rec
    }

    /// Runs `n` episodes; returns their cumulative rewards.
    pub fn train(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.run_episode().total()).collect()
    }

    /// Mean return of the greedy policy; leaves the learner untouched.
    pub fn greedy_eval(&self, episodes: usize, seed: u64) -> f64 {
        let mut sim = self.sim.clone();
        let mut rng = RunRng::seed_from_u64(seed);
        let total: f64 = (0..episodes)
            .map(|_| tau_episode(&mut sim, QAccess::Eval(&self.q), &self.params, 0.0, &mut rng).total())
            .sum();
        total / episodes.max(1) as f64
    }
}

/// Table access of one episode: learning updates it, evaluation only reads.
enum QAccess<'a, K: Eq + Hash + Clone> {
    Learn(&'a mut QTable<K>, f64),
    Eval(&'a QTable<K>),
}

impl<K: Eq + Hash + Clone> QAccess<'_, K> {
    fn table(&self) -> &QTable<K> {
        match self {
            QAccess::Learn(q, _) => q,
            QAccess::Eval(q) => q,
        }
    }

    fn learn(&mut self, key: &K, a: usize, reward: f64, next: &K, gamma: f64, done: bool) {
        if let QAccess::Learn(q, alpha) = self {
            let boot = if done { 0.0 } else { gamma * q.max(next) };
            q.update(key, a, reward + boot, *alpha);
        }
    }
}

fn tau_episode<Sim: Simulator>(
    sim: &mut Sim,
    mut q: QAccess<'_, TauKey<Sim::State>>,
    params: &LearnParams,
    eps: f64,
    rng: &mut RunRng,
) -> EpisodeRecord<Sim::State> {
    let s0 = sim.reset(rng);
    let k0 = sim.key(&s0);
    let mut key: TauKey<Sim::State> = SmallVec::from_elem(k0, params.tau);
    let mut rec = EpisodeRecord { states: vec![s0], rewards: Vec::new() };
    loop {
        let a = epsilon_greedy(&q.table().get(&key), eps, rng);
        let tr = sim.step(a, rng);
        let mut next = key.clone();
        next.remove(0);
        next.push(sim.key(&tr.state));
        q.learn(&key, a, tr.reward, &next, params.gamma, tr.done);
        rec.states.push(tr.state);
        rec.rewards.push(tr.reward);
        key = next;
        if tr.done {
            return rec;
        }
    }
}

/// Environment state joined with the configuration of the automaton of one
/// disjunct.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExtendedState<S> {
    pub env: S,
    /// 0-based disjunct index.
    pub disjunct: u16,
    pub location: LocId,
    pub valuation: SmallVec<[ClockValue; 4]>,
}

impl<S> ExtendedState<S> {
    pub fn new(env: S, disjunct: usize, cfg: &DtaConfig) -> Self {
        ExtendedState {
            env,
            disjunct: disjunct as u16,
            location: cfg.location,
            valuation: cfg.valuation.clone(),
        }
    }

    pub fn config(&self) -> DtaConfig {
        DtaConfig { location: self.location, valuation: self.valuation.clone() }
    }
}

/// 0-based index of the disjunct whose first primitive's region centroid is
/// nearest to the initial position; ties go to the lowest index.
pub fn select_disjunct<V: Valuation + ?Sized>(formula: &Sdnf, s0: &V) -> usize {
    let x = s0.value("x").unwrap_or(0) as f64;
    let y = s0.value("y").unwrap_or(0) as f64;
    let mut best = (0, f64::INFINITY);
    for (i, d) in formula.disjuncts().iter().enumerate() {
        let (cx, cy) = d.primitives()[0].region().centroid();
        let dist = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
        if dist < best.1 {
            best = (i, dist);
        }
    }
    best.0
}

/// Learner over extended states.
#[derive(Debug, Clone)]
pub struct ExtendedLearner<'d, Sim: Simulator> {
    sim: Sim,
    formula: Sdnf,
    dtas: &'d [TickDta],
    params: LearnParams,
    q: QTable<ExtendedState<Sim::State>>,
    rng: RunRng,
    episode: usize,
}

/// Checks that `dtas[i]` was compiled from disjunct `i`.
pub fn check_dtas(formula: &Sdnf, dtas: &[TickDta]) -> Result<(), RlError> {
    if formula.disjuncts().len() != dtas.len() {
        return Err(RlError::DtaCount { disjuncts: formula.disjuncts().len(), dtas: dtas.len() });
    }
    for (i, (d, dta)) in formula.disjuncts().iter().zip(dtas).enumerate() {
        let regions: Vec<_> = d.primitives().iter().map(|p| p.region().clone()).collect();
        if regions.as_slice() != dta.ap() {
            return Err(RlError::DtaMismatch(i));
        }
    }
    Ok(())
}

impl<'d, Sim> ExtendedLearner<'d, Sim>
where
    Sim: Simulator + Clone,
    Sim::State: Valuation,
{
    pub fn new(
        sim: Sim,
        formula: Sdnf,
        dtas: &'d [TickDta],
        params: LearnParams,
        initial_q: Option<QTable<ExtendedState<Sim::State>>>,
    ) -> Result<Self, RlError> {
        params.validate()?;
        check_dtas(&formula, dtas)?;
        let rng = RunRng::seed_from_u64(params.seed);
        Ok(ExtendedLearner { sim, formula, dtas, params, q: initial_q.unwrap_or_default(), rng, episode: 0 })
    }

    pub fn q(&self) -> &QTable<ExtendedState<Sim::State>> {
        &self.q
    }

    pub fn into_q(self) -> QTable<ExtendedState<Sim::State>> {
        self.q
    }

    pub fn episodes_done(&self) -> usize {
        self.episode
    }

    pub fn run_episode(&mut self) -> EpisodeRecord<Sim::State> {
        let eps = self.params.epsilon.value(self.episode);
        let alpha = self.params.alpha_at(self.episode);
        let rec = extended_episode(
            &mut self.sim,
            QAccess::Learn(&mut self.q, alpha),
            &self.formula,
            self.dtas,
            self.params.gamma,
            eps,
            &mut self.rng,
        );
        self.episode += 1;
        rec
    }

    pub fn train(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.run_episode().total()).collect()
    }

    pub fn greedy_eval(&self, episodes: usize, seed: u64) -> f64 {
        greedy_eval(&self.sim, &self.formula, self.dtas, &self.q, episodes, seed)
    }
}

fn extended_episode<Sim>(
    sim: &mut Sim,
    mut q: QAccess<'_, ExtendedState<Sim::State>>,
    formula: &Sdnf,
    dtas: &[TickDta],
    gamma: f64,
    eps: f64,
    rng: &mut RunRng,
) -> EpisodeRecord<Sim::State>
where
    Sim: Simulator,
    Sim::State: Valuation,
{
    let s0 = sim.reset(rng);
    let i = select_disjunct(formula, &s0);
    let dta = &dtas[i];
    let mut cfg = dta.initial_config();
    dta.step_in_place(&mut cfg, dta.symbol_of(&s0));
    let mut key = ExtendedState::new(sim.key(&s0), i, &cfg);
    let mut rec = EpisodeRecord { states: vec![s0], rewards: Vec::new() };
    loop {
        let a = epsilon_greedy(&q.table().get(&key), eps, rng);
        let tr = sim.step(a, rng);
        dta.step_in_place(&mut cfg, dta.symbol_of(&tr.state));
        let next = ExtendedState::new(sim.key(&tr.state), i, &cfg);
        q.learn(&key, a, tr.reward, &next, gamma, tr.done);
        rec.states.push(tr.state);
        rec.rewards.push(tr.reward);
        key = next;
        if tr.done {
            return rec;
        }
    }
}

/// Baseline learning for `params.episodes` episodes.
pub fn tau_q_learning<Sim: Simulator + Clone>(
    sim: Sim,
    params: &LearnParams,
) -> Result<(QTable<TauKey<Sim::State>>, Vec<f64>), RlError> {
    let mut l = TauLearner::new(sim, params.clone())?;
    let curve = l.train(params.episodes);
    Ok((l.into_q(), curve))
}

/// Extended-state learning for `params.episodes` episodes, optionally warm
/// started from `initial_q`.
pub fn extended_q_learning<Sim>(
    sim: Sim,
    formula: &Sdnf,
    dtas: &[TickDta],
    params: &LearnParams,
    initial_q: Option<QTable<ExtendedState<Sim::State>>>,
) -> Result<(QTable<ExtendedState<Sim::State>>, Vec<f64>), RlError>
where
    Sim: Simulator + Clone,
    Sim::State: Valuation,
{
    let mut l = ExtendedLearner::new(sim, formula.clone(), dtas, params.clone(), initial_q)?;
    let curve = l.train(params.episodes);
    Ok((l.into_q(), curve))
}

/// Mean return of the greedy extended policy over `episodes` fresh episodes.
pub fn greedy_eval<Sim>(
    sim: &Sim,
    formula: &Sdnf,
    dtas: &[TickDta],
    q: &QTable<ExtendedState<Sim::State>>,
    episodes: usize,
    seed: u64,
) -> f64
where
    Sim: Simulator + Clone,
    Sim::State: Valuation,
{
    let mut sim = sim.clone();
    let mut rng = RunRng::seed_from_u64(seed);
    let total: f64 = (0..episodes)
        .map(|_| extended_episode(&mut sim, QAccess::Eval(q), formula, dtas, 1.0, 0.0, &mut rng).total())
        .sum();
    total / episodes.max(1) as f64
}
