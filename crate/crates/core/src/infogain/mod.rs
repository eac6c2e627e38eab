//! Satisfaction probability of a formula under a prior over trajectories and
//! the resulting information gain `-ln P / L`.
//!
//! The exact route propagates weights over pairs of (automaton
//! configuration, environment state) for `L` ticks; the sampling route rolls
//! out trajectories from the same prior.

use rand::{Rng, SeedableRng};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::automata::{compile, AutomataError, DtaConfig, TickDta};
use crate::env::{Action, GridEnvConfig};
use crate::formula::{EffectTimes, Sdnf, Tick, Valuation};
use crate::rl::RunRng;
use crate::semantics::{evaluate_predicates, SemanticsError, Symbol};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InfoGainError {
    #[error("horizon {horizon} is shorter than the end-effect time {needed}")]
    Horizon { horizon: Tick, needed: Tick },
    #[error(transparent)]
    Automata(#[from] AutomataError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error("invalid model: {0}")]
    Model(String),
}

/// Named integer variables of one model state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarState(pub Vec<(String, i64)>);

impl Valuation for VarState {
    fn value(&self, var: &str) -> Option<i64> {
        self.0.iter().find(|(n, _)| n == var).map(|(_, v)| *v)
    }
}

/// Finite Markov chain induced by choosing actions uniformly at random.
#[derive(Debug, Clone)]
pub struct MdpModel {
    states: Vec<VarState>,
    initial: Vec<f64>,
    /// Successor distribution averaged over actions.
    marginal: Vec<Vec<(usize, f64)>>,
    /// Successors reachable with positive probability under some action.
    support: Vec<Vec<usize>>,
}

impl MdpModel {
    /// `actions[s][a]` lists `(successor, probability)` pairs.
    pub fn from_actions(
        states: Vec<VarState>,
        initial: Vec<f64>,
        actions: Vec<Vec<Vec<(usize, f64)>>>,
    ) -> Result<Self, InfoGainError> {
        let n = states.len();
        if initial.len() != n || actions.len() != n {
            return Err(InfoGainError::Model("state, initial and action tables differ in length".into()));
        }
        if (initial.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(InfoGainError::Model("initial distribution does not sum to 1".into()));
        }
        let mut marginal = Vec::with_capacity(n);
        let mut support = Vec::with_capacity(n);
        for (s, acts) in actions.iter().enumerate() {
            if acts.is_empty() {
                return Err(InfoGainError::Model(format!("state {s} has no actions")));
            }
            let mut m: Vec<(usize, f64)> = Vec::new();
            for out in acts {
                if (out.iter().map(|o| o.1).sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(InfoGainError::Model(format!("an action of state {s} does not sum to 1")));
                }
                for &(t, p) in out {
                    if t >= n {
                        return Err(InfoGainError::Model(format!("successor {t} out of range")));
                    }
                    if p <= 0.0 {
                        continue;
                    }
                    let w = p / acts.len() as f64;
                    match m.iter_mut().find(|e| e.0 == t) {
                        Some(e) => e.1 += w,
                        None => m.push((t, w)),
                    }
                }
            }
            m.sort_by_key(|e| e.0);
            support.push(m.iter().map(|e| e.0).collect());
            marginal.push(m);
        }
        Ok(MdpModel { states, initial, marginal, support })
    }

    /// The gridworld with every cell and heading, uniform initial state.
    pub fn from_grid(cfg: &GridEnvConfig) -> Self {
        let states: Vec<_> = cfg.states().collect();
        let vars = states
            .iter()
            .map(|s| {
                VarState(vec![
                    ("x".into(), s.x as i64),
                    ("y".into(), s.y as i64),
                    ("heading".into(), s.heading.index() as i64),
                ])
            })
            .collect();
        let n = states.len();
        let actions = states
            .iter()
            .map(|s| {
                Action::ALL
                    .iter()
                    .map(|&a| cfg.outcomes(s, a).into_iter().map(|(t, p)| (cfg.state_index(&t), p)).collect())
                    .collect()
            })
            .collect();
        MdpModel::from_actions(vars, vec![1.0 / n as f64; n], actions).expect("grid dynamics are well-formed")
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> &VarState {
        &self.states[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    /// Trajectories weighted by their probability under uniformly random actions.
    #[default]
    UniformRandomAction,
    /// Every feasible state sequence counts once.
    UniformFeasible,
}

#[derive(Debug, Clone)]
pub struct PriorModel {
    pub mdp: MdpModel,
    pub horizon: Tick,
    pub mode: PriorMode,
}

impl PriorModel {
    pub fn new(mdp: MdpModel, horizon: Tick, mode: PriorMode) -> Result<Self, InfoGainError> {
        if horizon < 1 {
            return Err(InfoGainError::Model("horizon must be at least 1".into()));
        }
        Ok(PriorModel { mdp, horizon, mode })
    }

    fn initial_weight(&self, s: usize) -> f64 {
        match self.mode {
            PriorMode::UniformRandomAction => self.mdp.initial[s],
            PriorMode::UniformFeasible => (self.mdp.initial[s] > 0.0) as u8 as f64,
        }
    }

    fn successors(&self, s: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (m, sup) = (&self.mdp.marginal[s], &self.mdp.support[s]);
        let random = self.mode == PriorMode::UniformRandomAction;
        (0..m.len()).map(move |k| if random { m[k] } else { (sup[k], 1.0) })
    }
}

/// Natural log of a probability; `-inf` encodes zero.
pub type LogProb = f64;

type ProductKey = SmallVec<[DtaConfig; 2]>;

/// Joint state of the automata of all disjuncts.
#[derive(Clone, PartialEq, Eq, Hash)]
enum Joint {
    Accepted,
    Running(ProductKey),
}

struct Product<'a> {
    dtas: &'a [TickDta],
    /// Distinct symbol tuples, one symbol per automaton.
    classes: Vec<SmallVec<[Symbol; 2]>>,
    /// Symbol class of each model state.
    class_of: Vec<usize>,
}

impl Product<'_> {
    /// Advances every automaton on symbol class `c`; `None` when all rejected.
    fn step(&self, key: &ProductKey, c: usize) -> Option<Joint> {
        let mut next: ProductKey = SmallVec::with_capacity(key.len());
        let mut alive = false;
        for (k, (dta, cfg)) in self.dtas.iter().zip(key).enumerate() {
            let c = if cfg.location == dta.reject() { cfg.clone() } else { dta.step(cfg, self.classes[c][k]) };
            if c.location == dta.accepting() {
                return Some(Joint::Accepted);
            }
            if c.location != dta.reject() {
                alive = true;
                next.push(c);
            } else {
                next.push(DtaConfig { location: c.location, valuation: SmallVec::from_elem(0, c.valuation.len()) });
            }
        }
        alive.then_some(Joint::Running(next))
    }

    fn step_state(&self, key: &ProductKey, s: usize) -> Option<Joint> {
        self.step(key, self.class_of[s])
    }
}

fn compile_all(phi: &Sdnf, horizon: Tick) -> Result<Vec<TickDta>, InfoGainError> {
    phi.disjuncts().iter().map(|d| compile(d, horizon).map_err(Into::into)).collect()
}

fn check_horizon(phi: &Sdnf, prior: &PriorModel) -> Result<(), InfoGainError> {
    let needed = phi.end_effect();
    if prior.horizon < needed {
        return Err(InfoGainError::Horizon { horizon: prior.horizon, needed });
    }
    Ok(())
}

fn product<'a>(prior: &PriorModel, dtas: &'a [TickDta]) -> Result<Product<'a>, InfoGainError> {
    let mut classes: Vec<SmallVec<[Symbol; 2]>> = Vec::new();
    let mut index: FxHashMap<SmallVec<[Symbol; 2]>, usize> = FxHashMap::default();
    let mut class_of = Vec::with_capacity(prior.mdp.num_states());
    for st in &prior.mdp.states {
        let mut row = SmallVec::new();
        for d in dtas {
            row.push(evaluate_predicates(d.ap(), st)?);
        }
        let c = *index.entry(row.clone()).or_insert_with(|| {
            classes.push(row);
            classes.len() - 1
        });
        class_of.push(c);
    }
    Ok(Product { dtas, classes, class_of })
}

/// Weight vectors over model states, one per joint automaton state.
#[derive(Default)]
struct Layer {
    keys: Vec<Joint>,
    weights: Vec<Vec<f64>>,
    index: FxHashMap<Joint, usize>,
}

impl Layer {
    fn slot(&mut self, key: Joint, n: usize) -> usize {
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.keys.push(key.clone());
        self.weights.push(vec![0.0; n]);
        self.index.insert(key, self.keys.len() - 1);
        self.keys.len() - 1
    }

    /// Rescales so that the largest weight is 1; returns the log factor.
    fn renormalize(&mut self) -> f64 {
        let max = self.weights.iter().flat_map(|v| v.iter()).copied().fold(0.0, f64::max);
        if max == 0.0 || max == 1.0 {
            return 0.0;
        }
        self.weights.iter_mut().for_each(|v| v.iter_mut().for_each(|x| *x /= max));
        max.ln()
    }

    fn log_accepted(&self) -> f64 {
        match self.index.get(&Joint::Accepted) {
            Some(&i) => self.weights[i].iter().sum::<f64>().ln(),
            None => f64::NEG_INFINITY,
        }
    }
}

/// Exact `ln P(phi)` under the prior.
pub fn satisfaction_probability(phi: &Sdnf, prior: &PriorModel) -> Result<LogProb, InfoGainError> {
    check_horizon(phi, prior)?;
    let dtas = compile_all(phi, prior.horizon)?;
    let prod = product(prior, &dtas)?;
    let n = prior.mdp.num_states();
    let succ: Vec<Vec<(usize, f64)>> = (0..n).map(|s| prior.successors(s).collect()).collect();
    let init: ProductKey = dtas.iter().map(|d| d.initial_config()).collect();

    let mut layer = Layer::default();
    let mut total = vec![0.0; n];
    for s in 0..n {
        let w = prior.initial_weight(s);
        if w == 0.0 {
            continue;
        }
        total[s] += w;
        if let Some(j) = prod.step_state(&init, s) {
            let i = layer.slot(j, n);
            layer.weights[i][s] += w;
        }
    }
    let mut scale = layer.renormalize();
    let mut total_scale = 0.0;
    for _ in 1..=prior.horizon {
        let mut next = Layer::default();
        for (key, weights) in layer.keys.iter().zip(&layer.weights) {
            // Destination slot per symbol class.
            let targets: SmallVec<[Option<usize>; 8]> = (0..prod.classes.len())
                .map(|c| {
                    let j = match key {
                        Joint::Accepted => Some(Joint::Accepted),
                        Joint::Running(k) => prod.step(k, c),
                    };
                    j.map(|j| next.slot(j, n))
                })
                .collect();
            for (s, &w) in weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for &(t, p) in &succ[s] {
                    if let Some(i) = targets[prod.class_of[t]] {
                        next.weights[i][t] += w * p;
                    }
                }
            }
        }
        layer = next;
        scale += layer.renormalize();

        let mut nt = vec![0.0; n];
        for (s, &w) in total.iter().enumerate() {
            if w != 0.0 {
                for &(t, p) in &succ[s] {
                    nt[t] += w * p;
                }
            }
        }
        let max = nt.iter().copied().fold(0.0, f64::max);
        nt.iter_mut().for_each(|x| *x /= max);
        total_scale += max.ln();
        total = nt;
    }
    let acc = layer.log_accepted() + scale;
    if acc == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let all = total.iter().sum::<f64>().ln() + total_scale;
    Ok((acc - all).min(0.0))
}

/// Sampled estimate of `P(phi)` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

/// Monte Carlo estimate from `samples` rollouts of the prior.
pub fn satisfaction_probability_mc(
    phi: &Sdnf,
    prior: &PriorModel,
    samples: usize,
    seed: u64,
) -> Result<McEstimate, InfoGainError> {
    check_horizon(phi, prior)?;
    let dtas = compile_all(phi, prior.horizon)?;
    let prod = product(prior, &dtas)?;
    let n = prior.mdp.num_states();
    let l = prior.horizon as usize;
    // Backward counts of feasible continuations, used by the count prior.
    let counts: Vec<Vec<f64>> = if prior.mode == PriorMode::UniformFeasible {
        let mut c = vec![vec![1.0; n]];
        for k in 1..=l {
            let prev = &c[k - 1];
            let row = (0..n).map(|s| prior.mdp.support[s].iter().map(|&t| prev[t]).sum()).collect();
            c.push(row);
        }
        c
    } else {
        Vec::new()
    };
    let pick = |rng: &mut RunRng, items: &mut dyn Iterator<Item = (usize, f64)>| -> usize {
        let items: SmallVec<[(usize, f64); 8]> = items.collect();
        let total: f64 = items.iter().map(|e| e.1).sum();
        let mut u = rng.gen::<f64>() * total;
        for &(s, w) in &items {
            if u < w {
                return s;
            }
            u -= w;
        }
        items.iter().rev().find(|e| e.1 > 0.0).map(|e| e.0).expect("some positive weight")
    };
    let mut rng = RunRng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples.max(1) {
        let mut s = match prior.mode {
            PriorMode::UniformRandomAction => pick(&mut rng, &mut (0..n).map(|s| (s, prior.mdp.initial[s]))),
            PriorMode::UniformFeasible => {
                pick(&mut rng, &mut (0..n).map(|s| (s, prior.initial_weight(s) * counts[l][s])))
            }
        };
        let init: ProductKey = dtas.iter().map(|d| d.initial_config()).collect();
        let mut joint = prod.step_state(&init, s);
        for k in 1..=l {
            s = match prior.mode {
                PriorMode::UniformRandomAction => pick(&mut rng, &mut prior.mdp.marginal[s].iter().copied()),
                PriorMode::UniformFeasible => {
                    pick(&mut rng, &mut prior.mdp.support[s].iter().map(|&t| (t, counts[l - k][t])))
                }
            };
            joint = match joint {
                Some(Joint::Running(key)) => prod.step_state(&key, s),
                other => other,
            };
        }
        if joint == Some(Joint::Accepted) {
            hits += 1;
        }
    }
    let m = samples.max(1) as f64;
    let p = hits as f64 / m;
    Ok(McEstimate { estimate: p, stderr: (p * (1.0 - p) / m).sqrt() })
}

/// `-ln P / L`, defined as 0 when `P` is 0 or 1.
pub fn information_gain(log_p: LogProb, horizon: Tick) -> f64 {
    if log_p == f64::NEG_INFINITY || log_p >= -1e-12 {
        0.0
    } else {
        -log_p / horizon as f64
    }
}

/// Memoized gains of formulas under one prior.
///
/// A formula whose end-effect time exceeds the prior horizon `L` is scored
/// with the prior extended to that end-effect time; the gain is still
/// normalized by `L`.
#[derive(Debug)]
pub struct GainCache {
    prior: PriorModel,
    cache: FxHashMap<Sdnf, f64>,
}

impl GainCache {
    pub fn new(prior: PriorModel) -> Self {
        GainCache { prior, cache: FxHashMap::default() }
    }

    pub fn prior(&self) -> &PriorModel {
        &self.prior
    }

    pub fn gain(&mut self, phi: &Sdnf) -> Result<f64, InfoGainError> {
        if let Some(&g) = self.cache.get(phi) {
            return Ok(g);
        }
        let needed = phi.end_effect();
        let log_p = if needed > self.prior.horizon {
            let extended = PriorModel { horizon: needed, ..self.prior.clone() };
            satisfaction_probability(phi, &extended)?
        } else {
            satisfaction_probability(phi, &self.prior)?
        };
        let g = information_gain(log_p, self.prior.horizon);
        self.cache.insert(phi.clone(), g);
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_empty()
    }
}
