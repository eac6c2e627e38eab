//! Experiment configuration and the built-in case presets.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::env::{GridEnvConfig, LabelingRule, TaskSpec};
use crate::formula::Tick;
use crate::inference::{InferenceParams, VarDomain};
use crate::infogain::PriorMode;
use crate::pso::PsoParams;
use crate::rl::{EpsilonSchedule, LearnParams};
use crate::semantics::Completion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    /// History-keyed baseline.
    I,
    /// Extended states of the formula inferred without information gain.
    II,
    /// Extended states of the inferred target formula.
    III,
    /// As III, warm-started from the transferred source table.
    IV,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::I, Method::II, Method::III, Method::IV];

    pub fn name(self) -> &'static str {
        match self {
            Method::I => "I",
            Method::II => "II",
            Method::III => "III",
            Method::IV => "IV",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    #[default]
    Case1,
    Case2,
    Custom,
}

impl Case {
    pub fn name(self) -> &'static str {
        match self {
            Case::Case1 => "case1",
            Case::Case2 => "case2",
            Case::Custom => "custom",
        }
    }
}

/// Environment overrides; unset fields come from the case preset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub source: Option<GridEnvConfig>,
    pub target: Option<GridEnvConfig>,
    pub slip_straight: Option<f64>,
    pub stick_turn: Option<f64>,
    pub heading_in_state: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceSection {
    pub zeta: f64,
    pub rho_th: usize,
    pub lambda: f64,
    pub h_max: usize,
    pub max_inner: Option<Tick>,
    pub prior: PriorMode,
    pub completion: Option<Completion>,
    pub labeling: Option<LabelingRule>,
    /// Negative trajectories kept from the collection phase.
    pub negatives: usize,
}

impl Default for InferenceSection {
    fn default() -> Self {
        InferenceSection {
            zeta: 0.95,
            rho_th: 4,
            lambda: 0.01,
            h_max: 2,
            max_inner: None,
            prior: PriorMode::default(),
            completion: None,
            labeling: None,
            negatives: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningSection {
    pub alpha: f64,
    pub gamma: f64,
    pub tau: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of a run's episodes over which epsilon is annealed.
    pub anneal_fraction: f64,
    pub alpha_decay: f64,
}

impl Default for LearningSection {
    fn default() -> Self {
        LearningSection {
            alpha: 0.8,
            gamma: 0.99,
            tau: 5,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            anneal_fraction: 0.5,
            alpha_decay: 0.0,
        }
    }
}

impl LearningSection {
    /// Parameters of a run of `episodes` episodes.
    pub fn params(&self, episodes: usize, seed: u64) -> LearnParams {
        let anneal = ((episodes as f64) * self.anneal_fraction).round() as usize;
        LearnParams {
            alpha: self.alpha,
            gamma: self.gamma,
            tau: self.tau,
            epsilon: EpsilonSchedule { start: self.epsilon_start, end: self.epsilon_end, anneal_episodes: anneal.max(1) },
            episodes,
            seed,
            alpha_decay: self.alpha_decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub case: Case,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Seed of data collection, inference and the evaluation episodes.
    pub main_seed: u64,
    pub collection_episodes: Option<usize>,
    /// Learning episodes per run after the collection phase.
    pub budget: Option<usize>,
    /// Episodes of extended learning on the source task for method IV.
    pub source_episodes: Option<usize>,
    pub checkpoint_every: usize,
    pub eval_episodes: usize,
    /// Relative distance to the reference mean counted as converged.
    pub tolerance: f64,
    /// Consecutive checkpoints required for convergence.
    pub consecutive: usize,
    /// Training return whose first attainment is reported.
    pub reward_mark: Option<f64>,
    /// Also write history-keyed tables of method I.
    pub write_tau_tables: bool,
    pub source_data: Option<PathBuf>,
    pub target_data: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            case: Case::default(),
            methods: Method::ALL.to_vec(),
            seeds: (0..10).collect(),
            main_seed: 0,
            collection_episodes: None,
            budget: None,
            source_episodes: None,
            checkpoint_every: 500,
            eval_episodes: 200,
            tolerance: 0.05,
            consecutive: 3,
            reward_mark: None,
            write_tau_tables: false,
            source_data: None,
            target_data: None,
            out: None,
        }
    }
}

/// Swarm settings of the experiments; larger than the optimizer defaults
/// because target inference fits all parameters of a formula jointly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoSection {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub seed: u64,
}

impl Default for PsoSection {
    fn default() -> Self {
        let d = PsoParams::default();
        PsoSection { swarm_size: 64, iterations: 100, inertia: d.inertia, cognitive: d.cognitive, social: d.social, seed: 0 }
    }
}

impl PsoSection {
    pub fn params(&self) -> PsoParams {
        PsoParams {
            swarm_size: self.swarm_size,
            iterations: self.iterations,
            inertia: self.inertia,
            cognitive: self.cognitive,
            social: self.social,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSection,
    pub inference: InferenceSection,
    pub learning: LearningSection,
    pub pso: PsoSection,
    pub experiment: ExperimentSection,
}

/// Where the labeled trajectories of one task come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Collect { episodes: usize, rule: LabelingRule },
    File(PathBuf),
}

/// Fully resolved settings of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub case: Case,
    pub source_env: GridEnvConfig,
    pub target_env: GridEnvConfig,
    pub source_data: DataSource,
    pub target_data: DataSource,
    pub completion: Completion,
    pub budget: usize,
    pub source_episodes: usize,
    pub reward_mark: Option<f64>,
}

fn grid(width: i32, height: i32, horizon: u32, task: TaskSpec) -> GridEnvConfig {
    GridEnvConfig { width, height, slip_straight: 0.04, stick_turn: 0.03, horizon, task, heading_in_state: true, seed: 0 }
}

pub fn case1_source_env() -> GridEnvConfig {
    grid(9, 9, 40, TaskSpec::case1_source())
}

pub fn case1_target_env() -> GridEnvConfig {
    grid(9, 9, 40, TaskSpec::case1_target())
}

pub fn case2_source_env() -> GridEnvConfig {
    grid(5, 5, 25, TaskSpec::case2_source())
}

pub fn case2_target_env() -> GridEnvConfig {
    grid(7, 7, 40, TaskSpec::case2_target())
}

fn invalid(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    /// Preset of a case with every other setting at its default.
    pub fn preset(case: Case) -> Self {
        let mut cfg = ExperimentConfig::default();
        cfg.experiment.case = case;
        cfg
    }

    /// Checks the configuration and fills in the case preset.
    pub fn plan(&self) -> Result<Plan, ExperimentError> {
        let ex = &self.experiment;
        if ex.seeds.is_empty() {
            return Err(invalid("at least one seed is required"));
        }
        if ex.methods.is_empty() {
            return Err(invalid("at least one method is required"));
        }
        if ex.checkpoint_every == 0 || ex.eval_episodes == 0 || ex.consecutive == 0 {
            return Err(invalid("checkpoint_every, eval_episodes and consecutive must be positive"));
        }
        if !(0.0..1.0).contains(&ex.tolerance) {
            return Err(invalid("tolerance must lie in [0, 1)"));
        }
        let l = &self.learning;
        if !(0.0..=1.0).contains(&l.anneal_fraction) {
            return Err(invalid("anneal_fraction must lie in [0, 1]"));
        }
        let (src, tgt, rule, completion, collection, budget, mark) = match ex.case {
            Case::Case1 => (
                Some(case1_source_env()),
                Some(case1_target_env()),
                Some(LabelingRule::RewardAbove { threshold: 0.0 }),
                Completion::Strict,
                10_000,
                100_000,
                None,
            ),
            Case::Case2 => (
                Some(case2_source_env()),
                Some(case2_target_env()),
                Some(LabelingRule::LengthAtLeast { ticks: 20 }),
                Completion::Optimistic,
                1_000,
                30_000,
                Some(1000.0),
            ),
            Case::Custom => (None, None, None, Completion::Strict, 10_000, 100_000, None),
        };
        let mut source_env = self.env.source.clone().or(src).ok_or_else(|| invalid("env.source is required"))?;
        let mut target_env = self.env.target.clone().or(tgt).ok_or_else(|| invalid("env.target is required"))?;
        for e in [&mut source_env, &mut target_env] {
            if let Some(p) = self.env.slip_straight {
                e.slip_straight = p;
            }
            if let Some(p) = self.env.stick_turn {
                e.stick_turn = p;
            }
            if let Some(h) = self.env.heading_in_state {
                e.heading_in_state = h;
            }
            e.validate().map_err(|err| invalid(err.to_string()))?;
        }
        let collection = ex.collection_episodes.unwrap_or(collection);
        let data = |file: &Option<PathBuf>, which: &str| -> Result<DataSource, ExperimentError> {
            match (file, self.inference.labeling.or(rule)) {
                (Some(p), _) => {
                    if !p.is_file() {
                        return Err(invalid(format!("{which} data file {} does not exist", p.display())));
                    }
                    Ok(DataSource::File(p.clone()))
                }
                (None, Some(rule)) if collection > 0 => Ok(DataSource::Collect { episodes: collection, rule }),
                _ => Err(invalid(format!("experiment.{which}_data or a labeling rule is required"))),
            }
        };
        let budget = ex.budget.unwrap_or(budget);
        if budget == 0 {
            return Err(invalid("budget must be positive"));
        }
        let plan = Plan {
            case: ex.case,
            source_data: data(&ex.source_data, "source")?,
            target_data: data(&ex.target_data, "target")?,
            source_env,
            target_env,
            completion: self.inference.completion.unwrap_or(completion),
            budget,
            source_episodes: ex.source_episodes.unwrap_or(budget),
            reward_mark: ex.reward_mark.or(mark),
        };
        self.learning.params(budget, 0).validate().map_err(|e| invalid(e.to_string()))?;
        self.pso.params().validate().map_err(|e| invalid(e.to_string()))?;
        self.inference_params(&plan.source_env, plan.completion, self.inference.lambda).validate()?;
        self.inference_params(&plan.target_env, plan.completion, self.inference.lambda).validate()?;
        Ok(plan)
    }

    /// Inference settings over the position variables of `env`.
    pub fn inference_params(&self, env: &GridEnvConfig, completion: Completion, lambda: f64) -> InferenceParams {
        let i = &self.inference;
        InferenceParams {
            zeta: i.zeta,
            rho_th: i.rho_th,
            lambda,
            h_max: i.h_max,
            horizon: env.horizon,
            max_inner: i.max_inner,
            vars: vec![
                VarDomain { name: "x".into(), lo: 0, hi: env.width as i64 - 1 },
                VarDomain { name: "y".into(), lo: 0, hi: env.height as i64 - 1 },
            ],
            completion,
            pso: self.pso.params(),
        }
    }
}
