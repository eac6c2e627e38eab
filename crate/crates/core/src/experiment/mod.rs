//! Four-method comparison experiments and their artifacts.
//!
//! A run collects labeled trajectories on both tasks, infers the source
//! formula and a structurally transferable target formula, then learns the
//! target task with each method and seed, checkpointing the greedy policy.

mod config;
pub mod plot;

pub use config::{
    case1_source_env, case1_target_env, case2_source_env, case2_target_env, Case, DataSource, EnvSection,
    ExperimentConfig, ExperimentSection, InferenceSection, LearningSection, Method, Plan, PsoSection,
};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::automata::{compile, AutomataError, TickDta};
use crate::env::{collect_phase, CollectError, CollectionReport, GridEnvConfig, GridSim, LabelingRule};
use crate::formula::{effect_times, structurally_equivalent, structurally_transferable, Sdnf, Tick};
use crate::inference::{
    check_satisfying, infer_target_constrained, log_to_csv, mitl_tree, InferenceError, InferenceParams,
};
use crate::infogain::{GainCache, InfoGainError, MdpModel, PriorModel};
use crate::rl::{sub_seed, write_qtable, ExtendedLearner, RlError, TauLearner};
use crate::semantics::{
    classification_rate, read_trajectories, trajectories_to_jsonl, IoError, LabeledTrajectory, SemanticsError,
};
use crate::transfer::{transfer_q, TransferContext, TransferError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("logical transferability is not identified: {0}")]
    NotIdentified(String),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Collect(#[from] CollectError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Automata(#[from] AutomataError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Gain(#[from] InfoGainError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error("dataset: {0}")]
    Data(#[from] IoError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed curve file: {0}")]
    Curve(String),
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

/// Writes `text` to `path`, creating parent directories.
pub fn write_file(path: &Path, text: &str) -> Result<()> {
    let io = |source| ExperimentError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, text).map_err(io)
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.to_path_buf(), source })
}

/// Automata of every disjunct of `phi`, compiled with a horizon covering both
/// the episode length and the formula's end-effect time.
pub fn compile_formula(phi: &Sdnf, episode_horizon: Tick) -> Result<Vec<TickDta>> {
    let h = episode_horizon.max(effect_times(phi).1);
    Ok(phi.disjuncts().iter().map(|d| compile(d, h)).collect::<Result<_, _>>()?)
}

/// Prior of the information gain on `env`.
pub fn gain_cache(env: &GridEnvConfig, mode: crate::infogain::PriorMode) -> Result<GainCache> {
    Ok(GainCache::new(PriorModel::new(MdpModel::from_grid(env), env.horizon, mode)?))
}

/// Data collection phase: the first `episodes` episodes of history-keyed
/// learning whose schedule spans `episodes + budget` episodes.
pub fn collect_data(
    env: &GridEnvConfig,
    learning: &LearningSection,
    episodes: usize,
    budget: usize,
    rule: LabelingRule,
    negatives: usize,
    seed: u64,
) -> Result<(Vec<LabeledTrajectory>, CollectionReport)> {
    let params = learning.params(episodes + budget, seed);
    let mut learner = TauLearner::new(GridSim::new(env), params)?;
    Ok(collect_phase(&mut learner, episodes, rule, negatives, sub_seed(seed, 1))?)
}

fn load_data(
    source: &DataSource,
    env: &GridEnvConfig,
    cfg: &ExperimentConfig,
    plan: &Plan,
    seed: u64,
) -> Result<(Vec<LabeledTrajectory>, String)> {
    match source {
        DataSource::File(p) => {
            let data = read_trajectories(p)?;
            let pos = data.iter().filter(|d| d.is_positive()).count();
            let text = format!("file: {}\npositives: {pos}\nnegatives: {}\n", p.display(), data.len() - pos);
            Ok((data, text))
        }
        DataSource::Collect { episodes, rule } => {
            let (data, r) =
                collect_data(env, &cfg.learning, *episodes, plan.budget, *rule, cfg.inference.negatives, seed)?;
            let text = format!(
                "episodes: {}\npositives: {}\nnegatives: {}\nnegatives kept: {}\n",
                r.episodes, r.positives, r.negatives_total, r.negatives_sampled
            );
            Ok((data, text))
        }
    }
}

/// Formulas inferred for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Formulas {
    pub source: Sdnf,
    pub target: Sdnf,
    /// Target formula inferred without information gain (method II).
    pub uninformed: Option<Sdnf>,
}

fn params_for(cfg: &ExperimentConfig, env: &GridEnvConfig, plan: &Plan, lambda: f64, seed: u64) -> InferenceParams {
    let mut p = cfg.inference_params(env, plan.completion, lambda);
    p.pso.seed = sub_seed(p.pso.seed, seed);
    p
}

/// Infers the source formula and the target formulas, writing trees, logs
/// and formulas below `out`.
pub fn infer_formulas(
    cfg: &ExperimentConfig,
    plan: &Plan,
    source_data: &[LabeledTrajectory],
    target_data: &[LabeledTrajectory],
    out: &Path,
) -> Result<Formulas> {
    let main = cfg.experiment.main_seed;
    let i = &cfg.inference;
    let sp = params_for(cfg, &plan.source_env, plan, i.lambda, main);
    let mut cache = gain_cache(&plan.source_env, i.prior)?;
    let tree = mitl_tree(source_data, &sp, Some(&mut cache))?;
    write_file(&out.join("source/tree.txt"), &tree.tree.to_string())?;
    write_file(&out.join("source/inference_log.csv"), &log_to_csv(&tree.log))?;
    let source = match tree.formula {
        Some(f) if check_satisfying(&f, source_data, i.zeta, i.rho_th, plan.completion)? => f,
        other => {
            let why = match other {
                Some(f) => format!("source formula {f} is not satisfying"),
                None => "no source formula".to_string(),
            };
            write_file(&out.join("not_identified.txt"), &format!("{why}\n"))?;
            return Err(ExperimentError::NotIdentified(why));
        }
    };
    write_file(&out.join("source/formula.txt"), &format!("{source}\n"))?;

    let tp = params_for(cfg, &plan.target_env, plan, i.lambda, main);
    let mut cache = gain_cache(&plan.target_env, i.prior)?;
    let run = infer_target_constrained(target_data, &source, &tp, Some(&mut cache))?;
    write_file(&out.join("target/inference_log.csv"), &log_to_csv(&run.log))?;
    let Some(target) = run.formula else {
        let why = format!("no satisfying target formula transferable from {source}");
        write_file(&out.join("not_identified.txt"), &format!("{why}\n"))?;
        return Err(ExperimentError::NotIdentified(why));
    };
    write_file(&out.join("target/formula.txt"), &format!("{target}\n"))?;

    let uninformed = if cfg.experiment.methods.contains(&Method::II) {
        let up = params_for(cfg, &plan.target_env, plan, 0.0, main);
        let run = infer_target_constrained(target_data, &source, &up, None)?;
        write_file(&out.join("target/inference_log_uninformed.csv"), &log_to_csv(&run.log))?;
        let Some(f) = run.formula else {
            let why = "no satisfying target formula without information gain".to_string();
            write_file(&out.join("not_identified.txt"), &format!("{why}\n"))?;
            return Err(ExperimentError::NotIdentified(why));
        };
        write_file(&out.join("target/formula_uninformed.txt"), &format!("{f}\n"))?;
        Some(f)
    } else {
        None
    };

    let mut report = String::new();
    let _ = writeln!(report, "source: {source}");
    let _ = writeln!(report, "target: {target}");
    let _ = writeln!(report, "source classification rate: {}", classification_rate(source_data, &source, plan.completion)?);
    let _ = writeln!(report, "target classification rate: {}", classification_rate(target_data, &target, plan.completion)?);
    let _ = writeln!(report, "target copies of the source skeleton: {}", run.copies);
    let _ = writeln!(report, "structurally equivalent: {}", structurally_equivalent(&source, &target));
    let _ = writeln!(report, "structurally transferable: {}", structurally_transferable(&source, &target));
    if let Some(u) = &uninformed {
        let _ = writeln!(report, "uninformed target: {u}");
    }
    write_file(&out.join("transferability.txt"), &report)?;
    Ok(Formulas { source, target, uninformed })
}

/// Greedy-policy checkpoints and training returns of one learning run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    /// Cumulative reward of each training episode.
    pub curve: Vec<f64>,
    /// `(episodes trained, greedy mean)`, starting before training.
    pub checkpoints: Vec<(usize, f64)>,
}

trait Trainable {
    fn episode(&mut self) -> f64;
    fn greedy(&self, episodes: usize, seed: u64) -> f64;
}

impl Trainable for TauLearner<GridSim<'_>> {
    fn episode(&mut self) -> f64 {
        self.run_episode().total()
    }
    fn greedy(&self, episodes: usize, seed: u64) -> f64 {
        self.greedy_eval(episodes, seed)
    }
}

impl Trainable for ExtendedLearner<'_, GridSim<'_>> {
    fn episode(&mut self) -> f64 {
        self.run_episode().total()
    }
    fn greedy(&self, episodes: usize, seed: u64) -> f64 {
        self.greedy_eval(episodes, seed)
    }
}

fn train<L: Trainable>(l: &mut L, budget: usize, every: usize, eval_episodes: usize, eval_seed: u64) -> RunTrace {
    let mut curve = Vec::with_capacity(budget);
    let mut checkpoints = vec![(0, l.greedy(eval_episodes, eval_seed))];
    while curve.len() < budget {
        let n = every.min(budget - curve.len());
        for _ in 0..n {
            curve.push(l.episode());
        }
        checkpoints.push((curve.len(), l.greedy(eval_episodes, eval_seed)));
    }
    RunTrace { curve, checkpoints }
}

/// Episode count at the first checkpoint that starts `k` consecutive
/// checkpoints within `tol * |reference|` of `reference`.
pub fn converged_at(checkpoints: &[(usize, f64)], reference: f64, tol: f64, k: usize) -> Option<usize> {
    let thr = reference - tol * reference.abs();
    checkpoints.windows(k).find(|w| w.iter().all(|&(_, v)| v >= thr)).map(|w| w[0].0)
}

/// 1-based training episode of the first return at or above `mark`.
pub fn first_reaching(curve: &[f64], mark: f64) -> Option<usize> {
    curve.iter().position(|&r| r >= mark).map(|i| i + 1)
}

/// Median with absent values ranked above every present one; `None` when the
/// median itself is absent.
pub fn median(values: &[Option<usize>]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().map(|x| x.map_or(f64::INFINITY, |n| n as f64)).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let m = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
    m.is_finite().then_some(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub seed: u64,
    pub episodes_to_convergence: Option<usize>,
    /// Mean of the last `consecutive` greedy checkpoints.
    pub final_mean_reward: f64,
    pub best_checkpoint: f64,
    pub first_episode_at_mark: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub case: Case,
    pub formulas: Formulas,
    /// Best greedy mean over every run; the convergence reference.
    pub reference: f64,
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn rows_of(&self, m: Method) -> impl Iterator<Item = &SummaryRow> {
        self.rows.iter().filter(move |r| r.method == m)
    }

    pub fn median_convergence(&self, m: Method) -> Option<f64> {
        median(&self.rows_of(m).map(|r| r.episodes_to_convergence).collect::<Vec<_>>())
    }

    pub fn median_mark(&self, m: Method) -> Option<f64> {
        median(&self.rows_of(m).map(|r| r.first_episode_at_mark).collect::<Vec<_>>())
    }

    pub fn mean_final_reward(&self, m: Method) -> f64 {
        let v: Vec<f64> = self.rows_of(m).map(|r| r.final_mean_reward).collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    }

    pub fn to_csv(&self) -> String {
        let opt = |x: Option<usize>| x.map_or(String::new(), |n| n.to_string());
        let mut s = String::from(
            "case,method,seed,episodes_to_convergence,final_mean_reward,best_checkpoint,first_episode_at_mark,reference\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                self.case.name(),
                r.method,
                r.seed,
                opt(r.episodes_to_convergence),
                r.final_mean_reward,
                r.best_checkpoint,
                opt(r.first_episode_at_mark),
                self.reference
            );
        }
        s
    }
}

/// Runs one method for one seed, writing its directory below `out`.
#[allow(clippy::too_many_arguments)]
fn run_method(
    cfg: &ExperimentConfig,
    plan: &Plan,
    f: &Formulas,
    dtas: &Dtas,
    method: Method,
    seed: u64,
    eval_seed: u64,
    dir: &Path,
) -> Result<RunTrace> {
    let ex = &cfg.experiment;
    let params = cfg.learning.params(plan.budget, sub_seed(seed, 100 + method as u64));
    let target = GridSim::new(&plan.target_env);
    let every = ex.checkpoint_every;
    let trace = match method {
        Method::I => {
            let mut l = TauLearner::new(target, params)?;
            let t = train(&mut l, plan.budget, every, ex.eval_episodes, eval_seed);
            if ex.write_tau_tables {
                write_file(&dir.join("qtable.csv"), &write_qtable(l.q()))?;
            }
            write_file(&dir.join("formula.txt"), &format!("none (history of {} states)\n", cfg.learning.tau))?;
            t
        }
        Method::II | Method::III => {
            let (phi, d) = if method == Method::II {
                (f.uninformed.as_ref().expect("uninformed formula inferred"), &dtas.uninformed)
            } else {
                (&f.target, &dtas.target)
            };
            let mut l = ExtendedLearner::new(target, phi.clone(), d, params, None)?;
            let t = train(&mut l, plan.budget, every, ex.eval_episodes, eval_seed);
            write_file(&dir.join("qtable.csv"), &write_qtable(l.q()))?;
            write_file(&dir.join("formula.txt"), &format!("{phi}\n"))?;
            t
        }
        Method::IV => {
            let sp = cfg.learning.params(plan.source_episodes, sub_seed(seed, 200));
            let mut src = ExtendedLearner::new(GridSim::new(&plan.source_env), f.source.clone(), &dtas.source, sp, None)?;
            src.train(plan.source_episodes);
            let source_greedy = src.greedy_eval(ex.eval_episodes, eval_seed);
            let ctx = TransferContext {
                source_formula: &f.source,
                source_dtas: &dtas.source,
                source_q: src.q(),
                source_env: &plan.source_env,
                target_formula: &f.target,
                target_dtas: &dtas.target,
                target_env: &plan.target_env,
            };
            let tr = transfer_q(&ctx)?;
            let report = format!(
                "source episodes: {}\nsource greedy mean: {source_greedy}\nsource entries: {}\n{}",
                plan.source_episodes,
                src.q().len(),
                tr.report(&ctx)
            );
            write_file(&dir.join("transfer.txt"), &report)?;
            let mut l = ExtendedLearner::new(target, f.target.clone(), &dtas.target, params, Some(tr.q))?;
            let t = train(&mut l, plan.budget, every, ex.eval_episodes, eval_seed);
            write_file(&dir.join("qtable.csv"), &write_qtable(l.q()))?;
            write_file(&dir.join("formula.txt"), &format!("{}\n", f.target))?;
            t
        }
    };
    write_file(&dir.join("curve.csv"), &plot::curve_csv(&trace.curve))?;
    let mut cp = String::from("episode,greedy_mean\n");
    for (e, v) in &trace.checkpoints {
        let _ = writeln!(cp, "{e},{v}");
    }
    write_file(&dir.join("checkpoints.csv"), &cp)?;
    Ok(trace)
}

struct Dtas {
    source: Vec<TickDta>,
    target: Vec<TickDta>,
    uninformed: Vec<TickDta>,
}

/// Seed of the greedy evaluation episodes shared by every run.
pub fn eval_seed(main_seed: u64) -> u64 {
    sub_seed(main_seed, 5)
}

/// Full experiment: data, inference, learning for every method and seed,
/// summary and plot. `progress` receives one line per finished stage.
pub fn run_pipeline(cfg: &ExperimentConfig, out: &Path, progress: &mut dyn FnMut(&str)) -> Result<Summary> {
    let plan = cfg.plan()?;
    let ex = &cfg.experiment;
    write_file(&out.join("config.toml"), &cfg.to_toml())?;
    let main = ex.main_seed;

    let (source_data, report) = load_data(&plan.source_data, &plan.source_env, cfg, &plan, sub_seed(main, 1))?;
    write_file(&out.join("source/dataset.jsonl"), &trajectories_to_jsonl(&source_data))?;
    write_file(&out.join("source/collection.txt"), &report)?;
    let (target_data, report) = load_data(&plan.target_data, &plan.target_env, cfg, &plan, sub_seed(main, 2))?;
    write_file(&out.join("target/dataset.jsonl"), &trajectories_to_jsonl(&target_data))?;
    write_file(&out.join("target/collection.txt"), &report)?;
    progress(&format!(
        "collected {} source and {} target trajectories",
        source_data.len(),
        target_data.len()
    ));

    let formulas = infer_formulas(cfg, &plan, &source_data, &target_data, out)?;
    progress(&format!("source formula: {}", formulas.source));
    progress(&format!("target formula: {}", formulas.target));
    if let Some(u) = &formulas.uninformed {
        progress(&format!("uninformed target formula: {u}"));
    }
    let dtas = Dtas {
        source: compile_formula(&formulas.source, plan.source_env.horizon)?,
        target: compile_formula(&formulas.target, plan.target_env.horizon)?,
        uninformed: match &formulas.uninformed {
            Some(u) => compile_formula(u, plan.target_env.horizon)?,
            None => Vec::new(),
        },
    };

    let eval = eval_seed(main);
    let mut traces: Vec<(Method, u64, RunTrace)> = Vec::new();
    for &seed in &ex.seeds {
        for &m in &ex.methods {
            let dir = out.join(format!("{}-{}-seed{seed}", plan.case.name(), m));
            let t = run_method(cfg, &plan, &formulas, &dtas, m, seed, eval, &dir)?;
            let best = t.checkpoints.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
            progress(&format!("method {m} seed {seed}: best greedy mean {best}"));
            traces.push((m, seed, t));
        }
    }

    let reference = traces
        .iter()
        .flat_map(|(_, _, t)| t.checkpoints.iter().map(|c| c.1))
        .fold(f64::NEG_INFINITY, f64::max);
    let k = ex.consecutive;
    let rows = traces
        .iter()
        .map(|(m, seed, t)| {
            let tail = &t.checkpoints[t.checkpoints.len().saturating_sub(k)..];
            SummaryRow {
                method: *m,
                seed: *seed,
                episodes_to_convergence: converged_at(&t.checkpoints, reference, ex.tolerance, k),
                final_mean_reward: tail.iter().map(|c| c.1).sum::<f64>() / tail.len() as f64,
                best_checkpoint: t.checkpoints.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max),
                first_episode_at_mark: plan.reward_mark.and_then(|mark| first_reaching(&t.curve, mark)),
            }
        })
        .collect();
    let summary = Summary { case: plan.case, formulas, reference, rows };
    write_file(&out.join("summary.csv"), &summary.to_csv())?;

    let series: Vec<plot::Series> = ex
        .methods
        .iter()
        .map(|&m| {
            let runs: Vec<&RunTrace> = traces.iter().filter(|(mm, _, _)| *mm == m).map(|(_, _, t)| t).collect();
            let mean: Vec<f64> = (0..plan.budget)
                .map(|e| runs.iter().map(|t| t.curve[e]).sum::<f64>() / runs.len() as f64)
                .collect();
            plot::Series::from_rewards(format!("Method {m}"), &mean)
        })
        .collect();
    let title = format!("{}: mean over {} seeds", plan.case.name(), ex.seeds.len());
    write_file(&out.join("plot.svg"), &plot::emit_plot(&series, &title)?)?;
    Ok(summary)
}

#[cfg(test)]
mod tests;
