//! `tempo-transfer`: command-line harness for the transfer experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use thiserror::Error;

use tempo_core::automata::TickDta;
use tempo_core::env::{GridEnvConfig, GridSim};
use tempo_core::experiment::{
    collect_data, compile_formula, eval_seed, gain_cache, plot, read_file, run_pipeline, write_file, Case,
    DataSource, ExperimentConfig, ExperimentError, Plan,
};
use tempo_core::formula::{parse_formula, Sdnf};
use tempo_core::inference::{check_satisfying, infer_target_constrained, log_to_csv, mitl_tree};
use tempo_core::rl::{
    read_qtable, write_qtable, ExtendedLearner, ExtendedState, QTable, RunRng, Simulator, TauLearner,
};
use tempo_core::semantics::{classification_rate, read_trajectories, trajectories_to_jsonl, LabeledTrajectory, Trajectory};
use tempo_core::transfer::{transfer_q, TransferContext};

#[derive(Parser)]
#[command(name = "tempo-transfer", version, about = "Temporal-logic guided transfer for tabular Q-learning")]
struct Cli {
    /// TOML configuration; case presets apply to unset values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the main seed (and the seed list when it has one entry).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Case preset used when no configuration file is given.
    #[arg(long, global = true, value_enum)]
    case: Option<CaseArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    Case1,
    Case2,
    Custom,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Task {
    Source,
    #[default]
    Target,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out uniformly random episodes and write them as trajectories.
    Simulate {
        #[arg(long, value_enum, default_value_t)]
        task: Task,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
    },
    /// Run the data collection phase and write the labeled dataset.
    Collect {
        #[arg(long, value_enum, default_value_t)]
        task: Task,
    },
    /// Infer a formula from a labeled dataset, optionally constrained to the
    /// operator skeleton of another formula.
    Infer {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        task: Task,
        /// Formula text or file whose skeleton the result must follow.
        #[arg(long)]
        skeleton: Option<String>,
        /// Overrides the information-gain weight.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Compile each disjunct of a formula into a tick automaton.
    CompileDta {
        /// Formula text or file.
        #[arg(long)]
        formula: String,
        #[arg(long)]
        horizon: Option<u32>,
    },
    /// Learn a task, on history keys or on the extended states of a formula.
    Learn {
        #[arg(long, value_enum, default_value_t)]
        task: Task,
        /// Formula text or file; history-keyed learning when absent.
        #[arg(long)]
        formula: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Initial extended table.
        #[arg(long)]
        init_q: Option<PathBuf>,
    },
    /// Transfer an extended table from the source task to the target task.
    Transfer {
        #[arg(long)]
        source_formula: String,
        #[arg(long)]
        source_q: PathBuf,
        #[arg(long)]
        target_formula: String,
    },
    /// Run the full comparison of methods I-IV.
    Experiment,
    /// Chart curve files (one series each) as SVG.
    Plot {
        #[arg(required = true)]
        curves: Vec<PathBuf>,
        /// Series labels; file parent directory names by default.
        #[arg(long, value_delimiter = ',')]
        labels: Vec<String>,
        #[arg(long, default_value = "learning curves")]
        title: String,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("logical transferability is not identified: {0}")]
    NotIdentified(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Validation(_) => 2,
            CliError::NotIdentified(_) => 3,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(m) => CliError::Validation(m),
            ExperimentError::NotIdentified(m) => CliError::NotIdentified(m),
            ExperimentError::Data(e) => CliError::Validation(format!("dataset: {e}")),
            ExperimentError::Curve(m) => CliError::Validation(format!("malformed curve file: {m}")),
            other => CliError::Failed(other.to_string()),
        }
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

type Result<T> = std::result::Result<T, CliError>;

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_toml(&read_file(p)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(c) = cli.case {
        cfg.experiment.case = match c {
            CaseArg::Case1 => Case::Case1,
            CaseArg::Case2 => Case::Case2,
            CaseArg::Custom => Case::Custom,
        };
    }
    if let Some(s) = cli.seed {
        cfg.experiment.main_seed = s;
        if cfg.experiment.seeds.len() == 1 {
            cfg.experiment.seeds = vec![s];
        }
    }
    if let Some(o) = &cli.out {
        cfg.experiment.out = Some(o.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.experiment.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

/// Formula given inline or as a file path.
fn formula_arg(arg: &str) -> Result<Sdnf> {
    let text = if Path::new(arg).is_file() { read_file(Path::new(arg))? } else { arg.to_string() };
    parse_formula(text.trim()).map_err(|e| CliError::Validation(format!("formula: {e}")))
}

fn env_of(plan: &Plan, task: Task) -> &GridEnvConfig {
    match task {
        Task::Source => &plan.source_env,
        Task::Target => &plan.target_env,
    }
}

fn save(path: &Path, text: &str) -> Result<()> {
    write_file(path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn simulate(env: &GridEnvConfig, episodes: usize, seed: u64, out: &Path) -> Result<()> {
    let mut sim = GridSim::new(env);
    let mut rng = RunRng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(episodes);
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut states = vec![sim.reset(&mut rng)];
        let mut ret = 0.0;
        loop {
            let a = rand::Rng::gen_range(&mut rng, 0..tempo_core::rl::NUM_ACTIONS);
            let tr = sim.step(a, &mut rng);
            states.push(tr.state);
            ret += tr.reward;
            if tr.done {
                break;
            }
        }
        total += ret;
        data.push(LabeledTrajectory { trajectory: Trajectory::new(states), label: if ret > 0.0 { 1 } else { -1 }, reward: Some(ret) });
    }
    save(&out.join("trajectories.jsonl"), &trajectories_to_jsonl(&data))?;
    println!("mean return of {episodes} random episodes: {}", total / episodes.max(1) as f64);
    Ok(())
}

fn infer(
    cfg: &ExperimentConfig,
    plan: &Plan,
    data_path: &Path,
    task: Task,
    skeleton: Option<&str>,
    lambda: Option<f64>,
    out: &Path,
) -> Result<()> {
    let data = read_trajectories(data_path).map_err(|e| CliError::Validation(format!("dataset: {e}")))?;
    let env = env_of(plan, task);
    let lambda = lambda.unwrap_or(cfg.inference.lambda);
    let params = cfg.inference_params(env, plan.completion, lambda);
    let mut cache = if lambda > 0.0 { Some(gain_cache(env, cfg.inference.prior)?) } else { None };
    let (formula, log) = match skeleton {
        Some(s) => {
            let skel = formula_arg(s)?;
            let r = infer_target_constrained(&data, &skel, &params, cache.as_mut()).map_err(failed)?;
            (r.formula, r.log)
        }
        None => {
            let r = mitl_tree(&data, &params, cache.as_mut()).map_err(failed)?;
            save(&out.join("tree.txt"), &r.tree.to_string())?;
            let f = match r.formula {
                Some(f) if check_satisfying(&f, &data, params.zeta, params.rho_th, plan.completion).map_err(failed)? => Some(f),
                _ => None,
            };
            (f, r.log)
        }
    };
    save(&out.join("inference_log.csv"), &log_to_csv(&log))?;
    let Some(f) = formula else {
        return Err(CliError::NotIdentified("no satisfying formula for the dataset".into()));
    };
    save(&out.join("formula.txt"), &format!("{f}\n"))?;
    let cr = classification_rate(&data, &f, plan.completion).map_err(failed)?;
    println!("{f}\nclassification rate: {cr}");
    Ok(())
}

fn load_table(path: &Path) -> Result<QTable<ExtendedState<tempo_core::env::EnvState>>> {
    read_qtable(&read_file(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn learn(
    cfg: &ExperimentConfig,
    plan: &Plan,
    task: Task,
    formula: Option<&str>,
    episodes: Option<usize>,
    init_q: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let env = env_of(plan, task);
    let n = episodes.unwrap_or(plan.budget);
    let params = cfg.learning.params(n, cfg.experiment.main_seed);
    let eval = eval_seed(cfg.experiment.main_seed);
    let (curve, greedy) = match formula {
        None => {
            if init_q.is_some() {
                return Err(CliError::Validation("--init-q requires --formula".into()));
            }
            let mut l = TauLearner::new(GridSim::new(env), params).map_err(|e| CliError::Validation(e.to_string()))?;
            let curve = l.train(n);
            save(&out.join("qtable.csv"), &write_qtable(l.q()))?;
            (curve, l.greedy_eval(cfg.experiment.eval_episodes, eval))
        }
        Some(text) => {
            let phi = formula_arg(text)?;
            let dtas: Vec<TickDta> = compile_formula(&phi, env.horizon)?;
            let init = init_q.map(load_table).transpose()?;
            let mut l = ExtendedLearner::new(GridSim::new(env), phi.clone(), &dtas, params, init)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let curve = l.train(n);
            save(&out.join("qtable.csv"), &write_qtable(l.q()))?;
            save(&out.join("formula.txt"), &format!("{phi}\n"))?;
            (curve, l.greedy_eval(cfg.experiment.eval_episodes, eval))
        }
    };
    save(&out.join("curve.csv"), &plot::curve_csv(&curve))?;
    println!("greedy mean return after {n} episodes: {greedy}");
    Ok(())
}

fn transfer(plan: &Plan, source_formula: &str, source_q: &Path, target_formula: &str, out: &Path) -> Result<()> {
    let sf = formula_arg(source_formula)?;
    let tf = formula_arg(target_formula)?;
    let sd = compile_formula(&sf, plan.source_env.horizon)?;
    let td = compile_formula(&tf, plan.target_env.horizon)?;
    let q = load_table(source_q)?;
    let ctx = TransferContext {
        source_formula: &sf,
        source_dtas: &sd,
        source_q: &q,
        source_env: &plan.source_env,
        target_formula: &tf,
        target_dtas: &td,
        target_env: &plan.target_env,
    };
    let r = transfer_q(&ctx).map_err(|e| match e {
        tempo_core::transfer::TransferError::NotTransferable => CliError::NotIdentified(e.to_string()),
        other => failed(other),
    })?;
    save(&out.join("qtable.csv"), &write_qtable(&r.q))?;
    save(&out.join("transfer.txt"), &r.report(&ctx))?;
    println!("copied {} of {} target extended states", r.copied, r.enumerated);
    Ok(())
}

fn plot_files(curves: &[PathBuf], labels: &[String], title: &str, out: &Path) -> Result<()> {
    if !labels.is_empty() && labels.len() != curves.len() {
        return Err(CliError::Validation(format!("{} labels for {} curve files", labels.len(), curves.len())));
    }
    let mut series = Vec::with_capacity(curves.len());
    for (i, p) in curves.iter().enumerate() {
        let points = plot::parse_curve_csv(&read_file(p)?)
            .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
        let label = labels.get(i).cloned().unwrap_or_else(|| {
            let name = p.parent().and_then(|d| d.file_name()).or(p.file_stem());
            name.map_or_else(|| format!("series {}", i + 1), |n| n.to_string_lossy().into_owned())
        });
        series.push(plot::Series { label, points });
    }
    save(&out.join("plot.svg"), &plot::emit_plot(&series, title)?)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let out = out_dir(&cfg);
    if let Command::Plot { curves, labels, title } = &cli.command {
        return plot_files(curves, labels, title, &out);
    }
    if let Command::CompileDta { formula, horizon } = &cli.command {
        let phi = formula_arg(formula)?;
        let h = horizon.unwrap_or(40);
        for (i, d) in compile_formula(&phi, h)?.iter().enumerate() {
            let text = d.dump();
            save(&out.join(format!("dta{}.txt", i + 1)), &text)?;
            print!("{text}");
        }
        return Ok(());
    }
    let plan = cfg.plan()?;
    let seed = cfg.experiment.main_seed;
    match &cli.command {
        Command::Simulate { task, episodes } => simulate(env_of(&plan, *task), *episodes, seed, &out),
        Command::Collect { task } => {
            let source = match task {
                Task::Source => &plan.source_data,
                Task::Target => &plan.target_data,
            };
            let DataSource::Collect { episodes, rule } = source else {
                return Err(CliError::Validation("the configuration reads this dataset from a file".into()));
            };
            let env = env_of(&plan, *task);
            let (data, r) =
                collect_data(env, &cfg.learning, *episodes, plan.budget, *rule, cfg.inference.negatives, seed)?;
            save(&out.join("dataset.jsonl"), &trajectories_to_jsonl(&data))?;
            println!("{} positives, {} negatives ({} kept) in {} episodes", r.positives, r.negatives_total, r.negatives_sampled, r.episodes);
            Ok(())
        }
        Command::Infer { data, task, skeleton, lambda } => {
            infer(&cfg, &plan, data, *task, skeleton.as_deref(), *lambda, &out)
        }
        Command::Learn { task, formula, episodes, init_q } => {
            learn(&cfg, &plan, *task, formula.as_deref(), *episodes, init_q.as_deref(), &out)
        }
        Command::Transfer { source_formula, source_q, target_formula } => {
            transfer(&plan, source_formula, source_q, target_formula, &out)
        }
        Command::Experiment => {
            let summary = run_pipeline(&cfg, &out, &mut |line| eprintln!("{line}"))?;
            print!("{}", summary.to_csv());
            Ok(())
        }
        Command::Plot { .. } | Command::CompileDta { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
