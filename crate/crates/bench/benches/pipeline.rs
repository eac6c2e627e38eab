use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use tempo_core::automata::compile;
use tempo_core::env::GridSim;
use tempo_core::experiment::{
    case1_source_env, case2_source_env, collect_data, compile_formula, gain_cache, Case,
    DataSource, ExperimentConfig,
};
use tempo_core::formula::parse_formula;
use tempo_core::inference::mitl_tree;
use tempo_core::infogain::PriorMode;
use tempo_core::rl::{ExtendedLearner, LearnParams, TauLearner};

const PHI_S: &str =
    "F[0,27] G[0,4] (x>=3 & x<=4 & y>=3 & y<=5) & F[32,40] (x>=6 & x<=8 & y>=2 & y<=8)";
const PSI_S: &str = "G[0,25] F[0,8] (x>=2 & x<=3 & y>=2 & y<=3)";

fn automata(c: &mut Criterion) {
    let phi = parse_formula(PHI_S).unwrap();
    c.bench_function("compile two-primitive conjunction", |b| {
        b.iter(|| compile(&phi.disjuncts()[0], 40).unwrap())
    });
}

fn gain(c: &mut Criterion) {
    let env = case1_source_env();
    let phi = parse_formula(PHI_S).unwrap();
    c.bench_function("gain of conjunction on 9x9 grid", |b| {
        b.iter_batched(
            || gain_cache(&env, PriorMode::UniformRandomAction).unwrap(),
            |mut cache| cache.gain(&phi).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

fn inference(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::preset(Case::Case2);
    cfg.pso.swarm_size = 16;
    cfg.pso.iterations = 20;
    let plan = cfg.plan().unwrap();
    let env = case2_source_env();
    let DataSource::Collect { rule, .. } = plan.source_data else {
        unreachable!()
    };
    let (data, _) = collect_data(
        &env,
        &cfg.learning,
        300,
        300,
        rule,
        cfg.inference.negatives,
        1,
    )
    .unwrap();
    let params = cfg.inference_params(&env, plan.completion, 0.0);
    let mut group = c.benchmark_group("inference");
    group.sample_size(10);
    group.bench_function("tree on case 2 source data", |b| {
        b.iter(|| mitl_tree(&data, &params, None).unwrap())
    });
    group.finish();
}

fn learning(c: &mut Criterion) {
    let env = case2_source_env();
    let phi = parse_formula(PSI_S).unwrap();
    let dtas = compile_formula(&phi, env.horizon).unwrap();
    let params = LearnParams {
        episodes: 100,
        seed: 3,
        ..LearnParams::default()
    };
    let mut group = c.benchmark_group("learning");
    group.sample_size(20);
    group.bench_function("100 extended episodes", |b| {
        b.iter(|| {
            let mut l =
                ExtendedLearner::new(GridSim::new(&env), phi.clone(), &dtas, params.clone(), None)
                    .unwrap();
            l.train(100)
        })
    });
    group.bench_function("100 history-keyed episodes", |b| {
        b.iter(|| {
            TauLearner::new(GridSim::new(&env), params.clone())
                .unwrap()
                .train(100)
        })
    });
    group.finish();
}

criterion_group!(benches, automata, gain, inference, learning);
criterion_main!(benches);
