use proptest::prelude::*;
use rand::SeedableRng;
use smallvec::SmallVec;
use tempo_core::env::{EnvState, GridSim, Heading};
use tempo_core::experiment::{case2_source_env, case2_target_env, compile_formula};
use tempo_core::formula::{parse_formula, Region};
use tempo_core::rl::{
    greedy_action, read_qtable, sub_seed, write_qtable, ExtendedLearner, ExtendedState, LearnParams, QTable, RunRng,
};
use tempo_core::transfer::{map_state, transfer_q, TransferContext};

fn heading() -> impl Strategy<Value = Heading> {
    (0u8..4).prop_map(|i| Heading::from_index(i).unwrap())
}

fn entry() -> impl Strategy<Value = (ExtendedState<EnvState>, [f64; 3])> {
    (0i32..9, 0i32..9, heading(), 0u16..3, 0u16..6, prop::collection::vec(0u16..41, 0..3), prop::array::uniform3(-1e6f64..1e6))
        .prop_map(|(x, y, h, d, l, v, q)| {
            (ExtendedState { env: EnvState::new(x, y, h), disjunct: d, location: l, valuation: SmallVec::from_vec(v) }, q)
        })
}

proptest! {
    #[test]
    fn table_text_round_trip(entries in prop::collection::vec(entry(), 0..40)) {
        let q: QTable<ExtendedState<EnvState>> = entries.into_iter().collect();
        let text = write_qtable(&q);
        let back: QTable<ExtendedState<EnvState>> = read_qtable(&text).unwrap();
        prop_assert_eq!(back.len(), q.len());
        for (k, v) in q.iter() {
            prop_assert_eq!(back.get(k), *v);
        }
        prop_assert_eq!(write_qtable(&back), text);
    }

    #[test]
    fn greedy_picks_a_maximum(values in prop::array::uniform3(-3i32..3), seed in any::<u64>()) {
        let v = values.map(f64::from);
        let a = greedy_action(&v, &mut RunRng::seed_from_u64(seed));
        prop_assert!(v.iter().all(|&o| o <= v[a]));
    }

    #[test]
    fn sub_seeds_separate_tags(base in any::<u64>(), a in 0u64..1000, b in 0u64..1000) {
        prop_assume!(a != b);
        prop_assert_ne!(sub_seed(base, a), sub_seed(base, b));
    }

    #[test]
    fn mapped_states_keep_offsets_inside_the_source(
        x in 0i32..7, y in 0i32..7, h in heading(),
        tx in 0i64..5, ty in 0i64..5, sx in 0i64..3, sy in 0i64..3,
    ) {
        let source = case2_source_env();
        let rho_t = Region::rect(tx, tx + 1, ty, ty + 1).unwrap();
        let rho_s = Region::rect(sx, sx + 1, sy, sy + 1).unwrap();
        let m = map_state(&EnvState::new(x, y, h), &rho_t, &rho_s, &source).unwrap();
        prop_assert!(source.in_bounds(m.x, m.y));
        prop_assert_eq!(m.heading, h);
        let (px, py) = (sx + x as i64 - tx, sy + y as i64 - ty);
        if (0..source.width as i64).contains(&px) && (0..source.height as i64).contains(&py) {
            prop_assert_eq!((m.x as i64, m.y as i64), (px, py));
        } else {
            prop_assert_eq!(m.x as i64, px.clamp(0, source.width as i64 - 1));
            prop_assert_eq!(m.y as i64, py.clamp(0, source.height as i64 - 1));
        }
    }
}

#[test]
fn two_disjunct_target_copies_from_the_single_source_block() {
    let source_env = case2_source_env();
    let target_env = case2_target_env();
    let psi_s = parse_formula("G[0,25] F[0,8] (x>=2 & x<=3 & y>=2 & y<=3)").unwrap();
    let psi_t =
        parse_formula("G[0,40] F[0,10] (x>=2 & x<=3 & y>=3 & y<=4) | G[0,40] F[0,10] (x>=4 & x<=5 & y>=3 & y<=4)")
            .unwrap();
    let sd = compile_formula(&psi_s, source_env.horizon).unwrap();
    let td = compile_formula(&psi_t, target_env.horizon).unwrap();
    let params = LearnParams { episodes: 2_000, seed: 4, ..LearnParams::default() };
    let mut learner = ExtendedLearner::new(GridSim::new(&source_env), psi_s.clone(), &sd, params, None).unwrap();
    learner.train(2_000);
    let ctx = TransferContext {
        source_formula: &psi_s,
        source_dtas: &sd,
        source_q: learner.q(),
        source_env: &source_env,
        target_formula: &psi_t,
        target_dtas: &td,
        target_env: &target_env,
    };
    let out = transfer_q(&ctx).unwrap();
    assert_eq!(out.mappings.iter().map(|m| m.0).collect::<Vec<_>>(), vec![0, 0]);
    assert_eq!(out.copied, out.q.len());
    assert!(out.copied > 0);
    let mut per_disjunct = [0; 2];
    for (k, v) in out.q.iter() {
        let src = ctx.map_key(k, &out.mappings).unwrap();
        assert!(learner.q().contains(&src));
        assert_eq!(learner.q().get(&src), *v);
        assert!(target_env.in_bounds(k.env.x, k.env.y));
        per_disjunct[k.disjunct as usize] += 1;
    }
    assert!(per_disjunct.iter().all(|&n| n > 0));
}
