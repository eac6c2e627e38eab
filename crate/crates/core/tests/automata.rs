mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempo_core::automata::{compile, RunStatus};
use tempo_core::env::{EnvState, Heading};
use tempo_core::formula::{EffectTimes, Region};
use tempo_core::semantics::{satisfies, Trajectory};

fn dta_symbol(ap: &[Region], preds: &[Region], sym: u64) -> u64 {
    ap.iter().enumerate().fold(0, |acc, (k, r)| {
        let i = preds.iter().position(|p| p == r).unwrap();
        acc | (sym >> i & 1) << k
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn acceptance_matches_the_oracle(
        sc in common::arb_seq_conj(3, common::unit_predicates()),
        word in prop::collection::vec(0u64..8, 60),
        extra in 0usize..6,
    ) {
        let preds = common::unit_predicates();
        let n = common::last_tick(&sc) as usize + 1 + extra;
        let word = &word[..n.min(word.len())];
        prop_assume!(word.len() > common::last_tick(&sc) as usize);
        let dta = compile(&sc, sc.end_effect().max(word.len() as u32)).unwrap();
        let syms: Vec<u64> = word.iter().map(|&s| dta_symbol(dta.ap(), &preds, s)).collect();
        let accepted = dta.run_symbols(&syms) == RunStatus::Accepted;
        prop_assert_eq!(accepted, common::seq_conj(&sc, &common::Bits { ap: &preds, word }, false));
    }

    #[test]
    fn decided_prefixes_stay_decided(
        sc in common::arb_seq_conj(3, common::unit_predicates()),
        word in prop::collection::vec(0u64..8, 60),
    ) {
        let preds = common::unit_predicates();
        let dta = compile(&sc, 60).unwrap();
        let mut cfg = dta.initial_config();
        let mut decided = None;
        for &s in &word {
            cfg = dta.step(&cfg, dta_symbol(dta.ap(), &preds, s));
            match (decided, dta.status(&cfg)) {
                (None, RunStatus::Pending) => {}
                (None, st) => decided = Some(st),
                (Some(d), st) => prop_assert_eq!(d, st),
            }
        }
    }
}

#[test]
fn grid_runs_agree_with_trajectory_semantics() {
    let phi = tempo_core::formula::parse_formula(
        "F[1,15] G[0,4] (x>=3 & x<=4 & y>=3 & y<=5) & F[21,39] (x>=7 & x<=8 & y>=5 & y<=8)",
    )
    .unwrap();
    let sc = &phi.disjuncts()[0];
    let dta = compile(sc, 40).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut positives = 0;
    for i in 0..5000 {
        // Every tenth walk is steered through both regions so both labels occur.
        let states: Vec<EnvState> = (0..=40)
            .map(|t| {
                if i % 10 == 0 && (4..=9).contains(&t) {
                    EnvState::new(3, 4, Heading::N)
                } else if i % 10 == 0 && t >= 30 {
                    EnvState::new(7, 6, Heading::E)
                } else {
                    EnvState::new(rng.gen_range(0..9), rng.gen_range(0..9), Heading::N)
                }
            })
            .collect();
        let traj = Trajectory::new(states);
        let syms: Vec<u64> = traj.states.iter().map(|s| dta.symbol_of(s)).collect();
        let accepted = dta.run_symbols(&syms) == RunStatus::Accepted;
        assert_eq!(accepted, satisfies(&traj, &phi).unwrap());
        assert_eq!(accepted, common::sdnf(&phi, &common::States(&traj.states), false));
        positives += accepted as usize;
    }
    assert!(positives >= 400);
}
