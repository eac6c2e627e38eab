mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempo_core::formula::{Bound, Literal, Primitive, Region, Sdnf, SeqConj};
use tempo_core::infogain::{information_gain, satisfaction_probability, MdpModel, PriorMode, PriorModel};

fn prior(seed: u64, n: usize, horizon: u32, mode: PriorMode) -> (common::SmallMdp, PriorModel) {
    let m = common::random_mdp(&mut ChaCha8Rng::seed_from_u64(seed), n);
    let model = MdpModel::from_actions((0..n).map(common::x_state).collect(), m.initial.clone(), m.actions.clone()).unwrap();
    let p = PriorModel::new(model, horizon, mode).unwrap();
    (m, p)
}

fn span(lo: i64, hi: i64) -> Region {
    Region::new(vec![Bound { var: "x".into(), lo, hi }]).unwrap()
}

fn modes() -> impl Strategy<Value = PriorMode> {
    prop_oneof![Just(PriorMode::UniformRandomAction), Just(PriorMode::UniformFeasible)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dp_matches_enumeration(
        seed in any::<u64>(),
        n in 1usize..5,
        phi in common::arb_sdnf(2, 2, vec![span(0, 0), span(1, 2), span(0, 3)]),
        mode in modes(),
    ) {
        let horizon = tempo_core::formula::effect_times(&phi).1;
        prop_assume!(horizon <= 8);
        let (m, p) = prior(seed, n, horizon, mode);
        let dp = satisfaction_probability(&phi, &p).unwrap().exp();
        let brute = common::enumerate(&m, &phi, horizon, mode);
        prop_assert!((dp - brute).abs() < 1e-9, "{} vs {}", dp, brute);
    }

    #[test]
    fn wider_eventually_is_more_likely(seed in any::<u64>(), lo in 0u32..3, hi in 1u32..5, x in 0i64..3, mode in modes()) {
        let hi = hi.max(lo + 1);
        let (_, p) = prior(seed, 3, 6, mode);
        let lp = |a: u32, b: u32| {
            let phi = Sdnf::from(Primitive::ev(a, b, Literal::pos(span(x, x))).unwrap());
            satisfaction_probability(&phi, &p).unwrap()
        };
        prop_assert!(lp(lo, hi) <= lp(lo, hi + 1) + 1e-12);
    }

    #[test]
    fn longer_always_is_less_likely(seed in any::<u64>(), hi in 1u32..5, x in 0i64..3, mode in modes()) {
        let (_, p) = prior(seed, 3, 6, mode);
        let lp = |b: u32| {
            let phi = Sdnf::from(Primitive::alw(0, b, Literal::pos(span(0, x))).unwrap());
            satisfaction_probability(&phi, &p).unwrap()
        };
        prop_assert!(lp(hi + 1) <= lp(hi) + 1e-12);
    }

    #[test]
    fn disjunction_dominates_its_disjuncts(
        seed in any::<u64>(),
        a in common::arb_seq_conj(2, vec![span(0, 0), span(1, 2)]),
        b in common::arb_seq_conj(2, vec![span(0, 0), span(1, 2)]),
    ) {
        let both = Sdnf::new(vec![a.clone(), b.clone()]).unwrap();
        let horizon = tempo_core::formula::effect_times(&both).1;
        let (_, p) = prior(seed, 3, horizon, PriorMode::UniformRandomAction);
        let lp = |f: &Sdnf| satisfaction_probability(f, &p).unwrap();
        let whole = lp(&both);
        for d in [a, b] {
            prop_assert!(lp(&Sdnf::from(d)) <= whole + 1e-12);
        }
    }

    #[test]
    fn gain_is_non_negative(lp in -50.0f64..0.0, horizon in 1u32..50) {
        prop_assert!(information_gain(lp, horizon) >= 0.0);
    }
}

#[test]
fn single_primitive_conjunction_equals_primitive() {
    let (_, p) = prior(3, 4, 5, PriorMode::UniformRandomAction);
    let prim = Primitive::ev_alw(0, 3, 2, Literal::pos(span(1, 2))).unwrap();
    let a = satisfaction_probability(&Sdnf::from(prim.clone()), &p).unwrap();
    let b = satisfaction_probability(&Sdnf::from(SeqConj::new(vec![prim]).unwrap()), &p).unwrap();
    assert_eq!(a, b);
}
