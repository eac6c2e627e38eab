mod common;

use proptest::prelude::*;
use tempo_core::formula::{
    effect_times, formula_size, parse_formula, structurally_equivalent, structurally_transferable, PrimitiveKind,
    Region, Sdnf, SeqConj,
};

fn boxes() -> Vec<Region> {
    vec![
        Region::rect(0, 1, 0, 1).unwrap(),
        Region::rect(2, 4, 3, 8).unwrap(),
        Region::rect(-3, 0, 5, 5).unwrap(),
    ]
}

proptest! {
    #[test]
    fn text_round_trip(phi in common::arb_sdnf(3, 3, boxes())) {
        let back = parse_formula(&phi.to_string()).unwrap();
        prop_assert_eq!(back, phi);
    }

    #[test]
    fn negation_is_an_involution(sc in common::arb_seq_conj(3, boxes())) {
        for p in sc.primitives() {
            prop_assert_eq!(&p.negate().negate(), p);
            prop_assert_eq!(p.negate().kind(), p.kind().dual());
        }
    }

    #[test]
    fn negation_complements_on_full_words(
        sc in common::arb_seq_conj(1, common::unit_predicates()),
        word in prop::collection::vec(0u64..8, 40),
    ) {
        let p = &sc.primitives()[0];
        let ap = common::unit_predicates();
        let w = common::Bits { ap: &ap, word: &word };
        prop_assert_eq!(common::primitive(&p.negate(), &w, false), !common::primitive(p, &w, false));
    }

    #[test]
    fn effect_times_span_the_read_ticks(sc in common::arb_seq_conj(3, boxes())) {
        let (s, e) = effect_times(&sc);
        prop_assert_eq!(e, common::last_tick(&sc));
        prop_assert_eq!(s, sc.primitives().iter().map(|p| p.outer().lo).min().unwrap());
    }

    #[test]
    fn repeated_blocks_are_transferable(phi in common::arb_sdnf(1, 3, boxes()), k in 1usize..4) {
        let target = Sdnf::new(phi.disjuncts().iter().cycle().take(k).cloned().collect()).unwrap();
        prop_assert!(structurally_transferable(&phi, &target));
        prop_assert_eq!(structurally_equivalent(&phi, &target), k == 1);
        prop_assert_eq!(formula_size(&target), k * formula_size(&phi));
    }

    #[test]
    fn swapping_an_operator_breaks_equivalence(sc in common::arb_seq_conj(3, boxes()), i in 0usize..3) {
        let i = i % sc.len();
        let prims: Vec<_> = sc
            .primitives()
            .iter()
            .enumerate()
            .map(|(j, p)| if j == i { p.negate() } else { p.clone() })
            .collect();
        let changed = Sdnf::from(SeqConj::new(prims).unwrap());
        prop_assert!(!structurally_equivalent(&Sdnf::from(sc), &changed));
    }
}

#[test]
fn dual_kinds() {
    assert_eq!(PrimitiveKind::Ev.dual(), PrimitiveKind::Alw);
    assert_eq!(PrimitiveKind::EvAlw.dual(), PrimitiveKind::AlwEv);
}
