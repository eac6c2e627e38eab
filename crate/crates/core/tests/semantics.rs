mod common;

use proptest::prelude::*;
use tempo_core::formula::EffectTimes;
use tempo_core::semantics::{compress, satisfies_with, Completion, SymbolWord, TimedLabeling};

proptest! {
    #[test]
    fn strict_semantics_match_the_oracle(
        phi in common::arb_sdnf(2, 3, common::unit_predicates()),
        word in prop::collection::vec(0u64..8, 1..60),
    ) {
        let ap = common::unit_predicates();
        let w = SymbolWord { ap: &ap, symbols: &word };
        let lib = satisfies_with(&w, &phi, Completion::Strict);
        if word.len() as u32 > phi.end_effect() {
            prop_assert_eq!(lib.unwrap(), common::sdnf(&phi, &common::Bits { ap: &ap, word: &word }, false));
        } else {
            prop_assert!(lib.is_err());
        }
    }

    #[test]
    fn optimistic_completion_fills_in_favour(
        phi in common::arb_sdnf(2, 3, common::unit_predicates()),
        word in prop::collection::vec(0u64..8, 1..30),
    ) {
        let ap = common::unit_predicates();
        let w = SymbolWord { ap: &ap, symbols: &word };
        let lib = satisfies_with(&w, &phi, Completion::Optimistic).unwrap();
        prop_assert_eq!(lib, common::sdnf(&phi, &common::Bits { ap: &ap, word: &word }, true));
    }

    #[test]
    fn timed_words_agree_with_per_tick_words(
        phi in common::arb_sdnf(2, 3, common::unit_predicates()),
        word in prop::collection::vec(0u64..8, 1..60),
    ) {
        let ap = common::unit_predicates();
        let tw = compress(&word);
        prop_assert_eq!(tw.expand(), word.clone());
        prop_assert_eq!(tw.last_tick() as usize, word.len() - 1);
        // A trailing entry may repeat the last symbol to mark the final tick.
        let n = tw.entries.len();
        let runs = if n > 1 && tw.entries[n - 2].0 == tw.entries[n - 1].0 { &tw.entries[..n - 1] } else { &tw.entries[..] };
        for pair in tw.entries.windows(2) {
            prop_assert!(pair[0].1 < pair[1].1);
        }
        for pair in runs.windows(2) {
            prop_assert!(pair[0].0 != pair[1].0);
        }
        let per_tick = satisfies_with(&SymbolWord { ap: &ap, symbols: &word }, &phi, Completion::Optimistic).unwrap();
        let timed = satisfies_with(&TimedLabeling { ap: &ap, word: &tw }, &phi, Completion::Optimistic).unwrap();
        prop_assert_eq!(per_tick, timed);
    }
}
