//! Structure-preserving bijections between automata of structurally
//! equivalent sequential conjunctions.

use std::fmt::Write as _;

use super::{AutomataError, ClockId, Edge, LocId, TickDta};
use crate::formula::{structurally_equivalent, Sdnf, SeqConj};

/// Maps every target component to its source counterpart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DtaMapping {
    /// Target predicate index to source predicate index.
    pub sigma_map: Vec<usize>,
    /// Target location to source location.
    pub location_map: Vec<LocId>,
    /// Target clock to source clock.
    pub clock_map: Vec<ClockId>,
}

impl DtaMapping {
    pub fn identity(dta: &TickDta) -> Self {
        DtaMapping {
            sigma_map: (0..dta.ap().len()).collect(),
            location_map: (0..dta.num_locations() as LocId).collect(),
            clock_map: (0..dta.num_clocks()).collect(),
        }
    }

    fn image(&self, e: &Edge) -> EdgeShape {
        let mut lits: Vec<(usize, bool)> =
            e.symbol.literals.iter().map(|&(k, pos)| (self.sigma_map[k], pos)).collect();
        lits.sort_unstable();
        let mut rels: Vec<_> = e.clocks.conjuncts.iter().map(|a| (self.clock_map[a.clock], a.rel)).collect();
        rels.sort_unstable();
        let mut resets: Vec<_> = e.resets.iter().map(|&c| self.clock_map[c]).collect();
        resets.sort_unstable();
        EdgeShape {
            from: self.location_map[e.from as usize],
            to: self.location_map[e.to as usize],
            lits,
            rels,
            resets,
        }
    }

    /// Text report listing each correspondence, target on the left.
    pub fn report(&self, target: &TickDta, source: &TickDta) -> String {
        let mut s = String::new();
        for (t, &src) in self.sigma_map.iter().enumerate() {
            let _ = writeln!(s, "sigma: p{} {} -> p{} {}", t + 1, target.ap()[t], src + 1, source.ap()[src]);
        }
        for (t, &src) in self.location_map.iter().enumerate() {
            let _ = writeln!(
                s,
                "location: {} -> {}",
                target.location_name(t as LocId),
                source.location_name(src)
            );
        }
        for (t, &src) in self.clock_map.iter().enumerate() {
            let _ = writeln!(s, "clock: {} -> {}", target.clock_name(t), source.clock_name(src));
        }
        s
    }
}

/// Edge with its guard bounds dropped: only relations and endpoints remain.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct EdgeShape {
    from: LocId,
    to: LocId,
    lits: Vec<(usize, bool)>,
    rels: Vec<(ClockId, super::Rel)>,
    resets: Vec<ClockId>,
}

/// Builds the gadget-by-gadget correspondence and verifies that it preserves
/// the edge relation in both directions.
pub fn build_mapping(
    target: &TickDta,
    source: &TickDta,
    tgt_sc: &SeqConj,
    src_sc: &SeqConj,
) -> Result<DtaMapping, AutomataError> {
    if !structurally_equivalent(&Sdnf::from(tgt_sc.clone()), &Sdnf::from(src_sc.clone())) {
        return Err(AutomataError::NotEquivalent);
    }
    // Compilation lays out locations, clocks and predicates in gadget order,
    // so equivalent skeletons produce index-aligned automata.
    if target.num_locations() != source.num_locations()
        || target.num_clocks() != source.num_clocks()
        || target.ap().len() != source.ap().len()
    {
        return Err(AutomataError::MappingViolation("component counts differ".into()));
    }
    let mapping = DtaMapping::identity(target);
    if mapping.location_map[target.initial() as usize] != source.initial()
        || mapping.location_map[target.accepting() as usize] != source.accepting()
        || mapping.location_map[target.reject() as usize] != source.reject()
    {
        return Err(AutomataError::MappingViolation("distinguished locations differ".into()));
    }
    let src_identity = DtaMapping::identity(source);
    let mut mapped: Vec<EdgeShape> = target.edges().iter().map(|e| mapping.image(e)).collect();
    let mut src: Vec<EdgeShape> = source.edges().iter().map(|e| src_identity.image(e)).collect();
    mapped.sort();
    src.sort();
    if mapped != src {
        let missing = mapped.iter().find(|e| !src.contains(e)).or_else(|| src.iter().find(|e| !mapped.contains(e)));
        return Err(AutomataError::MappingViolation(format!("unmatched edge {missing:?}")));
    }
    Ok(mapping)
}
