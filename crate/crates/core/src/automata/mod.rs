//! Deterministic tick automata compiled from sequential conjunctions.
//!
//! Every automaton has a global clock `c1` that is never reset, so while the
//! word is being read `c1` equals the tick index. Primitives become chained
//! gadgets; the last gadget advances into the accepting location and every
//! deadline miss goes to a single absorbing reject location.

mod mapping;

use std::fmt;

use smallvec::SmallVec;
use thiserror::Error;

use crate::formula::{EffectTimes, PrimitiveKind, Region, SeqConj, Tick};
use crate::semantics::{evaluate_predicates, Symbol, MAX_PREDICATES};

pub use mapping::{build_mapping, DtaMapping};

pub type LocId = u16;
pub type ClockId = usize;
pub type ClockValue = u16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomataError {
    #[error("horizon {horizon} is shorter than the end-effect time {needed}")]
    Horizon { horizon: Tick, needed: Tick },
    #[error("horizon {0} exceeds the clock range")]
    HorizonTooLarge(Tick),
    #[error("nondeterministic edges {0} and {1} out of location q{2}")]
    Nondeterministic(usize, usize, LocId),
    #[error("too many predicates ({0})")]
    TooManyPredicates(usize),
    #[error("sub-formulas are not structurally equivalent")]
    NotEquivalent,
    #[error("mapping does not preserve the edge relation: {0}")]
    MappingViolation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Rel {
    fn as_str(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Gt => ">",
            Rel::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClockAtom {
    pub clock: ClockId,
    pub rel: Rel,
    pub bound: Tick,
}

impl ClockAtom {
    fn holds(&self, v: ClockValue) -> bool {
        let (v, b) = (v as u32, self.bound);
        match self.rel {
            Rel::Lt => v < b,
            Rel::Le => v <= b,
            Rel::Gt => v > b,
            Rel::Ge => v >= b,
        }
    }

    /// Inclusive range of satisfying values within `[0, max]`, if any.
    fn range(&self, max: u32) -> Option<(u32, u32)> {
        let b = self.bound;
        let (lo, hi) = match self.rel {
            Rel::Lt => (0, b.checked_sub(1)?),
            Rel::Le => (0, b),
            Rel::Gt => (b + 1, max),
            Rel::Ge => (b, max),
        };
        (lo <= hi.min(max)).then_some((lo, hi.min(max)))
    }
}

/// Conjunction of clock comparisons; empty means true.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ClockConstraint {
    pub conjuncts: Vec<ClockAtom>,
}

impl ClockConstraint {
    fn new(conjuncts: Vec<ClockAtom>) -> Self {
        ClockConstraint { conjuncts }
    }

    pub fn holds(&self, v: &[ClockValue]) -> bool {
        self.conjuncts.iter().all(|a| a.holds(v[a.clock]))
    }
}

/// Edge guard on the input symbol: a conjunction of predicate literals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolGuard {
    /// `(predicate index, required truth value)`.
    pub literals: Vec<(usize, bool)>,
}

impl SymbolGuard {
    fn mask(&self) -> (Symbol, Symbol) {
        self.literals.iter().fold((0, 0), |(m, v), &(k, pos)| {
            (m | 1 << k, if pos { v | 1 << k } else { v })
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edge {
    pub from: LocId,
    pub to: LocId,
    pub symbol: SymbolGuard,
    pub clocks: ClockConstraint,
    pub resets: Vec<ClockId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// 1-based index of the pending primitive.
    Primitive(usize),
    Accepted,
    Rejected,
}

/// Whether a run ended in the accepting or reject location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunStatus {
    Accepted,
    Rejected,
    Pending,
}

/// Runtime configuration: location plus clock valuation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DtaConfig {
    pub location: LocId,
    pub valuation: SmallVec<[ClockValue; 4]>,
}

#[derive(Debug, Clone)]
struct FastEdge {
    to: LocId,
    sym_mask: Symbol,
    sym_val: Symbol,
    bounds: SmallVec<[(u8, ClockValue, ClockValue); 2]>,
    resets: u32,
}

#[derive(Debug, Clone)]
pub struct TickDta {
    ap: Vec<Region>,
    location_names: Vec<String>,
    initial: LocId,
    clock_names: Vec<String>,
    accepting: LocId,
    reject: LocId,
    edges: Vec<Edge>,
    phase: Vec<Phase>,
    /// Gadget index (0-based) owning each working location.
    gadget: Vec<Option<usize>>,
    /// Per location, bitmask of clocks whose value matters there.
    active: Vec<u32>,
    horizon: Tick,
    fast: Vec<Vec<FastEdge>>,
}

struct Builder {
    locations: Vec<String>,
    phase: Vec<Phase>,
    gadget: Vec<Option<usize>>,
    active: Vec<u32>,
    edges: Vec<Edge>,
    clocks: Vec<String>,
}

impl Builder {
    fn location(&mut self, phase: Phase, gadget: Option<usize>, active: u32) -> LocId {
        self.locations.push(format!("q{}", self.locations.len()));
        self.phase.push(phase);
        self.gadget.push(gadget);
        self.active.push(active | 1);
        (self.locations.len() - 1) as LocId
    }

    fn clock(&mut self) -> ClockId {
        self.clocks.push(format!("c{}", self.clocks.len() + 1));
        self.clocks.len() - 1
    }

    fn edge(&mut self, from: LocId, to: LocId, lit: (usize, bool), clocks: Vec<ClockAtom>, resets: Vec<ClockId>) {
        self.edges.push(Edge {
            from,
            to,
            symbol: SymbolGuard { literals: vec![lit] },
            clocks: ClockConstraint::new(clocks),
            resets,
        });
    }
}

fn at(clock: ClockId, rel: Rel, bound: Tick) -> ClockAtom {
    ClockAtom { clock, rel, bound }
}

/// Compiles a sequential conjunction into a tick automaton whose clocks clip
/// at `horizon`.
pub fn compile(sc: &SeqConj, horizon: Tick) -> Result<TickDta, AutomataError> {
    let needed = sc.end_effect();
    if horizon < needed {
        return Err(AutomataError::Horizon { horizon, needed });
    }
    if horizon >= ClockValue::MAX as Tick {
        return Err(AutomataError::HorizonTooLarge(horizon));
    }
    let prims = sc.primitives();
    if prims.len() > MAX_PREDICATES {
        return Err(AutomataError::TooManyPredicates(prims.len()));
    }
    let mut b = Builder {
        locations: Vec::new(),
        phase: Vec::new(),
        gadget: Vec::new(),
        active: Vec::new(),
        edges: Vec::new(),
        clocks: Vec::new(),
    };
    let c1 = b.clock();

    // Working locations first, so that ids follow gadget order.
    let mut first_loc = Vec::with_capacity(prims.len());
    let mut plan = Vec::with_capacity(prims.len());
    for (j, p) in prims.iter().enumerate() {
        let ph = Phase::Primitive(j + 1);
        if p.kind().is_nested() {
            let c = b.clock();
            let l0 = b.location(ph, Some(j), 0);
            let l1 = b.location(ph, Some(j), 1 << c);
            first_loc.push(l0);
            plan.push((l0, Some((l1, c))));
        } else {
            let l0 = b.location(ph, Some(j), 0);
            first_loc.push(l0);
            plan.push((l0, None));
        }
    }
    let accept = b.location(Phase::Accepted, None, 0);
    let reject = b.location(Phase::Rejected, None, 0);

    for (j, p) in prims.iter().enumerate() {
        let next = first_loc.get(j + 1).copied().unwrap_or(accept);
        let (a, bb) = (p.outer().lo, p.outer().hi);
        // Predicate j is the primitive's region; the literal's polarity picks the guard sign.
        let rho = (j, !p.literal().negated);
        let not_rho = (j, p.literal().negated);
        let in_window = || vec![at(c1, Rel::Ge, a), at(c1, Rel::Le, bb)];
        match (p.kind(), plan[j]) {
            (PrimitiveKind::Ev, (w, None)) => {
                b.edge(w, next, rho, in_window(), vec![]);
                b.edge(w, reject, not_rho, vec![at(c1, Rel::Ge, bb)], vec![]);
            }
            (PrimitiveKind::Alw, (k, None)) => {
                b.edge(k, reject, not_rho, in_window(), vec![]);
                b.edge(k, next, rho, vec![at(c1, Rel::Ge, bb)], vec![]);
            }
            (PrimitiveKind::EvAlw, (w, Some((dl, cd)))) => {
                let d = p.inner_width();
                b.edge(w, dl, rho, in_window(), vec![cd]);
                b.edge(w, reject, not_rho, vec![at(c1, Rel::Ge, bb)], vec![]);
                b.edge(dl, next, rho, vec![at(cd, Rel::Ge, d)], vec![]);
                b.edge(dl, w, not_rho, vec![at(c1, Rel::Lt, bb)], vec![]);
                b.edge(dl, reject, not_rho, vec![at(c1, Rel::Ge, bb)], vec![]);
            }
            (PrimitiveKind::AlwEv, (h, Some((m, cg)))) => {
                let d = p.inner_width();
                b.edge(h, m, not_rho, in_window(), vec![cg]);
                b.edge(h, next, rho, vec![at(c1, Rel::Ge, bb)], vec![]);
                b.edge(m, h, rho, vec![at(c1, Rel::Lt, bb)], vec![]);
                b.edge(m, next, rho, vec![at(c1, Rel::Ge, bb)], vec![]);
                b.edge(m, reject, not_rho, vec![at(cg, Rel::Ge, d)], vec![]);
            }
            _ => unreachable!("gadget plan follows the primitive kind"),
        }
    }

    let ap: Vec<Region> = prims.iter().map(|p| p.region().clone()).collect();
    let mut dta = TickDta {
        ap,
        location_names: b.locations,
        initial: first_loc[0],
        clock_names: b.clocks,
        accepting: accept,
        reject,
        edges: b.edges,
        phase: b.phase,
        gadget: b.gadget,
        active: b.active,
        horizon,
        fast: Vec::new(),
    };
    dta.fast = dta.build_fast();
    dta.check_determinism()?;
    Ok(dta)
}

impl TickDta {
    fn build_fast(&self) -> Vec<Vec<FastEdge>> {
        let mut fast = vec![Vec::new(); self.location_names.len()];
        for e in &self.edges {
            let (sym_mask, sym_val) = e.symbol.mask();
            let mut bounds: SmallVec<[(u8, ClockValue, ClockValue); 2]> = SmallVec::new();
            let mut ok = true;
            for c in 0..self.clock_names.len() {
                let mut lo = 0u32;
                let mut hi = self.horizon;
                for a in e.clocks.conjuncts.iter().filter(|a| a.clock == c) {
                    match a.range(self.horizon) {
                        Some((l, h)) => {
                            lo = lo.max(l);
                            hi = hi.min(h);
                        }
                        None => ok = false,
                    }
                }
                if lo > hi {
                    ok = false;
                }
                if lo > 0 || hi < self.horizon {
                    bounds.push((c as u8, lo as ClockValue, hi as ClockValue));
                }
            }
            if !ok {
                continue;
            }
            let resets = e.resets.iter().fold(0u32, |m, &c| m | 1 << c);
            fast[e.from as usize].push(FastEdge { to: e.to, sym_mask, sym_val, bounds, resets });
        }
        fast
    }

    /// Pairwise check that no two edges out of one location can be enabled
    /// together for any symbol and valuation.
    fn check_determinism(&self) -> Result<(), AutomataError> {
        let by_loc = |l: LocId| self.edges.iter().enumerate().filter(move |(_, e)| e.from == l);
        for l in 0..self.location_names.len() as LocId {
            for (i, e) in by_loc(l) {
                for (k, f) in by_loc(l).filter(|(k, _)| *k > i) {
                    if self.overlap(e, f) {
                        return Err(AutomataError::Nondeterministic(i, k, l));
                    }
                }
            }
        }
        Ok(())
    }

    fn overlap(&self, e: &Edge, f: &Edge) -> bool {
        let (me, ve) = e.symbol.mask();
        let (mf, vf) = f.symbol.mask();
        let common = me & mf;
        if ve & common != vf & common {
            return false;
        }
        (0..self.clock_names.len()).all(|c| {
            let mut lo = 0u32;
            let mut hi = self.horizon;
            for a in e.clocks.conjuncts.iter().chain(&f.clocks.conjuncts).filter(|a| a.clock == c) {
                match a.range(self.horizon) {
                    Some((l, h)) => {
                        lo = lo.max(l);
                        hi = hi.min(h);
                    }
                    None => return false,
                }
            }
            lo <= hi
        })
    }

    pub fn ap(&self) -> &[Region] {
        &self.ap
    }

    pub fn num_locations(&self) -> usize {
        self.location_names.len()
    }

    pub fn num_clocks(&self) -> usize {
        self.clock_names.len()
    }

    pub fn location_name(&self, l: LocId) -> &str {
        &self.location_names[l as usize]
    }

    pub fn clock_name(&self, c: ClockId) -> &str {
        &self.clock_names[c]
    }

    pub fn initial(&self) -> LocId {
        self.initial
    }

    pub fn accepting(&self) -> LocId {
        self.accepting
    }

    pub fn reject(&self) -> LocId {
        self.reject
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn horizon(&self) -> Tick {
        self.horizon
    }

    pub fn phase_of_location(&self, l: LocId) -> Phase {
        self.phase[l as usize]
    }

    /// 0-based gadget owning a working location.
    pub fn gadget_of_location(&self, l: LocId) -> Option<usize> {
        self.gadget[l as usize]
    }

    /// Whether clock `c` carries information in location `l`; inactive
    /// clocks are held at 0.
    pub fn is_active(&self, l: LocId, c: ClockId) -> bool {
        self.active[l as usize] >> c & 1 == 1
    }

    pub fn is_terminal(&self, l: LocId) -> bool {
        l == self.accepting || l == self.reject
    }

    pub fn initial_config(&self) -> DtaConfig {
        DtaConfig { location: self.initial, valuation: SmallVec::from_elem(0, self.clock_names.len()) }
    }

    pub fn symbol_of<V: crate::formula::Valuation + ?Sized>(&self, state: &V) -> Symbol {
        evaluate_predicates(&self.ap, state).expect("automaton predicates range over the state variables")
    }

    /// Reads one symbol: takes the enabled edge if any, then advances every
    /// clock by one tick.
    pub fn step(&self, cfg: &DtaConfig, sym: Symbol) -> DtaConfig {
        let mut next = cfg.clone();
        self.step_in_place(&mut next, sym);
        next
    }

    pub fn step_in_place(&self, cfg: &mut DtaConfig, sym: Symbol) {
        let loc = cfg.location as usize;
        if let Some(e) = self.fast[loc].iter().find(|e| {
            sym & e.sym_mask == e.sym_val
                && e.bounds.iter().all(|&(c, lo, hi)| {
                    let v = cfg.valuation[c as usize];
                    lo <= v && v <= hi
                })
        }) {
            cfg.location = e.to;
            for c in 0..cfg.valuation.len() {
                if e.resets >> c & 1 == 1 {
                    cfg.valuation[c] = 0;
                }
            }
        }
        let max = self.horizon as ClockValue;
        let active = self.active[cfg.location as usize];
        for (c, v) in cfg.valuation.iter_mut().enumerate() {
            *v = if active >> c & 1 == 1 { (*v + 1).min(max) } else { 0 };
        }
    }

    pub fn status(&self, cfg: &DtaConfig) -> RunStatus {
        if cfg.location == self.accepting {
            RunStatus::Accepted
        } else if cfg.location == self.reject {
            RunStatus::Rejected
        } else {
            RunStatus::Pending
        }
    }

    /// Folds [`TickDta::step`] over a per-tick word.
    pub fn run_symbols(&self, symbols: &[Symbol]) -> RunStatus {
        let mut cfg = self.initial_config();
        for &s in symbols {
            self.step_in_place(&mut cfg, s);
        }
        self.status(&cfg)
    }

    /// All configurations with location `l` whose inactive clocks are 0.
    pub fn configs_at(&self, l: LocId) -> Vec<DtaConfig> {
        let mut out = vec![DtaConfig { location: l, valuation: SmallVec::from_elem(0, self.num_clocks()) }];
        for c in 0..self.num_clocks() {
            if !self.is_active(l, c) {
                continue;
            }
            out = out
                .into_iter()
                .flat_map(|cfg| {
                    (0..=self.horizon as ClockValue).map(move |v| {
                        let mut n = cfg.clone();
                        n.valuation[c] = v;
                        n
                    })
                })
                .collect();
        }
        out
    }

    /// Human-readable listing, one edge per line.
    pub fn dump(&self) -> String {
        self.to_string()
    }
}

/// Runs an automaton over a trajectory.
pub fn run(dta: &TickDta, traj: &crate::semantics::Trajectory) -> RunStatus {
    let mut cfg = dta.initial_config();
    for s in &traj.states {
        dta.step_in_place(&mut cfg, dta.symbol_of(s));
    }
    dta.status(&cfg)
}

fn fmt_guard(dta: &TickDta, e: &Edge) -> String {
    let mut parts: Vec<String> = e
        .symbol
        .literals
        .iter()
        .map(|&(k, pos)| format!("{}p{}", if pos { "" } else { "!" }, k + 1))
        .collect();
    // Pair `>=`/`<=` on the same clock into a range.
    let mut done = vec![false; e.clocks.conjuncts.len()];
    for (i, a) in e.clocks.conjuncts.iter().enumerate() {
        if done[i] {
            continue;
        }
        let name = dta.clock_name(a.clock);
        let partner = e.clocks.conjuncts.iter().enumerate().skip(i + 1).find(|(_, b)| {
            b.clock == a.clock && matches!((a.rel, b.rel), (Rel::Ge, Rel::Le) | (Rel::Gt, Rel::Lt))
        });
        match partner {
            Some((k, b)) => {
                done[k] = true;
                let lo = if a.rel == Rel::Ge { "<=" } else { "<" };
                write_range(&mut parts, a.bound, lo, name, b.rel.as_str(), b.bound);
            }
            None => parts.push(format!("{name}{}{}", a.rel.as_str(), a.bound)),
        }
    }
    if !e.resets.is_empty() {
        let names: Vec<&str> = e.resets.iter().map(|&c| dta.clock_name(c)).collect();
        parts.push(format!("reset {}", names.join(" ")));
    }
    parts.join(", ")
}

fn write_range(parts: &mut Vec<String>, lo: Tick, lo_rel: &str, name: &str, hi_rel: &str, hi: Tick) {
    parts.push(format!("{lo}{lo_rel}{name}{hi_rel}{hi}"));
}

impl fmt::Display for TickDta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "locations: {}", self.location_names.join(" "))?;
        writeln!(
            f,
            "initial: {}  accepting: {}  reject: {}",
            self.location_name(self.initial),
            self.location_name(self.accepting),
            self.location_name(self.reject)
        )?;
        writeln!(f, "clocks: {}", self.clock_names.join(" "))?;
        for (k, r) in self.ap.iter().enumerate() {
            writeln!(f, "p{} = {r}", k + 1)?;
        }
        for e in &self.edges {
            writeln!(
                f,
                "{} --[{}]--> {}",
                self.location_name(e.from),
                fmt_guard(self, e),
                self.location_name(e.to)
            )?;
        }
        Ok(())
    }
}
