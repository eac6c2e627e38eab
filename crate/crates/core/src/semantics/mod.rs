//! Boolean satisfaction of formulas by finite discrete-time trajectories.
//!
//! The reference evaluator works tick by tick over any [`Labeling`]: a
//! trajectory of environment states, a word of predicate bitmasks, or a
//! run-length compressed [`TimedWord`].

mod io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvState;
use crate::formula::{EffectTimes, Literal, Primitive, PrimitiveKind, Region, SeqConj, Sdnf, Tick, Valuation};

pub use io::{read_trajectories, trajectories_from_jsonl, trajectories_to_jsonl, write_trajectories, IoError};

/// Truth assignment over an ordered predicate list, bit `k` for predicate `k`.
pub type Symbol = u64;

/// Largest predicate list a [`Symbol`] can encode.
pub const MAX_PREDICATES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("trajectory horizon {horizon} is shorter than the formula's end-effect time {needed}")]
    Horizon { horizon: Tick, needed: Tick },
    #[error("predicate {0} is not part of the word's alphabet")]
    NotInAlphabet(String),
    #[error("at most {MAX_PREDICATES} predicates are supported, got {0}")]
    TooManyPredicates(usize),
    #[error("empty dataset")]
    EmptyDataset,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<EnvState>,
}

impl Trajectory {
    pub fn new(states: Vec<EnvState>) -> Self {
        assert!(!states.is_empty(), "a trajectory has at least one state");
        Trajectory { states }
    }

    /// Final tick index `L`.
    pub fn horizon(&self) -> Tick {
        (self.states.len() - 1) as Tick
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTrajectory {
    pub trajectory: Trajectory,
    /// `+1` or `-1`.
    pub label: i8,
    pub reward: Option<f64>,
}

impl LabeledTrajectory {
    pub fn new(trajectory: Trajectory, positive: bool) -> Self {
        LabeledTrajectory { trajectory, label: if positive { 1 } else { -1 }, reward: None }
    }

    pub fn is_positive(&self) -> bool {
        self.label > 0
    }
}

/// How ticks past the end of a trajectory are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Completion {
    /// The trajectory must cover the formula's effect window.
    #[default]
    Strict,
    /// Missing ticks are assumed to favour each literal, so a prefix is
    /// accepted when some continuation could still satisfy each primitive.
    Optimistic,
}

/// Per-tick literal truth source.
pub trait Labeling {
    /// Final tick index.
    fn horizon(&self) -> Tick;

    fn holds(&self, lit: &Literal, t: Tick) -> Result<bool, SemanticsError>;
}

impl Labeling for Trajectory {
    fn horizon(&self) -> Tick {
        Trajectory::horizon(self)
    }

    fn holds(&self, lit: &Literal, t: Tick) -> Result<bool, SemanticsError> {
        lit.holds(&self.states[t as usize]).map_err(SemanticsError::UnknownVariable)
    }
}

/// A per-tick sequence of symbols over an ordered predicate list.
#[derive(Debug, Clone, Copy)]
pub struct SymbolWord<'a> {
    pub ap: &'a [Region],
    pub symbols: &'a [Symbol],
}

fn ap_index(ap: &[Region], region: &Region) -> Result<usize, SemanticsError> {
    ap.iter()
        .position(|r| r == region)
        .ok_or_else(|| SemanticsError::NotInAlphabet(region.to_string()))
}

fn literal_in_symbol(ap: &[Region], lit: &Literal, sym: Symbol) -> Result<bool, SemanticsError> {
    let k = ap_index(ap, &lit.region)?;
    Ok(((sym >> k) & 1 == 1) != lit.negated)
}

impl Labeling for SymbolWord<'_> {
    fn horizon(&self) -> Tick {
        (self.symbols.len() - 1) as Tick
    }

    fn holds(&self, lit: &Literal, t: Tick) -> Result<bool, SemanticsError> {
        literal_in_symbol(self.ap, lit, self.symbols[t as usize])
    }
}

/// Run-length compressed word: `(symbol, first tick of the run)` pairs plus
/// the final tick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedWord {
    pub entries: Vec<(Symbol, Tick)>,
}

impl TimedWord {
    pub fn last_tick(&self) -> Tick {
        self.entries.last().map_or(0, |e| e.1)
    }

    /// Symbol in force at tick `t`.
    pub fn symbol_at(&self, t: Tick) -> Symbol {
        let i = self.entries.partition_point(|e| e.1 <= t);
        self.entries[i.saturating_sub(1)].0
    }

    /// Expands back to one symbol per tick.
    pub fn expand(&self) -> Vec<Symbol> {
        (0..=self.last_tick()).map(|t| self.symbol_at(t)).collect()
    }
}

/// A timed word together with its alphabet.
#[derive(Debug, Clone, Copy)]
pub struct TimedLabeling<'a> {
    pub ap: &'a [Region],
    pub word: &'a TimedWord,
}

impl Labeling for TimedLabeling<'_> {
    fn horizon(&self) -> Tick {
        self.word.last_tick()
    }

    fn holds(&self, lit: &Literal, t: Tick) -> Result<bool, SemanticsError> {
        literal_in_symbol(self.ap, lit, self.word.symbol_at(t))
    }
}

/// Bit `k` is set iff `state` lies in `ap[k]` (inclusive bounds).
pub fn evaluate_predicates<V: Valuation + ?Sized>(ap: &[Region], state: &V) -> Result<Symbol, SemanticsError> {
    if ap.len() > MAX_PREDICATES {
        return Err(SemanticsError::TooManyPredicates(ap.len()));
    }
    let mut sym = 0;
    for (k, r) in ap.iter().enumerate() {
        if r.contains(state).map_err(SemanticsError::UnknownVariable)? {
            sym |= 1 << k;
        }
    }
    Ok(sym)
}

/// Per-tick symbols of a trajectory.
pub fn symbols_of(traj: &Trajectory, ap: &[Region]) -> Result<Vec<Symbol>, SemanticsError> {
    traj.states.iter().map(|s| evaluate_predicates(ap, s)).collect()
}

/// Compresses maximal runs of identical symbols; always records ticks 0 and `L`.
pub fn to_timed_word(traj: &Trajectory, ap: &[Region]) -> Result<TimedWord, SemanticsError> {
    Ok(compress(&symbols_of(traj, ap)?))
}

pub fn compress(symbols: &[Symbol]) -> TimedWord {
    let mut entries: Vec<(Symbol, Tick)> = Vec::new();
    for (t, &s) in symbols.iter().enumerate() {
        if entries.last().map_or(true, |e| e.0 != s) {
            entries.push((s, t as Tick));
        }
    }
    let last = symbols.len().saturating_sub(1) as Tick;
    if let Some(&(s, t)) = entries.last() {
        if t != last {
            entries.push((s, last));
        }
    }
    TimedWord { entries }
}

/// Anything the satisfaction relation is defined for.
pub trait Formula: EffectTimes {
    fn eval<L: Labeling + ?Sized>(&self, w: &L, mode: Completion) -> Result<bool, SemanticsError>;
}

/// Literal truth at `t`, or `None` past the end of the labeling.
fn lit_at<L: Labeling + ?Sized>(w: &L, lit: &Literal, t: Tick) -> Result<Option<bool>, SemanticsError> {
    if t > w.horizon() {
        Ok(None)
    } else {
        w.holds(lit, t).map(Some)
    }
}

impl Formula for Primitive {
    fn eval<L: Labeling + ?Sized>(&self, w: &L, mode: Completion) -> Result<bool, SemanticsError> {
        let o = self.outer();
        let d = self.inner_width();
        let lit = self.literal();
        // Unknown ticks only arise in optimistic mode and count in the literal's favour.
        let at = |t: Tick| -> Result<bool, SemanticsError> { Ok(lit_at(w, lit, t)?.unwrap_or(true)) };
        let any = |lo: Tick, hi: Tick| -> Result<bool, SemanticsError> {
            for t in lo..=hi {
                if at(t)? {
                    return Ok(true);
                }
            }
            Ok(false)
        };
        let all = |lo: Tick, hi: Tick| -> Result<bool, SemanticsError> {
            for t in lo..=hi {
                if !at(t)? {
                    return Ok(false);
                }
            }
            Ok(true)
        };
        check_horizon(self, w, mode)?;
        match self.kind() {
            PrimitiveKind::Ev => any(o.lo, o.hi),
            PrimitiveKind::Alw => all(o.lo, o.hi),
            PrimitiveKind::EvAlw => {
                for t in o.lo..=o.hi {
                    if all(t, t + d)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            PrimitiveKind::AlwEv => {
                for t in o.lo..=o.hi {
                    if !any(t, t + d)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }
}

fn check_horizon<F: EffectTimes + ?Sized, L: Labeling + ?Sized>(
    phi: &F,
    w: &L,
    mode: Completion,
) -> Result<(), SemanticsError> {
    let needed = phi.end_effect();
    if mode == Completion::Strict && w.horizon() < needed {
        return Err(SemanticsError::Horizon { horizon: w.horizon(), needed });
    }
    Ok(())
}

impl Formula for SeqConj {
    fn eval<L: Labeling + ?Sized>(&self, w: &L, mode: Completion) -> Result<bool, SemanticsError> {
        check_horizon(self, w, mode)?;
        for p in self.primitives() {
            if !p.eval(w, mode)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl Formula for Sdnf {
    fn eval<L: Labeling + ?Sized>(&self, w: &L, mode: Completion) -> Result<bool, SemanticsError> {
        check_horizon(self, w, mode)?;
        for d in self.disjuncts() {
            if d.eval(w, mode)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Strict satisfaction of `phi` by a trajectory.
pub fn satisfies<F: Formula + ?Sized>(traj: &Trajectory, phi: &F) -> Result<bool, SemanticsError> {
    phi.eval(traj, Completion::Strict)
}

pub fn satisfies_with<F: Formula + ?Sized, L: Labeling + ?Sized>(
    w: &L,
    phi: &F,
    mode: Completion,
) -> Result<bool, SemanticsError> {
    phi.eval(w, mode)
}

/// `+1` if satisfied, `-1` otherwise.
pub fn satisfaction_signature<F: Formula + ?Sized, L: Labeling + ?Sized>(
    w: &L,
    phi: &F,
    mode: Completion,
) -> Result<i8, SemanticsError> {
    Ok(if phi.eval(w, mode)? { 1 } else { -1 })
}

/// Fraction of trajectories whose signature equals their label.
pub fn classification_rate<F: Formula + ?Sized>(
    dataset: &[LabeledTrajectory],
    phi: &F,
    mode: Completion,
) -> Result<f64, SemanticsError> {
    if dataset.is_empty() {
        return Err(SemanticsError::EmptyDataset);
    }
    let mut hits = 0usize;
    for lt in dataset {
        if satisfaction_signature(&lt.trajectory, phi, mode)? == lt.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / dataset.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Heading;
    use crate::formula::parse_formula;

    fn st(x: i32, y: i32) -> EnvState {
        EnvState::new(x, y, Heading::N)
    }

    fn g_s() -> Region {
        Region::rect(3, 4, 3, 5).unwrap()
    }

    #[test]
    fn predicate_membership_is_inclusive() {
        let ap = [g_s()];
        assert_eq!(evaluate_predicates(&ap, &st(3, 5)).unwrap(), 1);
        assert_eq!(evaluate_predicates(&ap, &st(2, 5)).unwrap(), 0);
        assert_eq!(evaluate_predicates(&[], &st(2, 5)).unwrap(), 0);
        let z = Region::new(vec![crate::formula::Bound { var: "z".into(), lo: 0, hi: 1 }]).unwrap();
        assert_eq!(
            evaluate_predicates(&[z], &st(0, 0)),
            Err(SemanticsError::UnknownVariable("z".into()))
        );
    }

    #[test]
    fn timed_word_compression() {
        assert_eq!(compress(&[1; 6]).entries, vec![(1, 0), (1, 5)]);
        assert_eq!(compress(&[1, 1, 2, 2, 1]).entries, vec![(1, 0), (2, 2), (1, 4)]);
        assert_eq!(compress(&[3]).entries, vec![(3, 0)]);
        let w = compress(&[1, 1, 2, 2, 2, 1, 1]);
        assert_eq!(w.expand(), vec![1, 1, 2, 2, 2, 1, 1]);
    }

    #[test]
    fn eventually_inside_region() {
        let phi = parse_formula("F[0,2] (x>=0 & x<=9 & y>=0 & y<=9)").unwrap();
        let traj = Trajectory::new(vec![st(1, 1); 4]);
        assert!(satisfies(&traj, &phi).unwrap());
    }

    fn case1_trace() -> Trajectory {
        // enters G at t=3, stays through t=7, reaches Y at t=25
        let mut states = vec![st(0, 0); 41];
        for s in states.iter_mut().take(8).skip(3) {
            *s = st(3, 4);
        }
        states[25] = st(7, 6);
        Trajectory::new(states)
    }

    #[test]
    fn case1_source_formula_on_constructed_trace() {
        let phi = parse_formula(
            "F[1,15] G[0,4] (x>=3 & x<=4 & y>=3 & y<=5) & F[21,39] (x>=7 & x<=8 & y>=5 & y<=8)",
        )
        .unwrap();
        assert!(satisfies(&case1_trace(), &phi).unwrap());
        // one tick short of the dwell
        let mut t = case1_trace();
        t.states[7] = st(0, 0);
        assert!(!satisfies(&t, &phi).unwrap());
    }

    #[test]
    fn gap_longer_than_period_violates_always_eventually() {
        let phi = parse_formula("G[0,25] F[0,8] (x>=2 & x<=3 & y>=2 & y<=3)").unwrap();
        let mut states = vec![st(2, 2); 34];
        for s in states.iter_mut().take(17).skip(8) {
            *s = st(0, 0);
        }
        let traj = Trajectory::new(states.clone());
        assert!(!satisfies(&traj, &phi).unwrap());
        // a gap of exactly 8 ticks is fine
        states[16] = st(2, 2);
        assert!(satisfies(&Trajectory::new(states), &phi).unwrap());
    }

    #[test]
    fn horizon_shortfall_is_an_error_unless_optimistic() {
        let phi = parse_formula("G[0,25] F[0,8] (x>=2 & x<=3 & y>=2 & y<=3)").unwrap();
        let traj = Trajectory::new(vec![st(2, 2); 20]);
        assert_eq!(
            satisfies(&traj, &phi),
            Err(SemanticsError::Horizon { horizon: 19, needed: 33 })
        );
        assert!(satisfies_with(&traj, &phi, Completion::Optimistic).unwrap());
        let mut states = vec![st(2, 2); 20];
        for s in states.iter_mut().skip(5) {
            *s = st(0, 0);
        }
        // 14 ticks away at the end of the prefix
        assert!(!satisfies_with(&Trajectory::new(states), &phi, Completion::Optimistic).unwrap());
    }

    #[test]
    fn classification_rates() {
        let phi = parse_formula("G[0,1] (x>=0 & x<=9 & y>=0 & y<=9)").unwrap();
        let t = Trajectory::new(vec![st(1, 1); 3]);
        let mut data: Vec<_> = (0..46).map(|_| LabeledTrajectory::new(t.clone(), true)).collect();
        data.extend((0..200).map(|_| LabeledTrajectory::new(t.clone(), false)));
        let cr = classification_rate(&data, &phi, Completion::Strict).unwrap();
        assert_eq!(cr, 46.0 / 246.0);
        let four = [
            LabeledTrajectory::new(t.clone(), true),
            LabeledTrajectory::new(t.clone(), true),
            LabeledTrajectory::new(t.clone(), true),
            LabeledTrajectory::new(t.clone(), false),
        ];
        assert_eq!(classification_rate(&four, &phi, Completion::Strict).unwrap(), 0.75);
        assert_eq!(
            classification_rate(&[], &phi, Completion::Strict),
            Err(SemanticsError::EmptyDataset)
        );
    }
}
