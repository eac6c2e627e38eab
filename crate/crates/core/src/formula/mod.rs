//! Time-bounded temporal formulas in sequential disjunctive normal form.
//!
//! A formula is a disjunction of [`SeqConj`] blocks; each block is a
//! conjunction of [`Primitive`]s whose effect windows are strictly ordered in
//! time. Negations never appear on temporal nodes: they are pushed onto the
//! literal when a formula is built or parsed.

mod parse;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::parse_formula;

/// Discrete time index.
pub type Tick = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("syntax error at byte {pos}: expected {expected}, found {found}")]
    Syntax {
        pos: usize,
        expected: String,
        found: String,
    },
    #[error("structure error: {0}")]
    Structure(String),
    #[error("interval error: {0}")]
    Interval(String),
    #[error("region error: {0}")]
    Region(String),
    #[error("sdnf error: {0}")]
    Sdnf(String),
}

/// Closed integer interval `[lo, hi]` in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub lo: Tick,
    pub hi: Tick,
}

impl Interval {
    /// Outer interval of a temporal operator; requires `lo < hi`.
    pub fn outer(lo: Tick, hi: Tick) -> Result<Self, FormulaError> {
        if lo >= hi {
            return Err(FormulaError::Interval(format!(
                "outer interval [{lo},{hi}] needs lo < hi"
            )));
        }
        Ok(Interval { lo, hi })
    }

    /// Inner interval `[0, hi]` of a nested operator; requires `hi > 0`.
    pub fn inner(hi: Tick) -> Result<Self, FormulaError> {
        if hi == 0 {
            return Err(FormulaError::Interval(
                "inner interval must be [0,h] with h > 0".into(),
            ));
        }
        Ok(Interval { lo: 0, hi })
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

/// Anything that can be asked for the value of a named integer variable.
pub trait Valuation {
    fn value(&self, var: &str) -> Option<i64>;
}

/// One axis of a [`Region`]; missing sides use `i64::MIN` / `i64::MAX`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bound {
    pub var: String,
    pub lo: i64,
    pub hi: i64,
}

/// Axis-aligned integer box over named variables (an atomic predicate).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Region {
    dims: Vec<Bound>,
}

impl Region {
    pub fn new(dims: Vec<Bound>) -> Result<Self, FormulaError> {
        if dims.is_empty() {
            return Err(FormulaError::Region("region has no dimensions".into()));
        }
        for (i, d) in dims.iter().enumerate() {
            if d.lo > d.hi {
                return Err(FormulaError::Region(format!(
                    "{}: lower bound {} exceeds upper bound {}",
                    d.var, d.lo, d.hi
                )));
            }
            if dims[..i].iter().any(|o| o.var == d.var) {
                return Err(FormulaError::Region(format!("duplicate variable {}", d.var)));
            }
        }
        Ok(Region { dims })
    }

    /// Box `x_lo <= x <= x_hi && y_lo <= y <= y_hi`.
    pub fn rect(x_lo: i64, x_hi: i64, y_lo: i64, y_hi: i64) -> Result<Self, FormulaError> {
        Region::new(vec![
            Bound { var: "x".into(), lo: x_lo, hi: x_hi },
            Bound { var: "y".into(), lo: y_lo, hi: y_hi },
        ])
    }

    pub fn dims(&self) -> &[Bound] {
        &self.dims
    }

    pub fn bound(&self, var: &str) -> Option<&Bound> {
        self.dims.iter().find(|d| d.var == var)
    }

    /// Inclusive membership test. Fails with the name of the first variable
    /// the valuation cannot supply.
    pub fn contains<V: Valuation + ?Sized>(&self, v: &V) -> Result<bool, String> {
        let mut inside = true;
        for d in &self.dims {
            let val = v.value(&d.var).ok_or_else(|| d.var.clone())?;
            inside &= d.lo <= val && val <= d.hi;
        }
        Ok(inside)
    }

    /// Arithmetic mean of the box corners on the `x`/`y` axes.
    pub fn centroid(&self) -> (f64, f64) {
        let mid = |var: &str| {
            self.bound(var)
                .map(|b| (b.lo as f64 + b.hi as f64) / 2.0)
                .unwrap_or(0.0)
        };
        (mid("x"), mid("y"))
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for d in &self.dims {
            if d.lo != i64::MIN {
                parts.push(format!("{}>={}", d.var, d.lo));
            }
            if d.hi != i64::MAX {
                parts.push(format!("{}<={}", d.var, d.hi));
            }
        }
        write!(f, "({})", parts.join(" & "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub region: Region,
    pub negated: bool,
}

impl Literal {
    pub fn pos(region: Region) -> Self {
        Literal { region, negated: false }
    }

    pub fn neg(region: Region) -> Self {
        Literal { region, negated: true }
    }

    pub fn negate(&self) -> Self {
        Literal { region: self.region.clone(), negated: !self.negated }
    }

    pub fn holds<V: Valuation + ?Sized>(&self, v: &V) -> Result<bool, String> {
        Ok(self.region.contains(v)? != self.negated)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "!")?;
        }
        write!(f, "{}", self.region)
    }
}

/// The four primitive structures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PrimitiveKind {
    /// `F[a,b] rho`
    Ev,
    /// `G[a,b] rho`
    Alw,
    /// `F[a,b] G[0,d] rho`
    EvAlw,
    /// `G[a,b] F[0,d] rho`
    AlwEv,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 4] = [
        PrimitiveKind::Ev,
        PrimitiveKind::Alw,
        PrimitiveKind::EvAlw,
        PrimitiveKind::AlwEv,
    ];

    pub fn is_nested(self) -> bool {
        matches!(self, PrimitiveKind::EvAlw | PrimitiveKind::AlwEv)
    }

    /// Kind of the negation-normal form of `!self`.
    pub fn dual(self) -> Self {
        match self {
            PrimitiveKind::Ev => PrimitiveKind::Alw,
            PrimitiveKind::Alw => PrimitiveKind::Ev,
            PrimitiveKind::EvAlw => PrimitiveKind::AlwEv,
            PrimitiveKind::AlwEv => PrimitiveKind::EvAlw,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PrimitiveKind::Ev => "F",
            PrimitiveKind::Alw => "G",
            PrimitiveKind::EvAlw => "FG",
            PrimitiveKind::AlwEv => "GF",
        }
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Primitive {
    kind: PrimitiveKind,
    outer: Interval,
    inner: Option<Interval>,
    literal: Literal,
}

impl Primitive {
    pub fn new(
        kind: PrimitiveKind,
        outer: Interval,
        inner: Option<Interval>,
        literal: Literal,
    ) -> Result<Self, FormulaError> {
        if kind.is_nested() != inner.is_some() {
            return Err(FormulaError::Structure(format!(
                "{kind} {} an inner interval",
                if kind.is_nested() { "requires" } else { "does not take" }
            )));
        }
        if outer.lo >= outer.hi {
            return Err(FormulaError::Interval(format!("outer interval {outer} needs lo < hi")));
        }
        if let Some(i) = inner {
            if i.lo != 0 || i.hi == 0 {
                return Err(FormulaError::Interval(format!("inner interval {i} must be [0,h], h > 0")));
            }
        }
        Ok(Primitive { kind, outer, inner, literal })
    }

    pub fn ev(lo: Tick, hi: Tick, literal: Literal) -> Result<Self, FormulaError> {
        Primitive::new(PrimitiveKind::Ev, Interval::outer(lo, hi)?, None, literal)
    }

    pub fn alw(lo: Tick, hi: Tick, literal: Literal) -> Result<Self, FormulaError> {
        Primitive::new(PrimitiveKind::Alw, Interval::outer(lo, hi)?, None, literal)
    }

    pub fn ev_alw(lo: Tick, hi: Tick, dwell: Tick, literal: Literal) -> Result<Self, FormulaError> {
        Primitive::new(
            PrimitiveKind::EvAlw,
            Interval::outer(lo, hi)?,
            Some(Interval::inner(dwell)?),
            literal,
        )
    }

    pub fn alw_ev(lo: Tick, hi: Tick, period: Tick, literal: Literal) -> Result<Self, FormulaError> {
        Primitive::new(
            PrimitiveKind::AlwEv,
            Interval::outer(lo, hi)?,
            Some(Interval::inner(period)?),
            literal,
        )
    }

    pub fn kind(&self) -> PrimitiveKind {
        self.kind
    }

    pub fn outer(&self) -> Interval {
        self.outer
    }

    pub fn inner(&self) -> Option<Interval> {
        self.inner
    }

    /// Width of the inner window, 0 for single-operator primitives.
    pub fn inner_width(&self) -> Tick {
        self.inner.map_or(0, |i| i.hi)
    }

    pub fn literal(&self) -> &Literal {
        &self.literal
    }

    pub fn region(&self) -> &Region {
        &self.literal.region
    }

    /// Negation-normal form of `!self`.
    pub fn negate(&self) -> Self {
        Primitive {
            kind: self.kind.dual(),
            outer: self.outer,
            inner: self.inner,
            literal: self.literal.negate(),
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = self.outer;
        match (self.kind, self.inner) {
            (PrimitiveKind::Ev, _) => write!(f, "F{o} {}", self.literal),
            (PrimitiveKind::Alw, _) => write!(f, "G{o} {}", self.literal),
            (PrimitiveKind::EvAlw, Some(i)) => write!(f, "F{o} G{i} {}", self.literal),
            (PrimitiveKind::AlwEv, Some(i)) => write!(f, "G{o} F{i} {}", self.literal),
            _ => unreachable!("constructor keeps kind and inner interval in sync"),
        }
    }
}

/// Sequential conjunction: primitives with strictly ordered effect windows.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeqConj {
    primitives: Vec<Primitive>,
}

impl SeqConj {
    pub fn new(primitives: Vec<Primitive>) -> Result<Self, FormulaError> {
        if primitives.is_empty() {
            return Err(FormulaError::Sdnf("empty conjunction".into()));
        }
        for w in primitives.windows(2) {
            let (_, end) = w[0].effect_times();
            let (start, _) = w[1].effect_times();
            if end >= start {
                return Err(FormulaError::Sdnf(format!(
                    "effect windows overlap: end-effect {end} of `{}` is not before start-effect {start} of `{}`",
                    w[0], w[1]
                )));
            }
        }
        Ok(SeqConj { primitives })
    }

    /// Sorts by start-effect time, then validates the ordering.
    pub fn from_unordered(mut primitives: Vec<Primitive>) -> Result<Self, FormulaError> {
        primitives.sort_by_key(|p| p.effect_times().0);
        SeqConj::new(primitives)
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }
}

impl From<Primitive> for SeqConj {
    fn from(p: Primitive) -> Self {
        SeqConj { primitives: vec![p] }
    }
}

impl fmt::Display for SeqConj {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.primitives.iter().enumerate() {
            if i > 0 {
                write!(f, " & ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sdnf {
    disjuncts: Vec<SeqConj>,
}

impl Sdnf {
    pub fn new(disjuncts: Vec<SeqConj>) -> Result<Self, FormulaError> {
        if disjuncts.is_empty() {
            return Err(FormulaError::Sdnf("formula needs at least one disjunct".into()));
        }
        Ok(Sdnf { disjuncts })
    }

    pub fn disjuncts(&self) -> &[SeqConj] {
        &self.disjuncts
    }

    pub fn primitives(&self) -> impl Iterator<Item = &Primitive> {
        self.disjuncts.iter().flat_map(|d| d.primitives.iter())
    }

    /// Number of primitive subformulas.
    pub fn size(&self) -> usize {
        formula_size(self)
    }
}

impl From<SeqConj> for Sdnf {
    fn from(sc: SeqConj) -> Self {
        Sdnf { disjuncts: vec![sc] }
    }
}

impl From<Primitive> for Sdnf {
    fn from(p: Primitive) -> Self {
        Sdnf::from(SeqConj::from(p))
    }
}

impl fmt::Display for Sdnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.disjuncts.iter().enumerate() {
            if i > 0 {
                write!(f, " | ")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Canonical text of a formula; the inverse of [`parse_formula`].
pub fn format_formula(phi: &Sdnf) -> String {
    phi.to_string()
}

/// Start- and end-effect times.
pub trait EffectTimes {
    fn effect_times(&self) -> (Tick, Tick);

    fn start_effect(&self) -> Tick {
        self.effect_times().0
    }

    fn end_effect(&self) -> Tick {
        self.effect_times().1
    }
}

impl EffectTimes for Literal {
    fn effect_times(&self) -> (Tick, Tick) {
        (0, 0)
    }
}

impl EffectTimes for Primitive {
    fn effect_times(&self) -> (Tick, Tick) {
        let (s, e) = match self.inner {
            Some(i) => (i.lo, i.hi),
            None => self.literal.effect_times(),
        };
        (s + self.outer.lo, e + self.outer.hi)
    }
}

fn span<'a, T: EffectTimes + 'a>(parts: impl Iterator<Item = &'a T>) -> (Tick, Tick) {
    parts.fold((Tick::MAX, 0), |(s, e), p| {
        let (ps, pe) = p.effect_times();
        (s.min(ps), e.max(pe))
    })
}

impl EffectTimes for SeqConj {
    fn effect_times(&self) -> (Tick, Tick) {
        span(self.primitives.iter())
    }
}

impl EffectTimes for Sdnf {
    fn effect_times(&self) -> (Tick, Tick) {
        span(self.disjuncts.iter())
    }
}

pub fn effect_times<T: EffectTimes + ?Sized>(node: &T) -> (Tick, Tick) {
    node.effect_times()
}

pub fn formula_size(phi: &Sdnf) -> usize {
    phi.disjuncts.iter().map(SeqConj::len).sum()
}

pub fn temporal_operator(p: &Primitive) -> PrimitiveKind {
    p.kind
}

/// Same disjunct count, same conjunct counts, same operators position by position.
pub fn structurally_equivalent(a: &Sdnf, b: &Sdnf) -> bool {
    a.disjuncts.len() == b.disjuncts.len()
        && a.disjuncts.iter().zip(&b.disjuncts).all(|(x, y)| {
            x.len() == y.len()
                && x.primitives
                    .iter()
                    .zip(&y.primitives)
                    .all(|(p, q)| temporal_operator(p) == temporal_operator(q))
        })
}

/// `target` is equivalent to `source`, or splits into `p > 1` consecutive
/// blocks that are each equivalent to `source`.
pub fn structurally_transferable(source: &Sdnf, target: &Sdnf) -> bool {
    if structurally_equivalent(source, target) {
        return true;
    }
    let m = source.disjuncts.len();
    let n = target.disjuncts.len();
    if n <= m || n % m != 0 {
        return false;
    }
    target.disjuncts.chunks(m).all(|block| {
        structurally_equivalent(
            source,
            &Sdnf { disjuncts: block.to_vec() },
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g_s() -> Region {
        Region::rect(3, 4, 3, 5).unwrap()
    }

    fn y_s() -> Region {
        Region::rect(7, 8, 5, 8).unwrap()
    }

    fn phi_s() -> Sdnf {
        let sc = SeqConj::new(vec![
            Primitive::ev_alw(1, 15, 4, Literal::pos(g_s())).unwrap(),
            Primitive::ev(21, 39, Literal::pos(y_s())).unwrap(),
        ])
        .unwrap();
        Sdnf::from(sc)
    }

    #[test]
    fn effect_times_of_primitives() {
        let p = Primitive::ev_alw(1, 15, 4, Literal::pos(g_s())).unwrap();
        assert_eq!(p.effect_times(), (1, 19));
        assert_eq!(Literal::pos(g_s()).effect_times(), (0, 0));
        let b = Primitive::alw_ev(0, 25, 8, Literal::pos(Region::rect(2, 3, 2, 3).unwrap())).unwrap();
        assert_eq!(b.effect_times(), (0, 33));
        assert_eq!(phi_s().effect_times(), (1, 39));
    }

    #[test]
    fn sizes() {
        assert_eq!(formula_size(&phi_s()), 2);
        let single = Sdnf::from(Primitive::ev(0, 3, Literal::pos(g_s())).unwrap());
        assert_eq!(formula_size(&single), 1);
    }

    #[test]
    fn operator_tags_ignore_negation() {
        let r = Region::new(vec![Bound { var: "x".into(), lo: 4, hi: i64::MAX }]).unwrap();
        assert_eq!(temporal_operator(&Primitive::ev(5, 8, Literal::pos(r.clone())).unwrap()), PrimitiveKind::Ev);
        let ae = Primitive::alw_ev(0, 8, 4, Literal::pos(r.clone())).unwrap();
        assert_eq!(temporal_operator(&ae), PrimitiveKind::AlwEv);
        assert_eq!(temporal_operator(&Primitive::ev(5, 8, Literal::pos(r)).unwrap().negate()), PrimitiveKind::Alw);
    }

    #[test]
    fn interval_and_region_validation() {
        assert!(matches!(Interval::outer(3, 3), Err(FormulaError::Interval(_))));
        assert!(matches!(Interval::inner(0), Err(FormulaError::Interval(_))));
        assert!(matches!(Region::rect(4, 3, 0, 0), Err(FormulaError::Region(_))));
        let dup = vec![
            Bound { var: "x".into(), lo: 0, hi: 1 },
            Bound { var: "x".into(), lo: 0, hi: 1 },
        ];
        assert!(matches!(Region::new(dup), Err(FormulaError::Region(_))));
        assert!(Primitive::new(PrimitiveKind::Ev, Interval { lo: 0, hi: 2 }, Some(Interval { lo: 0, hi: 1 }), Literal::pos(g_s())).is_err());
    }

    #[test]
    fn seqconj_rejects_overlap() {
        let a = Primitive::ev(0, 3, Literal::pos(g_s())).unwrap();
        let b = Primitive::ev(1, 2, Literal::pos(y_s())).unwrap();
        assert!(matches!(SeqConj::new(vec![a.clone(), b.clone()]), Err(FormulaError::Sdnf(_))));
        let c = Primitive::ev(4, 6, Literal::pos(y_s())).unwrap();
        assert!(SeqConj::new(vec![a.clone(), c.clone()]).is_ok());
        assert!(SeqConj::new(vec![c.clone(), a.clone()]).is_err());
        assert_eq!(SeqConj::from_unordered(vec![c, a.clone()]).unwrap().primitives()[0], a);
    }

    #[test]
    fn structural_predicates() {
        let phi = phi_s();
        assert!(structurally_equivalent(&phi, &phi));
        let ev = Primitive::ev(0, 3, Literal::pos(g_s())).unwrap();
        let two = Sdnf::from(SeqConj::new(vec![ev.clone(), Primitive::ev(5, 7, Literal::pos(y_s())).unwrap()]).unwrap());
        assert!(!structurally_equivalent(&two, &Sdnf::from(ev.clone())));
        assert!(structurally_transferable(&phi, &phi));
        let mixed = Sdnf::new(vec![
            SeqConj::from(ev.clone()),
            SeqConj::from(Primitive::alw(1, 4, Literal::pos(y_s())).unwrap()),
        ])
        .unwrap();
        assert!(!structurally_transferable(&Sdnf::from(ev.clone()), &mixed));
        let doubled = Sdnf::new(vec![SeqConj::from(ev.clone()), SeqConj::from(ev.clone())]).unwrap();
        assert!(structurally_transferable(&Sdnf::from(ev.clone()), &doubled));
        assert!(!structurally_equivalent(&Sdnf::from(ev), &doubled));
    }

    #[test]
    fn centroid_is_corner_mean() {
        assert_eq!(g_s().centroid(), (3.5, 4.0));
        assert_eq!(Region::rect(2, 3, 3, 4).unwrap().centroid(), (2.5, 3.5));
    }
}
