//! Brute-force reference semantics shared by the integration tests.
//!
//! Everything here is written directly from the definitions of the four
//! primitive structures and does not call into the library's evaluator.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tempo_core::formula::{Literal, Primitive, PrimitiveKind, Region, SeqConj, Sdnf, Valuation};
use tempo_core::infogain::{PriorMode, VarState};

/// Truth of a literal at tick `t`, `None` past the end of the word.
pub trait Oracle {
    fn lit(&self, lit: &Literal, t: u32) -> Option<bool>;
}

/// Per-tick symbols where bit `k` stands for `ap[k]`.
pub struct Bits<'a> {
    pub ap: &'a [Region],
    pub word: &'a [u64],
}

impl Oracle for Bits<'_> {
    fn lit(&self, lit: &Literal, t: u32) -> Option<bool> {
        let sym = *self.word.get(t as usize)?;
        let k = self.ap.iter().position(|r| *r == lit.region).expect("region in alphabet");
        Some((sym >> k & 1 == 1) != lit.negated)
    }
}

/// States with named variables.
pub struct States<'a, V: Valuation>(pub &'a [V]);

fn inside<V: Valuation>(r: &Region, v: &V) -> bool {
    r.dims().iter().all(|b| {
        let x = v.value(&b.var).expect("variable present");
        b.lo <= x && x <= b.hi
    })
}

impl<V: Valuation> Oracle for States<'_, V> {
    fn lit(&self, lit: &Literal, t: u32) -> Option<bool> {
        self.0.get(t as usize).map(|s| inside(&lit.region, s) != lit.negated)
    }
}

/// Unknown ticks read as `fill`.
pub fn primitive<O: Oracle>(p: &Primitive, w: &O, fill: bool) -> bool {
    let at = |t: u32| w.lit(p.literal(), t).unwrap_or(fill);
    let o = p.outer();
    let d = p.inner_width();
    match p.kind() {
        PrimitiveKind::Ev => (o.lo..=o.hi).any(at),
        PrimitiveKind::Alw => (o.lo..=o.hi).all(at),
        PrimitiveKind::EvAlw => (o.lo..=o.hi).any(|t| (t..=t + d).all(at)),
        PrimitiveKind::AlwEv => (o.lo..=o.hi).all(|t| (t..=t + d).any(at)),
    }
}

pub fn seq_conj<O: Oracle>(sc: &SeqConj, w: &O, fill: bool) -> bool {
    sc.primitives().iter().all(|p| primitive(p, w, fill))
}

pub fn sdnf<O: Oracle>(phi: &Sdnf, w: &O, fill: bool) -> bool {
    phi.disjuncts().iter().any(|d| seq_conj(d, w, fill))
}

/// Last tick any primitive of `sc` reads.
pub fn last_tick(sc: &SeqConj) -> u32 {
    sc.primitives().iter().map(|p| p.outer().hi + p.inner_width()).max().unwrap_or(0)
}

pub fn unit_region(var: &str, at: i64) -> Region {
    Region::new(vec![tempo_core::formula::Bound { var: var.into(), lo: at, hi: at }]).unwrap()
}

pub struct SmallMdp {
    pub initial: Vec<f64>,
    pub actions: Vec<Vec<Vec<(usize, f64)>>>,
}

pub fn random_mdp(rng: &mut ChaCha8Rng, n: usize) -> SmallMdp {
    let mut initial: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.7) { rng.gen_range(0.1..1.0) } else { 0.0 }).collect();
    if initial.iter().all(|&w| w == 0.0) {
        initial[0] = 1.0;
    }
    let z: f64 = initial.iter().sum();
    initial.iter_mut().for_each(|w| *w /= z);
    let actions = (0..n)
        .map(|_| {
            (0..rng.gen_range(1..=3))
                .map(|_| {
                    let mut out: Vec<(usize, f64)> = Vec::new();
                    for t in 0..n {
                        if rng.gen_bool(0.5) {
                            out.push((t, rng.gen_range(0.1..1.0)));
                        }
                    }
                    if out.is_empty() {
                        out.push((rng.gen_range(0..n), 1.0));
                    }
                    let z: f64 = out.iter().map(|o| o.1).sum();
                    out.iter_mut().for_each(|o| o.1 /= z);
                    out
                })
                .collect()
        })
        .collect();
    SmallMdp { initial, actions }
}

pub fn x_state(x: usize) -> VarState {
    VarState(vec![("x".into(), x as i64)])
}

/// Probability of `phi` by listing every path of `horizon` steps.
pub fn enumerate(m: &SmallMdp, phi: &Sdnf, horizon: u32, mode: PriorMode) -> f64 {
    let n = m.initial.len();
    let step = |s: usize, t: usize| -> f64 {
        let acts = &m.actions[s];
        match mode {
            PriorMode::UniformRandomAction => {
                acts.iter().flat_map(|a| a.iter()).filter(|o| o.0 == t).map(|o| o.1).sum::<f64>() / acts.len() as f64
            }
            PriorMode::UniformFeasible => {
                if acts.iter().flat_map(|a| a.iter()).any(|o| o.0 == t && o.1 > 0.0) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    };
    let start = |s: usize| match mode {
        PriorMode::UniformRandomAction => m.initial[s],
        PriorMode::UniformFeasible => (m.initial[s] > 0.0) as u8 as f64,
    };
    let mut paths: Vec<(Vec<usize>, f64)> = (0..n).map(|s| (vec![s], start(s))).filter(|p| p.1 > 0.0).collect();
    for _ in 0..horizon {
        let mut next = Vec::new();
        for (p, w) in &paths {
            for t in 0..n {
                let q = step(*p.last().unwrap(), t);
                if q > 0.0 {
                    let mut np = p.clone();
                    np.push(t);
                    next.push((np, w * q));
                }
            }
        }
        paths = next;
    }
    let total: f64 = paths.iter().map(|p| p.1).sum();
    let sat: f64 = paths
        .iter()
        .filter(|(p, _)| {
            let states: Vec<VarState> = p.iter().map(|&s| x_state(s)).collect();
            sdnf(phi, &States(&states), false)
        })
        .map(|p| p.1)
        .sum();
    sat / total
}

pub const KINDS: [PrimitiveKind; 4] = [PrimitiveKind::Ev, PrimitiveKind::Alw, PrimitiveKind::EvAlw, PrimitiveKind::AlwEv];

pub fn make(kind: PrimitiveKind, lo: u32, hi: u32, d: u32, lit: Literal) -> Primitive {
    match kind {
        PrimitiveKind::Ev => Primitive::ev(lo, hi, lit),
        PrimitiveKind::Alw => Primitive::alw(lo, hi, lit),
        PrimitiveKind::EvAlw => Primitive::ev_alw(lo, hi, d, lit),
        PrimitiveKind::AlwEv => Primitive::alw_ev(lo, hi, d, lit),
    }
    .expect("valid primitive")
}

/// Sequential conjunctions over `regions` whose primitives are laid out left
/// to right with random gaps.
pub fn arb_seq_conj(max_len: usize, regions: Vec<Region>) -> impl proptest::strategy::Strategy<Value = SeqConj> {
    use proptest::prelude::*;
    let n = regions.len();
    prop::collection::vec((0..4usize, 0u32..3, 1u32..5, 1u32..4, 0..n, any::<bool>()), 1..=max_len).prop_map(
        move |parts| {
            let mut start = 0;
            let mut prims = Vec::new();
            for (k, gap, width, d, r, neg) in parts {
                let kind = KINDS[k];
                let (lo, hi) = (start + gap, start + gap + width);
                let d = if kind.is_nested() { d } else { 0 };
                let region = regions[r].clone();
                let lit = if neg { Literal::neg(region) } else { Literal::pos(region) };
                prims.push(make(kind, lo, hi, d, lit));
                start = hi + d + 1;
            }
            SeqConj::new(prims).expect("ordered windows")
        },
    )
}

pub fn arb_sdnf(max_disjuncts: usize, max_len: usize, regions: Vec<Region>) -> impl proptest::strategy::Strategy<Value = Sdnf> {
    use proptest::prelude::*;
    prop::collection::vec(arb_seq_conj(max_len, regions), 1..=max_disjuncts)
        .prop_map(|d| Sdnf::new(d).expect("non-empty"))
}

/// Independent unit predicates `x = 1`, `y = 1`, `z = 1`.
pub fn unit_predicates() -> Vec<Region> {
    vec![unit_region("x", 1), unit_region("y", 1), unit_region("z", 1)]
}
