//! Bitmask evaluation of primitives over a fixed dataset.
//!
//! Each trajectory is encoded once as per-variable prefix masks over ticks,
//! so the tick mask of any box region costs one XOR and one AND per
//! variable.

use crate::formula::{PrimitiveKind, Tick, Valuation};
use crate::semantics::{Completion, LabeledTrajectory};

/// Largest number of ticks a trajectory may have in encoded form.
pub const MAX_TICKS: usize = 128;

pub type TickMask = u128;

/// Search domain of one state variable.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct VarDomain {
    pub name: String,
    pub lo: i64,
    pub hi: i64,
}

#[derive(Debug, Clone)]
pub struct Encoded {
    ticks: Vec<usize>,
    positive: Vec<bool>,
    /// `prefix[traj][var][k]`: ticks whose value is below `lo + k`.
    prefix: Vec<Vec<Vec<TickMask>>>,
    lows: Vec<i64>,
    his: Vec<i64>,
}

/// Box bounds per variable, in domain order.
pub type Bounds<'a> = &'a [(i64, i64)];

/// Shape and timing of one primitive candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub kind: PrimitiveKind,
    pub lo: Tick,
    pub hi: Tick,
    pub inner: Tick,
    pub negated: bool,
}

impl Encoded {
    /// `None` when a trajectory is longer than [`MAX_TICKS`] or lacks a variable.
    pub fn new(data: &[LabeledTrajectory], domains: &[VarDomain]) -> Option<Self> {
        let mut enc = Encoded {
            ticks: Vec::with_capacity(data.len()),
            positive: Vec::with_capacity(data.len()),
            prefix: Vec::with_capacity(data.len()),
            lows: domains.iter().map(|d| d.lo).collect(),
            his: domains.iter().map(|d| d.hi).collect(),
        };
        for lt in data {
            let states = &lt.trajectory.states;
            if states.len() > MAX_TICKS {
                return None;
            }
            let mut per_var = Vec::with_capacity(domains.len());
            for d in domains {
                let width = (d.hi - d.lo + 1) as usize;
                let mut exact = vec![0 as TickMask; width];
                for (t, s) in states.iter().enumerate() {
                    let v = s.value(&d.name)?;
                    if (d.lo..=d.hi).contains(&v) {
                        exact[(v - d.lo) as usize] |= 1 << t;
                    }
                }
                let mut pre = vec![0 as TickMask; width + 1];
                for k in 0..width {
                    pre[k + 1] = pre[k] | exact[k];
                }
                per_var.push(pre);
            }
            enc.ticks.push(states.len());
            enc.positive.push(lt.is_positive());
            enc.prefix.push(per_var);
        }
        Some(enc)
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn is_positive(&self, i: usize) -> bool {
        self.positive[i]
    }

    /// Ticks of trajectory `i` at which the box holds.
    pub fn region_mask(&self, i: usize, bounds: Bounds<'_>) -> TickMask {
        let mut m = full(self.ticks[i]);
        for (v, &(lo, hi)) in bounds.iter().enumerate() {
            let (dl, dh) = (self.lows[v], self.his[v]);
            let (lo, hi) = (lo.max(dl), hi.min(dh));
            if lo > hi {
                return 0;
            }
            let pre = &self.prefix[i][v];
            m &= pre[(hi - dl + 1) as usize] ^ pre[(lo - dl) as usize];
        }
        m
    }

    pub fn eval(&self, i: usize, shape: &Shape, bounds: Bounds<'_>, mode: Completion) -> bool {
        eval_mask(shape, self.region_mask(i, bounds), self.ticks[i], mode)
    }
}

fn full(n: usize) -> TickMask {
    if n >= MAX_TICKS {
        !0
    } else {
        (1 << n) - 1
    }
}

fn window(lo: Tick, hi: Tick) -> TickMask {
    let upto = full(hi as usize + 1);
    upto & !full(lo as usize)
}

/// Truth of a primitive given the tick mask of its (positive) region.
/// Ticks at or past `n` count as satisfying the literal under optimistic
/// completion and as violating it otherwise.
pub fn eval_mask(shape: &Shape, region: TickMask, n: usize, mode: Completion) -> bool {
    let f = full(n);
    let mut m = if shape.negated { !region & f } else { region & f };
    if mode == Completion::Optimistic {
        m |= !f;
    }
    let d = shape.inner;
    let w = window(shape.lo, shape.hi);
    match shape.kind {
        PrimitiveKind::Ev => m & w != 0,
        PrimitiveKind::Alw => m & w == w,
        PrimitiveKind::EvAlw => {
            let mut r = m;
            for k in 1..=d {
                r &= m >> k;
            }
            r & w != 0
        }
        PrimitiveKind::AlwEv => {
            let mut e = m;
            for k in 1..=d {
                e |= m >> k;
            }
            e & w == w
        }
    }
}
