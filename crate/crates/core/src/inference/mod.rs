//! Decision-tree inference of formulas from labeled trajectories, guided by
//! classification rate and information gain, plus inference constrained to
//! the operator skeleton of a known formula.

mod fast;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fast::{eval_mask, Encoded, Shape, TickMask, VarDomain, MAX_TICKS};

use crate::formula::{
    formula_size, Bound, EffectTimes, FormulaError, Interval, Literal, Primitive, PrimitiveKind, Region, Sdnf,
    SeqConj, Tick,
};
use crate::infogain::{GainCache, InfoGainError};
use crate::pso::{optimize, Dim, PsoError, PsoParams, SearchSpace};
use crate::rl::sub_seed;
use crate::semantics::{classification_rate, Completion, LabeledTrajectory, SemanticsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("the tree has no leaf labeled +1")]
    NoPositiveLeaf,
    #[error("a positive leaf has an empty path, so the formula would be `true`")]
    TrivialFormula,
    #[error("trajectories must have at most {MAX_TICKS} ticks and carry every search variable")]
    Encoding,
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Gain(#[from] InfoGainError),
    #[error(transparent)]
    Pso(#[from] PsoError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceParams {
    /// Required classification rate.
    pub zeta: f64,
    /// Size bound.
    pub rho_th: usize,
    /// Weight of the information gain.
    pub lambda: f64,
    pub h_max: usize,
    /// Horizon `L`; time bounds are searched in `[0, L]`.
    pub horizon: Tick,
    /// Largest inner window of nested primitives; `L / 2` when unset.
    pub max_inner: Option<Tick>,
    /// Variables and ranges of region bounds.
    pub vars: Vec<VarDomain>,
    /// Treatment of trajectories shorter than a candidate's effect window.
    /// Under strict completion end-effect times stay within `L`; under
    /// optimistic completion only the outer upper bound does.
    pub completion: Completion,
    #[serde(skip)]
    pub pso: PsoParams,
}

impl Default for InferenceParams {
    fn default() -> Self {
        InferenceParams {
            zeta: 0.95,
            rho_th: 4,
            lambda: 0.01,
            h_max: 2,
            horizon: 40,
            max_inner: None,
            vars: Vec::new(),
            completion: Completion::Strict,
            pso: PsoParams::default(),
        }
    }
}

impl InferenceParams {
    pub fn validate(&self) -> Result<(), InferenceError> {
        let err = |m: &str| Err(InferenceError::Params(m.into()));
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return err("zeta must lie in (0, 1]");
        }
        if self.rho_th < 1 || self.h_max < 1 {
            return err("size bound and maximal depth must be positive");
        }
        if self.h_max * (1 << (self.h_max - 1)) > self.rho_th {
            return err("h_max * 2^(h_max - 1) must not exceed the size bound");
        }
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return err("lambda must be a non-negative number");
        }
        if self.horizon < 1 || (self.horizon + self.max_inner()) as usize >= MAX_TICKS {
            return err("horizon plus inner window must lie in [1, 127]");
        }
        if self.vars.is_empty() || self.vars.iter().any(|v| v.lo > v.hi) {
            return err("at least one non-empty search variable is required");
        }
        self.pso.validate()?;
        Ok(())
    }

    pub fn max_inner(&self) -> Tick {
        self.max_inner.unwrap_or(self.horizon / 2).max(1)
    }

    /// Largest admissible end-effect time for a primitive with outer upper
    /// bound `hi` and inner width `d`.
    fn fits(&self, hi: Tick, d: Tick) -> bool {
        match self.completion {
            Completion::Strict => hi + d <= self.horizon,
            Completion::Optimistic => hi <= self.horizon,
        }
    }
}

/// Why a node became a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    /// Enough trajectories share one label.
    Pure,
    /// Maximal depth reached.
    Depth,
    /// No primitive fits beside the path.
    NoRoom,
    /// Both children were leaves with the same label.
    Merged,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    NonLeaf {
        primitive: Primitive,
        /// Trajectories satisfying `primitive`.
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        label: i8,
        /// Path primitives with their polarity (`true` for the left branch).
        path: Vec<(Primitive, bool)>,
        positives: usize,
        negatives: usize,
        reason: StopReason,
    },
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    /// Leaves in left-first order.
    pub fn leaves(&self) -> Vec<&TreeNode> {
        match self {
            TreeNode::Leaf { .. } => vec![self],
            TreeNode::NonLeaf { left, right, .. } => {
                let mut v = left.leaves();
                v.extend(right.leaves());
                v
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::NonLeaf { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// One evaluated candidate: the best of a structure at a node, or of a
/// disjunct count in constrained inference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRow {
    pub node: String,
    pub depth: usize,
    pub structure: String,
    pub theta: String,
    pub formula: String,
    pub cr: f64,
    pub gain: f64,
    pub j: f64,
    pub chosen: bool,
}

/// CSV text of inference log rows.
pub fn log_to_csv(rows: &[LogRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}

fn theta_text(theta: &[i64]) -> String {
    theta.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// Decoded parameter vector of one primitive: `[lo, hi, (inner), v1_lo, v1_hi, ...]`.
struct Slot {
    kind: PrimitiveKind,
    negated: bool,
}

impl Slot {
    fn width(&self, nvars: usize) -> usize {
        2 + self.kind.is_nested() as usize + 2 * nvars
    }

    fn dims(&self, p: &InferenceParams, tag: &str) -> Vec<Dim> {
        let l = p.horizon as i64;
        let mut d = vec![Dim::new(format!("{tag}lo"), 0, l - 1), Dim::new(format!("{tag}hi"), 1, l)];
        if self.kind.is_nested() {
            d.push(Dim::new(format!("{tag}inner"), 1, p.max_inner() as i64));
        }
        for v in &p.vars {
            d.push(Dim::new(format!("{tag}{}_lo", v.name), v.lo, v.hi));
            d.push(Dim::new(format!("{tag}{}_hi", v.name), v.lo, v.hi));
        }
        d
    }

    fn shape(&self, th: &[i64]) -> Shape {
        Shape {
            kind: self.kind,
            lo: th[0] as Tick,
            hi: th[1] as Tick,
            inner: if self.kind.is_nested() { th[2] as Tick } else { 0 },
            negated: self.negated,
        }
    }

    fn bounds(&self, th: &[i64]) -> Vec<(i64, i64)> {
        let off = 2 + self.kind.is_nested() as usize;
        th[off..].chunks(2).map(|c| (c[0], c[1])).collect()
    }

    /// Effect window, if the parameters are well-formed and fit the horizon.
    fn window(&self, th: &[i64], p: &InferenceParams) -> Option<(Tick, Tick)> {
        let s = self.shape(th);
        if s.lo >= s.hi || !p.fits(s.hi, s.inner) || self.bounds(th).iter().any(|(a, b)| a > b) {
            return None;
        }
        Some((s.lo, s.hi + s.inner))
    }

    fn primitive(&self, th: &[i64], p: &InferenceParams) -> Result<Primitive, FormulaError> {
        let s = self.shape(th);
        let dims = p
            .vars
            .iter()
            .zip(self.bounds(th))
            .map(|(v, (lo, hi))| Bound { var: v.name.clone(), lo, hi })
            .collect();
        let region = Region::new(dims)?;
        let lit = if self.negated { Literal::neg(region) } else { Literal::pos(region) };
        let inner = if self.kind.is_nested() { Some(Interval::inner(s.inner)?) } else { None };
        Primitive::new(self.kind, Interval::outer(s.lo, s.hi)?, inner, lit)
    }

    /// Parameters of an existing primitive, clamped into the search box.
    fn theta_of(prim: &Primitive, p: &InferenceParams) -> Vec<i64> {
        let l = p.horizon as i64;
        let o = prim.outer();
        let mut th = vec![(o.lo as i64).min(l - 1), (o.hi as i64).clamp(1, l)];
        if prim.kind().is_nested() {
            th.push((prim.inner_width() as i64).clamp(1, p.max_inner() as i64));
        }
        for v in &p.vars {
            let (lo, hi) = prim.region().bound(&v.name).map_or((v.lo, v.hi), |b| (b.lo, b.hi));
            th.push(lo.clamp(v.lo, v.hi));
            th.push(hi.clamp(v.lo, v.hi));
        }
        th
    }
}

fn disjoint(a: (Tick, Tick), b: (Tick, Tick)) -> bool {
    a.1 < b.0 || b.1 < a.0
}

fn encode(data: &[LabeledTrajectory], p: &InferenceParams) -> Result<Encoded, InferenceError> {
    if data.is_empty() {
        return Err(InferenceError::EmptyDataset);
    }
    Encoded::new(data, &p.vars).ok_or(InferenceError::Encoding)
}


/// Result of tree inference on one dataset.
#[derive(Debug, Clone)]
pub struct TreeInference {
    pub tree: TreeNode,
    /// `None` when the tree has no usable positive leaf.
    pub formula: Option<Sdnf>,
    /// All trajectories shared one label at the root.
    pub degenerate: bool,
    pub log: Vec<LogRow>,
}

struct TreeBuilder<'a> {
    enc: Encoded,
    params: &'a InferenceParams,
    gain: Option<&'a mut GainCache>,
    log: Vec<LogRow>,
}

impl TreeBuilder<'_> {
    fn leaf(&self, idx: &[usize], path: &[(Primitive, bool)], reason: StopReason) -> TreeNode {
        let positives = idx.iter().filter(|&&i| self.enc.is_positive(i)).count();
        let negatives = idx.len() - positives;
        TreeNode::Leaf {
            label: if positives > negatives { 1 } else { -1 },
            path: path.to_vec(),
            positives,
            negatives,
            reason,
        }
    }

    fn has_room(&self, path: &[(Primitive, bool)]) -> bool {
        let l = self.params.horizon;
        (0..l).any(|a| {
            self.params.fits(a + 1, 0) && path.iter().all(|(q, _)| disjoint((a, a + 1), q.effect_times()))
        })
    }

    fn build(&mut self, idx: &[usize], path: &[(Primitive, bool)], depth: usize, node: u64) -> Result<TreeNode, InferenceError> {
        let positives = idx.iter().filter(|&&i| self.enc.is_positive(i)).count();
        let majority = positives.max(idx.len() - positives);
        if idx.is_empty() || majority as f64 >= self.params.zeta * idx.len() as f64 {
            return Ok(self.leaf(idx, path, StopReason::Pure));
        }
        if depth >= self.params.h_max {
            return Ok(self.leaf(idx, path, StopReason::Depth));
        }
        if !self.has_room(path) {
            return Ok(self.leaf(idx, path, StopReason::NoRoom));
        }
        let Some((prim, sat)) = self.best_split(idx, path, depth, node)? else {
            return Ok(self.leaf(idx, path, StopReason::NoRoom));
        };
        let (mut li, mut ri) = (Vec::new(), Vec::new());
        for (&i, &s) in idx.iter().zip(&sat) {
            if s {
                li.push(i);
            } else {
                ri.push(i);
            }
        }
        let mut lp = path.to_vec();
        lp.push((prim.clone(), true));
        let mut rp = path.to_vec();
        rp.push((prim.clone(), false));
        let left = self.build(&li, &lp, depth + 1, 2 * node)?;
        let right = self.build(&ri, &rp, depth + 1, 2 * node + 1)?;
        if let (TreeNode::Leaf { label: a, .. }, TreeNode::Leaf { label: b, .. }) = (&left, &right) {
            if a == b {
                return Ok(self.leaf(idx, path, StopReason::Merged));
            }
        }
        Ok(TreeNode::NonLeaf { primitive: prim, left: Box::new(left), right: Box::new(right) })
    }

    /// Best primitive over the four structures, with its satisfaction on `idx`.
    fn best_split(
        &mut self,
        idx: &[usize],
        path: &[(Primitive, bool)],
        depth: usize,
        node: u64,
    ) -> Result<Option<(Primitive, Vec<bool>)>, InferenceError> {
        let p = self.params;
        let windows: Vec<(Tick, Tick)> = path.iter().map(|(q, _)| q.effect_times()).collect();
        let mut best: Option<(f64, Primitive, usize)> = None;
        for (k, kind) in PrimitiveKind::ALL.into_iter().enumerate() {
            let slot = Slot { kind, negated: false };
            let feasible = |th: &[i64]| slot.window(th, p).is_some_and(|w| windows.iter().all(|&q| disjoint(w, q)));
            let space = SearchSpace::with_feasibility(slot.dims(p, ""), feasible)?;
            let pso = PsoParams { seed: sub_seed(p.pso.seed, node * 4 + k as u64), ..p.pso.clone() };
            let enc = &self.enc;
            let mut gain = self.gain.as_deref_mut();
            let mut failure = None;
            let objective = |th: &[i64]| {
                let (shape, bounds) = (slot.shape(th), slot.bounds(th));
                let hits = idx.iter().filter(|&&i| enc.eval(i, &shape, &bounds, p.completion) == enc.is_positive(i)).count();
                let cr = hits as f64 / idx.len() as f64;
                match gain_of(&slot, th, p, gain.as_deref_mut()) {
                    Ok(g) => cr + p.lambda * g,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NEG_INFINITY
                    }
                }
            };
            let res = match optimize(objective, &space, &pso, &[]) {
                Ok(r) => r,
                Err(PsoError::Infeasible(_)) => continue,
                Err(e) => return Err(e.into()),
            };
            if let Some(e) = failure {
                return Err(e);
            }
            let prim = slot.primitive(&res.best, p)?;
            let g = gain_of(&slot, &res.best, p, self.gain.as_deref_mut())?;
            self.log.push(LogRow {
                node: node.to_string(),
                depth,
                structure: kind.name().into(),
                theta: theta_text(&res.best),
                formula: prim.to_string(),
                cr: res.value - p.lambda * g,
                gain: g,
                j: res.value,
                chosen: false,
            });
            // Earlier structures win ties.
            if best.as_ref().map_or(true, |b| res.value > b.0) {
                best = Some((res.value, prim, self.log.len() - 1));
            }
        }
        Ok(best.map(|(_, prim, row)| {
            self.log[row].chosen = true;
            let (slot, th) = (Slot { kind: prim.kind(), negated: false }, Slot::theta_of(&prim, p));
            let (shape, bounds) = (slot.shape(&th), slot.bounds(&th));
            let sat = idx.iter().map(|&i| self.enc.eval(i, &shape, &bounds, p.completion)).collect();
            (prim, sat)
        }))
    }
}

fn gain_of(slot: &Slot, th: &[i64], p: &InferenceParams, gain: Option<&mut GainCache>) -> Result<f64, InferenceError> {
    match gain {
        Some(cache) if p.lambda > 0.0 => Ok(cache.gain(&Sdnf::from(slot.primitive(th, p)?))?),
        _ => Ok(0.0),
    }
}

/// Grows the formula decision tree. `gain` may be `None` when
/// `lambda` is 0.
pub fn mitl_tree(
    data: &[LabeledTrajectory],
    params: &InferenceParams,
    gain: Option<&mut GainCache>,
) -> Result<TreeInference, InferenceError> {
    params.validate()?;
    let enc = encode(data, params)?;
    let positives = data.iter().filter(|d| d.is_positive()).count();
    let degenerate = positives == 0 || positives == data.len();
    let mut b = TreeBuilder { enc, params, gain, log: Vec::new() };
    let idx: Vec<usize> = (0..data.len()).collect();
    let tree = b.build(&idx, &[], 0, 1)?;
    let formula = match tree_to_sdnf(&tree) {
        Ok(f) => Some(f),
        Err(InferenceError::NoPositiveLeaf | InferenceError::TrivialFormula) => None,
        Err(e) => return Err(e),
    };
    Ok(TreeInference { tree, formula, degenerate, log: b.log })
}

/// One conjunction per positive leaf, primitives of right branches negated
/// and sorted by start-effect time; leaves joined left to right.
pub fn tree_to_sdnf(tree: &TreeNode) -> Result<Sdnf, InferenceError> {
    let mut disjuncts = Vec::new();
    for leaf in tree.leaves() {
        if let TreeNode::Leaf { label: 1, path, .. } = leaf {
            if path.is_empty() {
                return Err(InferenceError::TrivialFormula);
            }
            let prims = path.iter().map(|(q, pos)| if *pos { q.clone() } else { q.negate() }).collect();
            disjuncts.push(SeqConj::from_unordered(prims)?);
        }
    }
    if disjuncts.is_empty() {
        return Err(InferenceError::NoPositiveLeaf);
    }
    Ok(Sdnf::new(disjuncts)?)
}

/// Classification rate at least `zeta` and size at most `rho_th`.
pub fn check_satisfying(
    phi: &Sdnf,
    data: &[LabeledTrajectory],
    zeta: f64,
    rho_th: usize,
    mode: Completion,
) -> Result<bool, InferenceError> {
    if formula_size(phi) > rho_th {
        return Ok(false);
    }
    Ok(classification_rate(data, phi, mode)? >= zeta)
}

/// Outcome of skeleton-constrained inference.
#[derive(Debug, Clone)]
pub struct ConstrainedInference {
    /// First satisfying formula, if any.
    pub formula: Option<Sdnf>,
    /// Copies of the skeleton used by `formula`.
    pub copies: usize,
    pub log: Vec<LogRow>,
}

/// Searches formulas made of `p = 1, 2, ...` copies of the operator skeleton
/// of `skeleton` (including literal polarity), optimizing all parameters
/// jointly, until one is satisfying or the size bound is exceeded.
pub fn infer_target_constrained(
    data: &[LabeledTrajectory],
    skeleton: &Sdnf,
    params: &InferenceParams,
    mut gain: Option<&mut GainCache>,
) -> Result<ConstrainedInference, InferenceError> {
    params.validate()?;
    let enc = encode(data, params)?;
    let nv = params.vars.len();
    let source_theta: Vec<i64> = skeleton.primitives().flat_map(|q| Slot::theta_of(q, params)).collect();
    let mut log = Vec::new();
    let mut prev: Option<Vec<i64>> = None;
    for p in 1.. {
        if p * formula_size(skeleton) > params.rho_th {
            break;
        }
        // Disjuncts of the template, each a list of slots.
        let template: Vec<Vec<Slot>> = (0..p)
            .flat_map(|_| skeleton.disjuncts())
            .map(|d| {
                d.primitives()
                    .iter()
                    .map(|q| Slot { kind: q.kind(), negated: q.literal().negated })
                    .collect()
            })
            .collect();
        let mut at = 0;
        let ranges: Vec<Vec<(usize, usize)>> = template
            .iter()
            .map(|d| {
                d.iter()
                    .map(|s| {
                        at += s.width(nv);
                        (at - s.width(nv), at)
                    })
                    .collect()
            })
            .collect();
        let dims: Vec<Dim> = template
            .iter()
            .enumerate()
            .flat_map(|(i, d)| d.iter().enumerate().flat_map(move |(j, s)| s.dims(params, &format!("d{}p{}_", i + 1, j + 1))))
            .collect();
        let feasible = |th: &[i64]| {
            template.iter().zip(&ranges).all(|(d, rs)| {
                let mut last: Option<Tick> = None;
                d.iter().zip(rs).all(|(s, &(a, b))| match s.window(&th[a..b], params) {
                    Some((ws, we)) if last.map_or(true, |l| l < ws) => {
                        last = Some(we);
                        true
                    }
                    _ => false,
                })
            })
        };
        let build = |th: &[i64]| -> Result<Sdnf, InferenceError> {
            let mut ds = Vec::new();
            for (d, rs) in template.iter().zip(&ranges) {
                let prims = d.iter().zip(rs).map(|(s, &(a, b))| s.primitive(&th[a..b], params)).collect::<Result<_, _>>()?;
                ds.push(SeqConj::new(prims)?);
            }
            Ok(Sdnf::new(ds)?)
        };
        let space = SearchSpace::with_feasibility(dims, feasible)?;
        let mut hints = Vec::new();
        if let Some(prev) = &prev {
            let mut h = prev.clone();
            h.extend(&source_theta);
            hints.push(h);
        }
        hints.push(source_theta.iter().copied().cycle().take(source_theta.len() * p).collect());
        let pso = PsoParams { seed: sub_seed(params.pso.seed, 1000 + p as u64), ..params.pso.clone() };
        let mut failure = None;
        let g = &mut gain;
        let objective = |th: &[i64]| {
            let hits = (0..enc.len())
                .filter(|&i| {
                    let sat = template.iter().zip(&ranges).any(|(d, rs)| {
                        d.iter().zip(rs).all(|(s, &(a, b))| {
                            let t = &th[a..b];
                            enc.eval(i, &s.shape(t), &s.bounds(t), params.completion)
                        })
                    });
                    sat == enc.is_positive(i)
                })
                .count();
            let cr = hits as f64 / enc.len() as f64;
            let gv = match g.as_deref_mut() {
                Some(cache) if params.lambda > 0.0 => build(th).and_then(|f| Ok(cache.gain(&f)?)),
                _ => Ok(0.0),
            };
            match gv {
                Ok(gv) => cr + params.lambda * gv,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            }
        };
        let res = optimize(objective, &space, &pso, &hints)?;
        if let Some(e) = failure {
            return Err(e);
        }
        let phi = build(&res.best)?;
        let cr = classification_rate(data, &phi, params.completion)?;
        let gv = res.value - cr;
        let ok = check_satisfying(&phi, data, params.zeta, params.rho_th, params.completion)?;
        log.push(LogRow {
            node: format!("p{p}"),
            depth: 0,
            structure: skeleton_name(skeleton, p),
            theta: theta_text(&res.best),
            formula: phi.to_string(),
            cr,
            gain: if params.lambda > 0.0 { gv / params.lambda } else { 0.0 },
            j: res.value,
            chosen: ok,
        });
        if ok {
            return Ok(ConstrainedInference { formula: Some(phi), copies: p, log });
        }
        prev = Some(res.best);
    }
    Ok(ConstrainedInference { formula: None, copies: 0, log })
}

fn skeleton_name(skeleton: &Sdnf, p: usize) -> String {
    let one = skeleton
        .disjuncts()
        .iter()
        .map(|d| d.primitives().iter().map(|q| q.kind().name()).collect::<Vec<_>>().join("&"))
        .collect::<Vec<_>>()
        .join("|");
    vec![one; p].join("|")
}

impl fmt::Display for TreeNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(n: &TreeNode, indent: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let pad = "  ".repeat(indent);
            match n {
                TreeNode::Leaf { label, positives, negatives, reason, .. } => {
                    writeln!(f, "{pad}leaf {label:+} ({positives}+/{negatives}-, {reason:?})")
                }
                TreeNode::NonLeaf { primitive, left, right } => {
                    writeln!(f, "{pad}{primitive}")?;
                    go(left, indent + 1, f)?;
                    go(right, indent + 1, f)
                }
            }
        }
        go(self, 0, f)
    }
}
