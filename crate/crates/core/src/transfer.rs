//! Transfer of extended Q-functions from a source task to a structurally
//! related target task.
//!
//! Each target extended state is identified with a source one: the target
//! disjunct with a source disjunct, the automaton location and clocks through
//! the automaton mapping, and the environment state by its offset from the
//! centroid of the region of the pending primitive.

use std::fmt::Write as _;

use rustc_hash::FxHashSet;
use thiserror::Error;

use crate::automata::{build_mapping, AutomataError, ClockValue, DtaConfig, DtaMapping, Phase, TickDta};
use crate::env::{EnvState, GridEnvConfig};
use crate::formula::{structurally_transferable, Region, Sdnf};
use crate::rl::{ExtendedState, QTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransferError {
    #[error("target formula is not structurally transferable from the source formula")]
    NotTransferable,
    #[error("expected {expected} automata, got {got}")]
    DtaCount { expected: usize, got: usize },
    #[error("configuration is terminal; no primitive is pending")]
    Terminal,
    #[error("source state space is empty")]
    EmptySource,
    #[error(transparent)]
    Automata(#[from] AutomataError),
}

/// 1-based index of the primitive pending in `cfg`.
pub fn current_primitive_index(dta: &TickDta, cfg: &DtaConfig) -> Result<usize, TransferError> {
    match dta.phase_of_location(cfg.location) {
        Phase::Primitive(j) => Ok(j),
        Phase::Accepted | Phase::Rejected => Err(TransferError::Terminal),
    }
}

/// Source state whose offset from the centroid of `rho_s` best matches the
/// offset of `s_t` from the centroid of `rho_t`. Ties go to the smallest
/// `(y, x)`; the heading is copied.
pub fn map_state(s_t: &EnvState, rho_t: &Region, rho_s: &Region, source: &GridEnvConfig) -> Result<EnvState, TransferError> {
    let (ctx, cty) = rho_t.centroid();
    let (csx, csy) = rho_s.centroid();
    let (px, py) = (csx + s_t.x as f64 - ctx, csy + s_t.y as f64 - cty);
    let mut best: Option<(f64, i32, i32)> = None;
    for y in 0..source.height {
        for x in 0..source.width {
            let d = (x as f64 - px).powi(2) + (y as f64 - py).powi(2);
            if best.map_or(true, |b| d < b.0) {
                best = Some((d, x, y));
            }
        }
    }
    let (_, x, y) = best.ok_or(TransferError::EmptySource)?;
    Ok(EnvState::new(x, y, s_t.heading))
}

/// Closest value in `0..=max`, the smaller one on ties.
fn nearest_clock(v: ClockValue, max: ClockValue) -> ClockValue {
    v.min(max)
}

pub struct TransferContext<'a> {
    pub source_formula: &'a Sdnf,
    pub source_dtas: &'a [TickDta],
    pub source_q: &'a QTable<ExtendedState<EnvState>>,
    pub source_env: &'a GridEnvConfig,
    pub target_formula: &'a Sdnf,
    pub target_dtas: &'a [TickDta],
    pub target_env: &'a GridEnvConfig,
}

#[derive(Debug, Clone)]
pub struct TransferOutput {
    pub q: QTable<ExtendedState<EnvState>>,
    /// Per target disjunct, the source disjunct (0-based) and the mapping.
    pub mappings: Vec<(usize, DtaMapping)>,
    /// Target extended states considered.
    pub enumerated: usize,
    /// Entries copied from the source table.
    pub copied: usize,
}

impl TransferOutput {
    /// Text listing of the predicate, location and clock correspondences.
    pub fn report(&self, ctx: &TransferContext<'_>) -> String {
        let mut s = String::new();
        for (i, (src, m)) in self.mappings.iter().enumerate() {
            let _ = writeln!(s, "target disjunct {} -> source disjunct {}", i + 1, src + 1);
            s.push_str(&m.report(&ctx.target_dtas[i], &ctx.source_dtas[*src]));
        }
        let _ = writeln!(s, "enumerated {} target states, copied {} entries", self.enumerated, self.copied);
        s
    }
}

/// 0-based source disjunct of 0-based target disjunct `i`.
pub fn source_disjunct(i: usize, m_source: usize) -> usize {
    i % m_source
}

impl TransferContext<'_> {
    fn check(&self) -> Result<(), TransferError> {
        if !structurally_transferable(self.source_formula, self.target_formula) {
            return Err(TransferError::NotTransferable);
        }
        for (f, d) in [(self.source_formula, self.source_dtas), (self.target_formula, self.target_dtas)] {
            if f.disjuncts().len() != d.len() {
                return Err(TransferError::DtaCount { expected: f.disjuncts().len(), got: d.len() });
            }
        }
        Ok(())
    }

    /// Source key identified with a target key.
    pub fn map_key(
        &self,
        key: &ExtendedState<EnvState>,
        mappings: &[(usize, DtaMapping)],
    ) -> Result<ExtendedState<EnvState>, TransferError> {
        let i = key.disjunct as usize;
        let (src, m) = &mappings[i];
        let (tdta, sdta) = (&self.target_dtas[i], &self.source_dtas[*src]);
        let tsc = &self.target_formula.disjuncts()[i];
        // Terminal locations keep the region of the last primitive.
        let j = current_primitive_index(tdta, &key.config()).unwrap_or(tsc.len());
        let rho_t = tsc.primitives()[j - 1].region();
        let rho_s = sdta.ap()[m.sigma_map[j - 1]].clone();
        let env = self.source_env.observe(map_state(&key.env, rho_t, &rho_s, self.source_env)?);
        let location = m.location_map[key.location as usize];
        let max = sdta.horizon() as ClockValue;
        let mut valuation = smallvec::SmallVec::from_elem(0, sdta.num_clocks());
        for (tc, &v) in key.valuation.iter().enumerate() {
            let sc = m.clock_map[tc];
            if sdta.is_active(location, sc) {
                valuation[sc] = nearest_clock(v, max);
            }
        }
        Ok(ExtendedState { env, disjunct: *src as u16, location, valuation })
    }
}

/// Builds the target table: every target extended state receives the
/// values of its source counterpart when the source table has an entry
/// there, and no entry (default 0) otherwise.
pub fn transfer_q(ctx: &TransferContext<'_>) -> Result<TransferOutput, TransferError> {
    ctx.check()?;
    let m_s = ctx.source_formula.disjuncts().len();
    let mut mappings = Vec::with_capacity(ctx.target_dtas.len());
    for (i, (tdta, tsc)) in ctx.target_dtas.iter().zip(ctx.target_formula.disjuncts()).enumerate() {
        let src = source_disjunct(i, m_s);
        let m = build_mapping(tdta, &ctx.source_dtas[src], tsc, &ctx.source_formula.disjuncts()[src])?;
        mappings.push((src, m));
    }
    let envs: Vec<EnvState> = {
        let mut seen = FxHashSet::default();
        ctx.target_env.states().map(|s| ctx.target_env.observe(s)).filter(|s| seen.insert(*s)).collect()
    };
    let mut q = QTable::new();
    let (mut enumerated, mut copied) = (0, 0);
    for (i, tdta) in ctx.target_dtas.iter().enumerate() {
        for l in 0..tdta.num_locations() {
            for cfg in tdta.configs_at(l as _) {
                for s in &envs {
                    let key = ExtendedState::new(*s, i, &cfg);
                    enumerated += 1;
                    let src = ctx.map_key(&key, &mappings)?;
                    if ctx.source_q.contains(&src) {
                        q.set(key, ctx.source_q.get(&src));
                        copied += 1;
                    }
                }
            }
        }
    }
    Ok(TransferOutput { q, mappings, enumerated, copied })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::compile;
    use crate::env::{Heading, TaskSpec};
    use crate::formula::parse_formula;

    fn grid(w: i32, h: i32, task: TaskSpec) -> GridEnvConfig {
        GridEnvConfig {
            width: w,
            height: h,
            slip_straight: 0.04,
            stick_turn: 0.03,
            horizon: 40,
            task,
            heading_in_state: true,
            seed: 0,
        }
    }

    fn dtas(f: &Sdnf, h: u32) -> Vec<TickDta> {
        f.disjuncts().iter().map(|d| compile(d, h).unwrap()).collect()
    }

    #[test]
    fn pending_primitive_follows_the_phase() {
        let f = parse_formula("F[5,18] G[0,5] (x>=5 & x<=6 & y>=6 & y<=7) & F[24,39] (x>=5 & x<=7 & y>=1 & y<=2)")
            .unwrap();
        let d = &dtas(&f, 40)[0];
        assert_eq!(current_primitive_index(d, &d.initial_config()).unwrap(), 1);
        let second = (0..d.num_locations() as u16).find(|&l| d.phase_of_location(l) == Phase::Primitive(2)).unwrap();
        assert_eq!(current_primitive_index(d, &d.configs_at(second)[0]).unwrap(), 2);
        let acc = d.configs_at(d.accepting())[0].clone();
        assert_eq!(current_primitive_index(d, &acc), Err(TransferError::Terminal));
    }

    #[test]
    fn map_state_matches_enumerated_argmin() {
        let env = grid(9, 9, TaskSpec::case1_source());
        let rho_s = Region::rect(3, 4, 3, 5).unwrap();
        // offset (+2, +1) from an integer centroid (6, 6) aims at (5.5, 5)
        let rho_t = Region::rect(5, 7, 6, 6).unwrap();
        let t = EnvState::new(8, 7, Heading::S);
        let got = map_state(&t, &rho_t, &rho_s, &env).unwrap();
        let (px, py) = (3.5 + 2.0, 4.0 + 1.0);
        let mut best = (f64::MAX, 0, 0);
        for y in 0..9 {
            for x in 0..9 {
                let d = (x as f64 - px).powi(2) + (y as f64 - py).powi(2);
                if d < best.0 {
                    best = (d, x, y);
                }
            }
        }
        assert_eq!((got.x, got.y), (best.1, best.2));
        // (5, 5) and (6, 5) tie; the smaller x wins
        assert_eq!((got.x, got.y, got.heading), (5, 5, Heading::S));
        // pushed outside the grid: clamped by the argmin
        let far = map_state(&EnvState::new(0, 0, Heading::N), &Region::rect(8, 8, 8, 8).unwrap(), &rho_s, &env).unwrap();
        assert_eq!((far.x, far.y), (0, 0));
    }

    #[test]
    fn case2_target_disjuncts_share_the_single_source_disjunct() {
        assert_eq!(source_disjunct(0, 1), 0);
        assert_eq!(source_disjunct(1, 1), 0);
        assert_eq!(source_disjunct(3, 2), 1);
    }

    #[test]
    fn self_transfer_is_identity() {
        let f = parse_formula("F[1,5] G[0,2] (x>=1 & x<=2 & y>=1 & y<=2) & F[8,9] (x>=3 & x<=4 & y>=0 & y<=0)").unwrap();
        let env = grid(5, 5, TaskSpec::case2_source());
        let d = dtas(&f, 10);
        let mut q = QTable::new();
        let mut n = 0.0;
        for s in env.states().step_by(3) {
            for l in 0..d[0].num_locations() as u16 {
                for cfg in d[0].configs_at(l).into_iter().step_by(7) {
                    n += 1.0;
                    q.set(ExtendedState::new(s, 0, &cfg), [n, -n, 0.5 * n]);
                }
            }
        }
        let ctx = TransferContext {
            source_formula: &f,
            source_dtas: &d,
            source_q: &q,
            source_env: &env,
            target_formula: &f,
            target_dtas: &d,
            target_env: &env,
        };
        let out = transfer_q(&ctx).unwrap();
        assert_eq!(out.q, q);
        assert_eq!(out.copied, q.len());
    }

    #[test]
    fn rejects_unrelated_formulas() {
        let s = parse_formula("F[1,5] (x>=1)").unwrap();
        let t = parse_formula("G[1,5] (x>=1)").unwrap();
        let env = grid(3, 3, TaskSpec::case2_source());
        let (ds, dt) = (dtas(&s, 10), dtas(&t, 10));
        let q = QTable::new();
        let ctx = TransferContext {
            source_formula: &s,
            source_dtas: &ds,
            source_q: &q,
            source_env: &env,
            target_formula: &t,
            target_dtas: &dt,
            target_env: &env,
        };
        assert_eq!(transfer_q(&ctx).unwrap_err(), TransferError::NotTransferable);
    }
}
