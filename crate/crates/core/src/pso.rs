//! Particle swarm optimization over bounded integer vectors.

use rand::{Rng, SeedableRng};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rl::RunRng;

/// Attempts at drawing a feasible point before giving up.
const RESAMPLE_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PsoError {
    #[error("no feasible point found after {0} samples")]
    Infeasible(usize),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("dimension `{name}` has lower bound {lo} above upper bound {hi}")]
    EmptyDim { name: String, lo: i64, hi: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dim {
    pub name: String,
    pub lo: i64,
    pub hi: i64,
}

impl Dim {
    pub fn new(name: impl Into<String>, lo: i64, hi: i64) -> Self {
        Dim { name: name.into(), lo, hi }
    }
}

/// Box of integer dimensions plus a feasibility predicate.
pub struct SearchSpace<'a> {
    dims: Vec<Dim>,
    feasible: Box<dyn Fn(&[i64]) -> bool + 'a>,
}

impl<'a> SearchSpace<'a> {
    pub fn new(dims: Vec<Dim>) -> Result<Self, PsoError> {
        Self::with_feasibility(dims, |_| true)
    }

    pub fn with_feasibility(dims: Vec<Dim>, feasible: impl Fn(&[i64]) -> bool + 'a) -> Result<Self, PsoError> {
        if let Some(d) = dims.iter().find(|d| d.lo > d.hi) {
            return Err(PsoError::EmptyDim { name: d.name.clone(), lo: d.lo, hi: d.hi });
        }
        Ok(SearchSpace { dims, feasible: Box::new(feasible) })
    }

    pub fn dims(&self) -> &[Dim] {
        &self.dims
    }

    pub fn in_box(&self, v: &[i64]) -> bool {
        v.len() == self.dims.len() && v.iter().zip(&self.dims).all(|(x, d)| d.lo <= *x && *x <= d.hi)
    }

    pub fn is_feasible(&self, v: &[i64]) -> bool {
        self.in_box(v) && (self.feasible)(v)
    }

    fn sample(&self, rng: &mut RunRng) -> Vec<i64> {
        self.dims.iter().map(|d| rng.gen_range(d.lo..=d.hi)).collect()
    }

    fn sample_feasible(&self, rng: &mut RunRng) -> Option<Vec<i64>> {
        (0..RESAMPLE_ATTEMPTS).map(|_| self.sample(rng)).find(|v| (self.feasible)(v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoParams {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub seed: u64,
}

impl Default for PsoParams {
    fn default() -> Self {
        PsoParams { swarm_size: 32, iterations: 50, inertia: 0.7, cognitive: 1.5, social: 1.5, seed: 0 }
    }
}

impl PsoParams {
    pub fn validate(&self) -> Result<(), PsoError> {
        if self.swarm_size < 2 {
            return Err(PsoError::Params("swarm size must be at least 2".into()));
        }
        if self.iterations < 1 {
            return Err(PsoError::Params("at least one iteration is required".into()));
        }
        if !(self.inertia > 0.0 && self.inertia <= 1.0) {
            return Err(PsoError::Params("inertia must lie in (0, 1]".into()));
        }
        if !(self.cognitive > 0.0 && self.social > 0.0) {
            return Err(PsoError::Params("acceleration coefficients must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoResult {
    pub best: Vec<i64>,
    pub value: f64,
    /// Best value after initialization and after each iteration.
    pub history: Vec<f64>,
    /// Distinct points evaluated.
    pub evaluations: usize,
}

fn better(v: f64, x: &[i64], best_v: f64, best_x: &[i64]) -> bool {
    v > best_v || (v == best_v && x < best_x)
}

/// Maximizes `objective` over the feasible points of `space`.
///
/// `hints` seed the first particles when feasible. Each distinct point is
/// evaluated once.
pub fn optimize<F>(
    mut objective: F,
    space: &SearchSpace<'_>,
    params: &PsoParams,
    hints: &[Vec<i64>],
) -> Result<PsoResult, PsoError>
where
    F: FnMut(&[i64]) -> f64,
{
    params.validate()?;
    let mut rng = RunRng::seed_from_u64(params.seed);
    let n = space.dims.len();
    let vmax: Vec<f64> = space.dims.iter().map(|d| (d.hi - d.lo) as f64 / 2.0).collect();
    let mut memo: FxHashMap<Vec<i64>, f64> = FxHashMap::default();
    let mut eval = |x: &Vec<i64>| -> f64 {
        if let Some(&v) = memo.get(x) {
            return v;
        }
        let v = objective(x);
        memo.insert(x.clone(), v);
        v
    };

    let mut starts: Vec<Option<Vec<i64>>> = Vec::with_capacity(params.swarm_size);
    for k in 0..params.swarm_size {
        match hints.get(k) {
            Some(h) if space.is_feasible(h) => starts.push(Some(h.clone())),
            _ => starts.push(space.sample_feasible(&mut rng)),
        }
    }
    let Some(first) = starts.iter().flatten().next().cloned() else {
        return Err(PsoError::Infeasible(RESAMPLE_ATTEMPTS * params.swarm_size));
    };
    let pos: Vec<Vec<i64>> = starts.into_iter().map(|s| s.unwrap_or_else(|| first.clone())).collect();
    let mut x: Vec<Vec<f64>> = pos.iter().map(|p| p.iter().map(|&v| v as f64).collect()).collect();
    let mut vel: Vec<Vec<f64>> = (0..params.swarm_size)
        .map(|_| vmax.iter().map(|&m| if m > 0.0 { rng.gen_range(-m..=m) } else { 0.0 }).collect())
        .collect();
    let mut cur = pos;
    let mut pbest = cur.clone();
    let mut pval: Vec<f64> = cur.iter().map(&mut eval).collect();
    let mut g = 0;
    for k in 1..params.swarm_size {
        if better(pval[k], &pbest[k], pval[g], &pbest[g]) {
            g = k;
        }
    }
    let (mut gbest, mut gval) = (pbest[g].clone(), pval[g]);
    let mut history = vec![gval];

    for _ in 0..params.iterations {
        for k in 0..params.swarm_size {
            for i in 0..n {
                let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
                let v = params.inertia * vel[k][i]
                    + params.cognitive * r1 * (pbest[k][i] as f64 - x[k][i])
                    + params.social * r2 * (gbest[i] as f64 - x[k][i]);
                vel[k][i] = v.clamp(-vmax[i], vmax[i]);
                let d = &space.dims[i];
                x[k][i] = (x[k][i] + vel[k][i]).clamp(d.lo as f64, d.hi as f64);
            }
            let cand: Vec<i64> = x[k].iter().map(|v| v.round() as i64).collect();
            if (space.feasible)(&cand) {
                cur[k] = cand;
            } else if let Some(s) = space.sample_feasible(&mut rng) {
                x[k] = s.iter().map(|&v| v as f64).collect();
                cur[k] = s;
            } else {
                x[k] = cur[k].iter().map(|&v| v as f64).collect();
            }
            let v = eval(&cur[k]);
            if better(v, &cur[k], pval[k], &pbest[k]) {
                pbest[k] = cur[k].clone();
                pval[k] = v;
            }
            if better(v, &cur[k], gval, &gbest) {
                gbest = cur[k].clone();
                gval = v;
            }
        }
        history.push(gval);
    }
    Ok(PsoResult { best: gbest, value: gval, history, evaluations: memo.len() })
}
