//! Weight learning and the two structure learners.
//!
//! [`learn_weights`] is projected gradient ascent on either objective.
//! [`ppll_structure_learn`] optimizes every candidate at once under the
//! piecewise objective and prunes the zero weights; [`gls_structure_learn`] is
//! greedy forward selection under the plain pseudolikelihood.

use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::clause::PathClause;
use crate::data::AtomDatabase;
use crate::grounding::{Exponent, Grounding};
use crate::scalar::Real;
use crate::scoring::Conditionals;

#[derive(Debug, Error, PartialEq)]
pub enum LearnError {
    #[error("no candidate clauses")]
    NoCandidates,
    #[error("objective is not finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },
    #[error("invalid learning config: {0}")]
    InvalidConfig(&'static str),
    #[error("model has {clauses} clauses but {weights} weights")]
    ShapeMismatch { clauses: usize, weights: usize },
}

/// Clauses paired with nonnegative weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedModel<T> {
    pub clauses: Vec<PathClause>,
    pub weights: Vec<T>,
}

impl<T: Real> WeightedModel<T> {
    pub fn new(clauses: Vec<PathClause>, weights: Vec<T>) -> Result<Self, LearnError> {
        if clauses.len() != weights.len() {
            return Err(LearnError::ShapeMismatch {
                clauses: clauses.len(),
                weights: weights.len(),
            });
        }
        Ok(Self { clauses, weights })
    }

    pub fn empty() -> Self {
        Self {
            clauses: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// Every clause at the same weight.
    pub fn uniform(clauses: Vec<PathClause>, weight: T) -> Self {
        let weights = vec![weight; clauses.len()];
        Self { clauses, weights }
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PathClause, T)> {
        self.clauses.iter().zip(self.weights.iter().copied())
    }

    pub fn weight_of(&self, clause_id: &str) -> Option<T> {
        self.iter()
            .find(|(c, _)| c.id() == clause_id)
            .map(|(_, w)| w)
    }

    /// Drops clauses whose weight is at most `zero_tol`.
    pub fn pruned(self, zero_tol: T) -> Self {
        let (clauses, weights) = self
            .clauses
            .into_iter()
            .zip(self.weights)
            .filter(|(_, w)| *w > zero_tol)
            .unzip();
        Self { clauses, weights }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// Log pseudolikelihood.
    Pll,
    /// Log piecewise pseudolikelihood.
    Ppll,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnConfig {
    pub step_size: f64,
    /// Relative improvement below which optimization stops.
    pub tolerance: f64,
    pub max_iters: usize,
    pub w_max: f64,
    /// Standard deviation of the Gaussian weight prior; 0 disables it.
    pub l2_sigma: f64,
    pub exponent: Exponent,
    pub init_weight: f64,
    pub zero_tol: f64,
    /// Clause additions for greedy search.
    pub gls_outer_iters: usize,
    /// Gradient steps per tentative model in greedy search.
    pub gls_inner_iters: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            tolerance: 1e-4,
            max_iters: 150,
            w_max: 100.0,
            l2_sigma: 10.0,
            exponent: Exponent::Linear,
            init_weight: 0.0,
            zero_tol: 1e-6,
            gls_outer_iters: 15,
            gls_inner_iters: 50,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let finite = |x: f64| x.is_finite();
        if !(finite(self.step_size) && self.step_size > 0.0) {
            return Err(LearnError::InvalidConfig("step_size must be positive"));
        }
        if !(finite(self.tolerance) && self.tolerance > 0.0) {
            return Err(LearnError::InvalidConfig("tolerance must be positive"));
        }
        if !(finite(self.w_max) && self.w_max > 0.0) {
            return Err(LearnError::InvalidConfig("w_max must be positive"));
        }
        if !(finite(self.l2_sigma) && self.l2_sigma >= 0.0) {
            return Err(LearnError::InvalidConfig("l2_sigma must be nonnegative"));
        }
        if !(finite(self.init_weight) && self.init_weight >= 0.0 && self.init_weight <= self.w_max)
        {
            return Err(LearnError::InvalidConfig(
                "init_weight must lie in [0, w_max]",
            ));
        }
        if !(finite(self.zero_tol) && self.zero_tol >= 0.0) {
            return Err(LearnError::InvalidConfig("zero_tol must be nonnegative"));
        }
        Ok(())
    }

    fn prior<T: Real>(&self, w: T) -> (T, T) {
        if self.l2_sigma == 0.0 {
            return (T::zero(), T::zero());
        }
        let var = T::lit(self.l2_sigma * self.l2_sigma);
        (-(w * w) / (var + var), -w / var)
    }
}

/// One row of the optimization trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub objective: f64,
    pub max_gradient: f64,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimized<T> {
    pub weights: Vec<T>,
    /// Regularized objective at `weights`.
    pub objective: T,
    pub trace: Vec<TracePoint>,
}

/// Regularized objective value.
pub fn objective_value<T: Real>(
    cond: &Conditionals<T>,
    weights: &[T],
    objective: Objective,
    config: &LearnConfig,
) -> T {
    let raw = match objective {
        Objective::Pll => cond.log_pll(weights),
        Objective::Ppll => cond.log_ppll(weights),
    };
    weights.iter().fold(raw, |s, &w| s + config.prior(w).0)
}

/// Ascent gradient of the regularized objective:
/// `sum (E[phi] - phi(observed)) - w / sigma^2` per clause.
pub fn objective_gradient<T: Real>(
    cond: &Conditionals<T>,
    weights: &[T],
    objective: Objective,
    config: &LearnConfig,
) -> Vec<T> {
    let raw = match objective {
        Objective::Pll => cond.pll_with_gradient(weights).1,
        Objective::Ppll => (0..cond.clause_count())
            .into_par_iter()
            .map(|c| cond.clause_pll_with_gradient(c, weights[c]).1)
            .collect(),
    };
    raw.into_iter()
        .zip(weights)
        .map(|(g, &w)| g + config.prior(w).1)
        .collect()
}

fn clip<T: Real>(w: T, w_max: T) -> T {
    w.max(T::zero()).min(w_max)
}

fn converged<T: Real>(improvement: T, objective: T, tolerance: f64) -> bool {
    improvement < T::lit(tolerance) * objective.abs().max(T::one())
}

const MIN_SCALE: f64 = 1e-12;

/// Projected gradient ascent from `init` for at most `max_iters` accepted
/// steps. Steps that would lower the objective are halved until they do not.
pub fn learn_weights<T: Real>(
    cond: &Conditionals<T>,
    init: &[T],
    objective: Objective,
    config: &LearnConfig,
    max_iters: usize,
) -> Result<Optimized<T>, LearnError> {
    config.validate()?;
    if init.len() != cond.clause_count() {
        return Err(LearnError::ShapeMismatch {
            clauses: cond.clause_count(),
            weights: init.len(),
        });
    }
    let w_max = T::lit(config.w_max);
    let init: Vec<T> = init.iter().map(|&w| clip(w, w_max)).collect();
    match objective {
        Objective::Pll => ascend_joint(cond, init, config, max_iters),
        Objective::Ppll => ascend_separable(cond, init, config, max_iters),
    }
}

fn step_sizes<T: Real>(cond: &Conditionals<T>, config: &LearnConfig) -> Vec<T> {
    (0..cond.clause_count())
        .map(|c| T::lit(config.step_size / cond.incidences(c).max(1) as f64))
        .collect()
}

fn max_abs<T: Real>(xs: &[T]) -> f64 {
    xs.iter()
        .map(|x| x.abs().to_f64_lossy())
        .fold(0.0, f64::max)
}

fn ascend_joint<T: Real>(
    cond: &Conditionals<T>,
    mut w: Vec<T>,
    config: &LearnConfig,
    max_iters: usize,
) -> Result<Optimized<T>, LearnError> {
    let start = Instant::now();
    let w_max = T::lit(config.w_max);
    let alpha = step_sizes(cond, config);
    let evaluate = |w: &[T]| {
        let (raw, mut grad) = cond.pll_with_gradient(w);
        let mut value = raw;
        for (g, &wc) in grad.iter_mut().zip(w) {
            let (p, dp) = config.prior(wc);
            value = value + p;
            *g = *g + dp;
        }
        (value, grad)
    };
    let (mut obj, mut grad) = evaluate(&w);
    if !obj.is_finite() {
        return Err(LearnError::NonFiniteObjective { iteration: 0 });
    }
    let mut trace = vec![TracePoint {
        iteration: 0,
        objective: obj.to_f64_lossy(),
        max_gradient: max_abs(&grad),
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    }];
    let mut scale = T::one();
    for iteration in 1..=max_iters {
        let accepted = loop {
            let next: Vec<T> = w
                .iter()
                .zip(&grad)
                .zip(&alpha)
                .map(|((&wc, &g), &a)| clip(wc + scale * a * g, w_max))
                .collect();
            if next == w {
                break None;
            }
            let (o, g) = evaluate(&next);
            if !o.is_finite() {
                return Err(LearnError::NonFiniteObjective { iteration });
            }
            if o >= obj {
                break Some((next, o, g));
            }
            scale = scale / T::lit(2.0);
            if scale < T::lit(MIN_SCALE) {
                break None;
            }
        };
        let Some((next, o, g)) = accepted else { break };
        let improvement = o - obj;
        w = next;
        obj = o;
        grad = g;
        scale = (scale + scale).min(T::one());
        trace.push(TracePoint {
            iteration,
            objective: obj.to_f64_lossy(),
            max_gradient: max_abs(&grad),
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if converged(improvement, obj, config.tolerance) {
            break;
        }
    }
    Ok(Optimized {
        weights: w,
        objective: obj,
        trace,
    })
}

/// State of one clause's independent 1-D ascent.
#[derive(Clone, Copy, Debug)]
struct ClauseState<T> {
    w: T,
    obj: T,
    grad: T,
    scale: T,
    active: bool,
}

fn ascend_separable<T: Real>(
    cond: &Conditionals<T>,
    init: Vec<T>,
    config: &LearnConfig,
    max_iters: usize,
) -> Result<Optimized<T>, LearnError> {
    let start = Instant::now();
    let w_max = T::lit(config.w_max);
    let alpha = step_sizes(cond, config);
    let evaluate = |c: usize, w: T| {
        let (raw, grad) = cond.clause_pll_with_gradient(c, w);
        let (p, dp) = config.prior(w);
        (raw + p, grad + dp)
    };
    let mut states: Vec<ClauseState<T>> = init
        .par_iter()
        .enumerate()
        .map(|(c, &w)| {
            let (obj, grad) = evaluate(c, w);
            ClauseState {
                w,
                obj,
                grad,
                scale: T::one(),
                active: true,
            }
        })
        .collect();
    let total = |states: &[ClauseState<T>]| states.iter().fold(T::zero(), |s, st| s + st.obj);
    let grads = |states: &[ClauseState<T>]| states.iter().map(|s| s.grad).collect::<Vec<_>>();
    if !total(&states).is_finite() {
        return Err(LearnError::NonFiniteObjective { iteration: 0 });
    }
    let mut trace = vec![TracePoint {
        iteration: 0,
        objective: total(&states).to_f64_lossy(),
        max_gradient: max_abs(&grads(&states)),
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    }];
    for iteration in 1..=max_iters {
        if !states.iter().any(|s| s.active) {
            break;
        }
        let stepped: Vec<Result<ClauseState<T>, LearnError>> = states
            .par_iter()
            .enumerate()
            .map(|(c, &st)| {
                if !st.active {
                    return Ok(st);
                }
                let mut st = st;
                loop {
                    let next = clip(st.w + st.scale * alpha[c] * st.grad, w_max);
                    if next == st.w {
                        st.active = false;
                        return Ok(st);
                    }
                    let (o, g) = evaluate(c, next);
                    if !o.is_finite() {
                        return Err(LearnError::NonFiniteObjective { iteration });
                    }
                    if o >= st.obj {
                        let improvement = o - st.obj;
                        st.w = next;
                        st.obj = o;
                        st.grad = g;
                        st.scale = (st.scale + st.scale).min(T::one());
                        st.active = !converged(improvement, o, config.tolerance);
                        return Ok(st);
                    }
                    st.scale = st.scale / T::lit(2.0);
                    if st.scale < T::lit(MIN_SCALE) {
                        st.active = false;
                        return Ok(st);
                    }
                }
            })
            .collect();
        states = stepped.into_iter().collect::<Result<_, _>>()?;
        trace.push(TracePoint {
            iteration,
            objective: total(&states).to_f64_lossy(),
            max_gradient: max_abs(&grads(&states)),
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(Optimized {
        weights: states.iter().map(|s| s.w).collect(),
        objective: total(&states),
        trace,
    })
}

/// Result of a structure learner.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnOutcome<T> {
    pub model: WeightedModel<T>,
    /// Final objective of the learner (regularized PPLL, or raw log_pll for
    /// greedy search).
    pub objective: T,
    pub trace: Vec<TracePoint>,
}

/// Grounds `model`'s clauses over `db` and returns its conditionals.
pub fn conditionals<T: Real>(
    clauses: &[PathClause],
    db: &AtomDatabase<T>,
    exponent: Exponent,
) -> Conditionals<T> {
    Conditionals::new(&Grounding::build(clauses, db), db, exponent)
}

/// Optimizes every candidate jointly under the piecewise objective, then
/// keeps the clauses whose weight exceeds `zero_tol`.
pub fn ppll_structure_learn<T: Real>(
    candidates: &[PathClause],
    db: &AtomDatabase<T>,
    config: &LearnConfig,
) -> Result<LearnOutcome<T>, LearnError> {
    if candidates.is_empty() {
        return Err(LearnError::NoCandidates);
    }
    config.validate()?;
    let cond = conditionals(candidates, db, config.exponent);
    let init = vec![T::lit(config.init_weight); candidates.len()];
    let opt = learn_weights(&cond, &init, Objective::Ppll, config, config.max_iters)?;
    let model = WeightedModel {
        clauses: candidates.to_vec(),
        weights: opt.weights,
    }
    .pruned(T::lit(config.zero_tol));
    Ok(LearnOutcome {
        model,
        objective: opt.objective,
        trace: opt.trace,
    })
}

/// Score, weights and max gradient of one tentative model.
type Trial<T> = (T, Vec<T>, f64);

/// Greedy forward selection. Each round tries every remaining candidate on
/// top of the current model, learns weights (warm-started) and keeps the one
/// with the best log pseudolikelihood, stopping when the best relative gain is
/// below `tolerance` or after `gls_outer_iters` rounds.
pub fn gls_structure_learn<T: Real>(
    candidates: &[PathClause],
    db: &AtomDatabase<T>,
    config: &LearnConfig,
) -> Result<LearnOutcome<T>, LearnError> {
    if candidates.is_empty() {
        return Err(LearnError::NoCandidates);
    }
    config.validate()?;
    let start = Instant::now();
    let all = conditionals(candidates, db, config.exponent);
    let mut selected: Vec<usize> = Vec::new();
    let mut weights: Vec<T> = Vec::new();
    let mut current = T::zero();
    let mut trace = vec![TracePoint {
        iteration: 0,
        objective: 0.0,
        max_gradient: 0.0,
        elapsed_ms: 0.0,
    }];
    for round in 1..=config.gls_outer_iters {
        let remaining: Vec<usize> = (0..candidates.len())
            .filter(|c| !selected.contains(c))
            .collect();
        if remaining.is_empty() {
            break;
        }
        let tried: Vec<Result<Trial<T>, LearnError>> = remaining
            .par_iter()
            .map(|&c| {
                let mut subset = selected.clone();
                subset.push(c);
                let cond = all.restrict(&subset);
                let mut init = weights.clone();
                init.push(T::lit(config.init_weight));
                let opt =
                    learn_weights(&cond, &init, Objective::Pll, config, config.gls_inner_iters)?;
                let grad = objective_gradient(&cond, &opt.weights, Objective::Pll, config);
                Ok((cond.log_pll(&opt.weights), opt.weights, max_abs(&grad)))
            })
            .collect();
        let mut best: Option<(usize, T, Vec<T>, f64)> = None;
        for (&c, result) in remaining.iter().zip(tried) {
            let (score, w, g) = result?;
            if !score.is_finite() {
                return Err(LearnError::NonFiniteObjective { iteration: round });
            }
            if best.as_ref().is_none_or(|b| score > b.1) {
                best = Some((c, score, w, g));
            }
        }
        let Some((c, score, w, g)) = best else { break };
        if converged(score - current, current, config.tolerance) {
            break;
        }
        selected.push(c);
        weights = w;
        current = score;
        trace.push(TracePoint {
            iteration: round,
            objective: current.to_f64_lossy(),
            max_gradient: g,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    let model = WeightedModel {
        clauses: selected.iter().map(|&c| candidates[c].clone()).collect(),
        weights,
    };
    Ok(LearnOutcome {
        model,
        objective: current,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::AtomId;
    use crate::profile::Hinge;
    use crate::scoring::{ClauseHinge, Variable};
    use approx::assert_abs_diff_eq;

    fn prior_only(observed: f64) -> Conditionals<f64> {
        Conditionals::from_variables(
            vec![Variable {
                atom: AtomId(0),
                observed,
                hinges: vec![ClauseHinge {
                    clause: 0,
                    hinge: Hinge::new(0.0, 1.0),
                }],
            }],
            1,
            Exponent::Linear,
        )
    }

    #[test]
    fn uniform_match_stays_at_zero() {
        let cond = prior_only(0.5);
        let cfg = LearnConfig::default();
        let out = learn_weights(&cond, &[0.0], Objective::Ppll, &cfg, 150).unwrap();
        assert_eq!(out.weights, vec![0.0]);
    }

    #[test]
    fn separable_data_hits_cap() {
        let cond = prior_only(0.0);
        let cfg = LearnConfig {
            l2_sigma: 0.0,
            tolerance: 1e-12,
            ..LearnConfig::default()
        };
        for objective in [Objective::Pll, Objective::Ppll] {
            let out = learn_weights(&cond, &[0.0], objective, &cfg, 10_000).unwrap();
            assert_abs_diff_eq!(out.weights[0], 100.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn trace_is_monotone() {
        let cond = prior_only(0.2);
        let cfg = LearnConfig {
            step_size: 50.0,
            ..LearnConfig::default()
        };
        let out = learn_weights(&cond, &[0.0], Objective::Pll, &cfg, 100).unwrap();
        for w in out.trace.windows(2) {
            assert!(w[1].objective >= w[0].objective);
        }
        // optimum: E_w[y] = 0.2 (weak prior shifts it slightly)
        assert!(
            out.weights[0] > 3.0 && out.weights[0] < 6.0,
            "{:?}",
            out.weights
        );
    }

    #[test]
    fn pruning_uses_tolerance() {
        let s = {
            let mut s = crate::data::Schema::new();
            s.add("t", true).unwrap();
            s
        };
        let t = s.id("t").unwrap();
        let prior = PathClause::negative_prior(t, &s);
        let m = WeightedModel::new(vec![prior.clone(), prior], vec![1e-7, 0.5]).unwrap();
        assert_eq!(m.pruned(1e-6).weights, vec![0.5]);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = LearnConfig {
            step_size: 0.0,
            ..LearnConfig::default()
        };
        assert!(matches!(
            learn_weights(&prior_only(0.1), &[0.0], Objective::Pll, &cfg, 1),
            Err(LearnError::InvalidConfig(_))
        ));
    }
}
