//! MAP inference over the free target variables.
//!
//! The energy `sum_j w_j max(c_j + sum_k a_jk y_k, 0)^p` is convex on the unit
//! box. Each connected component is solved by cyclic coordinate descent with
//! exact one-dimensional minimization. For `p = 1` a component with a potential
//! over two or more free variables is nonsmooth in more than one direction, so
//! coordinate descent may stop at a kink; such components are additionally
//! solved as a linear program and then swept again.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rayon::prelude::*;

use crate::data::AtomDatabase;
use crate::data::AtomId;
use crate::grounding::{Exponent, Grounding, Sign};
use crate::learning::WeightedModel;
use crate::profile::{Hinge, PiecewiseProfile};
use crate::scalar::Real;

/// `weight * max(constant + sum coef * y[var], 0)^p`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearHinge<T> {
    pub weight: T,
    pub constant: T,
    pub coefs: Vec<(usize, T)>,
}

impl<T: Real> LinearHinge<T> {
    pub fn inner(&self, y: &[T]) -> T {
        self.coefs
            .iter()
            .fold(self.constant, |s, &(k, c)| s + c * y[k])
    }

    pub fn penalty(&self, y: &[T], exponent: Exponent) -> T {
        self.weight * exponent.apply(self.inner(y))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapConfig {
    pub exponent: Exponent,
    pub max_sweeps: usize,
    /// Sweeping stops once the objective decreases by less than this.
    pub tolerance: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            exponent: Exponent::Linear,
            max_sweeps: 500,
            tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapSolution<T> {
    /// One entry per target atom, in database order.
    pub values: Vec<(AtomId, T)>,
    /// Total weighted penalty, including potentials with no free variable.
    pub objective: T,
}

/// Total weighted penalty of `hinges` at `y`.
pub fn energy<T: Real>(hinges: &[LinearHinge<T>], y: &[T], exponent: Exponent) -> T {
    hinges
        .iter()
        .fold(T::zero(), |s, h| s + h.penalty(y, exponent))
}

/// Minimizes the energy over `y in [0, 1]^n_vars`. Returns the minimizer and
/// the objective.
pub fn minimize_hinges<T: Real>(
    n_vars: usize,
    hinges: &[LinearHinge<T>],
    config: &MapConfig,
) -> (Vec<T>, T) {
    let components = components(n_vars, hinges);
    let solved: Vec<Vec<(usize, T)>> = components
        .par_iter()
        .map(|comp| solve_component(comp, hinges, config))
        .collect();
    let mut y = vec![T::zero(); n_vars];
    for part in solved {
        for (k, v) in part {
            y[k] = v;
        }
    }
    let objective = energy(hinges, &y, config.exponent);
    (y, objective)
}

struct Component {
    vars: Vec<usize>,
    hinges: Vec<usize>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn components<T: Real>(n_vars: usize, hinges: &[LinearHinge<T>]) -> Vec<Component> {
    let mut parent: Vec<usize> = (0..n_vars).collect();
    for h in hinges {
        if let Some(&(first, _)) = h.coefs.first() {
            for &(k, _) in &h.coefs[1..] {
                let (a, b) = (find(&mut parent, first), find(&mut parent, k));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut slot = vec![usize::MAX; n_vars];
    let mut out: Vec<Component> = Vec::new();
    for v in 0..n_vars {
        let root = find(&mut parent, v);
        if slot[root] == usize::MAX {
            slot[root] = out.len();
            out.push(Component {
                vars: Vec::new(),
                hinges: Vec::new(),
            });
        }
        out[slot[root]].vars.push(v);
    }
    for (j, h) in hinges.iter().enumerate() {
        if let Some(&(k, _)) = h.coefs.first() {
            let root = find(&mut parent, k);
            out[slot[root]].hinges.push(j);
        }
    }
    out.retain(|c| !c.hinges.is_empty());
    out
}

fn solve_component<T: Real>(
    comp: &Component,
    all: &[LinearHinge<T>],
    config: &MapConfig,
) -> Vec<(usize, T)> {
    // local indexing
    let mut local = std::collections::HashMap::with_capacity(comp.vars.len());
    for (i, &v) in comp.vars.iter().enumerate() {
        local.insert(v, i);
    }
    let hinges: Vec<LinearHinge<T>> = comp
        .hinges
        .iter()
        .map(|&j| LinearHinge {
            weight: all[j].weight,
            constant: all[j].constant,
            coefs: merge_coefs(all[j].coefs.iter().map(|&(k, c)| (local[&k], c))),
        })
        .collect();
    let n = comp.vars.len();
    let mut incident = vec![Vec::new(); n];
    for (j, h) in hinges.iter().enumerate() {
        for &(k, _) in &h.coefs {
            if incident[k].last() != Some(&j) {
                incident[k].push(j);
            }
        }
    }
    let mut y = vec![T::zero(); n];
    let swept = coordinate_descent(&hinges, &incident, &mut y, config);
    let coupled = hinges.iter().any(|h| h.coefs.len() > 1);
    if coupled && config.exponent == Exponent::Linear {
        if let Some(mut z) = solve_lp(n, &hinges) {
            if coordinate_descent(&hinges, &incident, &mut z, config) < swept {
                y = z;
            }
        }
    }
    comp.vars.iter().copied().zip(y).collect()
}

/// Sorts by variable, sums repeated variables and drops zero coefficients.
fn merge_coefs<T: Real>(coefs: impl Iterator<Item = (usize, T)>) -> Vec<(usize, T)> {
    let mut sorted: Vec<(usize, T)> = coefs.collect();
    sorted.sort_by_key(|&(k, _)| k);
    let mut out: Vec<(usize, T)> = Vec::with_capacity(sorted.len());
    for (k, c) in sorted {
        match out.last_mut() {
            Some(last) if last.0 == k => last.1 = last.1 + c,
            _ => out.push((k, c)),
        }
    }
    out.retain(|&(_, c)| c != T::zero());
    out
}

fn coordinate_descent<T: Real>(
    hinges: &[LinearHinge<T>],
    incident: &[Vec<usize>],
    y: &mut [T],
    config: &MapConfig,
) -> T {
    let tol = T::lit(config.tolerance);
    let mut objective = energy(hinges, y, config.exponent);
    for _ in 0..config.max_sweeps {
        for k in 0..y.len() {
            let terms = incident[k].iter().map(|&j| {
                let h = &hinges[j];
                let mut a = h.constant;
                let mut b = T::zero();
                for &(m, c) in &h.coefs {
                    if m == k {
                        b = b + c;
                    } else {
                        a = a + c * y[m];
                    }
                }
                (h.weight, Hinge::new(a, b))
            });
            let profile = PiecewiseProfile::from_hinges(terms, config.exponent);
            let (arg, value) = profile.minimize();
            if value < profile.eval(y[k]) {
                y[k] = arg;
            }
        }
        let next = energy(hinges, y, config.exponent);
        let decrease = objective - next;
        objective = next;
        if decrease < tol {
            break;
        }
    }
    objective
}

/// `min sum w_j t_j` subject to `t_j >= c_j + a_j . y`, `t >= 0`, `y in [0,1]`.
fn solve_lp<T: Real>(n: usize, hinges: &[LinearHinge<T>]) -> Option<Vec<T>> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let ys: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    for h in hinges {
        let t = lp.add_var(h.weight.to_f64_lossy(), (0.0, f64::INFINITY));
        let mut expr: Vec<(microlp::Variable, f64)> = vec![(t, 1.0)];
        expr.extend(h.coefs.iter().map(|&(k, c)| (ys[k], -c.to_f64_lossy())));
        lp.add_constraint(expr, ComparisonOp::Ge, h.constant.to_f64_lossy());
    }
    let solution = lp.solve().ok()?.into_solution().ok()?;
    Some(
        ys.iter()
            .map(|&v| T::lit(solution.var_value(v).clamp(0.0, 1.0)))
            .collect(),
    )
}

/// MAP state of every target atom of `db` under `model`. Target atoms are the
/// free variables; every other atom is fixed at its stored value.
pub fn map_infer<T: Real>(
    model: &WeightedModel<T>,
    db: &AtomDatabase<T>,
    config: &MapConfig,
) -> MapSolution<T> {
    let grounding = Grounding::build(&model.clauses, db);
    let mut hinges = Vec::new();
    let mut fixed = T::zero();
    for gc in &grounding.ground {
        let weight = model.weights[gc.clause_index];
        let mut constant = T::one();
        let mut coefs: Vec<(usize, T)> = Vec::new();
        for term in &gc.terms {
            let (c0, c1) = match term.sign {
                Sign::Positive => (T::zero(), -T::one()),
                Sign::Negative => (-T::one(), T::one()),
            };
            constant = constant + c0;
            match db.target_index(term.atom) {
                Some(slot) => match coefs.iter_mut().find(|(k, _)| *k == slot) {
                    Some(entry) => entry.1 = entry.1 + c1,
                    None => coefs.push((slot, c1)),
                },
                None => constant = constant + c1 * db.value(term.atom),
            }
        }
        let hinge = LinearHinge {
            weight,
            constant,
            coefs,
        };
        if hinge.coefs.is_empty() {
            fixed = fixed + hinge.penalty(&[], config.exponent);
        } else {
            hinges.push(hinge);
        }
    }
    let (y, objective) = minimize_hinges(db.targets().len(), &hinges, config);
    MapSolution {
        values: db.targets().iter().copied().zip(y).collect(),
        objective: objective + fixed,
    }
}
