//! Pseudolikelihood objectives over a grounded model.
//!
//! [`Conditionals`] folds a grounding into, for every target variable, the
//! affine hinge coefficients `(a, b)` of each incident ground clause with all
//! other atoms held at their observed values. Both objectives and their
//! gradients are then sums of one-dimensional integrals.

use std::io::Write;

use rayon::prelude::*;

use crate::data::{AtomDatabase, AtomId};
use crate::grounding::{Exponent, Grounding, IncidenceIndex, Sign};
use crate::profile::{Hinge, PiecewiseProfile};
use crate::scalar::{format_sig, Real};

/// One incident ground clause of a variable, as a function of that variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClauseHinge<T> {
    pub clause: usize,
    pub hinge: Hinge<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable<T> {
    pub atom: AtomId,
    pub observed: T,
    /// Sorted by clause index.
    pub hinges: Vec<ClauseHinge<T>>,
}

/// The part of one variable's conditional that involves a single clause.
#[derive(Clone, Debug, PartialEq)]
struct Block<T> {
    var: usize,
    observed: T,
    hinges: Vec<Hinge<T>>,
}

/// Per-variable conditionals of a grounded model at the observed assignment.
#[derive(Clone, Debug)]
pub struct Conditionals<T> {
    exponent: Exponent,
    vars: Vec<Variable<T>>,
    blocks: Vec<Vec<Block<T>>>,
}

impl<T: Real> Conditionals<T> {
    /// Conditionals of every target atom of `db`, using the values stored in
    /// `db` as the observed assignment.
    pub fn new(grounding: &Grounding, db: &AtomDatabase<T>, exponent: Exponent) -> Self {
        let index = IncidenceIndex::build(grounding, db);
        let vars = db
            .targets()
            .iter()
            .enumerate()
            .map(|(slot, &atom)| {
                let mut hinges = Vec::new();
                let mut last = None;
                for &j in index.of_slot(slot) {
                    if last == Some(j) {
                        continue;
                    }
                    last = Some(j);
                    let gc = &grounding.ground[j];
                    let (mut a, mut b) = (T::one(), T::zero());
                    for term in &gc.terms {
                        let mine = term.atom == atom;
                        match (term.sign, mine) {
                            (Sign::Positive, true) => b = b - T::one(),
                            (Sign::Negative, true) => {
                                a = a - T::one();
                                b = b + T::one();
                            }
                            (Sign::Positive, false) => a = a - db.value(term.atom),
                            (Sign::Negative, false) => a = a - (T::one() - db.value(term.atom)),
                        }
                    }
                    hinges.push(ClauseHinge {
                        clause: gc.clause_index,
                        hinge: Hinge::new(a, b),
                    });
                }
                Variable {
                    atom,
                    observed: db.value(atom),
                    hinges,
                }
            })
            .collect();
        Self::from_variables(vars, grounding.clause_count(), exponent)
    }

    /// Builds conditionals from explicit per-variable hinges.
    pub fn from_variables(
        mut vars: Vec<Variable<T>>,
        clause_count: usize,
        exponent: Exponent,
    ) -> Self {
        let mut blocks: Vec<Vec<Block<T>>> = vec![Vec::new(); clause_count];
        for (v, var) in vars.iter_mut().enumerate() {
            var.hinges.sort_by_key(|h| h.clause);
            for h in &var.hinges {
                let list = &mut blocks[h.clause];
                match list.last_mut() {
                    Some(block) if block.var == v => block.hinges.push(h.hinge),
                    _ => list.push(Block {
                        var: v,
                        observed: var.observed,
                        hinges: vec![h.hinge],
                    }),
                }
            }
        }
        Self {
            exponent,
            vars,
            blocks,
        }
    }

    /// The same conditionals for the model made of `subset` (clause indices
    /// into this model, in the order given).
    pub fn restrict(&self, subset: &[usize]) -> Self {
        let mut position = vec![usize::MAX; self.blocks.len()];
        for (k, &c) in subset.iter().enumerate() {
            position[c] = k;
        }
        let vars = self
            .vars
            .iter()
            .map(|v| Variable {
                atom: v.atom,
                observed: v.observed,
                hinges: v
                    .hinges
                    .iter()
                    .filter(|h| position[h.clause] != usize::MAX)
                    .map(|h| ClauseHinge {
                        clause: position[h.clause],
                        hinge: h.hinge,
                    })
                    .collect(),
            })
            .collect();
        Self::from_variables(vars, subset.len(), self.exponent)
    }

    pub fn exponent(&self) -> Exponent {
        self.exponent
    }

    pub fn clause_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn variables(&self) -> &[Variable<T>] {
        &self.vars
    }

    /// Number of (variable, ground clause) incidences of `clause`.
    pub fn incidences(&self, clause: usize) -> usize {
        self.blocks[clause].iter().map(|b| b.hinges.len()).sum()
    }

    fn full_profile(&self, var: &Variable<T>, weights: &[T]) -> PiecewiseProfile<T> {
        PiecewiseProfile::from_hinges(
            var.hinges.iter().map(|h| (weights[h.clause], h.hinge)),
            self.exponent,
        )
    }

    fn energy(&self, hinges: impl Iterator<Item = (T, Hinge<T>)>, y: T) -> T {
        hinges
            .map(|(w, h)| w * h.penalty(y, self.exponent))
            .fold(T::zero(), |s, x| s + x)
    }

    /// `log Z_i` and `f_i(observed)` for every variable under the full model.
    pub fn variable_terms(&self, weights: &[T]) -> Vec<(T, T)> {
        self.vars
            .par_iter()
            .map(|var| {
                let profile = self.full_profile(var, weights);
                let energy = self.energy(
                    var.hinges.iter().map(|h| (weights[h.clause], h.hinge)),
                    var.observed,
                );
                (profile.log_partition(), energy)
            })
            .collect()
    }

    /// `sum_i [-log Z_i - f_i(y_i)]`.
    pub fn log_pll(&self, weights: &[T]) -> T {
        self.variable_terms(weights)
            .into_iter()
            .fold(T::zero(), |s, (lz, e)| s - lz - e)
    }

    /// Log pseudolikelihood and its gradient `sum (E[phi] - phi(observed))`
    /// with respect to each clause weight.
    pub fn pll_with_gradient(&self, weights: &[T]) -> (T, Vec<T>) {
        let parts: Vec<(T, Vec<(usize, T)>)> = self
            .vars
            .par_iter()
            .map(|var| {
                let profile = self.full_profile(var, weights);
                let log_z = profile.log_partition();
                let mut energy = T::zero();
                let grads = var
                    .hinges
                    .iter()
                    .map(|h| {
                        let observed = h.hinge.penalty(var.observed, self.exponent);
                        energy = energy + weights[h.clause] * observed;
                        let expected =
                            profile.expected_penalty_given(h.hinge, self.exponent, log_z);
                        (h.clause, expected - observed)
                    })
                    .collect();
                (-log_z - energy, grads)
            })
            .collect();
        let mut total = T::zero();
        let mut grad = vec![T::zero(); self.clause_count()];
        for (value, grads) in parts {
            total = total + value;
            for (c, g) in grads {
                grad[c] = grad[c] + g;
            }
        }
        (total, grad)
    }

    /// `l^c_pll(w)`: the log pseudolikelihood of the model containing only
    /// clause `c` with weight `w`, and its derivative in `w`.
    pub fn clause_pll_with_gradient(&self, clause: usize, w: T) -> (T, T) {
        let mut value = T::zero();
        let mut grad = T::zero();
        for block in &self.blocks[clause] {
            let (v, g) = self.block_terms(block, w, true);
            value = value + v;
            grad = grad + g;
        }
        (value, grad)
    }

    pub fn clause_pll(&self, clause: usize, w: T) -> T {
        self.blocks[clause]
            .iter()
            .fold(T::zero(), |s, b| s + self.block_terms(b, w, false).0)
    }

    fn block_terms(&self, block: &Block<T>, w: T, with_gradient: bool) -> (T, T) {
        let profile =
            PiecewiseProfile::from_hinges(block.hinges.iter().map(|&h| (w, h)), self.exponent);
        let log_z = profile.log_partition();
        let mut energy = T::zero();
        let mut grad = T::zero();
        for &h in &block.hinges {
            let observed = h.penalty(block.observed, self.exponent);
            energy = energy + observed;
            if with_gradient {
                grad = grad + profile.expected_penalty_given(h, self.exponent, log_z) - observed;
            }
        }
        (-log_z - w * energy, grad)
    }

    /// `sum_c l^c_pll(w_c)`, evaluated per clause in parallel.
    pub fn per_clause_ppll(&self, weights: &[T]) -> Vec<T> {
        (0..self.clause_count())
            .into_par_iter()
            .map(|c| self.clause_pll(c, weights[c]))
            .collect()
    }

    pub fn log_ppll(&self, weights: &[T]) -> T {
        self.per_clause_ppll(weights)
            .into_iter()
            .fold(T::zero(), |s, x| s + x)
    }

    /// Diagnostic breakdown of the log pseudolikelihood.
    pub fn pll_report(&self, weights: &[T]) -> ScoreReport<T> {
        let per_variable: Vec<VariableScore<T>> = self
            .vars
            .iter()
            .zip(self.variable_terms(weights))
            .map(|(v, (log_z, energy))| VariableScore {
                atom: v.atom,
                log_z,
                energy,
            })
            .collect();
        let total = per_variable
            .iter()
            .fold(T::zero(), |s, v| s - v.log_z - v.energy);
        ScoreReport {
            total,
            per_variable,
            per_clause: None,
        }
    }

    /// Diagnostic breakdown of the log piecewise pseudolikelihood. Variable
    /// entries sum the per-clause `log Z_i^c` and `f_i^c`.
    pub fn ppll_report(&self, weights: &[T]) -> ScoreReport<T> {
        let mut per_variable: Vec<VariableScore<T>> = self
            .vars
            .iter()
            .map(|v| VariableScore {
                atom: v.atom,
                log_z: T::zero(),
                energy: T::zero(),
            })
            .collect();
        let mut per_clause = Vec::with_capacity(self.clause_count());
        for (c, blocks) in self.blocks.iter().enumerate() {
            let mut clause_total = T::zero();
            for block in blocks {
                let profile = PiecewiseProfile::from_hinges(
                    block.hinges.iter().map(|&h| (weights[c], h)),
                    self.exponent,
                );
                let log_z = profile.log_partition();
                let energy = self.energy(
                    block.hinges.iter().map(|&h| (weights[c], h)),
                    block.observed,
                );
                let entry = &mut per_variable[block.var];
                entry.log_z = entry.log_z + log_z;
                entry.energy = entry.energy + energy;
                clause_total = clause_total - log_z - energy;
            }
            per_clause.push(clause_total);
        }
        let total = per_clause.iter().fold(T::zero(), |s, &x| s + x);
        ScoreReport {
            total,
            per_variable,
            per_clause: Some(per_clause),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VariableScore<T> {
    pub atom: AtomId,
    pub log_z: T,
    /// Energy at the observed value.
    pub energy: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreReport<T> {
    pub total: T,
    pub per_variable: Vec<VariableScore<T>>,
    /// Present for the piecewise objective only.
    pub per_clause: Option<Vec<T>>,
}

impl<T: Real> ScoreReport<T> {
    /// Writes `variable<TAB>atom<TAB>logZ<TAB>energy` rows, then
    /// `clause<TAB>index<TAB>score` rows, then `total<TAB><TAB>score`.
    pub fn write_tsv<W: Write>(&self, db: &AtomDatabase<T>, mut out: W) -> std::io::Result<()> {
        let f = |x: T| format_sig(x.to_f64_lossy(), 12);
        writeln!(out, "kind\tname\tlog_z\tenergy")?;
        for v in &self.per_variable {
            writeln!(
                out,
                "variable\t{}\t{}\t{}",
                db.display_atom(v.atom),
                f(v.log_z),
                f(v.energy)
            )?;
        }
        if let Some(clauses) = &self.per_clause {
            for (c, s) in clauses.iter().enumerate() {
                writeln!(out, "clause\t{c}\t{}\t", f(*s))?;
            }
        }
        writeln!(out, "total\t\t{}\t", f(self.total))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn var(observed: f64, hinges: &[(usize, f64, f64)]) -> Variable<f64> {
        Variable {
            atom: AtomId(0),
            observed,
            hinges: hinges
                .iter()
                .map(|&(clause, a, b)| ClauseHinge {
                    clause,
                    hinge: Hinge::new(a, b),
                })
                .collect(),
        }
    }

    #[test]
    fn empty_model_scores_zero() {
        let c = Conditionals::from_variables(vec![var(0.3, &[])], 0, Exponent::Linear);
        assert_eq!(c.log_pll(&[]), 0.0);
        assert_eq!(c.log_ppll(&[]), 0.0);
    }

    #[test]
    fn prior_only_score() {
        let c = Conditionals::from_variables(vec![var(0.0, &[(0, 0.0, 1.0)])], 1, Exponent::Linear);
        let expected = -((1.0 - (-2.0f64).exp()) / 2.0).ln();
        assert_abs_diff_eq!(c.log_pll(&[2.0]), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(c.log_pll(&[2.0]), 0.838_561, epsilon = 1e-6);
        assert_eq!(c.log_pll(&[0.0]), 0.0);
    }

    #[test]
    fn prior_gradient_at_zero() {
        let c = Conditionals::from_variables(vec![var(0.3, &[(0, 0.0, 1.0)])], 1, Exponent::Linear);
        let (_, g) = c.pll_with_gradient(&[0.0]);
        assert_abs_diff_eq!(g[0], 0.2, epsilon = 1e-14);
        let (_, g1) = c.clause_pll_with_gradient(0, 0.0);
        assert_abs_diff_eq!(g1, 0.2, epsilon = 1e-14);
    }

    #[test]
    fn single_clause_objectives_coincide() {
        let vars = vec![
            var(0.7, &[(0, 0.2, -1.0), (0, -0.4, 1.0)]),
            var(0.1, &[(0, 1.0, -1.0)]),
        ];
        let c = Conditionals::from_variables(vars, 1, Exponent::Linear);
        assert_eq!(c.log_pll(&[1.3]), c.log_ppll(&[1.3]));
    }

    #[test]
    fn ppll_is_sum_of_single_clause_models() {
        let vars = vec![
            var(0.7, &[(0, 0.2, -1.0), (1, 0.0, 1.0)]),
            var(0.1, &[(0, 1.0, -1.0), (1, 0.0, 1.0)]),
        ];
        let c = Conditionals::from_variables(vars, 2, Exponent::Linear);
        let w = [1.5, 0.7];
        let a = c.restrict(&[0]).log_pll(&w[..1]);
        let b = c.restrict(&[1]).log_pll(&w[1..]);
        assert_abs_diff_eq!(c.log_ppll(&w), a + b, epsilon = 1e-14);
        let report = c.ppll_report(&w);
        assert_abs_diff_eq!(report.total, a + b, epsilon = 1e-14);
        let pll = c.pll_report(&w);
        assert_abs_diff_eq!(pll.total, c.log_pll(&w), epsilon = 1e-14);
    }

    #[test]
    fn restrict_reorders_clauses() {
        let vars = vec![var(0.5, &[(0, 0.2, -1.0), (1, 0.0, 1.0), (2, 1.0, -1.0)])];
        let c = Conditionals::from_variables(vars, 3, Exponent::Linear);
        let r = c.restrict(&[2, 0]);
        assert_eq!(r.clause_count(), 2);
        assert_eq!(r.variables()[0].hinges[0].hinge, Hinge::new(1.0, -1.0));
        assert_eq!(r.variables()[0].hinges[1].hinge, Hinge::new(0.2, -1.0));
        assert_eq!(r.variables()[0].hinges[1].clause, 1);
        assert_abs_diff_eq!(
            r.log_pll(&[0.4, 0.9]),
            c.log_pll(&[0.9, 0.0, 0.4]),
            epsilon = 1e-14
        );
    }
}
