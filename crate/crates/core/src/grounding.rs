//! Lazy grounding of chain clauses into hinge potentials.
//!
//! A clause `b1 & ... & bs -> h` is the disjunction `!b1 | ... | !bs | h`, so
//! body atoms are negated terms and the head is a positive term (negative if
//! the head is negated). A ground clause is produced for every substitution
//! where all body atoms exist with rounded value 1 and the head is a target
//! atom; any other substitution has a falsified body and zero penalty under the
//! linear hinge.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::clause::PathClause;
use crate::data::{AtomDatabase, AtomId, ConstId};
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroundingError {
    #[error("no value assigned to atom {0:?}")]
    MissingAssignment(AtomId),
}

/// Hinge exponent `p`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Exponent {
    #[default]
    Linear,
    Squared,
}

impl Exponent {
    pub fn from_power(p: u32) -> Option<Self> {
        match p {
            1 => Some(Exponent::Linear),
            2 => Some(Exponent::Squared),
            _ => None,
        }
    }

    pub fn power(self) -> u32 {
        match self {
            Exponent::Linear => 1,
            Exponent::Squared => 2,
        }
    }

    /// `max(z, 0)^p`.
    #[inline]
    pub fn apply<T: Real>(self, z: T) -> T {
        let h = z.max(T::zero());
        match self {
            Exponent::Linear => h,
            Exponent::Squared => h * h,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    /// Non-negated literal (`I+`).
    Positive,
    /// Negated literal (`I-`).
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Term {
    pub atom: AtomId,
    pub sign: Sign,
}

/// Read access to atom values.
pub trait Assignment<T> {
    fn value_of(&self, atom: AtomId) -> Option<T>;
}

impl<T: Copy> Assignment<T> for [T] {
    fn value_of(&self, atom: AtomId) -> Option<T> {
        self.get(atom.index()).copied()
    }
}

impl<T: Copy> Assignment<T> for Vec<T> {
    fn value_of(&self, atom: AtomId) -> Option<T> {
        self.get(atom.index()).copied()
    }
}

impl<T: Copy> Assignment<T> for HashMap<AtomId, T> {
    fn value_of(&self, atom: AtomId) -> Option<T> {
        self.get(&atom).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundClause {
    pub clause_index: usize,
    pub terms: Vec<Term>,
}

impl GroundClause {
    /// Constant part of the inner expression: `1 - |I-|`.
    pub fn offset<T: Real>(&self) -> T {
        let negatives = self
            .terms
            .iter()
            .filter(|t| t.sign == Sign::Negative)
            .count();
        T::one() - T::from_usize(negatives).expect("small count")
    }

    /// `1 - sum_{I+} x - sum_{I-} (1 - x)`.
    pub fn inner<T: Real, A: Assignment<T> + ?Sized>(
        &self,
        assignment: &A,
    ) -> Result<T, GroundingError> {
        let mut z = T::one();
        for term in &self.terms {
            let x = assignment
                .value_of(term.atom)
                .ok_or(GroundingError::MissingAssignment(term.atom))?;
            match term.sign {
                Sign::Positive => z = z - x,
                Sign::Negative => z = z - (T::one() - x),
            }
        }
        Ok(z)
    }

    pub fn contains(&self, atom: AtomId) -> bool {
        self.terms.iter().any(|t| t.atom == atom)
    }
}

/// `max{1 - sum_{I+} x - sum_{I-}(1 - x), 0}^p`.
pub fn hinge_penalty<T: Real, A: Assignment<T> + ?Sized>(
    gc: &GroundClause,
    assignment: &A,
    exponent: Exponent,
) -> Result<T, GroundingError> {
    Ok(exponent.apply(gc.inner(assignment)?))
}

/// All ground instances of one clause over `db`.
pub fn ground_clause<T: Real>(
    clause: &PathClause,
    clause_index: usize,
    db: &AtomDatabase<T>,
) -> Vec<GroundClause> {
    let head_sign = if clause.head_negated() {
        Sign::Negative
    } else {
        Sign::Positive
    };
    let steps = clause.steps();
    let mut out = Vec::new();
    for &head in db.targets() {
        let atom = db.atom(head);
        if atom.predicate != clause.target() {
            continue;
        }
        if steps.is_empty() {
            out.push(GroundClause {
                clause_index,
                terms: vec![Term {
                    atom: head,
                    sign: head_sign,
                }],
            });
            continue;
        }
        if atom.arg1 == atom.arg2 {
            continue;
        }
        let mut visited = vec![atom.arg1];
        let mut body = Vec::with_capacity(steps.len());
        extend_chain(
            db,
            &steps,
            head,
            atom.arg2,
            &mut visited,
            &mut body,
            &mut |body: &[AtomId]| {
                let mut terms: Vec<Term> = body
                    .iter()
                    .map(|&a| Term {
                        atom: a,
                        sign: Sign::Negative,
                    })
                    .collect();
                terms.push(Term {
                    atom: head,
                    sign: head_sign,
                });
                out.push(GroundClause {
                    clause_index,
                    terms,
                });
            },
        );
    }
    out
}

fn extend_chain<T: Real>(
    db: &AtomDatabase<T>,
    steps: &[(crate::data::PredId, bool)],
    head: AtomId,
    sink: ConstId,
    visited: &mut Vec<ConstId>,
    body: &mut Vec<AtomId>,
    emit: &mut dyn FnMut(&[AtomId]),
) {
    let depth = body.len();
    let (predicate, inverted) = steps[depth];
    let here = *visited.last().expect("chain start");
    let edges = if inverted {
        db.incoming_with(here, predicate)
    } else {
        db.outgoing_with(here, predicate)
    };
    let last = depth + 1 == steps.len();
    for edge in edges {
        if edge.atom == head {
            continue;
        }
        let next = edge.neighbor;
        if last {
            if next == sink {
                body.push(edge.atom);
                emit(body);
                body.pop();
            }
        } else if next != sink && !visited.contains(&next) {
            visited.push(next);
            body.push(edge.atom);
            extend_chain(db, steps, head, sink, visited, body, emit);
            body.pop();
            visited.pop();
        }
    }
}

/// Ground clauses of a whole model, stored contiguously by clause.
#[derive(Clone, Debug, Default)]
pub struct Grounding {
    pub ground: Vec<GroundClause>,
    /// `ground[starts[c]..starts[c + 1]]` belong to clause `c`.
    starts: Vec<usize>,
}

impl Grounding {
    /// Grounds every clause (in parallel) and concatenates in clause order.
    pub fn build<T: Real>(clauses: &[PathClause], db: &AtomDatabase<T>) -> Self {
        let parts: Vec<Vec<GroundClause>> = clauses
            .par_iter()
            .enumerate()
            .map(|(i, c)| ground_clause(c, i, db))
            .collect();
        let mut starts = Vec::with_capacity(parts.len() + 1);
        let mut ground = Vec::with_capacity(parts.iter().map(Vec::len).sum());
        starts.push(0);
        for part in parts {
            ground.extend(part);
            starts.push(ground.len());
        }
        Self { ground, starts }
    }

    pub fn clause_count(&self) -> usize {
        self.starts.len().saturating_sub(1)
    }

    pub fn of_clause(&self, clause: usize) -> &[GroundClause] {
        &self.ground[self.starts[clause]..self.starts[clause + 1]]
    }

    pub fn len(&self) -> usize {
        self.ground.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ground.is_empty()
    }

    /// Debug dump: `clause_index<TAB>terms`, one ground clause per line, with
    /// terms written as `+Pred(a, b)` (I+) or `-Pred(a, b)` (I-) joined by `|`.
    pub fn write_tsv<T: Real, W: Write>(
        &self,
        db: &AtomDatabase<T>,
        mut out: W,
    ) -> std::io::Result<()> {
        for gc in &self.ground {
            let terms: Vec<String> = gc
                .terms
                .iter()
                .map(|t| {
                    let sign = if t.sign == Sign::Positive { '+' } else { '-' };
                    format!("{sign}{}", db.display_atom(t.atom))
                })
                .collect();
            writeln!(out, "{}\t{}", gc.clause_index, terms.join("|"))?;
        }
        Ok(())
    }
}

/// For each target atom, the ground clauses it appears in (with multiplicity).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IncidenceIndex {
    per_target: Vec<Vec<usize>>,
}

impl IncidenceIndex {
    pub fn build<T: Real>(grounding: &Grounding, db: &AtomDatabase<T>) -> Self {
        let mut per_target = vec![Vec::new(); db.targets().len()];
        for (j, gc) in grounding.ground.iter().enumerate() {
            for term in &gc.terms {
                if let Some(slot) = db.target_index(term.atom) {
                    per_target[slot].push(j);
                }
            }
        }
        Self { per_target }
    }

    /// Ground clause indices for the `slot`-th target atom.
    pub fn of_slot(&self, slot: usize) -> &[usize] {
        &self.per_target[slot]
    }

    pub fn of<T: Real>(&self, db: &AtomDatabase<T>, atom: AtomId) -> &[usize] {
        db.target_index(atom)
            .map_or(&[], |slot| self.per_target[slot].as_slice())
    }

    pub fn slots(&self) -> usize {
        self.per_target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_target.iter().all(Vec::is_empty)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Schema;

    fn example1() -> AtomDatabase<f64> {
        let mut s = Schema::new();
        s.add("Cites", false).unwrap();
        s.add("Mentions", true).unwrap();
        s.add("Unused", false).unwrap();
        AtomDatabase::parse_tsv(
            "Cites\tPaper1\tPaper2\nMentions\tPaper2\tGene\nMentions\tPaper1\tGene\n".as_bytes(),
            s,
        )
        .unwrap()
    }

    fn rule(db: &AtomDatabase<f64>) -> PathClause {
        PathClause::parse(
            "Cites(E1,E2) & Mentions(E2,E3) -> Mentions(E1,E3)",
            db.schema(),
        )
        .unwrap()
    }

    #[test]
    fn example_rule_grounds_once() {
        let db = example1();
        let g = ground_clause(&rule(&db), 0, &db);
        assert_eq!(g.len(), 1);
        let cites = db.find_by_name("Cites", "Paper1", "Paper2").unwrap();
        let m2 = db.find_by_name("Mentions", "Paper2", "Gene").unwrap();
        let m1 = db.find_by_name("Mentions", "Paper1", "Gene").unwrap();
        assert_eq!(
            g[0].terms,
            vec![
                Term {
                    atom: cites,
                    sign: Sign::Negative
                },
                Term {
                    atom: m2,
                    sign: Sign::Negative
                },
                Term {
                    atom: m1,
                    sign: Sign::Positive
                },
            ]
        );
    }

    #[test]
    fn prior_grounds_per_target() {
        let db = example1();
        let prior = PathClause::parse("-> !Mentions(A,B)", db.schema()).unwrap();
        let g = ground_clause(&prior, 3, &db);
        assert_eq!(g.len(), 2);
        assert!(g.iter().all(|gc| gc.terms.len() == 1
            && gc.terms[0].sign == Sign::Negative
            && gc.clause_index == 3));
    }

    #[test]
    fn absent_body_predicate_grounds_nothing() {
        let db = example1();
        let c = PathClause::parse("Unused(A,B) -> Mentions(A,B)", db.schema()).unwrap();
        assert!(ground_clause(&c, 0, &db).is_empty());
    }

    #[test]
    fn hinge_values() {
        let gc = GroundClause {
            clause_index: 0,
            terms: vec![
                Term {
                    atom: AtomId(0),
                    sign: Sign::Negative,
                },
                Term {
                    atom: AtomId(1),
                    sign: Sign::Negative,
                },
                Term {
                    atom: AtomId(2),
                    sign: Sign::Positive,
                },
            ],
        };
        let x = vec![1.0, 1.0, 0.3];
        let lin: f64 = hinge_penalty(&gc, &x, Exponent::Linear).unwrap();
        let sq: f64 = hinge_penalty(&gc, &x, Exponent::Squared).unwrap();
        assert!((lin - 0.7).abs() < 1e-15);
        assert!((sq - 0.49).abs() < 1e-15);
        for y in [0.0, 0.25, 0.5, 1.0] {
            let x = vec![0.0, 1.0, y];
            assert_eq!(hinge_penalty(&gc, &x, Exponent::Linear).unwrap(), 0.0);
        }
        assert_eq!(gc.offset::<f64>(), -1.0);
        let short = vec![1.0];
        assert_eq!(
            hinge_penalty(&gc, &short, Exponent::Linear),
            Err(GroundingError::MissingAssignment(AtomId(1)))
        );
        let mut map = HashMap::new();
        map.insert(AtomId(0), 1.0);
        map.insert(AtomId(1), 1.0);
        map.insert(AtomId(2), 0.3);
        assert!((hinge_penalty(&gc, &map, Exponent::Linear).unwrap() - 0.7_f64).abs() < 1e-15);
    }

    #[test]
    fn incidence_of_rule_and_prior() {
        let db = example1();
        let clauses = vec![
            rule(&db),
            PathClause::parse("-> !Mentions(A,B)", db.schema()).unwrap(),
        ];
        let g = Grounding::build(&clauses, &db);
        assert_eq!(g.len(), 3);
        assert_eq!(g.of_clause(0).len(), 1);
        assert_eq!(g.of_clause(1).len(), 2);
        let idx = IncidenceIndex::build(&g, &db);
        let m1 = db.find_by_name("Mentions", "Paper1", "Gene").unwrap();
        let m2 = db.find_by_name("Mentions", "Paper2", "Gene").unwrap();
        assert_eq!(idx.of(&db, m1).len(), 2);
        assert_eq!(idx.of(&db, m2).len(), 2);
        // brute-force cross-check
        for &t in db.targets() {
            let expected: Vec<usize> = g
                .ground
                .iter()
                .enumerate()
                .filter(|(_, gc)| gc.contains(t))
                .map(|(j, _)| j)
                .collect();
            assert_eq!(idx.of(&db, t), expected.as_slice());
        }
    }

    #[test]
    fn empty_grounding_has_empty_index() {
        let db = example1();
        let g = Grounding::build(&[], &db);
        let idx = IncidenceIndex::build(&g, &db);
        assert!(idx.is_empty());
        assert_eq!(g.clause_count(), 0);
    }

    #[test]
    fn debug_dump() {
        let db = example1();
        let g = Grounding::build(&[rule(&db)], &db);
        let mut buf = Vec::new();
        g.write_tsv(&db, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "0\t-Cites(Paper1, Paper2)|-Mentions(Paper2, Gene)|+Mentions(Paper1, Gene)\n"
        );
    }
}
