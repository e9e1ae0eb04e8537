//! Path-constrained clause generation.
//!
//! For every training target atom `t(a, b)` a breadth-first search from `a`
//! enumerates the simple relational paths that end at `b`. Each path is
//! variablized into a chain clause; the clause and its head-negated twin become
//! candidates. Candidates are ranked by coverage (how many distinct target atoms
//! they connect), filtered, truncated and optionally followed by one negative
//! prior per target predicate.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::clause::PathClause;
use crate::data::{AtomDatabase, AtomId, ConstId, PredId, Role};
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenerationError {
    #[error("no candidate clauses survived filtering")]
    NoCandidates,
    #[error("invalid generation config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationConfig {
    /// Longest clause body (`s`).
    pub max_depth: usize,
    /// Minimum number of target atoms a clause must connect (`t`).
    pub min_coverage: usize,
    pub top_k: usize,
    /// Rounding threshold for soft atom values.
    pub threshold: f64,
    /// Also walk edges backwards (inverse predicates).
    pub include_inverses: bool,
    pub add_negative_priors: bool,
    /// Allow training target atoms as path steps. Disable for strict
    /// evaluation where labels must not appear in clause bodies.
    pub traverse_targets: bool,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            max_depth: 4,
            min_coverage: 10,
            top_k: 50,
            threshold: crate::data::DEFAULT_THRESHOLD,
            include_inverses: true,
            add_negative_priors: true,
            traverse_targets: true,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.max_depth < 1 {
            return Err(GenerationError::InvalidConfig("max_depth must be >= 1"));
        }
        if self.min_coverage < 1 {
            return Err(GenerationError::InvalidConfig("min_coverage must be >= 1"));
        }
        if self.top_k < 1 {
            return Err(GenerationError::InvalidConfig("top_k must be >= 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(GenerationError::InvalidConfig(
                "threshold must be in (0, 1)",
            ));
        }
        Ok(())
    }
}

/// One ground step of a relational path, in traversal direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PathStep {
    pub predicate: PredId,
    pub inverted: bool,
    pub from: ConstId,
    pub to: ConstId,
    pub atom: AtomId,
}

pub type RelationalPath = Vec<PathStep>;

/// Enumerates every simple path of length `1..=max_depth` from the target's
/// first argument to its second over rounded-1 atoms. The target atom itself
/// is never a step.
pub fn bfs_paths<T: Real>(
    db: &AtomDatabase<T>,
    target: AtomId,
    config: &GenerationConfig,
) -> Vec<RelationalPath> {
    let atom = db.atom(target);
    let (source, sink) = (atom.arg1, atom.arg2);
    let mut found = Vec::new();
    if source == sink {
        return found;
    }
    let mut frontier: Vec<(RelationalPath, Vec<ConstId>)> = vec![(Vec::new(), vec![source])];
    for depth in 1..=config.max_depth {
        let mut next = Vec::new();
        for (path, visited) in &frontier {
            let here = *visited.last().expect("non-empty visit list");
            let forward = db.outgoing(here).iter().map(|e| (e, false));
            let backward = db
                .incoming(here)
                .iter()
                .filter(|_| config.include_inverses)
                .map(|e| (e, true));
            for (edge, inverted) in forward.chain(backward) {
                if edge.atom == target
                    || visited.contains(&edge.neighbor)
                    || (!config.traverse_targets && db.role(edge.atom) == Role::Target)
                {
                    continue;
                }
                let mut extended = path.clone();
                extended.push(PathStep {
                    predicate: edge.predicate,
                    inverted,
                    from: here,
                    to: edge.neighbor,
                    atom: edge.atom,
                });
                if edge.neighbor == sink {
                    found.push(extended);
                } else if depth < config.max_depth {
                    let mut seen = visited.clone();
                    seen.push(edge.neighbor);
                    next.push((extended, seen));
                }
            }
        }
        frontier = next;
    }
    found
}

/// Turns a ground path into its first-order chain clause. Constants map to
/// `E1..E{s+1}` by position; inverted steps keep the original predicate with
/// swapped variables.
pub fn variablize<T: Real>(
    db: &AtomDatabase<T>,
    path: &[PathStep],
    target: AtomId,
    negate_head: bool,
) -> PathClause {
    let steps: Vec<(PredId, bool)> = path.iter().map(|s| (s.predicate, s.inverted)).collect();
    PathClause::from_steps(&steps, db.atom(target).predicate, negate_head, db.schema())
}

type PathKey = (PredId, Vec<(PredId, bool)>);

/// Generates the ranked candidate clause list.
pub fn generate_candidates<T: Real>(
    db: &AtomDatabase<T>,
    config: &GenerationConfig,
) -> Result<Vec<PathClause>, GenerationError> {
    config.validate()?;
    let db: Cow<'_, AtomDatabase<T>> = if db.threshold() == T::lit(config.threshold) {
        Cow::Borrowed(db)
    } else {
        let mut owned = db.clone();
        owned.build_adjacency(T::lit(config.threshold));
        Cow::Owned(owned)
    };
    let db = db.as_ref();

    let per_target: Vec<BTreeSet<PathKey>> = db
        .targets()
        .par_iter()
        .map(|&t| {
            let target_pred = db.atom(t).predicate;
            bfs_paths(db, t, config)
                .into_iter()
                .map(|p| {
                    let steps = p.iter().map(|s| (s.predicate, s.inverted)).collect();
                    (target_pred, steps)
                })
                .collect()
        })
        .collect();

    let mut coverage: BTreeMap<PathKey, usize> = BTreeMap::new();
    for keys in per_target {
        for key in keys {
            *coverage.entry(key).or_insert(0) += 1;
        }
    }

    let schema = db.schema();
    let mut unique: BTreeMap<String, PathClause> = BTreeMap::new();
    for ((target, steps), count) in coverage {
        for negated in [false, true] {
            let clause =
                PathClause::from_steps(&steps, target, negated, schema).with_coverage(count);
            unique.entry(clause.id().to_string()).or_insert(clause);
        }
    }

    let mut ranked: Vec<PathClause> = unique
        .into_values()
        .filter(|c| c.coverage >= config.min_coverage)
        .collect();
    ranked.sort_by(|a, b| b.coverage.cmp(&a.coverage).then_with(|| a.id().cmp(b.id())));
    ranked.truncate(config.top_k);

    if config.add_negative_priors {
        for target in schema.targets() {
            let count = db
                .targets()
                .iter()
                .filter(|&&t| db.atom(t).predicate == target)
                .count();
            ranked.push(PathClause::negative_prior(target, schema).with_coverage(count));
        }
    }
    if ranked.is_empty() {
        return Err(GenerationError::NoCandidates);
    }
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Schema;

    fn example1() -> AtomDatabase<f64> {
        let mut s = Schema::new();
        s.add("Cites", false).unwrap();
        s.add("Mentions", true).unwrap();
        AtomDatabase::parse_tsv(
            "Cites\tPaper1\tPaper2\nMentions\tPaper2\tGene\nMentions\tPaper1\tGene\n".as_bytes(),
            s,
        )
        .unwrap()
    }

    fn forward(depth: usize) -> GenerationConfig {
        GenerationConfig {
            max_depth: depth,
            min_coverage: 1,
            include_inverses: false,
            ..GenerationConfig::default()
        }
    }

    fn chain(n: usize, depth_target: (usize, usize)) -> AtomDatabase<f64> {
        let mut s = Schema::new();
        s.add("p", false).unwrap();
        s.add("t", true).unwrap();
        let mut text = String::new();
        for i in 0..n - 1 {
            text.push_str(&format!("p\tc{}\tc{}\n", i, i + 1));
        }
        text.push_str(&format!("t\tc{}\tc{}\n", depth_target.0, depth_target.1));
        AtomDatabase::parse_tsv(text.as_bytes(), s).unwrap()
    }

    #[test]
    fn example_one_tree() {
        let db = example1();
        let target = db.find_by_name("Mentions", "Paper1", "Gene").unwrap();
        let paths = bfs_paths(&db, target, &forward(2));
        assert_eq!(paths.len(), 1);
        let names: Vec<String> = paths[0].iter().map(|s| db.display_atom(s.atom)).collect();
        assert_eq!(
            names,
            vec!["Cites(Paper1, Paper2)", "Mentions(Paper2, Gene)"]
        );
        let clause = variablize(&db, &paths[0], target, false);
        assert_eq!(
            clause.id(),
            "Cites(E1,E2) & Mentions(E2,E3) -> Mentions(E1,E3)"
        );
    }

    #[test]
    fn chain_depth_limits() {
        let db = chain(4, (0, 3));
        let t = db.targets()[0];
        assert!(bfs_paths(&db, t, &forward(2)).is_empty());
        assert_eq!(bfs_paths(&db, t, &forward(3)).len(), 1);
    }

    #[test]
    fn unreachable_endpoint_has_no_paths() {
        let db = example1();
        let target = db.find_by_name("Mentions", "Paper2", "Gene").unwrap();
        assert!(bfs_paths(&db, target, &forward(3)).is_empty());
    }

    #[test]
    fn inverse_steps_are_found_and_regroundable() {
        // a -p-> b <-q- c : reaching c from a needs q backwards.
        let mut s = Schema::new();
        s.add("p", false).unwrap();
        s.add("q", false).unwrap();
        s.add("t", true).unwrap();
        let db =
            AtomDatabase::<f64>::parse_tsv("p\ta\tb\nq\tc\tb\nt\ta\tc\n".as_bytes(), s).unwrap();
        let t = db.targets()[0];
        let cfg = GenerationConfig {
            include_inverses: true,
            ..forward(2)
        };
        let paths = bfs_paths(&db, t, &cfg);
        assert_eq!(paths.len(), 1);
        let clause = variablize(&db, &paths[0], t, false);
        assert_eq!(clause.id(), "p(E1,E2) & q(E3,E2) -> t(E1,E3)");
        assert!(bfs_paths(&db, t, &forward(2)).is_empty());
    }

    #[test]
    fn example_one_candidates() {
        let db = example1();
        let clauses = generate_candidates(&db, &forward(2)).unwrap();
        let ids: Vec<&str> = clauses.iter().map(|c| c.id()).collect();
        assert_eq!(
            ids,
            vec![
                "Cites(E1,E2) & Mentions(E2,E3) -> !Mentions(E1,E3)",
                "Cites(E1,E2) & Mentions(E2,E3) -> Mentions(E1,E3)",
                "-> !Mentions(A,B)",
            ]
        );
        assert_eq!(clauses[0].coverage, 1);
    }

    #[test]
    fn high_min_coverage_leaves_priors() {
        let db = example1();
        let cfg = GenerationConfig {
            min_coverage: 3,
            ..forward(2)
        };
        let clauses = generate_candidates(&db, &cfg).unwrap();
        assert_eq!(clauses.len(), 1);
        assert!(clauses[0].is_prior());
        let cfg = GenerationConfig {
            add_negative_priors: false,
            ..cfg
        };
        assert_eq!(
            generate_candidates(&db, &cfg),
            Err(GenerationError::NoCandidates)
        );
    }

    #[test]
    fn excluding_target_edges() {
        let db = example1();
        let cfg = GenerationConfig {
            traverse_targets: false,
            ..forward(2)
        };
        let clauses = generate_candidates(&db, &cfg).unwrap();
        assert_eq!(clauses.len(), 1);
    }

    #[test]
    fn config_validation() {
        let bad = GenerationConfig {
            max_depth: 0,
            ..GenerationConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(GenerationConfig::default().validate().is_ok());
    }
}
