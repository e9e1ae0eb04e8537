//! First-order path clauses and their text form.
//!
//! Grammar, one clause per line:
//!
//! ```text
//! Cites(E1,E2) & Mentions(E2,E3) -> Mentions(E1,E3)
//! Cites(E1,E2) & Mentions(E2,E3) -> !Mentions(E1,E3)
//! -> !Mentions(A,B)
//! ```
//!
//! Body literals form a chain from the head's first variable to its second.
//! A literal whose variables appear in reverse chain order was reached by
//! walking an edge backwards.

use std::fmt;

use thiserror::Error;

use crate::data::{PredId, Schema};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClauseError {
    #[error("malformed clause `{0}`")]
    Syntax(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("head predicate `{0}` is not a target")]
    HeadNotTarget(String),
    #[error("negated literal `{0}` in clause body")]
    NegatedBody(String),
    #[error("body of `{0}` is not a variable chain from the head's first to second argument")]
    BrokenChain(String),
}

/// Index of a logical variable within a clause (`E{index+1}` in text).
pub type VarId = u8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub predicate: PredId,
    pub var1: VarId,
    pub var2: VarId,
    pub negated: bool,
    /// Provenance only: set when the literal came from traversing an edge
    /// backwards; the stored variable order is already swapped.
    pub inverted: bool,
}

/// A Horn clause `body -> [!]head` whose body is a variable chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathClause {
    pub body: Vec<Literal>,
    pub head: Literal,
    /// Number of distinct target atoms the generating paths connected.
    pub coverage: usize,
    id: String,
}

impl PathClause {
    /// Builds the chain clause for a sequence of `(predicate, inverted)` steps.
    pub fn from_steps(
        steps: &[(PredId, bool)],
        target: PredId,
        head_negated: bool,
        schema: &Schema,
    ) -> Self {
        let body: Vec<Literal> = steps
            .iter()
            .enumerate()
            .map(|(j, &(predicate, inverted))| {
                let (from, to) = (j as VarId, (j + 1) as VarId);
                let (var1, var2) = if inverted { (to, from) } else { (from, to) };
                Literal {
                    predicate,
                    var1,
                    var2,
                    negated: false,
                    inverted,
                }
            })
            .collect();
        let head = Literal {
            predicate: target,
            var1: 0,
            var2: steps.len().max(1) as VarId,
            negated: head_negated,
            inverted: false,
        };
        let mut clause = PathClause {
            body,
            head,
            coverage: 0,
            id: String::new(),
        };
        clause.id = clause.render(schema);
        clause
    }

    /// The body-less clause `-> !target(A,B)`.
    pub fn negative_prior(target: PredId, schema: &Schema) -> Self {
        Self::from_steps(&[], target, true, schema)
    }

    pub fn with_coverage(mut self, coverage: usize) -> Self {
        self.coverage = coverage;
        self
    }

    /// The same clause with its head sign flipped.
    pub fn negated_twin(&self, schema: &Schema) -> Self {
        let steps = self.steps();
        Self::from_steps(&steps, self.head.predicate, !self.head.negated, schema)
            .with_coverage(self.coverage)
    }

    /// `(predicate, inverted)` for each body literal in chain order.
    pub fn steps(&self) -> Vec<(PredId, bool)> {
        self.body
            .iter()
            .map(|l| (l.predicate, l.inverted))
            .collect()
    }

    pub fn is_prior(&self) -> bool {
        self.body.is_empty()
    }

    pub fn head_negated(&self) -> bool {
        self.head.negated
    }

    pub fn target(&self) -> PredId {
        self.head.predicate
    }

    /// Canonical text form; unique per logical clause.
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.body.len()
    }

    pub fn is_empty(&self) -> bool {
        self.body.is_empty()
    }

    fn render(&self, schema: &Schema) -> String {
        let var = |v: VarId| -> String {
            if self.is_prior() {
                ["A", "B"][v as usize].to_string()
            } else {
                format!("E{}", v + 1)
            }
        };
        let lit = |l: &Literal| {
            format!(
                "{}{}({},{})",
                if l.negated { "!" } else { "" },
                schema.name(l.predicate),
                var(l.var1),
                var(l.var2)
            )
        };
        let body: Vec<String> = self.body.iter().map(lit).collect();
        if body.is_empty() {
            format!("-> {}", lit(&self.head))
        } else {
            format!("{} -> {}", body.join(" & "), lit(&self.head))
        }
    }

    /// Parses one clause in the text grammar. Variable names are arbitrary;
    /// the result is re-rendered in canonical form.
    pub fn parse(text: &str, schema: &Schema) -> Result<Self, ClauseError> {
        let syntax = || ClauseError::Syntax(text.to_string());
        let (body_text, head_text) = text.split_once("->").ok_or_else(syntax)?;
        if head_text.contains("->") {
            return Err(syntax());
        }
        let head = parse_literal(head_text, schema).ok_or_else(syntax)??;
        if !schema.is_target(head.0) {
            return Err(ClauseError::HeadNotTarget(schema.name(head.0).to_string()));
        }
        let mut body = Vec::new();
        if !body_text.trim().is_empty() {
            for part in body_text.split('&') {
                let lit = parse_literal(part, schema).ok_or_else(syntax)??;
                if lit.3 {
                    return Err(ClauseError::NegatedBody(part.trim().to_string()));
                }
                body.push(lit);
            }
        }
        let (head_pred, head_a, head_b, head_negated) = head;
        if head_a == head_b {
            return Err(ClauseError::BrokenChain(text.to_string()));
        }
        let mut steps = Vec::with_capacity(body.len());
        let mut seen = vec![head_a.clone()];
        let mut current = head_a;
        for (pred, a, b, _) in body {
            let (inverted, next) = if a == current && b != current {
                (false, b)
            } else if b == current && a != current {
                (true, a)
            } else {
                return Err(ClauseError::BrokenChain(text.to_string()));
            };
            if seen.contains(&next) {
                return Err(ClauseError::BrokenChain(text.to_string()));
            }
            seen.push(next.clone());
            steps.push((pred, inverted));
            current = next;
        }
        if !steps.is_empty() && current != head_b {
            return Err(ClauseError::BrokenChain(text.to_string()));
        }
        Ok(Self::from_steps(&steps, head_pred, head_negated, schema))
    }
}

impl fmt::Display for PathClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

type RawLiteral = (PredId, String, String, bool);

fn parse_literal(text: &str, schema: &Schema) -> Option<Result<RawLiteral, ClauseError>> {
    let text = text.trim();
    let (negated, text) = match text.strip_prefix('!') {
        Some(rest) => (true, rest.trim_start()),
        None => (false, text),
    };
    let open = text.find('(')?;
    let inner = text.strip_suffix(')')?.get(open + 1..)?;
    let name = text[..open].trim();
    let (a, b) = inner.split_once(',')?;
    let (a, b) = (a.trim(), b.trim());
    let valid = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || c == '_');
    if name.is_empty() || !valid(a) || !valid(b) {
        return None;
    }
    Some(match schema.id(name) {
        Some(p) => Ok((p, a.to_string(), b.to_string(), negated)),
        None => Err(ClauseError::UnknownPredicate(name.to_string())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        let mut s = Schema::new();
        s.add("Cites", false).unwrap();
        s.add("Mentions", true).unwrap();
        s.add("q", false).unwrap();
        s
    }

    #[test]
    fn renders_chain_clause() {
        let s = schema();
        let cites = s.id("Cites").unwrap();
        let mentions = s.id("Mentions").unwrap();
        let c = PathClause::from_steps(&[(cites, false), (mentions, false)], mentions, false, &s);
        assert_eq!(c.id(), "Cites(E1,E2) & Mentions(E2,E3) -> Mentions(E1,E3)");
        assert_eq!(
            c.negated_twin(&s).id(),
            "Cites(E1,E2) & Mentions(E2,E3) -> !Mentions(E1,E3)"
        );
        assert_eq!(
            PathClause::negative_prior(mentions, &s).id(),
            "-> !Mentions(A,B)"
        );
    }

    #[test]
    fn inverted_step_swaps_variables() {
        let s = schema();
        let q = s.id("q").unwrap();
        let cites = s.id("Cites").unwrap();
        let m = s.id("Mentions").unwrap();
        let c = PathClause::from_steps(&[(cites, false), (q, true)], m, false, &s);
        assert_eq!(c.id(), "Cites(E1,E2) & q(E3,E2) -> Mentions(E1,E3)");
        assert!(c.body[1].inverted);
    }

    #[test]
    fn parse_round_trips_and_normalizes_names() {
        let s = schema();
        for text in [
            "Cites(E1,E2) & Mentions(E2,E3) -> Mentions(E1,E3)",
            "Cites(E1,E2) & q(E3,E2) -> !Mentions(E1,E3)",
            "-> !Mentions(A,B)",
            "q(E2,E1) -> Mentions(E1,E2)",
        ] {
            assert_eq!(PathClause::parse(text, &s).unwrap().id(), text);
        }
        let c = PathClause::parse(" Cites( X , Y )&Mentions(Y,Z)->Mentions(X,Z) ", &s).unwrap();
        assert_eq!(c.id(), "Cites(E1,E2) & Mentions(E2,E3) -> Mentions(E1,E3)");
    }

    #[test]
    fn parse_errors() {
        let s = schema();
        assert!(matches!(
            PathClause::parse("Cites(A,B)", &s),
            Err(ClauseError::Syntax(_))
        ));
        assert!(matches!(
            PathClause::parse("Foo(A,B) -> Mentions(A,B)", &s),
            Err(ClauseError::UnknownPredicate(_))
        ));
        assert!(matches!(
            PathClause::parse("Mentions(A,B) -> Cites(A,B)", &s),
            Err(ClauseError::HeadNotTarget(_))
        ));
        assert!(matches!(
            PathClause::parse("!Cites(A,B) -> Mentions(A,B)", &s),
            Err(ClauseError::NegatedBody(_))
        ));
        assert!(matches!(
            PathClause::parse("Cites(A,B) & q(C,D) -> Mentions(A,D)", &s),
            Err(ClauseError::BrokenChain(_))
        ));
        assert!(matches!(
            PathClause::parse("Cites(A,B) & q(B,A) -> Mentions(A,A)", &s),
            Err(ClauseError::BrokenChain(_))
        ));
    }
}
