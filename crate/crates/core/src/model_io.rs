//! Clause and model files.
//!
//! Clause file: comment lines starting with `#`, then `clause<TAB>coverage`.
//! Model file: the header `# hlsl-model v1`, then `weight<TAB>clause` with the
//! weight printed to 12 significant digits.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::clause::{ClauseError, PathClause};
use crate::data::Schema;
use crate::learning::WeightedModel;
use crate::scalar::{format_sig, Real};

pub const MODEL_HEADER: &str = "# hlsl-model v1";
pub const CLAUSE_HEADER: &str = "# hlsl-clauses v1";

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("missing `{MODEL_HEADER}` header")]
    MissingHeader,
    #[error("line {line}: expected two tab-separated fields")]
    MalformedLine { line: usize },
    #[error("line {line}: invalid weight `{value}`")]
    InvalidWeight { line: usize, value: String },
    #[error("line {line}: {source}")]
    Clause { line: usize, source: ClauseError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ModelIoError {
    pub fn code(&self) -> &'static str {
        match self {
            ModelIoError::MissingHeader => "MissingHeader",
            ModelIoError::MalformedLine { .. } => "MalformedLine",
            ModelIoError::InvalidWeight { .. } => "InvalidWeight",
            ModelIoError::Clause { .. } => "MalformedClause",
            ModelIoError::Io(_) => "Io",
        }
    }
}

pub fn write_clauses<W: Write>(clauses: &[PathClause], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CLAUSE_HEADER}")?;
    writeln!(out, "# clause\tcoverage")?;
    for c in clauses {
        writeln!(out, "{}\t{}", c.id(), c.coverage)?;
    }
    Ok(())
}

/// Reads a clause file. The coverage column is optional.
pub fn read_clauses<R: BufRead>(
    input: R,
    schema: &Schema,
) -> Result<Vec<PathClause>, ModelIoError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let text = fields.next().unwrap_or_default();
        let coverage = match fields.next() {
            Some(c) => c
                .trim()
                .parse()
                .map_err(|_| ModelIoError::MalformedLine { line: line_no })?,
            None => 0,
        };
        if fields.next().is_some() {
            return Err(ModelIoError::MalformedLine { line: line_no });
        }
        let clause = PathClause::parse(text, schema).map_err(|source| ModelIoError::Clause {
            line: line_no,
            source,
        })?;
        out.push(clause.with_coverage(coverage));
    }
    Ok(out)
}

pub fn write_model<T: Real, W: Write>(model: &WeightedModel<T>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{MODEL_HEADER}")?;
    for (clause, w) in model.iter() {
        writeln!(out, "{}\t{}", format_sig(w.to_f64_lossy(), 12), clause.id())?;
    }
    Ok(())
}

pub fn read_model<T: Real, R: BufRead>(
    input: R,
    schema: &Schema,
) -> Result<WeightedModel<T>, ModelIoError> {
    let mut lines = input.lines();
    let first = lines.next().transpose()?;
    if first.as_deref().map(str::trim_end) != Some(MODEL_HEADER) {
        return Err(ModelIoError::MissingHeader);
    }
    let mut clauses = Vec::new();
    let mut weights = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (w, text) = line
            .split_once('\t')
            .ok_or(ModelIoError::MalformedLine { line: line_no })?;
        let weight: f64 = w.trim().parse().map_err(|_| ModelIoError::InvalidWeight {
            line: line_no,
            value: w.to_string(),
        })?;
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(ModelIoError::InvalidWeight {
                line: line_no,
                value: w.to_string(),
            });
        }
        let clause = PathClause::parse(text, schema).map_err(|source| ModelIoError::Clause {
            line: line_no,
            source,
        })?;
        clauses.push(clause);
        weights.push(T::lit(weight));
    }
    Ok(WeightedModel { clauses, weights })
}
