//! Relational ground-atom storage.
//!
//! Atoms are binary: `predicate(arg1, arg2)` with a soft truth value in
//! `[0, 1]`. Constants are interned to dense ids. Atoms are split into
//! evidence (fixed observations) and targets (the random variables being
//! modelled). An adjacency index over atoms whose rounded value is 1 backs
//! path search and lazy grounding.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scalar::Real;

/// Rounding threshold used when none is configured.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: expected 3 or 4 tab-separated fields")]
    MalformedLine { line: usize },
    #[error("line {line}: unknown predicate `{name}`")]
    UnknownPredicate { line: usize, name: String },
    #[error("line {line}: duplicate atom {atom}")]
    DuplicateAtom { line: usize, atom: String },
    #[error("line {line}: value {value} outside [0, 1]")]
    ValueOutOfRange { line: usize, value: String },
    #[error("schema line {line}: expected `name<TAB>target|evidence`")]
    MalformedSchema { line: usize },
    #[error("duplicate predicate `{0}` in schema")]
    DuplicatePredicate(String),
    #[error("schema declares no target predicate")]
    NoTargetPredicate,
    #[error("line {line}: `{name}` is not a target predicate")]
    NotATarget { line: usize, name: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DataError {
    pub fn code(&self) -> &'static str {
        match self {
            DataError::MalformedLine { .. } => "MalformedLine",
            DataError::UnknownPredicate { .. } => "UnknownPredicate",
            DataError::DuplicateAtom { .. } => "DuplicateAtom",
            DataError::ValueOutOfRange { .. } => "ValueOutOfRange",
            DataError::MalformedSchema { .. } => "MalformedSchema",
            DataError::DuplicatePredicate(_) => "DuplicatePredicate",
            DataError::NoTargetPredicate => "NoTargetPredicate",
            DataError::NotATarget { .. } => "NotATarget",
            DataError::Io(_) => "Io",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomId(pub u32);

impl AtomId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ConstId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl PredId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateSymbol {
    pub name: String,
    pub arity: u8,
    pub is_target: bool,
}

/// The set of predicates a database may mention.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schema {
    predicates: Vec<PredicateSymbol>,
    by_name: HashMap<String, PredId>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, is_target: bool) -> Result<PredId, DataError> {
        if self.by_name.contains_key(name) {
            return Err(DataError::DuplicatePredicate(name.to_string()));
        }
        let id = PredId(self.predicates.len() as u32);
        self.predicates.push(PredicateSymbol {
            name: name.to_string(),
            arity: 2,
            is_target,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    /// Reads `name<TAB>target|evidence` lines. Blank lines and `#` comments are
    /// skipped.
    pub fn parse<R: BufRead>(input: R) -> Result<Self, DataError> {
        let mut schema = Schema::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
            let is_target = match fields.as_slice() {
                [_, "target"] => true,
                [_, "evidence"] => false,
                _ => return Err(DataError::MalformedSchema { line: i + 1 }),
            };
            schema.add(fields[0], is_target)?;
        }
        if schema.targets().next().is_none() {
            return Err(DataError::NoTargetPredicate);
        }
        Ok(schema)
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for p in &self.predicates {
            let role = if p.is_target { "target" } else { "evidence" };
            writeln!(out, "{}\t{}", p.name, role)?;
        }
        Ok(())
    }

    pub fn id(&self, name: &str) -> Option<PredId> {
        self.by_name.get(name).copied()
    }

    pub fn predicate(&self, id: PredId) -> &PredicateSymbol {
        &self.predicates[id.index()]
    }

    pub fn name(&self, id: PredId) -> &str {
        &self.predicates[id.index()].name
    }

    pub fn is_target(&self, id: PredId) -> bool {
        self.predicates[id.index()].is_target
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    /// Target predicates in declaration order.
    pub fn targets(&self) -> impl Iterator<Item = PredId> + '_ {
        self.predicates
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_target)
            .map(|(i, _)| PredId(i as u32))
    }
}

/// Whether an atom is a fixed observation or a modelled variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Evidence,
    Target,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundAtom<T> {
    pub predicate: PredId,
    pub arg1: ConstId,
    pub arg2: ConstId,
    pub value: T,
}

/// A text-level atom, independent of any interning.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomRecord {
    pub predicate: String,
    pub arg1: String,
    pub arg2: String,
    pub value: f64,
}

impl AtomRecord {
    pub fn new(predicate: &str, arg1: &str, arg2: &str, value: f64) -> Self {
        Self {
            predicate: predicate.to_string(),
            arg1: arg1.to_string(),
            arg2: arg2.to_string(),
            value,
        }
    }

    pub fn to_tsv_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.predicate, self.arg1, self.arg2, self.value
        )
    }
}

impl fmt::Display for AtomRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.predicate, self.arg1, self.arg2)
    }
}

/// Returns 1 iff `v >= threshold`.
#[inline]
pub fn round_value<T: Real>(v: T, threshold: T) -> u8 {
    u8::from(v >= threshold)
}

/// An edge of the adjacency index. For an outgoing edge `neighbor` is the
/// second argument; for an incoming edge it is the first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub predicate: PredId,
    pub neighbor: ConstId,
    pub atom: AtomId,
}

#[derive(Clone, Debug, Default)]
struct Adjacency {
    outgoing: Vec<Vec<Edge>>,
    incoming: Vec<Vec<Edge>>,
}

/// Indexed store of ground atoms.
///
/// Immutable once built apart from [`AtomDatabase::build_adjacency`] and
/// [`AtomDatabase::clear_target_values`], both of which take `&mut self`.
#[derive(Clone, Debug)]
pub struct AtomDatabase<T> {
    schema: Schema,
    constants: Vec<String>,
    const_index: HashMap<String, ConstId>,
    atoms: Vec<GroundAtom<T>>,
    roles: Vec<Role>,
    lookup: HashMap<(PredId, ConstId, ConstId), AtomId>,
    targets: Vec<AtomId>,
    evidence: Vec<AtomId>,
    target_slot: Vec<u32>,
    threshold: T,
    adjacency: Adjacency,
}

const NO_SLOT: u32 = u32::MAX;

impl<T: Real> AtomDatabase<T> {
    pub fn new(schema: Schema) -> Self {
        Self {
            schema,
            constants: Vec::new(),
            const_index: HashMap::new(),
            atoms: Vec::new(),
            roles: Vec::new(),
            lookup: HashMap::new(),
            targets: Vec::new(),
            evidence: Vec::new(),
            target_slot: Vec::new(),
            threshold: T::lit(DEFAULT_THRESHOLD),
            adjacency: Adjacency::default(),
        }
    }

    /// Parses a TSV stream, assigning roles by predicate, and builds the
    /// adjacency index at the default threshold.
    pub fn parse_tsv<R: BufRead>(input: R, schema: Schema) -> Result<Self, DataError> {
        let mut db = Self::new(schema);
        db.read_tsv(input, None)?;
        db.build_adjacency(T::lit(DEFAULT_THRESHOLD));
        Ok(db)
    }

    /// Appends atoms from a TSV stream. With `role == None` the role follows the
    /// predicate; `Some(Role::Evidence)` forces every atom to evidence and
    /// `Some(Role::Target)` requires target predicates.
    ///
    /// The adjacency index is not refreshed; call `build_adjacency` afterwards.
    pub fn read_tsv<R: BufRead>(&mut self, input: R, role: Option<Role>) -> Result<(), DataError> {
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let record = parse_line(&line, i + 1)?;
            self.insert_record(&record, role, i + 1)?;
        }
        Ok(())
    }

    /// Inserts a single record. `line` is only used for error reporting.
    pub fn insert_record(
        &mut self,
        record: &AtomRecord,
        role: Option<Role>,
        line: usize,
    ) -> Result<AtomId, DataError> {
        let predicate =
            self.schema
                .id(&record.predicate)
                .ok_or_else(|| DataError::UnknownPredicate {
                    line,
                    name: record.predicate.clone(),
                })?;
        if !(0.0..=1.0).contains(&record.value) {
            return Err(DataError::ValueOutOfRange {
                line,
                value: record.value.to_string(),
            });
        }
        let role = match role {
            None if self.schema.is_target(predicate) => Role::Target,
            None | Some(Role::Evidence) => Role::Evidence,
            Some(Role::Target) => {
                if !self.schema.is_target(predicate) {
                    return Err(DataError::NotATarget {
                        line,
                        name: record.predicate.clone(),
                    });
                }
                Role::Target
            }
        };
        let arg1 = self.intern(&record.arg1);
        let arg2 = self.intern(&record.arg2);
        let key = (predicate, arg1, arg2);
        if self.lookup.contains_key(&key) {
            return Err(DataError::DuplicateAtom {
                line,
                atom: record.to_string(),
            });
        }
        let id = AtomId(self.atoms.len() as u32);
        self.atoms.push(GroundAtom {
            predicate,
            arg1,
            arg2,
            value: T::lit(record.value),
        });
        self.roles.push(role);
        self.lookup.insert(key, id);
        match role {
            Role::Target => {
                self.target_slot.push(self.targets.len() as u32);
                self.targets.push(id);
            }
            Role::Evidence => {
                self.target_slot.push(NO_SLOT);
                self.evidence.push(id);
            }
        }
        Ok(id)
    }

    fn intern(&mut self, name: &str) -> ConstId {
        if let Some(&id) = self.const_index.get(name) {
            return id;
        }
        let id = ConstId(self.constants.len() as u32);
        self.constants.push(name.to_string());
        self.const_index.insert(name.to_string(), id);
        id
    }

    /// Rebuilds the adjacency index from every atom whose rounded value is 1.
    /// Edge lists are sorted by `(predicate, neighbor)`.
    pub fn build_adjacency(&mut self, threshold: T) {
        let n = self.constants.len();
        let mut outgoing = vec![Vec::new(); n];
        let mut incoming = vec![Vec::new(); n];
        for (i, atom) in self.atoms.iter().enumerate() {
            if round_value(atom.value, threshold) == 1 {
                let id = AtomId(i as u32);
                outgoing[atom.arg1.index()].push(Edge {
                    predicate: atom.predicate,
                    neighbor: atom.arg2,
                    atom: id,
                });
                incoming[atom.arg2.index()].push(Edge {
                    predicate: atom.predicate,
                    neighbor: atom.arg1,
                    atom: id,
                });
            }
        }
        for list in outgoing.iter_mut().chain(incoming.iter_mut()) {
            list.sort_unstable();
        }
        self.threshold = threshold;
        self.adjacency = Adjacency { outgoing, incoming };
    }

    /// Sets every target value to 0 and rebuilds adjacency, so that held-out
    /// labels can neither gate grounding nor leak into clause bodies.
    pub fn clear_target_values(&mut self) {
        for &id in &self.targets {
            self.atoms[id.index()].value = T::zero();
        }
        self.build_adjacency(self.threshold);
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }

    pub fn atoms(&self) -> &[GroundAtom<T>] {
        &self.atoms
    }

    pub fn atom(&self, id: AtomId) -> &GroundAtom<T> {
        &self.atoms[id.index()]
    }

    pub fn value(&self, id: AtomId) -> T {
        self.atoms[id.index()].value
    }

    /// Stored values indexed by `AtomId`.
    pub fn values(&self) -> Vec<T> {
        self.atoms.iter().map(|a| a.value).collect()
    }

    pub fn role(&self, id: AtomId) -> Role {
        self.roles[id.index()]
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn targets(&self) -> &[AtomId] {
        &self.targets
    }

    pub fn evidence(&self) -> &[AtomId] {
        &self.evidence
    }

    /// Position of `id` within [`AtomDatabase::targets`].
    pub fn target_index(&self, id: AtomId) -> Option<usize> {
        match self.target_slot[id.index()] {
            NO_SLOT => None,
            s => Some(s as usize),
        }
    }

    pub fn constant_count(&self) -> usize {
        self.constants.len()
    }

    pub fn constant_name(&self, id: ConstId) -> &str {
        &self.constants[id.index()]
    }

    pub fn constant_id(&self, name: &str) -> Option<ConstId> {
        self.const_index.get(name).copied()
    }

    pub fn find(&self, predicate: PredId, arg1: ConstId, arg2: ConstId) -> Option<AtomId> {
        self.lookup.get(&(predicate, arg1, arg2)).copied()
    }

    pub fn find_by_name(&self, predicate: &str, arg1: &str, arg2: &str) -> Option<AtomId> {
        self.find(
            self.schema.id(predicate)?,
            self.constant_id(arg1)?,
            self.constant_id(arg2)?,
        )
    }

    pub fn outgoing(&self, c: ConstId) -> &[Edge] {
        self.adjacency
            .outgoing
            .get(c.index())
            .map_or(&[], Vec::as_slice)
    }

    pub fn incoming(&self, c: ConstId) -> &[Edge] {
        self.adjacency
            .incoming
            .get(c.index())
            .map_or(&[], Vec::as_slice)
    }

    /// Outgoing edges of `c` labelled `predicate` (edge lists are sorted).
    pub fn outgoing_with(&self, c: ConstId, predicate: PredId) -> &[Edge] {
        predicate_slice(self.outgoing(c), predicate)
    }

    pub fn incoming_with(&self, c: ConstId, predicate: PredId) -> &[Edge] {
        predicate_slice(self.incoming(c), predicate)
    }

    pub fn record(&self, id: AtomId) -> AtomRecord {
        let a = &self.atoms[id.index()];
        AtomRecord {
            predicate: self.schema.name(a.predicate).to_string(),
            arg1: self.constants[a.arg1.index()].clone(),
            arg2: self.constants[a.arg2.index()].clone(),
            value: a.value.to_f64_lossy(),
        }
    }

    pub fn display_atom(&self, id: AtomId) -> String {
        let a = &self.atoms[id.index()];
        format!(
            "{}({}, {})",
            self.schema.name(a.predicate),
            self.constants[a.arg1.index()],
            self.constants[a.arg2.index()]
        )
    }

    /// All atoms as records, in insertion order.
    pub fn records(&self) -> Vec<AtomRecord> {
        (0..self.atoms.len())
            .map(|i| self.record(AtomId(i as u32)))
            .collect()
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for i in 0..self.atoms.len() {
            let a = &self.atoms[i];
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                self.schema.name(a.predicate),
                self.constants[a.arg1.index()],
                self.constants[a.arg2.index()],
                a.value
            )?;
        }
        Ok(())
    }
}

fn predicate_slice(edges: &[Edge], predicate: PredId) -> &[Edge] {
    let start = edges.partition_point(|e| e.predicate < predicate);
    let end = edges.partition_point(|e| e.predicate <= predicate);
    &edges[start..end]
}

/// Parses one TSV atom line: `predicate, arg1, arg2[, value]`.
pub fn parse_line(line: &str, line_no: usize) -> Result<AtomRecord, DataError> {
    let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('\t').collect();
    if !(3..=4).contains(&fields.len()) || fields[..3].iter().any(|f| f.trim().is_empty()) {
        return Err(DataError::MalformedLine { line: line_no });
    }
    let value = match fields.get(3) {
        Some(v) => v
            .trim()
            .parse::<f64>()
            .map_err(|_| DataError::MalformedLine { line: line_no })?,
        None => 1.0,
    };
    if !(0.0..=1.0).contains(&value) {
        return Err(DataError::ValueOutOfRange {
            line: line_no,
            value: fields[3].trim().to_string(),
        });
    }
    Ok(AtomRecord::new(
        fields[0].trim(),
        fields[1].trim(),
        fields[2].trim(),
        value,
    ))
}

/// Reads a whole TSV stream into records.
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<AtomRecord>, DataError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_line(&line, i + 1)?);
    }
    Ok(out)
}

/// Keeps every positive record and at most `ratio * positives` negatives,
/// chosen uniformly with a seeded generator. Input order is preserved.
pub fn subsample_negatives(
    records: Vec<AtomRecord>,
    ratio: f64,
    threshold: f64,
    seed: u64,
) -> Vec<AtomRecord> {
    let positives = records.iter().filter(|r| r.value >= threshold).count();
    let negatives: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.value < threshold)
        .map(|(i, _)| i)
        .collect();
    let budget = (ratio * positives as f64).floor() as usize;
    if negatives.len() <= budget {
        return records;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = negatives.clone();
    keep.shuffle(&mut rng);
    keep.truncate(budget);
    let mut drop = vec![true; records.len()];
    for &i in &keep {
        drop[i] = false;
    }
    records
        .into_iter()
        .enumerate()
        .filter(|(i, r)| r.value >= threshold || !drop[*i])
        .map(|(_, r)| r)
        .collect()
}
