//! A learning task on disk: schema, evidence, training and held-out targets.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::data::{read_records, AtomDatabase, AtomRecord, DataError, Role, Schema};
use crate::scalar::Real;

pub const SCHEMA_FILE: &str = "schema.tsv";
pub const OBSERVED_FILE: &str = "observed.tsv";
pub const TRAIN_FILE: &str = "train.tsv";
pub const TEST_FILE: &str = "test.tsv";

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub schema: Schema,
    /// Evidence atoms.
    pub observed: Vec<AtomRecord>,
    /// Labelled target atoms used for learning.
    pub train: Vec<AtomRecord>,
    /// Labelled target atoms held out for evaluation.
    pub test: Vec<AtomRecord>,
}

impl Dataset {
    /// Evidence plus training targets as the random variables.
    pub fn training_db<T: Real>(&self) -> Result<AtomDatabase<T>, DataError> {
        training_db(&self.schema, &self.observed, &self.train)
    }

    /// Evidence (plus training labels unless `strict`) with the held-out
    /// targets as masked random variables.
    pub fn test_db<T: Real>(&self, strict: bool) -> Result<AtomDatabase<T>, DataError> {
        test_db(
            &self.schema,
            &self.observed,
            &self.train,
            &self.test,
            strict,
        )
    }

    /// Writes the four files into `dir`, creating it if needed.
    pub fn write_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut schema = BufWriter::new(File::create(dir.join(SCHEMA_FILE))?);
        self.schema.write(&mut schema)?;
        schema.flush()?;
        for (name, records) in [
            (OBSERVED_FILE, &self.observed),
            (TRAIN_FILE, &self.train),
            (TEST_FILE, &self.test),
        ] {
            let mut out = BufWriter::new(File::create(dir.join(name))?);
            for r in records {
                writeln!(out, "{}", r.to_tsv_line())?;
            }
            out.flush()?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self, DataError> {
        let open = |name: &str| -> Result<BufReader<File>, DataError> {
            Ok(BufReader::new(File::open(dir.join(name))?))
        };
        Ok(Self {
            schema: Schema::parse(open(SCHEMA_FILE)?)?,
            observed: read_records(open(OBSERVED_FILE)?)?,
            train: read_records(open(TRAIN_FILE)?)?,
            test: read_records(open(TEST_FILE)?)?,
        })
    }
}

fn insert_all<T: Real>(
    db: &mut AtomDatabase<T>,
    records: &[AtomRecord],
    role: Role,
) -> Result<(), DataError> {
    for (i, r) in records.iter().enumerate() {
        db.insert_record(r, Some(role), i + 1)?;
    }
    Ok(())
}

pub fn training_db<T: Real>(
    schema: &Schema,
    observed: &[AtomRecord],
    train: &[AtomRecord],
) -> Result<AtomDatabase<T>, DataError> {
    let mut db = AtomDatabase::new(schema.clone());
    insert_all(&mut db, observed, Role::Evidence)?;
    insert_all(&mut db, train, Role::Target)?;
    let threshold = db.threshold();
    db.build_adjacency(threshold);
    Ok(db)
}

pub fn test_db<T: Real>(
    schema: &Schema,
    observed: &[AtomRecord],
    train: &[AtomRecord],
    test: &[AtomRecord],
    strict: bool,
) -> Result<AtomDatabase<T>, DataError> {
    let mut db = AtomDatabase::new(schema.clone());
    insert_all(&mut db, observed, Role::Evidence)?;
    if !strict {
        insert_all(&mut db, train, Role::Evidence)?;
    }
    insert_all(&mut db, test, Role::Target)?;
    db.clear_target_values();
    Ok(db)
}
