//! The steps behind each subcommand, usable without the argument parser.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use hlsl::data::{read_records, subsample_negatives};
use hlsl::dataset::test_db;
use hlsl::learning::{conditionals, TracePoint};
use hlsl::model_io::{read_clauses, read_model, write_clauses, write_model};
use hlsl::scalar::format_sig;
use hlsl::{
    auc_roc, generate_candidates, gls_structure_learn, map_infer, ppll_structure_learn, AtomRecord,
    Database, LearnOutcome, Model, PathClause, RocResult, Schema,
};

use crate::config::{Method, RunConfig};
use crate::CliError;

pub const CLAUSES_FILE: &str = "clauses.tsv";
pub const MODEL_FILE: &str = "model.tsv";
pub const PREDICTIONS_FILE: &str = "predictions.tsv";

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

/// Runs `write` against a buffered file and flushes it.
pub fn write_file<F>(path: &Path, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut out = create(path)?;
    write(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(path, e))
}

pub fn load_schema(config: &RunConfig) -> Result<Schema, CliError> {
    let path = config.schema_path()?;
    Schema::parse(open(&path)?).map_err(|e| CliError::input(&path, e))
}

pub fn load_records(path: &Path) -> Result<Vec<AtomRecord>, CliError> {
    read_records(open(path)?).map_err(|e| CliError::input(path, e))
}

/// Evidence plus (subsampled) training targets.
pub fn training_db(config: &RunConfig) -> Result<Database, CliError> {
    let schema = load_schema(config)?;
    let observed = load_records(&config.observed_path()?)?;
    let mut train = load_records(&config.train_path()?)?;
    if config.neg_ratio.is_finite() {
        train = subsample_negatives(
            train,
            config.neg_ratio,
            config.generation.threshold,
            config.seed,
        );
    }
    Ok(hlsl::dataset::training_db(&schema, &observed, &train)?)
}

/// Inference database with the held-out targets masked, and their labels.
pub fn inference_db(config: &RunConfig) -> Result<(Database, Vec<AtomRecord>), CliError> {
    let schema = load_schema(config)?;
    let observed = load_records(&config.observed_path()?)?;
    let train = if config.strict {
        Vec::new()
    } else {
        load_records(&config.train_path()?)?
    };
    let test = load_records(&config.test_path()?)?;
    let db = test_db(&schema, &observed, &train, &test, config.strict)?;
    Ok((db, test))
}

pub fn generate(config: &RunConfig, db: &Database) -> Result<Vec<PathClause>, CliError> {
    Ok(generate_candidates(db, &config.generation)?)
}

pub fn write_clause_file(path: &Path, clauses: &[PathClause]) -> Result<(), CliError> {
    write_file(path, |out| write_clauses(clauses, out))
}

pub fn read_clause_file(path: &Path, schema: &Schema) -> Result<Vec<PathClause>, CliError> {
    read_clauses(open(path)?, schema).map_err(|e| CliError::input(path, e))
}

pub fn learn(
    config: &RunConfig,
    clauses: &[PathClause],
    db: &Database,
) -> Result<LearnOutcome<f64>, CliError> {
    Ok(match config.method {
        Method::Ppll => ppll_structure_learn(clauses, db, &config.learning)?,
        Method::Gls => gls_structure_learn(clauses, db, &config.learning)?,
    })
}

pub fn write_model_file(path: &Path, model: &Model) -> Result<(), CliError> {
    write_file(path, |out| write_model(model, out))
}

pub fn read_model_file(path: &Path, schema: &Schema) -> Result<Model, CliError> {
    read_model(open(path)?, schema).map_err(|e| CliError::input(path, e))
}

pub fn write_trace<W: Write>(trace: &[TracePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "iteration\tobjective\tmax_gradient\telapsed_ms")?;
    for t in trace {
        writeln!(
            out,
            "{}\t{}\t{}\t{:.3}",
            t.iteration,
            format_sig(t.objective, 12),
            format_sig(t.max_gradient, 12),
            t.elapsed_ms
        )?;
    }
    Ok(())
}

/// Per-variable and per-clause score breakdown of a learned model.
pub fn write_scores<W: Write>(
    config: &RunConfig,
    model: &Model,
    db: &Database,
    out: W,
) -> std::io::Result<()> {
    let cond = conditionals(&model.clauses, db, config.learning.exponent);
    let report = match config.method {
        Method::Ppll => cond.ppll_report(&model.weights),
        Method::Gls => cond.pll_report(&model.weights),
    };
    report.write_tsv(db, out)
}

/// MAP value of every held-out target, in test-file order.
pub fn predict(config: &RunConfig, model: &Model, db: &Database) -> Vec<AtomRecord> {
    let solution = map_infer(model, db, &config.map);
    solution
        .values
        .iter()
        .map(|&(atom, y)| {
            let mut r = db.record(atom);
            r.value = y;
            r
        })
        .collect()
}

pub fn write_predictions<W: Write>(predictions: &[AtomRecord], mut out: W) -> std::io::Result<()> {
    for p in predictions {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            p.predicate,
            p.arg1,
            p.arg2,
            format_sig(p.value, 12)
        )?;
    }
    Ok(())
}

/// AUC of `predictions` against `labels`; a label is positive when its value
/// reaches `threshold`. Every label needs a prediction.
pub fn evaluate(
    predictions: &[AtomRecord],
    labels: &[AtomRecord],
    threshold: f64,
) -> Result<RocResult, CliError> {
    let by_atom: HashMap<(&str, &str, &str), f64> = predictions
        .iter()
        .map(|p| {
            (
                (p.predicate.as_str(), p.arg1.as_str(), p.arg2.as_str()),
                p.value,
            )
        })
        .collect();
    let mut scores = Vec::with_capacity(labels.len());
    for l in labels {
        let key = (l.predicate.as_str(), l.arg1.as_str(), l.arg2.as_str());
        let score = by_atom
            .get(&key)
            .ok_or_else(|| CliError::MissingPrediction(l.to_string()))?;
        scores.push(*score);
    }
    let truth: Vec<bool> = labels.iter().map(|l| l.value >= threshold).collect();
    Ok(auc_roc(&scores, &truth)?)
}

pub fn write_metrics<W: Write>(roc: &RocResult, seconds: f64, mut out: W) -> std::io::Result<()> {
    writeln!(out, "auc\tn_pos\tn_neg\tseconds")?;
    writeln!(
        out,
        "{}\t{}\t{}\t{:.6}",
        format_sig(roc.auc, 12),
        roc.n_pos,
        roc.n_neg,
        seconds
    )
}

/// Generate, learn and predict, writing the clause, model and prediction
/// files into `out_dir`.
pub fn run_pipeline(config: &RunConfig, out_dir: &Path) -> Result<Model, CliError> {
    let train = training_db(config)?;
    let clauses = generate(config, &train)?;
    write_clause_file(&out_dir.join(CLAUSES_FILE), &clauses)?;
    let model = learn(config, &clauses, &train)?.model;
    write_model_file(&out_dir.join(MODEL_FILE), &model)?;
    let (test, _) = inference_db(config)?;
    let predictions = predict(config, &model, &test);
    write_file(&out_dir.join(PREDICTIONS_FILE), |out| {
        write_predictions(&predictions, out)
    })?;
    Ok(model)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub n: usize,
    pub seconds: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    }
}

/// Median wall-clock seconds of `repeats` structure-learning runs.
pub fn time_method(
    config: &RunConfig,
    method: Method,
    clauses: &[PathClause],
    db: &Database,
    repeats: usize,
) -> Result<f64, CliError> {
    let config = RunConfig {
        method,
        ..config.clone()
    };
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        learn(&config, clauses, db)?;
        times.push(start.elapsed().as_secs_f64());
    }
    Ok(median(times))
}

/// Times both learners on the first `n` clauses of `pool` for each `n`.
pub fn bench(
    config: &RunConfig,
    db: &Database,
    pool: &[PathClause],
    counts: &[usize],
    repeats: usize,
) -> Result<Vec<BenchRow>, CliError> {
    if let Some(&n) = counts.iter().find(|&&n| n == 0 || n > pool.len()) {
        return Err(CliError::Config {
            key: "counts".to_string(),
            message: format!("{n} is outside 1..={}", pool.len()),
        });
    }
    let mut rows = Vec::new();
    for &n in counts {
        for method in [Method::Ppll, Method::Gls] {
            let seconds = time_method(config, method, &pool[..n], db, repeats)?;
            rows.push(BenchRow { method, n, seconds });
        }
    }
    Ok(rows)
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "method,n,seconds")?;
    for r in rows {
        writeln!(out, "{},{},{:.6}", r.method, r.n, r.seconds)?;
    }
    Ok(())
}
