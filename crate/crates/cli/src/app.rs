//! Argument parsing and subcommand dispatch.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hlsl::model_io::write_clauses;
use hlsl::synth;

use crate::config::{Method, RunConfig};
use crate::pipeline::{self, write_file};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "hlsl",
    version,
    about = "Structure learning for hinge-loss Markov random fields"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat key=value config file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Directory with schema.tsv, observed.tsv, train.tsv and test.tsv.
    #[arg(long, global = true, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Task {
    Example1,
    Recovery,
    Perfect,
    Scaling,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a built-in synthetic dataset (and its candidate clauses).
    Synth {
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Minimum training targets for the scaling task.
        #[arg(long, default_value_t = 1000)]
        min_targets: usize,
    },
    /// Enumerate candidate clauses from the training data.
    Generate {
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long)]
        min_coverage: Option<usize>,
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Learn structure and weights from a clause file.
    Learn {
        #[arg(long, value_name = "FILE")]
        clauses: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Per-iteration objective trace (TSV).
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
        /// Score breakdown of the learned model (TSV).
        #[arg(long, value_name = "FILE")]
        scores: Option<PathBuf>,
        /// Ground clauses of the learned model (TSV).
        #[arg(long, value_name = "FILE")]
        groundings: Option<PathBuf>,
    },
    /// MAP-predict held-out targets; with --metrics also score them.
    Infer {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        metrics: Option<PathBuf>,
    },
    /// AUC of a predictions file against labels (default: the test targets).
    Eval {
        #[arg(long, value_name = "FILE")]
        predictions: PathBuf,
        #[arg(long, value_name = "FILE")]
        labels: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Runtime of both learners on growing prefixes of a clause pool (CSV).
    Bench {
        #[arg(long, value_name = "FILE")]
        clauses: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [25, 50, 100])]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Ppll,
    Gls,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ppll => Method::Ppll,
            MethodArg::Gls => Method::Gls,
        }
    }
}

impl Cli {
    /// Defaults, then the config file, then `--set`, then dedicated flags.
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut config = RunConfig::default();
        if let Some(path) = &self.common.config {
            config.apply_file(path)?;
        }
        for pair in &self.common.set {
            config.set_pair(pair)?;
        }
        if let Some(d) = &self.common.data {
            config.data = Some(d.clone());
        }
        if let Some(s) = self.common.seed {
            config.seed = s;
        }
        if let Some(t) = self.common.threads {
            config.threads = (t > 0).then_some(t);
        }
        match &self.command {
            Command::Generate {
                max_depth,
                min_coverage,
                top_k,
                ..
            } => {
                let g = &mut config.generation;
                g.max_depth = max_depth.unwrap_or(g.max_depth);
                g.min_coverage = min_coverage.unwrap_or(g.min_coverage);
                g.top_k = top_k.unwrap_or(g.top_k);
            }
            Command::Learn {
                method: Some(m), ..
            } => config.method = (*m).into(),
            _ => {}
        }
        config.validate()?;
        Ok(config)
    }
}

/// Writes to `path`, or to standard output when absent.
fn emit<F>(path: Option<&Path>, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    match path {
        Some(p) => write_file(p, |out| write(out)),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)
                .and_then(|_| lock.flush())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

/// Executes a parsed command line inside a worker pool of the configured width.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let config = cli.run_config()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::ThreadPool(e.to_string()))?;
    pool.install(|| dispatch(&cli.command, &config))
}

fn dispatch(command: &Command, config: &RunConfig) -> Result<(), CliError> {
    match command {
        Command::Synth {
            task,
            out,
            min_targets,
        } => {
            let task = match task {
                Task::Example1 => synth::SynthTask {
                    data: synth::example1(),
                    candidates: Vec::new(),
                    true_rules: Vec::new(),
                },
                Task::Recovery => synth::recovery(config.seed),
                Task::Perfect => synth::perfect_signal(config.seed),
                Task::Scaling => synth::scaling(config.seed, *min_targets),
            };
            task.data.write_dir(out).map_err(|e| CliError::io(out, e))?;
            if !task.candidates.is_empty() {
                let clauses = task
                    .candidates
                    .iter()
                    .map(|c| hlsl::PathClause::parse(c, &task.data.schema))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(hlsl::Error::from)?;
                let path = out.join("candidates.tsv");
                write_file(&path, |w| write_clauses(&clauses, w))?;
            }
            Ok(())
        }
        Command::Generate { out, .. } => {
            let db = pipeline::training_db(config)?;
            let clauses = pipeline::generate(config, &db)?;
            emit(out.as_deref(), |w| write_clauses(&clauses, w))
        }
        Command::Learn {
            clauses,
            out,
            trace,
            scores,
            groundings,
            ..
        } => {
            let db = pipeline::training_db(config)?;
            let candidates = pipeline::read_clause_file(clauses, db.schema())?;
            let outcome = pipeline::learn(config, &candidates, &db)?;
            emit(out.as_deref(), |w| {
                hlsl::model_io::write_model(&outcome.model, w)
            })?;
            if let Some(path) = trace {
                write_file(path, |w| pipeline::write_trace(&outcome.trace, w))?;
            }
            if let Some(path) = scores {
                write_file(path, |w| {
                    pipeline::write_scores(config, &outcome.model, &db, w)
                })?;
            }
            if let Some(path) = groundings {
                let ground = hlsl::Grounding::build(&outcome.model.clauses, &db);
                write_file(path, |w| ground.write_tsv(&db, w))?;
            }
            Ok(())
        }
        Command::Infer {
            model,
            out,
            metrics,
        } => {
            let start = Instant::now();
            let (db, labels) = pipeline::inference_db(config)?;
            let model = pipeline::read_model_file(model, db.schema())?;
            let predictions = pipeline::predict(config, &model, &db);
            let seconds = start.elapsed().as_secs_f64();
            emit(out.as_deref(), |w| {
                pipeline::write_predictions(&predictions, w)
            })?;
            if let Some(path) = metrics {
                let roc = pipeline::evaluate(&predictions, &labels, config.generation.threshold)?;
                write_file(path, |w| pipeline::write_metrics(&roc, seconds, w))?;
            }
            Ok(())
        }
        Command::Eval {
            predictions,
            labels,
            out,
        } => {
            let start = Instant::now();
            let preds = pipeline::load_records(predictions)?;
            let label_path = match labels {
                Some(p) => p.clone(),
                None => config.test_path()?,
            };
            let labels = pipeline::load_records(&label_path)?;
            let roc = pipeline::evaluate(&preds, &labels, config.generation.threshold)?;
            let seconds = start.elapsed().as_secs_f64();
            emit(out.as_deref(), |w| {
                pipeline::write_metrics(&roc, seconds, w)
            })
        }
        Command::Bench {
            clauses,
            counts,
            repeats,
            out,
        } => {
            let db = pipeline::training_db(config)?;
            let pool = pipeline::read_clause_file(clauses, db.schema())?;
            let rows = pipeline::bench(config, &db, &pool, counts, *repeats)?;
            emit(out.as_deref(), |w| pipeline::write_bench_csv(&rows, w))
        }
    }
}
