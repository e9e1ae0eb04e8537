//! Flat `key=value` run configuration.
//!
//! Precedence: built-in defaults, then the config file, then command-line
//! flags (including `--set key=value`).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hlsl::dataset::{OBSERVED_FILE, SCHEMA_FILE, TEST_FILE, TRAIN_FILE};
use hlsl::{Exponent, GenerationConfig, LearnConfig, MapConfig};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Ppll,
    Gls,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ppll" => Ok(Method::Ppll),
            "gls" => Ok(Method::Gls),
            _ => Err(format!("unknown method `{s}` (expected ppll or gls)")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ppll => "ppll",
            Method::Gls => "gls",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Directory holding the four standard data files.
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub observed: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub generation: GenerationConfig,
    pub learning: LearnConfig,
    pub map: MapConfig,
    pub method: Method,
    pub seed: u64,
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
    /// Negatives kept per training positive; infinity keeps all.
    pub neg_ratio: f64,
    /// Leave training labels out of the inference database.
    pub strict: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            schema: None,
            observed: None,
            train: None,
            test: None,
            generation: GenerationConfig::default(),
            learning: LearnConfig::default(),
            map: MapConfig::default(),
            method: Method::Ppll,
            seed: 0,
            threads: None,
            neg_ratio: 1.0,
            strict: false,
        }
    }
}

/// Every key accepted by [`RunConfig::set`].
pub const KEYS: &[&str] = &[
    "data",
    "schema",
    "observed",
    "train",
    "test",
    "method",
    "seed",
    "threads",
    "neg_ratio",
    "strict",
    "max_depth",
    "min_coverage",
    "top_k",
    "threshold",
    "include_inverses",
    "negative_priors",
    "traverse_targets",
    "step_size",
    "tolerance",
    "max_iters",
    "w_max",
    "l2_sigma",
    "exponent",
    "init_weight",
    "zero_tol",
    "gls_outer_iters",
    "gls_inner_iters",
    "map_sweeps",
    "map_tolerance",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| CliError::Config {
        key: key.to_string(),
        message: format!("cannot parse `{value}`"),
    })
}

impl RunConfig {
    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        let g = &mut self.generation;
        let l = &mut self.learning;
        match key {
            "data" => self.data = Some(value.into()),
            "schema" => self.schema = Some(value.into()),
            "observed" => self.observed = Some(value.into()),
            "train" => self.train = Some(value.into()),
            "test" => self.test = Some(value.into()),
            "method" => {
                self.method = value.parse().map_err(|message| CliError::Config {
                    key: key.to_string(),
                    message,
                })?
            }
            "seed" => self.seed = parse(key, value)?,
            "threads" => {
                let n: usize = parse(key, value)?;
                self.threads = (n > 0).then_some(n);
            }
            "neg_ratio" => self.neg_ratio = parse(key, value)?,
            "strict" => self.strict = parse(key, value)?,
            "max_depth" => g.max_depth = parse(key, value)?,
            "min_coverage" => g.min_coverage = parse(key, value)?,
            "top_k" => g.top_k = parse(key, value)?,
            "threshold" => g.threshold = parse(key, value)?,
            "include_inverses" => g.include_inverses = parse(key, value)?,
            "negative_priors" => g.add_negative_priors = parse(key, value)?,
            "traverse_targets" => g.traverse_targets = parse(key, value)?,
            "step_size" => l.step_size = parse(key, value)?,
            "tolerance" => l.tolerance = parse(key, value)?,
            "max_iters" => l.max_iters = parse(key, value)?,
            "w_max" => l.w_max = parse(key, value)?,
            "l2_sigma" => l.l2_sigma = parse(key, value)?,
            "exponent" => {
                let p: u32 = parse(key, value)?;
                let e = Exponent::from_power(p).ok_or_else(|| CliError::Config {
                    key: key.to_string(),
                    message: "exponent must be 1 or 2".to_string(),
                })?;
                l.exponent = e;
                self.map.exponent = e;
            }
            "init_weight" => l.init_weight = parse(key, value)?,
            "zero_tol" => l.zero_tol = parse(key, value)?,
            "gls_outer_iters" => l.gls_outer_iters = parse(key, value)?,
            "gls_inner_iters" => l.gls_inner_iters = parse(key, value)?,
            "map_sweeps" => self.map.max_sweeps = parse(key, value)?,
            "map_tolerance" => self.map.tolerance = parse(key, value)?,
            _ => {
                return Err(CliError::Config {
                    key: key.to_string(),
                    message: "unknown key".to_string(),
                })
            }
        }
        Ok(())
    }

    /// Applies a `key=value` assignment.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = pair.split_once('=').ok_or_else(|| CliError::Config {
            key: pair.to_string(),
            message: "expected key=value".to_string(),
        })?;
        self.set(k.trim(), v)
    }

    /// Applies a config file: one `key=value` per line, `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or_default().trim();
            if !line.is_empty() {
                self.set_pair(line)?;
            }
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.generation.validate().map_err(hlsl::Error::from)?;
        self.learning.validate().map_err(hlsl::Error::from)?;
        if self.neg_ratio.is_nan() || self.neg_ratio < 0.0 {
            return Err(CliError::Config {
                key: "neg_ratio".to_string(),
                message: "must be >= 0".to_string(),
            });
        }
        Ok(())
    }

    fn resolve(
        &self,
        explicit: &Option<PathBuf>,
        key: &'static str,
        file: &str,
    ) -> Result<PathBuf, CliError> {
        explicit
            .clone()
            .or_else(|| self.data.as_ref().map(|d| d.join(file)))
            .ok_or(CliError::MissingPath(key))
    }

    pub fn schema_path(&self) -> Result<PathBuf, CliError> {
        self.resolve(&self.schema, "schema", SCHEMA_FILE)
    }

    pub fn observed_path(&self) -> Result<PathBuf, CliError> {
        self.resolve(&self.observed, "observed", OBSERVED_FILE)
    }

    pub fn train_path(&self) -> Result<PathBuf, CliError> {
        self.resolve(&self.train, "train", TRAIN_FILE)
    }

    pub fn test_path(&self) -> Result<PathBuf, CliError> {
        self.resolve(&self.test, "test", TEST_FILE)
    }
}
