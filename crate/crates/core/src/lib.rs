//! Structure learning for hinge-loss Markov random fields.
//!
//! Pipeline: load relational data ([`data`]), enumerate path-constrained
//! candidate clauses ([`clausegen`]), ground them ([`grounding`]), score with
//! the (piecewise) pseudolikelihood ([`scoring`]), learn structure and weights
//! ([`learning`]), then predict held-out targets by MAP inference
//! ([`inference`]) and evaluate ([`eval`]).
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix it to `f64`.

pub mod clause;
pub mod clausegen;
pub mod data;
pub mod dataset;
pub mod eval;
pub mod grounding;
pub mod inference;
pub mod learning;
pub mod model_io;
pub mod profile;
pub mod scalar;
pub mod scoring;
pub mod synth;

use thiserror::Error;

pub use clause::{ClauseError, PathClause};
pub use clausegen::{generate_candidates, GenerationConfig, GenerationError};
pub use data::{AtomDatabase, AtomId, AtomRecord, DataError, Role, Schema};
pub use dataset::Dataset;
pub use eval::{auc_roc, EvalError, RocResult};
pub use grounding::{Exponent, GroundClause, Grounding};
pub use inference::{map_infer, MapConfig, MapSolution};
pub use learning::{
    gls_structure_learn, learn_weights, ppll_structure_learn, LearnConfig, LearnError,
    LearnOutcome, Objective, WeightedModel,
};
pub use model_io::ModelIoError;
pub use profile::{Hinge, PiecewiseProfile};
pub use scalar::Real;
pub use scoring::{Conditionals, ScoreReport};

pub type Database = AtomDatabase<f64>;
pub type Model = WeightedModel<f64>;
pub type Profile = PiecewiseProfile<f64>;
pub type Conditional = Conditionals<f64>;

/// Any error raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Clause(#[from] ClauseError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    ModelIo(#[from] ModelIoError),
    #[error(transparent)]
    Grounding(#[from] grounding::GroundingError),
}

impl Error {
    /// Stable machine-readable name of the failure.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Data(e) => e.code(),
            Error::Clause(_) => "MalformedClause",
            Error::Generation(GenerationError::NoCandidates) => "NoCandidates",
            Error::Generation(GenerationError::InvalidConfig(_)) => "InvalidConfig",
            Error::Learn(LearnError::NoCandidates) => "NoCandidates",
            Error::Learn(LearnError::NonFiniteObjective { .. }) => "NonFiniteObjective",
            Error::Learn(LearnError::InvalidConfig(_)) => "InvalidConfig",
            Error::Learn(LearnError::ShapeMismatch { .. }) => "ShapeMismatch",
            Error::Eval(EvalError::DegenerateLabels { .. }) => "DegenerateLabels",
            Error::Eval(_) => "InvalidScores",
            Error::ModelIo(e) => e.code(),
            Error::Grounding(_) => "MissingAssignment",
        }
    }
}
