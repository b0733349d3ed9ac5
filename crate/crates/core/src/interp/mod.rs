//! Probes, logit lens, head ablation, steering and clamping over
//! [`crate::model::Model`] residual streams.

pub mod direction;
pub mod export;
pub mod heads;
pub mod lens;
pub mod probe;
pub mod prompts;
pub mod stats;
pub mod sweep;
pub mod traces;

use thiserror::Error;

use crate::game::GameError;
use crate::model::ModelError;

pub use direction::{extract_direction, mean_difference, DirectionMethod, SteeringVector};
pub use export::{PlotData, PlotKind, Series};
pub use heads::{ablation_experiment, score_opponent_heads, top_heads, AblationRow, AblationTable, HeadScore};
pub use lens::{action_distribution, find_override_layer, logit_lens, LensSeries};
pub use probe::{
    fit_logistic, probe_layers, stratified_folds, train_probe, LogisticModel, ProbeDataset, ProbeLabel, ProbeReport,
    ProbeResult,
};
pub use prompts::{contrast_prompts, random_prompts, PromptItem};
pub use sweep::{clamp_sweep, steering_sweep, SweepPoint, SweepResult};
pub use traces::{collect_all, collect_traces, PositionRule};

#[derive(Debug, Error)]
pub enum InterpError {
    #[error("labels contain a single class")]
    SingleClass,
    #[error("too few rows: smallest class has {min_class}")]
    TooFewRows { min_class: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("empty input")]
    Empty,
    #[error("prompt {0} has no opponent-action positions")]
    NoOpponentPositions(usize),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("contrast direction is degenerate (norm {0:e})")]
    DegenerateContrast(f64),
    #[error("grid must be finite and strictly increasing")]
    GridNotIncreasing,
    #[error("direction must be unit norm")]
    NotUnitVector,
    #[error("unknown plot kind '{0}'")]
    UnknownPlotKind(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
