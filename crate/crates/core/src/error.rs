use thiserror::Error;

use crate::adjust::AdjustError;
use crate::design::DesignError;
use crate::estimate::EstimateError;
use crate::frame::FrameError;
use crate::glm::GlmError;
use crate::pool::PoolError;
use crate::sim::SimError;

/// Umbrella error for callers that drive several stages of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Adjust(#[from] AdjustError),
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
