//! Chart grounding toolkit.
//!
//! Traces instrumented plotting scripts into per-primitive masks, labels
//! them with a fine-grained element taxonomy, resolves referring-target
//! requests into ground truth, and scores grounding predictions.

pub mod bitmap;
pub mod dataset;
pub mod eval;
pub mod mask;
pub mod som;
pub mod targets;
pub mod tracer;

use thiserror::Error;

pub use bitmap::Bitmap;
pub use dataset::{DatasetBundle, DatasetError, RleMask};
pub use eval::EvalError;
pub use mask::{ElementCategory, Granularity, InstanceMask, MaskError};
pub use som::SomError;
pub use targets::{GroundingSample, PredictionSet, ResolveError};
pub use tracer::{RunConfig, TraceError, TracedScene};

/// Any toolkit failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Som(#[from] SomError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for bad input (malformed files, schema or reference errors), as
    /// opposed to failures while running something.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Trace(e) => !matches!(
                e,
                TraceError::ExecTimeout { .. }
                    | TraceError::ScriptError(_)
                    | TraceError::Harness(_)
                    | TraceError::Io(_)
            ),
            Error::Mask(_) | Error::Resolve(_) | Error::Json(_) => true,
            Error::Dataset(e) => !matches!(e, DatasetError::Io(_) | DatasetError::Image(_)),
            Error::Eval(e) => !matches!(e, EvalError::Io(_)),
            Error::Som(e) => !matches!(e, SomError::ClientFailure { .. }),
            Error::Io(_) => false,
        }
    }
}
