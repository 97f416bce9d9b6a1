//! Interpretable glucose forecasting with a two-level-attention recurrent
//! model, plus the full pipeline around it: ingestion, training, clinical
//! metrics, and per-input contribution decomposition.

pub mod error;
pub mod interpretation;
pub mod lstm;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod synth;
pub mod tape;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use models::{Model, ModelDimensions};
pub use tensor::Tensor;
