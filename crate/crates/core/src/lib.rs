//! Multi-metric speech quality profiling.
//!
//! A single network predicts eleven quality metrics (noise level, prosody,
//! naturalness, intelligibility and speaker similarity) from a target
//! utterance, optionally conditioned on a reference recording and a
//! reference transcription. The crate carries everything needed to train
//! and validate it at desk scale:
//!
//! - [`audio`]: WAV I/O, resampling, STFT and log-mel features
//! - [`oracle`]: SI-SNR, STOI and F0 correlation computed from signals
//! - [`bpe`]: subword tokenizer for transcriptions
//! - [`model`]: transformer encoders, cross-attention fusion, per-metric heads
//! - [`train`]: target normalization, placeholders, AdamW with warm-up
//! - [`eval`]: LCC / SRCC reports
//! - [`harness`]: manifests, synthetic corpora and the command pipeline

pub mod audio;
pub mod bpe;
mod error;
pub mod eval;
pub mod harness;
pub mod manifest;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod train;

pub use error::{Error, Result};
pub use manifest::{Manifest, UtteranceRecord};
pub use metrics::{Metric, MetricRegistry};
