//! The multi-metric predictor: a feature projection and transformer
//! encoder per input stream, residual cross-attention fusion of the
//! reference streams into the target stream, and mean-pool + linear heads,
//! trained with a masked L1 objective.

mod checkpoint;
mod layers;
mod loss;
mod network;
mod params;

pub use checkpoint::{Checkpoint, CheckpointMeta, CHECKPOINT_MAGIC, FORMAT_VERSION};
pub use layers::{positional_encoding, ForwardCtx};
pub use loss::{forward_backward, masked_l1_loss, BatchExample, MetricMask};
pub use network::{ForwardCache, HiddenStates, ModelConfig, ModelInput, UniVersa};
pub use params::{Gradients, ParamId, ParamStore};

#[cfg(test)]
mod tests;
