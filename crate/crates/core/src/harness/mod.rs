//! End-user pipeline: synthetic corpus generation and the
//! synth / split / annotate / train-bpe / train / predict / evaluate steps.

mod commands;
mod config;
mod synth;

pub use commands::{
    annotate_manifest, checkpoint_paths, cmd_annotate, cmd_evaluate, cmd_predict, cmd_split, cmd_synth, cmd_train,
    cmd_train_bpe, manifest_corpus, predict,
};
pub use config::RunConfig;
pub use synth::{pseudo_labels, synth_corpus, synth_utterance, SynthUtterance, SNR_RANGE_DB};
