//! Health-tag profiling from a user's token stream.
//!
//! The main model embeds the tokens, matches each against every class
//! embedding, runs a bidirectional GRU over the re-weighted embeddings, and
//! pools multi-width convolutions into a text feature that is scored against
//! the re-weighted class embeddings. An averaged-embedding classifier serves
//! as the baseline.

mod baseline;
mod gru;
mod interaction;
mod model;
mod train;
mod vocab;

pub use baseline::{baseline_avg_forward, baseline_logits, baseline_loss_and_grad, BaselineParams};
pub use gru::{GruParams, GruTrace};
pub use interaction::{interact, interact_backward, route_max_grad, InteractionState};
pub use model::{
    backward, forward, loss, loss_from_logits, multi_hot, predict_tags, ConvBank, ForwardCache, PredictionVector,
    WircnnConfig, WircnnParams, PROB_EPS,
};
pub use train::{
    cross_validate_profiler, score_profiler, train_baseline, train_kind, train_profiler, ProfilerKind,
    ProfilerWeights, TrainedProfiler,
};
pub use vocab::{Vocab, PAD_ID, PAD_TOKEN, UNK_ID, UNK_TOKEN};
