//! Category-aware hierarchical memory network.
//!
//! Every user owns a personal memory (one high-level vector plus one
//! low-level vector per recipe category) and every health tag owns a general
//! memory of the same shape. A recipe is scored against the personal memory
//! through its category embedding (high level) and its own embedding (low
//! level). Write operations push sampled positives and negatives into the
//! memories, and the personal memories are periodically refreshed from the
//! general memories of the user's tags.

mod item2vec;
mod mf;
mod model;
mod train;

pub use item2vec::{pretrain_item2vec, sgns_groups, Item2VecConfig, ItemEmbeddings};
pub use mf::{mf_score, mf_train, MfConfig, MfModel};
pub use model::{
    bce_loss, grad_step, loss_and_grads, refresh_personal, write_update, Hyperparams, LabeledPair, MemoryBank,
    RecipeVectors, RecommenderGrads, RecommenderModel, RecommenderOptimizer, Score, Similarity, Variant,
};
pub use train::{init_model, labeled_pairs, mean_bank, train_recommender, Trained};
