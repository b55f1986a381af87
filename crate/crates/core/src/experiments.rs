//! Repeated leave-one-out comparisons of the recommenders. Run `r` of an
//! experiment under `seed` always uses the same split and the same model
//! seed, whichever model is being evaluated, so reports line up run by run.

use crate::corpus::{Corpus, Split};
use crate::error::Result;
use crate::eval::{evaluate_recommender, run_split_seed, MetricsReport};
use crate::numerics::RngStream;
use crate::recommender::{
    mf_train, pretrain_item2vec, train_recommender, Hyperparams, Item2VecConfig, ItemEmbeddings, MfConfig, Variant,
};

pub const DEFAULT_EPOCHS: usize = 30;

/// Seed of the leave-one-out split of run `run`.
pub fn split_seed(seed: u64, run: usize) -> u64 {
    run_split_seed(&RngStream::new(seed), run)
}

/// Seed used to initialise and train the model of run `run`.
pub fn model_seed(seed: u64, run: usize) -> u64 {
    RngStream::new(seed).derive_seed("model", run as u64)
}

/// Seed of the item2vec pre-training shared by every run.
pub fn item2vec_seed(seed: u64) -> u64 {
    RngStream::new(seed).derive_seed("item2vec", 0)
}

pub fn evaluate_memory(
    corpus: &Corpus,
    hyper: &Hyperparams,
    epochs: usize,
    runs: usize,
    seed: u64,
    pretrained: Option<&ItemEmbeddings>,
) -> Result<MetricsReport> {
    evaluate_recommender(&corpus.interactions, runs, seed, |run, split: &Split| {
        Ok(train_recommender(corpus, &split.train, hyper, epochs, model_seed(seed, run), pretrained)?.model)
    })
}

pub fn evaluate_mf(corpus: &Corpus, config: &MfConfig, epochs: usize, runs: usize, seed: u64) -> Result<MetricsReport> {
    evaluate_recommender(&corpus.interactions, runs, seed, |run, split: &Split| {
        Ok(mf_train(corpus, &split.train, config, epochs, model_seed(seed, run))?.model)
    })
}

/// `{none, item2vec}` initialisation × every variant, named `init/variant`.
pub fn ablate(
    corpus: &Corpus,
    hyper: &Hyperparams,
    item2vec: &Item2VecConfig,
    epochs: usize,
    runs: usize,
    seed: u64,
) -> Result<Vec<(String, MetricsReport)>> {
    let emb = pretrain_item2vec(corpus, &Item2VecConfig { dim: hyper.dim, ..item2vec.clone() }, item2vec_seed(seed))?;
    let mut out = Vec::with_capacity(2 * Variant::ALL.len());
    for (init, pretrained) in [("none", None), ("item2vec", Some(&emb))] {
        for variant in Variant::ALL {
            let h = Hyperparams { variant, ..hyper.clone() };
            let report = evaluate_memory(corpus, &h, epochs, runs, seed, pretrained)?;
            out.push((format!("{init}/{}", variant.name()), report));
        }
    }
    Ok(out)
}
