use std::collections::BTreeMap;

use log::info;
use serde::{Deserialize, Serialize};

use super::baseline::{baseline_logits, baseline_loss_and_grad, BaselineParams};
use super::model::{backward, forward, loss_from_logits, multi_hot, PredictionVector, WircnnConfig, WircnnParams};
use super::vocab::Vocab;
use crate::corpus::{TagId, UserProfile};
use crate::error::{Error, Result};
use crate::eval::{k_fold_cv, micro_macro_f1, ConfusionCounts, MetricsReport};
use crate::numerics::{adam_step, AdamConfig, AdamState, Matrix, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfilerKind {
    Wircnn,
    AvgEmbedding,
}

impl std::str::FromStr for ProfilerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wircnn" => Ok(Self::Wircnn),
            "avg-embedding" | "baseline" => Ok(Self::AvgEmbedding),
            other => Err(Error::Config(format!("unknown profiler kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProfilerWeights {
    Wircnn(WircnnParams),
    AvgEmbedding(BaselineParams),
}

impl ProfilerWeights {
    pub fn kind(&self) -> ProfilerKind {
        match self {
            Self::Wircnn(_) => ProfilerKind::Wircnn,
            Self::AvgEmbedding(_) => ProfilerKind::AvgEmbedding,
        }
    }

    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        match self {
            Self::Wircnn(p) => p.tensors(),
            Self::AvgEmbedding(p) => p.tensors(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        match self {
            Self::Wircnn(p) => p.tensors_mut(),
            Self::AvgEmbedding(p) => p.tensors_mut(),
        }
    }

    fn logits(&self, config: &WircnnConfig, tokens: &[u32]) -> Result<Vec<f64>> {
        match self {
            Self::Wircnn(p) => Ok(forward(p, config, tokens)?.1.logits),
            Self::AvgEmbedding(p) => {
                let tokens = &tokens[..tokens.len().min(config.max_len)];
                baseline_logits(&p.embedding, &p.weight, &p.bias, tokens)
            }
        }
    }

    fn loss_and_grad(&self, config: &WircnnConfig, tokens: &[u32], labels: &[f64]) -> Result<(f64, ProfilerWeights)> {
        match self {
            Self::Wircnn(p) => {
                let (_, cache) = forward(p, config, tokens)?;
                let loss = loss_from_logits(&cache.logits, labels)?;
                Ok((loss, Self::Wircnn(backward(p, config, &cache, labels)?)))
            }
            Self::AvgEmbedding(p) => {
                let tokens = &tokens[..tokens.len().min(config.max_len)];
                let (loss, g) = baseline_loss_and_grad(p, tokens, labels)?;
                Ok((loss, Self::AvgEmbedding(g)))
            }
        }
    }

    fn mark_updated(&mut self) {
        if let Self::Wircnn(p) = self {
            p.mark_updated();
        }
    }
}

/// A trained profiler with the vocabulary it was trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedProfiler {
    pub config: WircnnConfig,
    pub vocab: Vocab,
    pub weights: ProfilerWeights,
    /// Mean training loss of each epoch, measured while training.
    pub loss_trace: Vec<f64>,
}

impl TrainedProfiler {
    pub fn kind(&self) -> ProfilerKind {
        self.weights.kind()
    }

    pub fn probabilities<S: AsRef<str>>(&self, tokens: &[S]) -> Result<PredictionVector> {
        let ids = self.vocab.encode(tokens);
        Ok(PredictionVector::from_logits(&self.weights.logits(&self.config, &ids)?))
    }

    pub fn predict_tags<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<TagId>> {
        Ok(self.probabilities(tokens)?.above(self.config.threshold))
    }

    /// Mean cross-entropy over the given users.
    pub fn mean_loss(&self, users: &[&UserProfile]) -> Result<f64> {
        let mut total = 0.0;
        for u in users {
            let ids = self.vocab.encode(&u.tokens);
            let logits = self.weights.logits(&self.config, &ids)?;
            total += loss_from_logits(&logits, &multi_hot(&u.tags, self.config.n_classes))?;
        }
        Ok(total / users.len().max(1) as f64)
    }
}

struct Example {
    tokens: Vec<u32>,
    labels: Vec<f64>,
}

fn fit(
    kind: ProfilerKind,
    users: &[&UserProfile],
    config: &WircnnConfig,
    epochs: usize,
    seed: u64,
) -> Result<TrainedProfiler> {
    config.validate()?;
    if users.is_empty() {
        return Err(Error::Input("no users to train the profiler on".into()));
    }
    if let Some(bad) = users.iter().flat_map(|u| &u.tags).find(|&&t| t as usize >= config.n_classes) {
        return Err(Error::Input(format!("tag {bad} outside {} classes", config.n_classes)));
    }
    let root = RngStream::new(seed);
    let vocab = Vocab::build(users.iter().map(|u| u.tokens.as_slice()));
    let examples: Vec<Example> = users
        .iter()
        .map(|u| Example {
            tokens: vocab.encode(&u.tokens),
            labels: multi_hot(&u.tags, config.n_classes),
        })
        .collect();
    if examples.iter().any(|e| e.tokens.is_empty()) {
        return Err(Error::Input("a user has no tokens".into()));
    }

    let mut init_rng = root.fork("init");
    let mut weights = match kind {
        ProfilerKind::Wircnn => ProfilerWeights::Wircnn(WircnnParams::init(config, vocab.len(), &mut init_rng)),
        ProfilerKind::AvgEmbedding => {
            ProfilerWeights::AvgEmbedding(BaselineParams::init(config, vocab.len(), &mut init_rng))
        }
    };
    let adam = AdamConfig::with_lr(config.learning_rate);
    let mut states: Vec<AdamState> = weights
        .tensors()
        .into_iter()
        .map(|(name, m)| AdamState::for_matrix(name, m, adam))
        .collect();

    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut loss_trace = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        root.fork_indexed("epoch", epoch as u64).shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let mut acc: Option<ProfilerWeights> = None;
            for &i in batch {
                let (loss, g) = weights.loss_and_grad(config, &examples[i].tokens, &examples[i].labels)?;
                epoch_loss += loss;
                match acc.as_mut() {
                    None => acc = Some(g),
                    Some(a) => {
                        for ((_, dst), (_, src)) in a.tensors_mut().into_iter().zip(g.tensors()) {
                            dst.add_scaled(1.0, src)?;
                        }
                    }
                }
            }
            let mut acc = acc.expect("non-empty batch");
            for ((_, param), ((_, grad), state)) in
                weights.tensors_mut().into_iter().zip(acc.tensors_mut().into_iter().zip(&mut states))
            {
                grad.scale(scale);
                adam_step(param, grad, state)?;
            }
            weights.mark_updated();
        }
        let mean = epoch_loss / examples.len() as f64;
        info!("profiler {kind:?} epoch {epoch}: loss {mean:.5}");
        loss_trace.push(mean);
    }
    Ok(TrainedProfiler {
        config: config.clone(),
        vocab,
        weights,
        loss_trace,
    })
}

/// Trains the word-class interaction network with mini-batch Adam.
pub fn train_profiler(users: &[&UserProfile], config: &WircnnConfig, epochs: usize, seed: u64) -> Result<TrainedProfiler> {
    fit(ProfilerKind::Wircnn, users, config, epochs, seed)
}

/// Trains the averaged-embedding classifier with the same optimizer settings.
pub fn train_baseline(users: &[&UserProfile], config: &WircnnConfig, epochs: usize, seed: u64) -> Result<TrainedProfiler> {
    fit(ProfilerKind::AvgEmbedding, users, config, epochs, seed)
}

pub fn train_kind(
    kind: ProfilerKind,
    users: &[&UserProfile],
    config: &WircnnConfig,
    epochs: usize,
    seed: u64,
) -> Result<TrainedProfiler> {
    fit(kind, users, config, epochs, seed)
}

/// Micro/macro scores of `profiler` on `users`.
pub fn score_profiler(profiler: &TrainedProfiler, users: &[&UserProfile]) -> Result<BTreeMap<String, f64>> {
    let mut counts = ConfusionCounts::new(profiler.config.n_classes);
    for u in users {
        counts.add(&u.tags, &profiler.predict_tags(&u.tokens)?);
    }
    let f1 = micro_macro_f1(&counts)?;
    Ok(BTreeMap::from([
        ("micro_p".to_string(), f1.micro_p),
        ("micro_r".to_string(), f1.micro_r),
        ("micro_f1".to_string(), f1.micro_f1),
        ("macro_f1".to_string(), f1.macro_f1),
    ]))
}

/// k-fold cross validation over users. Fold `f` trains with a seed derived
/// from `seed` and `f`, so both profiler kinds see the same folds.
pub fn cross_validate_profiler(
    kind: ProfilerKind,
    users: &[UserProfile],
    config: &WircnnConfig,
    epochs: usize,
    folds: usize,
    seed: u64,
) -> Result<MetricsReport> {
    let root = RngStream::new(seed);
    k_fold_cv(users.len(), folds, seed, |f, train, test| {
        let train: Vec<&UserProfile> = train.iter().map(|&i| &users[i]).collect();
        let test: Vec<&UserProfile> = test.iter().map(|&i| &users[i]).collect();
        let model = fit(kind, &train, config, epochs, root.derive_seed("fold", f as u64))?;
        score_profiler(&model, &test)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, GeneratorConfig};

    fn small_corpus(signal: f64) -> crate::corpus::Corpus {
        let cfg = GeneratorConfig {
            n_users: 120,
            n_tags: 4,
            tokens_min: 20,
            tokens_max: 30,
            signal_strength: signal,
            ..GeneratorConfig::desk()
        };
        generate_synthetic(&cfg, 3).unwrap()
    }

    fn small_config() -> WircnnConfig {
        WircnnConfig {
            embed_dim: 8,
            hidden: 6,
            max_len: 40,
            filters_per_width: 4,
            learning_rate: 0.01,
            ..WircnnConfig::desk(4)
        }
    }

    #[test]
    fn training_lowers_loss_and_is_deterministic() {
        let corpus = small_corpus(0.9);
        let users: Vec<&UserProfile> = corpus.users.iter().collect();
        let a = train_profiler(&users, &small_config(), 5, 11).unwrap();
        assert!(a.loss_trace.last() < a.loss_trace.first(), "{:?}", a.loss_trace);
        let b = train_profiler(&users, &small_config(), 5, 11).unwrap();
        assert_eq!(a.weights, b.weights);
        let c = train_profiler(&users, &small_config(), 5, 12).unwrap();
        assert_ne!(a.weights, c.weights);
    }

    #[test]
    fn baseline_trains_too() {
        let corpus = small_corpus(0.9);
        let users: Vec<&UserProfile> = corpus.users.iter().collect();
        let m = train_baseline(&users, &small_config(), 5, 1).unwrap();
        assert_eq!(m.kind(), ProfilerKind::AvgEmbedding);
        assert!(m.loss_trace.last() < m.loss_trace.first());
    }

    #[test]
    fn empty_training_set_is_an_input_error() {
        assert!(matches!(train_profiler(&[], &small_config(), 1, 0), Err(Error::Input(_))));
    }

    #[test]
    fn unknown_tokens_map_to_reserved_id() {
        let corpus = small_corpus(0.9);
        let users: Vec<&UserProfile> = corpus.users.iter().take(10).collect();
        let m = train_profiler(&users, &small_config(), 1, 0).unwrap();
        let p = m.probabilities(&["never-seen-token"]).unwrap();
        assert_eq!(p.len(), 4);
    }
}
