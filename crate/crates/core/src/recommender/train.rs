use log::info;

use super::item2vec::ItemEmbeddings;
use super::model::{grad_step, Hyperparams, LabeledPair, MemoryBank, RecommenderModel, RecommenderOptimizer, Variant};
use crate::corpus::{Corpus, InteractionSet};
use crate::error::{Error, Result};
use crate::numerics::{axpy, Matrix, RngStream};

/// A trained model with its per-epoch mean training loss.
#[derive(Clone, Debug, PartialEq)]
pub struct Trained<M> {
    pub model: M,
    pub loss_trace: Vec<f64>,
}

/// All training pairs, users in id order, positives before negatives.
pub fn labeled_pairs(interactions: &InteractionSet) -> Vec<LabeledPair> {
    let mut pairs = Vec::with_capacity(interactions.n_pairs());
    for u in &interactions.users {
        pairs.extend(u.pos.iter().map(|&r| LabeledPair::positive(u.user, r)));
        pairs.extend(u.neg.iter().map(|&r| LabeledPair::negative(u.user, r)));
    }
    pairs
}

fn check_interactions(corpus: &Corpus, interactions: &InteractionSet) -> Result<()> {
    if interactions.n_pairs() == 0 {
        return Err(Error::Input("no training interactions".into()));
    }
    for u in &interactions.users {
        if u.user as usize >= corpus.users.len() {
            return Err(Error::Input(format!("interaction for unknown user {}", u.user)));
        }
        if let Some(r) = u.pos.iter().chain(&u.neg).find(|&&r| r as usize >= corpus.recipes.len()) {
            return Err(Error::Input(format!("interaction for unknown recipe {r}")));
        }
    }
    Ok(())
}

/// Random or pretrained personal memories and recipe tables; tag memories
/// start as the mean of their users' personal memories.
pub fn init_model(
    corpus: &Corpus,
    hyper: &Hyperparams,
    rng: &mut RngStream,
    pretrained: Option<&ItemEmbeddings>,
) -> Result<RecommenderModel> {
    hyper.validate()?;
    let mut model = RecommenderModel::zeros(corpus, hyper.clone());
    let (nc, e, s) = (corpus.n_categories, hyper.dim, hyper.init_scale);
    match pretrained {
        None => {
            for bank in &mut model.personal {
                bank.high = Matrix::uniform(1, e, -s, s, rng);
                bank.low = Matrix::uniform(nc, e, -s, s, rng);
            }
            model.vectors.recipe = Matrix::uniform(corpus.recipes.len(), e, -s, s, rng);
            model.vectors.category = Matrix::uniform(nc, e, -s, s, rng);
        }
        Some(emb) => {
            if emb.users.shape() != (corpus.users.len(), e) || emb.recipes.shape() != (corpus.recipes.len(), e) {
                return Err(Error::Shape {
                    op: "pretrained embeddings",
                    left: format!("users {} recipes {}", emb.users.shape_str(), emb.recipes.shape_str()),
                    right: format!("{}x{e} and {}x{e}", corpus.users.len(), corpus.recipes.len()),
                });
            }
            for (u, bank) in model.personal.iter_mut().enumerate() {
                let v = emb.users.row(u);
                bank.high.data_mut().copy_from_slice(v);
                for c in 0..nc {
                    bank.low.row_mut(c).copy_from_slice(v);
                }
            }
            model.vectors.recipe = emb.recipes.clone();
            let mut counts = vec![0usize; nc];
            for r in &corpus.recipes {
                for &c in &r.categories {
                    counts[c as usize] += 1;
                    axpy(model.vectors.category.row_mut(c as usize), 1.0, emb.recipes.row(r.id as usize));
                }
            }
            for (c, &n) in counts.iter().enumerate() {
                if n > 0 {
                    model.vectors.category.row_mut(c).iter_mut().for_each(|x| *x /= n as f64);
                }
            }
        }
    }
    let mut members = vec![0usize; corpus.tags.len()];
    for u in &corpus.users {
        for &t in &u.tags {
            members[t as usize] += 1;
            let (g, p) = (&mut model.general[t as usize], &model.personal[u.id as usize]);
            axpy(g.high.data_mut(), 1.0, p.high.data());
            axpy(g.low.data_mut(), 1.0, p.low.data());
        }
    }
    for (g, &n) in model.general.iter_mut().zip(&members) {
        if n > 0 {
            g.high.scale(1.0 / n as f64);
            g.low.scale(1.0 / n as f64);
        }
    }
    Ok(model)
}

/// Each epoch: Adam steps over shuffled mini-batches of all training pairs,
/// then one write per user for a sampled positive and a sampled negative,
/// then a refresh of every personal memory from its tags' memories.
pub fn train_recommender(
    corpus: &Corpus,
    interactions: &InteractionSet,
    hyper: &Hyperparams,
    epochs: usize,
    seed: u64,
    pretrained: Option<&ItemEmbeddings>,
) -> Result<Trained<RecommenderModel>> {
    check_interactions(corpus, interactions)?;
    let root = RngStream::new(seed);
    let mut model = init_model(corpus, hyper, &mut root.fork("init"), pretrained)?;
    let mut opt = RecommenderOptimizer::new(&model);
    let mut pairs = labeled_pairs(interactions);
    let mut loss_trace = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        root.fork_indexed("epoch", epoch as u64).shuffle(&mut pairs);
        let mut total = 0.0;
        for batch in pairs.chunks(hyper.batch_size) {
            total += grad_step(&mut model, batch, &mut opt)? * batch.len() as f64;
        }
        loss_trace.push(total / pairs.len() as f64);

        let mut rng = root.fork_indexed("write", epoch as u64);
        for u in &interactions.users {
            if !u.pos.is_empty() {
                model.write_pair(&LabeledPair::positive(u.user, u.pos[rng.below(u.pos.len())]))?;
            }
            if !u.neg.is_empty() {
                model.write_pair(&LabeledPair::negative(u.user, u.neg[rng.below(u.neg.len())]))?;
            }
        }
        if hyper.variant != Variant::NoGeneralMemory {
            for user in 0..model.n_users() as u32 {
                model.refresh_user(user)?;
            }
        }
        if !model.is_finite() {
            return Err(Error::NonFinite(format!("recommender parameters after epoch {epoch}")));
        }
        info!("recommender epoch {epoch}: loss {:.5}", loss_trace[epoch]);
    }
    Ok(Trained { model, loss_trace })
}

/// Mean of `banks`, or zeros when empty.
pub fn mean_bank(banks: &[&MemoryBank], n_categories: usize, dim: usize) -> MemoryBank {
    let mut out = MemoryBank::zeros(n_categories, dim);
    if banks.is_empty() {
        return out;
    }
    let w = 1.0 / banks.len() as f64;
    for b in banks {
        axpy(out.high.data_mut(), w, b.high.data());
        axpy(out.low.data_mut(), w, b.low.data());
    }
    out
}
