//! Matrix factorisation baseline: `σ(p_u · q_i)` trained with Adam on BCE.

use log::info;
use serde::{Deserialize, Serialize};

use super::model::LabeledPair;
use super::train::{labeled_pairs, Trained};
use crate::corpus::{Corpus, InteractionSet, RecipeId, UserId};
use crate::error::{Error, Result};
use crate::eval::Scorer;
use crate::numerics::{adam_step, axpy, dot, log_sigmoid, sigmoid, AdamConfig, AdamState, Matrix, RngStream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfConfig {
    pub dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub init_scale: f64,
}

impl Default for MfConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            learning_rate: 0.003,
            batch_size: 128,
            init_scale: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MfModel {
    pub users: Matrix,
    pub recipes: Matrix,
}

impl MfModel {
    pub fn zeros(n_users: usize, n_recipes: usize, dim: usize) -> Self {
        Self {
            users: Matrix::zeros(n_users, dim),
            recipes: Matrix::zeros(n_recipes, dim),
        }
    }

    pub fn raw(&self, user: UserId, recipe: RecipeId) -> Result<f64> {
        if user as usize >= self.users.rows() || recipe as usize >= self.recipes.rows() {
            return Err(Error::Input(format!("unknown user {user} or recipe {recipe}")));
        }
        Ok(dot(self.users.row(user as usize), self.recipes.row(recipe as usize)))
    }

    pub fn prob(&self, user: UserId, recipe: RecipeId) -> Result<f64> {
        Ok(sigmoid(self.raw(user, recipe)?))
    }

    pub fn loss(&self, batch: &[LabeledPair]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Input("empty batch".into()));
        }
        let mut total = 0.0;
        for p in batch {
            let z = self.raw(p.user, p.recipe)?;
            total -= if p.label { log_sigmoid(z) } else { log_sigmoid(-z) };
        }
        Ok(total / batch.len() as f64)
    }

    /// Loss and gradients w.r.t. the user and recipe tables.
    pub fn loss_and_grads(&self, batch: &[LabeledPair]) -> Result<(f64, MfModel)> {
        let loss = self.loss(batch)?;
        let mut g = MfModel::zeros(self.users.rows(), self.recipes.rows(), self.users.cols());
        let n = batch.len() as f64;
        for p in batch {
            let (u, r) = (p.user as usize, p.recipe as usize);
            let d = (sigmoid(self.raw(p.user, p.recipe)?) - if p.label { 1.0 } else { 0.0 }) / n;
            axpy(g.users.row_mut(u), d, self.recipes.row(r));
            axpy(g.recipes.row_mut(r), d, self.users.row(u));
        }
        Ok((loss, g))
    }
}

impl Scorer for MfModel {
    fn score(&self, user: UserId, recipe: RecipeId) -> Result<f64> {
        self.raw(user, recipe)
    }
}

pub fn mf_train(
    corpus: &Corpus,
    interactions: &InteractionSet,
    config: &MfConfig,
    epochs: usize,
    seed: u64,
) -> Result<Trained<MfModel>> {
    if config.dim == 0 || config.batch_size == 0 {
        return Err(Error::Config("MF dim and batch_size must be positive".into()));
    }
    if interactions.n_pairs() == 0 {
        return Err(Error::Input("no training interactions".into()));
    }
    let root = RngStream::new(seed);
    let mut init = root.fork("init");
    let s = config.init_scale;
    let mut model = MfModel {
        users: Matrix::uniform(corpus.users.len(), config.dim, -s, s, &mut init),
        recipes: Matrix::uniform(corpus.recipes.len(), config.dim, -s, s, &mut init),
    };
    let adam = AdamConfig::with_lr(config.learning_rate);
    let mut su = AdamState::for_matrix("mf.users", &model.users, adam);
    let mut sr = AdamState::for_matrix("mf.recipes", &model.recipes, adam);
    let mut pairs = labeled_pairs(interactions);
    let mut loss_trace = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        root.fork_indexed("epoch", epoch as u64).shuffle(&mut pairs);
        let mut total = 0.0;
        for batch in pairs.chunks(config.batch_size) {
            let (loss, g) = model.loss_and_grads(batch)?;
            total += loss * batch.len() as f64;
            adam_step(&mut model.users, &g.users, &mut su)?;
            adam_step(&mut model.recipes, &g.recipes, &mut sr)?;
        }
        loss_trace.push(total / pairs.len() as f64);
        info!("mf epoch {epoch}: loss {:.5}", loss_trace[epoch]);
    }
    Ok(Trained { model, loss_trace })
}

/// Raw scores of `candidates` for `user`.
pub fn mf_score(model: &MfModel, user: UserId, candidates: &[RecipeId]) -> Result<Vec<f64>> {
    candidates.iter().map(|&r| model.raw(user, r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_check;

    #[test]
    fn zero_embeddings_give_one_half() {
        let m = MfModel::zeros(3, 4, 2);
        assert_eq!(m.prob(2, 3).unwrap(), 0.5);
        assert!(m.raw(3, 0).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = RngStream::new(3);
        let m = MfModel {
            users: Matrix::uniform(3, 4, -1.0, 1.0, &mut rng),
            recipes: Matrix::uniform(5, 4, -1.0, 1.0, &mut rng),
        };
        let batch = [
            LabeledPair::positive(0, 1),
            LabeledPair::negative(0, 2),
            LabeledPair::positive(2, 4),
            LabeledPair::negative(1, 1),
        ];
        let (_, g) = m.loss_and_grads(&batch).unwrap();
        let report = grad_check(
            |ps| {
                MfModel {
                    users: ps[0].clone(),
                    recipes: ps[1].clone(),
                }
                .loss(&batch)
            },
            &[m.users.clone(), m.recipes.clone()],
            &["users".into(), "recipes".into()],
            &[g.users, g.recipes],
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(report.passed(), "{report:#?}");
    }
}
