//! Skip-gram with negative sampling over item groups: users sharing a health
//! tag form one group, recipes sharing a category another.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::numerics::{axpy, dot, sigmoid, Matrix, RngStream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemEmbeddings {
    /// n_users × E
    pub users: Matrix,
    /// n_recipes × E
    pub recipes: Matrix,
}

impl ItemEmbeddings {
    pub fn dim(&self) -> usize {
        self.users.cols()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Item2VecConfig {
    pub dim: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub learning_rate: f64,
}

impl Default for Item2VecConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            epochs: 20,
            negatives: 5,
            learning_rate: 0.025,
        }
    }
}

/// Trains on explicit groups of item ids over a table of `n_items`. Returns
/// the input-side vectors.
pub fn sgns_groups(groups: &[Vec<usize>], n_items: usize, config: &Item2VecConfig, seed: u64) -> Result<Matrix> {
    if config.dim == 0 || n_items == 0 {
        return Err(Error::Config("item2vec needs a positive dimension and at least one item".into()));
    }
    let root = RngStream::new(seed);
    let bound = 0.5 / config.dim as f64;
    let mut input = Matrix::uniform(n_items, config.dim, -bound, bound, &mut root.fork("init"));
    let mut output = Matrix::zeros(n_items, config.dim);
    let usable: Vec<&Vec<usize>> = groups
        .iter()
        .enumerate()
        .filter_map(|(i, g)| {
            if g.len() < 2 {
                warn!("item2vec group {i} has {} member(s); skipped", g.len());
                None
            } else {
                Some(g)
            }
        })
        .collect();
    if let Some(bad) = groups.iter().flatten().find(|&&i| i >= n_items) {
        return Err(Error::Input(format!("item {bad} outside table of {n_items}")));
    }
    let lr = config.learning_rate;
    let mut grad_in = vec![0.0; config.dim];
    for epoch in 0..config.epochs {
        let mut rng = root.fork_indexed("epoch", epoch as u64);
        for group in &usable {
            for (pos, &center) in group.iter().enumerate() {
                let mut other = rng.below(group.len() - 1);
                if other >= pos {
                    other += 1;
                }
                let context = group[other];
                grad_in.iter_mut().for_each(|g| *g = 0.0);
                let mut targets = Vec::with_capacity(config.negatives + 1);
                targets.push((context, 1.0));
                for _ in 0..config.negatives {
                    targets.push((rng.below(n_items), 0.0));
                }
                for (target, label) in targets {
                    let g = lr * (label - sigmoid(dot(input.row(center), output.row(target))));
                    axpy(&mut grad_in, g, output.row(target));
                    let center_vec = input.row(center).to_vec();
                    axpy(output.row_mut(target), g, &center_vec);
                }
                axpy(input.row_mut(center), 1.0, &grad_in);
            }
        }
    }
    if !input.is_finite() {
        return Err(Error::NonFinite("item2vec embeddings".into()));
    }
    Ok(input)
}

/// Users and recipes share one table (users first); every tag's user set and
/// every category's recipe set is a context group, and negatives are drawn
/// from the whole table.
pub fn pretrain_item2vec(corpus: &Corpus, config: &Item2VecConfig, seed: u64) -> Result<ItemEmbeddings> {
    let n_users = corpus.users.len();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); corpus.tags.len() + corpus.n_categories];
    for u in &corpus.users {
        for &t in &u.tags {
            groups[t as usize].push(u.id as usize);
        }
    }
    for r in &corpus.recipes {
        for &c in &r.categories {
            groups[corpus.tags.len() + c as usize].push(n_users + r.id as usize);
        }
    }
    if groups.iter().all(|g| g.len() < 2) {
        return Err(Error::Input("no item2vec group has two members".into()));
    }
    let table = sgns_groups(&groups, n_users + corpus.recipes.len(), config, seed)?;
    let dim = config.dim;
    let users = Matrix::from_vec(n_users, dim, table.data()[..n_users * dim].to_vec())?;
    let recipes = Matrix::from_vec(corpus.recipes.len(), dim, table.data()[n_users * dim..].to_vec())?;
    Ok(ItemEmbeddings { users, recipes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::norm_sq;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        dot(a, b) / (norm_sq(a).sqrt() * norm_sq(b).sqrt())
    }

    #[test]
    fn planted_groups_separate() {
        let groups = vec![(0..10).collect::<Vec<_>>(), (10..20).collect()];
        let cfg = Item2VecConfig { dim: 8, epochs: 200, negatives: 3, ..Item2VecConfig::default() };
        let m = sgns_groups(&groups, 20, &cfg, 5).unwrap();
        let (mut within, mut nw, mut cross, mut nc) = (0.0, 0, 0.0, 0);
        for a in 0..20 {
            for b in (a + 1)..20 {
                let c = cosine(m.row(a), m.row(b));
                if (a < 10) == (b < 10) {
                    within += c;
                    nw += 1;
                } else {
                    cross += c;
                    nc += 1;
                }
            }
        }
        let (within, cross) = (within / nw as f64, cross / nc as f64);
        assert!(within > cross, "within {within} cross {cross}");
    }

    #[test]
    fn zero_epochs_returns_initialisation() {
        let groups = vec![vec![0, 1, 2]];
        let cfg = Item2VecConfig { dim: 4, epochs: 0, ..Item2VecConfig::default() };
        let m = sgns_groups(&groups, 3, &cfg, 9).unwrap();
        let init = Matrix::uniform(3, 4, -0.125, 0.125, &mut RngStream::new(9).fork("init"));
        assert_eq!(m, init);
    }

    #[test]
    fn deterministic_and_singletons_skipped() {
        let groups = vec![vec![0, 1, 2], vec![3]];
        let cfg = Item2VecConfig { dim: 4, epochs: 5, ..Item2VecConfig::default() };
        let a = sgns_groups(&groups, 4, &cfg, 1).unwrap();
        assert_eq!(a, sgns_groups(&groups, 4, &cfg, 1).unwrap());
        assert!(sgns_groups(&[vec![0, 9]], 4, &cfg, 1).is_err());
    }
}
