//! Retrieve-then-rank for one user: the inverted index narrows the recipes to
//! those the inventory covers, a trained scorer orders them.

use std::path::Path;

use serde::Serialize;

use crate::checkpoint::{Checkpoint, ModelKind};
use crate::corpus::{Corpus, IngredientId, RecipeId, UserId};
use crate::error::{Error, Result};
use crate::eval::{rank_by_scores, Scorer};
use crate::retrieval::{index_recipes, retrieve_candidates};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Recommendation {
    pub rank: usize,
    pub recipe: RecipeId,
    pub name: String,
    pub score: f64,
    pub coverage: f64,
}

/// Loads a memory-network or MF checkpoint as a scorer, checking that it was
/// trained on a corpus of the same shape as `corpus`.
pub fn load_scorer(path: &Path, corpus: &Corpus) -> Result<Box<dyn Scorer + Send + Sync>> {
    let ck = Checkpoint::load(path)?;
    let (scorer, users, recipes): (Box<dyn Scorer + Send + Sync>, usize, usize) = match ck.kind {
        ModelKind::Recommender => {
            let m = ck.to_recommender()?;
            let (u, r) = (m.n_users(), m.n_recipes());
            (Box::new(m), u, r)
        }
        ModelKind::Mf => {
            let (m, _) = ck.to_mf()?;
            let (u, r) = (m.users.rows(), m.recipes.rows());
            (Box::new(m), u, r)
        }
        other => return Err(Error::Checkpoint(format!("{other:?} checkpoints cannot rank recipes"))),
    };
    if users != corpus.users.len() || recipes != corpus.recipes.len() {
        return Err(Error::Input(format!(
            "model covers {users} users and {recipes} recipes; corpus has {} and {}",
            corpus.users.len(),
            corpus.recipes.len()
        )));
    }
    Ok(scorer)
}

/// Ingredient names to ids; blank entries are skipped.
pub fn resolve_ingredients<S: AsRef<str>>(corpus: &Corpus, names: &[S]) -> Result<Vec<IngredientId>> {
    names
        .iter()
        .map(|n| n.as_ref().trim())
        .filter(|n| !n.is_empty())
        .map(|n| {
            corpus
                .ingredient_by_name(n)
                .ok_or_else(|| Error::Input(format!("unknown ingredient {n:?}")))
        })
        .collect()
}

/// The `top` best recipes among those whose coverage by `inventory` is at
/// least `min_coverage`, best first.
pub fn recommend(
    corpus: &Corpus,
    scorer: &(impl Scorer + ?Sized),
    user: UserId,
    inventory: &[IngredientId],
    min_coverage: f64,
    top: usize,
) -> Result<Vec<Recommendation>> {
    if corpus.user(user).is_none() {
        return Err(Error::Input(format!("unknown user {user}")));
    }
    let index = index_recipes(&corpus.recipes)?;
    let candidates = retrieve_candidates(&index, inventory, min_coverage)?;
    let scored = candidates
        .iter()
        .map(|c| Ok((c.recipe, scorer.score(user, c.recipe)?)))
        .collect::<Result<Vec<_>>>()?;
    let ranked = rank_by_scores(&scored);
    Ok(ranked
        .into_iter()
        .take(top)
        .enumerate()
        .map(|(i, r)| {
            let pos = candidates.iter().position(|c| c.recipe == r).expect("ranked ids come from candidates");
            Recommendation {
                rank: i + 1,
                recipe: r,
                name: corpus.recipes[r as usize].name.clone(),
                score: scored[pos].1,
                coverage: candidates[pos].coverage,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, GeneratorConfig};

    #[test]
    fn ranks_covered_recipes_by_score() {
        let c = generate_synthetic(&GeneratorConfig { n_users: 20, ..GeneratorConfig::desk() }, 3).unwrap();
        let by_id = |_: UserId, r: RecipeId| r as f64;
        let inv = c.users[0].inventory.clone();
        let recs = recommend(&c, &by_id, 0, &inv, 1.0, 5).unwrap();
        assert!(!recs.is_empty());
        assert!(recs.windows(2).all(|w| w[0].recipe > w[1].recipe));
        for r in &recs {
            assert!(c.recipes[r.recipe as usize].ingredients.iter().all(|g| inv.contains(g)));
            assert_eq!(r.coverage, 1.0);
        }
        assert!(matches!(recommend(&c, &by_id, 999, &inv, 1.0, 5), Err(Error::Input(_))));
        assert!(resolve_ingredients(&c, &["no such thing"]).is_err());
        assert_eq!(resolve_ingredients(&c, &[" ", c.ingredients[2].name.as_str()]).unwrap(), [2]);
    }
}
