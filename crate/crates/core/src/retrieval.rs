//! Ingredient → recipe candidate retrieval over an inverted index.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::corpus::{IngredientId, Recipe, RecipeId};
use crate::error::{Error, Result};

/// Default minimum coverage; matches how interaction labels were filtered.
pub const DEFAULT_MIN_COVERAGE: f64 = 1.0;

/// Ingredient id → ascending recipe ids containing it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InvertedIndex {
    postings: BTreeMap<IngredientId, Vec<RecipeId>>,
    /// Distinct ingredient count per recipe.
    sizes: BTreeMap<RecipeId, usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Candidate {
    pub recipe: RecipeId,
    pub coverage: f64,
}

impl InvertedIndex {
    pub fn postings(&self, ingredient: IngredientId) -> &[RecipeId] {
        self.postings.get(&ingredient).map_or(&[], Vec::as_slice)
    }

    pub fn n_ingredients(&self) -> usize {
        self.postings.len()
    }

    pub fn n_recipes(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (IngredientId, &[RecipeId])> {
        self.postings.iter().map(|(&g, p)| (g, p.as_slice()))
    }
}

pub fn index_recipes(recipes: &[Recipe]) -> Result<InvertedIndex> {
    let mut index = InvertedIndex::default();
    for r in recipes {
        let distinct: BTreeSet<IngredientId> = r.ingredients.iter().copied().collect();
        if index.sizes.insert(r.id, distinct.len()).is_some() {
            return Err(Error::Integrity(format!("duplicate recipe id {}", r.id)));
        }
        for g in distinct {
            index.postings.entry(g).or_default().push(r.id);
        }
    }
    for list in index.postings.values_mut() {
        list.sort_unstable();
    }
    Ok(index)
}

/// Recipes whose ingredient coverage by `inventory` is at least
/// `min_coverage`, by coverage descending then recipe id ascending.
pub fn retrieve_candidates(
    index: &InvertedIndex,
    inventory: &[IngredientId],
    min_coverage: f64,
) -> Result<Vec<Candidate>> {
    if !(min_coverage > 0.0 && min_coverage <= 1.0) {
        return Err(Error::Input(format!("min_coverage must lie in (0, 1], got {min_coverage}")));
    }
    let inventory: BTreeSet<IngredientId> = inventory.iter().copied().collect();
    let mut hits: BTreeMap<RecipeId, usize> = BTreeMap::new();
    for g in &inventory {
        for &r in index.postings(*g) {
            *hits.entry(r).or_default() += 1;
        }
    }
    let mut out: Vec<Candidate> = hits
        .into_iter()
        .map(|(recipe, hit)| Candidate {
            recipe,
            coverage: hit as f64 / index.sizes[&recipe] as f64,
        })
        .filter(|c| c.coverage >= min_coverage)
        .collect();
    out.sort_by(|a, b| b.coverage.total_cmp(&a.coverage).then(a.recipe.cmp(&b.recipe)));
    Ok(out)
}
