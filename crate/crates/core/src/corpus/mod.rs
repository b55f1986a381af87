//! Dataset schemas, JSONL persistence, the synthetic generator and the
//! leave-one-out split.

mod generate;
mod io;
mod split;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use generate::{generate_synthetic, GeneratorConfig, EOS_TOKEN};
pub use io::{load_corpus, save_corpus, CORPUS_FILES};
pub use split::{leave_one_out_split, Split, SplitReport, TestCase};

use crate::error::{Error, Result};

pub type IngredientId = u32;
pub type RecipeId = u32;
pub type TagId = u32;
pub type UserId = u32;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ingredient {
    pub id: IngredientId,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recipe {
    pub id: RecipeId,
    pub name: String,
    /// Sorted, deduplicated.
    pub ingredients: Vec<IngredientId>,
    /// Sorted, deduplicated, non-empty.
    pub categories: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthTag {
    pub id: TagId,
    pub name: String,
    /// Recipe category this tag's diet advice mostly points to.
    pub group: u32,
    pub suitable: Vec<IngredientId>,
    pub unsuitable: Vec<IngredientId>,
    /// Tokens that signal this tag in a user's posts.
    #[serde(default)]
    pub keywords: Vec<String>,
}

impl HealthTag {
    /// ≥1 suitable and no unsuitable ingredient.
    pub fn suits(&self, recipe: &Recipe) -> bool {
        recipe.ingredients.iter().any(|i| self.suitable.binary_search(i).is_ok())
            && !self.harmed_by(recipe)
    }

    /// ≥1 unsuitable ingredient.
    pub fn harmed_by(&self, recipe: &Recipe) -> bool {
        recipe.ingredients.iter().any(|i| self.unsuitable.binary_search(i).is_ok())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: UserId,
    pub tags: Vec<TagId>,
    pub tokens: Vec<String>,
    pub inventory: Vec<IngredientId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthTriple {
    pub tag: TagId,
    pub suitable: RecipeId,
    pub unsuitable: RecipeId,
}

/// Positive and negative recipes for one user.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserInteractions {
    pub user: UserId,
    pub pos: Vec<RecipeId>,
    pub neg: Vec<RecipeId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionSet {
    pub users: Vec<UserInteractions>,
}

impl InteractionSet {
    pub fn n_pairs(&self) -> usize {
        self.users.iter().map(|u| u.pos.len() + u.neg.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.n_pairs() == 0
    }

    pub fn get(&self, user: UserId) -> Option<&UserInteractions> {
        self.users.iter().find(|u| u.user == user)
    }
}

/// Fraction of the recipe's ingredients present in `inventory` (sorted).
pub fn coverage(recipe: &Recipe, inventory: &[IngredientId]) -> f64 {
    if recipe.ingredients.is_empty() {
        return 0.0;
    }
    let hit = recipe
        .ingredients
        .iter()
        .filter(|i| inventory.binary_search(i).is_ok())
        .count();
    hit as f64 / recipe.ingredients.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub n_categories: usize,
    pub ingredients: Vec<Ingredient>,
    pub recipes: Vec<Recipe>,
    pub tags: Vec<HealthTag>,
    pub users: Vec<UserProfile>,
    pub triples: Vec<HealthTriple>,
    pub interactions: InteractionSet,
}

impl Corpus {
    pub fn recipe(&self, id: RecipeId) -> Option<&Recipe> {
        self.recipes.get(id as usize)
    }

    pub fn user(&self, id: UserId) -> Option<&UserProfile> {
        self.users.get(id as usize)
    }

    pub fn ingredient_by_name(&self, name: &str) -> Option<IngredientId> {
        self.ingredients.iter().find(|i| i.name == name).map(|i| i.id)
    }

    /// Checks dense ids, set invariants and every cross-file reference.
    pub fn validate(&self) -> Result<()> {
        let n_ing = self.ingredients.len() as u32;
        let n_rec = self.recipes.len() as u32;
        let n_tag = self.tags.len() as u32;
        let n_user = self.users.len() as u32;
        let mut names = BTreeSet::new();
        for (i, ing) in self.ingredients.iter().enumerate() {
            if ing.id as usize != i {
                return Err(Error::Integrity(format!("ingredient ids not dense at {}", ing.id)));
            }
            if !names.insert(ing.name.as_str()) {
                return Err(Error::Integrity(format!("duplicate ingredient name {}", ing.name)));
            }
        }
        for (i, r) in self.recipes.iter().enumerate() {
            if r.id as usize != i {
                return Err(Error::Integrity(format!("recipe ids not dense at {}", r.id)));
            }
            if r.ingredients.is_empty() {
                return Err(Error::Integrity(format!("recipe {} has no ingredients", r.id)));
            }
            if r.categories.is_empty() {
                return Err(Error::Integrity(format!("recipe {} has no category", r.id)));
            }
            if let Some(bad) = r.ingredients.iter().find(|&&g| g >= n_ing) {
                return Err(Error::Integrity(format!(
                    "recipe {} references unknown ingredient {bad}",
                    r.id
                )));
            }
            if let Some(bad) = r.categories.iter().find(|&&c| c as usize >= self.n_categories) {
                return Err(Error::Integrity(format!(
                    "recipe {} references unknown category {bad}",
                    r.id
                )));
            }
            check_sorted_set(&r.ingredients, || format!("recipe {} ingredients", r.id))?;
            check_sorted_set(&r.categories, || format!("recipe {} categories", r.id))?;
        }
        for (i, t) in self.tags.iter().enumerate() {
            if t.id as usize != i {
                return Err(Error::Integrity(format!("tag ids not dense at {}", t.id)));
            }
            check_sorted_set(&t.suitable, || format!("tag {} suitable", t.id))?;
            check_sorted_set(&t.unsuitable, || format!("tag {} unsuitable", t.id))?;
            if t.suitable.iter().chain(&t.unsuitable).any(|&g| g >= n_ing) {
                return Err(Error::Integrity(format!("tag {} references unknown ingredient", t.id)));
            }
            if t.suitable.iter().any(|g| t.unsuitable.binary_search(g).is_ok()) {
                return Err(Error::Integrity(format!(
                    "tag {} has an ingredient that is both suitable and unsuitable",
                    t.id
                )));
            }
        }
        for (i, u) in self.users.iter().enumerate() {
            if u.id as usize != i {
                return Err(Error::Integrity(format!("user ids not dense at {}", u.id)));
            }
            if u.tags.is_empty() {
                return Err(Error::Integrity(format!("user {} has no health tag", u.id)));
            }
            if let Some(bad) = u.tags.iter().find(|&&t| t >= n_tag) {
                return Err(Error::Integrity(format!("user {} references unknown tag {bad}", u.id)));
            }
            if let Some(bad) = u.inventory.iter().find(|&&g| g >= n_ing) {
                return Err(Error::Integrity(format!(
                    "user {} references unknown ingredient {bad}",
                    u.id
                )));
            }
            check_sorted_set(&u.tags, || format!("user {} tags", u.id))?;
            check_sorted_set(&u.inventory, || format!("user {} inventory", u.id))?;
        }
        for t in &self.triples {
            if t.tag >= n_tag || t.suitable >= n_rec || t.unsuitable >= n_rec {
                return Err(Error::Integrity(format!("triple {t:?} has a dangling reference")));
            }
        }
        for ui in &self.interactions.users {
            if ui.user >= n_user {
                return Err(Error::Integrity(format!("interactions for unknown user {}", ui.user)));
            }
            if let Some(bad) = ui.pos.iter().chain(&ui.neg).find(|&&r| r >= n_rec) {
                return Err(Error::Integrity(format!(
                    "interactions of user {} reference unknown recipe {bad}",
                    ui.user
                )));
            }
            let pos: BTreeSet<_> = ui.pos.iter().collect();
            if ui.neg.iter().any(|r| pos.contains(r)) {
                return Err(Error::Integrity(format!(
                    "user {} has a recipe that is both positive and negative",
                    ui.user
                )));
            }
        }
        Ok(())
    }
}

fn check_sorted_set<F: Fn() -> String>(xs: &[u32], what: F) -> Result<()> {
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Integrity(format!("{} must be sorted and unique", what())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recipe(ingredients: Vec<u32>) -> Recipe {
        Recipe {
            id: 0,
            name: "r".into(),
            ingredients,
            categories: vec![0],
        }
    }

    #[test]
    fn coverage_is_fraction_present() {
        assert_eq!(coverage(&recipe(vec![0, 1, 2, 3]), &[0, 1]), 0.5);
        assert_eq!(coverage(&recipe(vec![0, 1]), &[0, 1, 5]), 1.0);
        assert_eq!(coverage(&recipe(vec![0, 1]), &[]), 0.0);
    }

    #[test]
    fn tag_rules() {
        let tag = HealthTag {
            id: 0,
            name: "t".into(),
            group: 0,
            suitable: vec![1, 2],
            unsuitable: vec![5],
            keywords: vec![],
        };
        assert!(tag.suits(&recipe(vec![1, 3])));
        assert!(!tag.suits(&recipe(vec![1, 5])));
        assert!(!tag.suits(&recipe(vec![3, 4])));
        assert!(tag.harmed_by(&recipe(vec![5])));
    }
}
