use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{
    coverage, Corpus, HealthTag, HealthTriple, Ingredient, InteractionSet, Recipe, UserInteractions,
    UserProfile,
};
use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// Sentence separator inside a user's token stream.
pub const EOS_TOKEN: &str = "_eos_";

const INGREDIENT_NAMES: &[&str] = &[
    "tofu", "carrot", "celery", "spinach", "broccoli", "tomato", "potato", "cabbage", "cucumber",
    "eggplant", "pumpkin", "onion", "garlic", "ginger", "mushroom", "lotus_root", "bean_sprout",
    "lettuce", "bitter_melon", "winter_melon", "corn", "yam", "sweet_potato", "taro", "radish",
    "leek", "chili", "green_pepper", "bok_choy", "kelp", "seaweed", "black_fungus", "peanut",
    "walnut", "sesame", "millet", "oat", "brown_rice", "glutinous_rice", "red_bean", "mung_bean",
    "soybean", "egg", "milk", "yogurt", "chicken", "duck", "beef", "mutton", "pork", "pork_belly",
    "pork_liver", "sausage", "bacon", "lard", "shrimp", "crab", "carp", "salmon", "squid", "oyster",
    "clam", "honey", "brown_sugar", "rock_sugar", "red_date", "goji_berry", "longan", "lily_bulb",
    "apple", "banana", "pear", "orange", "lemon", "hawthorn", "chestnut", "white_fungus",
    "chinese_yam", "butter", "cream",
];

const TAG_NAMES: &[&str] = &[
    "losing_weight", "insomnia", "hypertension", "diabetes", "pregnant", "elderly", "teen",
    "school_child", "anemia", "gout", "hyperlipidemia", "gastritis", "constipation", "obesity",
    "fatigue", "osteoporosis", "cold", "acne", "fitness", "breastfeeding", "middle_aged",
    "hepatitis", "anxiety", "myopia",
];

const PERSONAL_TOKENS: &[&[&str]] = &[
    &["sex_f", "sex_m"],
    &["age_child", "age_teen", "age_20s", "age_30s", "age_40s", "age_50s", "age_60s", "age_70s"],
    &["occ_student", "occ_teacher", "occ_engineer", "occ_doctor", "occ_retired", "occ_clerk"],
];

/// Knobs of the synthetic corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_users: usize,
    pub n_tags: usize,
    pub n_recipes: usize,
    pub n_ingredients: usize,
    pub n_categories: usize,
    pub tokens_min: usize,
    pub tokens_max: usize,
    /// Mean of `1 + Poisson(mean - 1)`, truncated at `n_tags`.
    pub mean_tags_per_user: f64,
    pub inventory_size: usize,
    pub positives_per_user: usize,
    pub negatives_per_user: usize,
    /// Probability that each keyword slot of a tag actually carries a keyword.
    pub signal_strength: f64,
    pub keywords_per_tag: usize,
    pub keyword_slots_per_tag: usize,
    pub noise_vocab: usize,
    pub suitable_per_tag: usize,
    pub unsuitable_per_tag: usize,
    pub triples_per_tag: usize,
    pub recipe_size_min: usize,
    pub recipe_size_max: usize,
    pub multi_category_prob: f64,
    /// Chance that each of a user's suitable ingredients lands in their inventory.
    pub inventory_bias: f64,
    /// Minimum fraction of a recipe's ingredients the inventory must cover.
    pub coverage_ratio: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl GeneratorConfig {
    /// Small corpus that trains in seconds. Users get few positives so that
    /// interactions are sparse; with dozens per user every recommender ranks
    /// the held-out positive near the top and nothing can be compared.
    pub fn desk() -> Self {
        Self {
            n_users: 200,
            n_tags: 8,
            n_recipes: 300,
            n_ingredients: 60,
            n_categories: 4,
            tokens_min: 40,
            tokens_max: 80,
            mean_tags_per_user: 2.0,
            inventory_size: 54,
            positives_per_user: 10,
            negatives_per_user: 60,
            signal_strength: 0.9,
            keywords_per_tag: 5,
            keyword_slots_per_tag: 3,
            noise_vocab: 300,
            suitable_per_tag: 8,
            unsuitable_per_tag: 10,
            triples_per_tag: 300,
            recipe_size_min: 2,
            recipe_size_max: 4,
            multi_category_prob: 0.15,
            inventory_bias: 0.8,
            coverage_ratio: 1.0,
        }
    }

    /// Sizes of the real corpus: 64,657 users, 96 tags, 6.6k recipes,
    /// 300 triples per tag, ~340 positives and ~100 negatives per user.
    pub fn full() -> Self {
        Self {
            n_users: 64_657,
            n_tags: 96,
            n_recipes: 6_600,
            n_ingredients: 80,
            n_categories: 4,
            tokens_min: 120,
            tokens_max: 390,
            mean_tags_per_user: 3.89,
            inventory_size: 72,
            positives_per_user: 340,
            negatives_per_user: 100,
            signal_strength: 0.9,
            keywords_per_tag: 5,
            keyword_slots_per_tag: 3,
            noise_vocab: 20_000,
            suitable_per_tag: 12,
            unsuitable_per_tag: 10,
            triples_per_tag: 300,
            recipe_size_min: 2,
            recipe_size_max: 6,
            multi_category_prob: 0.15,
            inventory_bias: 0.8,
            coverage_ratio: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_users", self.n_users),
            ("n_tags", self.n_tags),
            ("n_recipes", self.n_recipes),
            ("n_ingredients", self.n_ingredients),
            ("n_categories", self.n_categories),
            ("tokens_min", self.tokens_min),
            ("inventory_size", self.inventory_size),
            ("positives_per_user", self.positives_per_user),
            ("negatives_per_user", self.negatives_per_user),
            ("keywords_per_tag", self.keywords_per_tag),
            ("noise_vocab", self.noise_vocab),
            ("suitable_per_tag", self.suitable_per_tag),
            ("unsuitable_per_tag", self.unsuitable_per_tag),
            ("triples_per_tag", self.triples_per_tag),
            ("recipe_size_min", self.recipe_size_min),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if self.suitable_per_tag + self.unsuitable_per_tag > self.n_ingredients {
            return Err(Error::Config(format!(
                "{} suitable + {} unsuitable ingredients per tag exceed the pool of {}",
                self.suitable_per_tag, self.unsuitable_per_tag, self.n_ingredients
            )));
        }
        if self.inventory_size > self.n_ingredients {
            return Err(Error::Config("inventory_size exceeds n_ingredients".into()));
        }
        if self.recipe_size_max < self.recipe_size_min || self.recipe_size_max > self.n_ingredients {
            return Err(Error::Config("recipe size range is empty or exceeds n_ingredients".into()));
        }
        if self.tokens_max < self.tokens_min {
            return Err(Error::Config("tokens_max < tokens_min".into()));
        }
        let personal = PERSONAL_TOKENS.len();
        if self.tokens_min < personal + 2 {
            return Err(Error::Config(format!("tokens_min must be at least {}", personal + 2)));
        }
        if !(1.0..=self.n_tags as f64).contains(&self.mean_tags_per_user) {
            return Err(Error::Config("mean_tags_per_user must lie in [1, n_tags]".into()));
        }
        for (name, p) in [
            ("signal_strength", self.signal_strength),
            ("multi_category_prob", self.multi_category_prob),
            ("inventory_bias", self.inventory_bias),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.coverage_ratio > 0.0 && self.coverage_ratio <= 1.0) {
            return Err(Error::Config("coverage_ratio must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

fn ingredient_name(i: usize) -> String {
    match INGREDIENT_NAMES.get(i) {
        Some(n) => (*n).to_string(),
        None => format!("ingredient_{i}"),
    }
}

fn tag_name(t: usize) -> String {
    match TAG_NAMES.get(t) {
        Some(n) => (*n).to_string(),
        None => format!("tag_{t}"),
    }
}

/// Ingredients are split into one family per recipe category.
fn family(ingredient: usize, n_categories: usize) -> usize {
    ingredient % n_categories
}

/// Builds a corpus whose structure mirrors the real one: tags with
/// disjoint suitable/unsuitable ingredient lists, recipes with health
/// categories, users with tags, noisy posts and inventories, health triples
/// and inventory-filtered positives/negatives.
pub fn generate_synthetic(config: &GeneratorConfig, seed: u64) -> Result<Corpus> {
    config.validate()?;
    let root = RngStream::new(seed);
    let n_c = config.n_categories;

    let ingredients: Vec<Ingredient> = (0..config.n_ingredients)
        .map(|i| Ingredient {
            id: i as u32,
            name: ingredient_name(i),
        })
        .collect();

    let tags = generate_tags(config, &mut root.fork("tags"));
    let recipes = generate_recipes(config, &tags, &mut root.fork("recipes"));
    let triples = generate_triples(config, &tags, &recipes, &mut root.fork("triples"))?;
    let users = generate_users(config, &tags, &mut root.fork("users"));
    let interactions = build_interactions(
        config,
        &tags,
        &recipes,
        &triples,
        &users,
        &mut root.fork("interactions"),
    );

    let corpus = Corpus {
        n_categories: n_c,
        ingredients,
        recipes,
        tags,
        users,
        triples,
        interactions,
    };
    debug_assert!(corpus.validate().is_ok());
    Ok(corpus)
}

fn generate_tags(config: &GeneratorConfig, rng: &mut RngStream) -> Vec<HealthTag> {
    let n_c = config.n_categories;
    (0..config.n_tags)
        .map(|t| {
            let group = t % n_c;
            let mut in_family: Vec<usize> = (0..config.n_ingredients)
                .filter(|&i| family(i, n_c) == group)
                .collect();
            let mut others: Vec<usize> = (0..config.n_ingredients)
                .filter(|&i| family(i, n_c) != group)
                .collect();
            rng.shuffle(&mut in_family);
            rng.shuffle(&mut others);
            // Suitable ingredients come from the tag's own family first and
            // unsuitable ones from the other families; spill over when a pool
            // runs dry.
            let mut pool: Vec<usize> = in_family.iter().chain(&others).copied().collect();
            let suitable: Vec<usize> = pool.drain(..config.suitable_per_tag).collect();
            let mut rest: Vec<usize> = others
                .iter()
                .chain(&in_family)
                .copied()
                .filter(|i| !suitable.contains(i))
                .collect();
            let unsuitable: Vec<usize> = rest.drain(..config.unsuitable_per_tag).collect();
            let name = tag_name(t);
            let keywords = (0..config.keywords_per_tag)
                .map(|k| format!("kw_{name}_{k}"))
                .collect();
            HealthTag {
                id: t as u32,
                name,
                group: group as u32,
                suitable: sorted_u32(&suitable),
                unsuitable: sorted_u32(&unsuitable),
                keywords,
            }
        })
        .collect()
}

fn sorted_u32(xs: &[usize]) -> Vec<u32> {
    let set: BTreeSet<u32> = xs.iter().map(|&x| x as u32).collect();
    set.into_iter().collect()
}

fn generate_recipes(config: &GeneratorConfig, tags: &[HealthTag], rng: &mut RngStream) -> Vec<Recipe> {
    let n_c = config.n_categories;
    (0..config.n_recipes)
        .map(|r| {
            let theme = &tags[rng.below(tags.len())];
            let size = config.recipe_size_min + rng.below(config.recipe_size_max - config.recipe_size_min + 1);
            let mut set = BTreeSet::new();
            let n_suitable = 1 + rng.below(2.min(size));
            for _ in 0..n_suitable {
                set.insert(theme.suitable[rng.below(theme.suitable.len())]);
            }
            let mut guard = 0;
            while set.len() < size && guard < 1000 {
                guard += 1;
                let g = rng.below(config.n_ingredients);
                if rng.bernoulli(0.6) && family(g, n_c) != theme.group as usize {
                    continue;
                }
                set.insert(g as u32);
            }
            let ingredients: Vec<u32> = set.into_iter().collect();
            let categories = assign_categories(config, tags, &ingredients, theme.group, rng);
            let name = ingredients
                .iter()
                .map(|&g| ingredient_name(g as usize))
                .collect::<Vec<_>>()
                .join("_with_");
            Recipe {
                id: r as u32,
                name: format!("{name}#{r}"),
                ingredients,
                categories,
            }
        })
        .collect()
}

/// The dominant category is the tag group with the most suitable ingredients
/// in the recipe; a fraction of recipes also takes the runner-up.
fn assign_categories(
    config: &GeneratorConfig,
    tags: &[HealthTag],
    ingredients: &[u32],
    theme_group: u32,
    rng: &mut RngStream,
) -> Vec<u32> {
    let n_c = config.n_categories;
    let mut score = vec![0usize; n_c];
    for tag in tags {
        let hits = ingredients
            .iter()
            .filter(|g| tag.suitable.binary_search(g).is_ok())
            .count();
        score[tag.group as usize] += hits;
    }
    // Ties resolve toward the recipe's theme, then the lower index.
    let mut order: Vec<usize> = (0..n_c).collect();
    order.sort_by_key(|&c| {
        (
            std::cmp::Reverse(score[c]),
            c as u32 != theme_group,
            c,
        )
    });
    let mut cats = vec![order[0] as u32];
    if n_c > 1 && rng.bernoulli(config.multi_category_prob) {
        let second = if score[order[1]] > 0 {
            order[1]
        } else {
            order[1 + rng.below(n_c - 1)]
        };
        cats.push(second as u32);
    }
    cats.sort_unstable();
    cats
}

fn generate_triples(
    config: &GeneratorConfig,
    tags: &[HealthTag],
    recipes: &[Recipe],
    rng: &mut RngStream,
) -> Result<Vec<HealthTriple>> {
    let mut triples = Vec::with_capacity(tags.len() * config.triples_per_tag);
    for tag in tags {
        let mut good: Vec<u32> = recipes.iter().filter(|r| tag.suits(r)).map(|r| r.id).collect();
        let mut bad: Vec<u32> = recipes.iter().filter(|r| tag.harmed_by(r)).map(|r| r.id).collect();
        if good.is_empty() || bad.is_empty() {
            return Err(Error::Config(format!(
                "tag {} has {} suitable and {} unsuitable recipes; cannot build triples",
                tag.name,
                good.len(),
                bad.len()
            )));
        }
        rng.shuffle(&mut good);
        rng.shuffle(&mut bad);
        for k in 0..config.triples_per_tag {
            triples.push(HealthTriple {
                tag: tag.id,
                suitable: good[k % good.len()],
                unsuitable: bad[k % bad.len()],
            });
        }
    }
    Ok(triples)
}

fn generate_users(config: &GeneratorConfig, tags: &[HealthTag], rng: &mut RngStream) -> Vec<UserProfile> {
    (0..config.n_users)
        .map(|u| {
            let n = (1 + rng.poisson(config.mean_tags_per_user - 1.0)).min(config.n_tags);
            let user_tags = sorted_u32(&rng.sample_indices(config.n_tags, n));
            let tokens = user_tokens(config, tags, &user_tags, rng);
            let inventory = user_inventory(config, tags, &user_tags, rng);
            UserProfile {
                id: u as u32,
                tags: user_tags,
                tokens,
                inventory,
            }
        })
        .collect()
}

/// Personal tokens, then sentences of noise words separated by [`EOS_TOKEN`]
/// with each tag's keyword slots scattered across the body.
fn user_tokens(config: &GeneratorConfig, tags: &[HealthTag], user_tags: &[u32], rng: &mut RngStream) -> Vec<String> {
    let len = config.tokens_min + rng.below(config.tokens_max - config.tokens_min + 1);
    let mut tokens: Vec<String> = PERSONAL_TOKENS
        .iter()
        .map(|choices| choices[rng.below(choices.len())].to_string())
        .collect();
    tokens.push(EOS_TOKEN.to_string());

    let mut body_slots = Vec::new();
    while tokens.len() < len {
        let sentence = 6 + rng.below(9);
        for _ in 0..sentence {
            if tokens.len() + 1 >= len {
                break;
            }
            body_slots.push(tokens.len());
            tokens.push(format!("w{:05}", rng.below(config.noise_vocab)));
        }
        tokens.push(EOS_TOKEN.to_string());
    }

    let mut keywords = Vec::new();
    for &t in user_tags {
        let tag = &tags[t as usize];
        for _ in 0..config.keyword_slots_per_tag {
            if rng.bernoulli(config.signal_strength) {
                keywords.push(tag.keywords[rng.below(tag.keywords.len())].clone());
            }
        }
    }
    let picks = rng.sample_indices(body_slots.len(), keywords.len());
    for (kw, pick) in keywords.into_iter().zip(picks) {
        tokens[body_slots[pick]] = kw;
    }
    tokens
}

fn user_inventory(config: &GeneratorConfig, tags: &[HealthTag], user_tags: &[u32], rng: &mut RngStream) -> Vec<u32> {
    let mut inv = BTreeSet::new();
    let suitable: BTreeSet<u32> = user_tags
        .iter()
        .flat_map(|&t| tags[t as usize].suitable.iter().copied())
        .collect();
    for g in suitable {
        if inv.len() < config.inventory_size && rng.bernoulli(config.inventory_bias) {
            inv.insert(g);
        }
    }
    let mut rest: Vec<u32> = (0..config.n_ingredients as u32).filter(|g| !inv.contains(g)).collect();
    rng.shuffle(&mut rest);
    let need = config.inventory_size - inv.len();
    inv.extend(rest.into_iter().take(need));
    inv.into_iter().collect()
}

/// Positives are the suitable sides of the triples of the user's tags and
/// negatives the unsuitable sides; a candidate positive that harms any of the
/// user's tags becomes a negative. Both lists are filtered by the inventory.
/// When filtering leaves fewer items than requested, the lists are topped up
/// from every covered recipe that satisfies the same rule, then subsampled to
/// the configured sizes.
fn build_interactions(
    config: &GeneratorConfig,
    tags: &[HealthTag],
    recipes: &[Recipe],
    triples: &[HealthTriple],
    users: &[UserProfile],
    rng: &mut RngStream,
) -> InteractionSet {
    let mut by_tag: Vec<(BTreeSet<u32>, BTreeSet<u32>)> = vec![Default::default(); tags.len()];
    for t in triples {
        by_tag[t.tag as usize].0.insert(t.suitable);
        by_tag[t.tag as usize].1.insert(t.unsuitable);
    }
    let entries = users
        .iter()
        .map(|user| {
            let user_tags: Vec<&HealthTag> = user.tags.iter().map(|&t| &tags[t as usize]).collect();
            let harms = |r: &Recipe| user_tags.iter().any(|t| t.harmed_by(r));
            let helps = |r: &Recipe| user_tags.iter().any(|t| t.suits(r));
            let covered = |r: &Recipe| coverage(r, &user.inventory) >= config.coverage_ratio;

            let mut pos = BTreeSet::new();
            let mut neg = BTreeSet::new();
            for &t in &user.tags {
                let (good, bad) = &by_tag[t as usize];
                for &r in good {
                    if harms(&recipes[r as usize]) {
                        neg.insert(r);
                    } else {
                        pos.insert(r);
                    }
                }
                neg.extend(bad.iter().copied());
            }
            pos.retain(|&r| covered(&recipes[r as usize]));
            neg.retain(|&r| covered(&recipes[r as usize]));

            top_up(&mut pos, config.positives_per_user, recipes, |r| {
                covered(r) && helps(r) && !harms(r)
            }, &neg, rng);
            top_up(&mut neg, config.negatives_per_user, recipes, |r| covered(r) && harms(r), &pos, rng);

            UserInteractions {
                user: user.id,
                pos: subsample(pos, config.positives_per_user, rng),
                neg: subsample(neg, config.negatives_per_user, rng),
            }
        })
        .collect();
    InteractionSet { users: entries }
}

fn top_up<F: Fn(&Recipe) -> bool>(
    set: &mut BTreeSet<u32>,
    target: usize,
    recipes: &[Recipe],
    rule: F,
    exclude: &BTreeSet<u32>,
    rng: &mut RngStream,
) {
    if set.len() >= target {
        return;
    }
    let mut extra: Vec<u32> = recipes
        .iter()
        .filter(|r| !set.contains(&r.id) && !exclude.contains(&r.id) && rule(r))
        .map(|r| r.id)
        .collect();
    rng.shuffle(&mut extra);
    let need = target - set.len();
    set.extend(extra.into_iter().take(need));
}

fn subsample(set: BTreeSet<u32>, target: usize, rng: &mut RngStream) -> Vec<u32> {
    let mut items: Vec<u32> = set.into_iter().collect();
    if items.len() > target {
        let keep = rng.sample_indices(items.len(), target);
        let mut chosen: Vec<u32> = keep.into_iter().map(|i| items[i]).collect();
        chosen.sort_unstable();
        items = chosen;
    }
    items
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infeasible_ingredient_budget_is_rejected() {
        let cfg = GeneratorConfig {
            n_ingredients: 10,
            suitable_per_tag: 6,
            unsuitable_per_tag: 6,
            inventory_size: 10,
            recipe_size_max: 4,
            ..GeneratorConfig::desk()
        };
        assert!(matches!(generate_synthetic(&cfg, 1), Err(Error::Config(_))));
    }

    #[test]
    fn zero_counts_are_rejected() {
        let cfg = GeneratorConfig {
            n_users: 0,
            ..GeneratorConfig::desk()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn full_scale_sizes() {
        let cfg = GeneratorConfig::full();
        assert_eq!(cfg.n_tags, 96);
        assert_eq!(cfg.n_categories, 4);
        assert_eq!(cfg.n_recipes, 6_600);
        assert_eq!(cfg.n_users, 64_657);
        assert_eq!(cfg.n_tags * cfg.triples_per_tag, 28_800);
        assert_eq!((cfg.positives_per_user, cfg.negatives_per_user), (340, 100));
        cfg.validate().unwrap();
    }

    #[test]
    fn tokens_respect_length_bounds() {
        let cfg = GeneratorConfig::desk();
        let corpus = generate_synthetic(&cfg, 3).unwrap();
        for u in &corpus.users {
            assert!(u.tokens.len() <= cfg.tokens_max, "{}", u.tokens.len());
            assert!(u.tokens.len() >= cfg.tokens_min);
        }
    }
}
