use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, RecipeId, TagId, UserId};
use crate::error::{Error, Result};
use crate::eval::{rank_by_scores, Scorer};
use crate::numerics::{adam_step, axpy, dot, log_sigmoid, norm_sq, sigmoid, AdamConfig, AdamState, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Similarity {
    Inner,
    /// Cosine similarity; defined as 0 when either side is the zero vector.
    Cosine,
}

impl Similarity {
    pub fn name(self) -> &'static str {
        match self {
            Similarity::Inner => "inner",
            Similarity::Cosine => "cosine",
        }
    }

    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Similarity::Inner => dot(a, b),
            Similarity::Cosine => {
                let (na, nb) = (norm_sq(a).sqrt(), norm_sq(b).sqrt());
                if na == 0.0 || nb == 0.0 {
                    0.0
                } else {
                    dot(a, b) / (na * nb)
                }
            }
        }
    }

    /// Adds `g · ∂Sim/∂a` to `da` and `g · ∂Sim/∂b` to `db`.
    pub fn backward(self, a: &[f64], b: &[f64], g: f64, da: &mut [f64], db: &mut [f64]) {
        match self {
            Similarity::Inner => {
                axpy(da, g, b);
                axpy(db, g, a);
            }
            Similarity::Cosine => {
                let (na, nb) = (norm_sq(a).sqrt(), norm_sq(b).sqrt());
                if na == 0.0 || nb == 0.0 {
                    return;
                }
                let cos = dot(a, b) / (na * nb);
                for j in 0..a.len() {
                    da[j] += g * (b[j] / (na * nb) - cos * a[j] / (na * na));
                    db[j] += g * (a[j] / (na * nb) - cos * b[j] / (nb * nb));
                }
            }
        }
    }
}

impl std::str::FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inner" => Ok(Self::Inner),
            "cosine" => Ok(Self::Cosine),
            other => Err(Error::Config(format!("unknown similarity {other:?} (inner|cosine)"))),
        }
    }
}

/// Model variants compared in the ablation table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    Full,
    /// No writes into tag memories and no refresh from them.
    NoGeneralMemory,
    /// No category embedding, hence no high-level term; the low slots stay
    /// partitioned by category.
    NoCategoryEmbedding,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::NoGeneralMemory, Variant::NoCategoryEmbedding];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoGeneralMemory => "no-general-memory",
            Variant::NoCategoryEmbedding => "no-category-embedding",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Weight of the high-level (category) term.
    pub alpha: f64,
    pub beta_high: f64,
    pub beta_low: f64,
    pub lambda_high: f64,
    pub lambda_low: f64,
    pub dim: usize,
    pub similarity: Similarity,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub init_scale: f64,
    pub variant: Variant,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta_high: 0.01,
            beta_low: 0.01,
            lambda_high: 0.01,
            lambda_low: 0.01,
            dim: 64,
            similarity: Similarity::Inner,
            learning_rate: 0.003,
            batch_size: 128,
            init_scale: 0.1,
            variant: Variant::Full,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        for (name, v) in [
            ("beta_high", self.beta_high),
            ("beta_low", self.beta_low),
            ("lambda_high", self.lambda_high),
            ("lambda_low", self.lambda_low),
            ("learning_rate", self.learning_rate),
            ("init_scale", self.init_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if self.dim == 0 || self.batch_size == 0 {
            return Err(Error::Config("dim and batch_size must be positive".into()));
        }
        Ok(())
    }

    /// Weight of the category term after the variant is applied.
    pub fn effective_alpha(&self) -> f64 {
        match self.variant {
            Variant::NoCategoryEmbedding => 0.0,
            _ => self.alpha,
        }
    }
}

/// One high-level vector plus one low-level vector per category.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryBank {
    /// 1 × E
    pub high: Matrix,
    /// N_c × E
    pub low: Matrix,
}

impl MemoryBank {
    pub fn zeros(n_categories: usize, dim: usize) -> Self {
        Self {
            high: Matrix::zeros(1, dim),
            low: Matrix::zeros(n_categories, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.high.cols()
    }

    pub fn n_categories(&self) -> usize {
        self.low.rows()
    }

    /// Mean of the low slots of `categories`.
    pub fn low_mean(&self, categories: &[u32]) -> Vec<f64> {
        mean_rows(&self.low, categories)
    }

    pub fn is_finite(&self) -> bool {
        self.high.is_finite() && self.low.is_finite()
    }
}

fn mean_rows(m: &Matrix, rows: &[u32]) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    let w = 1.0 / rows.len() as f64;
    for &r in rows {
        axpy(&mut out, w, m.row(r as usize));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecipeVectors {
    /// n_recipes × E
    pub recipe: Matrix,
    /// N_c × E
    pub category: Matrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub user: UserId,
    pub recipe: RecipeId,
    pub label: bool,
}

impl LabeledPair {
    pub fn positive(user: UserId, recipe: RecipeId) -> Self {
        Self { user, recipe, label: true }
    }

    pub fn negative(user: UserId, recipe: RecipeId) -> Self {
        Self { user, recipe, label: false }
    }

    /// `+1` for positives, `−1` for negatives.
    pub fn sign(&self) -> f64 {
        if self.label {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Score {
    pub raw: f64,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecommenderModel {
    pub hyper: Hyperparams,
    /// Indexed by user id.
    pub personal: Vec<MemoryBank>,
    /// Indexed by tag id.
    pub general: Vec<MemoryBank>,
    pub vectors: RecipeVectors,
    /// Sorted category ids of each recipe.
    pub recipe_categories: Vec<Vec<u32>>,
    /// Tag ids of each user.
    pub user_tags: Vec<Vec<TagId>>,
}

impl RecommenderModel {
    /// All-zero model shaped after `corpus`.
    pub fn zeros(corpus: &Corpus, hyper: Hyperparams) -> Self {
        let (nc, e) = (corpus.n_categories, hyper.dim);
        Self {
            personal: vec![MemoryBank::zeros(nc, e); corpus.users.len()],
            general: vec![MemoryBank::zeros(nc, e); corpus.tags.len()],
            vectors: RecipeVectors {
                recipe: Matrix::zeros(corpus.recipes.len(), e),
                category: Matrix::zeros(nc, e),
            },
            recipe_categories: corpus.recipes.iter().map(|r| r.categories.clone()).collect(),
            user_tags: corpus.users.iter().map(|u| u.tags.clone()).collect(),
            hyper,
        }
    }

    pub fn n_users(&self) -> usize {
        self.personal.len()
    }

    pub fn n_recipes(&self) -> usize {
        self.vectors.recipe.rows()
    }

    pub fn n_categories(&self) -> usize {
        self.vectors.category.rows()
    }

    fn check_user(&self, user: UserId) -> Result<()> {
        if (user as usize) < self.n_users() {
            Ok(())
        } else {
            Err(Error::Input(format!("unknown user id {user}")))
        }
    }

    fn check_recipe(&self, recipe: RecipeId) -> Result<()> {
        if (recipe as usize) < self.n_recipes() {
            Ok(())
        } else {
            Err(Error::Input(format!("unknown recipe id {recipe}")))
        }
    }

    /// Categories of `recipe`, or an integrity error when it has none.
    pub fn categories(&self, recipe: RecipeId) -> Result<&[u32]> {
        self.check_recipe(recipe)?;
        let cats = &self.recipe_categories[recipe as usize];
        if cats.is_empty() {
            return Err(Error::Integrity(format!("recipe {recipe} has no category")));
        }
        Ok(cats)
    }

    /// Mean category embedding of `recipe`.
    pub fn category_vector(&self, recipe: RecipeId) -> Result<Vec<f64>> {
        Ok(mean_rows(&self.vectors.category, self.categories(recipe)?))
    }

    pub fn score(&self, user: UserId, recipe: RecipeId) -> Result<Score> {
        self.check_user(user)?;
        let raw = self.raw_score(&self.personal[user as usize], recipe)?;
        Ok(Score { raw, prob: sigmoid(raw) })
    }

    /// Score of `recipe` against an arbitrary bank.
    pub fn raw_score(&self, bank: &MemoryBank, recipe: RecipeId) -> Result<f64> {
        let sim = self.hyper.similarity;
        let alpha = self.hyper.effective_alpha();
        let mut raw = 0.0;
        if alpha != 0.0 {
            raw += alpha * sim.eval(bank.high.data(), &self.category_vector(recipe)?);
        }
        if alpha != 1.0 {
            let low = bank.low_mean(self.categories(recipe)?);
            raw += (1.0 - alpha) * sim.eval(&low, self.vectors.recipe.row(recipe as usize));
        }
        Ok(raw)
    }

    /// Candidates ordered by raw score descending, ties by id ascending.
    pub fn rank(&self, user: UserId, candidates: &[RecipeId]) -> Result<Vec<RecipeId>> {
        if candidates.is_empty() {
            return Err(Error::Input("no candidates to rank".into()));
        }
        let scored = candidates
            .iter()
            .map(|&r| Ok((r, self.score(user, r)?.raw)))
            .collect::<Result<Vec<_>>>()?;
        Ok(rank_by_scores(&scored))
    }

    pub fn is_finite(&self) -> bool {
        self.personal.iter().chain(&self.general).all(MemoryBank::is_finite)
            && self.vectors.recipe.is_finite()
            && self.vectors.category.is_finite()
    }
}

impl Scorer for RecommenderModel {
    fn score(&self, user: UserId, recipe: RecipeId) -> Result<f64> {
        Ok(RecommenderModel::score(self, user, recipe)?.raw)
    }
}

/// Mean binary cross-entropy of the sigmoid-squashed scores.
pub fn bce_loss(model: &RecommenderModel, batch: &[LabeledPair]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    let mut total = 0.0;
    for p in batch {
        let raw = model.score(p.user, p.recipe)?.raw;
        total -= if p.label { log_sigmoid(raw) } else { log_sigmoid(-raw) };
    }
    Ok(total / batch.len() as f64)
}

/// Gradients for every trainable tensor; tag memories have none.
#[derive(Clone, Debug, PartialEq)]
pub struct RecommenderGrads {
    pub personal: Vec<MemoryBank>,
    pub recipe: Matrix,
    pub category: Matrix,
}

impl RecommenderGrads {
    pub fn zeros_for(model: &RecommenderModel) -> Self {
        Self {
            personal: vec![MemoryBank::zeros(model.n_categories(), model.hyper.dim); model.n_users()],
            recipe: Matrix::zeros(model.n_recipes(), model.hyper.dim),
            category: Matrix::zeros(model.n_categories(), model.hyper.dim),
        }
    }
}

/// Loss and its gradient over `batch`.
pub fn loss_and_grads(model: &RecommenderModel, batch: &[LabeledPair]) -> Result<(f64, RecommenderGrads)> {
    let loss = bce_loss(model, batch)?;
    let mut grads = RecommenderGrads::zeros_for(model);
    let sim = model.hyper.similarity;
    let alpha = model.hyper.effective_alpha();
    let n = batch.len() as f64;
    let dim = model.hyper.dim;
    for p in batch {
        let bank = &model.personal[p.user as usize];
        let raw = model.raw_score(bank, p.recipe)?;
        let g = (sigmoid(raw) - if p.label { 1.0 } else { 0.0 }) / n;
        let gbank = &mut grads.personal[p.user as usize];
        if alpha != 0.0 {
            let cats = model.categories(p.recipe)?;
            let cv = model.category_vector(p.recipe)?;
            let mut dcv = vec![0.0; dim];
            sim.backward(bank.high.data(), &cv, alpha * g, gbank.high.data_mut(), &mut dcv);
            let w = 1.0 / cats.len() as f64;
            for &c in cats {
                axpy(grads.category.row_mut(c as usize), w, &dcv);
            }
        }
        if alpha != 1.0 {
            let slots = model.categories(p.recipe)?;
            let low = bank.low_mean(slots);
            let mut dlow = vec![0.0; dim];
            sim.backward(
                &low,
                model.vectors.recipe.row(p.recipe as usize),
                (1.0 - alpha) * g,
                &mut dlow,
                grads.recipe.row_mut(p.recipe as usize),
            );
            let w = 1.0 / slots.len() as f64;
            for &c in slots {
                axpy(gbank.low.row_mut(c as usize), w, &dlow);
            }
        }
    }
    Ok((loss, grads))
}

/// Adam moments for every trainable tensor of a model.
#[derive(Clone, Debug)]
pub struct RecommenderOptimizer {
    personal: Vec<(AdamState, AdamState)>,
    recipe: AdamState,
    category: AdamState,
}

impl RecommenderOptimizer {
    pub fn new(model: &RecommenderModel) -> Self {
        let cfg = AdamConfig::with_lr(model.hyper.learning_rate);
        Self {
            personal: model
                .personal
                .iter()
                .enumerate()
                .map(|(u, b)| {
                    (
                        AdamState::for_matrix(format!("personal[{u}].high"), &b.high, cfg),
                        AdamState::for_matrix(format!("personal[{u}].low"), &b.low, cfg),
                    )
                })
                .collect(),
            recipe: AdamState::for_matrix("recipe", &model.vectors.recipe, cfg),
            category: AdamState::for_matrix("category", &model.vectors.category, cfg),
        }
    }
}

/// One Adam step on the batch loss; returns the loss before the step.
pub fn grad_step(model: &mut RecommenderModel, batch: &[LabeledPair], opt: &mut RecommenderOptimizer) -> Result<f64> {
    let (loss, grads) = loss_and_grads(model, batch)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("recommender loss {loss}")));
    }
    for ((bank, g), (sh, sl)) in model.personal.iter_mut().zip(&grads.personal).zip(&mut opt.personal) {
        adam_step(&mut bank.high, &g.high, sh)?;
        adam_step(&mut bank.low, &g.low, sl)?;
    }
    adam_step(&mut model.vectors.recipe, &grads.recipe, &mut opt.recipe)?;
    adam_step(&mut model.vectors.category, &grads.category, &mut opt.category)?;
    Ok(loss)
}

/// `high += z·β_h·v_c`; every slot in `slots` `+= z·β_l·v_r`.
pub fn write_update(bank: &mut MemoryBank, category_vec: &[f64], recipe_vec: &[f64], slots: &[u32], z: f64, beta_high: f64, beta_low: f64) {
    axpy(bank.high.data_mut(), z * beta_high, category_vec);
    for &c in slots {
        axpy(bank.low.row_mut(c as usize), z * beta_low, recipe_vec);
    }
}

impl RecommenderModel {
    /// Applies the write for `pair` to the user's personal bank and, unless
    /// general memory is disabled, to the bank of each of the user's tags.
    pub fn write_pair(&mut self, pair: &LabeledPair) -> Result<()> {
        self.check_user(pair.user)?;
        let cv = self.category_vector(pair.recipe)?;
        let rv = self.vectors.recipe.row(pair.recipe as usize).to_vec();
        let slots = self.categories(pair.recipe)?.to_vec();
        let h = &self.hyper;
        let beta_high = if h.variant == Variant::NoCategoryEmbedding { 0.0 } else { h.beta_high };
        let (z, beta_low) = (pair.sign(), h.beta_low);
        write_update(&mut self.personal[pair.user as usize], &cv, &rv, &slots, z, beta_high, beta_low);
        if h.variant != Variant::NoGeneralMemory {
            for &t in &self.user_tags[pair.user as usize] {
                write_update(&mut self.general[t as usize], &cv, &rv, &slots, z, beta_high, beta_low);
            }
        }
        Ok(())
    }

    /// Refreshes the personal bank of `user` from its tags' general banks.
    pub fn refresh_user(&mut self, user: UserId) -> Result<()> {
        self.check_user(user)?;
        let tags = &self.user_tags[user as usize];
        let generals: Vec<&MemoryBank> = tags.iter().map(|&t| &self.general[t as usize]).collect();
        let updated = refresh_personal(
            &self.personal[user as usize],
            &generals,
            self.hyper.lambda_high,
            self.hyper.lambda_low,
        )
        .map_err(|_| Error::Integrity(format!("user {user} has no tags to refresh from")))?;
        self.personal[user as usize] = updated;
        Ok(())
    }
}

/// `personal + λ · mean(generals)`, high and low parts separately.
pub fn refresh_personal(personal: &MemoryBank, generals: &[&MemoryBank], lambda_high: f64, lambda_low: f64) -> Result<MemoryBank> {
    if generals.is_empty() {
        return Err(Error::Integrity("refresh needs at least one general memory".into()));
    }
    let w = 1.0 / generals.len() as f64;
    let mut out = personal.clone();
    for g in generals {
        axpy(out.high.data_mut(), lambda_high * w, g.high.data());
        axpy(out.low.data_mut(), lambda_low * w, g.low.data());
    }
    Ok(out)
}
