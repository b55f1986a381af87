//! Finite-difference checks of every hand-derived gradient at tiny sizes.

use serde::Serialize;

use crate::error::Result;
use crate::numerics::{grad_check, GradCheckReport, Matrix, RngStream};
use crate::profiler::{backward, baseline_loss_and_grad, forward, loss_from_logits, BaselineParams, WircnnConfig, WircnnParams};
use crate::recommender::{
    bce_loss, loss_and_grads, Hyperparams, LabeledPair, MemoryBank, MfModel, RecipeVectors, RecommenderModel,
    Similarity, Variant,
};

pub const EPSILON: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, Serialize)]
pub struct NamedReport {
    pub model: String,
    pub report: GradCheckReport,
}

/// E=6, N=4, M=8, H=5.
pub fn tiny_profiler_config() -> WircnnConfig {
    WircnnConfig {
        embed_dim: 6,
        n_classes: 4,
        max_len: 8,
        hidden: 5,
        conv_widths: vec![2, 3, 4],
        filters_per_width: 3,
        init_scale: 0.5,
        ..WircnnConfig::default()
    }
}

const TINY_VOCAB: usize = 12;
const LABELS: [f64; 4] = [1.0, 0.0, 1.0, 0.0];

fn random_tokens(rng: &mut RngStream, len: usize) -> Vec<u32> {
    (0..len).map(|_| 2 + rng.below(TINY_VOCAB - 2) as u32).collect()
}

pub fn check_profiler(seed: u64) -> Result<GradCheckReport> {
    let cfg = tiny_profiler_config();
    let mut rng = RngStream::new(seed);
    let params = WircnnParams::init(&cfg, TINY_VOCAB, &mut rng);
    // Longer than M so truncation is exercised too.
    let tokens = random_tokens(&mut rng, cfg.max_len + 2);
    let (_, cache) = forward(&params, &cfg, &tokens)?;
    let grads = backward(&params, &cfg, &cache, &LABELS)?;
    let values: Vec<Matrix> = params.tensors().into_iter().map(|(_, m)| m.clone()).collect();
    let analytic: Vec<Matrix> = grads.tensors().into_iter().map(|(_, m)| m.clone()).collect();
    grad_check(
        |ps| {
            let mut q = params.clone();
            q.set_tensors(ps)?;
            let (_, c) = forward(&q, &cfg, &tokens)?;
            loss_from_logits(&c.logits, &LABELS)
        },
        &values,
        &params.tensor_names(),
        &analytic,
        EPSILON,
        TOLERANCE,
    )
}

pub fn check_baseline(seed: u64) -> Result<GradCheckReport> {
    let cfg = tiny_profiler_config();
    let mut rng = RngStream::new(seed);
    let mut params = BaselineParams::init(&cfg, TINY_VOCAB, &mut rng);
    params.bias = Matrix::uniform(1, cfg.n_classes, -0.5, 0.5, &mut rng);
    let tokens = random_tokens(&mut rng, 6);
    let (_, g) = baseline_loss_and_grad(&params, &tokens, &LABELS)?;
    let values = vec![params.embedding.clone(), params.weight.clone(), params.bias.clone()];
    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    grad_check(
        |ps| {
            let q = BaselineParams {
                embedding: ps[0].clone(),
                weight: ps[1].clone(),
                bias: ps[2].clone(),
            };
            Ok(baseline_loss_and_grad(&q, &tokens, &LABELS)?.0)
        },
        &values,
        &names,
        &[g.embedding, g.weight, g.bias],
        EPSILON,
        TOLERANCE,
    )
}

/// 3 users, 5 recipes (one of them in two categories), 2 categories, 2 tags.
pub fn tiny_recommender(hyper: Hyperparams, seed: u64) -> RecommenderModel {
    let mut rng = RngStream::new(seed);
    let (nc, e) = (2, hyper.dim);
    let bank = |rng: &mut RngStream| MemoryBank {
        high: Matrix::uniform(1, e, -1.0, 1.0, rng),
        low: Matrix::uniform(nc, e, -1.0, 1.0, rng),
    };
    RecommenderModel {
        personal: (0..3).map(|_| bank(&mut rng)).collect(),
        general: (0..2).map(|_| bank(&mut rng)).collect(),
        vectors: RecipeVectors {
            recipe: Matrix::uniform(5, e, -1.0, 1.0, &mut rng),
            category: Matrix::uniform(nc, e, -1.0, 1.0, &mut rng),
        },
        recipe_categories: vec![vec![0], vec![1], vec![0, 1], vec![0], vec![1]],
        user_tags: vec![vec![0], vec![1], vec![0, 1]],
        hyper,
    }
}

fn tiny_batch() -> [LabeledPair; 6] {
    [
        LabeledPair::positive(0, 0),
        LabeledPair::negative(0, 2),
        LabeledPair::positive(1, 1),
        LabeledPair::negative(1, 3),
        LabeledPair::positive(2, 2),
        LabeledPair::negative(2, 4),
    ]
}

pub fn check_recommender(hyper: Hyperparams, seed: u64) -> Result<GradCheckReport> {
    let model = tiny_recommender(hyper, seed);
    let batch = tiny_batch();
    let (_, g) = loss_and_grads(&model, &batch)?;
    let n_users = model.personal.len();
    let mut params = Vec::new();
    let mut analytic = Vec::new();
    let mut names = Vec::new();
    for (u, (b, gb)) in model.personal.iter().zip(&g.personal).enumerate() {
        params.extend([b.high.clone(), b.low.clone()]);
        analytic.extend([gb.high.clone(), gb.low.clone()]);
        names.extend([format!("personal.{u}.high"), format!("personal.{u}.low")]);
    }
    params.extend([model.vectors.recipe.clone(), model.vectors.category.clone()]);
    analytic.extend([g.recipe, g.category]);
    names.extend(["recipe".to_string(), "category".to_string()]);
    grad_check(
        |ps| {
            let mut m = model.clone();
            for (u, b) in m.personal.iter_mut().enumerate() {
                b.high = ps[2 * u].clone();
                b.low = ps[2 * u + 1].clone();
            }
            m.vectors.recipe = ps[2 * n_users].clone();
            m.vectors.category = ps[2 * n_users + 1].clone();
            bce_loss(&m, &batch)
        },
        &params,
        &names,
        &analytic,
        EPSILON,
        TOLERANCE,
    )
}

pub fn check_mf(seed: u64) -> Result<GradCheckReport> {
    let mut rng = RngStream::new(seed);
    let m = MfModel {
        users: Matrix::uniform(3, 4, -1.0, 1.0, &mut rng),
        recipes: Matrix::uniform(5, 4, -1.0, 1.0, &mut rng),
    };
    let batch = tiny_batch();
    let (_, g) = m.loss_and_grads(&batch)?;
    grad_check(
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
        EPSILON,
        TOLERANCE,
    )
}

/// Every model and recommender variant, each from its own sub-seed.
pub fn check_all(seed: u64) -> Result<Vec<NamedReport>> {
    let root = RngStream::new(seed);
    let rec = Hyperparams { dim: 4, ..Hyperparams::default() };
    let mut out = vec![
        ("wircnn".to_string(), check_profiler(root.derive_seed("wircnn", 0))?),
        ("avg-embedding".to_string(), check_baseline(root.derive_seed("avg-embedding", 0))?),
    ];
    for (i, similarity) in [Similarity::Inner, Similarity::Cosine].into_iter().enumerate() {
        for (j, variant) in Variant::ALL.into_iter().enumerate() {
            let h = Hyperparams {
                similarity,
                variant,
                alpha: 0.3,
                ..rec.clone()
            };
            let name = format!("recommender/{}/{}", similarity.name(), variant.name());
            out.push((name, check_recommender(h, root.derive_seed("recommender", (3 * i + j) as u64))?));
        }
    }
    out.push(("mf".to_string(), check_mf(root.derive_seed("mf", 0))?));
    Ok(out.into_iter().map(|(model, report)| NamedReport { model, report }).collect())
}
