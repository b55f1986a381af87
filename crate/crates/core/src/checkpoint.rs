//! Versioned JSON container for every trained model: a kind tag, the config
//! it was trained with, and a list of named tensors.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::profiler::{BaselineParams, ProfilerKind, ProfilerWeights, TrainedProfiler, Vocab, WircnnConfig, WircnnParams};
use crate::recommender::{
    Hyperparams, Item2VecConfig, ItemEmbeddings, MemoryBank, MfConfig, MfModel, RecipeVectors, RecommenderModel,
};

pub const FORMAT: &str = "dishrec-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Wircnn,
    AvgEmbedding,
    Recommender,
    Mf,
    Item2vec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub tensor: Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub config: Value,
    /// Non-tensor structure a model needs to score (vocabulary, category
    /// lists, tag lists).
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub layout: Value,
    /// How the model was trained (seed, epochs, data split), when known.
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub training: Value,
    pub tensors: Vec<NamedTensor>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("config serializes")
}

fn from_value<T: for<'de> Deserialize<'de>>(v: &Value, what: &str) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| Error::Checkpoint(format!("bad {what}: {e}")))
}

impl Checkpoint {
    fn new(kind: ModelKind, config: Value, layout: Value, tensors: Vec<(String, Matrix)>) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            kind,
            config,
            layout,
            training: Value::Null,
            tensors: tensors.into_iter().map(|(name, tensor)| NamedTensor { name, tensor }).collect(),
        }
    }

    pub fn with_training<T: Serialize>(mut self, record: &T) -> Self {
        self.training = to_value(record);
        self
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let text = serde_json::to_string(self).expect("checkpoint serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if ck.format != FORMAT {
            return Err(Error::Checkpoint(format!("{}: not a {FORMAT} file", path.display())));
        }
        if ck.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "{}: version {} unsupported (expected {VERSION})",
                path.display(),
                ck.version
            )));
        }
        Ok(ck)
    }

    fn expect_kind(&self, kinds: &[ModelKind]) -> Result<()> {
        if kinds.contains(&self.kind) {
            Ok(())
        } else {
            Err(Error::Checkpoint(format!("expected a {kinds:?} checkpoint, found {:?}", self.kind)))
        }
    }

    /// Copies the stored tensors into `slots`, matching names and shapes.
    fn fill(&self, slots: Vec<(String, &mut Matrix)>) -> Result<()> {
        if slots.len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                slots.len(),
                self.tensors.len()
            )));
        }
        for ((name, slot), stored) in slots.into_iter().zip(&self.tensors) {
            if name != stored.name {
                return Err(Error::Checkpoint(format!("expected tensor {name}, found {}", stored.name)));
            }
            if slot.shape() != stored.tensor.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name}: shape {} where {} was expected",
                    stored.tensor.shape_str(),
                    slot.shape_str()
                )));
            }
            *slot = stored.tensor.clone();
        }
        Ok(())
    }

    pub fn from_profiler(p: &TrainedProfiler) -> Self {
        let kind = match p.kind() {
            ProfilerKind::Wircnn => ModelKind::Wircnn,
            ProfilerKind::AvgEmbedding => ModelKind::AvgEmbedding,
        };
        let tensors = p.weights.tensors().into_iter().map(|(n, m)| (n, m.clone())).collect();
        let layout = serde_json::json!({ "vocab": p.vocab, "loss_trace": p.loss_trace });
        Self::new(kind, to_value(&p.config), layout, tensors)
    }

    pub fn to_profiler(&self) -> Result<TrainedProfiler> {
        self.expect_kind(&[ModelKind::Wircnn, ModelKind::AvgEmbedding])?;
        let config: WircnnConfig = from_value(&self.config, "profiler config")?;
        config.validate()?;
        let vocab: Vocab = from_value(&self.layout["vocab"], "vocabulary")?;
        let loss_trace: Vec<f64> = from_value(&self.layout["loss_trace"], "loss trace")?;
        let weights = if self.kind == ModelKind::Wircnn {
            let mut p = WircnnParams::zeros(&config, vocab.len());
            self.fill(p.tensors_mut())?;
            p.mark_updated();
            ProfilerWeights::Wircnn(p)
        } else {
            let mut p = BaselineParams::zeros(&config, vocab.len());
            self.fill(p.tensors_mut())?;
            ProfilerWeights::AvgEmbedding(p)
        };
        Ok(TrainedProfiler {
            config,
            vocab,
            weights,
            loss_trace,
        })
    }

    pub fn from_recommender(m: &RecommenderModel) -> Self {
        let mut tensors = Vec::with_capacity(2 * (m.personal.len() + m.general.len()) + 2);
        for (side, banks) in [("personal", &m.personal), ("general", &m.general)] {
            for (i, b) in banks.iter().enumerate() {
                tensors.push((format!("{side}.{i}.high"), b.high.clone()));
                tensors.push((format!("{side}.{i}.low"), b.low.clone()));
            }
        }
        tensors.push(("recipe".into(), m.vectors.recipe.clone()));
        tensors.push(("category".into(), m.vectors.category.clone()));
        let layout = serde_json::json!({
            "recipe_categories": m.recipe_categories,
            "user_tags": m.user_tags,
        });
        Self::new(ModelKind::Recommender, to_value(&m.hyper), layout, tensors)
    }

    pub fn to_recommender(&self) -> Result<RecommenderModel> {
        self.expect_kind(&[ModelKind::Recommender])?;
        let hyper: Hyperparams = from_value(&self.config, "hyperparameters")?;
        hyper.validate()?;
        let recipe_categories: Vec<Vec<u32>> = from_value(&self.layout["recipe_categories"], "recipe categories")?;
        let user_tags: Vec<Vec<u32>> = from_value(&self.layout["user_tags"], "user tags")?;
        let n_categories = self
            .tensors
            .iter()
            .find(|t| t.name == "category")
            .map(|t| t.tensor.rows())
            .ok_or_else(|| Error::Checkpoint("missing category tensor".into()))?;
        let n_tags = self.tensors.iter().filter(|t| t.name.starts_with("general.")).count() / 2;
        let (e, nc) = (hyper.dim, n_categories);
        let mut m = RecommenderModel {
            personal: vec![MemoryBank::zeros(nc, e); user_tags.len()],
            general: vec![MemoryBank::zeros(nc, e); n_tags],
            vectors: RecipeVectors {
                recipe: Matrix::zeros(recipe_categories.len(), e),
                category: Matrix::zeros(nc, e),
            },
            recipe_categories,
            user_tags,
            hyper,
        };
        let mut slots = Vec::new();
        for (side, banks) in [("personal", &mut m.personal), ("general", &mut m.general)] {
            for (i, b) in banks.iter_mut().enumerate() {
                slots.push((format!("{side}.{i}.high"), &mut b.high));
                slots.push((format!("{side}.{i}.low"), &mut b.low));
            }
        }
        slots.push(("recipe".into(), &mut m.vectors.recipe));
        slots.push(("category".into(), &mut m.vectors.category));
        self.fill(slots)?;
        Ok(m)
    }

    pub fn from_mf(m: &MfModel, config: &MfConfig) -> Self {
        let tensors = vec![("users".into(), m.users.clone()), ("recipes".into(), m.recipes.clone())];
        Self::new(ModelKind::Mf, to_value(config), Value::Null, tensors)
    }

    pub fn to_mf(&self) -> Result<(MfModel, MfConfig)> {
        self.expect_kind(&[ModelKind::Mf])?;
        let config: MfConfig = from_value(&self.config, "MF config")?;
        let [users, recipes] = self.pair()?;
        Ok((MfModel { users, recipes }, config))
    }

    pub fn from_item2vec(emb: &ItemEmbeddings, config: &Item2VecConfig) -> Self {
        let tensors = vec![("users".into(), emb.users.clone()), ("recipes".into(), emb.recipes.clone())];
        Self::new(ModelKind::Item2vec, to_value(config), Value::Null, tensors)
    }

    pub fn to_item2vec(&self) -> Result<(ItemEmbeddings, Item2VecConfig)> {
        self.expect_kind(&[ModelKind::Item2vec])?;
        let config: Item2VecConfig = from_value(&self.config, "item2vec config")?;
        let [users, recipes] = self.pair()?;
        if users.cols() != recipes.cols() {
            return Err(Error::Checkpoint("user and recipe embeddings differ in width".into()));
        }
        Ok((ItemEmbeddings { users, recipes }, config))
    }

    /// The `users` and `recipes` tensors of a two-table model.
    fn pair(&self) -> Result<[Matrix; 2]> {
        match self.tensors.as_slice() {
            [u, r] if u.name == "users" && r.name == "recipes" => Ok([u.tensor.clone(), r.tensor.clone()]),
            _ => Err(Error::Checkpoint("expected tensors users and recipes".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, GeneratorConfig};
    use crate::numerics::RngStream;
    use crate::recommender::init_model;

    fn corpus() -> crate::corpus::Corpus {
        let cfg = GeneratorConfig { n_users: 20, ..GeneratorConfig::desk() };
        generate_synthetic(&cfg, 2).unwrap()
    }

    #[test]
    fn recommender_round_trip_is_exact() {
        let c = corpus();
        let h = Hyperparams { dim: 6, ..Hyperparams::default() };
        let m = init_model(&c, &h, &mut RngStream::new(1), None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        Checkpoint::from_recommender(&m).save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap().to_recommender().unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn profiler_round_trip_is_exact() {
        let c = corpus();
        let users: Vec<_> = c.users.iter().collect();
        let cfg = WircnnConfig {
            embed_dim: 4,
            hidden: 3,
            max_len: 12,
            filters_per_width: 2,
            ..WircnnConfig::desk(c.tags.len())
        };
        for kind in [ProfilerKind::Wircnn, ProfilerKind::AvgEmbedding] {
            let p = crate::profiler::train_kind(kind, &users, &cfg, 1, 3).unwrap();
            let back = serde_json::from_str::<Checkpoint>(&serde_json::to_string(&Checkpoint::from_profiler(&p)).unwrap())
                .unwrap()
                .to_profiler()
                .unwrap();
            assert_eq!(back.vocab, p.vocab);
            assert_eq!(back.weights.tensors(), p.weights.tensors());
            assert_eq!(back.probabilities(&c.users[0].tokens).unwrap(), p.probabilities(&c.users[0].tokens).unwrap());
        }
    }

    #[test]
    fn wrong_kind_version_and_shape_are_rejected() {
        let emb = ItemEmbeddings {
            users: Matrix::zeros(2, 3),
            recipes: Matrix::zeros(4, 3),
        };
        let mut ck = Checkpoint::from_item2vec(&emb, &Item2VecConfig::default());
        assert!(matches!(ck.to_mf(), Err(Error::Checkpoint(_))));
        assert_eq!(ck.to_item2vec().unwrap().0, emb);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        ck.version = VERSION + 1;
        ck.save(&path).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Checkpoint(_))));

        std::fs::write(&path, r#"{"format":"dishrec-checkpoint","version":1,"kind":"mf","config":{},"tensors":[{"name":"users","tensor":{"rows":2,"cols":2,"data":[1.0]}}]}"#).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Checkpoint(_))));
    }
}
