//! Python bindings: corpus generation, retrieve-then-rank with a trained
//! checkpoint, health-tag prediction, the ranking metrics and the CLI.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dishrec::checkpoint::Checkpoint;
use dishrec::cli::{model_file, run_args, Scale};
use dishrec::corpus::{generate_synthetic, load_corpus, save_corpus, Corpus};
use dishrec::eval::Scorer;
use dishrec::profiler::TrainedProfiler;
use dishrec::serving::{load_scorer, recommend, resolve_ingredients};

fn to_py(e: dishrec::Error) -> PyErr {
    match e {
        dishrec::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Writes a synthetic corpus of six JSONL files to `out_dir`.
#[pyfunction]
#[pyo3(signature = (out_dir, seed, scale = "desk", users = None))]
fn generate_corpus(out_dir: PathBuf, seed: u64, scale: &str, users: Option<usize>) -> PyResult<()> {
    let scale = match scale {
        "desk" => Scale::Desk,
        "full" => Scale::Full,
        other => return Err(PyValueError::new_err(format!("unknown scale {other:?}; expected desk or full"))),
    };
    let mut config = scale.generator();
    if let Some(n) = users {
        config.n_users = n;
    }
    let corpus = generate_synthetic(&config, seed).map_err(to_py)?;
    save_corpus(&corpus, out_dir).map_err(to_py)
}

/// A memory-network or MF checkpoint together with the corpus it ranks.
#[pyclass(frozen)]
struct Recommender {
    corpus: Corpus,
    scorer: Box<dyn Scorer + Send + Sync>,
}

#[pymethods]
impl Recommender {
    #[new]
    fn new(model: PathBuf, data: PathBuf) -> PyResult<Self> {
        let corpus = load_corpus(&data).map_err(to_py)?;
        let scorer = load_scorer(&model_file(&model), &corpus).map_err(to_py)?;
        Ok(Self { corpus, scorer })
    }

    fn score(&self, user: u32, recipe: u32) -> PyResult<f64> {
        self.scorer.score(user, recipe).map_err(to_py)
    }

    /// Best recipes the ingredients cover; `ingredients` defaults to the
    /// user's own inventory. Each entry is a dict with rank, recipe, name,
    /// score and coverage.
    #[pyo3(signature = (user, ingredients = None, top = 10, min_coverage = 1.0))]
    fn recommend<'py>(
        &self,
        py: Python<'py>,
        user: u32,
        ingredients: Option<Vec<String>>,
        top: usize,
        min_coverage: f64,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let inventory = match ingredients {
            Some(names) => resolve_ingredients(&self.corpus, &names).map_err(to_py)?,
            None => self
                .corpus
                .user(user)
                .ok_or_else(|| PyValueError::new_err(format!("unknown user {user}")))?
                .inventory
                .clone(),
        };
        let recs = recommend(&self.corpus, self.scorer.as_ref(), user, &inventory, min_coverage, top).map_err(to_py)?;
        recs.into_iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("rank", r.rank)?;
                d.set_item("recipe", r.recipe)?;
                d.set_item("name", r.name)?;
                d.set_item("score", r.score)?;
                d.set_item("coverage", r.coverage)?;
                Ok(d)
            })
            .collect()
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.corpus.users.len()
    }

    #[getter]
    fn n_recipes(&self) -> usize {
        self.corpus.recipes.len()
    }
}

#[pyclass(frozen)]
struct Profiler {
    inner: TrainedProfiler,
}

#[pymethods]
impl Profiler {
    #[new]
    fn new(model: PathBuf) -> PyResult<Self> {
        let ck = Checkpoint::load(model_file(&model)).map_err(to_py)?;
        Ok(Self { inner: ck.to_profiler().map_err(to_py)? })
    }

    fn predict_tags(&self, tokens: Vec<String>) -> PyResult<Vec<u32>> {
        self.inner.predict_tags(&tokens).map_err(to_py)
    }

    fn probabilities(&self, tokens: Vec<String>) -> PyResult<Vec<f64>> {
        Ok(self.inner.probabilities(&tokens).map_err(to_py)?.0)
    }
}

#[pyfunction]
fn hr_at_k(ranked: Vec<u32>, positive: u32, k: usize) -> PyResult<f64> {
    dishrec::eval::hr_at_k(&ranked, positive, k).map_err(to_py)
}

#[pyfunction]
fn ndcg_at_k(ranked: Vec<u32>, positive: u32, k: usize) -> PyResult<f64> {
    dishrec::eval::ndcg_at_k(&ranked, positive, k).map_err(to_py)
}

#[pyfunction]
fn auc(positive: f64, negatives: Vec<f64>) -> PyResult<f64> {
    dishrec::eval::auc(positive, &negatives).map_err(to_py)
}

/// `(model, max relative error, passed)` for every gradient check.
#[pyfunction]
fn grad_check(seed: u64) -> PyResult<Vec<(String, f64, bool)>> {
    Ok(dishrec::diagnostics::check_all(seed)
        .map_err(to_py)?
        .into_iter()
        .map(|r| (r.model, r.report.max_rel_error(), r.report.passed()))
        .collect())
}

/// Runs the command line with `args` (without the program name) and
/// returns its exit status.
#[pyfunction]
fn run_cli(args: Vec<String>) -> u8 {
    run_args(std::iter::once("dishrec".to_string()).chain(args))
}

/// Adds every class and function to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Recommender>()?;
    m.add_class::<Profiler>()?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(hr_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(ndcg_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(grad_check, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}

#[pymodule]
fn dishrec_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
