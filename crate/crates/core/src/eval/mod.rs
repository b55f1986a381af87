//! Ranking and multi-label metrics, k-fold cross validation and repeated
//! leave-one-out evaluation.

mod classification;
mod ranking;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use classification::{micro_macro_f1, ConfusionCounts, F1Scores};
pub use ranking::{
    auc, hr_at_k, ndcg_at_k, rank_by_scores, rank_of, rank_test_case, ranking_metrics, RankedTestCase,
    Scorer, RANKING_METRICS,
};

use crate::corpus::{leave_one_out_split, InteractionSet, Split};
use crate::error::{Error, Result};
use crate::numerics::RngStream;

pub const TEST_NEGATIVES: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean ± sample standard deviation of each metric over runs or folds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub runs: usize,
    pub metrics: BTreeMap<String, MeanStd>,
    pub per_run: Vec<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl MetricsReport {
    pub fn from_runs(per_run: Vec<BTreeMap<String, f64>>) -> Self {
        let mut metrics = BTreeMap::new();
        let names: Vec<String> = per_run
            .iter()
            .flat_map(|r| r.keys().cloned())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        for name in names {
            let xs: Vec<f64> = per_run.iter().filter_map(|r| r.get(&name).copied()).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let std = if xs.len() > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            metrics.insert(name, MeanStd { mean, std });
        }
        Self {
            runs: per_run.len(),
            metrics,
            per_run,
            notes: Vec::new(),
        }
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.metrics.get(metric).map(|m| m.mean)
    }

    pub fn std(&self, metric: &str) -> Option<f64> {
        self.metrics.get(metric).map(|m| m.std)
    }

    /// Aligned `metric  mean ± std` table.
    pub fn to_table(&self) -> String {
        let width = self.metrics.keys().map(String::len).max().unwrap_or(6).max(6);
        let mut out = format!("{:<width$}  {:>8}  {:>8}\n", "metric", "mean", "std");
        for (name, m) in &self.metrics {
            let _ = writeln!(out, "{name:<width$}  {:>8.4}  {:>8.4}", m.mean, m.std);
        }
        let _ = writeln!(out, "({} runs)", self.runs);
        for note in &self.notes {
            let _ = writeln!(out, "note: {note}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize") + "\n"
    }

    /// Writes `metrics.json` and `metrics.txt` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join("metrics.json");
        fs::write(&json, self.to_json()).map_err(|e| Error::io(&json, e))?;
        let txt = dir.join("metrics.txt");
        fs::write(&txt, self.to_table()).map_err(|e| Error::io(&txt, e))
    }
}

/// Shuffles `0..n` with `seed` and cuts it into `k` contiguous folds whose
/// sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || n < k {
        return Err(Error::Input(format!("cannot cut {n} items into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    RngStream::new(seed).fork("folds").shuffle(&mut order);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = order[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

/// k-fold cross validation over `n` items. `trainer(fold, train, test)`
/// fits on `train` and returns the metrics measured on `test`.
pub fn k_fold_cv<F>(n: usize, k: usize, seed: u64, mut trainer: F) -> Result<MetricsReport>
where
    F: FnMut(usize, &[usize], &[usize]) -> Result<BTreeMap<String, f64>>,
{
    let folds = fold_assignment(n, k, seed)?;
    let mut per_fold = Vec::with_capacity(k);
    for (f, test) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        per_fold.push(trainer(f, &train, test)?);
    }
    Ok(MetricsReport::from_runs(per_fold))
}

pub fn ten_fold_cv<F>(n: usize, seed: u64, trainer: F) -> Result<MetricsReport>
where
    F: FnMut(usize, &[usize], &[usize]) -> Result<BTreeMap<String, f64>>,
{
    k_fold_cv(n, 10, seed, trainer)
}

/// Repeated leave-one-out evaluation. Every run draws a fresh split from its
/// own seed, lets `fit` train on it, and ranks each held-out positive against
/// its held-out negatives.
pub fn evaluate_recommender<S, F>(
    interactions: &InteractionSet,
    runs: usize,
    seed: u64,
    mut fit: F,
) -> Result<MetricsReport>
where
    S: Scorer,
    F: FnMut(usize, &Split) -> Result<S>,
{
    if runs == 0 {
        return Err(Error::Input("runs must be at least 1".into()));
    }
    let root = RngStream::new(seed);
    let mut per_run = Vec::with_capacity(runs);
    let mut excluded = 0;
    for run in 0..runs {
        let split = leave_one_out_split(interactions, TEST_NEGATIVES, run_split_seed(&root, run));
        excluded = split.report.excluded.len();
        let scorer = fit(run, &split)?;
        per_run.push(ranking_metrics(&scorer, &split.test)?);
    }
    let mut report = MetricsReport::from_runs(per_run);
    if excluded > 0 {
        report
            .notes
            .push(format!("{excluded} users lacked enough interactions for a test case"));
    }
    Ok(report)
}

/// Split seed used by run `run` of [`evaluate_recommender`] under `root`.
pub fn run_split_seed(root: &RngStream, run: usize) -> u64 {
    root.derive_seed("eval-run", run as u64)
}
