use std::collections::BTreeMap;

use serde::Serialize;

use crate::corpus::{RecipeId, TestCase, UserId};
use crate::error::{Error, Result};

/// Anything that can score a (user, recipe) pair; higher ranks earlier.
pub trait Scorer {
    fn score(&self, user: UserId, recipe: RecipeId) -> Result<f64>;
}

impl<F> Scorer for F
where
    F: Fn(UserId, RecipeId) -> f64,
{
    fn score(&self, user: UserId, recipe: RecipeId) -> Result<f64> {
        Ok(self(user, recipe))
    }
}

/// Orders `(id, score)` by score descending, ties by id ascending.
pub fn rank_by_scores(scored: &[(RecipeId, f64)]) -> Vec<RecipeId> {
    let mut v = scored.to_vec();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.into_iter().map(|(id, _)| id).collect()
}

/// 1-based rank of `positive` in `ranked`.
pub fn rank_of(ranked: &[RecipeId], positive: RecipeId) -> Result<usize> {
    ranked
        .iter()
        .position(|&r| r == positive)
        .map(|p| p + 1)
        .ok_or_else(|| Error::Input(format!("positive {positive} not in ranked list")))
}

fn check_k(ranked: &[RecipeId], k: usize) -> Result<()> {
    if k == 0 || k > ranked.len() {
        return Err(Error::Input(format!("k={k} outside 1..={}", ranked.len())));
    }
    Ok(())
}

pub fn hr_at_k(ranked: &[RecipeId], positive: RecipeId, k: usize) -> Result<f64> {
    check_k(ranked, k)?;
    Ok(if rank_of(ranked, positive)? <= k { 1.0 } else { 0.0 })
}

/// Single relevant item, so IDCG = 1 and NDCG = 1/log₂(1+rank) inside the cutoff.
pub fn ndcg_at_k(ranked: &[RecipeId], positive: RecipeId, k: usize) -> Result<f64> {
    check_k(ranked, k)?;
    let rank = rank_of(ranked, positive)?;
    Ok(if rank <= k {
        1.0 / ((1 + rank) as f64).log2()
    } else {
        0.0
    })
}

/// Share of negatives scored strictly below the positive; ties count one half.
pub fn auc(positive: f64, negatives: &[f64]) -> Result<f64> {
    if negatives.is_empty() {
        return Err(Error::Input("auc needs at least one negative".into()));
    }
    let wins: f64 = negatives
        .iter()
        .map(|&n| {
            if positive > n {
                1.0
            } else if positive == n {
                0.5
            } else {
                0.0
            }
        })
        .sum();
    Ok(wins / negatives.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankedTestCase {
    pub user: UserId,
    pub positive: RecipeId,
    pub negatives: Vec<RecipeId>,
    pub ranked: Vec<RecipeId>,
    pub positive_score: f64,
    pub negative_scores: Vec<f64>,
}

pub fn rank_test_case<S: Scorer + ?Sized>(scorer: &S, case: &TestCase) -> Result<RankedTestCase> {
    let positive_score = scorer.score(case.user, case.positive)?;
    let negative_scores = case
        .negatives
        .iter()
        .map(|&r| scorer.score(case.user, r))
        .collect::<Result<Vec<_>>>()?;
    let scored: Vec<(RecipeId, f64)> = std::iter::once((case.positive, positive_score))
        .chain(case.negatives.iter().copied().zip(negative_scores.iter().copied()))
        .collect();
    Ok(RankedTestCase {
        user: case.user,
        positive: case.positive,
        negatives: case.negatives.clone(),
        ranked: rank_by_scores(&scored),
        positive_score,
        negative_scores,
    })
}

pub const RANKING_METRICS: [&str; 5] = ["hr@5", "ndcg@5", "hr@10", "ndcg@10", "auc"];

/// HR@5/10, NDCG@5/10 and AUC averaged over test cases, reduced in case order.
pub fn ranking_metrics<S: Scorer + ?Sized>(scorer: &S, cases: &[TestCase]) -> Result<BTreeMap<String, f64>> {
    if cases.is_empty() {
        return Err(Error::Input("no test cases to evaluate".into()));
    }
    let mut sums = [0.0f64; 5];
    for case in cases {
        let rc = rank_test_case(scorer, case)?;
        let k10 = 10.min(rc.ranked.len());
        let k5 = 5.min(rc.ranked.len());
        sums[0] += hr_at_k(&rc.ranked, rc.positive, k5)?;
        sums[1] += ndcg_at_k(&rc.ranked, rc.positive, k5)?;
        sums[2] += hr_at_k(&rc.ranked, rc.positive, k10)?;
        sums[3] += ndcg_at_k(&rc.ranked, rc.positive, k10)?;
        sums[4] += auc(rc.positive_score, &rc.negative_scores)?;
    }
    let n = cases.len() as f64;
    Ok(RANKING_METRICS
        .iter()
        .zip(sums)
        .map(|(name, s)| (name.to_string(), s / n))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hit_ratio() {
        let ranked = [7, 1, 2, 3, 4, 5, 6];
        assert_eq!(hr_at_k(&ranked, 7, 5).unwrap(), 1.0);
        assert_eq!(hr_at_k(&ranked, 5, 5).unwrap(), 0.0);
        assert!(hr_at_k(&ranked, 99, 5).is_err());
        assert!(hr_at_k(&ranked, 7, 0).is_err());
        assert!(hr_at_k(&ranked, 7, 8).is_err());
    }

    #[test]
    fn ndcg_values() {
        let ranked = [1, 2, 3, 4, 5, 6, 7];
        assert_eq!(ndcg_at_k(&ranked, 1, 5).unwrap(), 1.0);
        assert_eq!(ndcg_at_k(&ranked, 3, 5).unwrap(), 0.5);
        assert_eq!(ndcg_at_k(&ranked, 7, 5).unwrap(), 0.0);
    }

    #[test]
    fn auc_values() {
        assert_eq!(auc(1.0, &[0.0; 50]).unwrap(), 1.0);
        assert_eq!(auc(0.3, &[0.3; 50]).unwrap(), 0.5);
        let a = auc(0.7, &[0.9, 0.5, 0.5]).unwrap();
        assert!((a - 2.0 / 3.0).abs() < 1e-15);
        assert!(auc(0.1, &[]).is_err());
    }

    #[test]
    fn tie_order_is_by_id() {
        assert_eq!(rank_by_scores(&[(9, 1.0), (4, 1.0), (5, 2.0)]), vec![5, 4, 9]);
    }

    proptest! {
        #[test]
        fn hr_monotone_and_ndcg_bounded(perm in Just((0u32..12).collect::<Vec<_>>()).prop_shuffle(), pos in 0u32..12) {
            let mut prev = 0.0;
            for k in 1..=perm.len() {
                let hr = hr_at_k(&perm, pos, k).unwrap();
                let nd = ndcg_at_k(&perm, pos, k).unwrap();
                prop_assert!(hr >= prev);
                prop_assert!(nd <= hr);
                prev = hr;
            }
        }

        #[test]
        fn auc_complement(pos in -5.0f64..5.0, negs in proptest::collection::vec(-5.0f64..5.0, 1..20)) {
            prop_assume!(negs.iter().all(|&n| n != pos));
            let flipped: Vec<f64> = negs.iter().map(|n| -n).collect();
            let sum = auc(pos, &negs).unwrap() + auc(-pos, &flipped).unwrap();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn metrics_invariant_under_monotone_transform(scores in proptest::collection::vec(-3.0f64..3.0, 2..10)) {
            let scored: Vec<(u32, f64)> = scores.iter().enumerate().map(|(i, &s)| (i as u32, s)).collect();
            let squashed: Vec<(u32, f64)> = scored.iter().map(|&(i, s)| (i, s.exp())).collect();
            prop_assert_eq!(rank_by_scores(&scored), rank_by_scores(&squashed));
            let a = auc(scores[0], &scores[1..]).unwrap();
            let exps: Vec<f64> = scores[1..].iter().map(|s| s.exp()).collect();
            prop_assert_eq!(a, auc(scores[0].exp(), &exps).unwrap());
        }
    }
}
