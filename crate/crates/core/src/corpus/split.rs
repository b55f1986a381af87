use serde::{Deserialize, Serialize};

use super::{InteractionSet, RecipeId, UserId, UserInteractions};
use crate::numerics::RngStream;

/// One leave-one-out test case: a held-out positive ranked against held-out negatives.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub user: UserId,
    pub positive: RecipeId,
    pub negatives: Vec<RecipeId>,
}

impl TestCase {
    /// Positive first, then the negatives.
    pub fn candidates(&self) -> Vec<RecipeId> {
        std::iter::once(self.positive).chain(self.negatives.iter().copied()).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitReport {
    /// Users that could not supply a test case; their interactions stay in train.
    pub excluded: Vec<UserId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: InteractionSet,
    pub test: Vec<TestCase>,
    pub report: SplitReport,
}

/// Holds out one positive and `negatives_per_test` negatives per user.
///
/// A user needs at least two positives and `negatives_per_test + 1`
/// negatives so that something of each kind is left to train on.
pub fn leave_one_out_split(interactions: &InteractionSet, negatives_per_test: usize, seed: u64) -> Split {
    let root = RngStream::new(seed);
    let mut train = Vec::with_capacity(interactions.users.len());
    let mut test = Vec::new();
    let mut report = SplitReport::default();
    for ui in &interactions.users {
        if ui.pos.len() < 2 || ui.neg.len() < negatives_per_test + 1 {
            log::warn!(
                "user {} excluded from the test split ({} positives, {} negatives)",
                ui.user,
                ui.pos.len(),
                ui.neg.len()
            );
            report.excluded.push(ui.user);
            train.push(ui.clone());
            continue;
        }
        let mut rng = root.fork_indexed("user", u64::from(ui.user));
        let held_pos = rng.below(ui.pos.len());
        let mut held_neg = rng.sample_indices(ui.neg.len(), negatives_per_test);
        held_neg.sort_unstable();
        let negatives: Vec<RecipeId> = held_neg.iter().map(|&i| ui.neg[i]).collect();
        test.push(TestCase {
            user: ui.user,
            positive: ui.pos[held_pos],
            negatives: negatives.clone(),
        });
        train.push(UserInteractions {
            user: ui.user,
            pos: ui
                .pos
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != held_pos)
                .map(|(_, &r)| r)
                .collect(),
            neg: ui
                .neg
                .iter()
                .enumerate()
                .filter(|(i, _)| held_neg.binary_search(i).is_err())
                .map(|(_, &r)| r)
                .collect(),
        });
    }
    Split {
        train: InteractionSet { users: train },
        test,
        report,
    }
}
