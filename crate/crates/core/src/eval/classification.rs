use serde::Serialize;

use crate::error::{Error, Result};

/// Per-class confusion counts for multi-label predictions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
}

impl ConfusionCounts {
    pub fn new(n_classes: usize) -> Self {
        Self {
            tp: vec![0; n_classes],
            fp: vec![0; n_classes],
            fn_: vec![0; n_classes],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.tp.len()
    }

    /// Records one example given its true and predicted label sets.
    pub fn add(&mut self, truth: &[u32], predicted: &[u32]) {
        for c in 0..self.n_classes() as u32 {
            match (truth.contains(&c), predicted.contains(&c)) {
                (true, true) => self.tp[c as usize] += 1,
                (false, true) => self.fp[c as usize] += 1,
                (true, false) => self.fn_[c as usize] += 1,
                (false, false) => {}
            }
        }
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        for c in 0..self.n_classes() {
            self.tp[c] += other.tp[c];
            self.fp[c] += other.fp[c];
            self.fn_[c] += other.fn_[c];
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct F1Scores {
    pub micro_p: f64,
    pub micro_r: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    /// Classes with no true instance; each contributes F1 = 0 to the macro mean.
    pub zero_support_classes: usize,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Micro scores come from the summed confusion matrix; macro-F1 is the
/// unweighted mean of per-class F1.
pub fn micro_macro_f1(counts: &ConfusionCounts) -> Result<F1Scores> {
    let n = counts.n_classes();
    if n == 0 {
        return Err(Error::Input("micro_macro_f1 needs at least one class".into()));
    }
    let tp: u64 = counts.tp.iter().sum();
    let fp: u64 = counts.fp.iter().sum();
    let fn_: u64 = counts.fn_.iter().sum();
    let micro_p = ratio(tp, tp + fp);
    let micro_r = ratio(tp, tp + fn_);
    let mut zero_support = 0;
    let mut macro_sum = 0.0;
    for c in 0..n {
        if counts.tp[c] + counts.fn_[c] == 0 {
            zero_support += 1;
            continue;
        }
        let p = ratio(counts.tp[c], counts.tp[c] + counts.fp[c]);
        let r = ratio(counts.tp[c], counts.tp[c] + counts.fn_[c]);
        macro_sum += f1(p, r);
    }
    Ok(F1Scores {
        micro_p,
        micro_r,
        micro_f1: f1(micro_p, micro_r),
        macro_f1: macro_sum / n as f64,
        zero_support_classes: zero_support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let mut c = ConfusionCounts::new(3);
        c.add(&[0, 2], &[0, 2]);
        c.add(&[1], &[1]);
        let s = micro_macro_f1(&c).unwrap();
        assert_eq!((s.micro_p, s.micro_r, s.micro_f1, s.macro_f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn two_class_hand_example() {
        let c = ConfusionCounts {
            tp: vec![1, 0],
            fp: vec![1, 0],
            fn_: vec![0, 1],
        };
        let s = micro_macro_f1(&c).unwrap();
        assert_eq!(s.micro_p, 0.5);
        assert_eq!(s.micro_r, 0.5);
        assert_eq!(s.micro_f1, 0.5);
        assert!((s.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_class_collapses() {
        let c = ConfusionCounts {
            tp: vec![3],
            fp: vec![2],
            fn_: vec![1],
        };
        let s = micro_macro_f1(&c).unwrap();
        assert!((s.micro_f1 - s.macro_f1).abs() < 1e-15);
    }

    #[test]
    fn zero_support_counts_as_zero() {
        let c = ConfusionCounts {
            tp: vec![2, 0],
            fp: vec![0, 0],
            fn_: vec![0, 0],
        };
        let s = micro_macro_f1(&c).unwrap();
        assert_eq!(s.zero_support_classes, 1);
        assert_eq!(s.macro_f1, 0.5);
    }

    #[test]
    fn add_tallies() {
        let mut c = ConfusionCounts::new(3);
        c.add(&[0, 1], &[1, 2]);
        assert_eq!(c.tp, vec![0, 1, 0]);
        assert_eq!(c.fp, vec![0, 0, 1]);
        assert_eq!(c.fn_, vec![1, 0, 0]);
    }

    #[test]
    fn no_classes_is_an_error() {
        assert!(micro_macro_f1(&ConfusionCounts::new(0)).is_err());
    }
}
