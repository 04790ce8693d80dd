//! Confusion matrices, per-class precision / recall / F1, macro averages,
//! relative improvement, and stratified train/test splits.

pub mod published;
mod report;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::{DocClass, N_CLASSES};

pub use report::{confusion_csv, render_improvement, render_table};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("golds and predictions differ in length ({golds} vs {preds})")]
    LengthMismatch { golds: usize, preds: usize },
    #[error("nothing to evaluate")]
    EmptyInput,
    #[error("baseline macro-F1 is zero")]
    ZeroBaseline,
    #[error("test ratio must be in (0, 1), got {0}")]
    BadRatio(f64),
}

/// Rows are gold classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; N_CLASSES]; N_CLASSES],
}

impl ConfusionMatrix {
    pub fn get(&self, gold: DocClass, predicted: DocClass) -> u64 {
        self.counts[gold.index()][predicted.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, gold: usize) -> u64 {
        self.counts[gold].iter().sum()
    }

    pub fn column_total(&self, predicted: usize) -> u64 {
        self.counts.iter().map(|row| row[predicted]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..N_CLASSES).map(|k| self.counts[k][k]).sum();
        correct as f64 / self.total() as f64
    }
}

pub fn confusion(golds: &[DocClass], preds: &[DocClass]) -> Result<ConfusionMatrix, EvalError> {
    if golds.len() != preds.len() {
        return Err(EvalError::LengthMismatch {
            golds: golds.len(),
            preds: preds.len(),
        });
    }
    if golds.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut cm = ConfusionMatrix::default();
    for (g, p) in golds.iter().zip(preds) {
        cm.counts[g.index()][p.index()] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: DocClass,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: [ClassMetrics; N_CLASSES],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
}

impl MetricsReport {
    pub fn from_class_metrics(
        per_class: [ClassMetrics; N_CLASSES],
        confusion: Option<ConfusionMatrix>,
    ) -> Self {
        let mean = |f: fn(&ClassMetrics) -> f64| {
            per_class.iter().map(f).sum::<f64>() / N_CLASSES as f64
        };
        MetricsReport {
            macro_precision: mean(|m| m.precision),
            macro_recall: mean(|m| m.recall),
            macro_f1: mean(|m| m.f1),
            per_class,
            confusion,
        }
    }

    pub fn class(&self, class: DocClass) -> &ClassMetrics {
        &self.per_class[class.index()]
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Per-class metrics with empty rows or columns scoring 0, and unweighted
/// macro means.
pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let per_class = std::array::from_fn(|k| {
        let tp = cm.counts[k][k];
        let precision = ratio(tp, cm.column_total(k));
        let recall = ratio(tp, cm.row_total(k));
        ClassMetrics {
            class: DocClass::ALL[k],
            precision,
            recall,
            f1: f1_score(precision, recall),
            support: cm.row_total(k),
        }
    });
    MetricsReport::from_class_metrics(per_class, Some(cm.clone()))
}

/// `(candidate.macro_f1 - baseline.macro_f1) / baseline.macro_f1`.
pub fn relative_improvement(
    baseline: &MetricsReport,
    candidate: &MetricsReport,
) -> Result<f64, EvalError> {
    if baseline.macro_f1 == 0.0 {
        return Err(EvalError::ZeroBaseline);
    }
    Ok((candidate.macro_f1 - baseline.macro_f1) / baseline.macro_f1)
}

/// Split per class: `round(n_c * test_ratio)` items of each class go to the
/// test side, chosen by a seeded shuffle. Classes with fewer than two
/// members stay entirely in train. Both halves keep the input order.
pub fn stratified_split<X: Clone>(
    dataset: &[(X, DocClass)],
    test_ratio: f64,
    seed: u64,
) -> Result<(Vec<(X, DocClass)>, Vec<(X, DocClass)>), EvalError> {
    let (train, test) = stratified_indices(dataset.iter().map(|(_, c)| *c), test_ratio, seed)?;
    Ok((
        train.iter().map(|&i| dataset[i].clone()).collect(),
        test.iter().map(|&i| dataset[i].clone()).collect(),
    ))
}

/// Index form of [`stratified_split`]: returns sorted (train, test) indices.
pub fn stratified_indices(
    labels: impl IntoIterator<Item = DocClass>,
    test_ratio: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    if !(test_ratio > 0.0 && test_ratio < 1.0) {
        return Err(EvalError::BadRatio(test_ratio));
    }
    let mut by_class: BTreeMap<DocClass, Vec<usize>> = BTreeMap::new();
    let mut n = 0;
    for (i, class) in labels.into_iter().enumerate() {
        by_class.entry(class).or_default().push(i);
        n += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; n];
    for (class, mut members) in by_class {
        if members.len() < 2 {
            log::warn!("class {class} has {} member(s); keeping it in train", members.len());
            continue;
        }
        let n_test = (members.len() as f64 * test_ratio).round() as usize;
        members.shuffle(&mut rng);
        for &i in &members[..n_test] {
            is_test[i] = true;
        }
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| is_test[i]);
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::published::*;
    use super::*;
    use crate::class::DocClass::*;
    use proptest::prelude::*;

    #[test]
    fn confusion_examples() {
        let golds = [SystematicReview, PrimaryRct, Excluded];
        let cm = confusion(&golds, &golds).unwrap();
        for g in 0..5 {
            for p in 0..5 {
                if g != p {
                    assert_eq!(cm.counts[g][p], 0);
                }
            }
        }
        let cm = confusion(&[SystematicReview, SystematicReview], &[SystematicReview, Excluded]).unwrap();
        assert_eq!(cm.get(SystematicReview, SystematicReview), 1);
        assert_eq!(cm.get(SystematicReview, Excluded), 1);
        assert_eq!(cm.total(), 2);
        assert_eq!(confusion(&[], &[]), Err(EvalError::EmptyInput));
        assert!(matches!(
            confusion(&[Excluded], &[]),
            Err(EvalError::LengthMismatch { golds: 1, preds: 0 })
        ));
    }

    #[test]
    fn perfect_predictions_score_one() {
        let golds: Vec<_> = DocClass::ALL.iter().cycle().take(23).copied().collect();
        let report = metrics(&confusion(&golds, &golds).unwrap());
        assert!(report.per_class.iter().all(|m| m.precision == 1.0 && m.recall == 1.0 && m.f1 == 1.0));
        assert_eq!(report.macro_f1, 1.0);
    }

    #[test]
    fn metrics_by_hand() {
        let mut cm = ConfusionMatrix::default();
        cm.counts[1][1] = 8;
        cm.counts[1][4] = 2;
        cm.counts[4][1] = 4;
        cm.counts[4][4] = 1;
        let r = metrics(&cm);
        let sr = r.class(SystematicReview);
        assert!((sr.precision - 8.0 / 12.0).abs() < 1e-15);
        assert!((sr.recall - 0.8).abs() < 1e-15);
        let ex = r.class(Excluded);
        assert!((ex.precision - 1.0 / 3.0).abs() < 1e-15);
        assert!((ex.recall - 0.2).abs() < 1e-15);
        // empty row and column score zero, not NaN
        assert_eq!(r.class(PrimaryRct).precision, 0.0);
        assert_eq!(r.class(PrimaryRct).f1, 0.0);
        assert_eq!(sr.support, 10);
    }

    #[test]
    fn f1_from_printed_values() {
        assert!((f1_score(0.96, 0.98) - 0.9699).abs() < 1e-4);
        assert!((f1_score(0.94, 0.85) - 0.893).abs() < 1e-3);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn improvement_examples() {
        let r = XLNET.report();
        assert_eq!(relative_improvement(&r, &r).unwrap(), 0.0);

        let with_macro = |m: f64| {
            let mut report = r.clone();
            report.macro_f1 = m;
            report
        };
        assert!((relative_improvement(&with_macro(0.4), &with_macro(0.8)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            relative_improvement(&with_macro(0.0), &r),
            Err(EvalError::ZeroBaseline)
        );

        // (.26+.96+.38+.49+.32)/5 = .482, (.61+.97+.89+.75+.78)/5 = .800
        let rf = RANDOM_FOREST.report();
        assert!((rf.macro_f1 - 0.482).abs() < 1e-12);
        assert!((r.macro_f1 - 0.800).abs() < 1e-12);
        let imp = relative_improvement(&rf, &r).unwrap();
        assert!((imp - 0.318 / 0.482).abs() < 1e-12);
        assert!((imp - 0.660).abs() < 1e-3);
    }

    #[test]
    fn split_examples() {
        let data: Vec<_> = (0..100).map(|i| (i, DocClass::ALL[i % 5])).collect();
        let (train, test) = stratified_split(&data, 0.2, 1).unwrap();
        assert_eq!(test.len(), 20);
        assert_eq!(train.len(), 80);
        for class in DocClass::ALL {
            assert_eq!(test.iter().filter(|(_, c)| *c == class).count(), 4);
        }
        let again = stratified_split(&data, 0.2, 1).unwrap();
        assert_eq!(again, (train, test));
        assert_eq!(stratified_split(&data, 1.0, 1), Err(EvalError::BadRatio(1.0)));
        assert_eq!(stratified_split(&data, 0.0, 1), Err(EvalError::BadRatio(0.0)));
    }

    #[test]
    fn singleton_class_stays_in_train() {
        let data = vec![(0, Excluded), (1, PrimaryRct), (2, PrimaryRct), (3, PrimaryRct), (4, PrimaryRct)];
        let (train, test) = stratified_split(&data, 0.5, 0).unwrap();
        assert!(train.contains(&(0, Excluded)));
        assert_eq!(test.len(), 2);
    }

    fn arb_confusion() -> impl Strategy<Value = ConfusionMatrix> {
        prop::array::uniform5(prop::array::uniform5(0u64..40))
            .prop_filter("non-empty", |c| c.iter().flatten().sum::<u64>() > 0)
            .prop_map(|counts| ConfusionMatrix { counts })
    }

    proptest! {
        #[test]
        fn micro_recall_equals_accuracy(cm in arb_confusion()) {
            let tp: u64 = (0..5).map(|k| cm.counts[k][k]).sum();
            let fn_: u64 = (0..5).map(|k| cm.row_total(k) - cm.counts[k][k]).sum();
            let micro_recall = tp as f64 / (tp + fn_) as f64;
            prop_assert!((micro_recall - cm.accuracy()).abs() < 1e-12);
        }

        #[test]
        fn metrics_invariants(cm in arb_confusion()) {
            let r = metrics(&cm);
            for m in &r.per_class {
                prop_assert!((0.0..=1.0).contains(&m.precision));
                prop_assert!((0.0..=1.0).contains(&m.recall));
                prop_assert!((m.f1 - f1_score(m.precision, m.recall)).abs() < 1e-15);
            }
            let mean_f1 = r.per_class.iter().map(|m| m.f1).sum::<f64>() / 5.0;
            prop_assert!((r.macro_f1 - mean_f1).abs() < 1e-15);
        }

        #[test]
        fn improvement_sign_is_antisymmetric(a in 0.05f64..1.0, b in 0.05f64..1.0) {
            let mut base = XLNET.report();
            let mut cand = XLNET.report();
            base.macro_f1 = a;
            cand.macro_f1 = b;
            let fwd = relative_improvement(&base, &cand).unwrap();
            let back = relative_improvement(&cand, &base).unwrap();
            prop_assert!(fwd.signum() == -back.signum() || (fwd == 0.0 && back == 0.0));
            // scale-free
            base.macro_f1 = a * 0.5;
            cand.macro_f1 = b * 0.5;
            prop_assert!((relative_improvement(&base, &cand).unwrap() - fwd).abs() < 1e-12);
        }

        #[test]
        fn split_proportions_track_the_dataset(
            labels in prop::collection::vec(0usize..5, 1..300),
            ratio in 0.05f64..0.95,
            seed in any::<u64>(),
        ) {
            let data: Vec<_> = labels.iter().enumerate().map(|(i, &k)| (i, DocClass::ALL[k])).collect();
            let (train, test) = stratified_split(&data, ratio, seed).unwrap();
            prop_assert_eq!(train.len() + test.len(), data.len());
            for class in DocClass::ALL {
                let n = data.iter().filter(|(_, c)| *c == class).count();
                let t = test.iter().filter(|(_, c)| *c == class).count();
                if n >= 2 {
                    prop_assert!((t as f64 - n as f64 * ratio).abs() <= 1.0);
                } else {
                    prop_assert_eq!(t, 0);
                }
            }
        }
    }
}
