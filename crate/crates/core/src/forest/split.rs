//! Gini impurity and the best-split search over sparse features.

use crate::class::{DocClass, N_CLASSES};
use crate::textpipe::SparseVector;

use super::ForestError;

/// Two candidate decreases closer than this are treated as equal, and a
/// split must improve on the parent by more than this to count.
pub const TIE_EPSILON: f64 = 1e-12;

/// `1 - sum_k (c_k / sum c)^2`.
pub fn gini(class_counts: &[f64; N_CLASSES]) -> Result<f64, ForestError> {
    let total: f64 = class_counts.iter().sum();
    if total <= 0.0 {
        return Err(ForestError::EmptyNode);
    }
    Ok(gini_with_total(class_counts, total))
}

#[inline]
fn gini_with_total(weights: &[f64; N_CLASSES], total: f64) -> f64 {
    1.0 - weights.iter().map(|w| (w / total) * (w / total)).sum::<f64>()
}

#[derive(Debug, Clone, Copy)]
pub struct WeightedSample<'a> {
    pub vector: &'a SparseVector,
    pub class: DocClass,
    pub weight: f64,
}

/// Samples with `value <= threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
}

/// Best weighted-Gini split over `candidate_features`, or `None` when no
/// threshold gives a positive decrease. Ties go to the lower feature index,
/// then the lower threshold.
pub fn best_split(samples: &[WeightedSample<'_>], candidate_features: &[usize]) -> Option<Split> {
    best_split_min_leaf(samples, candidate_features, 1)
}

/// [`best_split`] restricted to splits leaving at least `min_samples_leaf`
/// samples on each side.
pub fn best_split_min_leaf(
    samples: &[WeightedSample<'_>],
    candidate_features: &[usize],
    min_samples_leaf: usize,
) -> Option<Split> {
    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();
    SplitSearcher::default().find(&SliceView(samples), &features, min_samples_leaf)
}

/// Row access used by the split search.
pub(crate) trait SplitData {
    fn len(&self) -> usize;
    fn value(&self, row: usize, feature: usize) -> f64;
    fn class(&self, row: usize) -> usize;
    fn weight(&self, row: usize) -> f64;
}

struct SliceView<'s, 'a>(&'s [WeightedSample<'a>]);

impl SplitData for SliceView<'_, '_> {
    fn len(&self) -> usize {
        self.0.len()
    }
    fn value(&self, row: usize, feature: usize) -> f64 {
        self.0[row].vector.get(feature)
    }
    fn class(&self, row: usize) -> usize {
        self.0[row].class.index()
    }
    fn weight(&self, row: usize) -> f64 {
        self.0[row].weight
    }
}

#[derive(Debug, Clone, Copy)]
struct Group {
    value: f64,
    weights: [f64; N_CLASSES],
    count: usize,
}

/// Reusable scratch buffers for the split search.
#[derive(Debug, Default)]
pub(crate) struct SplitSearcher {
    nonzero: Vec<(f64, usize, f64)>,
    groups: Vec<Group>,
}

impl SplitSearcher {
    /// `features` must be sorted ascending for the tie rule to hold.
    pub(crate) fn find<D: SplitData>(
        &mut self,
        data: &D,
        features: &[usize],
        min_samples_leaf: usize,
    ) -> Option<Split> {
        let n = data.len();
        if n == 0 {
            return None;
        }
        let min_leaf = min_samples_leaf.max(1);
        let mut total = [0.0; N_CLASSES];
        for row in 0..n {
            total[data.class(row)] += data.weight(row);
        }
        let total_weight: f64 = total.iter().sum();
        if total_weight <= 0.0 {
            return None;
        }
        let parent = gini_with_total(&total, total_weight);
        if parent <= TIE_EPSILON {
            return None;
        }

        let mut best: Option<Split> = None;
        for &feature in features {
            self.collect_groups(data, feature);
            if self.groups.len() < 2 {
                continue;
            }
            let mut left = [0.0; N_CLASSES];
            let mut left_n = 0;
            for pair in self.groups.windows(2) {
                let (g, next) = (pair[0], pair[1]);
                for k in 0..N_CLASSES {
                    left[k] += g.weights[k];
                }
                left_n += g.count;
                if n - left_n < min_leaf {
                    break;
                }
                if left_n < min_leaf {
                    continue;
                }
                let mut right = [0.0; N_CLASSES];
                for k in 0..N_CLASSES {
                    right[k] = (total[k] - left[k]).max(0.0);
                }
                let wl: f64 = left.iter().sum();
                let wr: f64 = right.iter().sum();
                let mut child = 0.0;
                if wl > 0.0 {
                    child += wl / total_weight * gini_with_total(&left, wl);
                }
                if wr > 0.0 {
                    child += wr / total_weight * gini_with_total(&right, wr);
                }
                let decrease = parent - child;
                let beats = match best {
                    None => decrease > TIE_EPSILON,
                    Some(b) => decrease > b.impurity_decrease + TIE_EPSILON,
                };
                if beats {
                    best = Some(Split {
                        feature,
                        threshold: midpoint(g.value, next.value),
                        impurity_decrease: decrease,
                    });
                }
            }
        }
        best
    }

    /// Distinct values of `feature` in ascending order with their per-class
    /// weights; absent entries form the 0.0 group.
    fn collect_groups<D: SplitData>(&mut self, data: &D, feature: usize) {
        self.nonzero.clear();
        self.groups.clear();
        let mut zero = Group {
            value: 0.0,
            weights: [0.0; N_CLASSES],
            count: 0,
        };
        for row in 0..data.len() {
            let v = data.value(row, feature);
            if v == 0.0 {
                zero.weights[data.class(row)] += data.weight(row);
                zero.count += 1;
            } else {
                self.nonzero.push((v, data.class(row), data.weight(row)));
            }
        }
        if self.nonzero.is_empty() {
            return;
        }
        self.nonzero.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut zero_pending = zero.count > 0;
        for &(v, class, w) in &self.nonzero {
            if zero_pending && v > 0.0 {
                self.groups.push(zero);
                zero_pending = false;
            }
            match self.groups.last_mut() {
                Some(g) if g.value == v => {
                    g.weights[class] += w;
                    g.count += 1;
                }
                _ => {
                    let mut weights = [0.0; N_CLASSES];
                    weights[class] = w;
                    self.groups.push(Group {
                        value: v,
                        weights,
                        count: 1,
                    });
                }
            }
        }
        if zero_pending {
            self.groups.push(zero);
        }
    }
}

/// Midpoint that always separates `lo < hi`.
#[inline]
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = (lo + hi) / 2.0;
    if m >= hi {
        lo
    } else {
        m
    }
}
