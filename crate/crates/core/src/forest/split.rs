//! Gini impurity and CART split search.

use super::Samples;

/// Gini impurity `1 - sum(p_i^2)` of a class histogram; `None` if it is empty.
pub fn gini_impurity(class_counts: &[u32]) -> Option<f64> {
    let total: u64 = class_counts.iter().map(|&c| u64::from(c)).sum();
    if total == 0 {
        return None;
    }
    let sum_sq: u64 = class_counts.iter().map(|&c| u64::from(c) * u64::from(c)).sum();
    Some(1.0 - sum_sq as f64 / (total * total) as f64)
}

/// Best threshold split of a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    /// Rows with `x[feature] <= threshold` go left.
    pub threshold: f64,
    /// Parent impurity minus the size-weighted child impurities.
    pub impurity_decrease: f64,
}

/// Gains closer than this are treated as ties.
const GAIN_TOLERANCE: f64 = 1e-12;

/// Reusable buffers for split evaluation.
#[derive(Default)]
pub(crate) struct SplitScratch {
    pairs: Vec<(f64, usize)>,
    left: Vec<u32>,
    right: Vec<u32>,
}

/// Outcome of scanning one feature.
pub(crate) enum FeatureScan {
    /// All values equal within the node.
    Constant,
    /// Best threshold for this feature and its decrease (may be <= 0).
    Best { threshold: f64, decrease: f64 },
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) * 0.5;
    // adjacent floats: keep `hi` on the right-hand side
    if mid >= hi || !mid.is_finite() {
        lo
    } else {
        mid
    }
}

/// Scans the sorted values of one feature over `rows` and returns the
/// threshold with the largest decrease (lowest threshold on ties).
pub(crate) fn scan_feature(
    data: &Samples,
    rows: &[usize],
    feature: usize,
    parent_counts: &[u32],
    scratch: &mut SplitScratch,
) -> FeatureScan {
    let SplitScratch { pairs, left, right } = scratch;
    pairs.clear();
    pairs.extend(rows.iter().map(|&r| (data.value(r, feature), data.labels[r])));
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pairs.first().map(|p| p.0) == pairs.last().map(|p| p.0) {
        return FeatureScan::Constant;
    }

    let n = pairs.len() as f64;
    left.clear();
    left.resize(parent_counts.len(), 0);
    right.clear();
    right.extend_from_slice(parent_counts);
    let parent_sq: f64 = parent_counts.iter().map(|&c| f64::from(c) * f64::from(c)).sum();
    let mut sq_left = 0.0;
    let mut sq_right = parent_sq;
    let parent_gini = 1.0 - parent_sq / (n * n);

    let mut best: Option<(f64, f64)> = None;
    for i in 0..pairs.len() - 1 {
        let class = pairs[i].1;
        sq_left += 2.0 * f64::from(left[class]) + 1.0;
        left[class] += 1;
        sq_right -= 2.0 * f64::from(right[class]) - 1.0;
        right[class] -= 1;
        let (lo, hi) = (pairs[i].0, pairs[i + 1].0);
        if lo == hi {
            continue;
        }
        let n_left = (i + 1) as f64;
        let n_right = n - n_left;
        // weighted child impurity = 1 - (sq_l/n_l + sq_r/n_r)/n
        let children = 1.0 - (sq_left / n_left + sq_right / n_right) / n;
        let decrease = parent_gini - children;
        if best.is_none_or(|(_, d)| decrease > d + GAIN_TOLERANCE) {
            best = Some((midpoint(lo, hi), decrease));
        }
    }
    let (threshold, decrease) = best.expect("non-constant feature has a threshold");
    FeatureScan::Best { threshold, decrease }
}

/// True if `candidate` should replace `incumbent`: larger decrease, or a tie
/// broken by lower feature index then lower threshold.
pub(crate) fn better(candidate: &Split, incumbent: Option<&Split>) -> bool {
    let Some(inc) = incumbent else { return true };
    if candidate.impurity_decrease > inc.impurity_decrease + GAIN_TOLERANCE {
        return true;
    }
    if candidate.impurity_decrease < inc.impurity_decrease - GAIN_TOLERANCE {
        return false;
    }
    (candidate.feature, candidate.threshold) < (inc.feature, inc.threshold)
}

pub(crate) fn is_improvement(split: &Split) -> bool {
    split.impurity_decrease > GAIN_TOLERANCE
}

pub(crate) fn class_counts(data: &Samples, rows: &[usize]) -> Vec<u32> {
    let mut counts = vec![0u32; data.n_classes];
    for &r in rows {
        counts[data.labels[r]] += 1;
    }
    counts
}

/// Best gini split of `rows` over `candidate_features`, considering midpoints
/// between consecutive distinct values. `None` when fewer than two rows or
/// labels, or when no split lowers impurity.
pub fn best_split(rows: &[Vec<f64>], labels: &[usize], candidate_features: &[usize]) -> Option<Split> {
    if rows.len() < 2 || rows.len() != labels.len() {
        return None;
    }
    let data = Samples::from_rows(rows, labels.to_vec()).ok()?;
    let all: Vec<usize> = (0..rows.len()).collect();
    let parent = class_counts(&data, &all);
    if parent.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let mut scratch = SplitScratch::default();
    let mut best: Option<Split> = None;
    for &feature in candidate_features {
        if feature >= data.n_features {
            continue;
        }
        if let FeatureScan::Best { threshold, decrease } = scan_feature(&data, &all, feature, &parent, &mut scratch) {
            let split = Split { feature, threshold, impurity_decrease: decrease };
            if better(&split, best.as_ref()) {
                best = Some(split);
            }
        }
    }
    best.filter(is_improvement)
}
