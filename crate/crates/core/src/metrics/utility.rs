//! Binary-relevance utility metrics for a single list.
//!
//! `relevant` is always the user's sorted relevant set.

use crate::corpus::ItemIdx;

fn hits(items: &[ItemIdx], relevant: &[ItemIdx], k: usize) -> usize {
    items
        .iter()
        .take(k)
        .filter(|i| relevant.binary_search(i).is_ok())
        .count()
}

/// Relevant items in the top `k`, divided by `k`.
pub fn precision_user(items: &[ItemIdx], relevant: &[ItemIdx], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    hits(items, relevant, k) as f64 / k as f64
}

pub fn recall_user(items: &[ItemIdx], relevant: &[ItemIdx], k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    hits(items, relevant, k) as f64 / relevant.len() as f64
}

/// nDCG with `1 / log2(rank + 1)` discounts; the ideal list places
/// `min(k, |relevant|)` relevant items on top.
pub fn ndcg_user(items: &[ItemIdx], relevant: &[ItemIdx], k: usize) -> f64 {
    if relevant.is_empty() || k == 0 {
        return 0.0;
    }
    let dcg: f64 = items
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, i)| relevant.binary_search(i).is_ok())
        .map(|(pos, _)| discount(pos + 1))
        .sum();
    let ideal: f64 = (1..=k.min(relevant.len())).map(discount).sum();
    dcg / ideal
}

#[inline]
pub(crate) fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}
