//! Intent-aware diversity (alpha-nDCG, IA-ERR) and the browsing-model
//! weighted intra-list and profile distances (EILD, EPD).
//!
//! Categories act as intents: an item is relevant to intent `c` when the
//! user judged it relevant and it carries label `c`.

use std::collections::BTreeMap;

use super::utility::discount;
use crate::browse::BrowsingModel;
use crate::corpus::{CatIdx, CategoryMap, ItemIdx};

/// `1 - |a ∩ b| / |a ∪ b|` over sorted label sets; two unlabeled items are
/// at distance 1. For single-label items this is `1 - [same category]`.
pub fn jaccard_distance(a: &[CatIdx], b: &[CatIdx]) -> f64 {
    1.0 - overlap(a, b)
}

#[inline]
fn overlap(a: &[CatIdx], b: &[CatIdx]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    if a.len() == 1 && b.len() == 1 {
        return if a[0] == b[0] { 1.0 } else { 0.0 };
    }
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Intent labels of `item` for a user, empty unless the item is relevant.
#[inline]
fn intents<'c>(item: ItemIdx, relevant: &[ItemIdx], cats: &'c CategoryMap) -> &'c [CatIdx] {
    if relevant.binary_search(&item).is_ok() {
        cats.labels(item)
    } else {
        &[]
    }
}

/// alpha-DCG of the first `k` items.
pub fn alpha_dcg(
    items: &[ItemIdx],
    relevant: &[ItemIdx],
    cats: &CategoryMap,
    k: usize,
    alpha: f64,
) -> f64 {
    let mut seen = vec![0i32; cats.num_categories()];
    let mut dcg = 0.0;
    for (pos, &item) in items.iter().take(k).enumerate() {
        let mut gain = 0.0;
        for &c in intents(item, relevant, cats) {
            gain += (1.0 - alpha).powi(seen[c.index()]);
            seen[c.index()] += 1;
        }
        dcg += gain * discount(pos + 1);
    }
    dcg
}

/// Ideal alpha-DCG by greedy selection over the user's relevant items.
fn ideal_alpha_dcg(relevant: &[ItemIdx], cats: &CategoryMap, k: usize, alpha: f64) -> f64 {
    // items with identical label sets are interchangeable
    let mut groups: BTreeMap<&[CatIdx], usize> = BTreeMap::new();
    for &item in relevant {
        let labels = cats.labels(item);
        if !labels.is_empty() {
            *groups.entry(labels).or_default() += 1;
        }
    }
    let mut groups: Vec<(&[CatIdx], usize)> = groups.into_iter().collect();
    let mut seen = vec![0i32; cats.num_categories()];
    let mut dcg = 0.0;
    for pos in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for (g, (labels, left)) in groups.iter().enumerate() {
            if *left == 0 {
                continue;
            }
            let gain: f64 = labels
                .iter()
                .map(|c| (1.0 - alpha).powi(seen[c.index()]))
                .sum();
            if best.is_none_or(|(_, b)| gain > b) {
                best = Some((g, gain));
            }
        }
        let Some((g, gain)) = best else { break };
        groups[g].1 -= 1;
        for c in groups[g].0 {
            seen[c.index()] += 1;
        }
        dcg += gain * discount(pos + 1);
    }
    dcg
}

/// alpha-nDCG@k; 0 when no relevant item carries a label.
pub fn alpha_ndcg_user(
    items: &[ItemIdx],
    relevant: &[ItemIdx],
    cats: &CategoryMap,
    k: usize,
    alpha: f64,
) -> f64 {
    let ideal = ideal_alpha_dcg(relevant, cats, k, alpha);
    if ideal <= 0.0 {
        return 0.0;
    }
    alpha_dcg(items, relevant, cats, k, alpha) / ideal
}

/// Intent-aware ERR@k with uniform intent probabilities over all categories.
/// A relevant item satisfies an intent with probability 1/2, the binary case
/// of `(2^g - 1) / 2^g_max`.
pub fn ia_err_user(items: &[ItemIdx], relevant: &[ItemIdx], cats: &CategoryMap, k: usize) -> f64 {
    let n = cats.num_categories();
    if n == 0 {
        return 0.0;
    }
    const SATISFY: f64 = 0.5;
    let mut unsatisfied = vec![1.0f64; n];
    let mut err = vec![0.0f64; n];
    for (pos, &item) in items.iter().take(k).enumerate() {
        for &c in intents(item, relevant, cats) {
            let i = c.index();
            err[i] += unsatisfied[i] * SATISFY / (pos + 1) as f64;
            unsatisfied[i] *= 1.0 - SATISFY;
        }
    }
    err.iter().sum::<f64>() / n as f64
}

/// Expected intra-list distance `Σ_{i<j} P(i) P(j-i) δ(π_i, π_j)`.
pub fn eild_user(items: &[ItemIdx], cats: &CategoryMap, model: &BrowsingModel) -> f64 {
    let n = items.len();
    if n < 2 {
        return 0.0;
    }
    let p = model.stop_probs(n);
    // with δ = 1 everywhere: Σ_i P(i) Σ_{d=1}^{n-i} P(d)
    let mut prefix = vec![0.0; n + 1];
    for d in 1..=n {
        prefix[d] = prefix[d - 1] + p[d - 1];
    }
    let all: f64 = (1..n).map(|i| p[i - 1] * prefix[n - i]).sum();
    // subtract the overlap of labeled pairs
    let labeled: Vec<(usize, &[CatIdx])> = items
        .iter()
        .enumerate()
        .map(|(pos, &item)| (pos + 1, cats.labels(item)))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let mut same = 0.0;
    for (a, &(i, li)) in labeled.iter().enumerate() {
        for &(j, lj) in &labeled[a + 1..] {
            let o = overlap(li, lj);
            if o > 0.0 {
                same += p[i - 1] * p[j - i - 1] * o;
            }
        }
    }
    all - same
}

/// Expected profile distance, normalized so that a list entirely unlike the
/// profile scores 1. `None` when the user has no relevant items or the list
/// is empty.
pub fn epd_user(
    items: &[ItemIdx],
    relevant: &[ItemIdx],
    cats: &CategoryMap,
    model: &BrowsingModel,
) -> Option<f64> {
    if relevant.is_empty() || items.is_empty() {
        return None;
    }
    let mut profile: BTreeMap<&[CatIdx], usize> = BTreeMap::new();
    for &r in relevant {
        let labels = cats.labels(r);
        if !labels.is_empty() {
            *profile.entry(labels).or_default() += 1;
        }
    }
    let size = relevant.len() as f64;
    let mut sum = 0.0;
    let mut stop = 1.0 - model.patience();
    for &item in items {
        let labels = cats.labels(item);
        let mut dist = size;
        if !labels.is_empty() {
            for (set, count) in &profile {
                dist -= *count as f64 * overlap(labels, set);
            }
        }
        sum += stop * dist;
        stop *= model.patience();
    }
    Some(sum / (size * model.truncated_mass(items.len())))
}
