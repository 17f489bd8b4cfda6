//! Kendall's tau-b between system orderings, with two-sided p-values.
//!
//! Below ten systems the p-value is exact: from the inversion-count
//! distribution when neither side has ties, otherwise by enumerating every
//! permutation of one side. From ten systems on, the tie-corrected normal
//! approximation is used.

use serde::Serialize;
use statrs::function::erf::erfc;

use super::SystemOrdering;
use crate::error::{Error, Result};

/// Systems needed before the normal approximation replaces enumeration.
pub const EXACT_BELOW: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TauResult {
    pub tau: f64,
    pub p_value: f64,
}

/// Tau-b between the value-induced rankings of two orderings of the same
/// systems. Values are compared after orienting each ordering so that
/// larger is better.
pub fn kendall_tau(a: &SystemOrdering, b: &SystemOrdering) -> Result<TauResult> {
    if a.ordered.len() != b.ordered.len() {
        return Err(Error::DisjointSystems);
    }
    if a.ordered.len() < 2 {
        return Err(Error::invalid("Kendall's tau needs at least two systems"));
    }
    let mut x = Vec::with_capacity(a.ordered.len());
    let mut y = Vec::with_capacity(a.ordered.len());
    for (system, value) in &a.ordered {
        let other = b.value(system).ok_or(Error::DisjointSystems)?;
        x.push(a.polarity.orient(*value));
        y.push(b.polarity.orient(other));
    }
    Ok(tau_b(&x, &y))
}

fn sign(a: f64, b: f64) -> i64 {
    // -inf == -inf is a tie
    if a == b {
        0
    } else if a > b {
        1
    } else {
        -1
    }
}

/// `S = concordant - discordant`.
fn s_statistic(x: &[f64], y: &[f64]) -> i64 {
    let mut s = 0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            s += sign(x[i], x[j]) * sign(y[i], y[j]);
        }
    }
    s
}

/// Sizes of groups of equal values.
fn tie_groups(v: &[f64]) -> Vec<u64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let mut groups = Vec::new();
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            if run > 1 {
                groups.push(run);
            }
            run = 1;
        }
    }
    if run > 1 {
        groups.push(run);
    }
    groups
}

/// Tau-b and its two-sided p-value for paired samples.
///
/// When either side is constant the coefficient is undefined; it is
/// reported as 1 if both sides are constant and 0 otherwise, with p = 1.
pub fn tau_b(x: &[f64], y: &[f64]) -> TauResult {
    assert_eq!(x.len(), y.len());
    assert!(x.iter().chain(y).all(|v| !v.is_nan()), "NaN in tau input");
    let n = x.len() as u64;
    let pairs = n * (n - 1) / 2;
    let tx = tie_groups(x);
    let ty = tie_groups(y);
    let ties = |g: &[u64]| g.iter().map(|t| t * (t - 1) / 2).sum::<u64>();
    let (n1, n2) = (ties(&tx), ties(&ty));
    let s = s_statistic(x, y);
    if n1 == pairs || n2 == pairs {
        let tau = if n1 == pairs && n2 == pairs { 1.0 } else { 0.0 };
        return TauResult { tau, p_value: 1.0 };
    }
    let denom = (((pairs - n1) as f64) * ((pairs - n2) as f64)).sqrt();
    let tau = (s as f64 / denom).clamp(-1.0, 1.0);
    let p_value = if (n as usize) < EXACT_BELOW {
        if tx.is_empty() && ty.is_empty() {
            exact_p_untied(n as usize, s)
        } else {
            exact_p_enumerated(x, y, s)
        }
    } else {
        normal_p(n, &tx, &ty, s)
    };
    TauResult { tau, p_value }
}

/// Two-sided exact p-value without ties: `S = pairs - 2 * inversions`, and
/// inversion counts over all permutations follow the Mahonian numbers.
fn exact_p_untied(n: usize, s: i64) -> f64 {
    let pairs = n * (n - 1) / 2;
    // counts[k] = permutations of the current size with k inversions
    let mut counts = vec![0u64; pairs + 1];
    counts[0] = 1;
    for m in 2..=n {
        let mut next = vec![0u64; pairs + 1];
        for (k, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for extra in 0..m {
                if k + extra <= pairs {
                    next[k + extra] += c;
                }
            }
        }
        counts = next;
    }
    let total: u64 = counts.iter().sum();
    let extreme: u64 = counts
        .iter()
        .enumerate()
        .filter(|(k, _)| (pairs as i64 - 2 * *k as i64).abs() >= s.abs())
        .map(|(_, c)| c)
        .sum();
    extreme as f64 / total as f64
}

/// Two-sided exact p-value by enumerating all permutations of `y`.
fn exact_p_enumerated(x: &[f64], y: &[f64], s: i64) -> f64 {
    let mut perm = y.to_vec();
    let n = perm.len();
    let mut extreme = 0u64;
    let mut total = 0u64;
    let mut visit = |p: &[f64]| {
        total += 1;
        if s_statistic(x, p).abs() >= s.abs() {
            extreme += 1;
        }
    };
    // Heap's algorithm
    let mut c = vec![0usize; n];
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    extreme as f64 / total as f64
}

/// Normal approximation with the tie-corrected variance of `S`.
fn normal_p(n: u64, tx: &[u64], ty: &[u64], s: i64) -> f64 {
    let n = n as f64;
    let v = |g: &[u64]| {
        g.iter()
            .map(|&t| {
                let t = t as f64;
                t * (t - 1.0) * (2.0 * t + 5.0)
            })
            .sum::<f64>()
    };
    let t1 = |g: &[u64]| g.iter().map(|&t| (t * (t - 1)) as f64).sum::<f64>();
    let t2 = |g: &[u64]| {
        g.iter()
            .map(|&t| (t * (t - 1) * (t - 2)) as f64)
            .sum::<f64>()
    };
    let var = (n * (n - 1.0) * (2.0 * n + 5.0) - v(tx) - v(ty)) / 18.0
        + t2(tx) * t2(ty) / (9.0 * n * (n - 1.0) * (n - 2.0))
        + t1(tx) * t1(ty) / (2.0 * n * (n - 1.0));
    if var <= 0.0 {
        return 1.0;
    }
    let z = s as f64 / var.sqrt();
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}
