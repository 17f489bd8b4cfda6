//! Category exposure distributions and the fairness metrics built on them.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{EvalContext, Metric, MetricValue};
use crate::browse::BrowsingModel;
use crate::corpus::{CategoryMap, ItemIdx, RunSet};
use crate::error::Result;

/// Floor applied to zero exposure shares inside the KL divergence.
pub const KL_CLAMP: f64 = 1e-12;

/// Normalized exposure of one list over the tracked categories.
#[derive(Clone, Debug, PartialEq)]
pub struct ExposureDistribution {
    /// Indexed by category; sums to 1.
    pub theta: Vec<f64>,
    /// False when the list gave no exposure to any tracked category, in which
    /// case `theta` is the uniform reference.
    pub defined: bool,
}

/// Exposure of a list: position `i` is examined with probability `γ^(i-1)`
/// and credits every category of its item. Items without labels take no
/// part in the normalization.
pub fn exposure_distribution(
    items: &[ItemIdx],
    cats: &CategoryMap,
    model: &BrowsingModel,
) -> ExposureDistribution {
    let n = cats.num_categories();
    let mut theta = vec![0.0; n];
    let mut examine = 1.0;
    for &item in items {
        for &c in cats.labels(item) {
            theta[c.index()] += examine;
        }
        examine *= model.patience();
    }
    let total: f64 = theta.iter().sum();
    if total > 0.0 {
        theta.iter_mut().for_each(|t| *t /= total);
        ExposureDistribution {
            theta,
            defined: true,
        }
    } else {
        ExposureDistribution {
            theta: vec![1.0 / n as f64; n],
            defined: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DivergenceFlavor {
    Abs,
    Sq,
    Kl,
}

/// Divergence of `theta` from the uniform distribution. Returns the value
/// and the number of shares clamped to [`KL_CLAMP`] (KL only).
pub fn divergence(theta: &[f64], flavor: DivergenceFlavor) -> (f64, usize) {
    if theta.is_empty() {
        return (0.0, 0);
    }
    let reference = 1.0 / theta.len() as f64;
    match flavor {
        DivergenceFlavor::Abs => (theta.iter().map(|t| (reference - t).abs()).sum(), 0),
        DivergenceFlavor::Sq => (theta.iter().map(|t| (reference - t).powi(2)).sum(), 0),
        DivergenceFlavor::Kl => {
            let mut clamped = 0;
            let d = theta
                .iter()
                .map(|&t| {
                    let t = if t <= 0.0 {
                        clamped += 1;
                        KL_CLAMP
                    } else {
                        t
                    };
                    reference * (reference / t).ln()
                })
                .sum();
            (d, clamped)
        }
    }
}

/// Mean over categories of `|ratio_c - 1|`, where `ratio_c` is the
/// population-mean exposure share of `c` over the share of `c` among all
/// category labels of the catalog.
pub(super) fn disparate_exposure(run: &RunSet, ctx: &EvalContext<'_>) -> Result<MetricValue> {
    let cats = ctx.cats;
    let thetas: Vec<ExposureDistribution> = ctx
        .population
        .par_iter()
        .map(|&u| {
            let items = run.get(u).map(|r| r.items()).unwrap_or(&[]);
            exposure_distribution(items, cats, &ctx.model)
        })
        .collect();
    let n_users = thetas.len().max(1) as f64;
    let mut mean_share = vec![0.0; cats.num_categories()];
    for t in &thetas {
        for (m, v) in mean_share.iter_mut().zip(&t.theta) {
            *m += v;
        }
    }
    mean_share.iter_mut().for_each(|m| *m /= n_users);

    let catalog = cats.catalog();
    let sizes: Vec<usize> = cats
        .categories()
        .map(|c| {
            cats.members(c)
                .iter()
                .filter(|i| catalog.contains(i))
                .count()
        })
        .collect();
    let total: usize = sizes.iter().sum();

    let mut flags = BTreeMap::new();
    let mut deviation = 0.0;
    let mut counted = 0;
    for (c, &size) in sizes.iter().enumerate() {
        if size == 0 {
            log::warn!(
                "dispexp: category `{}` has no catalog items",
                cats.name(crate::CatIdx(c as u32))
            );
            continue;
        }
        let share = size as f64 / total as f64;
        deviation += (mean_share[c] / share - 1.0).abs();
        counted += 1;
    }
    if counted < sizes.len() {
        flags.insert("excluded_categories", sizes.len() - counted);
    }
    let zero = thetas.iter().filter(|t| !t.defined).count();
    if zero > 0 {
        flags.insert("zero_exposure_users", zero);
    }
    let missing = ctx
        .population
        .iter()
        .filter(|&&u| run.get(u).is_none())
        .count();
    if missing > 0 {
        flags.insert("missing_users", missing);
    }
    Ok(MetricValue {
        system: run.system().to_string(),
        metric: Metric::DispExp.key(),
        value: if counted == 0 {
            0.0
        } else {
            deviation / counted as f64
        },
        per_user: None,
        flags,
    })
}
