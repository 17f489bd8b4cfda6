//! Seeded perturbations of labels and user populations.
//!
//! Each function is a pure function of its inputs and seed. None of them
//! adds items, labels or users.

use std::collections::BTreeSet;

use rand::seq::index;

use crate::corpus::{population, CatIdx, CategoryMap, ItemIdx, Qrels, RunSet, UserIdx};
use crate::error::{Error, Result};
use crate::seeding;

/// Keeps `keep` of `members`, chosen uniformly without replacement.
fn sample_members(members: &[ItemIdx], keep: usize, rng: &mut impl rand::Rng) -> BTreeSet<ItemIdx> {
    index::sample(rng, members.len(), keep.min(members.len()))
        .into_iter()
        .map(|i| members[i])
        .collect()
}

// guards against 70 * 10 / 100 landing a hair above 7
fn ceil_share(percent: f64, size: usize) -> usize {
    (percent * size as f64 / 100.0 - 1e-9).ceil().max(0.0) as usize
}

fn floor_share(percent: f64, size: usize) -> usize {
    (percent * size as f64 / 100.0 + 1e-9).floor().max(0.0) as usize
}

/// The category with the most items; ties go to the smallest name.
pub fn dominant_category(cats: &CategoryMap) -> Option<CatIdx> {
    cats.categories().max_by(|&a, &b| {
        cats.size(a)
            .cmp(&cats.size(b))
            .then(cats.name(b).cmp(cats.name(a)))
    })
}

/// Keeps `⌈percent · |C| / 100⌉` items of the largest category, leaving the
/// other categories (and the other labels of the dropped items) untouched.
pub fn downsample_dominant(cats: &CategoryMap, percent: f64, seed: u64) -> Result<CategoryMap> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(Error::invalid(format!(
            "percent must be in (0, 100], got {percent}"
        )));
    }
    let dominant = dominant_category(cats).ok_or(Error::EmptyInput)?;
    let members = cats.members(dominant);
    let keep = ceil_share(percent, members.len());
    let kept = sample_members(members, keep, &mut seeding::rng(seed));
    Ok(cats.retain(|item, c| c != dominant || kept.contains(&item)))
}

/// Shrinks every category toward the size of the smallest one: category `c`
/// keeps `round((1 - t) |C_c| + t · min)` items. `t = 0` changes nothing and
/// `t = 1` gives every category the minimum size.
pub fn downsample_all_to_parity(cats: &CategoryMap, t: f64, seed: u64) -> Result<CategoryMap> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!(
            "interpolation must be in [0, 1], got {t}"
        )));
    }
    if cats.num_categories() < 2 {
        return Err(Error::invalid(
            "parity downsampling needs at least two categories",
        ));
    }
    let min = cats.categories().map(|c| cats.size(c)).min().unwrap_or(0);
    let mut rng = seeding::rng(seed);
    let kept: Vec<BTreeSet<ItemIdx>> = cats
        .categories()
        .map(|c| {
            let size = cats.size(c);
            let target = ((1.0 - t) * size as f64 + t * min as f64).round() as usize;
            sample_members(cats.members(c), target, &mut rng)
        })
        .collect();
    Ok(cats.retain(|item, c| kept[c.index()].contains(&item)))
}

/// Removes `⌊percent · |C_c| / 100⌋` labels from every category
/// independently. Items that lose all labels stay in the catalog.
pub fn remove_labels(cats: &CategoryMap, percent_removed: f64, seed: u64) -> Result<CategoryMap> {
    if !(0.0..100.0).contains(&percent_removed) {
        return Err(Error::invalid(format!(
            "removal percentage must be in [0, 100), got {percent_removed}"
        )));
    }
    let mut rng = seeding::rng(seed);
    let kept: Vec<BTreeSet<ItemIdx>> = cats
        .categories()
        .map(|c| {
            let size = cats.size(c);
            let remove = floor_share(percent_removed, size);
            sample_members(cats.members(c), size - remove, &mut rng)
        })
        .collect();
    Ok(cats.retain(|item, c| kept[c.index()].contains(&item)))
}

/// A user subset applied consistently to runs and judgments.
#[derive(Clone, Debug)]
pub struct UserSample {
    pub runs: Vec<RunSet>,
    pub qrels: Qrels,
    /// Sorted sampled users.
    pub users: Vec<UserIdx>,
}

/// Samples `round(percent · N / 100)` of the users appearing in `runs`.
pub fn sample_users(runs: &[RunSet], qrels: &Qrels, percent: f64, seed: u64) -> Result<UserSample> {
    let all = population(runs);
    sample_population(runs, qrels, &all, percent, seed)
}

/// As [`sample_users`] over an explicit sorted population.
pub fn sample_population(
    runs: &[RunSet],
    qrels: &Qrels,
    users: &[UserIdx],
    percent: f64,
    seed: u64,
) -> Result<UserSample> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(Error::invalid(format!(
            "percent must be in (0, 100], got {percent}"
        )));
    }
    let take = (percent * users.len() as f64 / 100.0).round() as usize;
    if take == 0 {
        return Err(Error::invalid(format!(
            "sampling {percent}% of {} users leaves no users",
            users.len()
        )));
    }
    let mut chosen: Vec<UserIdx> = index::sample(&mut seeding::rng(seed), users.len(), take)
        .into_iter()
        .map(|i| users[i])
        .collect();
    chosen.sort_unstable();
    Ok(UserSample {
        runs: runs.iter().map(|r| r.restrict_users(&chosen)).collect(),
        qrels: qrels.restrict_users(&chosen),
        users: chosen,
    })
}
