//! Interleaved promotion: a post-processor that mixes a personalized ranking
//! with a round-robin ranking of its in-category items, and the sweep that
//! traces the resulting utility/commonality tradeoff.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::Settings;
use crate::commonality::{borda_aggregate, standings, system_commonality};
use crate::corpus::{CatIdx, CategoryMap, ItemIdx, Qrels, Ranking, RunSet, UserIdx, Vocab};
use crate::error::{Error, Result};
use crate::metrics::{self, EvalContext, Metric};
use crate::seeding;

pub const DEFAULT_IDEAL_LENGTH: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PromotionPolicy {
    /// Probability of taking the next item from the original ranking.
    pub p: f64,
    /// Target length of the promoted list, capped by the ranking length.
    pub ideal_length: usize,
    pub seed: u64,
}

impl PromotionPolicy {
    pub fn new(p: f64, ideal_length: usize, seed: u64) -> Result<Self> {
        let policy = Self {
            p,
            ideal_length,
            seed,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::invalid(format!(
                "p must be in [0, 1], got {}",
                self.p
            )));
        }
        if self.ideal_length == 0 {
            return Err(Error::invalid("ideal length must be at least 1"));
        }
        Ok(())
    }
}

/// Categories by descending size, ties by name.
fn round_order(cats: &CategoryMap) -> Vec<CatIdx> {
    let mut order: Vec<CatIdx> = cats.categories().collect();
    order.sort_by(|&a, &b| {
        cats.size(b)
            .cmp(&cats.size(a))
            .then(cats.name(a).cmp(cats.name(b)))
    });
    order
}

/// Round-robin list of the ranking's in-category items.
///
/// Each round visits the categories in descending size order. A category
/// already covered in the round (because an item pushed earlier carried its
/// label) is skipped; otherwise its best not-yet-pushed item is appended and
/// all of that item's categories count as covered. The list stops at
/// `length` items or when no category has items left.
pub fn build_promoted_list(ranking: &Ranking, cats: &CategoryMap, length: usize) -> Vec<ItemIdx> {
    let items = ranking.items();
    let mut queues: Vec<Vec<usize>> = vec![Vec::new(); cats.num_categories()];
    for (pos, &item) in items.iter().enumerate() {
        for &c in cats.labels(item) {
            queues[c.index()].push(pos);
        }
    }
    let order = round_order(cats);
    let mut cursor = vec![0usize; queues.len()];
    let mut pushed = vec![false; items.len()];
    let mut out = Vec::new();
    let length = length.min(items.len());
    'rounds: while out.len() < length {
        let mut covered = vec![false; queues.len()];
        let mut progressed = false;
        for &c in &order {
            if covered[c.index()] {
                continue;
            }
            let queue = &queues[c.index()];
            let cur = &mut cursor[c.index()];
            while *cur < queue.len() && pushed[queue[*cur]] {
                *cur += 1;
            }
            let Some(&pos) = queue.get(*cur) else {
                continue;
            };
            pushed[pos] = true;
            out.push(items[pos]);
            progressed = true;
            for &l in cats.labels(items[pos]) {
                covered[l.index()] = true;
            }
            if out.len() == length {
                break 'rounds;
            }
        }
        if !progressed {
            break;
        }
    }
    if out.is_empty() && !items.is_empty() {
        log::warn!(
            "user {} has no in-category items to promote",
            ranking.user.0
        );
    }
    out
}

/// Merges `ranking` with its promoted list. Each position takes the next
/// promoted item when a uniform draw exceeds `p` and the next original item
/// otherwise; an exhausted source yields to the other. The result is a
/// permutation of the original items.
///
/// `user_id` seeds the per-user stream, so adding users never changes the
/// output for existing ones.
pub fn interleave(
    ranking: &Ranking,
    policy: &PromotionPolicy,
    cats: &CategoryMap,
    user_id: &str,
) -> Result<Ranking> {
    policy.validate()?;
    if policy.p == 1.0 {
        return Ok(ranking.clone());
    }
    let promoted = build_promoted_list(ranking, cats, policy.ideal_length);
    let original = ranking.items();
    let mut rng = seeding::rng(seeding::derive(policy.seed, &[seeding::hash_str(user_id)]));
    let mut emitted = std::collections::HashSet::with_capacity(original.len());
    let (mut next_orig, mut next_promo) = (0, 0);
    let mut out = Vec::with_capacity(original.len());
    while out.len() < original.len() {
        while next_orig < original.len() && emitted.contains(&original[next_orig]) {
            next_orig += 1;
        }
        while next_promo < promoted.len() && emitted.contains(&promoted[next_promo]) {
            next_promo += 1;
        }
        let orig_left = next_orig < original.len();
        let promo_left = next_promo < promoted.len();
        let take_promoted = match (orig_left, promo_left) {
            (true, true) => policy.p == 0.0 || rng.gen::<f64>() > policy.p,
            (false, true) => true,
            (true, false) => false,
            (false, false) => break,
        };
        let item = if take_promoted {
            promoted[next_promo]
        } else {
            original[next_orig]
        };
        emitted.insert(item);
        out.push(item);
    }
    Ranking::new(ranking.user, out)
}

/// Applies [`interleave`] to every user of a run.
pub fn interleave_run(
    run: &RunSet,
    policy: &PromotionPolicy,
    cats: &CategoryMap,
    vocab: &Vocab,
) -> Result<RunSet> {
    let rankings: Vec<&Ranking> = run.rankings().collect();
    let out = rankings
        .par_iter()
        .map(|r| interleave(r, policy, cats, vocab.user_name(r.user)))
        .collect::<Result<Vec<_>>>()?;
    let mut result = RunSet::new(run.system());
    for r in out {
        result.insert(r)?;
    }
    Ok(result)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TradeoffConfig {
    pub p_values: Vec<f64>,
    pub ideal_length: usize,
    pub seed: u64,
    /// Cutoff of the reported nDCG.
    pub cutoff: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub system: String,
    pub p: f64,
    pub ndcg: f64,
    /// Log-commonality per category name.
    pub log_commonality: BTreeMap<String, f64>,
    /// Mean over categories of the log-commonality.
    pub mean_log_commonality: f64,
    /// Borda score among every (system, p) variant of the sweep.
    pub borda_score: f64,
    pub borda_rank: usize,
}

/// One row per system and `p`, in input order.
pub fn tradeoff_sweep(
    runs: &[RunSet],
    qrels: &Qrels,
    cats: &CategoryMap,
    population: &[UserIdx],
    vocab: &Vocab,
    settings: &Settings,
    config: &TradeoffConfig,
) -> Result<Vec<TradeoffRow>> {
    if config.p_values.is_empty() {
        return Err(Error::invalid("no p values given"));
    }
    let mut ctx = EvalContext::new(qrels, cats, settings.model, population);
    ctx.alpha = settings.alpha;
    let mut rows = Vec::new();
    for run in runs {
        for &p in &config.p_values {
            let policy = PromotionPolicy::new(p, config.ideal_length, config.seed)?;
            let mixed = interleave_run(run, &policy, cats, vocab)?;
            let ndcg = metrics::evaluate(&mixed, Metric::Ndcg(config.cutoff), &ctx)?.value;
            let results = system_commonality(
                &mixed,
                population,
                cats,
                &settings.model,
                settings.commonality,
            );
            let log_commonality: BTreeMap<String, f64> = results
                .iter()
                .map(|r| (cats.name(r.category).to_string(), r.log_value))
                .collect();
            let mean = log_commonality.values().sum::<f64>() / log_commonality.len().max(1) as f64;
            rows.push(TradeoffRow {
                system: run.system().to_string(),
                p,
                ndcg,
                log_commonality,
                mean_log_commonality: mean,
                borda_score: 0.0,
                borda_rank: 0,
            });
        }
    }
    let variant = |r: &TradeoffRow| format!("{}@{}", r.system, r.p);
    let mut table: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for row in &rows {
        for (cat, &v) in &row.log_commonality {
            table
                .entry(cat.clone())
                .or_default()
                .insert(variant(row), v);
        }
    }
    let borda = borda_aggregate(&table)?;
    let ranks = standings(&borda);
    let lookup: BTreeMap<&str, (f64, usize)> = borda
        .iter()
        .zip(ranks)
        .map(|(b, r)| (b.system.as_str(), (b.score, r)))
        .collect();
    for row in &mut rows {
        let (score, rank) = lookup[variant(row).as_str()];
        row.borda_score = score;
        row.borda_rank = rank;
    }
    Ok(rows)
}
