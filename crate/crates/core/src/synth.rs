//! Synthetic corpora for tests and demonstrations.
//!
//! Items are ordered by popularity. The most popular head is unlabeled and
//! every tail item carries one category, with category sizes skewed so that
//! one category dominates. Each user has a latent preference mixing
//! log-popularity, personal taste and a per-category affinity. System `s`
//! ranks items by that preference plus Gaussian noise of scale `sigma_s` and
//! a bonus `beta_s` on labeled items, so systems differ in both utility and
//! category exposure. Judgments are each user's top items by true preference.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand_distr::Normal;
use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{
    write_run, CategoryMap, Corpus, ItemIdx, Qrels, Ranking, RunSet, UserIdx, Vocab,
};
use crate::error::{Error, Result};
use crate::seeding;

/// Systems only score the `POOL_FACTOR * list_length` most plausible items
/// of each user (plus the best few per category); the rest never reach a list.
const POOL_FACTOR: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SynthConfig {
    pub systems: usize,
    pub users: usize,
    pub items: usize,
    pub categories: usize,
    pub list_length: usize,
    pub seed: u64,
    /// Share of the most popular items left without a category.
    pub head_fraction: f64,
    /// Weight of log-popularity in the latent preference.
    pub popularity_weight: f64,
    /// Judged-relevant items per user.
    pub relevant_per_user: usize,
    /// Labeled-item bonus of the most promoting system; the others are
    /// spread linearly down to zero.
    pub promotion_spread: f64,
    /// Scale of each user's per-category affinity.
    pub affinity_scale: f64,
    /// Every list is topped up to hold at least this many items of each
    /// category (when the category is large enough).
    pub min_per_category: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            systems: 5,
            users: 500,
            items: 2000,
            categories: 5,
            list_length: 100,
            seed: 0,
            head_fraction: 0.1,
            popularity_weight: 1.0,
            relevant_per_user: 10,
            promotion_spread: 2.0,
            affinity_scale: 0.25,
            min_per_category: 3,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("systems", self.systems),
            ("users", self.users),
            ("items", self.items),
            ("categories", self.categories),
            ("list_length", self.list_length),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("{name} must be at least 1")));
        }
        if !(0.0..1.0).contains(&self.head_fraction) {
            return Err(Error::invalid("head_fraction must be in [0, 1)"));
        }
        if self.list_length > self.items {
            return Err(Error::invalid("list_length exceeds the number of items"));
        }
        if self.items - self.head() < self.categories {
            return Err(Error::invalid("too few tail items for the categories"));
        }
        if self.min_per_category * self.categories > self.list_length {
            return Err(Error::invalid("min_per_category does not fit in a list"));
        }
        Ok(())
    }

    fn head(&self) -> usize {
        (self.head_fraction * self.items as f64).ceil() as usize
    }

    /// Bonus on labeled items, rising linearly over systems.
    pub fn promotion(&self, system: usize) -> f64 {
        if self.systems == 1 {
            0.0
        } else {
            self.promotion_spread * system as f64 / (self.systems - 1) as f64
        }
    }

    /// Ranking noise, shuffled over systems so that it is not monotone in
    /// the promotion bonus.
    pub fn noise(&self, system: usize) -> f64 {
        0.25 + 1.5 * ((system * 5 + 3) % self.systems) as f64 / self.systems as f64
    }
}

fn system_name(s: usize) -> String {
    format!("sys{s:02}")
}

fn category_name(c: usize) -> String {
    format!("cat{c:02}")
}

/// Category of each item, `None` for the unlabeled head.
fn assign_categories(config: &SynthConfig) -> Vec<Option<usize>> {
    let head = config.head();
    let mut rng = seeding::rng(seeding::derive(config.seed, &[0]));
    let weights: Vec<f64> = (0..config.categories)
        .map(|c| 1.0 / (c as f64 + 1.0).sqrt())
        .collect();
    let pick = WeightedIndex::new(&weights).expect("positive weights");
    (0..config.items)
        .map(|i| match i.checked_sub(head) {
            None => None,
            Some(t) if t < config.categories => Some(t),
            Some(_) => Some(pick.sample(&mut rng)),
        })
        .collect()
}

struct UserOutput {
    relevant: Vec<ItemIdx>,
    lists: Vec<(Vec<ItemIdx>, Vec<f64>)>,
}

fn by_score_desc(scores: &[f64]) -> impl Fn(&usize, &usize) -> std::cmp::Ordering + '_ {
    move |&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// The `n` best of `candidates`, best first.
fn top_among(mut candidates: Vec<usize>, scores: &[f64], n: usize) -> Vec<usize> {
    let cmp = by_score_desc(scores);
    if n < candidates.len() {
        candidates.select_nth_unstable_by(n, &cmp);
        candidates.truncate(n);
    }
    candidates.sort_unstable_by(&cmp);
    candidates
}

fn top(scores: &[f64], n: usize) -> Vec<usize> {
    top_among((0..scores.len()).collect(), scores, n)
}

/// Swaps the weakest removable items for the best missing ones until every
/// category reaches `min` or runs out of members.
fn top_up(
    list: &mut Vec<usize>,
    scores: &[f64],
    labels: &[Option<usize>],
    members: &[Vec<usize>],
    min: usize,
) {
    let mut in_list = vec![false; scores.len()];
    let mut counts = vec![0usize; members.len()];
    for &i in list.iter() {
        in_list[i] = true;
        if let Some(c) = labels[i] {
            counts[c] += 1;
        }
    }
    for c in 0..members.len() {
        if counts[c] >= min {
            continue;
        }
        let missing: Vec<usize> = members[c]
            .iter()
            .copied()
            .filter(|&i| !in_list[i] && scores[i].is_finite())
            .collect();
        let mut missing_scores = vec![f64::NEG_INFINITY; scores.len()];
        for &i in &missing {
            missing_scores[i] = scores[i];
        }
        let mut candidates = missing;
        candidates.sort_unstable_by(by_score_desc(&missing_scores));
        for add in candidates.into_iter().take(min - counts[c]) {
            // weakest item whose removal keeps its own category at `min`
            let Some(pos) = list
                .iter()
                .rposition(|&i| labels[i].is_none_or(|l| l != c && counts[l] > min))
            else {
                break;
            };
            let out = list.remove(pos);
            in_list[out] = false;
            if let Some(l) = labels[out] {
                counts[l] -= 1;
            }
            list.push(add);
            in_list[add] = true;
            counts[c] += 1;
            list.sort_unstable_by(by_score_desc(scores));
        }
    }
}

/// Inputs shared by every user.
struct Shared {
    labels: Vec<Option<usize>>,
    members: Vec<Vec<usize>>,
    log_popularity: Vec<f64>,
}

/// Items a system may rank for one user: the best by true preference plus
/// the largest promotion bonus, and the best few of every category.
fn candidate_pool(config: &SynthConfig, shared: &Shared, truth: &[f64]) -> Vec<usize> {
    let size = (POOL_FACTOR * config.list_length).min(config.items);
    let optimistic: Vec<f64> = truth
        .iter()
        .zip(&shared.labels)
        .map(|(&t, l)| {
            if l.is_some() {
                t + config.promotion_spread.max(0.0)
            } else {
                t
            }
        })
        .collect();
    let mut pool = top(&optimistic, size);
    for m in &shared.members {
        pool.extend(top_among(m.clone(), truth, config.min_per_category));
    }
    pool.sort_unstable();
    pool.dedup();
    pool
}

fn generate_user(config: &SynthConfig, user: usize, shared: &Shared) -> UserOutput {
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let mut rng = seeding::rng(seeding::derive(config.seed, &[1, user as u64]));
    let affinity: Vec<f64> = (0..config.categories)
        .map(|_| config.affinity_scale * std_normal.sample(&mut rng))
        .collect();
    let truth: Vec<f64> = shared
        .log_popularity
        .iter()
        .zip(&shared.labels)
        .map(|(&pop, l)| {
            let taste = std_normal.sample(&mut rng);
            -config.popularity_weight * pop + taste + l.map_or(0.0, |c| affinity[c])
        })
        .collect();
    let mut relevant: Vec<ItemIdx> = top(&truth, config.relevant_per_user.min(config.items))
        .into_iter()
        .map(|i| ItemIdx(i as u32))
        .collect();
    relevant.sort_unstable();

    let pool = candidate_pool(config, shared, &truth);
    let mut scores = vec![f64::NEG_INFINITY; config.items];
    let lists = (0..config.systems)
        .map(|s| {
            let mut rng = seeding::rng(seeding::derive(config.seed, &[2, s as u64, user as u64]));
            let sigma = config.noise(s);
            let beta = config.promotion(s);
            for &i in &pool {
                let bonus = if shared.labels[i].is_some() {
                    beta
                } else {
                    0.0
                };
                scores[i] = truth[i] + sigma * std_normal.sample(&mut rng) + bonus;
            }
            let mut list = top_among(pool.clone(), &scores, config.list_length);
            if config.min_per_category > 0 {
                top_up(
                    &mut list,
                    &scores,
                    &shared.labels,
                    &shared.members,
                    config.min_per_category,
                );
            }
            let items = list.iter().map(|&i| ItemIdx(i as u32)).collect();
            let list_scores = list.iter().map(|&i| scores[i]).collect();
            (items, list_scores)
        })
        .collect();
    UserOutput { relevant, lists }
}

/// Builds a corpus in memory. Users are interned as `u00000, u00001, ...`
/// and items as `i00000, ...` in popularity order, so dense indices match
/// the generation order.
pub fn generate(config: &SynthConfig) -> Result<Corpus> {
    config.validate()?;
    let mut vocab = Vocab::new();
    for u in 0..config.users {
        vocab.user(&format!("u{u:05}"));
    }
    for i in 0..config.items {
        vocab.item(&format!("i{i:05}"));
    }
    let labels = assign_categories(config);
    let mut members = vec![Vec::new(); config.categories];
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            members[*c].push(i);
        }
    }
    let names: Vec<String> = (0..config.categories).map(category_name).collect();
    let mut cats = CategoryMap::from_pairs(
        labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|c| (ItemIdx(i as u32), names[c].as_str()))),
    )?;
    cats.extend_catalog((0..config.items as u32).map(ItemIdx));

    let shared = Shared {
        labels,
        members,
        log_popularity: (1..=config.items).map(|i| (i as f64).ln()).collect(),
    };
    let outputs: Vec<UserOutput> = (0..config.users)
        .into_par_iter()
        .map(|u| generate_user(config, u, &shared))
        .collect();

    let mut runs: Vec<RunSet> = (0..config.systems)
        .map(|s| RunSet::new(system_name(s)))
        .collect();
    let mut judged = Vec::with_capacity(config.users);
    for (u, out) in outputs.into_iter().enumerate() {
        let user = UserIdx(u as u32);
        judged.push((user, out.relevant));
        for (run, (items, scores)) in runs.iter_mut().zip(out.lists) {
            run.insert(Ranking::with_scores(user, items, scores)?)?;
        }
    }
    Ok(Corpus {
        vocab,
        runs,
        qrels: Qrels::from_sets(judged),
        categories: cats,
        warnings: Vec::new(),
    })
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })
}

/// Writes `runs/<system>.run`, `qrels.txt` (relevant items rated 5) and
/// `labels.tsv` under `dir`.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    let runs_dir = dir.join("runs");
    fs::create_dir_all(&runs_dir)?;
    for run in &corpus.runs {
        let mut out = create(&runs_dir.join(format!("{}.run", run.system())))?;
        write_run(run, &corpus.vocab, &mut out)?;
        out.flush()?;
    }
    let mut qrels = create(&dir.join("qrels.txt"))?;
    for user in corpus.qrels.users() {
        for &item in corpus.qrels.relevant(user) {
            writeln!(
                qrels,
                "{} 0 {} 5",
                corpus.vocab.user_name(user),
                corpus.vocab.item_name(item)
            )?;
        }
    }
    qrels.flush()?;
    let mut labels = create(&dir.join("labels.tsv"))?;
    let cats = &corpus.categories;
    for c in cats.categories() {
        for &item in cats.members(c) {
            writeln!(labels, "{}\t{}", corpus.vocab.item_name(item), cats.name(c))?;
        }
    }
    labels.flush()?;
    Ok(())
}
