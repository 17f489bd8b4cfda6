//! Readers for run, qrels, label and catalog files and a run writer.
//!
//! All inputs are UTF-8 text; LF and CRLF line endings are accepted and
//! blank lines are skipped. Line numbers in errors are 1-based.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use super::{
    scores_non_increasing, CategoryMap, ItemIdx, Qrels, Ranking, RunSet, UserIdx, Vocab, Warning,
};
use crate::error::{Error, Result};

fn read_all(mut source: impl Read) -> Result<String> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    Ok(text)
}

/// Non-blank lines with their 1-based numbers, trailing `\r` removed.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n')
        .enumerate()
        .map(|(n, l)| (n + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty())
}

struct Entry {
    rank: i64,
    score: f64,
    item: ItemIdx,
    line: usize,
}

/// Parses a TREC run: `user Q0 item rank score system` per line.
///
/// The file must name exactly one system. Each user's items are ordered by
/// the rank field, ties broken by descending score.
pub fn parse_run(source: impl Read, vocab: &mut Vocab) -> Result<(RunSet, Vec<Warning>)> {
    let text = read_all(source)?;
    let mut system: Option<&str> = None;
    let mut per_user: HashMap<UserIdx, Vec<Entry>> = HashMap::new();

    for (line, content) in lines(&text) {
        let mut fields = content.split_ascii_whitespace();
        let (Some(user), Some(_q0), Some(item), Some(rank), Some(score), Some(name), None) = (
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
        ) else {
            return Err(Error::parse(
                line,
                "expected 6 fields: user Q0 item rank score system",
            ));
        };
        let rank: i64 = rank
            .parse()
            .map_err(|_| Error::parse(line, format!("rank `{rank}` is not an integer")))?;
        let score: f64 = score
            .parse()
            .ok()
            .filter(|s: &f64| !s.is_nan())
            .ok_or_else(|| Error::parse(line, format!("score `{score}` is not a number")))?;
        match system {
            None => system = Some(name),
            Some(s) if s != name => {
                return Err(Error::MixedSystems {
                    line,
                    expected: s.to_string(),
                    found: name.to_string(),
                })
            }
            Some(_) => {}
        }
        let user = vocab.user(user);
        let item = vocab.item(item);
        per_user.entry(user).or_default().push(Entry {
            rank,
            score,
            item,
            line,
        });
    }

    let Some(system) = system else {
        return Err(Error::EmptyInput);
    };

    // report duplicates at the earliest offending line
    let mut first_dup: Option<(usize, UserIdx, ItemIdx)> = None;
    for (&user, entries) in &per_user {
        let mut by_item: Vec<(ItemIdx, usize)> = entries.iter().map(|e| (e.item, e.line)).collect();
        by_item.sort_unstable();
        for w in by_item.windows(2) {
            if w[0].0 == w[1].0 {
                let line = w[1].1.max(w[0].1);
                if first_dup.is_none_or(|(l, _, _)| line < l) {
                    first_dup = Some((line, user, w[0].0));
                }
            }
        }
    }
    if let Some((line, user, item)) = first_dup {
        return Err(Error::DuplicatePair {
            line,
            user: vocab.user_name(user).to_string(),
            item: vocab.item_name(item).to_string(),
        });
    }

    let mut warnings = Vec::new();
    let mut users: Vec<UserIdx> = per_user.keys().copied().collect();
    users.sort_unstable();
    let mut run = RunSet::new(system);
    for user in users {
        let mut entries = per_user.remove(&user).unwrap_or_default();
        entries.sort_by(|a, b| {
            a.rank
                .cmp(&b.rank)
                .then(b.score.total_cmp(&a.score))
                .then(a.line.cmp(&b.line))
        });
        let contiguous = entries
            .iter()
            .enumerate()
            .all(|(i, e)| e.rank == i as i64 + 1);
        if !contiguous {
            warnings.push(Warning::NonContiguousRanks {
                user: vocab.user_name(user).to_string(),
            });
        }
        let items = entries.iter().map(|e| e.item).collect();
        let scores: Vec<f64> = entries.iter().map(|e| e.score).collect();
        let scores = if scores_non_increasing(&scores) {
            Some(scores)
        } else {
            warnings.push(Warning::ScoresOutOfOrder {
                user: vocab.user_name(user).to_string(),
            });
            None
        };
        run.insert(Ranking::from_parts_unchecked(user, items, scores))?;
    }
    Ok((run, warnings))
}

/// Writes `run` in TREC run format with contiguous 1-based ranks. Users are
/// written in interned order. Unscored rankings get scores `n - rank + 1`.
pub fn write_run(run: &RunSet, vocab: &Vocab, mut out: impl Write) -> std::io::Result<()> {
    for ranking in run.rankings() {
        let user = vocab.user_name(ranking.user);
        let n = ranking.len();
        for (pos, &item) in ranking.items().iter().enumerate() {
            let rank = pos + 1;
            let item = vocab.item_name(item);
            match ranking.scores() {
                Some(s) => writeln!(out, "{user} Q0 {item} {rank} {} {}", s[pos], run.system())?,
                None => writeln!(out, "{user} Q0 {item} {rank} {} {}", n - pos, run.system())?,
            }
        }
    }
    Ok(())
}

/// Parses qrels lines `user 0 item rating`; an item is relevant when its
/// rating is at least `threshold`. Judged users with no relevant item are
/// kept with an empty set.
pub fn parse_qrels(
    source: impl Read,
    threshold: f64,
    vocab: &mut Vocab,
) -> Result<(Qrels, Vec<Warning>)> {
    let text = read_all(source)?;
    let mut qrels = Qrels::new();
    for (line, content) in lines(&text) {
        let fields: Vec<&str> = content.split_ascii_whitespace().collect();
        let [user, _, item, rating] = fields[..] else {
            return Err(Error::parse(line, "expected 4 fields: user 0 item rating"));
        };
        let rating: f64 = rating
            .parse()
            .ok()
            .filter(|r: &f64| r.is_finite())
            .ok_or_else(|| Error::parse(line, format!("rating `{rating}` is not numeric")))?;
        let user = vocab.user(user);
        let item = vocab.item(item);
        if rating >= threshold {
            qrels.add(user, item);
        } else {
            qrels.ensure_user(user);
        }
    }
    qrels.finish();
    Ok((qrels, Vec::new()))
}

/// Parses `item<TAB>category` lines. Lines without a tab are split on the
/// first run of whitespace.
pub fn parse_categories(source: impl Read, vocab: &mut Vocab) -> Result<CategoryMap> {
    let text = read_all(source)?;
    let mut pairs = Vec::new();
    for (line, content) in lines(&text) {
        let (item, category) = match content.split_once('\t') {
            Some((i, c)) => (i.trim(), c.trim()),
            None => {
                let mut f = content.split_ascii_whitespace();
                (f.next().unwrap_or(""), f.next().unwrap_or(""))
            }
        };
        if item.is_empty() {
            return Err(Error::parse(line, "empty item id"));
        }
        if category.is_empty() {
            return Err(Error::parse(line, "empty category id"));
        }
        if category.contains('\t') {
            return Err(Error::parse(line, "expected 2 tab-separated fields"));
        }
        pairs.push((vocab.item(item), category.to_string()));
    }
    CategoryMap::from_pairs(pairs)
}

/// Parses a catalog file with one item id per line.
pub fn parse_catalog(source: impl Read, vocab: &mut Vocab) -> Result<BTreeSet<ItemIdx>> {
    let text = read_all(source)?;
    let mut items = BTreeSet::new();
    for (line, content) in lines(&text) {
        let mut f = content.split_ascii_whitespace();
        let (Some(item), None) = (f.next(), f.next()) else {
            return Err(Error::parse(line, "expected one item id per line"));
        };
        items.insert(vocab.item(item));
    }
    Ok(items)
}
