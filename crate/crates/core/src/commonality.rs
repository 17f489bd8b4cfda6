//! Familiarity, per-category commonality and Borda aggregation.
//!
//! A user's familiarity with category `c` is the expected recall of `c`
//! under the browsing model. The commonality of a system for `c` is the
//! product of familiarity over all users; it is kept in the log domain, with
//! `-inf` standing for "some user has zero familiarity". Systems are then
//! ranked per category and the ranks summed (Borda count, lower is better).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::browse::BrowsingModel;
use crate::corpus::{CatIdx, CategoryMap, ItemIdx, Ranking, RunSet, UserIdx};
use crate::error::{Error, Result};

/// How users of the population without a ranking in a run are treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MissingUsers {
    /// Familiarity 0: they received no recommendations.
    #[default]
    Zero,
    /// Left out of the product.
    Skip,
}

/// What happens to the stopping mass beyond the end of a finite list.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Residual {
    #[default]
    Drop,
    /// Divide familiarity by the captured mass `1 - γ^n`.
    Renormalize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CommonalityOptions {
    pub missing: MissingUsers,
    pub residual: Residual,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FamiliarityScore {
    pub user: UserIdx,
    pub category: CatIdx,
    pub value: f64,
}

/// Log-commonality of one system for one category.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CommonalityResult {
    pub category: CatIdx,
    /// `Σ_u ln f_{u,c}`; `-inf` exactly when `zero_users > 0`.
    pub log_value: f64,
    pub zero_users: usize,
    /// Users entering the product.
    pub users: usize,
}

impl CommonalityResult {
    /// Geometric mean of the users' familiarity.
    pub fn geometric_mean(&self) -> f64 {
        if self.users == 0 {
            return 0.0;
        }
        (self.log_value / self.users as f64).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BordaScore {
    pub system: String,
    /// Sum of per-category ranks; tied systems share the mean of their positions.
    pub score: f64,
    pub per_category_rank: BTreeMap<String, f64>,
}

fn nonempty(category: CatIdx, cats: &CategoryMap) -> Result<usize> {
    if category.index() >= cats.num_categories() {
        return Err(Error::UnknownCategory(format!("#{}", category.0)));
    }
    match cats.size(category) {
        0 => Err(Error::EmptyCategory(cats.name(category).to_string())),
        n => Ok(n),
    }
}

/// Fraction of category `c` found in the top `k` of `ranking`.
pub fn category_recall(
    ranking: &Ranking,
    k: usize,
    category: CatIdx,
    cats: &CategoryMap,
) -> Result<f64> {
    let size = nonempty(category, cats)?;
    if k > ranking.len() {
        return Err(Error::invalid(format!(
            "cutoff {k} exceeds ranking length {}",
            ranking.len()
        )));
    }
    let hits = ranking.items()[..k]
        .iter()
        .filter(|&&i| cats.contains(category, i))
        .count();
    Ok(hits as f64 / size as f64)
}

/// Expected recall of `category` under the browsing model.
pub fn familiarity(
    ranking: &Ranking,
    category: CatIdx,
    cats: &CategoryMap,
    model: &BrowsingModel,
) -> Result<FamiliarityScore> {
    let size = nonempty(category, cats)?;
    let n = ranking.len();
    let tail = model.residual(n);
    let mut sum = 0.0;
    let mut examine = 1.0;
    for &item in ranking.items() {
        if cats.contains(category, item) {
            // an item at rank j counts toward recall at every stop i >= j
            sum += examine - tail;
        }
        examine *= model.patience();
    }
    Ok(FamiliarityScore {
        user: ranking.user,
        category,
        value: sum / size as f64,
    })
}

/// Familiarity of one list with every category of `cats`, indexed by category.
pub fn familiarity_all(
    items: &[ItemIdx],
    cats: &CategoryMap,
    model: &BrowsingModel,
    residual: Residual,
) -> Vec<f64> {
    let mut mass = vec![0.0; cats.num_categories()];
    let mut hits = vec![0u32; cats.num_categories()];
    let mut examine = 1.0;
    for &item in items {
        for &c in cats.labels(item) {
            mass[c.index()] += examine;
            hits[c.index()] += 1;
        }
        examine *= model.patience();
    }
    let tail = model.residual(items.len());
    let norm = match residual {
        Residual::Renormalize if !items.is_empty() => model.truncated_mass(items.len()),
        _ => 1.0,
    };
    cats.categories()
        .map(|c| {
            let i = c.index();
            (mass[i] - f64::from(hits[i]) * tail) / cats.size(c) as f64 / norm
        })
        .collect()
}

fn log_sum(category: CatIdx, values: impl Iterator<Item = f64>) -> CommonalityResult {
    let mut log_value = 0.0;
    let mut zero_users = 0;
    let mut users = 0;
    for f in values {
        users += 1;
        if f <= 0.0 {
            zero_users += 1;
        } else {
            log_value += f.ln();
        }
    }
    if zero_users > 0 {
        log_value = f64::NEG_INFINITY;
    }
    CommonalityResult {
        category,
        log_value,
        zero_users,
        users,
    }
}

/// Log-commonality of `run` for one category over `population` (sorted).
/// The log-sum runs in ascending user order.
pub fn category_commonality(
    run: &RunSet,
    population: &[UserIdx],
    category: CatIdx,
    cats: &CategoryMap,
    model: &BrowsingModel,
    opts: CommonalityOptions,
) -> Result<CommonalityResult> {
    nonempty(category, cats)?;
    if run.is_empty() {
        return Err(Error::EmptyInput);
    }
    let values: Vec<Option<f64>> = population
        .par_iter()
        .map(|&u| match run.get(u) {
            Some(r) => familiarity(r, category, cats, model).map(|f| {
                Some(match opts.residual {
                    Residual::Renormalize if !r.is_empty() => {
                        f.value / model.truncated_mass(r.len())
                    }
                    _ => f.value,
                })
            }),
            None => Ok(match opts.missing {
                MissingUsers::Zero => Some(0.0),
                MissingUsers::Skip => None,
            }),
        })
        .collect::<Result<_>>()?;
    Ok(log_sum(category, values.into_iter().flatten()))
}

/// Log-commonality of `run` for every category, indexed by category.
pub fn system_commonality(
    run: &RunSet,
    population: &[UserIdx],
    cats: &CategoryMap,
    model: &BrowsingModel,
    opts: CommonalityOptions,
) -> Vec<CommonalityResult> {
    let per_user: Vec<Option<Vec<f64>>> = population
        .par_iter()
        .map(|&u| match (run.get(u), opts.missing) {
            (Some(r), _) => Some(familiarity_all(r.items(), cats, model, opts.residual)),
            (None, MissingUsers::Zero) => Some(vec![0.0; cats.num_categories()]),
            (None, MissingUsers::Skip) => None,
        })
        .collect();
    let rows: Vec<&Vec<f64>> = per_user.iter().flatten().collect();
    cats.categories()
        .map(|c| log_sum(c, rows.iter().map(|f| f[c.index()])))
        .collect()
}

/// Borda count over per-category system scores (higher score = better).
///
/// In each category the best system gets rank 1; tied systems share the
/// mean of their positions. Output is sorted by ascending total, ties by
/// system name.
pub fn borda_aggregate(
    per_category: &BTreeMap<String, BTreeMap<String, f64>>,
) -> Result<Vec<BordaScore>> {
    if per_category.is_empty() {
        return Err(Error::invalid(
            "Borda aggregation needs at least one category",
        ));
    }
    let systems: BTreeSet<&String> = per_category.values().flat_map(|m| m.keys()).collect();
    if systems.is_empty() {
        return Err(Error::invalid(
            "Borda aggregation needs at least one system",
        ));
    }
    let mut out: BTreeMap<&String, BordaScore> = systems
        .iter()
        .map(|&s| {
            (
                s,
                BordaScore {
                    system: s.clone(),
                    score: 0.0,
                    per_category_rank: BTreeMap::new(),
                },
            )
        })
        .collect();

    for (category, scores) in per_category {
        let mut column = Vec::with_capacity(systems.len());
        for &s in &systems {
            let v = scores.get(s).ok_or_else(|| Error::MissingCell {
                category: category.clone(),
                system: s.clone(),
            })?;
            if v.is_nan() {
                return Err(Error::invalid(format!(
                    "NaN score for system `{s}` in category `{category}`"
                )));
            }
            column.push((s, *v));
        }
        for (s, rank) in fractional_ranks(&column) {
            let entry = out.get_mut(s).expect("system present");
            entry.score += rank;
            entry.per_category_rank.insert(category.clone(), rank);
        }
    }

    let mut scores: Vec<BordaScore> = out.into_values().collect();
    scores.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then_with(|| a.system.cmp(&b.system))
    });
    Ok(scores)
}

/// Descending-value ranks starting at 1, ties averaged.
fn fractional_ranks<K: Copy>(column: &[(K, f64)]) -> Vec<(K, f64)> {
    let mut order: Vec<usize> = (0..column.len()).collect();
    order.sort_by(|&a, &b| {
        column[b]
            .1
            .partial_cmp(&column[a].1)
            .unwrap_or(Ordering::Equal)
    });
    let mut ranks = Vec::with_capacity(column.len());
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && column[order[end + 1]].1 == column[order[start]].1 {
            end += 1;
        }
        let mean = (start + end) as f64 / 2.0 + 1.0;
        for &i in &order[start..=end] {
            ranks.push((column[i].0, mean));
        }
        start = end + 1;
    }
    ranks
}

/// Competition ranks (1, 2, 2, 4, ...) for an ascending list of Borda scores.
pub fn standings(scores: &[BordaScore]) -> Vec<usize> {
    let mut out = Vec::with_capacity(scores.len());
    for (i, s) in scores.iter().enumerate() {
        if i > 0 && scores[i - 1].score == s.score {
            out.push(out[i - 1]);
        } else {
            out.push(i + 1);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocab;

    struct Fixture {
        vocab: Vocab,
        cats: CategoryMap,
    }

    impl Fixture {
        fn new(labels: &[(&str, &str)]) -> Self {
            let mut vocab = Vocab::new();
            let pairs: Vec<_> = labels.iter().map(|&(i, c)| (vocab.item(i), c)).collect();
            let cats = CategoryMap::from_pairs(pairs).unwrap();
            Self { vocab, cats }
        }

        fn ranking(&mut self, user: &str, items: &[&str]) -> Ranking {
            let u = self.vocab.user(user);
            Ranking::new(u, items.iter().map(|i| self.vocab.item(i)).collect()).unwrap()
        }
    }

    #[test]
    fn recall_examples() {
        let mut f = Fixture::new(&[("A", "c"), ("B", "c")]);
        let r = f.ranking("u", &["A", "X", "B"]);
        let c = f.cats.find("c").unwrap();
        assert_eq!(category_recall(&r, 1, c, &f.cats).unwrap(), 0.5);
        assert_eq!(category_recall(&r, 3, c, &f.cats).unwrap(), 1.0);
        assert_eq!(category_recall(&r, 0, c, &f.cats).unwrap(), 0.0);
        assert!(category_recall(&r, 4, c, &f.cats).is_err());
    }

    #[test]
    fn familiarity_examples() {
        let mut f = Fixture::new(&[("A", "c"), ("B", "c"), ("Z", "d")]);
        let m = BrowsingModel::new(0.5).unwrap();
        let c = f.cats.find("c").unwrap();
        let r = f.ranking("u", &["A", "X", "B"]);
        // 0.5*0.5 + 0.25*0.5 + 0.125*1.0
        assert!((familiarity(&r, c, &f.cats, &m).unwrap().value - 0.5).abs() < 1e-15);

        let none = f.ranking("v", &["X", "Y"]);
        assert_eq!(familiarity(&none, c, &f.cats, &m).unwrap().value, 0.0);

        let mut g = Fixture::new(&[("A", "c")]);
        let single = g.ranking("u", &["A"]);
        let c = g.cats.find("c").unwrap();
        let v = familiarity(&single, c, &g.cats, &m).unwrap().value;
        assert_eq!(v, 0.5);
        assert_eq!(v, m.truncated_mass(1));
    }

    #[test]
    fn familiarity_all_agrees_with_single_category() {
        let mut f = Fixture::new(&[("A", "c"), ("B", "c"), ("B", "d"), ("Z", "d")]);
        let m = BrowsingModel::new(0.7).unwrap();
        let r = f.ranking("u", &["Q", "B", "A", "W", "Z"]);
        let all = familiarity_all(r.items(), &f.cats, &m, Residual::Drop);
        for c in f.cats.categories() {
            let single = familiarity(&r, c, &f.cats, &m).unwrap().value;
            assert!((all[c.index()] - single).abs() < 1e-15);
        }
        let renorm = familiarity_all(r.items(), &f.cats, &m, Residual::Renormalize);
        assert!((renorm[0] - all[0] / m.truncated_mass(5)).abs() < 1e-15);
    }

    #[test]
    fn perfect_finite_ranking_stays_below_one() {
        let mut f = Fixture::new(&[("A", "c"), ("B", "c")]);
        let m = BrowsingModel::new(0.9).unwrap();
        let r = f.ranking("u", &["A", "B"]);
        let c = f.cats.find("c").unwrap();
        let v = familiarity(&r, c, &f.cats, &m).unwrap().value;
        assert!(v < m.truncated_mass(2) + 1e-15 && v < 1.0);
    }

    #[test]
    fn empty_category_errors() {
        let mut f = Fixture::new(&[("A", "c")]);
        let r = f.ranking("u", &["A"]);
        assert!(familiarity(&r, CatIdx(7), &f.cats, &BrowsingModel::default()).is_err());
    }

    #[test]
    fn commonality_examples() {
        let mut f = Fixture::new(&[("A", "c"), ("B", "c")]);
        let m = BrowsingModel::new(0.5).unwrap();
        let c = f.cats.find("c").unwrap();
        // [A, X, B] has familiarity 0.5 (see above)
        let r1 = f.ranking("u1", &["A", "X", "B"]);
        let r2 = f.ranking("u2", &["A", "X", "B"]);
        let r3 = f.ranking("u3", &["X"]);
        let run = RunSet::from_rankings("s", [r1.clone(), r2]).unwrap();
        let pop: Vec<_> = run.users().collect();
        let res = category_commonality(&run, &pop, c, &f.cats, &m, Default::default()).unwrap();
        assert!((res.log_value - (0.5f64 * 0.5).ln()).abs() < 1e-12);
        assert_eq!(res.zero_users, 0);

        let single = RunSet::from_rankings("s", [r1]).unwrap();
        let pop1: Vec<_> = single.users().collect();
        let res = category_commonality(&single, &pop1, c, &f.cats, &m, Default::default()).unwrap();
        assert!((res.log_value - 0.5f64.ln()).abs() < 1e-15);

        let mut with_zero = run.clone();
        with_zero.insert(r3).unwrap();
        let pop3: Vec<_> = with_zero.users().collect();
        let res =
            category_commonality(&with_zero, &pop3, c, &f.cats, &m, Default::default()).unwrap();
        assert_eq!(res.log_value, f64::NEG_INFINITY);
        assert_eq!(res.zero_users, 1);
    }

    #[test]
    fn missing_users_policy() {
        let mut f = Fixture::new(&[("A", "c")]);
        let m = BrowsingModel::new(0.5).unwrap();
        let r = f.ranking("u1", &["A"]);
        let absent = f.vocab.user("u2");
        let run = RunSet::from_rankings("s", [r]).unwrap();
        let pop = vec![UserIdx(0), absent];
        let zero = system_commonality(&run, &pop, &f.cats, &m, Default::default());
        assert_eq!(zero[0].log_value, f64::NEG_INFINITY);
        assert_eq!(zero[0].zero_users, 1);
        let skip = CommonalityOptions {
            missing: MissingUsers::Skip,
            ..Default::default()
        };
        let skipped = system_commonality(&run, &pop, &f.cats, &m, skip);
        assert_eq!(skipped[0].log_value, 0.5f64.ln());
        assert_eq!(skipped[0].users, 1);
    }

    fn table(rows: &[(&str, &[(&str, f64)])]) -> BTreeMap<String, BTreeMap<String, f64>> {
        rows.iter()
            .map(|(c, cells)| {
                (
                    c.to_string(),
                    cells.iter().map(|(s, v)| (s.to_string(), *v)).collect(),
                )
            })
            .collect()
    }

    fn totals(b: &[BordaScore]) -> Vec<(&str, f64)> {
        b.iter().map(|s| (s.system.as_str(), s.score)).collect()
    }

    #[test]
    fn borda_examples() {
        let b = borda_aggregate(&table(&[
            ("c1", &[("a", -1.0), ("b", -2.0)]),
            ("c2", &[("a", -0.5), ("b", f64::NEG_INFINITY)]),
        ]))
        .unwrap();
        assert_eq!(totals(&b), [("a", 2.0), ("b", 4.0)]);

        let b = borda_aggregate(&table(&[
            ("c1", &[("a", -1.0), ("b", -2.0)]),
            ("c2", &[("a", -2.0), ("b", -1.0)]),
        ]))
        .unwrap();
        assert_eq!(totals(&b), [("a", 3.0), ("b", 3.0)]);
        assert_eq!(standings(&b), [1, 1]);

        let b = borda_aggregate(&table(&[
            ("c1", &[("a", 3.0), ("b", 2.0), ("c", 1.0)]),
            ("c2", &[("a", 1.0), ("b", 2.0), ("c", 3.0)]),
        ]))
        .unwrap();
        assert_eq!(totals(&b), [("a", 4.0), ("b", 4.0), ("c", 4.0)]);
    }

    #[test]
    fn borda_ties_take_mean_rank() {
        let b = borda_aggregate(&table(&[(
            "c",
            &[
                ("a", f64::NEG_INFINITY),
                ("b", -1.0),
                ("c", f64::NEG_INFINITY),
            ],
        )]))
        .unwrap();
        assert_eq!(totals(&b), [("b", 1.0), ("a", 2.5), ("c", 2.5)]);
    }

    #[test]
    fn borda_missing_cell() {
        let err = borda_aggregate(&table(&[
            ("c1", &[("a", 1.0), ("b", 2.0)]),
            ("c2", &[("a", 1.0)]),
        ]))
        .unwrap_err();
        assert!(matches!(err, Error::MissingCell { .. }));
    }
}
