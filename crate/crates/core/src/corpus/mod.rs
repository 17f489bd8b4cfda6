//! Rankings, relevance judgments, category labels and the catalog.
//!
//! External identifiers are strings. They are interned into dense `u32`
//! indices by a [`Vocab`] shared by every file of one invocation, so all
//! metric code works on integers. Parsed structures are immutable afterwards.

mod categories;
mod parse;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

pub use categories::CategoryMap;
pub use parse::{parse_catalog, parse_categories, parse_qrels, parse_run, write_run};

/// Default rating threshold: ratings of 4 and 5 count as relevant.
pub const DEFAULT_RELEVANCE_THRESHOLD: f64 = 4.0;

macro_rules! dense_index {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

dense_index!(
    /// Interned user identifier.
    UserIdx
);
dense_index!(
    /// Interned item identifier.
    ItemIdx
);
dense_index!(
    /// Category index local to one [`CategoryMap`].
    CatIdx
);

/// String interner handing out dense indices in first-seen order.
#[derive(Clone, Debug, Default)]
pub struct Interner {
    names: Vec<Box<str>>,
    index: HashMap<Box<str>, u32>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = u32::try_from(self.names.len()).expect("more than u32::MAX identifiers");
        self.names.push(name.into());
        self.index.insert(name.into(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// User and item interners shared by all inputs of one invocation.
#[derive(Clone, Debug, Default)]
pub struct Vocab {
    pub users: Interner,
    pub items: Interner,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn user(&mut self, name: &str) -> UserIdx {
        UserIdx(self.users.intern(name))
    }

    pub fn item(&mut self, name: &str) -> ItemIdx {
        ItemIdx(self.items.intern(name))
    }

    pub fn find_user(&self, name: &str) -> Option<UserIdx> {
        self.users.get(name).map(UserIdx)
    }

    pub fn find_item(&self, name: &str) -> Option<ItemIdx> {
        self.items.get(name).map(ItemIdx)
    }

    pub fn user_name(&self, user: UserIdx) -> &str {
        self.users.name(user.0)
    }

    pub fn item_name(&self, item: ItemIdx) -> &str {
        self.items.name(item.0)
    }
}

/// One system's ordered item list for one user.
#[derive(Clone, Debug, PartialEq)]
pub struct Ranking {
    pub user: UserIdx,
    items: Vec<ItemIdx>,
    scores: Option<Vec<f64>>,
}

impl Ranking {
    /// Builds a ranking, rejecting duplicate items.
    pub fn new(user: UserIdx, items: Vec<ItemIdx>) -> Result<Self> {
        check_distinct(&items)?;
        Ok(Self {
            user,
            items,
            scores: None,
        })
    }

    /// Builds a scored ranking. Scores must be parallel to `items` and
    /// non-increasing in rank order.
    pub fn with_scores(user: UserIdx, items: Vec<ItemIdx>, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != items.len() {
            return Err(Error::invalid(format!(
                "{} scores for {} items",
                scores.len(),
                items.len()
            )));
        }
        if !scores_non_increasing(&scores) {
            return Err(Error::invalid(
                "scores must be non-increasing in rank order",
            ));
        }
        check_distinct(&items)?;
        Ok(Self {
            user,
            items,
            scores: Some(scores),
        })
    }

    pub(crate) fn from_parts_unchecked(
        user: UserIdx,
        items: Vec<ItemIdx>,
        scores: Option<Vec<f64>>,
    ) -> Self {
        Self {
            user,
            items,
            scores,
        }
    }

    pub fn items(&self) -> &[ItemIdx] {
        &self.items
    }

    pub fn scores(&self) -> Option<&[f64]> {
        self.scores.as_deref()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// The same ranking with every score multiplied by `factor` (> 0).
    pub fn scaled_scores(&self, factor: f64) -> Self {
        Self {
            user: self.user,
            items: self.items.clone(),
            scores: self
                .scores
                .as_ref()
                .map(|s| s.iter().map(|x| x * factor).collect()),
        }
    }
}

pub(crate) fn scores_non_increasing(scores: &[f64]) -> bool {
    scores.windows(2).all(|w| w[0] >= w[1])
}

fn check_distinct(items: &[ItemIdx]) -> Result<()> {
    let mut sorted = items.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("ranking contains a duplicate item"));
    }
    Ok(())
}

/// All per-user rankings of one named system.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSet {
    system: String,
    rankings: BTreeMap<UserIdx, Ranking>,
}

impl RunSet {
    pub fn new(system: impl Into<String>) -> Self {
        Self {
            system: system.into(),
            rankings: BTreeMap::new(),
        }
    }

    pub fn from_rankings(
        system: impl Into<String>,
        rankings: impl IntoIterator<Item = Ranking>,
    ) -> Result<Self> {
        let mut run = Self::new(system);
        for r in rankings {
            run.insert(r)?;
        }
        if run.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(run)
    }

    pub fn insert(&mut self, ranking: Ranking) -> Result<()> {
        if self.rankings.contains_key(&ranking.user) {
            return Err(Error::invalid(format!(
                "system `{}` already has a ranking for user #{}",
                self.system, ranking.user.0
            )));
        }
        self.rankings.insert(ranking.user, ranking);
        Ok(())
    }

    pub fn system(&self) -> &str {
        &self.system
    }

    pub fn get(&self, user: UserIdx) -> Option<&Ranking> {
        self.rankings.get(&user)
    }

    pub fn users(&self) -> impl Iterator<Item = UserIdx> + '_ {
        self.rankings.keys().copied()
    }

    pub fn rankings(&self) -> impl Iterator<Item = &Ranking> + '_ {
        self.rankings.values()
    }

    pub fn len(&self) -> usize {
        self.rankings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rankings.is_empty()
    }

    /// Copy restricted to `users` (which must be sorted).
    pub fn restrict_users(&self, users: &[UserIdx]) -> Self {
        Self {
            system: self.system.clone(),
            rankings: self
                .rankings
                .iter()
                .filter(|(u, _)| users.binary_search(u).is_ok())
                .map(|(u, r)| (*u, r.clone()))
                .collect(),
        }
    }

    /// Copy with every ranking passed through `f`.
    pub fn map_rankings(&self, mut f: impl FnMut(&Ranking) -> Ranking) -> Self {
        Self {
            system: self.system.clone(),
            rankings: self.rankings.iter().map(|(u, r)| (*u, f(r))).collect(),
        }
    }

    pub fn with_system(mut self, system: impl Into<String>) -> Self {
        self.system = system.into();
        self
    }
}

/// Binary relevance judgments.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Qrels {
    relevant: BTreeMap<UserIdx, Vec<ItemIdx>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_sets(sets: impl IntoIterator<Item = (UserIdx, Vec<ItemIdx>)>) -> Self {
        let mut q = Self::new();
        for (u, items) in sets {
            q.ensure_user(u);
            for i in items {
                q.add(u, i);
            }
        }
        q.finish();
        q
    }

    pub(crate) fn ensure_user(&mut self, user: UserIdx) {
        self.relevant.entry(user).or_default();
    }

    pub(crate) fn add(&mut self, user: UserIdx, item: ItemIdx) {
        self.relevant.entry(user).or_default().push(item);
    }

    pub(crate) fn finish(&mut self) {
        for items in self.relevant.values_mut() {
            items.sort_unstable();
            items.dedup();
        }
    }

    /// Sorted relevant items of `user`; empty for unjudged users.
    pub fn relevant(&self, user: UserIdx) -> &[ItemIdx] {
        self.relevant.get(&user).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_relevant(&self, user: UserIdx, item: ItemIdx) -> bool {
        self.relevant(user).binary_search(&item).is_ok()
    }

    pub fn contains_user(&self, user: UserIdx) -> bool {
        self.relevant.contains_key(&user)
    }

    pub fn users(&self) -> impl Iterator<Item = UserIdx> + '_ {
        self.relevant.keys().copied()
    }

    pub fn items(&self) -> impl Iterator<Item = ItemIdx> + '_ {
        self.relevant.values().flatten().copied()
    }

    pub fn num_relevant(&self) -> usize {
        self.relevant.values().map(Vec::len).sum()
    }

    pub fn restrict_users(&self, users: &[UserIdx]) -> Self {
        Self {
            relevant: self
                .relevant
                .iter()
                .filter(|(u, _)| users.binary_search(u).is_ok())
                .map(|(u, r)| (*u, r.clone()))
                .collect(),
        }
    }
}

/// Non-fatal problems found while loading inputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Warning {
    NonContiguousRanks { user: String },
    ScoresOutOfOrder { user: String },
    OutsideCatalog { source: &'static str, item: String },
    LabelOutsideCatalog { item: String, category: String },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::NonContiguousRanks { user } => {
                write!(
                    f,
                    "user `{user}`: ranks are not 1..n, ordered by rank then score"
                )
            }
            Warning::ScoresOutOfOrder { user } => {
                write!(
                    f,
                    "user `{user}`: scores disagree with rank order, scores dropped"
                )
            }
            Warning::OutsideCatalog { source, item } => {
                write!(f, "{source} item `{item}` is not in the catalog")
            }
            Warning::LabelOutsideCatalog { item, category } => {
                write!(
                    f,
                    "label `{category}` dropped: item `{item}` is not in the catalog"
                )
            }
        }
    }
}

/// Locations of the input files of one evaluation.
#[derive(Clone, Debug, Default)]
pub struct CorpusPaths {
    pub runs: Vec<PathBuf>,
    pub qrels: PathBuf,
    pub labels: PathBuf,
    pub catalog: Option<PathBuf>,
    pub threshold: f64,
}

/// Everything one evaluation reads, interned against a single [`Vocab`].
#[derive(Clone, Debug)]
pub struct Corpus {
    pub vocab: Vocab,
    pub runs: Vec<RunSet>,
    pub qrels: Qrels,
    pub categories: CategoryMap,
    pub warnings: Vec<Warning>,
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

fn in_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ Error::File { .. } => e,
        e => Error::InFile {
            path: path.to_path_buf(),
            source: Box::new(e),
        },
    })
}

impl Corpus {
    /// Reads every input file and applies the catalog policy: the catalog is
    /// the explicit catalog file when given, otherwise the union of all items
    /// seen in runs, qrels and labels.
    pub fn load(paths: &CorpusPaths) -> Result<Self> {
        if paths.runs.is_empty() {
            return Err(Error::Config("at least one run file is required".into()));
        }
        let mut vocab = Vocab::new();
        let mut warnings = Vec::new();

        let labels_file = open(&paths.labels)?;
        let categories = in_file(&paths.labels, parse_categories(labels_file, &mut vocab))?;
        let qrels_file = open(&paths.qrels)?;
        let (qrels, w) = in_file(
            &paths.qrels,
            parse_qrels(qrels_file, paths.threshold, &mut vocab),
        )?;
        warnings.extend(w);

        let mut runs = Vec::with_capacity(paths.runs.len());
        for path in &paths.runs {
            let (run, w) = in_file(path, parse_run(open(path)?, &mut vocab))?;
            warnings.extend(w);
            runs.push(run);
        }
        let mut seen = BTreeSet::new();
        for run in &runs {
            if !seen.insert(run.system().to_string()) {
                return Err(Error::Config(format!(
                    "system name `{}` appears in more than one run file",
                    run.system()
                )));
            }
        }

        let categories = match &paths.catalog {
            Some(path) => {
                let explicit = in_file(path, parse_catalog(open(path)?, &mut vocab))?;
                let (cats, w) = categories.restrict_catalog(&explicit, &vocab);
                warnings.extend(w);
                for item in qrels.items().collect::<BTreeSet<_>>() {
                    if !explicit.contains(&item) {
                        warnings.push(Warning::OutsideCatalog {
                            source: "qrels",
                            item: vocab.item_name(item).to_string(),
                        });
                    }
                }
                let mut outside = BTreeSet::new();
                for run in &runs {
                    for r in run.rankings() {
                        outside.extend(r.items().iter().filter(|i| !explicit.contains(i)));
                    }
                }
                for item in outside {
                    warnings.push(Warning::OutsideCatalog {
                        source: "run",
                        item: vocab.item_name(item).to_string(),
                    });
                }
                cats
            }
            None => {
                let mut cats = categories;
                cats.extend_catalog(qrels.items());
                for run in &runs {
                    for r in run.rankings() {
                        cats.extend_catalog(r.items().iter().copied());
                    }
                }
                cats
            }
        };
        if categories.num_categories() == 0 {
            return Err(Error::InFile {
                path: paths.labels.clone(),
                source: Box::new(Error::EmptyInput),
            });
        }

        Ok(Self {
            vocab,
            runs,
            qrels,
            categories,
            warnings,
        })
    }

    /// The evaluation population: every user with a ranking in any run,
    /// in ascending interned order.
    pub fn population(&self) -> Vec<UserIdx> {
        population(&self.runs)
    }
}

/// Sorted union of the users of `runs`.
pub fn population(runs: &[RunSet]) -> Vec<UserIdx> {
    let set: BTreeSet<UserIdx> = runs.iter().flat_map(|r| r.users()).collect();
    set.into_iter().collect()
}
