use std::collections::{BTreeSet, HashMap};

use super::{CatIdx, ItemIdx, Vocab, Warning};
use crate::error::{Error, Result};

/// Item labels in both directions plus the catalog.
///
/// `members[c]` is sorted and is exactly the transpose of `labels`; every
/// category has at least one item and every labeled item is in the catalog.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CategoryMap {
    names: Vec<String>,
    by_name: HashMap<String, CatIdx>,
    members: Vec<Vec<ItemIdx>>,
    // dense by item index; items past the end carry no labels
    labels: Vec<Vec<CatIdx>>,
    catalog: BTreeSet<ItemIdx>,
}

impl CategoryMap {
    /// Builds a map from `(item, category name)` pairs. Repeated pairs are
    /// idempotent. Categories are numbered in first-seen order.
    pub fn from_pairs<S: AsRef<str>>(
        pairs: impl IntoIterator<Item = (ItemIdx, S)>,
    ) -> Result<Self> {
        let mut map = Self::default();
        for (item, name) in pairs {
            let name = name.as_ref();
            if name.is_empty() {
                return Err(Error::invalid("empty category id"));
            }
            let c = map.intern(name);
            map.members[c.index()].push(item);
        }
        map.rebuild_labels();
        map.catalog = map.labeled_items().collect();
        Ok(map)
    }

    fn intern(&mut self, name: &str) -> CatIdx {
        if let Some(&c) = self.by_name.get(name) {
            return c;
        }
        let c = CatIdx(self.names.len() as u32);
        self.names.push(name.to_string());
        self.by_name.insert(name.to_string(), c);
        self.members.push(Vec::new());
        c
    }

    fn rebuild_labels(&mut self) {
        let mut max = 0;
        for m in &mut self.members {
            m.sort_unstable();
            m.dedup();
            if let Some(last) = m.last() {
                max = max.max(last.index() + 1);
            }
        }
        let mut labels = vec![Vec::new(); max];
        for (c, m) in self.members.iter().enumerate() {
            for item in m {
                labels[item.index()].push(CatIdx(c as u32));
            }
        }
        self.labels = labels;
    }

    pub fn num_categories(&self) -> usize {
        self.names.len()
    }

    pub fn categories(&self) -> impl ExactSizeIterator<Item = CatIdx> {
        (0..self.names.len() as u32).map(CatIdx)
    }

    pub fn name(&self, c: CatIdx) -> &str {
        &self.names[c.index()]
    }

    pub fn find(&self, name: &str) -> Option<CatIdx> {
        self.by_name.get(name).copied()
    }

    /// Sorted items of category `c`.
    pub fn members(&self, c: CatIdx) -> &[ItemIdx] {
        &self.members[c.index()]
    }

    pub fn size(&self, c: CatIdx) -> usize {
        self.members[c.index()].len()
    }

    /// Categories of `item`, ascending.
    #[inline]
    pub fn labels(&self, item: ItemIdx) -> &[CatIdx] {
        self.labels
            .get(item.index())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn contains(&self, c: CatIdx, item: ItemIdx) -> bool {
        self.labels(item).contains(&c)
    }

    /// Items carrying at least one label, ascending.
    pub fn labeled_items(&self) -> impl Iterator<Item = ItemIdx> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.is_empty())
            .map(|(i, _)| ItemIdx(i as u32))
    }

    pub fn catalog(&self) -> &BTreeSet<ItemIdx> {
        &self.catalog
    }

    pub fn extend_catalog(&mut self, items: impl IntoIterator<Item = ItemIdx>) {
        self.catalog.extend(items);
    }

    /// Replaces the catalog by `explicit`, dropping labels of items outside it.
    pub fn restrict_catalog(
        &self,
        explicit: &BTreeSet<ItemIdx>,
        vocab: &Vocab,
    ) -> (Self, Vec<Warning>) {
        let mut warnings = Vec::new();
        let mut restricted = self.retain(|item, c| {
            let keep = explicit.contains(&item);
            if !keep {
                warnings.push(Warning::LabelOutsideCatalog {
                    item: vocab.item_name(item).to_string(),
                    category: self.name(c).to_string(),
                });
            }
            keep
        });
        restricted.catalog = explicit.clone();
        (restricted, warnings)
    }

    /// Copy keeping only the `(item, category)` pairs accepted by `keep`.
    /// Categories left without items are dropped; the catalog is unchanged,
    /// so items losing every label stay in the catalog untracked.
    pub fn retain(&self, mut keep: impl FnMut(ItemIdx, CatIdx) -> bool) -> Self {
        let mut out = Self {
            catalog: self.catalog.clone(),
            ..Self::default()
        };
        for c in self.categories() {
            let kept: Vec<ItemIdx> = self
                .members(c)
                .iter()
                .copied()
                .filter(|&i| keep(i, c))
                .collect();
            if kept.is_empty() {
                continue;
            }
            let nc = out.intern(self.name(c));
            out.members[nc.index()] = kept;
        }
        out.rebuild_labels();
        out
    }

    /// Checks the transpose and catalog invariants.
    pub fn check_invariants(&self) -> bool {
        for c in self.categories() {
            let m = self.members(c);
            if m.is_empty() || m.windows(2).any(|w| w[0] >= w[1]) {
                return false;
            }
            if m.iter()
                .any(|&i| !self.labels(i).contains(&c) || !self.catalog.contains(&i))
            {
                return false;
            }
        }
        self.labels.iter().enumerate().all(|(i, ls)| {
            ls.iter()
                .all(|&c| self.members(c).binary_search(&ItemIdx(i as u32)).is_ok())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(u32, &str)]) -> CategoryMap {
        CategoryMap::from_pairs(pairs.iter().map(|&(i, c)| (ItemIdx(i), c))).unwrap()
    }

    #[test]
    fn multi_label_both_directions() {
        let m = map(&[(1, "a"), (1, "b"), (2, "a")]);
        let a = m.find("a").unwrap();
        let b = m.find("b").unwrap();
        assert_eq!(m.labels(ItemIdx(1)), &[a, b]);
        assert_eq!(m.members(a), &[ItemIdx(1), ItemIdx(2)]);
        assert_eq!(m.members(b), &[ItemIdx(1)]);
        assert!(m.labels(ItemIdx(50)).is_empty());
        assert!(m.check_invariants());
    }

    #[test]
    fn repeated_pair_is_idempotent() {
        assert_eq!(map(&[(1, "a"), (1, "a")]), map(&[(1, "a")]));
    }

    #[test]
    fn empty_category_name_rejected() {
        assert!(CategoryMap::from_pairs([(ItemIdx(0), "")]).is_err());
    }

    #[test]
    fn retain_drops_empty_categories_and_keeps_catalog() {
        let m = map(&[(1, "a"), (2, "b")]);
        let r = m.retain(|i, _| i != ItemIdx(2));
        assert_eq!(r.num_categories(), 1);
        assert!(r.find("b").is_none());
        assert!(r.catalog().contains(&ItemIdx(2)));
        assert!(r.labels(ItemIdx(2)).is_empty());
        assert!(r.check_invariants());
    }
}
