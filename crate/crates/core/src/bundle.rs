//! Domain types shared by every stage of the pipeline: items, bundles,
//! bundle lists, user contexts and the item vocabulary.
//!
//! Item ids inside the library are dense tokens in `[0, N)`. The raw ids
//! found in input files are kept on each [`Item`] and are what every output
//! file reports. Four special tokens follow the item range:
//!
//! ```text
//! 0 .. N-1   items
//! N          END  (terminates a bundle; also the last row of the softmax)
//! N + 1      PAD
//! N + 2      BOS  (decoder input at the first step)
//! N + 3      UNK  (context items unseen at training time)
//! ```

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Dense item token.
pub type ItemId = u32;

/// A purchasable item with its side features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: ItemId,
    pub raw_id: u64,
    /// Dense category token, `None` for catalogs without categories.
    pub category: Option<u32>,
    pub price: f64,
}

/// A set of items decoded as a sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bundle {
    items: Vec<ItemId>,
    canonical: bool,
}

impl Bundle {
    /// Builds a bundle from a duplicate-free, non-empty sequence, keeping the
    /// given order. Returns `None` when the sequence is empty or repeats an id.
    pub fn from_sequence(items: Vec<ItemId>) -> Option<Self> {
        if items.is_empty() {
            return None;
        }
        let distinct: BTreeSet<_> = items.iter().collect();
        if distinct.len() != items.len() {
            return None;
        }
        Some(Self {
            items,
            canonical: false,
        })
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    /// The unordered item set.
    pub fn as_set(&self) -> BTreeSet<ItemId> {
        self.items.iter().copied().collect()
    }

    /// Sorted item ids; two bundles are the same set iff their keys match.
    pub fn set_key(&self) -> Vec<ItemId> {
        let mut key = self.items.clone();
        key.sort_unstable();
        key
    }
}

/// Canonical sequence order for a bundle: price descending, ties by ascending id.
pub fn price_order(a: (u64, f64), b: (u64, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Removes repeated ids (first occurrence kept) and sorts by descending
/// price, breaking ties by ascending id.
pub fn canonicalize_bundle(items: &[ItemId], vocab: &Vocabulary) -> Result<Bundle> {
    if items.is_empty() {
        return Err(Error::DegenerateInput("bundle has no items"));
    }
    let mut seen = BTreeSet::new();
    let mut priced = Vec::with_capacity(items.len());
    for &id in items {
        let item = vocab.item(id).ok_or(Error::UnknownItem(id as u64))?;
        if seen.insert(id) {
            priced.push((id as u64, item.price));
        }
    }
    priced.sort_by(|a, b| price_order(*a, *b));
    Ok(Bundle {
        items: priced.into_iter().map(|(id, _)| id as ItemId).collect(),
        canonical: true,
    })
}

pub fn bundle_as_set(b: &Bundle) -> BTreeSet<ItemId> {
    b.as_set()
}

/// `|a ∩ b| / |a ∪ b|`.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> Result<f64> {
    if a.is_empty() && b.is_empty() {
        return Err(Error::DegenerateInput("jaccard of two empty sets"));
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// The K bundles recommended to one user.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BundleList {
    pub bundles: Vec<Bundle>,
    /// Log-probability of each bundle under the quality model.
    pub scores: Option<Vec<f64>>,
}

impl BundleList {
    pub fn len(&self) -> usize {
        self.bundles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.is_empty()
    }
}

/// Ordered interaction history of one user, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserContext {
    pub user_id: u64,
    pub history: Vec<ItemId>,
}

/// Items known to the model plus the special tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    items: Vec<Item>,
    index: HashMap<u64, ItemId>,
    categories: Vec<u64>,
}

impl Vocabulary {
    /// Builds a vocabulary from `(raw_id, raw_category, price)` rows. Items
    /// are assigned dense ids in ascending raw-id order, categories likewise.
    pub fn new(rows: impl IntoIterator<Item = (u64, Option<u64>, f64)>) -> Result<Self> {
        let mut rows: Vec<_> = rows.into_iter().collect();
        rows.sort_by_key(|r| r.0);
        rows.dedup_by_key(|r| r.0);
        if rows.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let categories: Vec<u64> = rows
            .iter()
            .filter_map(|r| r.1)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let cate_index: HashMap<u64, u32> = categories
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i as u32))
            .collect();
        let mut items = Vec::with_capacity(rows.len());
        let mut index = HashMap::with_capacity(rows.len());
        for (i, (raw, cate, price)) in rows.into_iter().enumerate() {
            if !(price >= 0.0 && price.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "item {raw} has invalid price {price}"
                )));
            }
            index.insert(raw, i as ItemId);
            items.push(Item {
                id: i as ItemId,
                raw_id: raw,
                category: cate.map(|c| cate_index[&c]),
                price,
            });
        }
        Ok(Self {
            items,
            index,
            categories,
        })
    }

    /// Number of real items, N.
    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    /// Items plus the four special tokens.
    pub fn n_tokens(&self) -> usize {
        self.items.len() + 4
    }

    pub fn end(&self) -> ItemId {
        self.items.len() as ItemId
    }

    pub fn pad(&self) -> ItemId {
        self.items.len() as ItemId + 1
    }

    pub fn bos(&self) -> ItemId {
        self.items.len() as ItemId + 2
    }

    pub fn unk(&self) -> ItemId {
        self.items.len() as ItemId + 3
    }

    pub fn is_item(&self, id: ItemId) -> bool {
        (id as usize) < self.items.len()
    }

    pub fn item(&self, id: ItemId) -> Option<&Item> {
        self.items.get(id as usize)
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn raw_category(&self, cate: u32) -> Option<u64> {
        self.categories.get(cate as usize).copied()
    }

    pub fn lookup(&self, raw: u64) -> Option<ItemId> {
        self.index.get(&raw).copied()
    }

    pub fn raw_id(&self, id: ItemId) -> Option<u64> {
        self.item(id).map(|i| i.raw_id)
    }

    /// Maps a raw history to tokens; raw ids outside the vocabulary become UNK.
    pub fn encode_context(&self, user_id: u64, raw: &[u64]) -> Result<UserContext> {
        if raw.is_empty() {
            return Err(Error::EmptyContext);
        }
        Ok(UserContext {
            user_id,
            history: raw
                .iter()
                .map(|r| self.lookup(*r).unwrap_or_else(|| self.unk()))
                .collect(),
        })
    }

    /// Maps a raw bundle to a canonical token bundle. Fails on unknown ids.
    pub fn encode_bundle(&self, raw: &[u64]) -> Result<Bundle> {
        let ids = raw
            .iter()
            .map(|r| self.lookup(*r).ok_or(Error::UnknownItem(*r)))
            .collect::<Result<Vec<_>>>()?;
        canonicalize_bundle(&ids, self)
    }

    pub fn decode_bundle(&self, b: &Bundle) -> Vec<u64> {
        b.items()
            .iter()
            .filter_map(|&id| self.raw_id(id))
            .collect()
    }

    /// Stable digest of the item table, used to pair checkpoints with data.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for item in &self.items {
            hasher.update(item.raw_id.to_le_bytes());
            let cate = item
                .category
                .and_then(|c| self.raw_category(c))
                .map_or(u64::MAX, |c| c);
            hasher.update(cate.to_le_bytes());
            hasher.update(item.price.to_bits().to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab() -> Vocabulary {
        // raw ids 10.. with prices
        Vocabulary::new(vec![
            (10, Some(1), 5.0),
            (11, Some(1), 9.0),
            (12, None, 5.0),
            (13, Some(2), 1.0),
            (14, Some(2), 9.0),
        ])
        .unwrap()
    }

    #[test]
    fn canonical_order_is_price_descending() {
        let v = vocab();
        let b = canonicalize_bundle(&[0, 1], &v).unwrap();
        assert_eq!(b.items(), &[1, 0]);
        assert!(b.is_canonical());
        assert_eq!(canonicalize_bundle(&[0], &v).unwrap().items(), &[0]);
    }

    #[test]
    fn equal_prices_tie_break_on_id() {
        let v = vocab();
        // items 0 and 2 both cost 5
        assert_eq!(canonicalize_bundle(&[2, 0], &v).unwrap().items(), &[0, 2]);
    }

    #[test]
    fn duplicates_dropped_and_unknown_rejected() {
        let v = vocab();
        assert_eq!(
            canonicalize_bundle(&[3, 1, 3, 1], &v).unwrap().items(),
            &[1, 3]
        );
        assert!(matches!(
            canonicalize_bundle(&[0, 42], &v),
            Err(Error::UnknownItem(42))
        ));
        assert!(canonicalize_bundle(&[], &v).is_err());
    }

    #[test]
    fn set_view_ignores_order() {
        let a = Bundle::from_sequence(vec![1, 0]).unwrap();
        let b = Bundle::from_sequence(vec![0, 1]).unwrap();
        assert_eq!(bundle_as_set(&a), [0, 1].into_iter().collect());
        assert_eq!(bundle_as_set(&a), bundle_as_set(&b));
        let c = Bundle::from_sequence(vec![2, 0, 1]).unwrap();
        let d = Bundle::from_sequence(vec![1, 2, 0]).unwrap();
        assert_eq!(c.set_key(), d.set_key());
        assert!(Bundle::from_sequence(vec![1, 1]).is_none());
    }

    #[test]
    fn jaccard_hand_cases() {
        let s = |v: &[u32]| v.iter().copied().collect::<BTreeSet<_>>();
        assert_eq!(jaccard(&s(&[1, 2]), &s(&[1, 2])).unwrap(), 1.0);
        assert_eq!(jaccard(&s(&[1, 2]), &s(&[3, 4])).unwrap(), 0.0);
        assert_eq!(jaccard(&s(&[1, 2]), &s(&[2, 3])).unwrap(), 1.0 / 3.0);
        assert!(jaccard(&s(&[]), &s(&[])).is_err());
    }

    #[test]
    fn special_tokens_sit_after_items() {
        let v = vocab();
        assert_eq!(v.n_items(), 5);
        let specials = [v.end(), v.pad(), v.bos(), v.unk()];
        assert!(specials.iter().all(|&t| !v.is_item(t)));
        assert_eq!(v.n_tokens(), 9);
        let ctx = v.encode_context(7, &[10, 99]).unwrap();
        assert_eq!(ctx.history, vec![0, v.unk()]);
    }

    #[test]
    fn hash_tracks_content() {
        let a = vocab();
        let b = Vocabulary::new(vec![(10, Some(1), 5.0)]).unwrap();
        assert_eq!(a.hash(), vocab().hash());
        assert_ne!(a.hash(), b.hash());
    }

    proptest! {
        #[test]
        fn canonicalize_idempotent(raw in prop::collection::vec(0u32..5, 1..12)) {
            let v = vocab();
            let once = canonicalize_bundle(&raw, &v).unwrap();
            let twice = canonicalize_bundle(once.items(), &v).unwrap();
            prop_assert_eq!(&once, &twice);
            let distinct: BTreeSet<_> = raw.iter().copied().collect();
            prop_assert_eq!(bundle_as_set(&once), distinct);
            for w in once.items().windows(2) {
                prop_assert!(v.item(w[0]).unwrap().price >= v.item(w[1]).unwrap().price);
            }
        }

        #[test]
        fn jaccard_symmetric_bounded(
            a in prop::collection::btree_set(0u32..20, 1..8),
            b in prop::collection::btree_set(0u32..20, 1..8),
        ) {
            let ab = jaccard(&a, &b).unwrap();
            let ba = jaccard(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        }
    }
}
