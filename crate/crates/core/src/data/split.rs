//! Grouping raw logs into bundle sequences and expanding them into
//! train / validation / test examples.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::{price_order, UserContext, Vocabulary};
use crate::error::{Error, Result};

use super::events::{read_jsonl, write_jsonl, BundleRecord, CatalogEntry, RawEvent};
use super::stats::{compute_stats, CorpusStats};
use super::TrainingExample;

/// A user's bundles in order-key order, each in canonical (price-descending)
/// item order, raw ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserBundles {
    pub user: u64,
    pub bundles: Vec<Vec<u64>>,
}

/// Context → target pair in raw ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawExample {
    pub user: u64,
    pub context: Vec<u64>,
    pub target: Vec<u64>,
}

/// Held-out user: context plus one or more ground-truth bundles, raw ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub user: u64,
    pub context: Vec<u64>,
    pub truth: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    /// Bundles are co-purchased items grouped by order key.
    Events,
    /// Bundles come from a fixed, pre-defined bundle catalogue.
    Bundles,
}

/// Eligibility rules of the prefix protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRule {
    /// Users with fewer bundles are skipped.
    pub min_bundles: usize,
    /// Test targets smaller than this are dropped (2 for co-purchase data).
    pub min_test_size: usize,
}

impl SplitRule {
    pub fn co_purchase() -> Self {
        Self {
            min_bundles: 3,
            min_test_size: 2,
        }
    }

    pub fn predefined() -> Self {
        Self {
            min_bundles: 3,
            min_test_size: 1,
        }
    }
}

fn canonical(items: impl IntoIterator<Item = u64>, price: &HashMap<u64, f64>) -> Vec<u64> {
    let set: BTreeSet<u64> = items.into_iter().collect();
    let mut v: Vec<u64> = set.into_iter().collect();
    v.sort_by(|a, b| price_order((*a, price[a]), (*b, price[b])));
    v
}

/// Groups events by `(user, order)`; users ascending, bundles by order key.
pub fn group_bundles(events: &[RawEvent]) -> Vec<UserBundles> {
    let mut price = HashMap::new();
    let mut groups: BTreeMap<u64, BTreeMap<u64, Vec<u64>>> = BTreeMap::new();
    for e in events {
        price.entry(e.item).or_insert(e.price);
        groups
            .entry(e.user)
            .or_default()
            .entry(e.order)
            .or_default()
            .push(e.item);
    }
    groups
        .into_iter()
        .map(|(user, orders)| UserBundles {
            user,
            bundles: orders
                .into_values()
                .map(|items| canonical(items, &price))
                .collect(),
        })
        .collect()
}

/// Groups pre-defined bundle interactions by user, ordered by `seq`.
pub fn group_bundle_records(records: &[BundleRecord], catalog: &[CatalogEntry]) -> Result<Vec<UserBundles>> {
    let price: HashMap<u64, f64> = catalog.iter().map(|c| (c.item, c.price)).collect();
    let mut groups: BTreeMap<u64, BTreeMap<u64, Vec<u64>>> = BTreeMap::new();
    for r in records {
        if let Some(&bad) = r.bundle.iter().find(|i| !price.contains_key(i)) {
            return Err(Error::UnknownItem(bad));
        }
        groups
            .entry(r.user)
            .or_default()
            .entry(r.seq)
            .or_default()
            .extend(&r.bundle);
    }
    Ok(groups
        .into_iter()
        .map(|(user, seqs)| UserBundles {
            user,
            bundles: seqs.into_values().map(|items| canonical(items, &price)).collect(),
        })
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrefixExamples {
    pub examples: Vec<RawExample>,
    /// Users with too few bundles.
    pub skipped: usize,
}

/// Expands each user's first `k` bundles into a context predicting bundle
/// `k + 1`. Train mode emits `k = 1..K−2`, test mode the single example
/// predicting the last bundle.
pub fn build_prefix_examples(users: &[UserBundles], mode: Mode, rule: &SplitRule) -> PrefixExamples {
    let mut out = PrefixExamples::default();
    for u in users {
        let k = u.bundles.len();
        if k < rule.min_bundles.max(2) {
            out.skipped += 1;
            continue;
        }
        let context_of = |n: usize| u.bundles[..n].concat();
        match mode {
            Mode::Train => {
                for n in 1..k - 1 {
                    out.examples.push(RawExample {
                        user: u.user,
                        context: context_of(n),
                        target: u.bundles[n].clone(),
                    });
                }
            }
            Mode::Test => {
                let last = &u.bundles[k - 1];
                if last.len() >= rule.min_test_size {
                    out.examples.push(RawExample {
                        user: u.user,
                        context: context_of(k - 1),
                        target: last.clone(),
                    });
                }
            }
        }
    }
    out
}

/// A ready-to-train corpus. Vocabulary covers the items of the training and
/// validation examples; test contexts map unseen items to UNK, and test
/// ground truth stays in raw ids.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub kind: CorpusKind,
    pub seed: u64,
    pub vocab: Vocabulary,
    pub catalog: Vec<CatalogEntry>,
    pub train: Vec<TrainingExample>,
    pub validation: Vec<TrainingExample>,
    pub test: Vec<TestCase>,
    pub skipped_users: usize,
    pub stats: CorpusStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: CorpusKind,
    pub seed: u64,
    pub vocab_hash: String,
    pub n_items: usize,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub skipped_users: usize,
    pub stats: CorpusStats,
}

/// Fraction of training examples held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.1;

fn holdout(mut examples: Vec<RawExample>, seed: u64) -> (Vec<RawExample>, Vec<RawExample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_valid = ((examples.len() as f64) * VALIDATION_FRACTION).round() as usize;
    let mut idx: Vec<usize> = (0..examples.len()).collect();
    idx.shuffle(&mut rng);
    let valid_set: BTreeSet<usize> = idx[..n_valid].iter().copied().collect();
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for (i, ex) in examples.drain(..).enumerate() {
        if valid_set.contains(&i) {
            valid.push(ex);
        } else {
            train.push(ex);
        }
    }
    (train, valid)
}

/// Pre-defined bundle corpora: the last fifth of each user's bundles (at
/// least one) is ground truth, the rest are expanded with the prefix rule.
fn predefined_examples(users: &[UserBundles], rule: &SplitRule) -> (Vec<RawExample>, Vec<TestCase>, usize) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut skipped = 0;
    for u in users {
        let k = u.bundles.len();
        if k < rule.min_bundles.max(2) {
            skipped += 1;
            continue;
        }
        let n_test = ((k as f64 * 0.2).round() as usize).clamp(1, k - 1);
        let head = UserBundles {
            user: u.user,
            bundles: u.bundles[..k - n_test].to_vec(),
        };
        let relaxed = SplitRule {
            min_bundles: 2,
            ..*rule
        };
        train.extend(build_prefix_examples(std::slice::from_ref(&head), Mode::Train, &relaxed).examples);
        let mut truth: Vec<Vec<u64>> = Vec::new();
        for b in &u.bundles[k - n_test..] {
            if b.len() >= rule.min_test_size && !truth.contains(b) {
                truth.push(b.clone());
            }
        }
        if !truth.is_empty() {
            test.push(TestCase {
                user: u.user,
                context: head.bundles.concat(),
                truth,
            });
        }
    }
    (train, test, skipped)
}

impl DatasetSplit {
    pub fn build(
        kind: CorpusKind,
        users: &[UserBundles],
        catalog: &[CatalogEntry],
        rule: &SplitRule,
        seed: u64,
    ) -> Result<Self> {
        let stats = compute_stats(users, catalog)?;
        let (train_raw, test, skipped_users) = match kind {
            CorpusKind::Events => {
                let train = build_prefix_examples(users, Mode::Train, rule);
                let test = build_prefix_examples(users, Mode::Test, rule);
                let test = test
                    .examples
                    .into_iter()
                    .map(|e| TestCase {
                        user: e.user,
                        context: e.context,
                        truth: vec![e.target],
                    })
                    .collect();
                (train.examples, test, train.skipped)
            }
            CorpusKind::Bundles => predefined_examples(users, rule),
        };
        if train_raw.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let (train_raw, valid_raw) = holdout(train_raw, seed);
        let used: BTreeSet<u64> = train_raw
            .iter()
            .chain(&valid_raw)
            .flat_map(|e| e.context.iter().chain(&e.target).copied())
            .collect();
        let catalog: Vec<CatalogEntry> = catalog.iter().filter(|c| used.contains(&c.item)).cloned().collect();
        let vocab = vocab_from_catalog(&catalog)?;
        let encode = |rows: &[RawExample]| rows.iter().map(|r| encode_example(&vocab, r)).collect::<Result<Vec<_>>>();
        Ok(Self {
            kind,
            seed,
            train: encode(&train_raw)?,
            validation: encode(&valid_raw)?,
            test,
            skipped_users,
            stats,
            catalog,
            vocab,
        })
    }

    /// Encoded test contexts with their raw ground truth.
    pub fn test_contexts(&self) -> Result<Vec<(UserContext, Vec<Vec<u64>>)>> {
        self.test
            .iter()
            .map(|t| Ok((self.vocab.encode_context(t.user, &t.context)?, t.truth.clone())))
            .collect()
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            kind: self.kind,
            seed: self.seed,
            vocab_hash: self.vocab.hash(),
            n_items: self.vocab.n_items(),
            n_train: self.train.len(),
            n_validation: self.validation.len(),
            n_test: self.test.len(),
            skipped_users: self.skipped_users,
            stats: self.stats.clone(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join("catalog.jsonl"), &self.catalog)?;
        write_jsonl(&dir.join("train.jsonl"), &decode_examples(&self.vocab, &self.train))?;
        write_jsonl(&dir.join("valid.jsonl"), &decode_examples(&self.vocab, &self.validation))?;
        write_jsonl(&dir.join("test.jsonl"), &self.test)?;
        let path = dir.join("manifest.json");
        let body = serde_json::to_string_pretty(&self.manifest())?;
        fs::write(&path, body).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let catalog: Vec<CatalogEntry> = read_jsonl(&dir.join("catalog.jsonl"))?;
        let vocab = vocab_from_catalog(&catalog)?;
        if vocab.hash() != manifest.vocab_hash {
            return Err(Error::VocabMismatch {
                expected: manifest.vocab_hash,
                found: vocab.hash(),
            });
        }
        let encode = |name: &str| -> Result<Vec<TrainingExample>> {
            let rows: Vec<RawExample> = read_jsonl(&dir.join(name))?;
            rows.iter().map(|r| encode_example(&vocab, r)).collect()
        };
        let train = encode("train.jsonl")?;
        let validation = encode("valid.jsonl")?;
        let test: Vec<TestCase> = read_jsonl(&dir.join("test.jsonl"))?;
        Ok(Self {
            kind: manifest.kind,
            seed: manifest.seed,
            catalog,
            train,
            validation,
            test,
            skipped_users: manifest.skipped_users,
            stats: manifest.stats,
            vocab,
        })
    }
}

pub fn vocab_from_catalog(catalog: &[CatalogEntry]) -> Result<Vocabulary> {
    Vocabulary::new(catalog.iter().map(|c| (c.item, c.cate, c.price)))
}

fn encode_example(vocab: &Vocabulary, r: &RawExample) -> Result<TrainingExample> {
    let context = r
        .context
        .iter()
        .map(|&i| vocab.lookup(i).ok_or(Error::UnknownItem(i)))
        .collect::<Result<Vec<_>>>()?;
    if context.is_empty() {
        return Err(Error::EmptyContext);
    }
    Ok(TrainingExample {
        context: UserContext {
            user_id: r.user,
            history: context,
        },
        target: vocab.encode_bundle(&r.target)?,
    })
}

fn decode_examples(vocab: &Vocabulary, rows: &[TrainingExample]) -> Vec<RawExample> {
    rows.iter()
        .map(|ex| RawExample {
            user: ex.context.user_id,
            context: ex
                .context
                .history
                .iter()
                .filter_map(|&t| vocab.raw_id(t))
                .collect(),
            target: vocab.decode_bundle(&ex.target),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(user: u64, order: u64, item: u64, price: f64) -> RawEvent {
        RawEvent {
            user,
            order,
            item,
            cate: Some(item % 2),
            price,
        }
    }

    fn users(bundles: &[&[&[u64]]]) -> Vec<UserBundles> {
        bundles
            .iter()
            .enumerate()
            .map(|(u, bs)| UserBundles {
                user: u as u64,
                bundles: bs.iter().map(|b| b.to_vec()).collect(),
            })
            .collect()
    }

    #[test]
    fn one_order_is_one_canonical_bundle() {
        let g = group_bundles(&[ev(1, 0, 7, 1.0), ev(1, 0, 3, 5.0)]);
        assert_eq!(g, vec![UserBundles { user: 1, bundles: vec![vec![3, 7]] }]);
    }

    #[test]
    fn orders_follow_order_key_and_users_stay_separate() {
        let g = group_bundles(&[
            ev(2, 9, 1, 1.0),
            ev(1, 5, 2, 1.0),
            ev(2, 3, 4, 1.0),
            ev(1, 5, 2, 1.0),
            ev(1, 1, 6, 2.0),
        ]);
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].bundles, vec![vec![6], vec![2]]);
        assert_eq!(g[1].bundles, vec![vec![4], vec![1]]);
    }

    #[test]
    fn prefix_protocol() {
        let u = users(&[&[&[1], &[2, 3], &[4, 5]]]);
        let rule = SplitRule::co_purchase();
        let train = build_prefix_examples(&u, Mode::Train, &rule);
        assert_eq!(
            train.examples,
            vec![RawExample {
                user: 0,
                context: vec![1],
                target: vec![2, 3]
            }]
        );
        let test = build_prefix_examples(&u, Mode::Test, &rule);
        assert_eq!(test.examples[0].context, vec![1, 2, 3]);
        assert_eq!(test.examples[0].target, vec![4, 5]);
    }

    #[test]
    fn single_item_test_target_is_dropped() {
        let u = users(&[&[&[1], &[2]]]);
        let rule = SplitRule {
            min_bundles: 2,
            min_test_size: 2,
        };
        assert!(build_prefix_examples(&u, Mode::Test, &rule).examples.is_empty());
    }

    #[test]
    fn short_histories_are_skipped() {
        let u = users(&[&[&[1]], &[&[1], &[2], &[3, 4]]]);
        let r = build_prefix_examples(&u, Mode::Train, &SplitRule::co_purchase());
        assert_eq!(r.skipped, 1);
        assert_eq!(r.examples.len(), 1);
    }

    fn catalog(n: u64) -> Vec<CatalogEntry> {
        (0..n)
            .map(|i| CatalogEntry {
                item: i,
                cate: Some(i % 3),
                price: 1.0 + i as f64,
            })
            .collect()
    }

    #[test]
    fn split_round_trips_through_disk() {
        let u: Vec<UserBundles> = (0..30)
            .map(|user| UserBundles {
                user,
                bundles: (0..5).map(|k| vec![(user + k) % 12, (user * 3 + k + 1) % 12]).map(|mut b| {
                    b.sort_by(|a, b| b.cmp(a));
                    b.dedup();
                    b
                }).collect(),
            })
            .collect();
        let split = DatasetSplit::build(CorpusKind::Events, &u, &catalog(12), &SplitRule::co_purchase(), 4).unwrap();
        assert_eq!(split.train.len() + split.validation.len(), 30 * 3);
        assert_eq!(split.validation.len(), 9);
        let dir = tempfile::tempdir().unwrap();
        split.save(dir.path()).unwrap();
        let back = DatasetSplit::load(dir.path()).unwrap();
        assert_eq!(back, split);
    }

    #[test]
    fn predefined_corpus_keeps_multiple_truths() {
        let u = users(&[&[&[1, 2], &[3], &[4, 5], &[1, 2], &[6, 7], &[8, 9], &[10, 11], &[3, 4], &[5, 6], &[7, 8]]]);
        let split = DatasetSplit::build(CorpusKind::Bundles, &u, &catalog(12), &SplitRule::predefined(), 0).unwrap();
        assert_eq!(split.test.len(), 1);
        assert_eq!(split.test[0].truth.len(), 2);
        assert_eq!(split.train.len() + split.validation.len(), 6);
    }
}
