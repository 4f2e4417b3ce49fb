//! Planted-pattern corpus generator.
//!
//! Items are spread over categories. Each pattern is a small set of items
//! from one category, and each category doubles as a user segment: a user
//! mostly buys the patterns of their own segment, sometimes a globally
//! popular pattern. With probability `noise` an order is perturbed: either
//! the pattern loses an item and/or gains one from its category, or the
//! order is replaced by an unrelated basket drawn by item popularity.

use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::events::RawEvent;

/// Probability that a pattern order comes from the user's own segment.
const SEGMENT_AFFINITY: f64 = 0.85;
/// Share of noisy orders that ignore the patterns altogether.
const RANDOM_BASKET: f64 = 0.3;
const MIN_ORDERS: usize = 3;
const MAX_ORDERS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPattern {
    pub items: Vec<u64>,
    pub segment: usize,
    /// Expected share of all orders that are exactly this pattern.
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub events: Vec<RawEvent>,
    /// Planted patterns, most frequent first.
    pub patterns: Vec<PlantedPattern>,
    /// Segment of every user, indexed by user id.
    pub user_segment: Vec<usize>,
    pub n_categories: usize,
}

fn zipf(n: usize, s: f64) -> Vec<f64> {
    (0..n).map(|r| 1.0 / (r as f64 + 1.0).powf(s)).collect()
}

fn normalised(w: &[f64]) -> Vec<f64> {
    let t: f64 = w.iter().sum();
    w.iter().map(|v| v / t).collect()
}

pub fn make_synthetic_corpus(
    seed: u64,
    n_users: usize,
    n_items: usize,
    n_patterns: usize,
    noise: f64,
) -> Result<SyntheticCorpus> {
    if n_users == 0 || n_items < 2 || n_patterns == 0 {
        return Err(Error::InvalidConfig(
            "synthetic corpus needs users, at least two items and one pattern".into(),
        ));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::InvalidConfig("noise must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_cat = (n_items / 50).max(2).min(n_items / 2);
    let n_seg = n_patterns.min(n_cat);

    let category: Vec<usize> = (0..n_items).map(|i| i % n_cat).collect();
    let price: Vec<f64> = (0..n_items)
        .map(|i| {
            let base = (10.0 + 15.0 * category[i] as f64).ln();
            let z: f64 = rng.sample(StandardNormal);
            ((base + 0.5 * z).exp() * 100.0).round() / 100.0
        })
        .collect();
    let mut by_cat: Vec<Vec<u64>> = vec![Vec::new(); n_cat];
    for i in 0..n_items {
        by_cat[category[i]].push(i as u64);
    }

    // patterns: segment s draws from category s
    let mut seen = BTreeSet::new();
    let mut pattern_items = Vec::with_capacity(n_patterns);
    let mut pattern_seg = Vec::with_capacity(n_patterns);
    for p in 0..n_patterns {
        let seg = p % n_seg;
        let pool = &by_cat[seg];
        let mut attempts = 0;
        loop {
            let size = rng.random_range(2..=4).min(pool.len());
            let mut items: Vec<u64> = pool.choose_multiple(&mut rng, size).copied().collect();
            items.sort_unstable();
            attempts += 1;
            // patterns may share one item but never a pair
            let overlaps = pattern_items
                .iter()
                .any(|p: &Vec<u64>| p.iter().filter(|i| items.contains(i)).count() >= 2);
            if !overlaps && seen.insert(items.clone()) {
                pattern_items.push(items);
                pattern_seg.push(seg);
                break;
            }
            if attempts > 1000 {
                return Err(Error::InvalidConfig(format!(
                    "cannot place {n_patterns} distinct patterns in {n_items} items"
                )));
            }
        }
    }

    // within-segment and global pattern weights
    let seg_weight = normalised(&zipf(n_seg, 0.5));
    let mut within = vec![0.0; n_patterns];
    for s in 0..n_seg {
        let members: Vec<usize> = (0..n_patterns).filter(|&p| pattern_seg[p] == s).collect();
        let w = normalised(&zipf(members.len(), 1.0));
        for (&p, w) in members.iter().zip(w) {
            within[p] = w;
        }
    }
    let global = normalised(&zipf(n_patterns, 1.0));
    let frequency: Vec<f64> = (0..n_patterns)
        .map(|p| {
            (1.0 - noise)
                * (SEGMENT_AFFINITY * seg_weight[pattern_seg[p]] * within[p]
                    + (1.0 - SEGMENT_AFFINITY) * global[p])
        })
        .collect();

    let mut popularity: Vec<usize> = (0..n_items).collect();
    popularity.shuffle(&mut rng);
    let mut item_weight = vec![0.0; n_items];
    for (rank, &i) in popularity.iter().enumerate() {
        item_weight[i] = 1.0 / (rank as f64 + 1.0).powf(0.8);
    }
    let item_dist = WeightedIndex::new(&item_weight).expect("positive weights");
    let seg_dist = WeightedIndex::new(&seg_weight).expect("positive weights");
    let global_dist = WeightedIndex::new(&global).expect("positive weights");
    let seg_dists: Vec<(Vec<usize>, WeightedIndex<f64>)> = (0..n_seg)
        .map(|s| {
            let members: Vec<usize> = (0..n_patterns).filter(|&p| pattern_seg[p] == s).collect();
            let w: Vec<f64> = members.iter().map(|&p| within[p]).collect();
            (members, WeightedIndex::new(&w).expect("positive weights"))
        })
        .collect();

    let mut events = Vec::new();
    let mut user_segment = Vec::with_capacity(n_users);
    for user in 0..n_users {
        let seg = seg_dist.sample(&mut rng);
        user_segment.push(seg);
        let n_orders = rng.random_range(MIN_ORDERS..=MAX_ORDERS);
        for order in 0..n_orders {
            let own = rng.random::<f64>() < SEGMENT_AFFINITY;
            let pattern = if own {
                let (members, dist) = &seg_dists[seg];
                members[dist.sample(&mut rng)]
            } else {
                global_dist.sample(&mut rng)
            };
            let mut items: BTreeSet<u64> = pattern_items[pattern].iter().copied().collect();
            if rng.random::<f64>() < noise {
                if rng.random::<f64>() < RANDOM_BASKET {
                    // unrelated basket drawn by popularity
                    let size = rng.random_range(1..=3);
                    items.clear();
                    while items.len() < size {
                        items.insert(item_dist.sample(&mut rng) as u64);
                    }
                } else {
                    // the pattern with one item dropped and/or a
                    // same-category item added
                    let drop = items.len() > 2 && rng.random::<bool>();
                    if drop {
                        let victim = *items.iter().nth(rng.random_range(0..items.len())).unwrap();
                        items.remove(&victim);
                    }
                    if !drop || rng.random::<bool>() {
                        let pool = &by_cat[pattern_seg[pattern]];
                        items.insert(*pool.choose(&mut rng).unwrap());
                    }
                }
            }
            for item in items {
                let i = item as usize;
                events.push(RawEvent {
                    user: user as u64,
                    order: order as u64,
                    item,
                    cate: Some(category[i] as u64),
                    price: price[i],
                });
            }
        }
    }

    let mut patterns: Vec<PlantedPattern> = (0..n_patterns)
        .map(|p| PlantedPattern {
            items: pattern_items[p].clone(),
            segment: pattern_seg[p],
            frequency: frequency[p],
        })
        .collect();
    patterns.sort_by(|a, b| b.frequency.total_cmp(&a.frequency).then_with(|| a.items.cmp(&b.items)));
    Ok(SyntheticCorpus {
        events,
        patterns,
        user_segment,
        n_categories: n_cat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{group_bundles, write_events};

    #[test]
    fn same_seed_same_bytes() {
        let a = make_synthetic_corpus(7, 40, 100, 6, 0.2).unwrap();
        let b = make_synthetic_corpus(7, 40, 100, 6, 0.2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_events(&dir.path().join("a"), &a.events).unwrap();
        write_events(&dir.path().join("b"), &b.events).unwrap();
        let ba = std::fs::read(dir.path().join("a")).unwrap();
        assert_eq!(ba, std::fs::read(dir.path().join("b")).unwrap());
        let c = make_synthetic_corpus(8, 40, 100, 6, 0.2).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn no_noise_means_only_patterns() {
        let c = make_synthetic_corpus(1, 50, 80, 5, 0.0).unwrap();
        let planted: BTreeSet<Vec<u64>> = c.patterns.iter().map(|p| p.items.clone()).collect();
        for u in group_bundles(&c.events) {
            assert!(u.bundles.len() >= MIN_ORDERS);
            for b in u.bundles {
                let mut s = b.clone();
                s.sort_unstable();
                assert!(planted.contains(&s), "{s:?}");
            }
        }
    }

    #[test]
    fn patterns_stay_inside_one_category() {
        let c = make_synthetic_corpus(3, 10, 200, 12, 0.1).unwrap();
        assert_eq!(c.patterns.len(), 12);
        let cate: std::collections::HashMap<u64, u64> =
            c.events.iter().map(|e| (e.item, e.cate.unwrap())).collect();
        for p in &c.patterns {
            assert!(p.items.len() >= 2);
            for w in p.items.windows(2) {
                if let (Some(a), Some(b)) = (cate.get(&w[0]), cate.get(&w[1])) {
                    assert_eq!(a, b);
                }
            }
        }
        assert!(c.patterns.windows(2).all(|w| w[0].frequency >= w[1].frequency));
    }
}
