//! Non-personalised baseline: the most frequent closed itemsets.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

/// Default minimum support: 2 occurrences or 0.1 % of orders.
pub fn default_min_support(n_orders: usize) -> usize {
    2usize.max((n_orders as f64 * 0.001).ceil() as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Itemset {
    pub items: Vec<u64>,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqResult {
    /// Best first.
    pub itemsets: Vec<Itemset>,
    pub min_support: usize,
    /// Set when the threshold had to be lowered to find `k` itemsets.
    pub warning: Option<String>,
}

impl FreqResult {
    pub fn bundles(&self) -> Vec<Vec<u64>> {
        self.itemsets.iter().map(|s| s.items.clone()).collect()
    }
}

/// Level-wise frequent itemset mining up to `max_size` items.
pub fn apriori(orders: &[Vec<u64>], min_support: usize, max_size: usize) -> HashMap<Vec<u64>, usize> {
    let orders: Vec<BTreeSet<u64>> = orders.iter().map(|o| o.iter().copied().collect()).collect();
    let mut all = HashMap::new();
    let mut counts: HashMap<Vec<u64>, usize> = HashMap::new();
    for o in &orders {
        for &i in o {
            *counts.entry(vec![i]).or_default() += 1;
        }
    }
    let mut level: HashMap<Vec<u64>, usize> = counts.into_iter().filter(|(_, c)| *c >= min_support).collect();
    let mut size = 1;
    while !level.is_empty() {
        all.extend(level.iter().map(|(k, v)| (k.clone(), *v)));
        if size == max_size {
            break;
        }
        size += 1;
        let prev: HashSet<&Vec<u64>> = level.keys().collect();
        let frequent_items: BTreeSet<u64> = level.keys().flatten().copied().collect();
        let mut next: HashMap<Vec<u64>, usize> = HashMap::new();
        for o in &orders {
            let items: Vec<u64> = o.iter().copied().filter(|i| frequent_items.contains(i)).collect();
            if items.len() < size {
                continue;
            }
            for_each_combination(&items, size, &mut |combo| {
                // every (size-1)-subset must be frequent
                let ok = (0..combo.len()).all(|skip| {
                    let sub: Vec<u64> = combo
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != skip)
                        .map(|(_, &v)| v)
                        .collect();
                    prev.contains(&sub)
                });
                if ok {
                    *next.entry(combo.to_vec()).or_default() += 1;
                }
            });
        }
        level = next.into_iter().filter(|(_, c)| *c >= min_support).collect();
    }
    all
}

fn for_each_combination(items: &[u64], k: usize, f: &mut dyn FnMut(&[u64])) {
    fn rec(items: &[u64], k: usize, start: usize, cur: &mut Vec<u64>, f: &mut dyn FnMut(&[u64])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, k, i + 1, cur, f);
            cur.pop();
        }
    }
    rec(items, k, 0, &mut Vec::with_capacity(k), f);
}

/// Closed itemsets of size ≥ 2 (no mined superset has equal support),
/// ranked by support, then size, then items.
fn ranked_closed(mined: &HashMap<Vec<u64>, usize>) -> Vec<Itemset> {
    // support is anti-monotone, so a set is closed iff no one-larger
    // superset shares its support
    let mut open: HashSet<Vec<u64>> = HashSet::new();
    for (items, &support) in mined {
        for skip in 0..items.len() {
            let sub: Vec<u64> = items
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != skip)
                .map(|(_, &v)| v)
                .collect();
            if mined.get(&sub) == Some(&support) {
                open.insert(sub);
            }
        }
    }
    let mut out: Vec<Itemset> = mined
        .iter()
        .filter(|(items, _)| items.len() >= 2 && !open.contains(*items))
        .map(|(items, &support)| Itemset {
            items: items.clone(),
            support,
        })
        .collect();
    out.sort_by(|a, b| {
        b.support
            .cmp(&a.support)
            .then(b.items.len().cmp(&a.items.len()))
            .then_with(|| a.items.cmp(&b.items))
    });
    out
}

/// The `k` most frequent closed itemsets of at least two items. If fewer
/// than `k` exist at the default threshold it is halved until enough are
/// found or it reaches 1.
pub fn freq_baseline(orders: &[Vec<u64>], k: usize, max_size: usize) -> FreqResult {
    let start = default_min_support(orders.len());
    let mut min_support = start;
    loop {
        let mined = apriori(orders, min_support, max_size.max(2));
        let mut itemsets = ranked_closed(&mined);
        if itemsets.len() >= k || min_support == 1 {
            let warning = (min_support != start || itemsets.len() < k).then(|| {
                format!(
                    "support threshold lowered from {start} to {min_support}; {} itemsets found for k = {k}",
                    itemsets.len()
                )
            });
            itemsets.truncate(k);
            return FreqResult {
                itemsets,
                min_support,
                warning,
            };
        }
        min_support = (min_support / 2).max(1);
    }
}
