use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::jaccard;
use crate::error::{Error, Result};

/// Ground-truth bundles per user, raw item ids.
pub type GroundTruth = BTreeMap<u64, Vec<Vec<u64>>>;
/// Recommended list per user, raw item ids, in list order.
pub type Recommendations = BTreeMap<u64, Vec<Vec<u64>>>;

fn set(b: &[u64]) -> BTreeSet<u64> {
    b.iter().copied().collect()
}

fn overlap(a: &BTreeSet<u64>, b: &BTreeSet<u64>) -> f64 {
    jaccard(a, b).expect("bundles are non-empty")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionAtK {
    pub k: usize,
    pub value: f64,
    pub users: usize,
    /// Recommended users absent from the ground truth.
    pub missing_users: usize,
    /// Lists shorter than `k`; their empty positions score zero.
    pub short_lists: usize,
}

/// Mean over users and over the first `k` positions of
/// `|b ∩ gt| / |b ∪ gt|`. With several ground-truth bundles a position
/// scores against its best match.
pub fn precision_at_k(recs: &Recommendations, gt: &GroundTruth, k: usize) -> Result<PrecisionAtK> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let mut total = 0.0;
    let mut users = 0;
    let mut missing_users = 0;
    let mut short_lists = 0;
    for (user, list) in recs {
        let Some(truth) = gt.get(user).filter(|t| !t.is_empty()) else {
            missing_users += 1;
            continue;
        };
        let truth: Vec<BTreeSet<u64>> = truth.iter().map(|b| set(b)).collect();
        if list.len() < k {
            short_lists += 1;
        }
        let sum: f64 = list
            .iter()
            .take(k)
            .map(|b| {
                let b = set(b);
                truth.iter().map(|g| overlap(&b, g)).fold(0.0, f64::max)
            })
            .sum();
        total += sum / k as f64;
        users += 1;
    }
    if users == 0 {
        return Err(Error::NoUsers);
    }
    Ok(PrecisionAtK {
        k,
        value: total / users as f64,
        users,
        missing_users,
        short_lists,
    })
}

/// Mean pairwise `1 − Jaccard` within one list.
pub fn list_diversity(list: &[Vec<u64>]) -> Result<f64> {
    if list.len() < 2 {
        return Err(Error::DegenerateList(list.len()));
    }
    let sets: Vec<BTreeSet<u64>> = list.iter().map(|b| set(b)).collect();
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..sets.len() {
        for j in 0..sets.len() {
            if i != j {
                total += 1.0 - overlap(&sets[i], &sets[j]);
                pairs += 1;
            }
        }
    }
    Ok(total / pairs as f64)
}

/// [`list_diversity`] averaged over users.
pub fn diversity(recs: &Recommendations) -> Result<f64> {
    if recs.is_empty() {
        return Err(Error::NoUsers);
    }
    let mut total = 0.0;
    for list in recs.values() {
        total += list_diversity(list)?;
    }
    Ok(total / recs.len() as f64)
}

/// Pairwise ranking accuracy. For each case and each of its positives one
/// negative is drawn uniformly from `pool` (skipping bundles equal to the
/// positive as a set) and both are scored; wins count 1, ties 0.5.
pub fn auc<C, F>(
    cases: &[C],
    positives: impl Fn(&C) -> &[Vec<u64>],
    pool: &[Vec<u64>],
    seed: u64,
    mut score: F,
) -> Result<f64>
where
    F: FnMut(&C, &[u64]) -> Result<f64>,
{
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool_sets: Vec<BTreeSet<u64>> = pool.iter().map(|b| set(b)).collect();
    let mut wins = 0.0;
    let mut draws = 0usize;
    for case in cases {
        for pos in positives(case) {
            let pos_set = set(pos);
            let options: Vec<usize> = (0..pool.len()).filter(|&i| pool_sets[i] != pos_set).collect();
            let Some(&neg) = options.choose(&mut rng) else {
                continue;
            };
            let sp = score(case, pos)?;
            let sn = score(case, &pool[neg])?;
            wins += if sp > sn {
                1.0
            } else if sp == sn {
                0.5
            } else {
                0.0
            };
            draws += 1;
        }
    }
    if draws == 0 {
        return Err(Error::NoUsers);
    }
    Ok(wins / draws as f64)
}
