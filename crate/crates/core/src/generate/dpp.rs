use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::bundle::{jaccard, Bundle, BundleList, ItemId};
use crate::error::{Error, Result};
use crate::numerics::CholeskyState;

use super::beam::CandidateSet;
use super::GenerationConfig;

/// Jaccard similarity of two non-empty bundles.
pub fn similarity(a: &Bundle, b: &Bundle) -> f64 {
    jaccard(&a.as_set(), &b.as_set()).expect("bundles are non-empty")
}

/// One greedy pick.
#[derive(Debug, Clone, PartialEq)]
pub struct DppStep {
    /// Index into the candidate set.
    pub chosen: usize,
    /// `log p + λ · log det S_y` of the pick.
    pub objective: f64,
    /// `log det S_y` after the pick.
    pub log_det: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub list: BundleList,
    pub steps: Vec<DppStep>,
    /// Candidate evaluations rejected because their pivot fell below the
    /// jitter.
    pub singular_skips: usize,
}

struct Scored {
    index: usize,
    objective: f64,
    log_prob: f64,
}

fn better(a: &Scored, b: &Scored, keys: &[Vec<ItemId>]) -> bool {
    let ord = a
        .objective
        .total_cmp(&b.objective)
        .then_with(|| a.log_prob.total_cmp(&b.log_prob))
        .then_with(|| keys[b.index].cmp(&keys[a.index]));
    ord == Ordering::Greater
}

/// Greedy selection of `K` candidates maximising
/// `log p(b) + λ · log det S_{y ∪ {b}}`, growing the Cholesky factor of the
/// selected similarity matrix one row at a time.
pub fn dpp_select(candidates: &CandidateSet, cfg: &GenerationConfig) -> Result<Selection> {
    let k = cfg.list_size;
    let cands = &candidates.candidates;
    let sets: Vec<BTreeSet<ItemId>> = cands.iter().map(|c| c.bundle.as_set()).collect();
    let keys: Vec<Vec<ItemId>> = cands.iter().map(|c| c.bundle.set_key()).collect();
    let mut remaining: Vec<usize> = (0..cands.len()).collect();
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut state = CholeskyState::new();
    let mut steps = Vec::with_capacity(k);
    let mut singular_skips = 0;

    while chosen.len() < k {
        let mut best: Option<(Scored, Option<CholeskyState>)> = None;
        for &i in &remaining {
            let (objective, next) = if cfg.lambda == 0.0 {
                (cands[i].log_prob, None)
            } else {
                let row: Vec<f64> = chosen
                    .iter()
                    .map(|&j| jaccard(&sets[i], &sets[j]).expect("non-empty"))
                    .collect();
                let pivot = state.schur_complement(&row, 1.0);
                if !(pivot > cfg.jitter) {
                    singular_skips += 1;
                    continue;
                }
                let next = state.extend(&row, 1.0, cfg.jitter)?;
                (cands[i].log_prob + cfg.lambda * next.log_det(), Some(next))
            };
            let s = Scored {
                index: i,
                objective,
                log_prob: cands[i].log_prob,
            };
            if best.as_ref().is_none_or(|(b, _)| better(&s, b, &keys)) {
                best = Some((s, next));
            }
        }
        let Some((pick, next)) = best else {
            break;
        };
        if let Some(next) = next {
            state = next;
        } else {
            let row: Vec<f64> = chosen
                .iter()
                .map(|&j| jaccard(&sets[pick.index], &sets[j]).expect("non-empty"))
                .collect();
            // λ = 0: the factor is only bookkeeping; a singular pivot is fine
            state = state
                .extend(&row, 1.0, cfg.jitter.max(f64::MIN_POSITIVE))
                .unwrap_or(state);
        }
        remaining.retain(|&i| i != pick.index);
        chosen.push(pick.index);
        steps.push(DppStep {
            chosen: pick.index,
            objective: pick.objective,
            log_det: state.log_det(),
        });
    }

    let list = BundleList {
        bundles: chosen.iter().map(|&i| cands[i].bundle.clone()).collect(),
        scores: Some(chosen.iter().map(|&i| cands[i].log_prob).collect()),
    };
    if chosen.len() < k {
        return Err(Error::ShortList { selected: list, wanted: k });
    }
    Ok(Selection {
        list,
        steps,
        singular_skips,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::Candidate;

    fn b(items: &[ItemId]) -> Bundle {
        Bundle::from_sequence(items.to_vec()).unwrap()
    }

    fn set(c: &[(&[ItemId], f64)]) -> CandidateSet {
        CandidateSet {
            candidates: c
                .iter()
                .map(|(i, lp)| Candidate {
                    bundle: b(i),
                    log_prob: *lp,
                })
                .collect(),
        }
    }

    fn cfg(k: usize, lambda: f64) -> GenerationConfig {
        GenerationConfig {
            beam_width: 50,
            list_size: k,
            lambda,
            ..Default::default()
        }
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(similarity(&b(&[3, 1]), &b(&[1, 3])), 1.0);
        assert!((similarity(&b(&[1, 2]), &b(&[2, 3])) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(similarity(&b(&[1]), &b(&[2])), 0.0);
    }

    #[test]
    fn zero_lambda_is_top_k() {
        let c = set(&[(&[1, 2], -1.0), (&[2, 1, 3], -1.5), (&[4], -2.0), (&[1, 2, 4], -3.0)]);
        let s = dpp_select(&c, &cfg(3, 0.0)).unwrap();
        assert_eq!(s.steps.iter().map(|s| s.chosen).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn repeated_set_is_never_chosen_twice() {
        let c = set(&[(&[1, 2], -1.0), (&[2, 1], -1.1), (&[3, 4], -9.0)]);
        let s = dpp_select(&c, &cfg(2, 0.5)).unwrap();
        assert_eq!(s.list.bundles[1].set_key(), vec![3, 4]);
        assert!(s.singular_skips >= 1);
        let short = dpp_select(&set(&[(&[1, 2], -1.0), (&[2, 1], -1.1)]), &cfg(2, 1.0));
        match short {
            Err(Error::ShortList { selected, wanted }) => {
                assert_eq!(wanted, 2);
                assert_eq!(selected.len(), 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_pick_is_best_log_prob() {
        let c = set(&[(&[5], -0.5), (&[1, 2], -0.1), (&[3], -0.2)]);
        for lambda in [0.0, 1.0, 100.0] {
            let s = dpp_select(&c, &cfg(1, lambda)).unwrap();
            assert_eq!(s.list.bundles[0].set_key(), vec![1, 2]);
        }
    }

    #[test]
    fn diversity_outweighs_quality_at_large_lambda() {
        let c = set(&[(&[1, 2], -1.0), (&[1, 2, 3], -1.1), (&[7, 8], -4.0)]);
        let low = dpp_select(&c, &cfg(2, 0.1)).unwrap();
        assert_eq!(low.list.bundles[1].set_key(), vec![1, 2, 3]);
        let high = dpp_select(&c, &cfg(2, 10.0)).unwrap();
        assert_eq!(high.list.bundles[1].set_key(), vec![7, 8]);
    }

    #[test]
    fn ties_prefer_lexicographically_smaller_sets() {
        let c = set(&[(&[4, 5], -1.0), (&[1, 9], -1.0)]);
        let s = dpp_select(&c, &cfg(1, 0.0)).unwrap();
        assert_eq!(s.list.bundles[0].set_key(), vec![1, 9]);
    }
}
