//! Brute-force reference for tiny vocabularies.

use crate::bundle::{ItemId, UserContext};
use crate::error::{Error, Result};
use crate::generate::{sequence_log_prob, CandidateSet};
use crate::model::FrozenModel;

pub const ORACLE_MAX_ITEMS: usize = 8;
pub const ORACLE_MAX_SIZE: usize = 3;

/// How the oracle scores a bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleScore {
    /// Teacher-forced, unmasked `log p(b | C_u)` of the canonical order.
    Canonical,
    /// Best masked decoding score over all orderings of the set, with END
    /// shift `C`: what beam search can reach.
    Decoding { shift: u32 },
}

fn subsets(n: usize, max: usize) -> Vec<Vec<ItemId>> {
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        let s: Vec<ItemId> = (0..n as ItemId).filter(|&i| mask & (1 << i) != 0).collect();
        if s.len() <= max {
            out.push(s);
        }
    }
    out
}

fn permutations(items: &[ItemId]) -> Vec<Vec<ItemId>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Every duplicate-free bundle of at most `max_size` items, scored and
/// ranked; the best `k` are returned.
pub fn exhaustive_topk_oracle(
    model: &FrozenModel,
    ctx: &UserContext,
    max_size: usize,
    k: usize,
    score: OracleScore,
) -> Result<CandidateSet> {
    let n = model.n_items();
    if n > ORACLE_MAX_ITEMS || max_size > ORACLE_MAX_SIZE {
        return Err(Error::OracleTooLarge(format!(
            "N = {n}, T = {max_size}; limits are N <= {ORACLE_MAX_ITEMS}, T <= {ORACLE_MAX_SIZE}"
        )));
    }
    let mut scored = Vec::new();
    for set in subsets(n, max_size) {
        match score {
            OracleScore::Canonical => {
                let b = model.canonical(&set).expect("ids are items");
                let lp = model.bundle_log_prob(&b, ctx)?;
                scored.push((b.items().to_vec(), lp));
            }
            OracleScore::Decoding { shift } => {
                for seq in permutations(&set) {
                    let lp = sequence_log_prob(model, ctx, &seq, shift)?;
                    scored.push((seq, lp));
                }
            }
        }
    }
    let mut out = CandidateSet::from_scored(scored);
    out.candidates.truncate(k);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, QualityModel};
    use crate::Vocabulary;

    fn model(n: usize) -> FrozenModel {
        let vocab = Vocabulary::new((0..n as u64).map(|i| (i, None, 1.0 + (i % 2) as f64))).unwrap();
        QualityModel::new(ModelConfig::tiny(), &vocab).unwrap().freeze()
    }

    fn ctx() -> UserContext {
        UserContext {
            user_id: 0,
            history: vec![0],
        }
    }

    #[test]
    fn three_items_two_slots_gives_six_bundles() {
        let m = model(3);
        let all = exhaustive_topk_oracle(&m, &ctx(), 2, 100, OracleScore::Canonical).unwrap();
        assert_eq!(all.len(), 6);
        assert!(all.candidates.windows(2).all(|w| w[0].log_prob >= w[1].log_prob));
        let top = exhaustive_topk_oracle(&m, &ctx(), 2, 2, OracleScore::Canonical).unwrap();
        assert_eq!(top.candidates[..], all.candidates[..2]);
        // canonical order: price descending, then id
        for c in &all.candidates {
            for w in c.bundle.items().windows(2) {
                let (a, b) = (w[0] % 2, w[1] % 2);
                assert!(a > b || (a == b && w[0] < w[1]), "{:?}", c.bundle);
            }
        }
    }

    #[test]
    fn refuses_large_inputs() {
        let m = model(9);
        assert!(matches!(
            exhaustive_topk_oracle(&m, &ctx(), 2, 1, OracleScore::Canonical),
            Err(Error::OracleTooLarge(_))
        ));
        let m = model(4);
        assert!(exhaustive_topk_oracle(&m, &ctx(), 4, 1, OracleScore::Canonical).is_err());
    }

    #[test]
    fn permutations_are_complete() {
        let p = permutations(&[1, 2, 3]);
        assert_eq!(p.len(), 6);
        let distinct: std::collections::HashSet<_> = p.into_iter().collect();
        assert_eq!(distinct.len(), 6);
    }
}
