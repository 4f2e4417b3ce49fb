use std::cmp::Ordering;
use std::collections::HashMap;

use crate::bundle::{Bundle, ItemId, UserContext};
use crate::error::Result;
use crate::model::{DecoderState, FrozenModel, Shared};
use crate::numerics::masked_log_softmax;

use super::GenerationConfig;

/// Mask subtracted from the logits at step `t` (1-based): `+∞` on items
/// already in `prefix`, `max(C − t, 0)` on END (the last entry), zero
/// elsewhere.
pub fn mask_vector(t: usize, prefix: &[ItemId], n_items: usize, shift: u32) -> Vec<f64> {
    assert!(t >= 1, "steps are 1-based");
    let mut m = vec![0.0; n_items + 1];
    for &i in prefix {
        m[i as usize] = f64::INFINITY;
    }
    m[n_items] = (shift as f64 - t as f64).max(0.0);
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamEntry {
    /// Items in decoding order, END excluded.
    pub prefix: Vec<ItemId>,
    pub log_prob: f64,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub bundle: Bundle,
    pub log_prob: f64,
}

/// Set-distinct bundles, best first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    /// Keeps the best-scoring sequence per item set and sorts by score
    /// (ties: lexicographically smaller set first).
    pub fn from_scored(scored: impl IntoIterator<Item = (Vec<ItemId>, f64)>) -> Self {
        let mut best: HashMap<Vec<ItemId>, (Vec<ItemId>, f64)> = HashMap::new();
        for (seq, lp) in scored {
            let mut key = seq.clone();
            key.sort_unstable();
            match best.get(&key) {
                Some((s, v)) if (*v, std::cmp::Reverse(s)) >= (lp, std::cmp::Reverse(&seq)) => {}
                _ => {
                    best.insert(key, (seq, lp));
                }
            }
        }
        let mut candidates: Vec<(Vec<ItemId>, Vec<ItemId>, f64)> =
            best.into_iter().map(|(k, (s, v))| (k, s, v)).collect();
        candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
        Self {
            candidates: candidates
                .into_iter()
                .map(|(_, seq, log_prob)| Candidate {
                    bundle: Bundle::from_sequence(seq).expect("beam prefixes are duplicate-free"),
                    log_prob,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

struct Live {
    entry: BeamEntry,
    /// Decoder state before consuming `last`.
    state: Option<(DecoderState<Shared>, ItemId)>,
}

fn rank(a: &BeamEntry, b: &BeamEntry) -> Ordering {
    b.log_prob
        .total_cmp(&a.log_prob)
        .then_with(|| a.prefix.cmp(&b.prefix))
}

/// Masked log-probabilities of the next token after `prefix`. END is also
/// masked while the prefix is empty, since an empty bundle is not a bundle.
fn next_log_probs(model: &FrozenModel, ht: &[f64], t: usize, prefix: &[ItemId], shift: u32) -> Result<Vec<f64>> {
    let n = model.n_items();
    let mut mask = mask_vector(t, prefix, n, shift);
    if prefix.is_empty() {
        mask[n] = f64::INFINITY;
    }
    masked_log_softmax(&model.logits(ht), &mask)
}

/// Masked beam search. See [`beam_search_traced`].
pub fn beam_search(model: &FrozenModel, ctx: &UserContext, cfg: &GenerationConfig) -> Result<CandidateSet> {
    beam_search_traced(model, ctx, cfg, &mut |_, _| Ok(()))
}

/// Beam search over item sequences. Each step expands every open entry by
/// every unmasked token; finished entries are carried forward and compete
/// for the same `M` slots. After step `T` the remaining open entries are
/// closed with the log-probability of END. `on_step` sees the kept entries
/// of each step as a candidate set.
pub fn beam_search_traced(
    model: &FrozenModel,
    ctx: &UserContext,
    cfg: &GenerationConfig,
    on_step: &mut dyn FnMut(usize, &CandidateSet) -> Result<()>,
) -> Result<CandidateSet> {
    cfg.validate()?;
    let m = cfg.beam_width;
    let end = model.end();
    let enc = model.encode(ctx)?;
    let mut beams = vec![Live {
        entry: BeamEntry {
            prefix: Vec::new(),
            log_prob: 0.0,
            finished: false,
        },
        state: Some((model.initial_state(&enc), model.bos())),
    }];

    for t in 1..=cfg.max_bundle_size {
        let mut pool: Vec<Live> = Vec::new();
        for live in beams {
            let Some((state, last)) = live.state else {
                pool.push(live);
                continue;
            };
            let (next, ht) = model.decoder_step(&state, last, &enc)?;
            let lp = next_log_probs(model, &ht, t, &live.entry.prefix, cfg.shift)?;
            // this beam's own top-M: END first on ties, then by id
            let key = |j: usize| if j == end as usize { 0 } else { j + 1 };
            let mut idx: Vec<usize> = (0..lp.len()).filter(|&j| lp[j].is_finite()).collect();
            let by_score = |a: &usize, b: &usize| lp[*b].total_cmp(&lp[*a]).then_with(|| key(*a).cmp(&key(*b)));
            if idx.len() > m {
                idx.select_nth_unstable_by(m - 1, by_score);
                idx.truncate(m);
            }
            for j in idx {
                let log_prob = live.entry.log_prob + lp[j];
                if j == end as usize {
                    pool.push(Live {
                        entry: BeamEntry {
                            prefix: live.entry.prefix.clone(),
                            log_prob,
                            finished: true,
                        },
                        state: None,
                    });
                } else {
                    let mut prefix = live.entry.prefix.clone();
                    prefix.push(j as ItemId);
                    pool.push(Live {
                        entry: BeamEntry {
                            prefix,
                            log_prob,
                            finished: false,
                        },
                        state: Some((next.clone(), j as ItemId)),
                    });
                }
            }
        }
        // a set finished twice only needs its best ordering
        pool.sort_by(|a, b| rank(&a.entry, &b.entry));
        let mut finished_sets = std::collections::HashSet::new();
        pool.retain(|l| {
            if !l.entry.finished {
                return true;
            }
            let mut key = l.entry.prefix.clone();
            key.sort_unstable();
            finished_sets.insert(key)
        });
        pool.truncate(m);
        beams = pool;
        let step = CandidateSet::from_scored(beams.iter().map(|l| (l.entry.prefix.clone(), l.entry.log_prob)));
        on_step(t, &step)?;
        if beams.iter().all(|l| l.entry.finished) {
            break;
        }
    }

    let t_close = cfg.max_bundle_size + 1;
    let mut closed = Vec::with_capacity(beams.len());
    for live in beams {
        let mut entry = live.entry;
        if let Some((state, last)) = live.state {
            let (_, ht) = model.decoder_step(&state, last, &enc)?;
            let lp = next_log_probs(model, &ht, t_close, &entry.prefix, cfg.shift)?;
            entry.log_prob += lp[end as usize];
            entry.finished = true;
        }
        closed.push((entry.prefix, entry.log_prob));
    }
    Ok(CandidateSet::from_scored(closed))
}

/// Score of one item sequence under the decoding process: the masked
/// log-probability of each item in turn, then of END at the following step.
/// This is the quantity beam search accumulates.
pub fn sequence_log_prob(model: &FrozenModel, ctx: &UserContext, seq: &[ItemId], shift: u32) -> Result<f64> {
    let enc = model.encode(ctx)?;
    let mut state = model.initial_state(&enc);
    let mut prev = model.bos();
    let mut total = 0.0;
    for t in 1..=seq.len() + 1 {
        let (next, ht) = model.decoder_step(&state, prev, &enc)?;
        let lp = next_log_probs(model, &ht, t, &seq[..t - 1], shift)?;
        let target = if t <= seq.len() { seq[t - 1] } else { model.end() };
        total += lp[target as usize];
        state = next;
        prev = target;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, QualityModel};
    use crate::Vocabulary;

    fn model(n: usize, seed: u64) -> FrozenModel {
        let vocab = Vocabulary::new((0..n as u64).map(|i| (i, Some(i % 2), 1.0 + i as f64))).unwrap();
        let cfg = ModelConfig {
            seed,
            init_std: 1.0,
            ..ModelConfig::tiny()
        };
        QualityModel::new(cfg, &vocab).unwrap().freeze()
    }

    fn ctx() -> UserContext {
        UserContext {
            user_id: 0,
            history: vec![0, 1],
        }
    }

    #[test]
    fn mask_examples() {
        assert_eq!(mask_vector(4, &[], 3, 0)[3], 0.0);
        assert_eq!(mask_vector(3, &[], 3, 14)[3], 11.0);
        let m = mask_vector(2, &[1], 3, 0);
        assert_eq!(m[1], f64::INFINITY);
        assert_eq!(m[0], 0.0);
    }

    #[test]
    fn end_probability_grows_until_shift() {
        let logits = [0.3, -0.2, 0.1, 0.5];
        let mut last = 0.0;
        for t in 1..6 {
            let p = masked_log_softmax(&logits, &mask_vector(t, &[], 3, 6)).unwrap()[3].exp();
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn width_one_is_greedy() {
        let f = model(5, 3);
        let cfg = GenerationConfig {
            beam_width: 1,
            list_size: 1,
            max_bundle_size: 3,
            ..Default::default()
        };
        let c = beam_search(&f, &ctx(), &cfg).unwrap();
        assert_eq!(c.len(), 1);
        // follow argmax by hand
        let enc = f.encode(&ctx()).unwrap();
        let mut state = f.initial_state(&enc);
        let mut prev = f.bos();
        let mut seq = Vec::new();
        for t in 1..=4 {
            let (next, ht) = f.decoder_step(&state, prev, &enc).unwrap();
            let lp = next_log_probs(&f, &ht, t, &seq, 0).unwrap();
            let j = if t == 4 {
                5
            } else {
                (0..lp.len()).max_by(|a, b| lp[*a].total_cmp(&lp[*b])).unwrap()
            };
            if j == 5 {
                break;
            }
            seq.push(j as ItemId);
            state = next;
            prev = j as ItemId;
        }
        assert_eq!(c.candidates[0].bundle.items(), seq.as_slice());
    }

    #[test]
    fn candidates_are_duplicate_free_and_sorted() {
        let f = model(6, 1);
        let cfg = GenerationConfig {
            beam_width: 8,
            list_size: 2,
            max_bundle_size: 4,
            ..Default::default()
        };
        let c = beam_search(&f, &ctx(), &cfg).unwrap();
        assert!(c.len() <= 8);
        let mut sets = std::collections::HashSet::new();
        for cand in &c.candidates {
            assert!(sets.insert(cand.bundle.set_key()));
            assert!(cand.log_prob <= 0.0);
        }
        assert!(c.candidates.windows(2).all(|w| w[0].log_prob >= w[1].log_prob));
    }

    #[test]
    fn scores_match_sequence_log_prob() {
        let f = model(5, 2);
        let cfg = GenerationConfig {
            beam_width: 10,
            list_size: 2,
            max_bundle_size: 3,
            shift: 2,
            ..Default::default()
        };
        for c in beam_search(&f, &ctx(), &cfg).unwrap().candidates {
            let want = sequence_log_prob(&f, &ctx(), c.bundle.items(), 2).unwrap();
            assert!((c.log_prob - want).abs() < 1e-12);
        }
    }

    #[test]
    fn from_scored_keeps_best_ordering() {
        let c = CandidateSet::from_scored(vec![(vec![2, 1], -3.0), (vec![1, 2], -1.0), (vec![3], -2.0)]);
        assert_eq!(c.len(), 2);
        assert_eq!(c.candidates[0].bundle.items(), &[1, 2]);
        assert_eq!(c.candidates[1].log_prob, -2.0);
    }
}
