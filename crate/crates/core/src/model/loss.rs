//! Training objectives.
//!
//! Both losses average the per-step negative log-likelihood over the
//! `T + 1` decoding steps of a bundle (its `T` items, then END) and over the
//! batch, then add `l2_weight · ‖θ‖²`.
//!
//! The sampled loss scores each step against the positive row plus
//! `n_neg` negatives drawn uniformly without replacement from the other
//! `N` output rows (items and END). With one negative the step term is
//! `−ln σ(h·(e⁺ − e⁻))`, the pairwise ranking loss.

use rand::seq::index;
use rand::Rng;

use crate::bundle::ItemId;
use crate::data::TrainingExample;
use crate::error::Result;
use crate::numerics::Backend;

use super::net::Net;
use super::params::Params;

/// Negatives per example, per step.
pub type Negatives = Vec<Vec<Vec<ItemId>>>;

/// Decoder inputs (BOS then items) and targets (items then END).
pub(crate) fn teacher_forcing(items: &[ItemId], bos: ItemId, end: ItemId) -> (Vec<ItemId>, Vec<ItemId>) {
    let mut inputs = Vec::with_capacity(items.len() + 1);
    inputs.push(bos);
    inputs.extend_from_slice(items);
    let mut targets = items.to_vec();
    targets.push(end);
    (inputs, targets)
}

/// `−log softmax([h;1] · rowsᵀ)_0`: the positive sits in row 0.
pub fn sampled_step_nll<B: Backend>(b: &mut B, h_aug: &B::Var, rows: &B::Var) -> B::Var {
    let logits = b.matmul_t(h_aug, rows);
    let lp = b.log_softmax_pick(&logits, 0);
    b.scale(&lp, -1.0)
}

/// `−ln σ(h·(e⁺ − e⁻))`, evaluated without overflow.
pub fn bpr_loss(h: &[f64], pos: &[f64], neg: &[f64]) -> f64 {
    let x: f64 = h
        .iter()
        .zip(pos.iter().zip(neg))
        .map(|(h, (p, n))| h * (p - n))
        .sum();
    // softplus(-x)
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Mean step NLL of one example. `weights` is the full output matrix;
/// with `negatives`, each step only sees the positive row and its negatives.
pub(crate) fn example_nll<B: Backend>(
    net: &Net<'_, B::Var>,
    b: &mut B,
    ex: &TrainingExample,
    weights: &B::Var,
    negatives: Option<&[Vec<ItemId>]>,
) -> Result<B::Var> {
    let f = net.features;
    let (inputs, targets) = teacher_forcing(ex.target.items(), f.bos(), f.end());
    let enc = net.encode(b, &ex.context.history)?;
    let mut state = net.initial_state(b, &enc);
    let mut total: Option<B::Var> = None;
    for (t, (&prev, &target)) in inputs.iter().zip(&targets).enumerate() {
        f.check(prev)?;
        let (next, ht) = net.step(b, &state, prev, &enc);
        state = next;
        let h_aug = net.augment(b, &ht);
        let nll = match negatives {
            Some(negs) => {
                let mut idx = Vec::with_capacity(negs[t].len() + 1);
                idx.push(Some(target as usize));
                idx.extend(negs[t].iter().map(|&n| Some(n as usize)));
                let rows = b.gather_rows(weights, &idx);
                sampled_step_nll(b, &h_aug, &rows)
            }
            None => {
                let logits = b.matmul_t(&h_aug, weights);
                let lp = b.log_softmax_pick(&logits, target as usize);
                b.scale(&lp, -1.0)
            }
        };
        total = Some(match total {
            Some(acc) => b.add(&acc, &nll),
            None => nll,
        });
    }
    let total = total.expect("targets always include END");
    Ok(b.scale(&total, 1.0 / targets.len() as f64))
}

pub(crate) fn l2_term<B: Backend>(b: &mut B, params: &Params<B::Var>, weight: f64) -> Option<B::Var> {
    if weight == 0.0 {
        return None;
    }
    let mut acc: Option<B::Var> = None;
    for p in params.flatten() {
        let sq = b.sum_squares(p);
        acc = Some(match acc {
            Some(a) => b.add(&a, &sq),
            None => sq,
        });
    }
    acc.map(|a| b.scale(&a, weight))
}

/// Mean NLL over `batch` plus the L2 term. `negatives = None` uses the full
/// softmax.
pub fn batch_loss<B: Backend>(
    net: &Net<'_, B::Var>,
    b: &mut B,
    batch: &[TrainingExample],
    negatives: Option<&Negatives>,
    l2_weight: f64,
) -> Result<B::Var> {
    assert!(!batch.is_empty(), "empty batch");
    let weights = net.weight_matrix(b);
    let mut acc: Option<B::Var> = None;
    for (i, ex) in batch.iter().enumerate() {
        let negs = negatives.map(|n| n[i].as_slice());
        let nll = example_nll(net, b, ex, &weights, negs)?;
        acc = Some(match acc {
            Some(a) => b.add(&a, &nll),
            None => nll,
        });
    }
    let mean = b.scale(&acc.expect("non-empty batch"), 1.0 / batch.len() as f64);
    Ok(match l2_term(b, net.params, l2_weight) {
        Some(l2) => b.add(&mean, &l2),
        None => mean,
    })
}

/// Draws negatives for every step of every example. Returns `None` when
/// `n_neg` covers every other output row, in which case the full softmax is
/// the exact objective.
pub fn sample_negatives<R: Rng + ?Sized>(
    batch: &[TrainingExample],
    n_neg: usize,
    n_items: usize,
    rng: &mut R,
) -> Option<Negatives> {
    // outputs are the N items plus END; excluding the positive leaves N
    if n_neg >= n_items {
        return None;
    }
    let end = n_items as ItemId;
    Some(
        batch
            .iter()
            .map(|ex| {
                ex.target
                    .items()
                    .iter()
                    .copied()
                    .chain(std::iter::once(end))
                    .map(|pos| {
                        index::sample(rng, n_items, n_neg)
                            .into_iter()
                            .map(|k| {
                                let k = k as ItemId;
                                if k >= pos {
                                    k + 1
                                } else {
                                    k
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect(),
    )
}
