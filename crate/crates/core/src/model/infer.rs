use std::sync::Arc;

use crate::bundle::{Bundle, ItemId, UserContext};
use crate::error::Result;
use crate::numerics::{dot, log_sum_exp, Eager, Tensor};

use super::config::ModelConfig;
use super::loss::teacher_forcing;
use super::net::{DecoderState, Encoded, ItemFeatures, Net};
use super::params::Params;

pub type Shared = Arc<Tensor>;

/// Read-only copy of a trained model with its output matrix precomputed.
/// Cheap to share between threads.
#[derive(Debug, Clone)]
pub struct FrozenModel {
    config: ModelConfig,
    features: ItemFeatures,
    params: Params<Shared>,
    weights: Shared,
}

impl FrozenModel {
    pub(crate) fn new(config: ModelConfig, features: ItemFeatures, params: &Params<Tensor>) -> Self {
        let params = params.map(|_, t| Arc::new(t.clone()));
        let weights = {
            let net = Net {
                cfg: &config,
                params: &params,
                features: &features,
            };
            net.weight_matrix(&mut Eager)
        };
        Self {
            config,
            features,
            params,
            weights,
        }
    }

    fn net(&self) -> Net<'_, Shared> {
        Net {
            cfg: &self.config,
            params: &self.params,
            features: &self.features,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn n_items(&self) -> usize {
        self.features.n_items()
    }

    pub fn end(&self) -> ItemId {
        self.features.end()
    }

    pub fn bos(&self) -> ItemId {
        self.features.bos()
    }

    /// Output matrix `E`, items then END, `(N + 1) × (H + 1)`.
    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn encode(&self, ctx: &UserContext) -> Result<Encoded<Shared>> {
        self.net().encode(&mut Eager, &ctx.history)
    }

    pub fn initial_state(&self, enc: &Encoded<Shared>) -> DecoderState<Shared> {
        self.net().initial_state(&mut Eager, enc)
    }

    /// Advances the decoder by one input token; returns the new state and
    /// `h_t`.
    pub fn decoder_step(
        &self,
        state: &DecoderState<Shared>,
        prev: ItemId,
        enc: &Encoded<Shared>,
    ) -> Result<(DecoderState<Shared>, Vec<f64>)> {
        self.features.check(prev)?;
        let (next, ht) = self.net().step(&mut Eager, state, prev, enc);
        Ok((next, ht.data().to_vec()))
    }

    /// `[h_t; 1] · e_j` for every output row.
    pub fn logits(&self, ht: &[f64]) -> Vec<f64> {
        let w = &self.weights;
        let h = ht.len();
        (0..w.rows())
            .map(|j| {
                let row = w.row(j);
                dot(ht, &row[..h]) + row[h]
            })
            .collect()
    }

    /// Orders items canonically: price descending, then id ascending.
    pub fn canonical(&self, items: &[ItemId]) -> Option<Bundle> {
        let mut v = items.to_vec();
        if v.iter().any(|&i| i as usize >= self.n_items()) {
            return None;
        }
        // the price feature is a monotone transform of the raw price
        v.sort_by(|&a, &b| {
            let pa = self.features.price(a);
            let pb = self.features.price(b);
            pb.total_cmp(&pa).then(a.cmp(&b))
        });
        Bundle::from_sequence(v)
    }

    /// `log p(b | C_u)`: teacher-forced sum of full-softmax log-probabilities
    /// over the bundle's items in their stored order, plus the END step.
    pub fn bundle_log_prob(&self, b: &Bundle, ctx: &UserContext) -> Result<f64> {
        let (inputs, targets) = teacher_forcing(b.items(), self.bos(), self.end());
        let enc = self.encode(ctx)?;
        let mut state = self.initial_state(&enc);
        let mut total = 0.0;
        for (&prev, &target) in inputs.iter().zip(&targets) {
            self.features.check(target)?;
            let (next, ht) = self.decoder_step(&state, prev, &enc)?;
            state = next;
            let logits = self.logits(&ht);
            total += logits[target as usize] - log_sum_exp(&logits);
        }
        Ok(total)
    }

    /// Negative mean per-step cross-entropy, `bundle_log_prob / (T + 1)`.
    pub fn rank_score(&self, b: &Bundle, ctx: &UserContext) -> Result<f64> {
        Ok(self.bundle_log_prob(b, ctx)? / (b.len() + 1) as f64)
    }
}
