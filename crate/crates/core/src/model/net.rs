//! Forward pass of the quality model, written once over [`Backend`].
//!
//! * encoder: item features → one convolution per window size (tanh) →
//!   max-pool over time → projection to the initial hidden state `h_0`;
//!   the per-position convolution outputs are kept as attention memory.
//! * decoder: stacked LSTM (residual connections above the first layer),
//!   bilinear attention over the memory, `tanh(W_c [ctx; h])`.
//! * head: logits `[h_t; 1] · e_j` against rows built from item features
//!   or taken from a per-id table.

use crate::bundle::{ItemId, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::{Backend, Tensor};

use super::config::ModelConfig;
use super::params::{Affine, Head, Params};

/// Fixed side features of every token, derived from the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemFeatures {
    n_items: usize,
    category: Vec<Option<usize>>,
    price: Vec<f64>,
    /// Tokens whose embedding is all zeros (PAD, UNK).
    blank: Vec<bool>,
}

impl ItemFeatures {
    /// Price feature is `log(1 + price)` standardised over the catalogue.
    pub fn from_vocab(vocab: &Vocabulary) -> Self {
        let n = vocab.n_items();
        let logs: Vec<f64> = vocab.items().iter().map(|i| i.price.ln_1p()).collect();
        let mean = logs.iter().sum::<f64>() / n as f64;
        let var = logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let std = if var > 1e-12 { var.sqrt() } else { 1.0 };
        let mut category: Vec<Option<usize>> = vocab
            .items()
            .iter()
            .map(|i| i.category.map(|c| c as usize))
            .collect();
        let mut price: Vec<f64> = logs.iter().map(|v| (v - mean) / std).collect();
        let mut blank = vec![false; n];
        // END, PAD, BOS, UNK
        for special in [false, true, false, true] {
            category.push(None);
            price.push(0.0);
            blank.push(special);
        }
        Self {
            n_items: n,
            category,
            price,
            blank,
        }
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_tokens(&self) -> usize {
        self.category.len()
    }

    pub fn end(&self) -> ItemId {
        self.n_items as ItemId
    }

    pub fn bos(&self) -> ItemId {
        self.n_items as ItemId + 2
    }

    /// Standardised log-price feature of a token.
    pub fn price(&self, token: ItemId) -> f64 {
        self.price[token as usize]
    }

    pub fn check(&self, token: ItemId) -> Result<()> {
        if (token as usize) < self.n_tokens() {
            Ok(())
        } else {
            Err(Error::UnknownItem(token as u64))
        }
    }
}

/// Encoder output for one user.
#[derive(Debug, Clone)]
pub struct Encoded<V> {
    pub h0: V,
    /// `[positions × channels]`, `None` when no window fits the history.
    pub memory: Option<V>,
}

/// Recurrent state of the stacked decoder.
#[derive(Debug, Clone)]
pub struct DecoderState<V> {
    pub hidden: Vec<V>,
    pub cell: Vec<V>,
}

pub struct Net<'a, V> {
    pub cfg: &'a ModelConfig,
    pub params: &'a Params<V>,
    pub features: &'a ItemFeatures,
}

impl<'a, V: Clone> Net<'a, V> {
    fn affine<B: Backend<Var = V>>(&self, b: &mut B, x: &V, a: &Affine<V>) -> V {
        let xw = b.matmul(x, &a.weight);
        b.add_row(&xw, &a.bias)
    }

    /// Feature rows `[item_emb, cate_emb, price]` for a token sequence.
    pub fn embed<B: Backend<Var = V>>(&self, b: &mut B, tokens: &[ItemId]) -> V {
        let f = self.features;
        let item_idx: Vec<Option<usize>> = tokens
            .iter()
            .map(|&t| (!f.blank[t as usize]).then_some(t as usize))
            .collect();
        let cate_idx: Vec<Option<usize>> = tokens.iter().map(|&t| f.category[t as usize]).collect();
        let price = Tensor::from_vec(
            tokens.len(),
            1,
            tokens.iter().map(|&t| f.price[t as usize]).collect(),
        );
        let items = b.gather_rows(&self.params.item_emb, &item_idx);
        let cates = b.gather_rows(&self.params.cate_emb, &cate_idx);
        let price = b.constant(price);
        b.concat_cols(&[items, cates, price])
    }

    pub fn encode<B: Backend<Var = V>>(&self, b: &mut B, history: &[ItemId]) -> Result<Encoded<V>> {
        if history.is_empty() {
            return Err(Error::EmptyContext);
        }
        for &t in history {
            self.features.check(t)?;
        }
        let start = history.len().saturating_sub(self.cfg.max_context);
        let history = &history[start..];
        let x = self.embed(b, history);
        let ch = self.cfg.cnn_channels;
        let mut pooled = Vec::with_capacity(self.cfg.cnn_windows.len());
        let mut maps = Vec::new();
        for (&w, conv) in self.cfg.cnn_windows.iter().zip(&self.params.conv) {
            if w > history.len() {
                pooled.push(b.constant(Tensor::zeros(1, ch)));
                continue;
            }
            let windows = b.unfold(&x, w);
            let pre = self.affine(b, &windows, conv);
            let act = b.tanh(&pre);
            pooled.push(b.max_pool_rows(&act));
            maps.push(act);
        }
        let pooled = b.concat_cols(&pooled);
        let proj = self.affine(b, &pooled, &self.params.enc_proj);
        let h0 = b.tanh(&proj);
        let memory = match maps.len() {
            0 => None,
            1 => maps.pop(),
            _ => Some(b.concat_rows(&maps)),
        };
        Ok(Encoded { h0, memory })
    }

    pub fn initial_state<B: Backend<Var = V>>(&self, b: &mut B, enc: &Encoded<V>) -> DecoderState<V> {
        let layers = self.cfg.decoder_layers;
        let zero = b.constant(Tensor::zeros(1, self.cfg.hidden_dim));
        DecoderState {
            hidden: vec![enc.h0.clone(); layers],
            cell: vec![zero; layers],
        }
    }

    /// One decoder step fed with `prev`; returns the new state and the
    /// attentional hidden vector `h_t` (`1 × H`).
    pub fn step<B: Backend<Var = V>>(
        &self,
        b: &mut B,
        state: &DecoderState<V>,
        prev: ItemId,
        enc: &Encoded<V>,
    ) -> (DecoderState<V>, V) {
        let h = self.cfg.hidden_dim;
        let mut input = self.embed(b, &[prev]);
        let mut next = DecoderState {
            hidden: Vec::with_capacity(state.hidden.len()),
            cell: Vec::with_capacity(state.cell.len()),
        };
        for (l, layer) in self.params.lstm.iter().enumerate() {
            let xi = b.matmul(&input, &layer.w_input);
            let hh = b.matmul(&state.hidden[l], &layer.w_hidden);
            let sum = b.add(&xi, &hh);
            let gates = b.add(&sum, &layer.bias);
            let i_pre = b.slice_cols(&gates, 0, h);
            let f_pre = b.slice_cols(&gates, h, h);
            let g_pre = b.slice_cols(&gates, 2 * h, h);
            let o_pre = b.slice_cols(&gates, 3 * h, h);
            let i = b.sigmoid(&i_pre);
            let f = b.sigmoid(&f_pre);
            let g = b.tanh(&g_pre);
            let o = b.sigmoid(&o_pre);
            let keep = b.mul(&f, &state.cell[l]);
            let write = b.mul(&i, &g);
            let c = b.add(&keep, &write);
            let tc = b.tanh(&c);
            let hidden = b.mul(&o, &tc);
            let out = if l == 0 {
                hidden.clone()
            } else {
                b.add(&hidden, &input)
            };
            next.hidden.push(hidden);
            next.cell.push(c);
            input = out;
        }
        let ctx = match &enc.memory {
            Some(mem) => {
                let query = b.matmul(&input, &self.params.attn);
                let scores = b.matmul_t(&query, mem);
                let alpha = b.softmax_rows(&scores);
                b.matmul(&alpha, mem)
            }
            None => b.constant(Tensor::zeros(1, self.cfg.cnn_channels)),
        };
        let joined = b.concat_cols(&[ctx, input]);
        let comb = self.affine(b, &joined, &self.params.combine);
        let ht = b.tanh(&comb);
        (next, ht)
    }

    /// `[h_t; 1]`, the vector dotted with softmax rows.
    pub fn augment<B: Backend<Var = V>>(&self, b: &mut B, ht: &V) -> V {
        let one = b.constant(Tensor::scalar(1.0));
        b.concat_cols(&[ht.clone(), one])
    }

    /// Softmax rows for the given output tokens (items and/or END).
    pub fn weight_rows<B: Backend<Var = V>>(&self, b: &mut B, tokens: &[ItemId]) -> V {
        let end = self.features.end();
        match &self.params.head {
            Head::IdOnly { table } => {
                let idx: Vec<Option<usize>> = tokens.iter().map(|&t| Some(t as usize)).collect();
                b.gather_rows(table, &idx)
            }
            Head::FeatureAware {
                hidden,
                out,
                end_row,
            } => {
                let items: Vec<ItemId> = tokens.iter().copied().filter(|&t| t != end).collect();
                if items.len() == tokens.len() {
                    return self.feature_rows(b, &items, hidden, out);
                }
                let mut parts = Vec::new();
                let mut item_rows = None;
                if !items.is_empty() {
                    item_rows = Some(self.feature_rows(b, &items, hidden, out));
                }
                // rows of F(x) come first, END appended; reorder to match `tokens`
                let mut cursor = 0;
                let mut order = Vec::with_capacity(tokens.len());
                for &t in tokens {
                    if t == end {
                        order.push(Some(items.len()));
                    } else {
                        order.push(Some(cursor));
                        cursor += 1;
                    }
                }
                if let Some(rows) = item_rows {
                    parts.push(rows);
                }
                parts.push(end_row.clone());
                let stacked = b.concat_rows(&parts);
                b.gather_rows(&stacked, &order)
            }
        }
    }

    fn feature_rows<B: Backend<Var = V>>(
        &self,
        b: &mut B,
        items: &[ItemId],
        hidden: &Affine<V>,
        out: &Affine<V>,
    ) -> V {
        let x = self.embed(b, items);
        let pre = self.affine(b, &x, hidden);
        let act = b.tanh(&pre);
        self.affine(b, &act, out)
    }

    /// Full output matrix: one row per item, END last (`(N + 1) × (H + 1)`).
    pub fn weight_matrix<B: Backend<Var = V>>(&self, b: &mut B) -> V {
        match &self.params.head {
            Head::IdOnly { table } => table.clone(),
            Head::FeatureAware {
                hidden,
                out,
                end_row,
            } => {
                let items: Vec<ItemId> = (0..self.features.n_items() as ItemId).collect();
                let rows = self.feature_rows(b, &items, hidden, out);
                b.concat_rows(&[rows, end_row.clone()])
            }
        }
    }
}
