use rand::Rng;

use super::config::ModelConfig;
use crate::numerics::Tensor;

/// `x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine<V> {
    pub weight: V,
    pub bias: V,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer<V> {
    /// `[input × 4H]`, gate blocks ordered input, forget, cell, output.
    pub w_input: V,
    /// `[H × 4H]`
    pub w_hidden: V,
    /// `[1 × 4H]`
    pub bias: V,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head<V> {
    /// Rows `F(x_j) = tanh(x_j W1 + b1) W2 + b2`, plus a learned END row.
    FeatureAware {
        hidden: Affine<V>,
        out: Affine<V>,
        end_row: V,
    },
    /// One free row per item, END last.
    IdOnly { table: V },
}

/// Every trainable tensor of the quality model, generic over how a tensor
/// is held (plain values, tape variables, shared eager values).
#[derive(Debug, Clone, PartialEq)]
pub struct Params<V> {
    /// `[n_tokens × embed_dim]`
    pub item_emb: V,
    /// `[max(1, n_categories) × cate_dim]`
    pub cate_emb: V,
    /// One filter bank per window size: `[w·D × channels]`.
    pub conv: Vec<Affine<V>>,
    /// Pooled features to the initial hidden state.
    pub enc_proj: Affine<V>,
    pub lstm: Vec<LstmLayer<V>>,
    /// `[H × channels]`, bilinear attention score.
    pub attn: V,
    /// `[channels + H] → H`, the attentional hidden vector.
    pub combine: Affine<V>,
    pub head: Head<V>,
}

impl<V> Params<V> {
    /// Applies `f` to every tensor in a fixed order, passing a stable name.
    pub fn map<U>(&self, mut f: impl FnMut(&str, &V) -> U) -> Params<U> {
        let aff = |prefix: &str, a: &Affine<V>, f: &mut dyn FnMut(&str, &V) -> U| Affine {
            weight: f(&format!("{prefix}.weight"), &a.weight),
            bias: f(&format!("{prefix}.bias"), &a.bias),
        };
        let item_emb = f("item_emb", &self.item_emb);
        let cate_emb = f("cate_emb", &self.cate_emb);
        let conv = self
            .conv
            .iter()
            .enumerate()
            .map(|(i, c)| aff(&format!("conv{i}"), c, &mut f))
            .collect();
        let enc_proj = aff("enc_proj", &self.enc_proj, &mut f);
        let lstm = self
            .lstm
            .iter()
            .enumerate()
            .map(|(i, l)| LstmLayer {
                w_input: f(&format!("lstm{i}.w_input"), &l.w_input),
                w_hidden: f(&format!("lstm{i}.w_hidden"), &l.w_hidden),
                bias: f(&format!("lstm{i}.bias"), &l.bias),
            })
            .collect();
        let attn = f("attn", &self.attn);
        let combine = aff("combine", &self.combine, &mut f);
        let head = match &self.head {
            Head::FeatureAware {
                hidden,
                out,
                end_row,
            } => Head::FeatureAware {
                hidden: aff("fa.hidden", hidden, &mut f),
                out: aff("fa.out", out, &mut f),
                end_row: f("fa.end_row", end_row),
            },
            Head::IdOnly { table } => Head::IdOnly {
                table: f("softmax_table", table),
            },
        };
        Params {
            item_emb,
            cate_emb,
            conv,
            enc_proj,
            lstm,
            attn,
            combine,
            head,
        }
    }

    /// Visits every tensor by reference, in [`Params::map`] order.
    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(String, &'a V)) {
        let aff = |prefix: String, a: &'a Affine<V>, f: &mut dyn FnMut(String, &'a V)| {
            f(format!("{prefix}.weight"), &a.weight);
            f(format!("{prefix}.bias"), &a.bias);
        };
        f("item_emb".into(), &self.item_emb);
        f("cate_emb".into(), &self.cate_emb);
        for (i, c) in self.conv.iter().enumerate() {
            aff(format!("conv{i}"), c, f);
        }
        aff("enc_proj".into(), &self.enc_proj, f);
        for (i, l) in self.lstm.iter().enumerate() {
            f(format!("lstm{i}.w_input"), &l.w_input);
            f(format!("lstm{i}.w_hidden"), &l.w_hidden);
            f(format!("lstm{i}.bias"), &l.bias);
        }
        f("attn".into(), &self.attn);
        aff("combine".into(), &self.combine, f);
        match &self.head {
            Head::FeatureAware {
                hidden,
                out,
                end_row,
            } => {
                aff("fa.hidden".into(), hidden, f);
                aff("fa.out".into(), out, f);
                f("fa.end_row".into(), end_row);
            }
            Head::IdOnly { table } => f("softmax_table".into(), table),
        }
    }

    /// Tensors in [`Params::map`] order.
    pub fn flatten(&self) -> Vec<&V> {
        let mut out = Vec::new();
        self.visit(&mut |_, v| out.push(v));
        out
    }

    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.map(|name, _| out.push(name.to_string()));
        out
    }
}

impl Params<Tensor> {
    /// Random initialisation for `n_tokens` token rows and `n_categories`
    /// category rows. Biases start at zero except the LSTM forget gate (1).
    pub fn init<R: Rng + ?Sized>(
        cfg: &ModelConfig,
        n_tokens: usize,
        n_categories: usize,
        rng: &mut R,
    ) -> Self {
        let std = cfg.init_std;
        let d = cfg.feature_dim();
        let h = cfg.hidden_dim;
        let ch = cfg.cnn_channels;
        let affine = |inp: usize, out: usize, rng: &mut R| Affine {
            weight: Tensor::randn(inp, out, std, rng),
            bias: Tensor::zeros(1, out),
        };
        let item_emb = Tensor::randn(n_tokens, cfg.embed_dim, std, rng);
        let cate_emb = Tensor::randn(n_categories.max(1), cfg.cate_dim, std, rng);
        let conv = cfg
            .cnn_windows
            .iter()
            .map(|&w| affine(w * d, ch, rng))
            .collect();
        let enc_proj = affine(cfg.cnn_windows.len() * ch, h, rng);
        let lstm = (0..cfg.decoder_layers)
            .map(|l| {
                let inp = if l == 0 { d } else { h };
                let mut bias = Tensor::zeros(1, 4 * h);
                bias.data_mut()[h..2 * h].fill(1.0);
                LstmLayer {
                    w_input: Tensor::randn(inp, 4 * h, std, rng),
                    w_hidden: Tensor::randn(h, 4 * h, std, rng),
                    bias,
                }
            })
            .collect();
        let attn = Tensor::randn(h, ch, std, rng);
        let combine = affine(ch + h, h, rng);
        let head = if cfg.feature_aware {
            Head::FeatureAware {
                hidden: affine(d, cfg.fa_hidden_dim, rng),
                out: affine(cfg.fa_hidden_dim, h + 1, rng),
                end_row: Tensor::randn(1, h + 1, std, rng),
            }
        } else {
            // n_tokens - 4 items, plus the END row
            Head::IdOnly {
                table: Tensor::randn(n_tokens - 3, h + 1, std, rng),
            }
        };
        Params {
            item_emb,
            cate_emb,
            conv,
            enc_proj,
            lstm,
            attn,
            combine,
            head,
        }
    }

    pub fn n_values(&self) -> usize {
        self.flatten().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|t| t.is_finite())
    }

    /// Rebuilds parameters from a flat list in [`Params::map`] order, checking
    /// each shape against `self`.
    pub fn with_values(&self, values: Vec<Tensor>) -> Option<Self> {
        if values.len() != self.flatten().len() {
            return None;
        }
        let mut it = values.into_iter();
        let mut ok = true;
        let out = self.map(|_, t| {
            let v = it.next().expect("length checked");
            ok &= v.shape() == t.shape();
            v
        });
        ok.then_some(out)
    }
}
