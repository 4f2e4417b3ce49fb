//! The bundle quality model `p(b | C_u)` and its training.

mod checkpoint;
mod config;
mod infer;
mod loss;
mod net;
mod params;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

use crate::bundle::{ItemId, Vocabulary};
use crate::data::TrainingExample;
use crate::error::{Error, Result};
use crate::numerics::{Backend, Eager, Tensor};

pub use checkpoint::{Checkpoint, NamedTensor};
pub use config::ModelConfig;
pub use infer::{FrozenModel, Shared};
pub use loss::{batch_loss, bpr_loss, sample_negatives, sampled_step_nll, Negatives};
pub use net::{DecoderState, Encoded, ItemFeatures, Net};
pub use params::{Affine, Head, LstmLayer, Params};
pub use train::{evaluate_loss, train, train_step, AdamState, EpochStats, TrainReport, TrainerState};


/// Trainable quality model bound to one vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityModel {
    config: ModelConfig,
    params: Params<Tensor>,
    features: ItemFeatures,
    vocab_hash: String,
}

impl QualityModel {
    /// Randomly initialised model, seeded by `config.seed`.
    pub fn new(config: ModelConfig, vocab: &Vocabulary) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = Params::init(&config, vocab.n_tokens(), vocab.n_categories(), &mut rng);
        Ok(Self {
            features: ItemFeatures::from_vocab(vocab),
            vocab_hash: vocab.hash(),
            config,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &Params<Tensor> {
        &self.params
    }

    /// Replaces the parameters. Panics if a shape differs from the current
    /// layout.
    pub fn set_params(&mut self, params: Params<Tensor>) {
        let same = self
            .params
            .flatten()
            .iter()
            .zip(params.flatten())
            .all(|(a, b)| a.shape() == b.shape());
        assert!(same, "parameter layout changed");
        self.params = params;
    }

    pub fn features(&self) -> &ItemFeatures {
        &self.features
    }

    pub fn n_items(&self) -> usize {
        self.features.n_items()
    }

    pub fn vocab_hash(&self) -> &str {
        &self.vocab_hash
    }

    pub fn net<'a, V: Clone>(&'a self, params: &'a Params<V>) -> Net<'a, V> {
        Net {
            cfg: &self.config,
            params,
            features: &self.features,
        }
    }

    fn shared(&self) -> Params<Shared> {
        self.params.map(|_, t| Arc::new(t.clone()))
    }

    /// Immutable inference copy with the output matrix precomputed.
    pub fn freeze(&self) -> FrozenModel {
        FrozenModel::new(self.config.clone(), self.features.clone(), &self.params)
    }

    /// Input features `[item_emb, cate_emb, price]` of one token.
    pub fn embed_item(&self, token: ItemId) -> Result<Vec<f64>> {
        self.features.check(token)?;
        let p = self.shared();
        let x = self.net(&p).embed(&mut Eager, &[token]);
        Ok(x.data().to_vec())
    }

    /// Softmax rows for `candidates` (item ids and/or END), `[len × (H + 1)]`.
    pub fn fa_weight_matrix(&self, candidates: &[ItemId]) -> Result<Tensor> {
        if candidates.is_empty() {
            return Err(Error::DegenerateInput("no candidate rows requested"));
        }
        let end = self.features.end();
        if let Some(&bad) = candidates.iter().find(|&&c| c > end) {
            return Err(Error::UnknownItem(bad as u64));
        }
        let p = self.shared();
        let e = self.net(&p).weight_rows(&mut Eager, candidates);
        Ok((*e).clone())
    }

    /// Mean full-softmax cross-entropy plus the L2 term.
    pub fn mle_loss(&self, batch: &[TrainingExample]) -> Result<f64> {
        self.loss_with(batch, None)
    }

    /// Sampled loss with `n_neg` uniform negatives per step; the full loss
    /// when `n_neg` covers every other output row.
    pub fn sampled_fa_loss<R: Rng + ?Sized>(
        &self,
        batch: &[TrainingExample],
        n_neg: usize,
        rng: &mut R,
    ) -> Result<f64> {
        if n_neg == 0 {
            return Err(Error::InvalidConfig("n_neg must be at least 1".into()));
        }
        let negs = sample_negatives(batch, n_neg, self.n_items(), rng);
        self.loss_with(batch, negs.as_ref())
    }

    /// Sampled loss against fixed negatives (one list per example per step).
    pub fn loss_with(&self, batch: &[TrainingExample], negatives: Option<&Negatives>) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let p = self.shared();
        let v = batch_loss(&self.net(&p), &mut Eager, batch, negatives, self.config.l2_weight)?;
        Ok(Eager.value(&v).item())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{Bundle, UserContext};
    use super::loss::teacher_forcing;
    use crate::numerics::{grad_check, Tape, Var};

    pub(crate) fn toy_vocab(n: usize) -> Vocabulary {
        Vocabulary::new((0..n as u64).map(|i| (i, (i % 3 != 2).then_some(i % 3), 1.0 + i as f64 * 3.0)))
            .unwrap()
    }

    fn example(history: Vec<ItemId>, target: Vec<ItemId>) -> TrainingExample {
        TrainingExample {
            context: UserContext {
                user_id: 0,
                history,
            },
            target: Bundle::from_sequence(target).unwrap(),
        }
    }

    fn toy_batch() -> Vec<TrainingExample> {
        vec![example(vec![0, 3, 1], vec![4, 2]), example(vec![5], vec![1])]
    }

    fn vars_as_params(template: &Params<Tensor>, vars: &[Var]) -> Params<Var> {
        let mut it = vars.iter();
        template.map(|_, _| *it.next().unwrap())
    }

    fn loss_grad_error(model: &QualityModel, batch: &[TrainingExample], negs: Option<&Negatives>) -> f64 {
        let values: Vec<Tensor> = model.params().flatten().into_iter().cloned().collect();
        grad_check(
            |tape: &mut Tape, vars: &[Var]| {
                let p = vars_as_params(model.params(), vars);
                batch_loss(&model.net(&p), tape, batch, negs, model.config().l2_weight).unwrap()
            },
            &values,
            1e-4,
        )
    }

    #[test]
    fn embed_shapes_and_blank_tokens() {
        let vocab = toy_vocab(6);
        let m = QualityModel::new(ModelConfig::tiny(), &vocab).unwrap();
        let d = m.config().feature_dim();
        let x = m.embed_item(0).unwrap();
        assert_eq!(x.len(), d);
        // item 2 has no category
        let x2 = m.embed_item(2).unwrap();
        let cate = &x2[m.config().embed_dim..m.config().embed_dim + m.config().cate_dim];
        assert!(cate.iter().all(|&v| v == 0.0));
        assert!(m.embed_item(vocab.pad()).unwrap().iter().all(|&v| v == 0.0));
        assert!(matches!(m.embed_item(99), Err(Error::UnknownItem(99))));
    }

    #[test]
    fn identical_features_give_identical_rows() {
        let vocab = Vocabulary::new([(0, Some(1), 2.0), (1, Some(1), 2.0), (2, None, 9.0)]).unwrap();
        let mut m = QualityModel::new(ModelConfig::tiny(), &vocab).unwrap();
        let mut p = m.params().clone();
        let row = p.item_emb.row(0).to_vec();
        p.item_emb.row_mut(1).copy_from_slice(&row);
        m.set_params(p);
        let e = m.fa_weight_matrix(&[0, 1, 3]).unwrap();
        assert_eq!(e.row(0), e.row(1));
        let full = m.freeze();
        assert_eq!(full.weights().rows(), 4);
        assert_eq!(full.weights().row(3), e.row(2));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let vocab = toy_vocab(6);
        let batch = toy_batch();
        for feature_aware in [true, false] {
            let cfg = ModelConfig {
                feature_aware,
                ..ModelConfig::tiny()
            };
            let m = QualityModel::new(cfg, &vocab).unwrap();
            let full = loss_grad_error(&m, &batch, None);
            assert!(full < 1e-4, "full softmax, fa={feature_aware}: {full}");
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let negs = sample_negatives(&batch, 2, 6, &mut rng).unwrap();
            let sampled = loss_grad_error(&m, &batch, Some(&negs));
            assert!(sampled < 1e-4, "sampled, fa={feature_aware}: {sampled}");
        }
    }

    #[test]
    fn one_negative_is_pairwise_ranking_loss() {
        let vocab = toy_vocab(6);
        let m = QualityModel::new(ModelConfig::tiny(), &vocab).unwrap();
        let batch = toy_batch();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let negs = sample_negatives(&batch, 1, 6, &mut rng).unwrap();
        let got = m.loss_with(&batch, Some(&negs)).unwrap();

        let frozen = m.freeze();
        let e = frozen.weights();
        let h = m.config().hidden_dim;
        let mut total = 0.0;
        for (ex, steps) in batch.iter().zip(&negs) {
            let (inputs, targets) = teacher_forcing(ex.target.items(), frozen.bos(), frozen.end());
            let enc = frozen.encode(&ex.context).unwrap();
            let mut state = frozen.initial_state(&enc);
            let mut sum = 0.0;
            for ((&prev, &pos), neg) in inputs.iter().zip(&targets).zip(steps) {
                let (next, ht) = frozen.decoder_step(&state, prev, &enc).unwrap();
                state = next;
                let mut aug = ht.clone();
                aug.push(1.0);
                assert_eq!(aug.len(), h + 1);
                sum += bpr_loss(&aug, e.row(pos as usize), e.row(neg[0] as usize));
            }
            total += sum / targets.len() as f64;
        }
        let l2: f64 = m.params().flatten().iter().map(|t| t.sum_squares()).sum();
        let want = total / batch.len() as f64 + m.config().l2_weight * l2;
        assert!(((got - want) / want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn all_negatives_recover_the_full_loss() {
        let vocab = toy_vocab(6);
        let m = QualityModel::new(ModelConfig::tiny(), &vocab).unwrap();
        let batch = toy_batch();
        let mle = m.mle_loss(&batch).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(m.sampled_fa_loss(&batch, 6, &mut rng).unwrap(), mle);
        // every other row sampled explicitly: same softmax, rows permuted
        let all: Negatives = batch
            .iter()
            .map(|ex| {
                ex.target
                    .items()
                    .iter()
                    .copied()
                    .chain([6])
                    .map(|pos| (0..=6).filter(|&k| k != pos).collect())
                    .collect()
            })
            .collect();
        let explicit = m.loss_with(&batch, Some(&all)).unwrap();
        assert!((explicit - mle).abs() < 1e-12);
    }

    #[test]
    fn untrained_loss_near_uniform() {
        let vocab = toy_vocab(20);
        let cfg = ModelConfig {
            init_std: 1e-3,
            l2_weight: 0.0,
            ..ModelConfig::tiny()
        };
        let m = QualityModel::new(cfg, &vocab).unwrap();
        let loss = m.mle_loss(&toy_batch()).unwrap();
        assert!((loss - 21f64.ln()).abs() < 1e-2, "{loss}");
    }

    #[test]
    fn zero_parameters_give_zero_hidden() {
        let vocab = toy_vocab(5);
        let mut m = QualityModel::new(ModelConfig::tiny(), &vocab).unwrap();
        let zeros = m.params().map(|_, t| Tensor::zeros(t.rows(), t.cols()));
        m.set_params(zeros);
        let f = m.freeze();
        let ctx = UserContext {
            user_id: 1,
            history: vec![0, 4, 2],
        };
        let enc = f.encode(&ctx).unwrap();
        let (_, ht) = f.decoder_step(&f.initial_state(&enc), f.bos(), &enc).unwrap();
        assert!(ht.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zeroed_residual_layer_is_identity() {
        let vocab = toy_vocab(6);
        let one = ModelConfig {
            decoder_layers: 1,
            ..ModelConfig::tiny()
        };
        let two = ModelConfig {
            decoder_layers: 2,
            ..ModelConfig::tiny()
        };
        let m1 = QualityModel::new(one, &vocab).unwrap();
        let mut m2 = QualityModel::new(two, &vocab).unwrap();
        let mut p = m1.params().clone();
        let extra = m2.params().lstm[1].clone();
        p.lstm.push(LstmLayer {
            w_input: Tensor::zeros(extra.w_input.rows(), extra.w_input.cols()),
            w_hidden: Tensor::zeros(extra.w_hidden.rows(), extra.w_hidden.cols()),
            bias: Tensor::zeros(1, extra.bias.cols()),
        });
        m2.set_params(p);
        let ctx = UserContext {
            user_id: 0,
            history: vec![1, 2, 3],
        };
        let b = Bundle::from_sequence(vec![5, 0, 4]).unwrap();
        let a = m1.freeze().bundle_log_prob(&b, &ctx).unwrap();
        let c = m2.freeze().bundle_log_prob(&b, &ctx).unwrap();
        assert!((a - c).abs() < 1e-12);
    }

    #[test]
    fn tape_and_eager_agree() {
        let vocab = toy_vocab(6);
        let m = QualityModel::new(ModelConfig::tiny(), &vocab).unwrap();
        let batch = toy_batch();
        let mut tape = Tape::new();
        let vars = m.params().map(|_, t| tape.leaf(t.clone()));
        let v = batch_loss(&m.net(&vars), &mut tape, &batch, None, m.config().l2_weight).unwrap();
        assert_eq!(tape.value(&v).item(), m.mle_loss(&batch).unwrap());
    }

    #[test]
    fn bundle_log_prob_matches_loss() {
        let vocab = toy_vocab(6);
        let cfg = ModelConfig {
            l2_weight: 0.0,
            ..ModelConfig::tiny()
        };
        let m = QualityModel::new(cfg, &vocab).unwrap();
        let ex = example(vec![0, 3, 1], vec![4, 2]);
        let lp = m.freeze().bundle_log_prob(&ex.target, &ex.context).unwrap();
        let loss = m.mle_loss(std::slice::from_ref(&ex)).unwrap();
        assert!((lp / 3.0 + loss).abs() < 1e-12);
        assert!(lp <= 0.0);
        assert!((m.freeze().rank_score(&ex.target, &ex.context).unwrap() + loss).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_mass_sums_to_one() {
        // sequences of distinct items closed by END, up to length N, carry
        // all mass only when repeats are impossible; with repeats allowed
        // the truncated sum is strictly below one
        let vocab = toy_vocab(4);
        let m = QualityModel::new(ModelConfig::tiny(), &vocab).unwrap().freeze();
        let ctx = UserContext {
            user_id: 0,
            history: vec![0, 1],
        };
        let mut total = 0.0;
        let mut stack: Vec<Vec<ItemId>> = (0..4).map(|i| vec![i]).collect();
        while let Some(seq) = stack.pop() {
            let b = Bundle::from_sequence(seq.clone()).unwrap();
            total += m.bundle_log_prob(&b, &ctx).unwrap().exp();
            if seq.len() < 3 {
                for i in 0..4 {
                    if !seq.contains(&i) {
                        let mut s = seq.clone();
                        s.push(i);
                        stack.push(s);
                    }
                }
            }
        }
        assert!(total > 0.0 && total <= 1.0, "{total}");
    }

    #[test]
    fn encoder_is_deterministic_and_handles_short_history() {
        let vocab = toy_vocab(6);
        let cfg = ModelConfig {
            cnn_windows: vec![1, 8],
            ..ModelConfig::tiny()
        };
        let a = QualityModel::new(cfg.clone(), &vocab).unwrap().freeze();
        let b = QualityModel::new(cfg, &vocab).unwrap().freeze();
        let ctx = UserContext {
            user_id: 0,
            history: vec![2, 1],
        };
        let ea = a.encode(&ctx).unwrap();
        let eb = b.encode(&ctx).unwrap();
        assert_eq!(ea.h0, eb.h0);
        assert!(matches!(
            a.encode(&UserContext {
                user_id: 0,
                history: vec![]
            }),
            Err(Error::EmptyContext)
        ));
    }

    #[test]
    fn max_pool_ignores_order_of_pooled_positions() {
        let vocab = toy_vocab(6);
        let cfg = ModelConfig {
            cnn_windows: vec![1],
            ..ModelConfig::tiny()
        };
        let m = QualityModel::new(cfg.clone(), &vocab).unwrap().freeze();
        let h = |hist: Vec<ItemId>| {
            m.encode(&UserContext {
                user_id: 0,
                history: hist,
            })
            .unwrap()
            .h0
        };
        assert_eq!(h(vec![1, 3, 4]), h(vec![4, 1, 3]));
        let m2 = QualityModel::new(
            ModelConfig {
                cnn_windows: vec![2],
                ..cfg
            },
            &vocab,
        )
        .unwrap()
        .freeze();
        let h2 = |hist: Vec<ItemId>| {
            m2.encode(&UserContext {
                user_id: 0,
                history: hist,
            })
            .unwrap()
            .h0
        };
        assert_ne!(h2(vec![1, 3]), h2(vec![3, 1]));
    }
}
