use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::TrainingExample;
use crate::error::{Error, Result};
use crate::numerics::{Backend, Eager, Tape, Tensor};

use super::loss::{batch_loss, sample_negatives};
use super::params::Params;
use super::QualityModel;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Adam moment estimates, one per parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &Params<Tensor>) -> Self {
        let zeros: Vec<Tensor> = params
            .flatten()
            .iter()
            .map(|t| Tensor::zeros(t.rows(), t.cols()))
            .collect();
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    fn update(&mut self, params: &mut [Tensor], grads: &[Tensor], lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((p, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean sampled loss over the epoch's batches, without the L2 term.
    pub train_loss: f64,
    /// Mean full-softmax loss on the validation examples.
    pub valid_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_valid_loss: f64,
    pub stopped_early: bool,
}

/// Resumable training state: optimiser moments plus the loss curve so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub adam: AdamState,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_valid_loss: f64,
    pub since_best: usize,
    pub best_params: Option<Vec<Tensor>>,
    /// Parameters after the last finished epoch. The model itself holds the
    /// best ones, so resuming starts from these instead.
    #[serde(default)]
    pub last_params: Option<Vec<Tensor>>,
}

impl TrainerState {
    pub fn new(model: &QualityModel) -> Self {
        Self {
            adam: AdamState::new(model.params()),
            history: Vec::new(),
            best_epoch: 0,
            best_valid_loss: f64::INFINITY,
            since_best: 0,
            best_params: None,
            last_params: None,
        }
    }

    pub fn epochs_done(&self) -> usize {
        self.history.len()
    }
}

/// Mean full-softmax NLL (no L2) over `examples`.
pub fn evaluate_loss(model: &QualityModel, examples: &[TrainingExample]) -> Result<f64> {
    if examples.is_empty() {
        return Ok(f64::NAN);
    }
    let frozen = model.params().map(|_, t| std::sync::Arc::new(t.clone()));
    let net = model.net(&frozen);
    let mut total = 0.0;
    for chunk in examples.chunks(64) {
        let v = batch_loss(&net, &mut Eager, chunk, None, 0.0)?;
        total += Eager.value(&v).item() * chunk.len() as f64;
    }
    Ok(total / examples.len() as f64)
}

/// One optimiser step on `batch`; returns the loss before the update.
pub fn train_step(
    model: &mut QualityModel,
    adam: &mut AdamState,
    batch: &[TrainingExample],
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let cfg = model.config().clone();
    let negatives = sample_negatives(batch, cfg.n_neg_samples, model.n_items(), rng);
    let mut tape = Tape::new();
    let vars = model.params().map(|_, t| tape.leaf(t.clone()));
    let loss = {
        let net = model.net(&vars);
        batch_loss(&net, &mut tape, batch, negatives.as_ref(), cfg.l2_weight)?
    };
    let value = tape.value(&loss).item();
    if !value.is_finite() {
        return Ok(value);
    }
    let mut grads = tape.backward(loss);
    let grads: Vec<Tensor> = vars
        .flatten()
        .iter()
        .zip(model.params().flatten())
        .map(|(v, p)| grads.take(**v).unwrap_or_else(|| Tensor::zeros(p.rows(), p.cols())))
        .collect();
    let mut values: Vec<Tensor> = model.params().flatten().into_iter().cloned().collect();
    adam.update(&mut values, &grads, cfg.learning_rate);
    let updated = model
        .params()
        .with_values(values)
        .expect("optimiser preserves shapes");
    model.set_params(updated);
    Ok(value)
}

/// Trains with Adam on the sampled loss until `max_epochs` or until the
/// validation loss fails to improve for `patience` epochs, then restores the
/// best parameters. Shuffling and negative sampling are seeded from the
/// model seed and the epoch index, so a resumed run replays identically.
pub fn train(
    model: &mut QualityModel,
    state: &mut TrainerState,
    train: &[TrainingExample],
    valid: &[TrainingExample],
) -> Result<TrainReport> {
    if train.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let cfg = model.config().clone();
    let valid = if valid.is_empty() { train } else { valid };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stopped_early = false;
    if let Some(last) = state.last_params.take() {
        let resumed = model
            .params()
            .with_values(last)
            .ok_or_else(|| Error::InvalidConfig("trainer state does not match the model".into()))?;
        model.set_params(resumed);
    }
    if state.best_params.is_none() && state.history.is_empty() {
        state.best_valid_loss = evaluate_loss(model, valid)?;
        state.best_params = Some(model.params().flatten().into_iter().cloned().collect());
    }

    for epoch in state.epochs_done()..cfg.max_epochs {
        if state.since_best >= cfg.patience {
            stopped_early = true;
            break;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(epoch as u64 + 1)));
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<TrainingExample> = chunk.iter().map(|&i| train[i].clone()).collect();
            let loss = train_step(model, &mut state.adam, &batch, &mut rng)?;
            if !loss.is_finite() || !model.params().is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: bi,
                    loss,
                });
            }
            sum += loss;
            batches += 1;
        }
        let valid_loss = evaluate_loss(model, valid)?;
        if !valid_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: batches,
                loss: valid_loss,
            });
        }
        state.history.push(EpochStats {
            epoch,
            train_loss: sum / batches as f64,
            valid_loss,
        });
        if valid_loss < state.best_valid_loss - 1e-9 {
            state.best_valid_loss = valid_loss;
            state.best_epoch = epoch;
            state.since_best = 0;
            state.best_params = Some(model.params().flatten().into_iter().cloned().collect());
        } else {
            state.since_best += 1;
        }
    }
    if state.since_best >= cfg.patience && state.epochs_done() < cfg.max_epochs {
        stopped_early = true;
    }
    state.last_params = Some(model.params().flatten().into_iter().cloned().collect());
    if let Some(best) = &state.best_params {
        let restored = model
            .params()
            .with_values(best.clone())
            .expect("saved parameters match the model");
        model.set_params(restored);
    }
    Ok(TrainReport {
        epochs: state.history.clone(),
        best_epoch: state.best_epoch,
        best_valid_loss: state.best_valid_loss,
        stopped_early,
    })
}
