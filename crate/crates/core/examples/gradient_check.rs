//! Checks the tape gradients of both training losses against finite
//! differences on a tiny model, for both softmax heads.
//!
//! cargo run --example gradient_check

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bundlegen::data::TrainingExample;
use bundlegen::model::{batch_loss, sample_negatives, ModelConfig, Negatives, Params, QualityModel};
use bundlegen::numerics::{grad_check, Tape, Tensor, Var};
use bundlegen::{Bundle, UserContext, Vocabulary};

fn worst(model: &QualityModel, batch: &[TrainingExample], negs: Option<&Negatives>) -> f64 {
    let values: Vec<Tensor> = model.params().flatten().into_iter().cloned().collect();
    grad_check(
        |tape: &mut Tape, vars: &[Var]| {
            let mut it = vars.iter();
            let p: Params<Var> = model.params().map(|_, _| *it.next().unwrap());
            batch_loss(&model.net(&p), tape, batch, negs, model.config().l2_weight).unwrap()
        },
        &values,
        1e-4,
    )
}

fn main() {
    let vocab = Vocabulary::new((0..7u64).map(|i| (i, (i % 3 != 0).then_some(i % 2), 2.0 + i as f64))).unwrap();
    let batch = vec![
        TrainingExample {
            context: UserContext { user_id: 0, history: vec![0, 4, 2] },
            target: Bundle::from_sequence(vec![5, 1]).unwrap(),
        },
        TrainingExample {
            context: UserContext { user_id: 1, history: vec![6] },
            target: Bundle::from_sequence(vec![3]).unwrap(),
        },
    ];
    for feature_aware in [true, false] {
        let cfg = ModelConfig { feature_aware, ..ModelConfig::tiny() };
        let model = QualityModel::new(cfg, &vocab).unwrap();
        let n = model.params().n_values();
        let full = worst(&model, &batch, None);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let negs = sample_negatives(&batch, 3, vocab.n_items(), &mut rng).unwrap();
        let sampled = worst(&model, &batch, Some(&negs));
        println!(
            "{:<14} {n:>4} parameters  full softmax {full:.2e}  sampled {sampled:.2e}",
            if feature_aware { "feature-aware" } else { "id-only" }
        );
    }
}
