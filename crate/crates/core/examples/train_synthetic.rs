//! Trains the desk preset on a planted-pattern corpus and compares it with
//! the frequent-itemset baseline.
//!
//! cargo run --release --example train_synthetic -- [users] [items] [patterns] [seed]
//!
//! The split and checkpoint land in `target/bundlegen-demo/` for the other
//! examples to pick up.

use std::time::Instant;

use bundlegen::data::{group_bundles, make_synthetic_corpus, catalog_from_events, CorpusKind, DatasetSplit, SplitRule};
use bundlegen::eval::{evaluate, freq_baseline, ground_truth, precision_at_k, EvalOptions};
use bundlegen::generate::GenerationConfig;
use bundlegen::model::{train, Checkpoint, ModelConfig, QualityModel, TrainerState};

fn main() -> bundlegen::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let arg = |i: usize, d: u64| args.get(i).copied().unwrap_or(d);
    let (users, items, patterns, seed) = (arg(0, 2000), arg(1, 500), arg(2, 40), arg(3, 0));

    let corpus = make_synthetic_corpus(seed, users as usize, items as usize, patterns as usize, 0.2)?;
    let grouped = group_bundles(&corpus.events);
    let catalog = catalog_from_events(&corpus.events);
    let split = DatasetSplit::build(CorpusKind::Events, &grouped, &catalog, &SplitRule::co_purchase(), seed)?;
    println!("{}", split.stats);
    println!(
        "train {} / validation {} / test {}",
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );

    let config = ModelConfig {
        seed,
        ..ModelConfig::desk()
    };
    let mut model = QualityModel::new(config, &split.vocab)?;
    let mut state = TrainerState::new(&model);
    let start = Instant::now();
    let report = train(&mut model, &mut state, &split.train, &split.validation)?;
    for e in &report.epochs {
        println!("epoch {:>2}  train {:.4}  valid {:.4}", e.epoch, e.train_loss, e.valid_loss);
    }
    println!("trained in {:.1}s", start.elapsed().as_secs_f64());

    let out = std::path::Path::new("target/bundlegen-demo");
    split.save(&out.join("split"))?;
    Checkpoint::from_model(&model, None).save(&out.join("model.json"))?;

    let frozen = model.freeze();
    let gen = GenerationConfig::default();
    let start = Instant::now();
    let (eval, _) = evaluate(&frozen, &split, &gen, &EvalOptions::default())?;
    println!(
        "model  pre@10 {:.4}  div {:.4}  size {:.2}  ({:.1}s)",
        eval.precision_at(10).unwrap(),
        eval.diversity.unwrap_or(0.0),
        eval.mean_bundle_size,
        start.elapsed().as_secs_f64()
    );

    let train_orders: Vec<Vec<u64>> = split.train.iter().map(|ex| split.vocab.decode_bundle(&ex.target)).collect();
    let freq = freq_baseline(&train_orders, 10, 5);
    let gt = ground_truth(&split);
    let recs = gt.keys().map(|&u| (u, freq.bundles())).collect();
    let p = precision_at_k(&recs, &gt, 10)?;
    println!("freq   pre@10 {:.4}", p.value);
    Ok(())
}
