//! Feature-aware softmax against a plain per-id softmax table, and both
//! against the frequent-itemset baseline, over several seeds.
//!
//! cargo run --release --example ablation_softmax -- [seeds] [users] [items] [patterns]

use bundlegen::data::{catalog_from_events, group_bundles, make_synthetic_corpus, CorpusKind, DatasetSplit, SplitRule};
use bundlegen::eval::{evaluate, freq_baseline, ground_truth, precision_at_k, EvalOptions};
use bundlegen::generate::GenerationConfig;
use bundlegen::model::{train, ModelConfig, QualityModel, TrainerState};

fn main() -> bundlegen::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let arg = |i: usize, d: usize| args.get(i).copied().unwrap_or(d);
    let (seeds, users, items, patterns) = (arg(0, 3) as u64, arg(1, 2000), arg(2, 500), arg(3, 40));
    println!("{:>4} {:>10} {:>10} {:>10}", "seed", "feature", "id-only", "freq");
    for seed in 0..seeds {
        let corpus = make_synthetic_corpus(100 + seed, users, items, patterns, 0.2)?;
        let split = DatasetSplit::build(
            CorpusKind::Events,
            &group_bundles(&corpus.events),
            &catalog_from_events(&corpus.events),
            &SplitRule::co_purchase(),
            seed,
        )?;
        let mut scores = Vec::new();
        for feature_aware in [true, false] {
            let cfg = ModelConfig {
                seed,
                feature_aware,
                ..ModelConfig::desk()
            };
            let mut model = QualityModel::new(cfg, &split.vocab)?;
            let mut state = TrainerState::new(&model);
            let rep = train(&mut model, &mut state, &split.train, &split.validation)?;
            eprintln!("feature_aware={feature_aware} best valid {:.4}", rep.best_valid_loss);
            let (r, _) = evaluate(&model.freeze(), &split, &GenerationConfig::default(), &EvalOptions::default())?;
            scores.push(r.precision_at(10).unwrap());
        }
        let orders: Vec<Vec<u64>> = split.train.iter().map(|ex| split.vocab.decode_bundle(&ex.target)).collect();
        let freq = freq_baseline(&orders, 10, 5);
        let gt = ground_truth(&split);
        let recs = gt.keys().map(|&u| (u, freq.bundles())).collect();
        let f = precision_at_k(&recs, &gt, 10)?.value;
        println!("{seed:>4} {:>10.4} {:>10.4} {:>10.4}", scores[0], scores[1], f);
    }
    Ok(())
}
