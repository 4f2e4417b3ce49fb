//! Generates one user's bundle list step by step: the beam's candidates
//! after each step, then the greedy diverse selection.
//!
//! cargo run --release --example train_synthetic
//! cargo run --release --example generate_list -- [lambda] [C]

use std::path::Path;

use bundlegen::data::DatasetSplit;
use bundlegen::generate::{generate_traced, GenerationConfig};
use bundlegen::model::Checkpoint;

fn main() -> bundlegen::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let lambda: f64 = args.first().map_or(1.0, |a| a.parse().expect("lambda"));
    let shift: u32 = args.get(1).map_or(0, |a| a.parse().expect("C"));

    let dir = Path::new("target/bundlegen-demo");
    let split = DatasetSplit::load(&dir.join("split"))?;
    let (model, _) = Checkpoint::load(&dir.join("model.json"))?.into_model(&split.vocab)?;
    let model = model.freeze();

    let (ctx, truth) = split.test_contexts()?.into_iter().next().expect("test users");
    let history: Vec<u64> = ctx.history.iter().filter_map(|&t| split.vocab.raw_id(t)).collect();
    println!("user {}  history {:?}", ctx.user_id, history);
    println!("held-out bundles {truth:?}");

    let cfg = GenerationConfig {
        lambda,
        shift,
        ..GenerationConfig::default()
    };
    let (out, trace) = generate_traced(&model, &ctx, &cfg)?;
    for (t, list) in trace.iter().enumerate() {
        let head: Vec<Vec<u64>> = list.bundles.iter().take(3).map(|b| split.vocab.decode_bundle(b)).collect();
        println!("after step {}: {} picks, first {:?}", t + 1, list.len(), head);
    }
    println!("\n{} distinct candidates, {} singular skips", out.candidates.len(), out.selection.singular_skips);
    for (b, step) in out.list.bundles.iter().zip(&out.selection.steps) {
        let lp = out.candidates.candidates[step.chosen].log_prob;
        println!(
            "{:<28} log p {:>8.3}  objective {:>8.3}  log det {:>7.3}",
            format!("{:?}", split.vocab.decode_bundle(b)),
            lp,
            step.objective,
            step.log_det
        );
    }
    Ok(())
}
