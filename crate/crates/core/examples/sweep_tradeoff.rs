//! Sweeps the diversity weight and the END shift on a trained checkpoint.
//!
//! cargo run --release --example train_synthetic
//! cargo run --release --example sweep_tradeoff

use std::path::Path;

use bundlegen::data::DatasetSplit;
use bundlegen::eval::{evaluate, EvalOptions};
use bundlegen::generate::GenerationConfig;
use bundlegen::model::Checkpoint;

fn main() -> bundlegen::Result<()> {
    let dir = Path::new("target/bundlegen-demo");
    let split = DatasetSplit::load(&dir.join("split"))?;
    let (model, _) = Checkpoint::load(&dir.join("model.json"))?.into_model(&split.vocab)?;
    let frozen = model.freeze();

    println!("{:>6} {:>4} {:>8} {:>8} {:>6}", "lambda", "C", "pre@10", "div", "size");
    let grid = [(0.0, 0), (1.0, 0), (5.0, 0), (0.0, 5), (0.0, 10), (0.0, 15), (0.0, 20)];
    for (lambda, shift) in grid {
        let cfg = GenerationConfig {
            lambda,
            shift,
            ..Default::default()
        };
        let (r, _) = evaluate(&frozen, &split, &cfg, &EvalOptions::default())?;
        println!(
            "{:>6.2} {:>4} {:>8.4} {:>8.4} {:>6.2}",
            lambda,
            shift,
            r.precision_at(10).unwrap_or(f64::NAN),
            r.diversity.unwrap_or(f64::NAN),
            r.mean_bundle_size
        );
    }
    Ok(())
}
