//! Per-user generation time as the vocabulary doubles, with beam width,
//! bundle size and list size fixed.
//!
//! cargo run --release --example latency_scaling -- [lambda]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bundlegen::eval::measure_latency;
use bundlegen::generate::{generate, GenerationConfig};
use bundlegen::model::{ModelConfig, QualityModel};
use bundlegen::{Error, ItemId, UserContext, Vocabulary};

fn main() -> bundlegen::Result<()> {
    let lambda: f64 = std::env::args().nth(1).map_or(1.0, |a| a.parse().expect("lambda"));
    let cfg = GenerationConfig {
        lambda,
        // keeps every beam open to the size limit so the work is comparable
        shift: 100,
        ..GenerationConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut last: Option<f64> = None;
    println!("{:>6} {:>10} {:>10} {:>7}", "N", "mean ms", "p95 ms", "ratio");
    for n in [500usize, 1000, 2000, 4000, 8000] {
        let vocab = Vocabulary::new((0..n as u64).map(|i| (i, Some(i % 20), 1.0 + (i % 97) as f64)))?;
        let model = QualityModel::new(ModelConfig::desk(), &vocab)?.freeze();
        let users: Vec<UserContext> = (0..20)
            .map(|u| UserContext {
                user_id: u,
                history: (0..10).map(|_| rng.random_range(0..n as ItemId)).collect(),
            })
            .collect();
        let stats = measure_latency(&users, |u| match generate(&model, u, &cfg) {
            Ok(_) | Err(Error::ShortList { .. }) => Ok(()),
            Err(e) => Err(e),
        })?;
        let ratio = last.map_or(String::new(), |l| format!("{:.2}", stats.mean_ms / l));
        println!("{n:>6} {:>10.2} {:>10.2} {ratio:>7}", stats.mean_ms, stats.p95_ms);
        last = Some(stats.mean_ms);
    }
    Ok(())
}
