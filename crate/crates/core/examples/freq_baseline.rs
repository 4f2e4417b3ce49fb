//! Mines frequent itemsets from a planted-pattern corpus and compares them
//! with the patterns the generator planted.
//!
//! cargo run --release --example freq_baseline -- [users] [patterns] [noise]

use std::collections::BTreeSet;

use bundlegen::data::{group_bundles, make_synthetic_corpus};
use bundlegen::eval::freq_baseline;

fn main() -> bundlegen::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let users: usize = args.first().map_or(2000, |a| a.parse().expect("users"));
    let patterns: usize = args.get(1).map_or(10, |a| a.parse().expect("patterns"));
    let noise: f64 = args.get(2).map_or(0.2, |a| a.parse().expect("noise"));

    let corpus = make_synthetic_corpus(3, users, 300, patterns, noise)?;
    let orders: Vec<Vec<u64>> = group_bundles(&corpus.events).into_iter().flat_map(|u| u.bundles).collect();
    let result = freq_baseline(&orders, patterns, 5);
    if let Some(w) = &result.warning {
        println!("note: {w}");
    }
    let planted: Vec<BTreeSet<u64>> = corpus.patterns.iter().map(|p| p.items.iter().copied().collect()).collect();
    println!("{} orders, min support {}", orders.len(), result.min_support);
    println!("{:<22} {:>8}  planted rank", "itemset", "support");
    for set in &result.itemsets {
        let s: BTreeSet<u64> = set.items.iter().copied().collect();
        let rank = planted.iter().position(|p| *p == s).map_or("-".to_string(), |r| (r + 1).to_string());
        println!("{:<22} {:>8}  {rank}", format!("{:?}", set.items), set.support);
    }
    Ok(())
}
