//! Writes a small planted-pattern event log, reads it back, and prints the
//! corpus statistics and the split it produces.
//!
//! cargo run --example ingest_events -- [users] [items] [patterns]

use bundlegen::data::{
    catalog_from_events, compute_stats, group_bundles, load_events, make_synthetic_corpus, write_events, CorpusKind,
    DatasetSplit, SplitRule,
};

fn main() -> bundlegen::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let arg = |i: usize, d: usize| args.get(i).copied().unwrap_or(d);
    let corpus = make_synthetic_corpus(7, arg(0, 500), arg(1, 200), arg(2, 12), 0.2)?;

    let dir = std::env::temp_dir().join("bundlegen-ingest");
    std::fs::create_dir_all(&dir).map_err(|e| bundlegen::Error::Io { path: dir.clone(), source: e })?;
    let path = dir.join("events.jsonl");
    write_events(&path, &corpus.events)?;
    let events = load_events(&path)?;
    println!("{} events read from {}", events.len(), path.display());

    let users = group_bundles(&events);
    let catalog = catalog_from_events(&events);
    println!("{}", compute_stats(&users, &catalog)?);

    let split = DatasetSplit::build(CorpusKind::Events, &users, &catalog, &SplitRule::co_purchase(), 0)?;
    println!(
        "vocabulary {} items, train {} / validation {} / test {}, {} users skipped",
        split.vocab.n_items(),
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        split.skipped_users
    );
    let ex = &split.train[0];
    println!(
        "first example: history {:?} -> bundle {:?}",
        ex.context.history.iter().filter_map(|&t| split.vocab.raw_id(t)).collect::<Vec<_>>(),
        split.vocab.decode_bundle(&ex.target)
    );
    split.save(&dir.join("split"))?;
    println!("split written to {}", dir.join("split").display());
    Ok(())
}
