use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use bundlegen::cli::{run, RunManifest, EXIT_BAD_INPUT, EXIT_INCOMPATIBLE, EXIT_OK};
use bundlegen::data::{catalog_from_events, group_bundles, make_synthetic_corpus, CorpusKind, DatasetSplit, SplitRule};
use bundlegen::eval::{freq_baseline, ground_truth, precision_at_k, UserRecommendation};

fn cli(args: &[&str]) -> i32 {
    let mut all = vec!["bundlegen"];
    all.extend_from_slice(args);
    run(all)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn freq_recovers_planted_patterns_in_frequency_order() {
    let corpus = make_synthetic_corpus(5, 3000, 200, 5, 0.0).unwrap();
    let orders: Vec<Vec<u64>> = group_bundles(&corpus.events)
        .into_iter()
        .flat_map(|u| u.bundles)
        .collect();
    let result = freq_baseline(&orders, 5, 5);
    assert!(result.warning.is_none());
    let sets = |v: Vec<Vec<u64>>| v.into_iter().map(|b| b.into_iter().collect::<BTreeSet<_>>()).collect::<Vec<_>>();
    let planted = sets(corpus.patterns.iter().map(|p| p.items.clone()).collect());
    assert_eq!(sets(result.bundles()), planted);
}

#[test]
fn single_pattern_freq_matches_best_fixed_bundle() {
    // with noise a sub-pair of the pattern outnumbers the whole pattern, so the clean corpus is used
    let corpus = make_synthetic_corpus(8, 600, 60, 1, 0.0).unwrap();
    let users = group_bundles(&corpus.events);
    let catalog = catalog_from_events(&corpus.events);
    let split = DatasetSplit::build(CorpusKind::Events, &users, &catalog, &SplitRule::co_purchase(), 0).unwrap();
    let gt = ground_truth(&split);
    let orders: Vec<Vec<u64>> = split.train.iter().map(|ex| split.vocab.decode_bundle(&ex.target)).collect();

    let fixed = |b: &Vec<u64>| {
        let recs = gt.keys().map(|&u| (u, vec![b.clone()])).collect();
        precision_at_k(&recs, &gt, 1).unwrap().value
    };
    let freq = freq_baseline(&orders, 1, 5).bundles();
    let got = fixed(&freq[0]);
    let planted: BTreeSet<u64> = corpus.patterns[0].items.iter().copied().collect();
    assert_eq!(freq[0].iter().copied().collect::<BTreeSet<_>>(), planted);
    // brute force over every bundle seen anywhere in the corpus
    let mut pool: BTreeSet<Vec<u64>> = orders
        .iter()
        .map(|b| {
            let mut s = b.clone();
            s.sort_unstable();
            s
        })
        .collect();
    pool.extend(gt.values().flatten().cloned());
    let best = pool.iter().map(fixed).fold(0.0, f64::max);
    assert_eq!(got, best);
}

#[test]
fn cli_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let events = d.join("events.jsonl");
    let split = d.join("split");
    let run_dir = d.join("run");
    let recs = d.join("recs.jsonl");
    let report = d.join("report");
    let sweep = d.join("sweep.csv");

    assert_eq!(cli(&["synth", "--users", "200", "--items", "60", "--patterns", "6", "--out", p(&events)]), EXIT_OK);
    assert_eq!(cli(&["ingest", "--events", p(&events), "--out", p(&split)]), EXIT_OK);
    assert_eq!(cli(&["stats", "--split", p(&split)]), EXIT_OK);
    assert_eq!(cli(&["train", "--split", p(&split), "--out", p(&run_dir), "--epochs", "1"]), EXIT_OK);
    let model = run_dir.join("model.json");
    assert_eq!(
        cli(&["generate", "--model", p(&model), "--split", p(&split), "--out", p(&recs), "-M", "20", "-K", "5"]),
        EXIT_OK
    );
    let lines: Vec<UserRecommendation> = fs::read_to_string(&recs)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!lines.is_empty());
    assert!(lines.windows(2).all(|w| w[0].user < w[1].user));

    assert_eq!(cli(&["evaluate", "--recs", p(&recs), "--split", p(&split), "--out", p(&report)]), EXIT_OK);
    let csv = fs::read_to_string(report.join("report.csv")).unwrap();
    assert!(csv.starts_with("run_id,lambda,C,M,K,pre@5,pre@10,div,auc,mean_latency_ms"));

    assert_eq!(
        cli(&[
            "sweep", "--model", p(&model), "--split", p(&split), "--lambdas", "0,5", "--shifts", "0,3", "-M", "20", "-K",
            "5", "--out", p(&sweep)
        ]),
        EXIT_OK
    );
    assert_eq!(fs::read_to_string(&sweep).unwrap().lines().count(), 5);

    let manifest: RunManifest =
        serde_json::from_str(&fs::read_to_string(d.join("recs.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.command, "generate");
    assert_eq!(manifest.config_hash, manifest.config.hash());
    assert_eq!(manifest.seed, 0);
}

#[test]
fn single_user_contexts_file_gives_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let events = d.join("events.jsonl");
    let split = d.join("split");
    let run_dir = d.join("run");
    assert_eq!(cli(&["synth", "--users", "120", "--items", "40", "--patterns", "4", "--out", p(&events)]), EXIT_OK);
    assert_eq!(cli(&["ingest", "--events", p(&events), "--out", p(&split)]), EXIT_OK);
    assert_eq!(cli(&["train", "--split", p(&split), "--out", p(&run_dir), "--epochs", "1"]), EXIT_OK);
    let loaded = DatasetSplit::load(&split).unwrap();
    let item = loaded.catalog[0].item;
    let contexts = d.join("one.jsonl");
    fs::write(&contexts, format!("{{\"user\": 77, \"history\": [{item}, 999999]}}\n")).unwrap();
    let out = d.join("one_recs.jsonl");
    let code = cli(&[
        "generate", "--model", p(&run_dir.join("model.json")), "--split", p(&split), "--contexts", p(&contexts), "-M",
        "10", "-K", "3", "--out", p(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1);
    let rec: UserRecommendation = serde_json::from_str(text.trim()).unwrap();
    assert_eq!(rec.user, 77);
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(cli(&["ingest", "--events", p(&d.join("missing.jsonl")), "--out", p(&d.join("s"))]), EXIT_BAD_INPUT);
    assert_eq!(cli(&["train", "--split", p(&d.join("nowhere")), "--out", p(&d.join("r"))]), EXIT_BAD_INPUT);
    assert_eq!(cli(&["no-such-command"]), EXIT_BAD_INPUT);

    let bad = d.join("bad.jsonl");
    fs::write(&bad, "{\"user\":1,\"order\":1,\"item\":2,\"price\":1.0}\n{\"user\":1}\n").unwrap();
    assert_eq!(cli(&["ingest", "--events", p(&bad), "--out", p(&d.join("s"))]), EXIT_BAD_INPUT);

    // two corpora with different vocabularies
    let (ev_a, ev_b) = (d.join("a.jsonl"), d.join("b.jsonl"));
    let (split_a, split_b) = (d.join("split_a"), d.join("split_b"));
    let run_dir = d.join("run");
    assert_eq!(cli(&["synth", "--users", "100", "--items", "40", "--patterns", "4", "--out", p(&ev_a)]), EXIT_OK);
    assert_eq!(cli(&["synth", "--users", "100", "--items", "30", "--patterns", "4", "--seed", "9", "--out", p(&ev_b)]), EXIT_OK);
    assert_eq!(cli(&["ingest", "--events", p(&ev_a), "--out", p(&split_a)]), EXIT_OK);
    assert_eq!(cli(&["ingest", "--events", p(&ev_b), "--out", p(&split_b)]), EXIT_OK);
    assert_eq!(cli(&["train", "--split", p(&split_a), "--out", p(&run_dir), "--epochs", "1"]), EXIT_OK);
    let model = run_dir.join("model.json");
    let out = d.join("r.jsonl");
    assert_eq!(
        cli(&["generate", "--model", p(&model), "--split", p(&split_b), "--out", p(&out)]),
        EXIT_INCOMPATIBLE
    );
    // K > M
    assert_eq!(
        cli(&["generate", "--model", p(&model), "--split", p(&split_a), "-M", "5", "-K", "10", "--out", p(&out)]),
        EXIT_BAD_INPUT
    );
    assert_eq!(
        cli(&["sweep", "--model", p(&model), "--split", p(&split_a), "--lambdas", "", "--out", p(&d.join("s.csv"))]),
        EXIT_BAD_INPUT
    );
    assert_eq!(
        cli(&["sweep", "--model", p(&model), "--split", p(&split_a), "--shifts", " , ", "--out", p(&d.join("s.csv"))]),
        EXIT_BAD_INPUT
    );
}

#[test]
fn ingest_bundle_corpus_writes_bundle_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let catalog = d.join("catalog.jsonl");
    let bundles = d.join("bundles.jsonl");
    let mut cat = String::new();
    for i in 0..6 {
        cat.push_str(&format!("{{\"item\": {i}, \"cate\": null, \"price\": {}.0}}\n", i + 1));
    }
    fs::write(&catalog, cat).unwrap();
    let mut rows = String::new();
    for user in 0..4 {
        for seq in 0..5 {
            let a = (user + seq) % 6;
            let b = (user + seq + 1) % 6;
            rows.push_str(&format!("{{\"user\": {user}, \"seq\": {seq}, \"bundle\": [{a}, {b}]}}\n"));
        }
    }
    fs::write(&bundles, rows).unwrap();
    let out = d.join("split");
    assert_eq!(cli(&["ingest", "--bundles", p(&bundles), "--catalog", p(&catalog), "--out", p(&out)]), EXIT_OK);
    let split = DatasetSplit::load(&out).unwrap();
    assert_eq!(split.kind, CorpusKind::Bundles);
    assert_eq!(split.test.len(), 4);
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"bundles\"") || manifest.contains("\"Bundles\""));
}
