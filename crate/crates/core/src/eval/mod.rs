//! Metrics, the frequent-itemset baseline, brute-force oracles and the
//! evaluation harness.

mod freq;
mod latency;
mod metrics;
mod oracle;

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{UserContext, Vocabulary};
use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::generate::{generate, GenerationConfig};
use crate::model::FrozenModel;

pub use freq::{apriori, default_min_support, freq_baseline, FreqResult, Itemset};
pub use latency::{measure_latency, LatencyStats};
pub use metrics::{auc, diversity, list_diversity, precision_at_k, GroundTruth, PrecisionAtK, Recommendations};
pub use oracle::{exhaustive_topk_oracle, OracleScore, ORACLE_MAX_ITEMS, ORACLE_MAX_SIZE};

/// One line of a recommendations file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecommendation {
    pub user: u64,
    pub bundles: Vec<Vec<u64>>,
    pub log_probs: Vec<f64>,
    pub lambda: f64,
    #[serde(rename = "C")]
    pub shift: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub run_id: String,
    pub lambda: f64,
    #[serde(rename = "C")]
    pub shift: u32,
    #[serde(rename = "M")]
    pub beam_width: usize,
    #[serde(rename = "K")]
    pub list_size: usize,
    pub precision: Vec<PrecisionAtK>,
    pub diversity: Option<f64>,
    pub auc: Option<f64>,
    /// Per-user generation time, excluding model loading and the output
    /// matrix.
    pub latency: Option<LatencyStats>,
    pub mean_bundle_size: f64,
    pub n_users: usize,
    pub short_lists: usize,
}

pub const CSV_HEADER: [&str; 10] = [
    "run_id",
    "lambda",
    "C",
    "M",
    "K",
    "pre@5",
    "pre@10",
    "div",
    "auc",
    "mean_latency_ms",
];

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v}")).unwrap_or_default()
}

impl EvalReport {
    pub fn precision_at(&self, k: usize) -> Option<f64> {
        self.precision.iter().find(|p| p.k == k).map(|p| p.value)
    }

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.run_id.clone(),
            format!("{}", self.lambda),
            self.shift.to_string(),
            self.beam_width.to_string(),
            self.list_size.to_string(),
            opt(self.precision_at(5)),
            opt(self.precision_at(10)),
            opt(self.diversity),
            opt(self.auc),
            opt(self.latency.map(|l| l.mean_ms)),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub run_id: String,
    pub ks: Vec<usize>,
    pub with_auc: bool,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            run_id: "run".into(),
            ks: vec![5, 10],
            with_auc: false,
            seed: 0,
        }
    }
}

/// Generates a list for every context, in parallel, keeping input order.
/// Returns the recommendations, per-user wall-clock in milliseconds, and
/// how many lists came out shorter than `K`.
pub fn recommend(
    model: &FrozenModel,
    vocab: &Vocabulary,
    contexts: &[UserContext],
    cfg: &GenerationConfig,
) -> Result<(Vec<UserRecommendation>, Vec<f64>, usize)> {
    cfg.validate()?;
    let results: Vec<Result<(UserRecommendation, f64, bool)>> = contexts
        .par_iter()
        .map(|ctx| {
            let start = Instant::now();
            let (list, short) = match generate(model, ctx, cfg) {
                Ok(g) => (g.list, false),
                Err(Error::ShortList { selected, .. }) => (selected, true),
                Err(e) => return Err(e),
            };
            let ms = start.elapsed().as_secs_f64() * 1e3;
            let rec = UserRecommendation {
                user: ctx.user_id,
                bundles: list.bundles.iter().map(|b| vocab.decode_bundle(b)).collect(),
                log_probs: list.scores.unwrap_or_default(),
                lambda: cfg.lambda,
                shift: cfg.shift,
            };
            Ok((rec, ms, short))
        })
        .collect();
    let mut recs = Vec::with_capacity(results.len());
    let mut times = Vec::with_capacity(results.len());
    let mut short = 0;
    for r in results {
        let (rec, ms, s) = r?;
        recs.push(rec);
        times.push(ms);
        short += s as usize;
    }
    Ok((recs, times, short))
}

pub fn as_recommendations(recs: &[UserRecommendation]) -> Recommendations {
    recs.iter().map(|r| (r.user, r.bundles.clone())).collect()
}

/// Test-set ground truth of a split.
pub fn ground_truth(split: &DatasetSplit) -> GroundTruth {
    split.test.iter().map(|t| (t.user, t.truth.clone())).collect()
}

/// List metrics for recommendations already produced.
pub fn score_lists(
    recs: &[UserRecommendation],
    gt: &GroundTruth,
    ks: &[usize],
) -> Result<(Vec<PrecisionAtK>, Option<f64>, f64)> {
    let map = as_recommendations(recs);
    let precision = ks
        .iter()
        .map(|&k| precision_at_k(&map, gt, k))
        .collect::<Result<Vec<_>>>()?;
    let div = match diversity(&map) {
        Ok(d) => Some(d),
        Err(Error::DegenerateList(_)) => None,
        Err(e) => return Err(e),
    };
    let sizes: Vec<usize> = recs.iter().flat_map(|r| r.bundles.iter().map(Vec::len)).collect();
    let mean_size = if sizes.is_empty() {
        0.0
    } else {
        sizes.iter().sum::<usize>() as f64 / sizes.len() as f64
    };
    Ok((precision, div, mean_size))
}

/// AUC of `rank_score` on the test users: positives are their in-vocabulary
/// ground-truth bundles, negatives come from the distinct training targets.
pub fn model_auc(model: &FrozenModel, split: &DatasetSplit, seed: u64) -> Result<f64> {
    let vocab = &split.vocab;
    let pool: Vec<Vec<u64>> = split
        .train
        .iter()
        .map(|ex| {
            let mut s = vocab.decode_bundle(&ex.target);
            s.sort_unstable();
            s
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let cases: Vec<(UserContext, Vec<Vec<u64>>)> = split
        .test_contexts()?
        .into_iter()
        .map(|(ctx, truth)| {
            let known = truth
                .into_iter()
                .filter(|b| b.iter().all(|&i| vocab.lookup(i).is_some()))
                .collect();
            (ctx, known)
        })
        .collect();
    auc(&cases, |c| c.1.as_slice(), &pool, seed, |c, b| {
        let bundle = vocab.encode_bundle(b)?;
        model.rank_score(&bundle, &c.0)
    })
}

/// Generates for every test user of `split` and scores the lists.
pub fn evaluate(
    model: &FrozenModel,
    split: &DatasetSplit,
    cfg: &GenerationConfig,
    opts: &EvalOptions,
) -> Result<(EvalReport, Vec<UserRecommendation>)> {
    let contexts: Vec<UserContext> = split.test_contexts()?.into_iter().map(|(c, _)| c).collect();
    if contexts.is_empty() {
        return Err(Error::NoUsers);
    }
    let (recs, times, short_lists) = recommend(model, &split.vocab, &contexts, cfg)?;
    let gt = ground_truth(split);
    let (precision, div, mean_bundle_size) = score_lists(&recs, &gt, &opts.ks)?;
    let auc = if opts.with_auc {
        Some(model_auc(model, split, opts.seed)?)
    } else {
        None
    };
    let report = EvalReport {
        run_id: opts.run_id.clone(),
        lambda: cfg.lambda,
        shift: cfg.shift,
        beam_width: cfg.beam_width,
        list_size: cfg.list_size,
        precision,
        diversity: div,
        auc,
        latency: Some(LatencyStats::from_samples(&times)?),
        mean_bundle_size,
        n_users: recs.len(),
        short_lists,
    };
    Ok((report, recs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_row_matches_header() {
        let r = EvalReport {
            run_id: "x".into(),
            lambda: 0.5,
            shift: 3,
            beam_width: 50,
            list_size: 10,
            precision: vec![PrecisionAtK {
                k: 10,
                value: 0.25,
                users: 1,
                missing_users: 0,
                short_lists: 0,
            }],
            diversity: Some(0.5),
            auc: None,
            latency: None,
            mean_bundle_size: 2.0,
            n_users: 1,
            short_lists: 0,
        };
        let row = r.csv_row();
        assert_eq!(row.len(), CSV_HEADER.len());
        assert_eq!(row[5], "");
        assert_eq!(row[6], "0.25");
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["C"], 3);
    }
}
