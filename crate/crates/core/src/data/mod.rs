//! Ingestion, example construction and corpus statistics.

mod events;
mod split;
mod stats;
mod synthetic;

use serde::{Deserialize, Serialize};

use crate::bundle::{Bundle, UserContext};

pub use events::{
    catalog_from_events, load_bundle_records, load_catalog, load_events, write_events, BundleRecord,
    CatalogEntry, RawEvent,
};
pub use split::{
    build_prefix_examples, group_bundle_records, group_bundles, vocab_from_catalog, CorpusKind,
    DatasetSplit, Manifest, Mode, PrefixExamples, RawExample, SplitRule, TestCase, UserBundles,
    VALIDATION_FRACTION,
};
pub(crate) use events::{read_jsonl, write_jsonl};
pub use stats::{compute_stats, CorpusStats};
pub use synthetic::{make_synthetic_corpus, PlantedPattern, SyntheticCorpus};

/// One supervised example: a user's history and the bundle that followed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub context: UserContext,
    pub target: Bundle,
}
