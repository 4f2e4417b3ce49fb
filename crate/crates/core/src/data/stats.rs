use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::events::CatalogEntry;
use super::split::UserBundles;

/// Corpus summary in the layout of a dataset statistics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_items: usize,
    pub n_users: usize,
    pub n_categories: usize,
    /// Item interactions: the summed size of every bundle occurrence.
    pub n_records: usize,
    pub n_distinct_bundles: usize,
    /// Mean size over distinct bundles.
    pub avg_bundle_size: f64,
}

pub fn compute_stats(users: &[UserBundles], catalog: &[CatalogEntry]) -> Result<CorpusStats> {
    let mut items = HashSet::new();
    let mut distinct: HashSet<BTreeSet<u64>> = HashSet::new();
    let mut records = 0;
    for u in users {
        for b in &u.bundles {
            records += b.len();
            items.extend(b.iter().copied());
            distinct.insert(b.iter().copied().collect());
        }
    }
    if distinct.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let total: usize = distinct.iter().map(|b| b.len()).sum();
    let categories: HashSet<u64> = catalog
        .iter()
        .filter(|c| items.contains(&c.item))
        .filter_map(|c| c.cate)
        .collect();
    Ok(CorpusStats {
        n_items: items.len(),
        n_users: users.iter().filter(|u| !u.bundles.is_empty()).count(),
        n_categories: categories.len(),
        n_records: records,
        n_distinct_bundles: distinct.len(),
        avg_bundle_size: total as f64 / distinct.len() as f64,
    })
}

impl std::fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<22}{:>12}", "# Users", self.n_users)?;
        writeln!(f, "{:<22}{:>12}", "# Items", self.n_items)?;
        writeln!(f, "{:<22}{:>12}", "# Categories", self.n_categories)?;
        writeln!(f, "{:<22}{:>12}", "# Records", self.n_records)?;
        writeln!(f, "{:<22}{:>12}", "# Distinct bundles", self.n_distinct_bundles)?;
        write!(f, "{:<22}{:>12.2}", "Average bundle size", self.avg_bundle_size)
    }
}
