//! Inference: masked beam search proposes candidate bundles, greedy DPP
//! selection turns them into a diverse list.

mod beam;
mod dpp;

use serde::{Deserialize, Serialize};

use crate::bundle::{BundleList, UserContext};
use crate::error::{Error, Result};
use crate::model::FrozenModel;
use crate::numerics::DEFAULT_JITTER;

pub use beam::{beam_search, beam_search_traced, mask_vector, sequence_log_prob, BeamEntry, Candidate, CandidateSet};
pub use dpp::{dpp_select, similarity, DppStep, Selection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    /// Beam width `M`.
    pub beam_width: usize,
    /// Bundles per list, `K`.
    pub list_size: usize,
    /// Longest bundle, `T`.
    pub max_bundle_size: usize,
    /// Weight of the diversity term.
    pub lambda: f64,
    /// END is penalised by `max(C − t, 0)` at step `t`.
    pub shift: u32,
    /// Pivots at or below this are treated as singular.
    pub jitter: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            beam_width: 50,
            list_size: 10,
            max_bundle_size: 5,
            lambda: 0.0,
            shift: 0,
            jitter: DEFAULT_JITTER,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.list_size == 0 || self.beam_width < self.list_size {
            return Err(Error::InvalidConfig(format!(
                "need beam width >= list size >= 1, got M={} K={}",
                self.beam_width, self.list_size
            )));
        }
        if self.max_bundle_size == 0 {
            return Err(Error::InvalidConfig("max bundle size must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::InvalidConfig("jitter must be >= 0".into()));
        }
        Ok(())
    }
}

/// Final list plus the candidates it was selected from.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub list: BundleList,
    pub candidates: CandidateSet,
    pub selection: Selection,
}

/// Beam search to completion, then one greedy selection over the final
/// candidates.
pub fn generate(model: &FrozenModel, ctx: &UserContext, cfg: &GenerationConfig) -> Result<Generated> {
    cfg.validate()?;
    let candidates = beam_search(model, ctx, cfg)?;
    let selection = dpp_select(&candidates, cfg)?;
    Ok(Generated {
        list: selection.list.clone(),
        candidates,
        selection,
    })
}

/// Like [`generate`], also returning the list selected from the beam after
/// every step `t` (bundles of size at most `t`). Steps whose beam holds
/// fewer than `K` distinct sets report the partial selection.
pub fn generate_traced(
    model: &FrozenModel,
    ctx: &UserContext,
    cfg: &GenerationConfig,
) -> Result<(Generated, Vec<BundleList>)> {
    cfg.validate()?;
    let mut trace = Vec::new();
    let candidates = beam_search_traced(model, ctx, cfg, &mut |_, step| {
        let list = match dpp_select(step, cfg) {
            Ok(s) => s.list,
            Err(Error::ShortList { selected, .. }) => selected,
            Err(e) => return Err(e),
        };
        trace.push(list);
        Ok(())
    })?;
    let selection = dpp_select(&candidates, cfg)?;
    Ok((
        Generated {
            list: selection.list.clone(),
            candidates,
            selection,
        },
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let c = GenerationConfig::default();
        assert_eq!((c.beam_width, c.list_size, c.lambda, c.shift), (50, 10, 0.0, 0));
        c.validate().unwrap();
        let bad = GenerationConfig {
            list_size: 60,
            ..c.clone()
        };
        assert!(bad.validate().is_err());
        let bad = GenerationConfig {
            max_bundle_size: 0,
            ..c.clone()
        };
        assert!(bad.validate().is_err());
        let bad = GenerationConfig { lambda: -1.0, ..c };
        assert!(bad.validate().is_err());
    }
}
