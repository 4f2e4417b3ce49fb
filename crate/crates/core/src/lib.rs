//! Personalized bundle list generation.
//!
//! A sequence model scores bundles given a user's history, a masked beam
//! search proposes candidate bundles, and a greedy determinantal point
//! process selection picks a high-quality, mutually diverse list from them.
//!
//! ```text
//! history ──► encoder ──► decoder + feature-aware softmax
//!                              │
//!                   masked beam search (width M, size ≤ T, shift C)
//!                              │
//!                   greedy DPP selection (K bundles, trade-off λ)
//! ```

pub mod bundle;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod generate;
pub mod model;
pub mod numerics;

pub use bundle::{Bundle, BundleList, Item, ItemId, UserContext, Vocabulary};
pub use error::{Error, Result};
