//! Pairwise matchup modeling with intransitivity.
//!
//! Scalar skill models such as Bradley-Terry order players on a single axis,
//! so they can never represent cyclic dominance (rock beats scissors beats
//! paper beats rock). This crate implements a family of matchup functions
//! that can:
//!
//! - [`models::matchup_bt`]: the Bradley-Terry scalar baseline,
//! - [`models::matchup_bci`] / [`models::matchup_bcd`]: blade-chest
//!   embeddings with separate offense/defense vectors per player,
//! - [`models::matchup_general`]: a generalized embedding that combines one
//!   vector per player with a learned antisymmetric interaction matrix and an
//!   intrinsic-strength quadratic form.
//!
//! All models share the logistic win-probability link and are trained by
//! regularized maximum likelihood with SGD over collapsed win/loss counts
//! ([`training::sgd_train`]). The [`intransitivity`] module quantifies cyclic
//! dominance in a dataset (directed 3-cycle density, players involved in
//! cycles, capped elementary-cycle enumeration), and [`evaluation`] provides
//! the shared accuracy metric plus k-fold cross-validation with grid search.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod intransitivity;
pub mod models;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
