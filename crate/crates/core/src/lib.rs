//! Core library for producer-fair sequential bundle recommendation.
//!
//! A session serves one bundle (a fixed-size set of compatible, relevant
//! items) per user. Items belong to producer groups, and the session is
//! steered so that the share of recommended items per group tracks a target
//! exposure vector. This crate holds the pure algorithmic pieces:
//!
//! - [`model`]: catalog, bundle, and quality/validity scoring,
//! - [`fairness`]: exposure counters, gap computations, the fairness metric,
//!   the tolerance schedule, and the adaptive weight controller,
//! - [`solver`]: one exact branch-and-bound solver, three greedy heuristics,
//!   and an exhaustive oracle,
//! - [`relevance`]: a small matrix-factorization trainer and a synthetic
//!   relevance generator,
//! - [`synth`]: synthetic catalog construction for tests and simulations.
//!
//! The crate is `no_std` (with `alloc`); file formats, timing, and the
//! session runner live in the companion `fairbundle` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod fairness;
pub mod model;
pub mod relevance;
pub mod seed;
pub mod solver;
pub mod synth;

pub use fairness::{AdaptiveWeight, FairnessSpec, SessionState, ToleranceSchedule};
pub use model::{Bundle, BundleSpec, Catalog, Item, ItemId, PairTable, RelevanceView, UserId};
pub use solver::{SolveOutcome, SolveRequest, SolveStatus};
