//! Simulation laboratory for the multisecretary problem.
//!
//! Candidates arrive one at a time with i.i.d. abilities drawn from a known
//! distribution on `[0, 1]`; a decision maker may hire at most `B` of `T`
//! and every decision is irrevocable. The crate provides:
//!
//! - [`distributions`]: type distributions with exact CDF / generalized
//!   inverse pairs, gap structure and clustered-distribution checks.
//! - [`policies`]: certainty-equivalent (CE), conservativeness-with-respect-
//!   to-gaps (CwG), static allocation and the hindsight (offline) oracle.
//! - [`coupling`]: offline-to-go thresholds, per-step compensations and the
//!   pathwise regret decomposition, plus event and martingale diagnostics.
//! - [`dp_oracle`]: exact dynamic-programming and enumeration oracles for
//!   small discrete instances.
//! - [`harness`]: deterministic parallel Monte-Carlo regret experiments,
//!   exponent fits and `.dat` / `.csv` emitters.
//! - [`cli`]: the `multisecretary` command-line front end.
//!
//! All simulation happens in quantile space: each step draws one uniform
//! `U_t`, the ability is `F^{-1}(U_t)` and `U_t` itself doubles as the
//! tie-breaking sample used by every threshold comparison.

pub mod cli;
pub mod coupling;
pub mod distributions;
pub mod dp_oracle;
pub mod error;
pub mod harness;
pub mod plot;
pub mod policies;
pub mod stats;

pub use error::{Error, Result};
