//! Simulation and analysis of pre- and post-selected quantum ensembles.
//!
//! The crate is organized bottom-up:
//!
//! - [`quantum`]: states, projective measurements, unitaries, two-party states.
//! - [`abl`]: the ABL probability for an intermediate measurement between a
//!   pre-selection and a post-selection, plus sequential path probabilities.
//! - [`ensemble`]: seeded, reproducible Monte Carlo realization of the same protocols.
//! - [`counterfactual`]: the single- and compound-antecedent readings of
//!   "had Q been measured at t", the cotenability test, and verdicts.
//! - [`scenarios`]: the named example catalogue (three boxes, crossed polarizers, ...).
//! - [`verify`]: the invariant and agreement suite behind `tsqc verify`.
//!
//! The guide in `book/` walks through each layer; its code listings are
//! compiled and run as doctests of this crate.

pub mod abl;
pub mod counterfactual;
pub mod ensemble;
mod error;
pub mod paths;
pub mod quantum;
pub mod scenarios;
pub mod verify;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    pub struct Readme;
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/states-and-measurements.md")]
    pub struct StatesAndMeasurements;
    #[doc = include_str!("../../../book/src/abl-rule.md")]
    pub struct AblRule;
    #[doc = include_str!("../../../book/src/ensembles.md")]
    pub struct Ensembles;
    #[doc = include_str!("../../../book/src/counterfactuals.md")]
    pub struct Counterfactuals;
    #[doc = include_str!("../../../book/src/scenarios.md")]
    pub struct Scenarios;
    #[doc = include_str!("../../../book/src/file-formats.md")]
    pub struct FileFormats;
}
