//! Causal effects under network interference.
//!
//! The crate computes the average direct effect (ADE), average indirect
//! effect (AIE), average overall effect (AOE = ADE + AIE) and the
//! infinitesimal policy effect (INF) for arbitrary potential-outcome models
//! and randomized designs, either exactly (support enumeration), through a
//! binomial fast path for anonymous interference, or by Monte Carlo. It also
//! ships Horvitz–Thompson estimators for the direct and indirect effects and
//! harnesses that check their unbiasedness.
//!
//! Units are 0-indexed throughout the library. File formats and the CLI use
//! 1-indexed units.

pub mod battery;
pub mod config;
pub mod design;
pub mod error;
pub mod estimands;
pub mod estimators;
pub mod graph;
pub mod model;
pub mod rng;
pub mod runner;
pub mod summation;
pub mod treatment;
pub mod zoo;

pub use design::{BernoulliDesign, Design, DesignSupport, TwoStageClusteredDesign};
pub use error::{Error, Result};
pub use estimands::{EstimandReport, Method};
pub use estimators::{ExperimentRealization, ReplicationReport};
pub use graph::InterferenceGraph;
pub use model::{NoiseSpec, OutcomeModel};
pub use treatment::{ProbabilityVector, TreatmentVector};
