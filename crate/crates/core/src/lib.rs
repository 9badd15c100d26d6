//! Quantum-trajectory simulation of a single-qubit Maxwell's demon.
//!
//! A transmon is prepared in a thermal mixture, measured (the demon acquires
//! information), and conditionally flipped to its ground state so that energy
//! is extracted. The crate simulates the stochastic dynamics with the
//! Monte-Carlo wave-function method, computes the exact outcome distribution
//! from populations, and evaluates Sagawa-Ueda type fluctuation theorems and
//! the generalized second law on the resulting ensembles.
//!
//! Energies are in units of ħω_q, times in μs and rates in 1/μs.

pub mod cli;
pub mod config;
pub mod domain;
pub mod error;
pub mod master_eq;
pub mod measurement;
pub mod protocol;
pub mod rng;
pub mod thermo;
pub mod trajectory;
pub mod validation;

pub use domain::{
    BinaryDist, Cell, InverseTemperature, JumpEvent, JumpKind, Outcome, PhysicalParams, PureState,
    ShotRecord,
};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use master_eq::{exact_outcome_distribution, OutcomeDistribution};
pub use measurement::{FeedbackErrorModel, ReadoutWindow};
pub use protocol::{run_ensemble, Experiment, Protocol, ProtocolTimeline, TimelineParams};
pub use thermo::{ensemble_summary, second_law_check, BetaSource, EnsembleSummary, SummaryOptions};
pub use trajectory::EvolutionConfig;
