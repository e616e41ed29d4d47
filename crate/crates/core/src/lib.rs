//! Idle-qubit performance indicators for annealer noise monitoring.
//!
//! A problem QUBO is minor-embedded on part of a hardware graph and a random
//! "indicator" QUBO is planted on the qubits the embedding leaves idle. Both
//! are sampled in the same calls, so the indicator's energy tracks the
//! device's noise level over time and can gate which problem samples are kept.
//!
//! Modules, bottom-up:
//!
//! * [`qubo`] - sparse QUBO/Ising models, energies, autoscaling and the
//!   problem + indicator combination rule.
//! * [`problems`] - random graphs, maximum clique / minimum vertex cover
//!   encodings and indicator generation.
//! * [`topology`] - Chimera graphs, defects, idle regions, graph files.
//! * [`embedding`] - clique embeddings, chain strength, embedding and
//!   unembedding of samples.
//! * [`anneal`] - a Metropolis annealer emulator with drifting temperature.
//! * [`timeseries`] - the statistics used to compare energy series.
//! * [`monitor`] - burn-in history, percentile ranks and threshold gating.
//! * [`experiment`] - end-to-end experiment runners and artifact export.

pub mod anneal;
pub mod embedding;
pub mod error;
pub mod experiment;
pub mod monitor;
pub mod problems;
pub mod qubo;
pub mod rng;
pub mod textio;
pub mod timeseries;
pub mod topology;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use qubo::{CombinedProgram, Frame, QuboModel, Sample, Var};
