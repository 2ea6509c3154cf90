//! Exact-probability laboratory for federated learning under differential privacy.
//!
//! The crate runs the FedAvg protocol as a probabilistic state-transition
//! system over explicit infrastructure states (server, clients, data
//! partitions, gradients, model parameter), enumerates every execution trace
//! with exact rational branch probabilities, and measures what an observer of
//! the released values can learn:
//!
//! - [`model`] — infrastructure state types, protocol traces, and the
//!   neighboring-dataset relations.
//! - [`learning`] — loss models, exact gradients, client updates, weighted
//!   server aggregation, gradient-release defenses, and the discrete noise
//!   mechanism.
//! - [`transition`] — the three protocol rules (partition deployment,
//!   gradient collection with probabilistic noise branching, server
//!   evaluation) and scheduler-driven successor generation.
//! - [`kripke`] — reachable-state models, path selection, and exact terminal
//!   distributions, plus a seeded Monte Carlo cross-check.
//! - [`privacy`] — the realized privacy factor ε between neighboring runs and
//!   the per-client decomposition check.
//! - [`adversary`] — distinguishing advantage, the Bayes-optimal adversary,
//!   and the advantage/ε bound chain.
//! - [`moniteo`] — a satellite-swarm temperature-monitoring case study wired
//!   end to end.
//! - [`selfcheck`] — the built-in oracle suite behind `fldp validate`.
//!
//! All probabilities and model parameters are arbitrary-precision rationals;
//! floating point appears only in reported logarithms.

pub mod adversary;
pub mod kripke;
pub mod learning;
pub mod model;
pub mod moniteo;
pub mod privacy;
pub mod rat;
pub mod selfcheck;
pub mod transition;

pub use num_rational::BigRational;
