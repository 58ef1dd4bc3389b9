//! Analytical model and simulator for diffusion broadcast in wireless body
//! area networks.
//!
//! The sink sends a packet once; every other node relays it exactly once
//! after its first successful reception. [`markov`] turns per-link success
//! probabilities from [`channel`] into an absorbing chain and solves for
//! coverage metrics, [`multibroadcast`] combines repeated broadcasts, and
//! [`sim`] runs the same protocol over CSMA/CA event by event.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod markov;
pub mod multibroadcast;
pub mod quadrature;
pub mod sim;

pub use channel::{InterferenceMode, LinkModel, RadioConfig};
pub use dataset::AttenuationMatrix;
pub use error::{Error, Result};
pub use markov::{BroadcastChain, NodeState, OutcomeDistribution, SystemState};
pub use multibroadcast::{abaque, k_cover_probability, Abaque, MultiBroadcastResult};
pub use sim::{BatchEstimate, CsmaConfig, Simulation};
