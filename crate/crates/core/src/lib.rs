//! Simulation and analysis of signal-strength hiding.
//!
//! A sender modulates its emitted strength so that a passive adversary reading
//! received signal strength (RSS) cannot tell whether a person is blocking the
//! path. The crate is split into:
//!
//! * [`dist`]: the noise laws, their densities, KL divergences and LLR updates.
//! * [`channel`]: the 1D linear-decay propagation model with person interference.
//! * [`protocol`]: sender-side hiding strategies and trace generation.
//! * [`adversary`]: sequential and moving-average detectors plus sample-complexity bounds.
//! * [`planar`]: directional 2D beam constructions.
//! * [`harness`]: seeded Monte-Carlo experiments, config/CSV handling and the CLI.

pub mod adversary;
pub mod channel;
pub mod dist;
mod error;
pub mod harness;
pub mod planar;
pub mod protocol;
pub mod quad;
pub mod stats;

pub use error::{Error, Result};
