//! Witnessed location zones: ranging, sensing, policy evaluation, quorum
//! attestation and a seeded discrete-event simulator.

pub mod chain;
pub mod channel;
pub mod doc;
pub mod encoding;
pub mod error;
pub mod evidence;
pub mod geometry;
pub mod merkle;
pub mod policy;
pub mod sensing;
pub mod stats;
pub mod witness;
pub mod sim;
