//! Deterministic simulator and library for zone-based NFV orchestration with
//! a diameter signaling data plane.
//!
//! The control plane models an orchestrator that partitions infrastructure
//! into zones, decomposes service templates into per-zone subservices, and
//! composes them back through a publish/discover registry. The data plane
//! models diameter front-end VNFs as single-server FIFO queues in front of a
//! shared user-data repository, which is enough to study performance
//! isolation between diameter interfaces under load.
//!
//! Everything runs on a virtual clock ([`sim::Engine`]); a several-minute
//! workload simulates in seconds and every result is reproducible from a
//! seed.

pub mod agent;
pub mod analysis;
pub mod diameter;
pub mod discovery;
pub mod experiment;
pub mod hss;
pub mod orchestrator;
pub mod sim;
pub mod template;
pub mod workload;

pub use sim::{Engine, RngStream, SimSpan, SimTime};
