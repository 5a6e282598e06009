//! Exact transient analysis of discrete-time infinite-server queues fed by a
//! batch Markovian arrival process.
//!
//! The customer count at slot `t` is generally non-Markovian when service
//! times follow an arbitrary discrete law, but its generating function still
//! factors into a product of per-slot matrices. This crate computes that
//! product exactly with truncated power-series arithmetic and cross-checks it
//! three independent ways:
//!
//! - [`exact`] — the production engine: per-slot matrix product, distribution
//!   and factorial-moment extraction, closed-form mean/variance, stationary
//!   limit detection, and the memoryless (Bernoulli/geometric) closed forms.
//! - [`oracle`] — a brute-force joint-probability recursion over
//!   (background state, surviving-customer count); slow and obviously correct.
//! - [`sim`] — a reproducible stochastic trajectory sampler with empirical
//!   distributions and standard errors.
//!
//! Supporting modules: [`arrival`] (the batch arrival process), [`service`]
//! (service-time laws and their survival functions), [`poly`] (power-series
//! arithmetic).

pub mod arrival;
pub mod exact;
pub mod oracle;
pub mod poly;
pub mod service;
pub mod sim;

pub use arrival::DBmapModel;
pub use exact::TransientResult;
pub use poly::{PgfVector, Poly};
pub use service::ServiceLaw;
pub use sim::{EmpiricalResult, TrajectoryRecord};
