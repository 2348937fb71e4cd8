//! System-level simulator for cellular-connected VR over mmWave.
//!
//! The crate is organised bottom-up:
//!
//! * [`qos`] derives VR bit-rate and latency requirements per technology phase.
//! * [`geometry`] holds building footprints and answers line-of-sight queries.
//! * [`channel`] turns geometry into path loss, SINR and achievable rate.
//! * [`traffic`] slices video frames into fixed-size bitplanes with deadlines.
//! * [`scheduler`] runs per-TTI round-robin / proportional-fair allocation.
//! * [`engine`] binds everything into a deterministic TTI loop.
//! * [`experiment`] parses sweep configurations and writes result CSVs.
//!
//! The numeric kernels (geometry predicates, path loss, SINR, PF metric) are
//! generic over [`Scalar`]; the simulator itself runs in `f64` and the aliases
//! below pin the concrete types it uses.

// `!(x > 0.0)` guards are deliberate: they reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod qos;
pub mod rng;
pub mod scalar;
pub mod scheduler;
pub mod traffic;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// 2D point in meters.
pub type Point = geometry::Point2<f64>;
/// 2D point plus antenna height.
pub type Position = geometry::Position<f64>;
pub type Polygon = geometry::Polygon<f64>;
pub type Rect = geometry::Rect<f64>;
pub type BuildingMap = geometry::BuildingMap<f64>;
pub type PathProfile = geometry::PathProfile<f64>;

/// Exact rational bit rate in bits per second.
pub type ExactRate = num_rational::Ratio<u64>;
