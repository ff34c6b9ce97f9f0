//! Open-system simulation and analysis toolkit for a resonantly driven
//! solid-state quantum emitter: Lindblad dynamics, Rabi and Ramsey
//! experiments, photon statistics, Λ-system spectroscopy and curve fitting.

pub mod error;
pub mod fitkit;
pub mod lambda;
pub mod photostats;
pub mod qdyn;
pub mod ramsey;
pub mod synth;
pub mod tls;
pub mod trace;
pub mod units;

pub use error::{Error, Result};
pub use trace::{linspace, Curve, TimeTrace};
