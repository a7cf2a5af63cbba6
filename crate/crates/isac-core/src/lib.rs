//! Joint design of an active reflecting surface and a dual-function
//! base-station precoder that maximizes a weighted sum of radar and
//! communications SNR.
//!
//! The optimization couples three blocks, updated cyclically per outer
//! iteration until the weighted SNR stops moving:
//!
//! * surface element gains — power iteration on a diagonally loaded,
//!   penalty-coupled pair of gain tracks ([`irs_solver`]),
//! * surface phase shifts — the same split driven through a relaxed
//!   projection that decays onto the M-level phase grid ([`irs_solver`]),
//! * the precoder — power iteration on the loaded, covariance-penalized
//!   quadratic ([`precoder_solver`]).
//!
//! [`runner`] wires the loop together, records per-iteration traces, and
//! drives quantization-level sweeps across seeds.

pub mod irs_solver;
pub mod linalg;
pub mod metrics;
pub mod precoder_solver;
pub mod runner;
pub mod scene;

pub use linalg::CMatrix;
pub use metrics::SnrBreakdown;
pub use runner::{RunResult, SweepSummary};
pub use scene::{ChannelSet, IrsMode, Quantization, ScenarioConfig};
