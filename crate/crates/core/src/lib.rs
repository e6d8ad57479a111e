//! Maximum hands-off control for linear time-invariant plants.
//!
//! The crate synthesizes controls that steer `ż = F z + G u` between fixed
//! endpoints over a fixed horizon while staying at exactly zero for as long
//! as possible (minimal L0 support), certifies candidate trajectories
//! against the nonsmooth maximum principle, and solves the L1 relaxation as
//! an exactly discretized linear program for comparison.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::too_many_arguments,
    clippy::needless_range_loop
)]

pub mod certify;
pub mod control_law;
pub mod error;
pub mod fixtures;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod nelder_mead;
pub mod sim;
pub mod synth;

pub use certify::{certify, CertificateReport, Tolerances};
pub use control_law::{AdjointParams, Eta};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{AdmissibleSet, CostReport, PiecewiseConstantControl, Problem, Trajectory};
pub use synth::{synth_l0, SynthOptions, SynthResult};
