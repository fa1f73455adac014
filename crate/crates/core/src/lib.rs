//! Permutation index modulation over noncoherent SIMO fading channels:
//! codebook arithmetic, correlated channel sampling, detectors and a
//! reproducible Monte Carlo harness.

// `!(x > 0.0)` is used throughout to reject NaN alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod codebook;
pub mod detect;
pub mod error;
pub mod sim;
pub mod validate;

pub use channel::{BandBases, CorrelationModel, EigenBasis, ReceivedBlock};
pub use codebook::{AmplitudeSet, Codeword, PartitionPolicy};
pub use detect::{Decision, DetectorKind, FirstRound, Receiver};
pub use error::{Error, Result};
pub use sim::{ExperimentSpec, OperatingPoint, SerEstimate, StoppingRule, SweepResult};
