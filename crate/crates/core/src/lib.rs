//! Secure-key modelling for quantum key distribution driven by
//! sub-Poissonian single-photon sources.
//!
//! Everything starts from two measurable source quantities, the brightness
//! `B` (probability of at least one photon per pulse) and the zero-delay
//! autocorrelation `g2`. From those the crate
//!
//! 1. bounds the multi-photon probability and builds a truncated
//!    photon-number distribution ([`photon_stats`]),
//! 2. propagates it through a lossy channel and threshold detectors
//!    ([`link_model`]),
//! 3. estimates single-photon gain and error and evaluates the asymptotic
//!    GLLP key rate for plain BB84 and two-decoy BB84 ([`keyrate`]),
//! 4. optimizes a sender-side attenuator, solves for the maximum distance
//!    and the brightness that maximizes it ([`optimize`]),
//! 5. evaluates `g2` and brightness from coincidence data ([`correlation`])
//!    including temporal post-selection ([`timefilter`]),
//! 6. cross-checks the analytic chain with a seeded, parallel Monte Carlo
//!    simulator ([`mc_oracle`]),
//! 7. turns measured excitation grids into key-rate maps with contour
//!    lines ([`map`]).
//!
//! All computations are pure functions on immutable values.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlation;
pub mod error;
pub mod keyrate;
pub mod link_model;
pub mod map;
pub mod mc_oracle;
pub mod optimize;
pub mod photon_stats;
pub mod search;
pub mod timefilter;

pub use error::{Error, Result, RowIssue};
pub use keyrate::{InsecureReason, Protocol, ProtocolConfig, RateReport};
pub use link_model::{ChannelSpec, DetectionParams, Totals};
pub use photon_stats::{PhotonStats, SourceMeasurement};
