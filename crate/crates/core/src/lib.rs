//! Stability and delay analysis of slotted non-persistent CSMA with
//! K-exponential backoff, plus a mini-slot simulator to check it against.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod experiments;
pub mod hol;
pub mod lambert;
pub mod params;
pub mod sim;
pub mod stability;

pub use error::{Error, Result};
pub use params::{Cutoff, NetworkParams, Population, Scheme};
