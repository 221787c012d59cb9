//! Contextual intrusion detection for smart-home event streams.
//!
//! Device status updates are mapped onto the unit interval, folded into
//! full-system snapshots and grouped into fixed-length windows. A recurrent
//! autoencoder trained on benign behavior scores each window by its
//! reconstruction error, and a per-day momentum threshold separates benign
//! events from attacks.
//!
//! The crate is `no_std` (with `alloc`) so the numeric pipeline can run on
//! constrained hubs. File formats, the simulator and the CLI live in the
//! `argus` companion crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod detector;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod preprocess;
pub mod threshold;
pub mod trace;

pub use error::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;
