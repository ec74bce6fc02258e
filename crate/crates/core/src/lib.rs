//! Blind interference alignment (BIA) for the 2-user 2x1 MISO broadcast
//! channel under homogeneous block fading.
//!
//! Both receivers see the same coherence length `N`; only the relative block
//! offset differs. When that offset is large enough, every `3N` slots can be
//! cut into `N` three-slot supersymbols whose block structure lets fixed 0/1
//! beamformers align interference without any channel knowledge at the
//! transmitter, giving 4 symbols per 3 slots.
//!
//! - [`fading`]: coherence schedules and seeded per-block channel draws.
//! - [`zpattern`]: type-Z classification and the `3N`-slot decomposition.
//! - [`bia`]: beamformers, the received-signal model, zero-forcing decoding,
//!   log-det rates and DoF slope estimation.
//! - [`pairing`]: K-user offset combinatorics (exact, enumerated, sampled).
//!
//! The 2-user 2x1 MISO broadcast channel has the same signal model as the
//! 2x2 X channel, so schedules produced here apply there unchanged.

pub mod bia;
pub mod cli;
mod error;
pub mod fading;
pub mod pairing;
pub(crate) mod seeding;
pub mod zpattern;

pub use error::{Error, Result};
