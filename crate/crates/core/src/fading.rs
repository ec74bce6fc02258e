//! Homogeneous block fading.
//!
//! Each user's channel vector `H_j(n) = [h_1j(n), h_2j(n)]` is constant over
//! coherence blocks of `N` slots. User `j`'s first full block starts at its
//! offset; the slots before it belong to a leading partial block.
//!
//! Block labels are `0` for the leading partial block and `1, 2, ...` for the
//! full blocks, for every offset including zero. Downstream code only ever
//! compares labels for equality, so the constant shift relative to the usual
//! zero-based numbering is harmless.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::seeding::{keyed_rng, Domain};
use crate::{Error, Result};

/// A single user's block-fading time structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoherenceSchedule {
    n: u64,
    offset: u64,
}

impl CoherenceSchedule {
    pub fn new(n: u64, offset: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "coherence length must be >= 1".into(),
            ));
        }
        if offset >= n {
            return Err(Error::InvalidArgument(format!(
                "offset {offset} must be < coherence length {n}"
            )));
        }
        Ok(Self { n, offset })
    }

    /// Slots per coherence block.
    pub fn coherence_len(&self) -> u64 {
        self.n
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    /// Label of the coherence block containing slot `n`.
    pub fn block_id(&self, n: u64) -> BlockIndex {
        if n < self.offset {
            BlockIndex(0)
        } else {
            BlockIndex((n - self.offset) / self.n + 1)
        }
    }
}

/// Label `a` of a coherence block `H'_j(a)`.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct BlockIndex(pub u64);

/// Per-slot channel vector `[h_1j, h_2j]`: coefficients from transmit
/// antennas 1 and 2 to one receiver.
pub type ChannelVector = [Complex64; 2];

/// Deterministic map from `(user, block)` to an i.i.d. unit-variance
/// circularly-symmetric complex Gaussian channel vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelProcess {
    seed: u64,
    num_users: usize,
}

impl ChannelProcess {
    pub fn new(seed: u64, num_users: usize) -> Result<Self> {
        if num_users == 0 {
            return Err(Error::InvalidArgument("need at least one user".into()));
        }
        Ok(Self { seed, num_users })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    /// Channel vector of `user` during coherence block `block`.
    pub fn block_coefficients(&self, user: usize, block: BlockIndex) -> Result<ChannelVector> {
        if user >= self.num_users {
            return Err(Error::InvalidUser {
                user,
                num_users: self.num_users,
            });
        }
        let mut rng = keyed_rng(Domain::Channel, self.seed, user as u64, block.0);
        Ok([
            complex_gaussian(&mut rng, 1.0),
            complex_gaussian(&mut rng, 1.0),
        ])
    }

    /// Channel vector `H_user(n)` at slot `n`.
    pub fn coefficients_at(
        &self,
        schedule: &CoherenceSchedule,
        user: usize,
        n: u64,
    ) -> Result<ChannelVector> {
        self.block_coefficients(user, schedule.block_id(n))
    }
}

/// Circularly-symmetric complex Gaussian with `E|z|^2 = variance`.
pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}
