//! Type-Z supersymbols and the periodic `3N`-slot decomposition.
//!
//! A slot triple `n1 < n2 < n3` is a type-Z pattern when one user's channel
//! changes only between `n2` and `n3` while the other's changes only between
//! `n1` and `n2` (RIGHT), or the mirror image (LEFT). User 1 always has
//! offset zero; user 2 has offset `offset`.
//!
//! With `tau = min(offset, N - offset)` and `ceil(N/3) <= tau`, the canonical
//! window `[N - tau, 4N - tau)` splits into seven constant-pair segments of
//! lengths `(tau, tau, N-tau, tau, N-tau, tau, N-2tau)`. Four families of
//! blocks draw one slot from each of three segments:
//!
//! | family | count      | segments              | orientation |
//! |--------|------------|-----------------------|-------------|
//! | gamma  | `tau`      | S1, S2, head of S3    | LEFT        |
//! | phi    | `N-2tau`   | rest of S3, S4, S5    | LEFT        |
//! | omega  | `3tau-N`   | rest of S4, S5, S6    | RIGHT       |
//! | theta  | `N-2tau`   | rest of S5, S6, S7    | LEFT        |
//!
//! Offsets above `N/2` reuse the same construction with the users swapped.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::fading::{BlockIndex, CoherenceSchedule};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    #[serde(rename = "RIGHT")]
    Right,
    #[serde(rename = "LEFT")]
    Left,
    #[serde(rename = "NOT_Z")]
    NotZ,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::Right => Orientation::Left,
            Orientation::Left => Orientation::Right,
            Orientation::NotZ => Orientation::NotZ,
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::Right => "RIGHT",
            Orientation::Left => "LEFT",
            Orientation::NotZ => "NOT_Z",
        })
    }
}

/// One three-slot supersymbol of a schedule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZBlock {
    pub slots: [u64; 3],
    pub orientation: Orientation,
    /// Block labels of user 1 and user 2 at the three slots.
    #[serde(skip)]
    pub user_blocks: [[BlockIndex; 3]; 2],
}

impl ZBlock {
    /// Builds a block from its slots, classifying it against the schedules.
    pub fn classify(
        sched1: &CoherenceSchedule,
        sched2: &CoherenceSchedule,
        slots: [u64; 3],
    ) -> Result<Self> {
        let orientation = classify_triple(sched1, sched2, slots);
        if orientation == Orientation::NotZ {
            return Err(Error::NotAZPattern);
        }
        Ok(Self {
            slots,
            orientation,
            user_blocks: [
                slots.map(|n| sched1.block_id(n)),
                slots.map(|n| sched2.block_id(n)),
            ],
        })
    }

    pub fn shifted(&self, sched1: &CoherenceSchedule, sched2: &CoherenceSchedule, by: u64) -> Self {
        let slots = self.slots.map(|n| n + by);
        Self {
            slots,
            orientation: self.orientation,
            user_blocks: [
                slots.map(|n| sched1.block_id(n)),
                slots.map(|n| sched2.block_id(n)),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyCounts {
    pub gamma: u64,
    pub phi: u64,
    pub omega: u64,
    pub theta: u64,
}

impl FamilyCounts {
    /// Family sizes `(tau, N-2tau, 3tau-N, N-2tau)` for a feasible `(N, tau)`.
    pub fn expected(n: u64, tau: u64) -> Option<Self> {
        let phi = n.checked_sub(2 * tau)?;
        let omega = (3 * tau).checked_sub(n)?;
        Some(Self {
            gamma: tau,
            phi,
            omega,
            theta: phi,
        })
    }

    pub fn total(&self) -> u64 {
        self.gamma + self.phi + self.omega + self.theta
    }
}

/// One period of a BIA schedule: `N` type-Z blocks tiling `3N` slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionPlan {
    #[serde(rename = "N")]
    pub n: u64,
    pub offset: u64,
    pub period: u64,
    pub tau: u64,
    #[serde(rename = "familyCounts")]
    pub family_counts: FamilyCounts,
    pub blocks: Vec<ZBlock>,
}

impl DecompositionPlan {
    /// Slots covered by this period.
    pub fn window(&self) -> Range<u64> {
        let start = window_start(self.n, self.offset, self.period);
        start..start + 3 * self.n
    }

    /// Schedules of user 1 (offset 0) and user 2 this plan was built for.
    pub fn schedules(&self) -> Result<[CoherenceSchedule; 2]> {
        Ok([
            CoherenceSchedule::new(self.n, 0)?,
            CoherenceSchedule::new(self.n, self.offset)?,
        ])
    }
}

/// Relative offset `tau = min(offset, N - offset)`.
///
/// Panics if `offset >= n`.
pub fn tau_of(n: u64, offset: u64) -> u64 {
    assert!(offset < n, "offset {offset} must be < N = {n}");
    offset.min(n - offset)
}

/// Smallest relative offset that admits a decomposition, `ceil(N/3)`.
pub fn min_feasible_tau(n: u64) -> u64 {
    n.div_ceil(3)
}

/// Whether `(N, offset)` decomposes into type-Z blocks. `tau <= floor(N/2)`
/// always holds, so only the lower bound is tested.
pub fn feasible(n: u64, offset: u64) -> bool {
    offset < n && min_feasible_tau(n) <= tau_of(n, offset)
}

/// Classifies a slot triple from both users' block labels.
pub fn classify_triple(
    sched1: &CoherenceSchedule,
    sched2: &CoherenceSchedule,
    [n1, n2, n3]: [u64; 3],
) -> Orientation {
    if !(n1 < n2 && n2 < n3) {
        return Orientation::NotZ;
    }
    let b1 = [n1, n2, n3].map(|n| sched1.block_id(n));
    let b2 = [n1, n2, n3].map(|n| sched2.block_id(n));
    let late_change = |b: &[BlockIndex; 3]| b[0] == b[1] && b[1] != b[2];
    let early_change = |b: &[BlockIndex; 3]| b[0] != b[1] && b[1] == b[2];
    if late_change(&b1) && early_change(&b2) {
        Orientation::Right
    } else if early_change(&b1) && late_change(&b2) {
        Orientation::Left
    } else {
        Orientation::NotZ
    }
}

fn window_start(n: u64, offset: u64, period: u64) -> u64 {
    let tau = offset.min(n - offset);
    // Mirrored case maps canonical slot m to m + offset - N, and the
    // canonical window starts at N - tau = offset.
    let canonical = n - tau;
    let start = if offset <= n / 2 {
        canonical
    } else {
        canonical + offset - n
    };
    start + 3 * n * period
}

/// Canonical construction with the zero-offset user on top and the other
/// user at offset `tau`; returns `(slots, orientation)` of the top/bottom
/// labelling.
fn canonical_blocks(n: u64, tau: u64, period: u64) -> Vec<([u64; 3], Orientation)> {
    let phi = n - 2 * tau;
    let omega = 3 * tau - n;
    let s1 = n - tau + 3 * n * period;
    let s2 = s1 + tau;
    let s3 = s2 + tau;
    let s4 = s3 + (n - tau);
    let s5 = s4 + tau;
    let s6 = s5 + (n - tau);
    let s7 = s6 + tau;

    let mut out = Vec::with_capacity(n as usize);
    out.extend((0..tau).map(|k| ([s1 + k, s2 + k, s3 + k], Orientation::Left)));
    out.extend((0..phi).map(|k| ([s3 + tau + k, s4 + k, s5 + k], Orientation::Left)));
    out.extend((0..omega).map(|k| ([s4 + phi + k, s5 + phi + k, s6 + k], Orientation::Right)));
    out.extend((0..phi).map(|k| ([s5 + tau + k, s6 + omega + k, s7 + k], Orientation::Left)));
    out
}

/// Decomposes period `period` of the `(N, offset)` channel into `N` type-Z
/// blocks.
pub fn decompose_period(n: u64, offset: u64, period: u64) -> Result<DecompositionPlan> {
    if n == 0 || offset >= n {
        return Err(Error::InvalidArgument(format!(
            "need N >= 1 and 0 <= offset < N, got N = {n}, offset = {offset}"
        )));
    }
    let tau = tau_of(n, offset);
    if !feasible(n, offset) {
        return Err(Error::InfeasibleOffset {
            n,
            offset,
            tau,
            min_tau: min_feasible_tau(n),
        });
    }
    let sched1 = CoherenceSchedule::new(n, 0)?;
    let sched2 = CoherenceSchedule::new(n, offset)?;
    let mirrored = offset > n / 2;

    let blocks = canonical_blocks(n, tau, period)
        .into_iter()
        .map(|(slots, orientation)| {
            let (slots, expected) = if mirrored {
                // Users swap roles; user 2 is the zero-offset "top" link on a
                // grid shifted by `offset - N`.
                (slots.map(|m| m + offset - n), orientation.flipped())
            } else {
                (slots, orientation)
            };
            let block = ZBlock::classify(&sched1, &sched2, slots)?;
            debug_assert_eq!(block.orientation, expected);
            Ok(block)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DecompositionPlan {
        n,
        offset,
        period,
        tau,
        family_counts: FamilyCounts::expected(n, tau).expect("feasible tau"),
        blocks,
    })
}

/// First problem found by [`validate_plan`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ScheduleMismatch,
    BlockCount {
        expected: u64,
        found: usize,
    },
    /// A window slot was used `uses` times, or a slot outside the window
    /// appeared.
    Coverage {
        slot: u64,
        uses: usize,
    },
    Classification {
        block: usize,
        declared: Orientation,
        actual: Orientation,
    },
    FamilyCounts {
        expected: Option<FamilyCounts>,
        found: FamilyCounts,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationReport {
    Pass,
    Fail(Violation),
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        matches!(self, ValidationReport::Pass)
    }
}

/// Checks slot coverage, per-block classification and family counts.
pub fn validate_plan(
    plan: &DecompositionPlan,
    sched1: &CoherenceSchedule,
    sched2: &CoherenceSchedule,
) -> ValidationReport {
    use ValidationReport::Fail;

    if sched1.coherence_len() != plan.n
        || sched2.coherence_len() != plan.n
        || sched1.offset() != 0
        || sched2.offset() != plan.offset
    {
        return Fail(Violation::ScheduleMismatch);
    }
    if plan.blocks.len() as u64 != plan.n {
        return Fail(Violation::BlockCount {
            expected: plan.n,
            found: plan.blocks.len(),
        });
    }

    let window = plan.window();
    let mut uses: BTreeMap<u64, usize> = window.clone().map(|n| (n, 0)).collect();
    for block in &plan.blocks {
        for &slot in &block.slots {
            match uses.get_mut(&slot) {
                Some(count) => *count += 1,
                None => return Fail(Violation::Coverage { slot, uses: 1 }),
            }
        }
    }
    if let Some((&slot, &count)) = uses.iter().find(|(_, &c)| c != 1) {
        return Fail(Violation::Coverage { slot, uses: count });
    }

    for (i, block) in plan.blocks.iter().enumerate() {
        let actual = classify_triple(sched1, sched2, block.slots);
        if actual != block.orientation || actual == Orientation::NotZ {
            return Fail(Violation::Classification {
                block: i,
                declared: block.orientation,
                actual,
            });
        }
    }

    let expected = FamilyCounts::expected(plan.n, plan.tau);
    if plan.tau != tau_of(plan.n, plan.offset)
        || expected != Some(plan.family_counts)
        || plan.family_counts.total() != plan.n
    {
        return Fail(Violation::FamilyCounts {
            expected,
            found: plan.family_counts,
        });
    }
    ValidationReport::Pass
}
