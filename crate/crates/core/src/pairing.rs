//! Pairing probabilities for a K-user 2x1 broadcast network.
//!
//! User 0 has offset 0; the other `K - 1` offsets are i.i.d. uniform on
//! `{0, .., N-1}`, i.e. `K - 1` balls cast into a ring of `N` boxes. The
//! transmitter can serve some pair with BIA iff two offsets are at ring
//! distance at least `ceil(N/3)`.
//!
//! Two counts of the "no usable pair" event are kept side by side: the closed
//! form `f(N, K) = 3 Theta(c, K-2) - 2 Theta(c, K-3)` with `c = ceil(N/3)` and
//! `Theta(a, b) = sum_{i=1..a} i^b`, and an exhaustive count over all ordered
//! offset tuples. They do not agree in general (for `N = 6, K = 3` the
//! closed form gives 5, enumeration gives 7), so nothing here assumes they do.
//! All probability arithmetic is exact; decimals only appear when formatting.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::seeding::{keyed_rng, Domain};
use crate::{Error, Result};

/// Default cap on the number of tuples the exhaustive oracle may visit.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

/// `ceil(N/3)`: the smallest relative offset that admits BIA.
pub fn threshold(n: u64) -> u64 {
    n.div_ceil(3)
}

/// Ring step distance between two offsets.
pub fn ring_distance(n: u64, a: u64, b: u64) -> u64 {
    let d = a.abs_diff(b) % n;
    d.min(n - d)
}

/// `Theta(a, b) = sum_{i=1..a} i^b`.
pub fn theta(a: u64, b: i64) -> Result<BigUint> {
    if a == 0 {
        return Err(Error::OutOfDomain(format!("theta needs a >= 1, got {a}")));
    }
    let exp = u32::try_from(b)
        .map_err(|_| Error::OutOfDomain(format!("theta needs 0 <= b < 2^32, got {b}")))?;
    Ok((1..=a).map(|i| Pow::pow(BigUint::from(i), exp)).sum())
}

/// Closed-form count `3 Theta(c, K-2) - 2 Theta(c, K-3)`.
pub fn f_formula(n: u64, k: u64) -> Result<BigInt> {
    if n == 0 {
        return Err(Error::OutOfDomain("N must be >= 1".into()));
    }
    if k < 3 {
        return Err(Error::OutOfDomain(format!(
            "f(N, K) needs K >= 3 (Theta(., K-3) has a negative exponent), got K = {k}"
        )));
    }
    let c = threshold(n);
    let k = k as i64;
    Ok(BigInt::from(3u8) * BigInt::from(theta(c, k - 2)?)
        - BigInt::from(2u8) * BigInt::from(theta(c, k - 3)?))
}

fn tuple_count(n: u64, k: u64) -> BigUint {
    Pow::pow(BigUint::from(n), (k - 1) as u32)
}

fn ratio(num: BigInt, den: BigUint) -> BigRational {
    BigRational::new(num, BigInt::from(den))
}

/// Lower bound `1 - 3 Theta(c, K-2) / N^(K-1)`, unclamped.
pub fn p_lower_bound(n: u64, k: u64) -> Result<BigRational> {
    if n == 0 || k < 2 {
        return Err(Error::OutOfDomain(format!(
            "need N >= 1 and K >= 2, got N = {n}, K = {k}"
        )));
    }
    let hit = BigInt::from(3u8) * BigInt::from(theta(threshold(n), k as i64 - 2)?);
    Ok(BigRational::one() - ratio(hit, tuple_count(n, k)))
}

fn check_budget(n: u64, k: u64, budget: u64) -> Result<u64> {
    if n == 0 || k < 2 {
        return Err(Error::OutOfDomain(format!(
            "need N >= 1 and K >= 2, got N = {n}, K = {k}"
        )));
    }
    let total = tuple_count(n, k);
    match total.to_u64() {
        Some(t) if t <= budget => Ok(t),
        _ => Err(Error::BudgetExceeded {
            required: total.to_string(),
            budget,
        }),
    }
}

/// Whether every pair of offsets is closer than `ceil(N/3)`.
fn all_close(n: u64, offsets: &[u64]) -> bool {
    let c = threshold(n);
    offsets
        .iter()
        .enumerate()
        .all(|(i, &a)| offsets[i + 1..].iter().all(|&b| ring_distance(n, a, b) < c))
}

const CHUNK: u64 = 1 << 16;

/// Exhaustive count of ordered tuples `(0, o_1, .., o_{K-1})` with no pair at
/// ring distance `>= ceil(N/3)`.
pub fn count_blocked_bruteforce(n: u64, k: u64, budget: u64) -> Result<u64> {
    let total = check_budget(n, k, budget)?;
    let free = (k - 1) as usize;
    let chunks = total.div_ceil(CHUNK);
    let count = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * CHUNK;
            let end = (start + CHUNK).min(total);
            let mut offsets = vec![0u64; free + 1];
            // Decode `start` in base N into offsets[1..], least significant last.
            let mut idx = start;
            for slot in offsets[1..].iter_mut().rev() {
                *slot = idx % n;
                idx /= n;
            }
            let mut hits = 0u64;
            for _ in start..end {
                if all_close(n, &offsets) {
                    hits += 1;
                }
                for slot in offsets[1..].iter_mut().rev() {
                    *slot += 1;
                    if *slot < n {
                        break;
                    }
                    *slot = 0;
                }
            }
            hits
        })
        .sum();
    Ok(count)
}

/// `1 - count / N^(K-1)` with the enumerated count.
pub fn p_exact(n: u64, k: u64, budget: u64) -> Result<BigRational> {
    let blocked = count_blocked_bruteforce(n, k, budget)?;
    Ok(BigRational::one() - ratio(BigInt::from(blocked), tuple_count(n, k)))
}

/// Probability that one uniform offset gives `tau >= ceil(N/3)`:
/// `(N - 2 ceil(N/3) + 1) / N`.
pub fn p_exact_two_user(n: u64) -> Result<BigRational> {
    if n < 3 {
        return Err(Error::OutOfDomain(format!("need N >= 3, got {n}")));
    }
    let good = n + 1 - 2 * threshold(n);
    Ok(BigRational::new(BigInt::from(good), BigInt::from(n)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
    pub hits: u64,
}

/// Fraction of sampled assignments that contain a usable pair. Sample `i`
/// draws from a stream keyed by `(seed, i)`.
pub fn p_montecarlo(n: u64, k: u64, samples: u64, seed: u64) -> Result<MonteCarloEstimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be >= 1".into()));
    }
    if n == 0 || k < 2 {
        return Err(Error::OutOfDomain(format!(
            "need N >= 1 and K >= 2, got N = {n}, K = {k}"
        )));
    }
    let hits: u64 = (0..samples)
        .into_par_iter()
        .map_init(
            || vec![0u64; k as usize],
            |offsets, i| {
                let mut rng = keyed_rng(Domain::Pairing, seed, i, 0);
                for o in offsets[1..].iter_mut() {
                    *o = rng.random_range(0..n);
                }
                u64::from(!all_close(n, offsets))
            },
        )
        .sum();
    let p = hits as f64 / samples as f64;
    Ok(MonteCarloEstimate {
        estimate: p,
        stderr: (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
        hits,
    })
}

/// Offsets of `K` users; user 0 is the reference at offset 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffsetAssignment {
    n: u64,
    offsets: Vec<u64>,
}

impl OffsetAssignment {
    pub fn new(n: u64, offsets: Vec<u64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("N must be >= 1".into()));
        }
        if offsets.len() < 2 {
            return Err(Error::InvalidArgument("need at least two users".into()));
        }
        if offsets[0] != 0 {
            return Err(Error::InvalidArgument(
                "the first user must have offset 0".into(),
            ));
        }
        if let Some(bad) = offsets.iter().find(|&&o| o >= n) {
            return Err(Error::InvalidArgument(format!(
                "offset {bad} must be < N = {n}"
            )));
        }
        Ok(Self { n, offsets })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    pub fn pairwise(&self) -> impl Iterator<Item = PairwiseTau> + '_ {
        let k = self.offsets.len();
        (0..k).flat_map(move |i| {
            (i + 1..k).map(move |j| PairwiseTau {
                i,
                j,
                tau: ring_distance(self.n, self.offsets[i], self.offsets[j]),
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseTau {
    pub i: usize,
    pub j: usize,
    pub tau: u64,
}

/// The usable pair with the largest relative offset; ties go to the
/// lexicographically smallest `(i, j)`.
pub fn select_pair(assignment: &OffsetAssignment) -> Option<PairwiseTau> {
    let c = threshold(assignment.n);
    assignment
        .pairwise()
        .filter(|p| p.tau >= c)
        // `pairwise` yields pairs in lexicographic order; keep the first max.
        .fold(None, |best: Option<PairwiseTau>, p| match best {
            Some(b) if b.tau >= p.tau => Some(b),
            _ => Some(p),
        })
}

/// Formats `r` with exactly `places` decimals, rounding half away from zero.
pub fn to_decimal(r: &BigRational, places: u32) -> String {
    let scale = Pow::pow(BigInt::from(10u8), places);
    let scaled = r.abs() * BigRational::from_integer(scale.clone());
    let rounded = (scaled + BigRational::new(BigInt::one(), BigInt::from(2u8)))
        .floor()
        .to_integer();
    let int_part = &rounded / &scale;
    let frac_part = &rounded % &scale;
    let sign = if r.is_negative() && !rounded.is_zero() {
        "-"
    } else {
        ""
    };
    if places == 0 {
        format!("{sign}{int_part}")
    } else {
        format!(
            "{sign}{int_part}.{frac_part:0>width$}",
            width = places as usize
        )
    }
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn rational_json(r: &BigRational) -> Value {
    json!({ "exact": r.to_string(), "decimal": to_decimal(r, 6) })
}

/// Which estimators a [`pairing_report`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportOptions {
    pub budget: u64,
    pub skip_oracle: bool,
    pub samples: u64,
    pub seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            skip_oracle: false,
            samples: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairingReport {
    pub n: u64,
    pub k: u64,
    /// Closed-form count; absent for `K < 3`.
    pub formula_value: Option<BigInt>,
    /// Enumerated count; absent when skipped.
    pub oracle_count: Option<u64>,
    pub p_exact: Option<BigRational>,
    pub p_lower_bound: BigRational,
    /// Exact two-user probability, present for `K = 2`.
    pub p_two_user: Option<BigRational>,
    pub p_monte_carlo: Option<MonteCarloEstimate>,
}

impl PairingReport {
    /// Whether the closed-form lower bound sits below the enumerated value.
    pub fn bound_holds(&self) -> Option<bool> {
        self.p_exact.as_ref().map(|p| &self.p_lower_bound <= p)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "N": self.n,
            "K": self.k,
            "formulaValue": self.formula_value.as_ref().map(|f| f.to_string()),
            "oracleCount": self.oracle_count,
            "pExact": self.p_exact.as_ref().map(rational_json),
            "pLowerBound": rational_json(&self.p_lower_bound),
            "pTwoUser": self.p_two_user.as_ref().map(rational_json),
            "pMonteCarlo": self.p_monte_carlo,
            "boundHolds": self.bound_holds(),
        })
    }

    pub const CSV_HEADER: &'static str = "N,K,formula,oracle,p_exact,p_exact_decimal,lower_bound,p_two_user,mc_estimate,mc_stderr,mc_samples";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        [
            self.n.to_string(),
            self.k.to_string(),
            opt(self.formula_value.as_ref().map(|f| f.to_string())),
            opt(self.oracle_count.map(|c| c.to_string())),
            opt(self.p_exact.as_ref().map(|p| p.to_string())),
            opt(self.p_exact.as_ref().map(|p| to_decimal(p, 6))),
            to_decimal(&self.p_lower_bound, 6),
            opt(self.p_two_user.as_ref().map(|p| p.to_string())),
            opt(self.p_monte_carlo.map(|m| format!("{:.6}", m.estimate))),
            opt(self.p_monte_carlo.map(|m| format!("{:.6}", m.stderr))),
            opt(self.p_monte_carlo.map(|m| m.samples.to_string())),
        ]
        .join(",")
    }
}

/// Runs every estimator that applies to `(N, K)`. The oracle is skipped only
/// when `skip_oracle` is set; otherwise exceeding the budget is an error.
pub fn pairing_report(n: u64, k: u64, opts: &ReportOptions) -> Result<PairingReport> {
    let p_lower_bound = p_lower_bound(n, k)?;
    let formula_value = if k >= 3 { Some(f_formula(n, k)?) } else { None };
    let (oracle_count, p_exact) = if opts.skip_oracle {
        (None, None)
    } else {
        let count = count_blocked_bruteforce(n, k, opts.budget)?;
        let p = BigRational::one() - ratio(BigInt::from(count), tuple_count(n, k));
        (Some(count), Some(p))
    };
    let p_two_user = if k == 2 && n >= 3 {
        Some(p_exact_two_user(n)?)
    } else {
        None
    };
    let p_monte_carlo = if opts.samples > 0 {
        Some(p_montecarlo(n, k, opts.samples, opts.seed)?)
    } else {
        None
    };
    Ok(PairingReport {
        n,
        k,
        formula_value,
        oracle_count,
        p_exact,
        p_lower_bound,
        p_two_user,
        p_monte_carlo,
    })
}

/// Closed form and enumeration side by side, without asserting equality.
pub fn compare_formula_oracle(n: u64, k: u64, budget: u64) -> Result<PairingReport> {
    if k < 3 {
        return Err(Error::OutOfDomain(format!(
            "comparison needs K >= 3, got {k}"
        )));
    }
    pairing_report(
        n,
        k,
        &ReportOptions {
            budget,
            ..ReportOptions::default()
        },
    )
}

/// One point of a lower-bound-versus-K curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: u64,
    pub k: u64,
    pub lower_bound: BigRational,
    pub exact: Option<BigRational>,
    pub monte_carlo: Option<MonteCarloEstimate>,
}

/// Lower-bound curves for each `N` over `ks`. With `exact`, enumerable points
/// also carry the enumerated probability; with `samples > 0`, a Monte Carlo
/// estimate.
pub fn lower_bound_sweep(
    ns: &[u64],
    ks: &[u64],
    exact: bool,
    opts: &ReportOptions,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(ns.len() * ks.len());
    for &n in ns {
        for &k in ks {
            let lower_bound = p_lower_bound(n, k)?;
            let exact = if exact {
                match p_exact(n, k, opts.budget) {
                    Ok(p) => Some(p),
                    Err(Error::BudgetExceeded { .. }) => None,
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            let monte_carlo = if opts.samples > 0 {
                Some(p_montecarlo(n, k, opts.samples, opts.seed)?)
            } else {
                None
            };
            rows.push(SweepRow {
                n,
                k,
                lower_bound,
                exact,
                monte_carlo,
            });
        }
    }
    Ok(rows)
}
