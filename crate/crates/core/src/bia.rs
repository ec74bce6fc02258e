//! Blind interference alignment over one supersymbol.
//!
//! Transmit antenna 1 sends `s11` on `v1` and `s12` on `v2`; antenna 2 sends
//! `s21` on `u1` and `s22` on `u2`. Receiver 1 wants `(s12, s22)` and
//! receiver 2 wants `(s11, s21)`. With the fixed 0/1 beamformers of a type-Z
//! block, the two interfering streams at each receiver land on one common
//! line whatever the channel values are, leaving a clean 2-D subspace for the
//! two desired streams.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fading::{complex_gaussian, ChannelProcess, ChannelVector, CoherenceSchedule};
use crate::seeding::{keyed_rng, Domain};
use crate::zpattern::{DecompositionPlan, Orientation, ZBlock};
use crate::{Error, Result};

/// Condition number above which an effective channel counts as singular.
pub const MAX_CONDITION: f64 = 1e12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub type Vec3 = Vector3<Complex64>;

/// The four 0/1 signaling vectors of one supersymbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamformerSet {
    pub v1: [u8; 3],
    pub v2: [u8; 3],
    pub u1: [u8; 3],
    pub u2: [u8; 3],
}

const FRONT: [u8; 3] = [1, 1, 0];
const BACK: [u8; 3] = [0, 1, 1];

/// Blind beamformers for a type-Z orientation. No channel value is read.
pub fn beamformers(orientation: Orientation) -> Result<BeamformerSet> {
    let (first, second) = match orientation {
        Orientation::Right => (FRONT, BACK),
        Orientation::Left => (BACK, FRONT),
        Orientation::NotZ => return Err(Error::NotAZPattern),
    };
    Ok(BeamformerSet {
        v1: first,
        v2: second,
        u1: first,
        u2: second,
    })
}

fn to_vec3(v: [u8; 3]) -> Vec3 {
    Vec3::from_iterator(v.iter().map(|&x| Complex64::new(f64::from(x), 0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolFrame {
    pub s11: Complex64,
    pub s12: Complex64,
    pub s21: Complex64,
    pub s22: Complex64,
}

impl SymbolFrame {
    /// Unit-power complex Gaussian symbols.
    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            s11: complex_gaussian(rng, 1.0),
            s12: complex_gaussian(rng, 1.0),
            s21: complex_gaussian(rng, 1.0),
            s22: complex_gaussian(rng, 1.0),
        }
    }

    /// Symbols meant for `receiver`, in decode order.
    pub fn desired(&self, receiver: Receiver) -> [Complex64; 2] {
        match receiver {
            Receiver::One => [self.s12, self.s22],
            Receiver::Two => [self.s11, self.s21],
        }
    }
}

/// Per-slot antenna signals over the three slots of a supersymbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxSignal {
    pub antenna1: Vec3,
    pub antenna2: Vec3,
}

pub fn transmit(frame: &SymbolFrame, bf: &BeamformerSet) -> TxSignal {
    TxSignal {
        antenna1: to_vec3(bf.v1) * frame.s11 + to_vec3(bf.v2) * frame.s12,
        antenna2: to_vec3(bf.u1) * frame.s21 + to_vec3(bf.u2) * frame.s22,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Receiver {
    One,
    Two,
}

impl Receiver {
    pub fn user_index(self) -> usize {
        match self {
            Receiver::One => 0,
            Receiver::Two => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceivedFrame {
    pub y: Vec3,
    /// Noise variance per complex dimension.
    pub noise_variance: f64,
}

/// Channel vectors of both users at the three slots of a block:
/// `users[j][k] = [h_1j(n_k), h_2j(n_k)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockChannel {
    pub users: [[ChannelVector; 3]; 2],
}

impl BlockChannel {
    pub fn gather(
        process: &ChannelProcess,
        schedules: &[CoherenceSchedule; 2],
        zblock: &ZBlock,
    ) -> Result<Self> {
        let mut users = [[[ZERO; 2]; 3]; 2];
        for (j, per_slot) in users.iter_mut().enumerate() {
            for (k, h) in per_slot.iter_mut().enumerate() {
                *h = process.coefficients_at(&schedules[j], j, zblock.slots[k])?;
            }
        }
        Ok(Self { users })
    }

    /// Receiver-side knowledge of its own channel.
    pub fn csir(&self, receiver: Receiver) -> [ChannelVector; 3] {
        self.users[receiver.user_index()]
    }
}

/// Diagonal action of `H_ij`: antenna `antenna` to the owner of `csir`.
fn diag_apply(csir: &[ChannelVector; 3], antenna: usize, v: &Vec3) -> Vec3 {
    Vec3::new(
        csir[0][antenna] * v[0],
        csir[1][antenna] * v[1],
        csir[2][antenna] * v[2],
    )
}

fn noiseless(csir: &[ChannelVector; 3], tx: &TxSignal) -> Vec3 {
    diag_apply(csir, 0, &tx.antenna1) + diag_apply(csir, 1, &tx.antenna2)
}

/// Received frames at both receivers for a fixed block channel.
pub fn propagate_block(
    channel: &BlockChannel,
    tx: &TxSignal,
    noise_variance: f64,
    noise_seed: u64,
) -> (ReceivedFrame, ReceivedFrame) {
    let receive = |receiver: Receiver| {
        let mut y = noiseless(&channel.csir(receiver), tx);
        if noise_variance > 0.0 {
            let mut rng = keyed_rng(Domain::Noise, noise_seed, receiver.user_index() as u64, 0);
            for z in y.iter_mut() {
                *z += complex_gaussian(&mut rng, noise_variance);
            }
        }
        ReceivedFrame { y, noise_variance }
    };
    (receive(Receiver::One), receive(Receiver::Two))
}

/// `y_j[k] = h_1j(n_k) tx1[k] + h_2j(n_k) tx2[k] + z_j[k]`.
pub fn propagate(
    process: &ChannelProcess,
    schedules: &[CoherenceSchedule; 2],
    zblock: &ZBlock,
    tx: &TxSignal,
    noise_variance: f64,
    noise_seed: u64,
) -> Result<(ReceivedFrame, ReceivedFrame)> {
    let channel = BlockChannel::gather(process, schedules, zblock)?;
    Ok(propagate_block(&channel, tx, noise_variance, noise_seed))
}

/// Sine of the angle between two complex vectors; zero when either vanishes.
///
/// Uses the 2x2 minors `a_i b_k - a_k b_i` so exactly collinear inputs give
/// exactly zero.
pub fn sin_angle(a: &Vec3, b: &Vec3) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let minors: f64 = [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(i, k)| (a[i] * b[k] - a[k] * b[i]).norm_sqr())
        .sum();
    (minors.sqrt() / (na * nb)).min(1.0)
}

/// The two interfering columns seen by `receiver`.
fn interference_columns(
    csir: &[ChannelVector; 3],
    bf: &BeamformerSet,
    receiver: Receiver,
) -> [Vec3; 2] {
    match receiver {
        Receiver::One => [
            diag_apply(csir, 0, &to_vec3(bf.v1)),
            diag_apply(csir, 1, &to_vec3(bf.u1)),
        ],
        Receiver::Two => [
            diag_apply(csir, 0, &to_vec3(bf.v2)),
            diag_apply(csir, 1, &to_vec3(bf.u2)),
        ],
    }
}

/// The two desired columns seen by `receiver`, in decode order.
fn desired_columns(csir: &[ChannelVector; 3], bf: &BeamformerSet, receiver: Receiver) -> [Vec3; 2] {
    match receiver {
        Receiver::One => [
            diag_apply(csir, 0, &to_vec3(bf.v2)),
            diag_apply(csir, 1, &to_vec3(bf.u2)),
        ],
        Receiver::Two => [
            diag_apply(csir, 0, &to_vec3(bf.v1)),
            diag_apply(csir, 1, &to_vec3(bf.u1)),
        ],
    }
}

/// Alignment residual: the larger of the two interference-pair sines.
/// Zero (to rounding) whenever `bf` matches the block orientation.
pub fn alignment_residual(channel: &BlockChannel, bf: &BeamformerSet) -> f64 {
    [Receiver::One, Receiver::Two]
        .iter()
        .map(|&r| {
            let [a, b] = interference_columns(&channel.csir(r), bf, r);
            sin_angle(&a, &b)
        })
        .fold(0.0, f64::max)
}

pub fn check_alignment(
    process: &ChannelProcess,
    schedules: &[CoherenceSchedule; 2],
    zblock: &ZBlock,
    bf: &BeamformerSet,
) -> Result<f64> {
    Ok(alignment_residual(
        &BlockChannel::gather(process, schedules, zblock)?,
        bf,
    ))
}

/// Post-projection view of one receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveChannel {
    /// Maps the desired symbol pair to the projected observation.
    pub g: Matrix2<Complex64>,
    /// Unit vector spanning the interference line, if any interference is
    /// present.
    pub interference_direction: Option<Vec3>,
    /// Orthonormal rows spanning the complement of the interference line.
    pub basis: Matrix2x3<Complex64>,
    pub condition: f64,
}

/// Orthonormal basis (as rows) of the orthogonal complement of unit `q`.
fn complement_basis(q: &Vec3) -> Matrix2x3<Complex64> {
    // Gram-Schmidt on the two coordinate axes least aligned with q.
    let mut axes = [0usize, 1, 2];
    axes.sort_by(|&i, &k| q[i].norm().total_cmp(&q[k].norm()));
    let mut rows: Vec<Vec3> = Vec::with_capacity(2);
    for &axis in &axes[..2] {
        let mut e = Vec3::zeros();
        e[axis] = Complex64::new(1.0, 0.0);
        let mut w = e - q * q.dotc(&e);
        for r in &rows {
            w -= r * r.dotc(&w);
        }
        rows.push(w / Complex64::new(w.norm(), 0.0));
    }
    // Rows of B are conjugated so that B y computes inner products <b_i, y>.
    Matrix2x3::from_rows(&[rows[0].adjoint(), rows[1].adjoint()])
}

fn condition_number(g: &Matrix2<Complex64>) -> f64 {
    let sv = g.singular_values();
    let (max, min) = (sv.max(), sv.min());
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Zero-forcing front end of `receiver` for a block with beamformers `bf`.
pub fn effective_channel(
    csir: &[ChannelVector; 3],
    bf: &BeamformerSet,
    receiver: Receiver,
) -> Result<EffectiveChannel> {
    let [a, b] = interference_columns(csir, bf, receiver);
    let lead = if a.norm() >= b.norm() { a } else { b };
    let lead_norm = lead.norm();
    if lead_norm == 0.0 {
        return Err(Error::SingularEffectiveChannel {
            condition: f64::INFINITY,
        });
    }
    let q = lead / Complex64::new(lead_norm, 0.0);
    let basis = complement_basis(&q);
    let [d1, d2] = desired_columns(csir, bf, receiver);
    let g = Matrix2::from_columns(&[basis * d1, basis * d2]);
    let condition = condition_number(&g);
    if condition.is_nan() || condition > MAX_CONDITION {
        return Err(Error::SingularEffectiveChannel { condition });
    }
    Ok(EffectiveChannel {
        g,
        interference_direction: Some(q),
        basis,
        condition,
    })
}

/// Projects out interference and solves for the desired symbol pair:
/// `(s12, s22)` at receiver 1, `(s11, s21)` at receiver 2.
pub fn zf_decode(
    rx: &ReceivedFrame,
    csir: &[ChannelVector; 3],
    bf: &BeamformerSet,
    receiver: Receiver,
) -> Result<([Complex64; 2], EffectiveChannel)> {
    let eff = effective_channel(csir, bf, receiver)?;
    let projected: Vector2<Complex64> = eff.basis * rx.y;
    let solved = eff
        .g
        .lu()
        .solve(&projected)
        .ok_or(Error::SingularEffectiveChannel {
            condition: f64::INFINITY,
        })?;
    Ok(([solved[0], solved[1]], eff))
}

/// `log2 det(I + snr G G^H)` for a 2x2 effective channel.
pub fn log_det_rate(g: &Matrix2<Complex64>, snr: f64) -> f64 {
    let m = Matrix2::identity() + g * g.adjoint() * Complex64::new(snr, 0.0);
    m.determinant().re.log2()
}

/// Sum rate per slot, `(R1 + R2) / 3`, for a fixed block channel.
pub fn block_sum_rate(channel: &BlockChannel, orientation: Orientation, snr: f64) -> Result<f64> {
    let bf = beamformers(orientation)?;
    let mut total = 0.0;
    for r in [Receiver::One, Receiver::Two] {
        let eff = effective_channel(&channel.csir(r), &bf, r)?;
        total += log_det_rate(&eff.g, snr);
    }
    Ok(total / 3.0)
}

pub fn sum_rate(
    process: &ChannelProcess,
    schedules: &[CoherenceSchedule; 2],
    zblock: &ZBlock,
    snr: f64,
) -> Result<f64> {
    if snr.is_nan() || snr <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "snr must be > 0, got {snr}"
        )));
    }
    block_sum_rate(
        &BlockChannel::gather(process, schedules, zblock)?,
        zblock.orientation,
        snr,
    )
}

/// Single stream `s11` on `v1`, decoded at receiver 2; everything else silent.
pub fn block_single_stream_rate(
    channel: &BlockChannel,
    orientation: Orientation,
    snr: f64,
) -> Result<f64> {
    let bf = beamformers(orientation)?;
    let g = diag_apply(&channel.csir(Receiver::Two), 0, &to_vec3(bf.v1));
    Ok((1.0 + snr * g.norm_squared()).log2() / 3.0)
}

/// Which transmission the slope estimator measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// All four streams with blind alignment.
    Full,
    /// Only `s11`, one symbol per three slots.
    SingleStream,
}

impl Scheme {
    pub fn block_rate(
        self,
        channel: &BlockChannel,
        orientation: Orientation,
        snr: f64,
    ) -> Result<f64> {
        match self {
            Scheme::Full => block_sum_rate(channel, orientation, snr),
            Scheme::SingleStream => block_single_stream_rate(channel, orientation, snr),
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Channel process used for realization `index` of a Monte Carlo run.
pub fn realization_process(base: &ChannelProcess, seed: u64, index: u64) -> ChannelProcess {
    use rand::RngCore;
    let derived = keyed_rng(Domain::Realization, base.seed(), seed, index).next_u64();
    ChannelProcess::new(derived, base.num_users()).expect("base process has users")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DofEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub realizations_used: u64,
    pub singular_skips: u64,
}

/// Mean and standard error of per-realization values, skipping failures.
fn summarize(values: Vec<Result<f64>>) -> Result<(f64, f64, u64, u64)> {
    let mut ok = Vec::with_capacity(values.len());
    let mut skips = 0u64;
    for v in values {
        match v {
            Ok(x) => ok.push(x),
            Err(Error::SingularEffectiveChannel { .. }) => skips += 1,
            Err(e) => return Err(e),
        }
    }
    if ok.is_empty() {
        return Err(Error::InvalidArgument(
            "every realization was singular".into(),
        ));
    }
    let n = ok.len() as f64;
    let mean = ok.iter().sum::<f64>() / n;
    let stderr = if ok.len() > 1 {
        let var = ok.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok((mean, stderr, ok.len() as u64, skips))
}

/// Per-realization mean over plan blocks of `f(channel, orientation)`.
fn over_realizations<F>(
    process: &ChannelProcess,
    schedules: &[CoherenceSchedule; 2],
    plan: &DecompositionPlan,
    realizations: u64,
    seed: u64,
    f: F,
) -> Vec<Result<f64>>
where
    F: Fn(&BlockChannel, Orientation) -> Result<f64> + Sync,
{
    // Collected in index order so the reduction is independent of the
    // thread count.
    (0..realizations)
        .into_par_iter()
        .map(|r| {
            let proc_r = realization_process(process, seed, r);
            let mut acc = 0.0;
            for block in &plan.blocks {
                let channel = BlockChannel::gather(&proc_r, schedules, block)?;
                acc += f(&channel, block.orientation)?;
            }
            Ok(acc / plan.blocks.len() as f64)
        })
        .collect()
}

fn check_monte_carlo_args(plan: &DecompositionPlan, realizations: u64) -> Result<()> {
    if realizations == 0 {
        return Err(Error::InvalidArgument("realizations must be >= 1".into()));
    }
    if plan.blocks.is_empty() {
        return Err(Error::InvalidArgument("plan has no blocks".into()));
    }
    Ok(())
}

/// High-SNR slope of the per-slot rate between two SNR points, averaged over
/// realizations and plan blocks.
#[allow(clippy::too_many_arguments)]
pub fn estimate_dof(
    process: &ChannelProcess,
    schedules: &[CoherenceSchedule; 2],
    plan: &DecompositionPlan,
    snr_low_db: f64,
    snr_high_db: f64,
    realizations: u64,
    seed: u64,
    scheme: Scheme,
) -> Result<DofEstimate> {
    if !(snr_low_db >= 30.0 && snr_high_db > snr_low_db) {
        return Err(Error::InvalidArgument(format!(
            "need snr_high_db > snr_low_db >= 30, got {snr_low_db} and {snr_high_db}"
        )));
    }
    check_monte_carlo_args(plan, realizations)?;
    let (lo, hi) = (db_to_linear(snr_low_db), db_to_linear(snr_high_db));
    let span = hi.log2() - lo.log2();
    let values = over_realizations(process, schedules, plan, realizations, seed, |ch, o| {
        Ok((scheme.block_rate(ch, o, hi)? - scheme.block_rate(ch, o, lo)?) / span)
    });
    let (mean, stderr, used, skips) = summarize(values)?;
    Ok(DofEstimate {
        mean,
        stderr,
        realizations_used: used,
        singular_skips: skips,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub snr_db: f64,
    pub rate_mean: f64,
    pub rate_stderr: f64,
    pub singular_skips: u64,
}

/// Average per-slot rate at each SNR of `grid_db`.
pub fn rate_curve(
    process: &ChannelProcess,
    schedules: &[CoherenceSchedule; 2],
    plan: &DecompositionPlan,
    grid_db: &[f64],
    realizations: u64,
    seed: u64,
    scheme: Scheme,
) -> Result<Vec<RatePoint>> {
    check_monte_carlo_args(plan, realizations)?;
    grid_db
        .iter()
        .map(|&snr_db| {
            let snr = db_to_linear(snr_db);
            let values =
                over_realizations(process, schedules, plan, realizations, seed, |ch, o| {
                    scheme.block_rate(ch, o, snr)
                });
            let (rate_mean, rate_stderr, _, singular_skips) = summarize(values)?;
            Ok(RatePoint {
                snr_db,
                rate_mean,
                rate_stderr,
                singular_skips,
            })
        })
        .collect()
}

/// One CSV row of a DoF experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofRecord {
    #[serde(rename = "N")]
    pub n: u64,
    pub offset: u64,
    pub snr_db_low: f64,
    pub snr_db_high: f64,
    pub realizations: u64,
    pub dof_mean: f64,
    pub dof_stderr: f64,
    pub singular_skips: u64,
}

impl DofRecord {
    pub const CSV_HEADER: &'static str =
        "N,offset,snr_db_low,snr_db_high,realizations,dof_mean,dof_stderr,singular_skips";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{:.6},{}",
            self.n,
            self.offset,
            self.snr_db_low,
            self.snr_db_high,
            self.realizations,
            self.dof_mean,
            self.dof_stderr,
            self.singular_skips
        )
    }
}

/// Numerical rank of the columns of `m` relative to its largest singular
/// value.
pub fn numerical_rank(m: &Matrix3<Complex64>, tol: f64) -> usize {
    let sv = m.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}
