//! Transceiver design: the alternating least-squares aligner in reduced
//! variables, the classical eigenvector baseline, and the metrics both share.

mod classical;
mod gia;

use std::fmt;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{GiaError, Result};
use crate::network::{gaussian_matrix, AlignmentSet, ChannelState, Link, NetworkConfig, TransceiverSet};
use crate::numerics::{numerical_rank, ComplexMatrix};

pub use classical::run_classical_baseline;
pub use gia::{receiver_update, run_gia, transmitter_update};

/// A run passes once the normalized interference drops to this level.
pub const PASS_THRESHOLD_DB: f64 = -60.0;

/// Default number of rounds (receiver sweep plus transmitter sweep).
pub const DEFAULT_MAX_ITERS: usize = 5000;

/// Relative leakage change over one round below which a run counts as stalled.
pub const STALL_REL_CHANGE: f64 = 1e-12;

/// Default absolute residual tolerance for [`verify_solution`].
pub const DEFAULT_VERIFY_TOL: f64 = 1e-6;

/// Default absolute leakage at which a run stops as converged. Residual entries
/// are then below 1e-8, while the leakage is still above the rounding floor of
/// large reduced transceivers.
pub const DEFAULT_LEAK_TOL: f64 = 1e-16;

/// Free blocks below the identity in `U_k = [I; U~_k]` and `V_j = [I; V~_j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTransceivers {
    /// `(N_k - d_k) x d_k`
    pub decoders: Vec<ComplexMatrix>,
    /// `(M_j - d_j) x d_j`
    pub precoders: Vec<ComplexMatrix>,
}

impl ReducedTransceivers {
    pub fn zeros(cfg: &NetworkConfig) -> Self {
        ReducedTransceivers {
            decoders: (0..cfg.users).map(|k| ComplexMatrix::zeros(cfg.rx_free(k), cfg.streams[k])).collect(),
            precoders: (0..cfg.num_tx()).map(|j| ComplexMatrix::zeros(cfg.tx_free(j), cfg.streams[j])).collect(),
        }
    }

    /// i.i.d. `CN(0, 1)` entries; decoders are drawn first, then precoders.
    pub fn random<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> Self {
        let decoders = (0..cfg.users).map(|k| gaussian_matrix(rng, cfg.rx_free(k), cfg.streams[k])).collect();
        let precoders = (0..cfg.num_tx()).map(|j| gaussian_matrix(rng, cfg.tx_free(j), cfg.streams[j])).collect();
        ReducedTransceivers { decoders, precoders }
    }

    pub fn check_shapes(&self, cfg: &NetworkConfig) -> Result<()> {
        if self.decoders.len() != cfg.users || self.precoders.len() != cfg.num_tx() {
            return Err(GiaError::ShapeMismatch(format!(
                "expected {} reduced decoders and {} reduced precoders, got {} and {}",
                cfg.users,
                cfg.num_tx(),
                self.decoders.len(),
                self.precoders.len()
            )));
        }
        for (k, u) in self.decoders.iter().enumerate() {
            if u.shape() != (cfg.rx_free(k), cfg.streams[k]) {
                return Err(GiaError::ShapeMismatch(format!("reduced U_{} is {:?}", k + 1, u.shape())));
            }
        }
        for (j, v) in self.precoders.iter().enumerate() {
            if v.shape() != (cfg.tx_free(j), cfg.streams[j]) {
                return Err(GiaError::ShapeMismatch(format!("reduced V_{} is {:?}", j + 1, v.shape())));
            }
        }
        Ok(())
    }
}

fn lift(reduced: &ComplexMatrix) -> ComplexMatrix {
    let d = reduced.cols();
    let mut out = ComplexMatrix::zeros(d + reduced.rows(), d);
    out.set_block(0, 0, &ComplexMatrix::identity(d));
    out.set_block(d, 0, reduced);
    out
}

/// `U_k = [I; U~_k]`, `V_j = [I; V~_j]`.
pub fn lift_transceivers(rt: &ReducedTransceivers) -> TransceiverSet {
    TransceiverSet {
        decoders: rt.decoders.iter().map(lift).collect(),
        precoders: rt.precoders.iter().map(lift).collect(),
    }
}

/// Residual blocks `U_k^H H_kj V_j` (each `d_k x d_j`), in alignment order.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub blocks: Vec<(Link, ComplexMatrix)>,
}

impl Residuals {
    /// Entry `(p, q)` of link `(k, j)`, all 0-based.
    pub fn get(&self, k: usize, j: usize, p: usize, q: usize) -> Option<Complex64> {
        self.blocks
            .iter()
            .find(|(l, _)| l.rx == k && l.tx == j)
            .and_then(|(_, m)| (p < m.rows() && q < m.cols()).then(|| m[(p, q)]))
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(|(_, m)| m.max_abs()).fold(0.0, f64::max)
    }

    pub fn total_power(&self) -> f64 {
        self.blocks.iter().map(|(_, m)| m.norm_sq()).sum()
    }
}

/// `H_kj(rows, cols)` split into the four blocks around `(d_k, d_j)`.
pub(crate) struct LinkBlocks {
    pub top_left: ComplexMatrix,
    pub top_right: ComplexMatrix,
    pub bottom_left: ComplexMatrix,
    pub bottom_right: ComplexMatrix,
}

impl LinkBlocks {
    pub fn new(cfg: &NetworkConfig, channel: &ChannelState, l: Link) -> Self {
        let (dk, dj) = (cfg.streams[l.rx], cfg.streams[l.tx]);
        let (nf, mf) = (cfg.rx_free(l.rx), cfg.tx_free(l.tx));
        let h = channel.get(l.rx, l.tx);
        LinkBlocks {
            top_left: h.block(0, 0, dk, dj),
            top_right: h.block(0, dj, dk, mf),
            bottom_left: h.block(dk, 0, nf, dj),
            bottom_right: h.block(dk, dj, nf, mf),
        }
    }

    /// `g = H11 + H12 V~ + U~^H (H21 + H22 V~)`
    pub fn residual(&self, u: &ComplexMatrix, v: &ComplexMatrix) -> ComplexMatrix {
        let mut top = self.top_left.clone();
        *top += self.top_right.inner() * v.inner();
        let mut bottom = self.bottom_left.clone();
        *bottom += self.bottom_right.inner() * v.inner();
        *top += u.adjoint().inner() * bottom.inner();
        top
    }
}

fn check_inputs(cfg: &NetworkConfig, channel: &ChannelState, rt: &ReducedTransceivers) -> Result<()> {
    if !channel.matches(cfg) {
        return Err(GiaError::ShapeMismatch("channel does not match the configuration".into()));
    }
    rt.check_shapes(cfg)
}

/// Entries of `U_k^H H_kj V_j` for every aligned link, with `U`, `V` lifted from `rt`.
pub fn residual_f(
    cfg: &NetworkConfig,
    alignment: &AlignmentSet,
    channel: &ChannelState,
    rt: &ReducedTransceivers,
) -> Result<Residuals> {
    check_inputs(cfg, channel, rt)?;
    let blocks = alignment
        .iter()
        .map(|l| {
            let g = LinkBlocks::new(cfg, channel, l).residual(&rt.decoders[l.rx], &rt.precoders[l.tx]);
            (l, g)
        })
        .collect();
    Ok(Residuals { blocks })
}

/// Interference leakage: sum of `|U_k^H H_kj V_j|_F^2` over the alignment set.
pub fn leakage(
    cfg: &NetworkConfig,
    alignment: &AlignmentSet,
    channel: &ChannelState,
    rt: &ReducedTransceivers,
) -> Result<f64> {
    Ok(residual_f(cfg, alignment, channel, rt)?.total_power())
}

/// Leakage of arbitrary (not necessarily identity-normalized) transceivers.
pub fn transceiver_leakage(alignment: &AlignmentSet, channel: &ChannelState, ts: &TransceiverSet) -> f64 {
    alignment
        .iter()
        .map(|l| {
            let hv = channel.get(l.rx, l.tx).inner() * ts.precoders[l.tx].inner();
            (ts.decoders[l.rx].adjoint().inner() * hv).iter().map(|z| z.norm_sqr()).sum::<f64>()
        })
        .sum()
}

/// `10 log10(leakage_t / leakage_0)`.
pub fn normalized_interference_db(initial_leakage: f64, leakage_t: f64) -> Result<f64> {
    if initial_leakage == 0.0 {
        return Err(GiaError::DegenerateInstance);
    }
    if initial_leakage.is_nan() || initial_leakage < 0.0 || leakage_t.is_nan() || leakage_t < 0.0 {
        return Err(GiaError::InvalidInput(format!(
            "leakages must be nonnegative, got {initial_leakage} and {leakage_t}"
        )));
    }
    Ok(10.0 * (leakage_t / initial_leakage).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Tolerance,
    MaxIters,
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub leakage: f64,
    pub i_db: f64,
}

/// Per-round leakage history of one run; row `t = 0` is the initial point.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl RunTrace {
    pub fn initial_leakage(&self) -> f64 {
        self.rows[0].leakage
    }

    pub fn final_row(&self) -> TraceRow {
        *self.rows.last().expect("trace always has the t = 0 row")
    }

    pub fn final_i_db(&self) -> f64 {
        self.final_row().i_db
    }

    /// Completed rounds.
    pub fn rounds(&self) -> usize {
        self.final_row().t
    }

    pub fn min_i_db(&self) -> f64 {
        self.rows.iter().map(|r| r.i_db).fold(f64::INFINITY, f64::min)
    }

    /// Whether the normalized interference reached `threshold_db` at some round.
    /// A run that starts with zero leakage is aligned from the outset.
    pub fn reached(&self, threshold_db: f64) -> bool {
        self.initial_leakage() == 0.0 || self.min_i_db() <= threshold_db
    }

    /// `t,leakage,I_dB` with one row per round.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,leakage,I_dB\n");
        for r in &self.rows {
            s.push_str(&format!("{},{:e},{}\n", r.t, r.leakage, r.i_db));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Upper bound on rounds.
    pub max_iters: usize,
    /// Stop once the leakage falls below this absolute value.
    pub leak_tol: f64,
    /// Optionally stop as soon as the normalized interference reaches this level.
    pub stop_db: Option<f64>,
    /// Seed of the random initial point.
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { max_iters: DEFAULT_MAX_ITERS, leak_tol: DEFAULT_LEAK_TOL, stop_db: None, seed: 0 }
    }
}

/// Shared round loop: records leakage and applies the stopping rules.
pub(crate) struct TraceRecorder {
    rows: Vec<TraceRow>,
    opts: RunOptions,
}

pub(crate) enum Step {
    Continue,
    Stop(StopReason),
}

impl TraceRecorder {
    pub fn start(initial_leakage: f64, opts: RunOptions) -> (Self, Step) {
        let rec = TraceRecorder { rows: vec![TraceRow { t: 0, leakage: initial_leakage, i_db: 0.0 }], opts };
        let step = if initial_leakage < opts.leak_tol || initial_leakage == 0.0 {
            Step::Stop(StopReason::Tolerance)
        } else if opts.max_iters == 0 {
            Step::Stop(StopReason::MaxIters)
        } else {
            Step::Continue
        };
        (rec, step)
    }

    pub fn record(&mut self, leakage: f64) -> Step {
        let prev = self.rows.last().expect("t = 0 row").leakage;
        let l0 = self.rows[0].leakage;
        let t = self.rows.len();
        let i_db = 10.0 * (leakage / l0).log10();
        self.rows.push(TraceRow { t, leakage, i_db });
        if leakage < self.opts.leak_tol || self.opts.stop_db.is_some_and(|db| i_db <= db) {
            Step::Stop(StopReason::Tolerance)
        } else if prev == 0.0 || ((prev - leakage) / prev).abs() < STALL_REL_CHANGE {
            Step::Stop(StopReason::Stalled)
        } else if t >= self.opts.max_iters {
            Step::Stop(StopReason::MaxIters)
        } else {
            Step::Continue
        }
    }

    pub fn finish(self, reason: StopReason) -> RunTrace {
        RunTrace { rows: self.rows, converged: reason == StopReason::Tolerance, stop_reason: reason }
    }
}

/// Outcome of [`verify_solution`].
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub max_residual: f64,
    pub tol: f64,
    /// Receivers (0-based) whose `U_k^H H_kk V_k` is rank deficient.
    pub direct_rank_failures: Vec<usize>,
    /// Jammers (0-based transmitter index) whose precoder is rank deficient.
    pub jammer_rank_failures: Vec<usize>,
}

impl VerificationReport {
    pub fn residual_ok(&self) -> bool {
        self.max_residual <= self.tol
    }

    pub fn passed(&self) -> bool {
        self.residual_ok() && self.direct_rank_failures.is_empty() && self.jammer_rank_failures.is_empty()
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        writeln!(f, "verification = {status}")?;
        writeln!(
            f,
            "max_residual = {:e} (tol {:e}) {}",
            self.max_residual,
            self.tol,
            if self.residual_ok() { "ok" } else { "FAILED" }
        )?;
        let list = |v: &[usize]| v.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",");
        if !self.direct_rank_failures.is_empty() {
            writeln!(f, "direct_link_rank_failed = {}", list(&self.direct_rank_failures))?;
        }
        if !self.jammer_rank_failures.is_empty() {
            writeln!(f, "jammer_precoder_rank_failed = {}", list(&self.jammer_rank_failures))?;
        }
        Ok(())
    }
}

/// Checks zero forcing on the alignment set, full-rank direct links, and
/// full-rank jammer precoders.
pub fn verify_solution(
    cfg: &NetworkConfig,
    alignment: &AlignmentSet,
    channel: &ChannelState,
    ts: &TransceiverSet,
    tol: f64,
) -> Result<VerificationReport> {
    if !channel.matches(cfg) {
        return Err(GiaError::ShapeMismatch("channel does not match the configuration".into()));
    }
    ts.check_shapes(cfg)?;
    let mut max_residual: f64 = 0.0;
    for l in alignment.iter() {
        let g = ts.decoders[l.rx].adjoint().matmul(channel.get(l.rx, l.tx)).matmul(&ts.precoders[l.tx]);
        max_residual = max_residual.max(g.max_abs());
    }
    let mut direct_rank_failures = Vec::new();
    for k in 0..cfg.users {
        let s = ts.decoders[k].adjoint().matmul(channel.get(k, k)).matmul(&ts.precoders[k]);
        if !s.is_finite() || numerical_rank(&s, None)?.rank != cfg.streams[k] {
            direct_rank_failures.push(k);
        }
    }
    let mut jammer_rank_failures = Vec::new();
    for j in cfg.users..cfg.num_tx() {
        let v = &ts.precoders[j];
        if !v.is_finite() || numerical_rank(v, None)?.rank != cfg.streams[j] {
            jammer_rank_failures.push(j);
        }
    }
    if !max_residual.is_finite() {
        max_residual = f64::INFINITY;
    }
    Ok(VerificationReport { max_residual, tol, direct_rank_failures, jammer_rank_failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::generate_channel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cz(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn lift_examples() {
        let rt = ReducedTransceivers { decoders: vec![ComplexMatrix::zeros(0, 2)], precoders: vec![] };
        let ts = lift_transceivers(&rt);
        assert_eq!(ts.decoders[0], ComplexMatrix::identity(2));

        let rt = ReducedTransceivers {
            decoders: vec![ComplexMatrix::from_row_slice(1, 1, &[cz(2.0, 1.0)])],
            precoders: vec![],
        };
        let u = &lift_transceivers(&rt).decoders[0];
        assert_eq!(u.shape(), (2, 1));
        assert_eq!(u[(0, 0)], cz(1.0, 0.0));
        assert_eq!(u[(1, 0)], cz(2.0, 1.0));
    }

    #[test]
    fn lift_round_trip() {
        let c = NetworkConfig::new(2, 1, vec![4, 3, 5], vec![5, 2], vec![2, 1, 3]).unwrap();
        let rt = ReducedTransceivers::random(&c, &mut ChaCha8Rng::seed_from_u64(1));
        let ts = lift_transceivers(&rt);
        ts.check_shapes(&c).unwrap();
        for (k, u) in ts.decoders.iter().enumerate() {
            let d = c.streams[k];
            assert_eq!(u.block(0, 0, d, d), ComplexMatrix::identity(d));
            assert_eq!(u.block(d, 0, u.rows() - d, d), rt.decoders[k]);
        }
        for (j, v) in ts.precoders.iter().enumerate() {
            let d = c.streams[j];
            assert_eq!(v.block(d, 0, v.rows() - d, d), rt.precoders[j]);
        }
    }

    #[test]
    fn residual_at_zero_is_channel_entry() {
        let c = NetworkConfig::symmetric(3, 4, 3, 2).unwrap();
        let a = AlignmentSet::all(&c);
        let h = generate_channel(&c, 4);
        let res = residual_f(&c, &a, &h, &ReducedTransceivers::zeros(&c)).unwrap();
        for l in a.iter() {
            for p in 0..2 {
                for q in 0..2 {
                    assert_eq!(res.get(l.rx, l.tx, p, q).unwrap(), h.get(l.rx, l.tx)[(p, q)]);
                }
            }
        }
    }

    #[test]
    fn residual_vanishes_on_zero_cross_channels() {
        let c = NetworkConfig::symmetric(3, 4, 3, 2).unwrap();
        let a = AlignmentSet::all(&c);
        let mut h = generate_channel(&c, 4);
        for l in a.iter() {
            let (r, cc) = h.get(l.rx, l.tx).shape();
            *h.get_mut(l.rx, l.tx) = ComplexMatrix::zeros(r, cc);
        }
        let rt = ReducedTransceivers::random(&c, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(residual_f(&c, &a, &h, &rt).unwrap().max_abs(), 0.0);
        assert_eq!(leakage(&c, &a, &h, &rt).unwrap(), 0.0);
    }

    #[test]
    fn residual_matches_lifted_product() {
        let c = NetworkConfig::new(3, 1, vec![5, 4, 6, 3], vec![4, 6, 5], vec![2, 1, 3, 1]).unwrap();
        let a = AlignmentSet::all(&c);
        let h = generate_channel(&c, 8);
        let rt = ReducedTransceivers::random(&c, &mut ChaCha8Rng::seed_from_u64(3));
        let ts = lift_transceivers(&rt);
        let res = residual_f(&c, &a, &h, &rt).unwrap();
        let mut by_pairs = 0.0;
        for (l, g) in &res.blocks {
            let direct = ts.decoders[l.rx].adjoint().matmul(h.get(l.rx, l.tx)).matmul(&ts.precoders[l.tx]);
            let mut diff = direct.clone();
            *diff -= g.inner();
            assert!(diff.max_abs() <= 1e-12 * direct.max_abs().max(1.0));
            by_pairs += crate::numerics::frobenius_norm_sq(&direct).unwrap();
        }
        let lk = leakage(&c, &a, &h, &rt).unwrap();
        assert!((lk - by_pairs).abs() <= 1e-12 * by_pairs);
        assert!((lk - transceiver_leakage(&a, &h, &ts)).abs() <= 1e-12 * lk);
    }

    #[test]
    fn leakage_of_single_entry() {
        let c = NetworkConfig::symmetric(2, 1, 1, 1).unwrap();
        let a = AlignmentSet::new(&c, [Link::new(0, 1)]).unwrap();
        let h = ChannelState::from_fn(&c, |k, j| {
            if (k, j) == (0, 1) {
                ComplexMatrix::from_row_slice(1, 1, &[cz(3.0, 4.0)])
            } else {
                ComplexMatrix::identity(1)
            }
        })
        .unwrap();
        assert_eq!(leakage(&c, &a, &h, &ReducedTransceivers::zeros(&c)).unwrap(), 25.0);
    }

    #[test]
    fn residual_rejects_shape_mismatch() {
        let c = NetworkConfig::symmetric(2, 3, 3, 1).unwrap();
        let h = generate_channel(&c, 0);
        let bad = ReducedTransceivers { decoders: vec![ComplexMatrix::zeros(1, 1)], precoders: vec![] };
        assert!(matches!(residual_f(&c, &AlignmentSet::all(&c), &h, &bad), Err(GiaError::ShapeMismatch(_))));
    }

    #[test]
    fn normalized_db_examples() {
        assert_eq!(normalized_interference_db(3.0, 3.0).unwrap(), 0.0);
        assert!((normalized_interference_db(1.0, 1e-6).unwrap() + 60.0).abs() < 1e-12);
        assert!((normalized_interference_db(1.0, 10.0).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(normalized_interference_db(0.0, 1.0), Err(GiaError::DegenerateInstance));
    }

    #[test]
    fn verify_flags_unaligned_transceivers() {
        let c = NetworkConfig::symmetric(3, 2, 2, 1).unwrap();
        let a = AlignmentSet::all(&c);
        let h = generate_channel(&c, 10);
        let ts = lift_transceivers(&ReducedTransceivers::zeros(&c));
        let rep = verify_solution(&c, &a, &h, &ts, DEFAULT_VERIFY_TOL).unwrap();
        assert!(!rep.residual_ok());
        assert!(!rep.passed());
        assert!(rep.to_string().contains("FAIL"));
    }

    #[test]
    fn verify_single_user_without_alignment() {
        let c = NetworkConfig::symmetric(1, 3, 3, 2).unwrap();
        let h = generate_channel(&c, 10);
        let ts = lift_transceivers(&ReducedTransceivers::zeros(&c));
        let rep = verify_solution(&c, &AlignmentSet::empty(), &h, &ts, DEFAULT_VERIFY_TOL).unwrap();
        assert!(rep.passed(), "{rep}");
    }

    #[test]
    fn verify_catches_rank_deficient_direct_link_and_jammer() {
        let c = NetworkConfig::new(1, 1, vec![2, 2], vec![2], vec![1, 1]).unwrap();
        let mut h = generate_channel(&c, 1);
        *h.get_mut(0, 0) = ComplexMatrix::zeros(2, 2);
        let mut ts = lift_transceivers(&ReducedTransceivers::zeros(&c));
        ts.precoders[1] = ComplexMatrix::zeros(2, 1);
        let rep = verify_solution(&c, &AlignmentSet::empty(), &h, &ts, DEFAULT_VERIFY_TOL).unwrap();
        assert_eq!(rep.direct_rank_failures, vec![0]);
        assert_eq!(rep.jammer_rank_failures, vec![1]);
    }

    #[test]
    fn trace_csv_has_initial_row() {
        let (rec, _) = TraceRecorder::start(2.0, RunOptions::default());
        let trace = rec.finish(StopReason::MaxIters);
        assert_eq!(trace.to_csv(), "t,leakage,I_dB\n0,2e0,0\n");
    }
}
