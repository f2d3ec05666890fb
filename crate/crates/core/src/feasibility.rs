//! Feasibility of generalized interference alignment.
//!
//! The constraint `U_k^H H_kj V_j = 0` in reduced variables is a set of
//! bilinear polynomials in `(conj(U~), V~)`. Their first-order coefficients form
//! the matrix built by [`build_h_all`]; a network is feasible (almost surely)
//! exactly when that matrix has full row rank. Cheaper closed-form tests cover
//! the improper, symmetric and "divisible" special cases.
//!
//! Column convention: the block for receiver `k` holds `conj(U~_k)` vectorized
//! column by column (index `p * (N_k - d_k) + r`), the block for transmitter `j`
//! holds `V~_j` the same way (index `q * (M_j - d_j) + r`). Row `p * d_j + q`
//! of a link block is the constraint on entry `(p, q)` of `U_k^H H_kj V_j`.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::aligner::ReducedTransceivers;
use crate::error::{GiaError, Result};
use crate::network::{derive_seed, generate_channel, AlignmentSet, ChannelState, Link, NetworkConfig};
use crate::numerics::{numerical_rank, ComplexMatrix, DEFAULT_RANK_TOL};

/// Largest alignment set on which subset conditions are enumerated.
pub const DEFAULT_SUBSET_CAP: usize = 20;

/// Random points tried by [`independence_probe`] unless told otherwise.
pub const DEFAULT_PROBE_TRIALS: usize = 3;

/// Row and column offsets of the coefficient-matrix blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct HallLayout {
    /// `(link, first row)` in alignment-set order.
    pub row_blocks: Vec<(Link, usize)>,
    /// First column of the `conj(U~_k)` block, per receiver.
    pub decoder_cols: Vec<usize>,
    /// First column of the `V~_j` block, per transmitter.
    pub precoder_cols: Vec<usize>,
    pub constraints: usize,
    pub variables: usize,
}

impl HallLayout {
    pub fn new(cfg: &NetworkConfig, alignment: &AlignmentSet) -> Self {
        let mut row_blocks = Vec::with_capacity(alignment.len());
        let mut row = 0;
        for l in alignment.iter() {
            row_blocks.push((l, row));
            row += cfg.streams[l.rx] * cfg.streams[l.tx];
        }
        let mut col = 0;
        let mut decoder_cols = Vec::with_capacity(cfg.users);
        for k in 0..cfg.users {
            decoder_cols.push(col);
            col += cfg.streams[k] * cfg.rx_free(k);
        }
        let mut precoder_cols = Vec::with_capacity(cfg.num_tx());
        for j in 0..cfg.num_tx() {
            precoder_cols.push(col);
            col += cfg.streams[j] * cfg.tx_free(j);
        }
        HallLayout { row_blocks, decoder_cols, precoder_cols, constraints: row, variables: col }
    }
}

/// The coefficient matrix of the first-order terms, with its block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Hall {
    pub matrix: ComplexMatrix,
    pub layout: HallLayout,
}

impl Hall {
    pub fn constraints(&self) -> usize {
        self.layout.constraints
    }

    pub fn variables(&self) -> usize {
        self.layout.variables
    }
}

fn check_link(cfg: &NetworkConfig, channel: &ChannelState, k: usize, j: usize) -> Result<()> {
    if k >= cfg.users || j >= cfg.num_tx() || k == j {
        return Err(GiaError::IndexOutOfRange(format!(
            "({},{}) is not a cross link of a network with K={}, K+J={}",
            k + 1,
            j + 1,
            cfg.users,
            cfg.num_tx()
        )));
    }
    if !channel.matches(cfg) {
        return Err(GiaError::ShapeMismatch("channel does not match the configuration".into()));
    }
    Ok(())
}

/// Decoder-side coefficients of link `(k, j)`: `d_k` diagonal copies of the
/// `d_j x (N_k - d_k)` block whose `(q, r)` entry is `h_kj(d_k + r, q)`.
pub fn build_hu(cfg: &NetworkConfig, channel: &ChannelState, k: usize, j: usize) -> Result<ComplexMatrix> {
    check_link(cfg, channel, k, j)?;
    let (dk, dj, free) = (cfg.streams[k], cfg.streams[j], cfg.rx_free(k));
    let h = channel.get(k, j);
    let mut out = ComplexMatrix::zeros(dk * dj, dk * free);
    for p in 0..dk {
        for q in 0..dj {
            for r in 0..free {
                out[(p * dj + q, p * free + r)] = h[(dk + r, q)];
            }
        }
    }
    Ok(out)
}

/// Precoder-side coefficients of link `(k, j)`: row block `p` is `d_j` diagonal
/// copies of the row `h_kj(p, d_j + 1 .. M_j)`.
pub fn build_hv(cfg: &NetworkConfig, channel: &ChannelState, k: usize, j: usize) -> Result<ComplexMatrix> {
    check_link(cfg, channel, k, j)?;
    let (dk, dj, free) = (cfg.streams[k], cfg.streams[j], cfg.tx_free(j));
    let h = channel.get(k, j);
    let mut out = ComplexMatrix::zeros(dk * dj, dj * free);
    for p in 0..dk {
        for q in 0..dj {
            for r in 0..free {
                out[(p * dj + q, q * free + r)] = h[(p, dj + r)];
            }
        }
    }
    Ok(out)
}

pub fn build_h_all(cfg: &NetworkConfig, alignment: &AlignmentSet, channel: &ChannelState) -> Result<Hall> {
    if !channel.matches(cfg) {
        return Err(GiaError::ShapeMismatch("channel does not match the configuration".into()));
    }
    let layout = HallLayout::new(cfg, alignment);
    let mut matrix = ComplexMatrix::zeros(layout.constraints, layout.variables);
    for &(l, row) in &layout.row_blocks {
        matrix.set_block(row, layout.decoder_cols[l.rx], &build_hu(cfg, channel, l.rx, l.tx)?);
        matrix.set_block(row, layout.precoder_cols[l.tx], &build_hv(cfg, channel, l.rx, l.tx)?);
    }
    Ok(Hall { matrix, layout })
}

/// Jacobian of the residuals with respect to `(conj(U~), V~)` at `point`.
///
/// Same layout as [`build_h_all`]; the decoder-side entry for `(r, q)` becomes
/// `h_kj(d_k + r, q) + H_kj(d_k + r, d_j..) v~_j(q)` and the precoder-side entry
/// for `(p, r)` becomes `h_kj(p, d_j + r) + u~_k(p)^H H_kj(d_k.., d_j + r)`.
pub fn build_jacobian(
    cfg: &NetworkConfig,
    alignment: &AlignmentSet,
    channel: &ChannelState,
    point: &ReducedTransceivers,
) -> Result<ComplexMatrix> {
    if !channel.matches(cfg) {
        return Err(GiaError::ShapeMismatch("channel does not match the configuration".into()));
    }
    point.check_shapes(cfg)?;
    let layout = HallLayout::new(cfg, alignment);
    let mut jac = ComplexMatrix::zeros(layout.constraints, layout.variables);
    for &(l, row) in &layout.row_blocks {
        let (k, j) = (l.rx, l.tx);
        let (dk, dj) = (cfg.streams[k], cfg.streams[j]);
        let (nf, mf) = (cfg.rx_free(k), cfg.tx_free(j));
        let h = channel.get(k, j);
        let h_lower = h.block(dk, 0, nf, dj);
        let h_upper_right = h.block(0, dj, dk, mf);
        let h_lower_right = h.block(dk, dj, nf, mf);
        // (N_k - d_k) x d_j and d_k x (M_j - d_j)
        let mut a = h_lower;
        *a += h_lower_right.inner() * point.precoders[j].inner();
        let mut c = h_upper_right;
        *c += point.decoders[k].adjoint().inner() * h_lower_right.inner();

        let (uc, vc) = (layout.decoder_cols[k], layout.precoder_cols[j]);
        for p in 0..dk {
            for q in 0..dj {
                let rr = row + p * dj + q;
                for r in 0..nf {
                    jac[(rr, uc + p * nf + r)] = a[(r, q)];
                }
                for r in 0..mf {
                    jac[(rr, vc + q * mf + r)] = c[(p, r)];
                }
            }
        }
    }
    Ok(jac)
}

/// Checks `lhs(S) >= rhs(S)` over every nonempty subset `S` of `links`, where
/// `lhs` sums `rx_weight` over the distinct receivers and `tx_weight` over the
/// distinct transmitters of `S`, and `rhs` sums `link_cost`. Returns the first
/// violating subset.
fn first_violating_subset(
    links: &[Link],
    rx_weight: impl Fn(usize) -> i64,
    tx_weight: impl Fn(usize) -> i64,
    link_cost: impl Fn(Link) -> i64,
    cap: usize,
) -> Result<Option<Vec<Link>>> {
    if links.len() > cap {
        return Err(GiaError::UnsupportedSize { size: links.len(), cap });
    }
    let max_rx = links.iter().map(|l| l.rx).max().unwrap_or(0);
    let max_tx = links.iter().map(|l| l.tx).max().unwrap_or(0);
    if max_rx >= 64 || max_tx >= 64 {
        return Err(GiaError::UnsupportedSize { size: max_rx.max(max_tx) + 1, cap: 64 });
    }
    let rx_w: Vec<i64> = (0..=max_rx).map(&rx_weight).collect();
    let tx_w: Vec<i64> = (0..=max_tx).map(&tx_weight).collect();
    let cost: Vec<i64> = links.iter().map(|&l| link_cost(l)).collect();

    let n = links.len();
    for mask in 1u64..(1u64 << n) {
        let (mut rx_set, mut tx_set, mut rhs) = (0u64, 0u64, 0i64);
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            rx_set |= 1 << links[i].rx;
            tx_set |= 1 << links[i].tx;
            rhs += cost[i];
        }
        let mut lhs = 0i64;
        let mut s = rx_set;
        while s != 0 {
            let k = s.trailing_zeros() as usize;
            s &= s - 1;
            lhs += rx_w[k];
        }
        let mut s = tx_set;
        while s != 0 {
            let j = s.trailing_zeros() as usize;
            s &= s - 1;
            lhs += tx_w[j];
        }
        if lhs < rhs {
            let subset = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| links[i]).collect();
            return Ok(Some(subset));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProperCheck {
    pub proper: bool,
    pub violating: Option<Vec<Link>>,
}

/// Properness: on every nonempty subset of the alignment set, the number of
/// involved reduced variables is at least the number of scalar constraints.
pub fn check_proper(cfg: &NetworkConfig, alignment: &AlignmentSet) -> Result<ProperCheck> {
    check_proper_capped(cfg, alignment, DEFAULT_SUBSET_CAP)
}

pub fn check_proper_capped(cfg: &NetworkConfig, alignment: &AlignmentSet, cap: usize) -> Result<ProperCheck> {
    let links: Vec<Link> = alignment.iter().collect();
    let d = |i: usize| cfg.streams[i] as i64;
    let violating = first_violating_subset(
        &links,
        |k| d(k) * cfg.rx_free(k) as i64,
        |j| d(j) * cfg.tx_free(j) as i64,
        |l| d(l.rx) * d(l.tx),
        cap,
    )?;
    Ok(ProperCheck { proper: violating.is_none(), violating })
}

/// Closed-form verdict for symmetric networks with an `L`-regular alignment
/// between paired transmitters and receivers. `None` when not applicable.
pub fn check_symmetric_formula(cfg: &NetworkConfig, alignment: &AlignmentSet) -> Option<bool> {
    let kk = cfg.users;
    let (d, m, n) = (cfg.streams[0], cfg.tx_antennas[0], cfg.rx_antennas[0]);
    let uniform = (0..kk).all(|k| cfg.streams[k] == d && cfg.tx_antennas[k] == m && cfg.rx_antennas[k] == n);
    if !uniform || m.min(n) < 2 * d {
        return None;
    }
    let mut rx_deg = vec![0usize; kk];
    let mut tx_deg = vec![0usize; cfg.num_tx()];
    for l in alignment.iter() {
        if l.tx < kk {
            rx_deg[l.rx] += 1;
        }
        tx_deg[l.tx] += 1;
    }
    let degree = rx_deg[0];
    if rx_deg.iter().any(|&x| x != degree) || tx_deg[..kk].iter().any(|&x| x != degree) {
        return None;
    }
    if (kk..cfg.num_tx()).any(|j| tx_deg[j] > cfg.tx_free(j) / d) {
        return None;
    }
    Some(m + n >= (degree + 2) * d)
}

/// Closed-form verdict when every node carries `d` streams and `d` divides all
/// receive or all transmit antenna counts. `Ok(None)` when not applicable.
pub fn check_divisible_formula(cfg: &NetworkConfig, alignment: &AlignmentSet) -> Result<Option<bool>> {
    check_divisible_formula_capped(cfg, alignment, DEFAULT_SUBSET_CAP)
}

pub fn check_divisible_formula_capped(
    cfg: &NetworkConfig,
    alignment: &AlignmentSet,
    cap: usize,
) -> Result<Option<bool>> {
    let d = cfg.streams[0];
    if cfg.streams.iter().any(|&x| x != d) {
        return Ok(None);
    }
    let rx_div = cfg.rx_antennas.iter().all(|&n| n % d == 0);
    let tx_div = cfg.tx_antennas.iter().all(|&m| m % d == 0);
    if !rx_div && !tx_div {
        return Ok(None);
    }
    let links: Vec<Link> = alignment.iter().collect();
    let violating = first_violating_subset(
        &links,
        |k| cfg.rx_free(k) as i64,
        |j| cfg.tx_free(j) as i64,
        |_| d as i64,
        cap,
    )?;
    Ok(Some(violating.is_none()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityMethod {
    HallRank,
    ProperFail,
    SymmetricFormula,
    DivisibleFormula,
}

impl FeasibilityMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FeasibilityMethod::HallRank => "hall_rank",
            FeasibilityMethod::ProperFail => "proper_fail",
            FeasibilityMethod::SymmetricFormula => "symmetric_formula",
            FeasibilityMethod::DivisibleFormula => "divisible_formula",
        }
    }
}

impl fmt::Display for FeasibilityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub method: FeasibilityMethod,
    pub constraints: usize,
    pub variables: usize,
    /// Numerical rank of the coefficient matrix; only computed on the rank path.
    pub rank: Option<usize>,
    /// Relative rank tolerance in force.
    pub tolerance: f64,
}

/// `feasible,method,C,V,rank,tolerance`; the rank field is empty when a
/// closed-form path decided the verdict.
impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rank = self.rank.map(|r| r.to_string()).unwrap_or_default();
        write!(
            f,
            "{},{},{},{},{},{:e}",
            self.feasible, self.method, self.constraints, self.variables, rank, self.tolerance
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityOptions {
    /// Try the improper / symmetric / divisible shortcuts before the rank test.
    pub fast_paths: bool,
    pub subset_cap: usize,
    pub rel_tol: f64,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        FeasibilityOptions { fast_paths: true, subset_cap: DEFAULT_SUBSET_CAP, rel_tol: DEFAULT_RANK_TOL }
    }
}

/// Rank-only verdict: feasible iff the coefficient matrix has full row rank.
pub fn hall_rank_verdict(
    cfg: &NetworkConfig,
    alignment: &AlignmentSet,
    channel: &ChannelState,
    rel_tol: f64,
) -> Result<FeasibilityReport> {
    let hall = build_h_all(cfg, alignment, channel)?;
    let rank = numerical_rank(&hall.matrix, Some(rel_tol))?.rank;
    Ok(FeasibilityReport {
        feasible: rank == hall.constraints(),
        method: FeasibilityMethod::HallRank,
        constraints: hall.constraints(),
        variables: hall.variables(),
        rank: Some(rank),
        tolerance: rel_tol,
    })
}

/// Feasibility verdict with default options. Without an explicit channel one is
/// drawn from `seed` (0 when absent); a single draw suffices because the verdict
/// is the same for almost every channel.
pub fn feasibility_check(
    cfg: &NetworkConfig,
    alignment: &AlignmentSet,
    channel: Option<&ChannelState>,
    seed: Option<u64>,
) -> Result<FeasibilityReport> {
    feasibility_check_with(cfg, alignment, channel, seed, &FeasibilityOptions::default())
}

pub fn feasibility_check_with(
    cfg: &NetworkConfig,
    alignment: &AlignmentSet,
    channel: Option<&ChannelState>,
    seed: Option<u64>,
    opts: &FeasibilityOptions,
) -> Result<FeasibilityReport> {
    cfg.validate()?;
    let layout = HallLayout::new(cfg, alignment);
    let shortcut = |feasible, method| FeasibilityReport {
        feasible,
        method,
        constraints: layout.constraints,
        variables: layout.variables,
        rank: None,
        tolerance: opts.rel_tol,
    };

    if opts.fast_paths && alignment.len() <= opts.subset_cap {
        if !check_proper_capped(cfg, alignment, opts.subset_cap)?.proper {
            return Ok(shortcut(false, FeasibilityMethod::ProperFail));
        }
        if let Some(feasible) = check_symmetric_formula(cfg, alignment) {
            return Ok(shortcut(feasible, FeasibilityMethod::SymmetricFormula));
        }
        if let Some(feasible) = check_divisible_formula_capped(cfg, alignment, opts.subset_cap)? {
            return Ok(shortcut(feasible, FeasibilityMethod::DivisibleFormula));
        }
    }

    let generated;
    let channel = match channel {
        Some(c) => c,
        None => {
            generated = generate_channel(cfg, seed.unwrap_or(0));
            &generated
        }
    };
    hall_rank_verdict(cfg, alignment, channel, opts.rel_tol)
}

/// Randomized algebraic-independence probe: true iff the Jacobian has full row
/// rank at one of `trials` Gaussian points.
pub fn independence_probe(
    cfg: &NetworkConfig,
    alignment: &AlignmentSet,
    channel: &ChannelState,
    trials: usize,
    seed: u64,
) -> Result<bool> {
    if trials == 0 {
        return Err(GiaError::InvalidInput("independence probe needs at least one trial".into()));
    }
    if alignment.is_empty() {
        return Ok(true);
    }
    let constraints = HallLayout::new(cfg, alignment).constraints;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
        let point = ReducedTransceivers::random(cfg, &mut rng);
        let jac = build_jacobian(cfg, alignment, channel, &point)?;
        if numerical_rank(&jac, None)?.rank == constraints {
            return Ok(true);
        }
    }
    Ok(false)
}
