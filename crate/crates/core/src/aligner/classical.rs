//! Classical iterative alignment baseline: orthonormal decoders and precoders,
//! each updated to the least-dominant eigenvectors of the interference
//! covariance it sees, alternating between the original and reciprocal network.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{lift_transceivers, transceiver_leakage, ReducedTransceivers, RunOptions, RunTrace, Step, TraceRecorder};
use crate::error::{GiaError, Result};
use crate::network::{AlignmentSet, ChannelState, NetworkConfig, TransceiverSet};
use crate::numerics::ComplexMatrix;

fn orthonormalize(m: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from(m.inner().clone().qr().q())
}

/// Eigenvectors of the Hermitian `q` belonging to its `d` smallest eigenvalues.
fn least_dominant(q: DMatrix<Complex64>, d: usize) -> Result<ComplexMatrix> {
    if q.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(GiaError::InvalidInput("interference covariance has non-finite entries".into()));
    }
    let eig = SymmetricEigen::new(q);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let n = eig.eigenvectors.nrows();
    Ok(ComplexMatrix::from_fn(n, d, |r, c| eig.eigenvectors[(r, order[c])]))
}

/// Runs the eigenvector-based leakage minimization with orthonormality
/// constraints. The starting point is the orthonormalized lift of the same
/// random reduced transceivers [`super::run_gia`] draws for `opts.seed`, so both
/// algorithms start from the same subspaces.
pub fn run_classical_baseline(
    cfg: &NetworkConfig,
    alignment: &AlignmentSet,
    channel: &ChannelState,
    opts: &RunOptions,
) -> Result<(TransceiverSet, RunTrace)> {
    if !channel.matches(cfg) {
        return Err(GiaError::ShapeMismatch("channel does not match the configuration".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start = lift_transceivers(&ReducedTransceivers::random(cfg, &mut rng));
    let mut ts = TransceiverSet {
        decoders: start.decoders.iter().map(orthonormalize).collect(),
        precoders: start.precoders.iter().map(orthonormalize).collect(),
    };
    let by_rx: Vec<Vec<usize>> = (0..cfg.users).map(|k| alignment.tx_of(k)).collect();
    let by_tx: Vec<Vec<usize>> = (0..cfg.num_tx()).map(|j| alignment.rx_of(j)).collect();

    let (mut rec, mut step) = TraceRecorder::start(transceiver_leakage(alignment, channel, &ts), *opts);
    while let Step::Continue = step {
        for (k, txs) in by_rx.iter().enumerate() {
            if txs.is_empty() {
                continue;
            }
            let n = cfg.rx_antennas[k];
            let mut q = DMatrix::<Complex64>::zeros(n, n);
            for &j in txs {
                let hv = channel.get(k, j).inner() * ts.precoders[j].inner();
                q += &hv * hv.adjoint();
            }
            ts.decoders[k] = least_dominant(q, cfg.streams[k])?;
        }
        for (j, rxs) in by_tx.iter().enumerate() {
            if rxs.is_empty() {
                continue;
            }
            let m = cfg.tx_antennas[j];
            let mut q = DMatrix::<Complex64>::zeros(m, m);
            for &k in rxs {
                let hu = channel.get(k, j).inner().adjoint() * ts.decoders[k].inner();
                q += &hu * hu.adjoint();
            }
            ts.precoders[j] = least_dominant(q, cfg.streams[j])?;
        }
        step = rec.record(transceiver_leakage(alignment, channel, &ts));
    }
    let Step::Stop(reason) = step else { unreachable!() };
    Ok((ts, rec.finish(reason)))
}
