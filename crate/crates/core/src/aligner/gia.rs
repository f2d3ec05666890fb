use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_inputs, LinkBlocks, ReducedTransceivers, RunOptions, RunTrace, Step, TraceRecorder};
use crate::error::Result;
use crate::network::{AlignmentSet, ChannelState, NetworkConfig};
use crate::numerics::{pseudo_inverse, ComplexMatrix};

/// Channel blocks and adjacency, fixed for the whole run.
struct Problem<'a> {
    cfg: &'a NetworkConfig,
    /// `(tx, blocks)` per receiver.
    by_rx: Vec<Vec<(usize, usize)>>,
    /// `(rx, blocks)` per transmitter.
    by_tx: Vec<Vec<(usize, usize)>>,
    blocks: Vec<LinkBlocks>,
}

impl<'a> Problem<'a> {
    fn new(cfg: &'a NetworkConfig, alignment: &AlignmentSet, channel: &ChannelState) -> Self {
        let mut by_rx = vec![Vec::new(); cfg.users];
        let mut by_tx = vec![Vec::new(); cfg.num_tx()];
        let mut blocks = Vec::with_capacity(alignment.len());
        for (i, l) in alignment.iter().enumerate() {
            by_rx[l.rx].push((l.tx, i));
            by_tx[l.tx].push((l.rx, i));
            blocks.push(LinkBlocks::new(cfg, channel, l));
        }
        Problem { cfg, by_rx, by_tx, blocks }
    }

    /// `U~_k = -(B_k A_k^#)^H` with `A_kj = H21 + H22 V~_j`, `B_kj = H11 + H12 V~_j`.
    fn update_receivers(&self, rt: &mut ReducedTransceivers) -> Result<()> {
        for k in 0..self.cfg.users {
            let links = &self.by_rx[k];
            let free = self.cfg.rx_free(k);
            if links.is_empty() || free == 0 {
                continue;
            }
            let mut a_parts = Vec::with_capacity(links.len());
            let mut b_parts = Vec::with_capacity(links.len());
            for &(j, i) in links {
                let blk = &self.blocks[i];
                let v = rt.precoders[j].inner();
                let mut a = blk.bottom_left.clone();
                *a += blk.bottom_right.inner() * v;
                let mut b = blk.top_left.clone();
                *b += blk.top_right.inner() * v;
                a_parts.push(a);
                b_parts.push(b);
            }
            let a_k = ComplexMatrix::hstack(&a_parts, free);
            let b_k = ComplexMatrix::hstack(&b_parts, self.cfg.streams[k]);
            let u_h = b_k.matmul(&pseudo_inverse(&a_k, None)?);
            rt.decoders[k] = ComplexMatrix::from(-u_h.adjoint().into_inner());
        }
        Ok(())
    }

    /// `V~_j = -C_j^# D_j` with `C_kj = H12 + U~_k^H H22`, `D_kj = H11 + U~_k^H H21`.
    fn update_transmitters(&self, rt: &mut ReducedTransceivers) -> Result<()> {
        for j in 0..self.cfg.num_tx() {
            let links = &self.by_tx[j];
            let free = self.cfg.tx_free(j);
            if links.is_empty() || free == 0 {
                continue;
            }
            let mut c_parts = Vec::with_capacity(links.len());
            let mut d_parts = Vec::with_capacity(links.len());
            for &(k, i) in links {
                let blk = &self.blocks[i];
                let u_h = rt.decoders[k].adjoint();
                let mut c = blk.top_right.clone();
                *c += u_h.inner() * blk.bottom_right.inner();
                let mut d = blk.top_left.clone();
                *d += u_h.inner() * blk.bottom_left.inner();
                c_parts.push(c);
                d_parts.push(d);
            }
            let c_j = ComplexMatrix::vstack(&c_parts, free);
            let d_j = ComplexMatrix::vstack(&d_parts, self.cfg.streams[j]);
            let v = pseudo_inverse(&c_j, None)?.matmul(&d_j);
            rt.precoders[j] = ComplexMatrix::from(-v.into_inner());
        }
        Ok(())
    }

    fn leakage(&self, rt: &ReducedTransceivers) -> f64 {
        self.by_rx
            .iter()
            .enumerate()
            .flat_map(|(k, links)| links.iter().map(move |&(j, i)| (k, j, i)))
            .map(|(k, j, i)| self.blocks[i].residual(&rt.decoders[k], &rt.precoders[j]).norm_sq())
            .sum()
    }
}

/// Receiver-side least-squares step: every reduced decoder with at least one
/// aligned link is replaced by the leakage minimizer for fixed precoders.
pub fn receiver_update(
    cfg: &NetworkConfig,
    alignment: &AlignmentSet,
    channel: &ChannelState,
    rt: &ReducedTransceivers,
) -> Result<ReducedTransceivers> {
    check_inputs(cfg, channel, rt)?;
    let mut out = rt.clone();
    Problem::new(cfg, alignment, channel).update_receivers(&mut out)?;
    Ok(out)
}

/// Transmitter-side least-squares step, the mirror of [`receiver_update`].
pub fn transmitter_update(
    cfg: &NetworkConfig,
    alignment: &AlignmentSet,
    channel: &ChannelState,
    rt: &ReducedTransceivers,
) -> Result<ReducedTransceivers> {
    check_inputs(cfg, channel, rt)?;
    let mut out = rt.clone();
    Problem::new(cfg, alignment, channel).update_transmitters(&mut out)?;
    Ok(out)
}

/// Alternating leakage minimization in reduced variables.
///
/// Starts from i.i.d. `CN(0, 1)` reduced decoders and precoders drawn from
/// `opts.seed`, then repeats one receiver sweep and one transmitter sweep per
/// round until a stopping rule fires.
pub fn run_gia(
    cfg: &NetworkConfig,
    alignment: &AlignmentSet,
    channel: &ChannelState,
    opts: &RunOptions,
) -> Result<(ReducedTransceivers, RunTrace)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut rt = ReducedTransceivers::random(cfg, &mut rng);
    check_inputs(cfg, channel, &rt)?;
    let problem = Problem::new(cfg, alignment, channel);

    let (mut rec, mut step) = TraceRecorder::start(problem.leakage(&rt), *opts);
    while let Step::Continue = step {
        problem.update_receivers(&mut rt)?;
        problem.update_transmitters(&mut rt)?;
        step = rec.record(problem.leakage(&rt));
    }
    let Step::Stop(reason) = step else { unreachable!() };
    Ok((rt, rec.finish(reason)))
}
