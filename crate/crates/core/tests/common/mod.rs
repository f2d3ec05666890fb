#![allow(dead_code)]

use gia_core::aligner::{residual_f, ReducedTransceivers};
use gia_core::feasibility::HallLayout;
use gia_core::network::{AlignmentSet, ChannelState, Link, NetworkConfig};
use gia_core::numerics::ComplexMatrix;
use num_complex::Complex64;
use rand::Rng;

/// Rank by Gaussian elimination with full pivoting; entries below
/// `rel_tol * max|a|` count as zero.
pub fn elimination_rank(rows: usize, cols: usize, entry: impl Fn(usize, usize) -> Complex64, rel_tol: f64) -> usize {
    let mut a: Vec<Vec<Complex64>> = (0..rows).map(|r| (0..cols).map(|c| entry(r, c)).collect()).collect();
    let scale = a.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0;
    }
    let mut rank = 0;
    while rank < rows.min(cols) {
        let (mut pr, mut pc, mut best) = (rank, rank, 0.0);
        for (r, row) in a.iter().enumerate().skip(rank) {
            for (c, z) in row.iter().enumerate().skip(rank) {
                if z.norm() > best {
                    (pr, pc, best) = (r, c, z.norm());
                }
            }
        }
        if best <= rel_tol * scale {
            break;
        }
        a.swap(rank, pr);
        for row in a.iter_mut() {
            row.swap(rank, pc);
        }
        let pivot = a[rank][rank];
        for r in rank + 1..rows {
            let f = a[r][rank] / pivot;
            if f != Complex64::new(0.0, 0.0) {
                let pivot_row = a[rank].clone();
                for (x, v) in a[r].iter_mut().zip(pivot_row).skip(rank) {
                    *x -= f * v;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Visits every nonempty subset of `links` (as explicit vectors).
pub fn for_each_subset(links: &[Link], f: &mut impl FnMut(&[Link])) {
    fn go(links: &[Link], i: usize, cur: &mut Vec<Link>, f: &mut impl FnMut(&[Link])) {
        if i == links.len() {
            if !cur.is_empty() {
                f(cur);
            }
            return;
        }
        go(links, i + 1, cur, f);
        cur.push(links[i]);
        go(links, i + 1, cur, f);
        cur.pop();
    }
    go(links, 0, &mut Vec::new(), f);
}

fn distinct(v: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut v: Vec<usize> = v.collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Variables minus constraints restricted to `subset`.
pub fn proper_slack(cfg: &NetworkConfig, subset: &[Link]) -> i64 {
    let vars: usize = distinct(subset.iter().map(|l| l.rx)).iter().map(|&k| cfg.streams[k] * cfg.rx_free(k)).sum::<usize>()
        + distinct(subset.iter().map(|l| l.tx)).iter().map(|&j| cfg.streams[j] * cfg.tx_free(j)).sum::<usize>();
    let cons: usize = subset.iter().map(|l| cfg.streams[l.rx] * cfg.streams[l.tx]).sum();
    vars as i64 - cons as i64
}

pub fn brute_force_proper(cfg: &NetworkConfig, a: &AlignmentSet) -> bool {
    let links: Vec<Link> = a.iter().collect();
    let mut ok = true;
    for_each_subset(&links, &mut |s| ok &= proper_slack(cfg, s) >= 0);
    ok
}

/// Counting condition with every stream count equal to `d`.
pub fn brute_force_divisible(cfg: &NetworkConfig, a: &AlignmentSet, d: usize) -> bool {
    let links: Vec<Link> = a.iter().collect();
    let mut ok = true;
    for_each_subset(&links, &mut |s| {
        let lhs: usize = distinct(s.iter().map(|l| l.rx)).iter().map(|&k| cfg.rx_free(k)).sum::<usize>()
            + distinct(s.iter().map(|l| l.tx)).iter().map(|&j| cfg.tx_free(j)).sum::<usize>();
        ok &= lhs >= d * s.len();
    });
    ok
}

fn random_cross_links<R: Rng>(rng: &mut R, cfg: &NetworkConfig, p: f64) -> AlignmentSet {
    let links: Vec<Link> = (0..cfg.users)
        .flat_map(|k| (0..cfg.num_tx()).filter(move |&j| j != k).map(move |j| Link::new(k, j)))
        .filter(|_| rng.random_bool(p))
        .collect();
    AlignmentSet::new(cfg, links).unwrap()
}

/// Uniform symmetric network with an `L`-regular cyclic alignment
/// `{(k, k + s mod K) : s in shifts}`; `min(M, N) >= 2d`.
pub fn symmetric_instance<R: Rng>(rng: &mut R, max_dim: usize) -> (NetworkConfig, AlignmentSet) {
    let users = rng.random_range(2..=4);
    let d = rng.random_range(1..=max_dim / 4);
    let m = rng.random_range(2 * d..=max_dim);
    let n = rng.random_range(2 * d..=max_dim);
    let cfg = NetworkConfig::symmetric(users, m, n, d).unwrap();
    let mut shifts: Vec<usize> = (1..users).filter(|_| rng.random_bool(0.6)).collect();
    if shifts.is_empty() {
        shifts.push(rng.random_range(1..users));
    }
    let links = (0..users).flat_map(|k| shifts.iter().map(move |&s| Link::new(k, (k + s) % users)));
    let a = AlignmentSet::new(&cfg, links.collect::<Vec<_>>()).unwrap();
    (cfg, a)
}

/// Equal stream counts `d`; every receive (or every transmit) antenna count is
/// a multiple of `d`; optional jammer; random cross links.
pub fn divisible_instance<R: Rng>(rng: &mut R, max_dim: usize) -> (NetworkConfig, AlignmentSet) {
    let users = rng.random_range(2..=4);
    let jammers = rng.random_range(0..=1);
    let d = rng.random_range(1..=3);
    let multiple = |rng: &mut R| d * rng.random_range(1..=max_dim / d);
    let any = |rng: &mut R| rng.random_range(d..=max_dim);
    let rx_side = rng.random_bool(0.5);
    let tx: Vec<usize> = (0..users + jammers).map(|_| if rx_side { any(rng) } else { multiple(rng) }).collect();
    let rx: Vec<usize> = (0..users).map(|_| if rx_side { multiple(rng) } else { any(rng) }).collect();
    let cfg = NetworkConfig::new(users, jammers, tx, rx, vec![d; users + jammers]).unwrap();
    let a = random_cross_links(rng, &cfg, 0.6);
    (cfg, a)
}

/// Arbitrary small network: per-node stream counts, optional jammer, random links.
pub fn generic_instance<R: Rng>(rng: &mut R, max_dim: usize) -> (NetworkConfig, AlignmentSet) {
    let users = rng.random_range(2..=4);
    let jammers = rng.random_range(0..=1);
    let streams: Vec<usize> = (0..users + jammers).map(|_| rng.random_range(1..=3)).collect();
    let tx: Vec<usize> = streams.iter().map(|&d| rng.random_range(d..=max_dim)).collect();
    let rx: Vec<usize> = streams[..users].iter().map(|&d| rng.random_range(d..=max_dim)).collect();
    let cfg = NetworkConfig::new(users, jammers, tx, rx, streams).unwrap();
    let a = random_cross_links(rng, &cfg, 0.6);
    (cfg, a)
}

pub enum Slot {
    /// `U~_k(r, p)`, entered conjugated
    Decoder(usize, usize, usize),
    /// `V~_j(r, q)`
    Precoder(usize, usize, usize),
}

pub fn slot(cfg: &NetworkConfig, layout: &HallLayout, col: usize) -> Slot {
    for k in 0..cfg.users {
        let (start, nf) = (layout.decoder_cols[k], cfg.rx_free(k));
        if nf > 0 && col >= start && col < start + cfg.streams[k] * nf {
            return Slot::Decoder(k, (col - start) % nf, (col - start) / nf);
        }
    }
    for j in 0..cfg.num_tx() {
        let (start, mf) = (layout.precoder_cols[j], cfg.tx_free(j));
        if mf > 0 && col >= start && col < start + cfg.streams[j] * mf {
            return Slot::Precoder(j, (col - start) % mf, (col - start) / mf);
        }
    }
    panic!("column {col} out of range");
}

/// Sets the variable behind column `col` to `value`.
pub fn set_variable(cfg: &NetworkConfig, layout: &HallLayout, pt: &mut ReducedTransceivers, col: usize, value: Complex64) {
    match slot(cfg, layout, col) {
        Slot::Decoder(k, r, p) => pt.decoders[k][(r, p)] = value.conj(),
        Slot::Precoder(j, r, q) => pt.precoders[j][(r, q)] = value,
    }
}

/// Moves the variable behind `col` by a real `step` (conjugation leaves it unchanged).
pub fn add_to_variable(cfg: &NetworkConfig, layout: &HallLayout, pt: &mut ReducedTransceivers, col: usize, step: f64) {
    match slot(cfg, layout, col) {
        Slot::Decoder(k, r, p) => pt.decoders[k][(r, p)] += step,
        Slot::Precoder(j, r, q) => pt.precoders[j][(r, q)] += step,
    }
}

/// Largest entry-wise gap between `jac` and central differences of the
/// residuals with step `step` along every variable.
pub fn max_difference_error(
    cfg: &NetworkConfig,
    a: &AlignmentSet,
    h: &ChannelState,
    pt: &ReducedTransceivers,
    jac: &ComplexMatrix,
    step: f64,
) -> f64 {
    let layout = HallLayout::new(cfg, a);
    let mut worst: f64 = 0.0;
    for col in 0..layout.variables {
        let (mut plus, mut minus) = (pt.clone(), pt.clone());
        add_to_variable(cfg, &layout, &mut plus, col, step);
        add_to_variable(cfg, &layout, &mut minus, col, -step);
        let (gp, gm) = (residual_f(cfg, a, h, &plus).unwrap(), residual_f(cfg, a, h, &minus).unwrap());
        for &(l, row) in &layout.row_blocks {
            let dj = cfg.streams[l.tx];
            for p in 0..cfg.streams[l.rx] {
                for q in 0..dj {
                    let fd = (gp.get(l.rx, l.tx, p, q).unwrap() - gm.get(l.rx, l.tx, p, q).unwrap()) / (2.0 * step);
                    worst = worst.max((fd - jac[(row + p * dj + q, col)]).norm());
                }
            }
        }
    }
    worst
}
