//! Network model: configuration, alignment set, channel state and transceivers.
//!
//! Nodes are stored 0-based. Everything that crosses an I/O boundary (config
//! files, CSV, error messages, `Display`) is 1-based.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{GiaError, Result};
use crate::numerics::ComplexMatrix;

/// Antenna and stream dimensions of the legitimate network.
///
/// Transmitters `0..users` are paired with receivers of the same index;
/// transmitters `users..users + jammers` are jammers without a receiver.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NetworkConfig {
    pub users: usize,
    pub jammers: usize,
    /// `M_j`, one per transmitter (users then jammers).
    pub tx_antennas: Vec<usize>,
    /// `N_k`, one per receiver.
    pub rx_antennas: Vec<usize>,
    /// `d_j`, one per transmitter; receiver `k` decodes `d_k` streams.
    pub streams: Vec<usize>,
}

impl NetworkConfig {
    pub fn new(
        users: usize,
        jammers: usize,
        tx_antennas: Vec<usize>,
        rx_antennas: Vec<usize>,
        streams: Vec<usize>,
    ) -> Result<Self> {
        let cfg = NetworkConfig { users, jammers, tx_antennas, rx_antennas, streams };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Jammer-free network with the same dimensions at every node.
    pub fn symmetric(users: usize, m: usize, n: usize, d: usize) -> Result<Self> {
        NetworkConfig::new(users, 0, vec![m; users], vec![n; users], vec![d; users])
    }

    pub fn num_tx(&self) -> usize {
        self.users + self.jammers
    }

    /// Free rows of the reduced decoder of receiver `k`: `N_k - d_k`.
    pub fn rx_free(&self, k: usize) -> usize {
        self.rx_antennas[k] - self.streams[k]
    }

    /// Free rows of the reduced precoder of transmitter `j`: `M_j - d_j`.
    pub fn tx_free(&self, j: usize) -> usize {
        self.tx_antennas[j] - self.streams[j]
    }

    pub fn validate(&self) -> Result<()> {
        let dim = |index: String, reason: String| Err(GiaError::Dimension { index, reason });
        if self.users == 0 {
            return dim("K".into(), "at least one transmitter-receiver pair is required".into());
        }
        let ntx = self.num_tx();
        if self.tx_antennas.len() != ntx {
            return dim("M".into(), format!("expected {} entries (K+J), got {}", ntx, self.tx_antennas.len()));
        }
        if self.streams.len() != ntx {
            return dim("d".into(), format!("expected {} entries (K+J), got {}", ntx, self.streams.len()));
        }
        if self.rx_antennas.len() != self.users {
            return dim("N".into(), format!("expected {} entries (K), got {}", self.users, self.rx_antennas.len()));
        }
        for j in 0..ntx {
            let (m, d) = (self.tx_antennas[j], self.streams[j]);
            if m == 0 {
                return dim(format!("M_{}", j + 1), "antenna count must be positive".into());
            }
            if d == 0 {
                return dim(format!("d_{}", j + 1), "stream count must be positive".into());
            }
            if d > m {
                return dim(format!("d_{}", j + 1), format!("{d} streams exceed {m} transmit antennas"));
            }
        }
        for k in 0..self.users {
            let (n, d) = (self.rx_antennas[k], self.streams[k]);
            if n == 0 {
                return dim(format!("N_{}", k + 1), "antenna count must be positive".into());
            }
            if d > n {
                return dim(format!("d_{}", k + 1), format!("{d} streams exceed {n} receive antennas"));
            }
        }
        Ok(())
    }

    /// Multiplies every antenna and stream count by `c`.
    pub fn scaled(&self, c: usize) -> Result<Self> {
        if c == 0 {
            return Err(GiaError::InvalidInput("scale factor must be positive".into()));
        }
        self.validate()?;
        let mul = |v: &[usize]| v.iter().map(|x| x * c).collect();
        Ok(NetworkConfig {
            users: self.users,
            jammers: self.jammers,
            tx_antennas: mul(&self.tx_antennas),
            rx_antennas: mul(&self.rx_antennas),
            streams: mul(&self.streams),
        })
    }
}

pub fn scale_config(cfg: &NetworkConfig, c: usize) -> Result<NetworkConfig> {
    cfg.scaled(c)
}

pub fn validate_config(cfg: &NetworkConfig) -> Result<()> {
    cfg.validate()
}

/// A cross link from transmitter `tx` into receiver `rx` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    pub rx: usize,
    pub tx: usize,
}

impl Link {
    pub fn new(rx: usize, tx: usize) -> Self {
        Link { rx, tx }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.rx + 1, self.tx + 1)
    }
}

/// Cross links whose interference must be nulled. Iterates in lexicographic
/// `(rx, tx)` order, which is also the row-block order of the coefficient matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct AlignmentSet {
    links: BTreeSet<Link>,
}

impl AlignmentSet {
    pub fn new(cfg: &NetworkConfig, links: impl IntoIterator<Item = Link>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for l in links {
            if l.rx >= cfg.users || l.tx >= cfg.num_tx() {
                return Err(GiaError::IndexOutOfRange(format!(
                    "link {l} outside K={} receivers, K+J={} transmitters",
                    cfg.users,
                    cfg.num_tx()
                )));
            }
            if l.rx == l.tx {
                return Err(GiaError::InvalidInput(format!("link {l} is a direct link")));
            }
            set.insert(l);
        }
        Ok(AlignmentSet { links: set })
    }

    /// Every cross link; `K (K + J - 1)` of them.
    pub fn all(cfg: &NetworkConfig) -> Self {
        let links = (0..cfg.users)
            .flat_map(|k| (0..cfg.num_tx()).filter(move |&j| j != k).map(move |j| Link::new(k, j)))
            .collect();
        AlignmentSet { links }
    }

    pub fn empty() -> Self {
        AlignmentSet::default()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn contains(&self, link: Link) -> bool {
        self.links.contains(&link)
    }

    pub fn iter(&self) -> impl Iterator<Item = Link> + '_ {
        self.links.iter().copied()
    }

    /// Transmitters aligned at receiver `rx`, ascending.
    pub fn tx_of(&self, rx: usize) -> Vec<usize> {
        self.links.iter().filter(|l| l.rx == rx).map(|l| l.tx).collect()
    }

    /// Receivers aligned with transmitter `tx`, ascending.
    pub fn rx_of(&self, tx: usize) -> Vec<usize> {
        self.links.iter().filter(|l| l.tx == tx).map(|l| l.rx).collect()
    }

    pub fn is_all(&self, cfg: &NetworkConfig) -> bool {
        *self == AlignmentSet::all(cfg)
    }
}

pub fn alignment_all(cfg: &NetworkConfig) -> AlignmentSet {
    AlignmentSet::all(cfg)
}

/// `H_kj` for every receiver `k` and transmitter `j`, direct links included.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    links: Vec<Vec<ComplexMatrix>>,
}

impl ChannelState {
    /// Builds a channel from a per-link generator, checking shapes and finiteness.
    pub fn from_fn(cfg: &NetworkConfig, mut f: impl FnMut(usize, usize) -> ComplexMatrix) -> Result<Self> {
        let mut links = Vec::with_capacity(cfg.users);
        for k in 0..cfg.users {
            let mut row = Vec::with_capacity(cfg.num_tx());
            for j in 0..cfg.num_tx() {
                let h = f(k, j);
                let want = (cfg.rx_antennas[k], cfg.tx_antennas[j]);
                if h.shape() != want {
                    return Err(GiaError::ShapeMismatch(format!(
                        "H_{}{} is {:?}, expected {:?}",
                        k + 1,
                        j + 1,
                        h.shape(),
                        want
                    )));
                }
                if !h.is_finite() {
                    return Err(GiaError::InvalidInput(format!("H_{}{} has non-finite entries", k + 1, j + 1)));
                }
                row.push(h);
            }
            links.push(row);
        }
        Ok(ChannelState { links })
    }

    pub fn get(&self, rx: usize, tx: usize) -> &ComplexMatrix {
        &self.links[rx][tx]
    }

    pub fn get_mut(&mut self, rx: usize, tx: usize) -> &mut ComplexMatrix {
        &mut self.links[rx][tx]
    }

    pub fn num_rx(&self) -> usize {
        self.links.len()
    }

    pub fn num_tx(&self) -> usize {
        self.links.first().map_or(0, |r| r.len())
    }

    pub fn matches(&self, cfg: &NetworkConfig) -> bool {
        self.num_rx() == cfg.users
            && self.links.iter().enumerate().all(|(k, row)| {
                row.len() == cfg.num_tx()
                    && row
                        .iter()
                        .enumerate()
                        .all(|(j, h)| h.shape() == (cfg.rx_antennas[k], cfg.tx_antennas[j]))
            })
    }
}

/// One standard circularly-symmetric complex Gaussian draw, `CN(0, 1)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    // row-major fill so the draw order does not depend on the storage layout
    let entries: Vec<Complex64> = (0..rows * cols).map(|_| complex_gaussian(rng)).collect();
    ComplexMatrix::from_row_slice(rows, cols, &entries)
}

/// Deterministic 64-bit seed split: SplitMix64 finalizer of `master` and `index`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// i.i.d. `CN(0, 1)` channel. Each `H_kj` comes from its own ChaCha stream keyed
/// by `(seed, k, j)`, so the draw for one link is unaffected by the others.
pub fn generate_channel(cfg: &NetworkConfig, seed: u64) -> ChannelState {
    let mut links = Vec::with_capacity(cfg.users);
    for k in 0..cfg.users {
        let row = (0..cfg.num_tx())
            .map(|j| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(((k as u64) << 32) | j as u64);
                gaussian_matrix(&mut rng, cfg.rx_antennas[k], cfg.tx_antennas[j])
            })
            .collect();
        links.push(row);
    }
    ChannelState { links }
}

/// Decoders `U_k` (`N_k x d_k`) and precoders `V_j` (`M_j x d_j`).
#[derive(Debug, Clone, PartialEq)]
pub struct TransceiverSet {
    pub decoders: Vec<ComplexMatrix>,
    pub precoders: Vec<ComplexMatrix>,
}

impl TransceiverSet {
    pub fn check_shapes(&self, cfg: &NetworkConfig) -> Result<()> {
        if self.decoders.len() != cfg.users || self.precoders.len() != cfg.num_tx() {
            return Err(GiaError::ShapeMismatch(format!(
                "expected {} decoders and {} precoders, got {} and {}",
                cfg.users,
                cfg.num_tx(),
                self.decoders.len(),
                self.precoders.len()
            )));
        }
        for (k, u) in self.decoders.iter().enumerate() {
            if u.shape() != (cfg.rx_antennas[k], cfg.streams[k]) {
                return Err(GiaError::ShapeMismatch(format!("U_{} is {:?}", k + 1, u.shape())));
            }
        }
        for (j, v) in self.precoders.iter().enumerate() {
            if v.shape() != (cfg.tx_antennas[j], cfg.streams[j]) {
                return Err(GiaError::ShapeMismatch(format!("V_{} is {:?}", j + 1, v.shape())));
            }
        }
        Ok(())
    }

    /// Text dump: one `U k rows cols` / `V j rows cols` header per matrix followed by
    /// its rows, entries written as `a+bi`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut emit = |tag: &str, idx: usize, m: &ComplexMatrix| {
            out.push_str(&format!("{tag} {} {} {}\n", idx + 1, m.rows(), m.cols()));
            for r in 0..m.rows() {
                let row: Vec<String> = (0..m.cols()).map(|c| format_complex(m[(r, c)])).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        };
        for (k, u) in self.decoders.iter().enumerate() {
            emit("U", k, u);
        }
        for (j, v) in self.precoders.iter().enumerate() {
            emit("V", j, v);
        }
        out
    }
}

pub fn format_complex(z: Complex64) -> String {
    if z.im.is_sign_negative() {
        format!("{:e}-{:e}i", z.re, -z.im)
    } else {
        format!("{:e}+{:e}i", z.re, z.im)
    }
}

/// Contents of a network config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub config: NetworkConfig,
    pub alignment: AlignmentSet,
    pub seed: Option<u64>,
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ConfigFile {
    pub fn new(config: NetworkConfig, alignment: AlignmentSet, seed: Option<u64>) -> Self {
        ConfigFile { config, alignment, seed }
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let alignment = if self.alignment.is_all(c) && !self.alignment.is_empty() {
            "all".to_string()
        } else {
            self.alignment
                .iter()
                .map(|l| format!("{},{}", l.rx + 1, l.tx + 1))
                .collect::<Vec<_>>()
                .join("; ")
        };
        let mut s = format!(
            "K = {}\nJ = {}\nM = {}\nN = {}\nd = {}\nalignment = {}\n",
            c.users,
            c.jammers,
            join(&c.tx_antennas),
            join(&c.rx_antennas),
            join(&c.streams),
            alignment
        );
        if let Some(seed) = self.seed {
            s.push_str(&format!("seed = {seed}\n"));
        }
        s
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut k = None;
        let mut j = None;
        let mut m = None;
        let mut n = None;
        let mut d = None;
        let mut alignment: Option<(usize, String)> = None;
        let mut seed = None;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| GiaError::Parse { line: line_no, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let scalar = |v: &str| -> Result<usize> {
                v.parse().map_err(|_| err(format!("field `{key}`: `{v}` is not a nonnegative integer")))
            };
            let list = |v: &str| -> Result<Vec<usize>> {
                v.split(',').map(|x| scalar(x.trim())).collect()
            };
            let slot_taken = |taken: bool| {
                if taken {
                    Err(err(format!("duplicate key `{key}`")))
                } else {
                    Ok(())
                }
            };
            match key {
                "K" => {
                    slot_taken(k.is_some())?;
                    k = Some(scalar(value)?);
                }
                "J" => {
                    slot_taken(j.is_some())?;
                    j = Some(scalar(value)?);
                }
                "M" => {
                    slot_taken(m.is_some())?;
                    m = Some(list(value)?);
                }
                "N" => {
                    slot_taken(n.is_some())?;
                    n = Some(list(value)?);
                }
                "d" => {
                    slot_taken(d.is_some())?;
                    d = Some(list(value)?);
                }
                "alignment" => {
                    slot_taken(alignment.is_some())?;
                    alignment = Some((line_no, value.to_string()));
                }
                "seed" => {
                    slot_taken(seed.is_some())?;
                    seed = Some(
                        value
                            .parse::<u64>()
                            .map_err(|_| err(format!("field `seed`: `{value}` is not an unsigned 64-bit integer")))?,
                    );
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }

        let missing = |name: &str| GiaError::Parse { line: 0, message: format!("missing key `{name}`") };
        let config = NetworkConfig::new(
            k.ok_or_else(|| missing("K"))?,
            j.unwrap_or(0),
            m.ok_or_else(|| missing("M"))?,
            n.ok_or_else(|| missing("N"))?,
            d.ok_or_else(|| missing("d"))?,
        )?;
        let (a_line, a_text) = alignment.ok_or_else(|| missing("alignment"))?;
        let alignment = parse_alignment(&config, &a_text, a_line)?;
        Ok(ConfigFile { config, alignment, seed })
    }
}

fn parse_alignment(cfg: &NetworkConfig, text: &str, line: usize) -> Result<AlignmentSet> {
    if text == "all" {
        return Ok(AlignmentSet::all(cfg));
    }
    let err = |message: String| GiaError::Parse { line, message };
    let mut links = Vec::new();
    for pair in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (a, b) = pair
            .split_once(',')
            .ok_or_else(|| err(format!("alignment pair `{pair}` is not `k,j`")))?;
        let parse = |s: &str| -> Result<usize> {
            let v: usize = s.trim().parse().map_err(|_| err(format!("alignment index `{s}` is not an integer")))?;
            if v == 0 {
                return Err(err("alignment indices are 1-based".into()));
            }
            Ok(v - 1)
        };
        links.push(Link::new(parse(a)?, parse(b)?));
    }
    AlignmentSet::new(cfg, links)
}

pub fn save_config(path: impl AsRef<Path>, file: &ConfigFile) -> Result<()> {
    fs::write(path, file.to_text())?;
    Ok(())
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ConfigFile> {
    let text = fs::read_to_string(path)?;
    ConfigFile::parse(&text)
}
