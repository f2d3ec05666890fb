//! Seeded randomized experiments: random-configuration convergence trials,
//! reference-configuration traces and feasibility sweeps.
//!
//! Every trial derives its own seeds from the master seed with
//! [`derive_seed`], so results do not depend on scheduling order and a single
//! trial can be replayed from its recorded seed.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::aligner::{run_classical_baseline, run_gia, RunOptions, RunTrace, DEFAULT_MAX_ITERS, PASS_THRESHOLD_DB};
use crate::error::{GiaError, Result};
use crate::feasibility::{feasibility_check, FeasibilityReport};
use crate::network::{derive_seed, generate_channel, AlignmentSet, ChannelState, NetworkConfig};

/// Box the random configurations are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleBounds {
    pub min_users: usize,
    pub max_users: usize,
    pub max_streams: usize,
    pub max_antennas: usize,
}

impl Default for SampleBounds {
    fn default() -> Self {
        SampleBounds { min_users: 3, max_users: 5, max_streams: 3, max_antennas: 15 }
    }
}

/// Draws `K` uniformly, then for each user `d_k` uniformly on `1..=max_streams`
/// and `M_k`, `N_k` independently and uniformly on `d_k..=max_antennas`. No
/// jammers; every cross link is aligned.
pub fn sample_random_config(bounds: &SampleBounds, seed: u64) -> Result<(NetworkConfig, AlignmentSet)> {
    if bounds.min_users == 0
        || bounds.min_users > bounds.max_users
        || bounds.max_streams == 0
        || bounds.max_streams > bounds.max_antennas
    {
        return Err(GiaError::InvalidInput(format!("empty sampling bounds {bounds:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users = rng.random_range(bounds.min_users..=bounds.max_users);
    let mut streams = Vec::with_capacity(users);
    let mut tx = Vec::with_capacity(users);
    let mut rx = Vec::with_capacity(users);
    for _ in 0..users {
        let d = rng.random_range(1..=bounds.max_streams);
        streams.push(d);
        tx.push(rng.random_range(d..=bounds.max_antennas));
        rx.push(rng.random_range(d..=bounds.max_antennas));
    }
    let cfg = NetworkConfig::new(users, 0, tx, rx, streams)?;
    let alignment = AlignmentSet::all(&cfg);
    Ok((cfg, alignment))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Gia,
    Classical,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::Gia, Algorithm::Classical];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Gia => "gia",
            Algorithm::Classical => "classical",
        }
    }

    /// Runs the algorithm and returns only its trace.
    pub fn trace(
        self,
        cfg: &NetworkConfig,
        alignment: &AlignmentSet,
        channel: &ChannelState,
        opts: &RunOptions,
    ) -> Result<RunTrace> {
        Ok(match self {
            Algorithm::Gia => run_gia(cfg, alignment, channel, opts)?.1,
            Algorithm::Classical => run_classical_baseline(cfg, alignment, channel, opts)?.1,
        })
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = GiaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gia" => Ok(Algorithm::Gia),
            "classical" => Ok(Algorithm::Classical),
            other => Err(GiaError::InvalidInput(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// One algorithm run on one sampled configuration. Infeasible trials are
/// recorded without running anything: `passed` is false and `final_i_db` empty.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub config: NetworkConfig,
    pub feasible: bool,
    pub algorithm: Algorithm,
    pub passed: bool,
    pub final_i_db: Option<f64>,
    pub rounds_used: usize,
    /// Trial seed; config, channel and initial point are derived from it.
    pub seed: u64,
}

pub const TRIAL_CSV_HEADER: &str = "trial_id,K,feasible,algorithm,passed,final_I_dB,rounds_used,seed";

impl TrialRecord {
    pub fn csv_row(&self) -> String {
        let db = self.final_i_db.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.trial_id, self.config.users, self.feasible, self.algorithm, self.passed, db, self.rounds_used, self.seed
        )
    }
}

pub fn trials_to_csv(records: &[TrialRecord]) -> String {
    let mut s = format!("{TRIAL_CSV_HEADER}\n");
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub passed: usize,
    pub feasible: usize,
}

impl AlgorithmSummary {
    /// Pass rate among feasible trials; 1 when there were none.
    pub fn pass_rate(&self) -> f64 {
        if self.feasible == 0 {
            1.0
        } else {
            self.passed as f64 / self.feasible as f64
        }
    }

    pub fn all_passed(&self) -> bool {
        self.passed == self.feasible
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Test1Summary {
    pub trials: usize,
    pub feasible: usize,
    pub per_algorithm: Vec<AlgorithmSummary>,
}

impl Test1Summary {
    pub fn feasible_fraction(&self) -> f64 {
        self.feasible as f64 / self.trials as f64
    }

    pub fn all_passed(&self) -> bool {
        self.per_algorithm.iter().all(AlgorithmSummary::all_passed)
    }

    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "trials={}\nfeasible={}\nfeasible_fraction={}\n",
            self.trials,
            self.feasible,
            self.feasible_fraction()
        );
        for a in &self.per_algorithm {
            s.push_str(&format!("{0}_passed={1}\n{0}_pass_rate={2}\n", a.algorithm, a.passed, a.pass_rate()));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Test1Outcome {
    /// Ordered by trial, then by the order of the requested algorithms.
    pub records: Vec<TrialRecord>,
    pub summary: Test1Summary,
}

/// Seeds used by trial `i` of a run with master seed `master`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub trial: u64,
    pub config: u64,
    pub channel: u64,
    pub start: u64,
}

impl TrialSeeds {
    pub fn new(master: u64, trial_id: usize) -> Self {
        Self::from_trial(derive_seed(master, trial_id as u64))
    }

    pub fn from_trial(trial: u64) -> Self {
        TrialSeeds {
            trial,
            config: derive_seed(trial, 0),
            channel: derive_seed(trial, 1),
            start: derive_seed(trial, 2),
        }
    }
}

/// Replays one trial from its trial seed.
pub fn run_trial(
    trial_id: usize,
    trial_seed: u64,
    bounds: &SampleBounds,
    algorithms: &[Algorithm],
    budget: usize,
) -> Result<Vec<TrialRecord>> {
    let seeds = TrialSeeds::from_trial(trial_seed);
    let (cfg, alignment) = sample_random_config(bounds, seeds.config)?;
    let channel = generate_channel(&cfg, seeds.channel);
    let feasible = feasibility_check(&cfg, &alignment, Some(&channel), None)?.feasible;
    let opts = RunOptions { max_iters: budget, stop_db: Some(PASS_THRESHOLD_DB), seed: seeds.start, ..RunOptions::default() };

    algorithms
        .iter()
        .map(|&algorithm| {
            let mut rec = TrialRecord {
                trial_id,
                config: cfg.clone(),
                feasible,
                algorithm,
                passed: false,
                final_i_db: None,
                rounds_used: 0,
                seed: seeds.trial,
            };
            if feasible {
                let trace = algorithm.trace(&cfg, &alignment, &channel, &opts)?;
                rec.passed = trace.reached(PASS_THRESHOLD_DB);
                rec.final_i_db = Some(trace.final_i_db());
                rec.rounds_used = trace.rounds();
            }
            Ok(rec)
        })
        .collect()
}

/// Random-configuration convergence test. Trials run in parallel; the output
/// is identical to a sequential run.
pub fn run_test1(n_trials: usize, algorithms: &[Algorithm], seed: u64, budget: usize) -> Result<Test1Outcome> {
    run_test1_with(n_trials, algorithms, seed, budget, &SampleBounds::default())
}

pub fn run_test1_with(
    n_trials: usize,
    algorithms: &[Algorithm],
    seed: u64,
    budget: usize,
    bounds: &SampleBounds,
) -> Result<Test1Outcome> {
    if n_trials == 0 {
        return Err(GiaError::InvalidInput("n_trials must be at least 1".into()));
    }
    if algorithms.is_empty() {
        return Err(GiaError::InvalidInput("no algorithm selected".into()));
    }
    let per_trial: Vec<Vec<TrialRecord>> = (0..n_trials)
        .into_par_iter()
        .map(|i| run_trial(i, TrialSeeds::new(seed, i).trial, bounds, algorithms, budget))
        .collect::<Result<_>>()?;

    let feasible = per_trial.iter().filter(|recs| recs[0].feasible).count();
    let per_algorithm = algorithms
        .iter()
        .enumerate()
        .map(|(i, &algorithm)| AlgorithmSummary {
            algorithm,
            passed: per_trial.iter().filter(|recs| recs[i].passed).count(),
            feasible,
        })
        .collect();
    Ok(Test1Outcome {
        records: per_trial.into_iter().flatten().collect(),
        summary: Test1Summary { trials: n_trials, feasible, per_algorithm },
    })
}

/// The three reference configurations: two feasible, the last infeasible.
pub fn reference_config(config_id: usize) -> Result<NetworkConfig> {
    match config_id {
        1 => NetworkConfig::new(3, 0, vec![6, 6, 6], vec![6, 6, 6], vec![3, 3, 3]),
        2 => NetworkConfig::new(3, 0, vec![5, 5, 5], vec![6, 6, 9], vec![3, 3, 3]),
        3 => NetworkConfig::new(3, 0, vec![5, 5, 5], vec![5, 7, 9], vec![3, 3, 3]),
        other => Err(GiaError::InvalidInput(format!("reference configuration {other} does not exist (1, 2 or 3)"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig6Traces {
    pub config_id: usize,
    pub seed: u64,
    pub gia: RunTrace,
    pub classical: RunTrace,
}

/// Both algorithms on a reference configuration, same channel and same random
/// start, for up to `rounds` rounds.
pub fn run_fig6(config_id: usize, seed: u64, rounds: usize) -> Result<Fig6Traces> {
    let cfg = reference_config(config_id)?;
    let alignment = AlignmentSet::all(&cfg);
    let channel = generate_channel(&cfg, derive_seed(seed, 1));
    let opts = RunOptions { max_iters: rounds, seed: derive_seed(seed, 2), ..RunOptions::default() };
    Ok(Fig6Traces {
        config_id,
        seed,
        gia: Algorithm::Gia.trace(&cfg, &alignment, &channel, &opts)?,
        classical: Algorithm::Classical.trace(&cfg, &alignment, &channel, &opts)?,
    })
}

pub const DEFAULT_FIG6_ROUNDS: usize = DEFAULT_MAX_ITERS;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub member: usize,
    pub scale: usize,
    pub seed: u64,
    pub config: NetworkConfig,
    pub report: FeasibilityReport,
}

pub const SWEEP_CSV_HEADER: &str = "member,scale,seed,K,J,feasible,method,constraints,variables,rank";

impl SweepRow {
    pub fn csv_row(&self) -> String {
        let rank = self.report.rank.map(|r| r.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.member,
            self.scale,
            self.seed,
            self.config.users,
            self.config.jammers,
            self.report.feasible,
            self.report.method,
            self.report.constraints,
            self.report.variables,
            rank
        )
    }
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut s = format!("{SWEEP_CSV_HEADER}\n");
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

pub const SWEEP_SCALES: [usize; 2] = [1, 2];

/// Feasibility verdict of every family member, at scales 1 and 2, for every
/// channel seed.
pub fn sweep_feasibility(family: &[(NetworkConfig, AlignmentSet)], channel_seeds: &[u64]) -> Result<Vec<SweepRow>> {
    let jobs: Vec<(usize, usize, u64)> = (0..family.len())
        .flat_map(|m| SWEEP_SCALES.iter().flat_map(move |&c| channel_seeds.iter().map(move |&s| (m, c, s))))
        .collect();
    jobs.into_par_iter()
        .map(|(member, scale, seed)| {
            let (base, alignment) = &family[member];
            let config = base.scaled(scale)?;
            let channel = generate_channel(&config, seed);
            let report = feasibility_check(&config, alignment, Some(&channel), None)?;
            Ok(SweepRow { member, scale, seed, config, report })
        })
        .collect()
}

/// True when every row of each member carries the same verdict.
pub fn sweep_is_consistent(rows: &[SweepRow]) -> bool {
    rows.iter().all(|r| rows.iter().filter(|o| o.member == r.member).all(|o| o.report.feasible == r.report.feasible))
}

/// Symmetric `K`-user networks with `d` streams and every split `M + N = s`
/// for `s` in `2d..=max_sum`, fully aligned.
pub fn symmetric_family(users: usize, streams: usize, max_sum: usize) -> Result<Vec<(NetworkConfig, AlignmentSet)>> {
    let mut out = Vec::new();
    for sum in 2 * streams..=max_sum {
        for m in streams..=sum - streams {
            let cfg = NetworkConfig::symmetric(users, m, sum - m, streams)?;
            let a = AlignmentSet::all(&cfg);
            out.push((cfg, a));
        }
    }
    Ok(out)
}
