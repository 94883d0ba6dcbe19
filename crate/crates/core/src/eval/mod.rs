//! Ground-truth recovery experiment: random lifecycle models, noisy traces
//! from random walks, and solve-rate tables.

mod generate;

use std::fmt::Write;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compile::compile;
use crate::model::{CostParams, ModelSpec};
use crate::search::{find_top_k, SearchConfig};

pub use generate::{
    generate_ground_truth, generate_random_model, generate_random_model_with, noise_events, GroundTruth, ModelShape,
    Noise, NoiseEvent, ObsAssignment,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub state_counts: Vec<usize>,
    pub obs_counts: Vec<usize>,
    pub instances_per_cell: usize,
    pub bad_fraction: f64,
    pub noise: Noise,
    pub seed: u64,
    pub time_budget: Duration,
    /// Hypotheses requested per instance.
    pub k: usize,
    /// Also run the bundled malware model as a hand-crafted column.
    pub handcrafted: bool,
    pub shape: ModelShape,
    pub params: CostParams,
    /// Parallel instances; 0 picks the number of CPUs.
    pub workers: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            state_counts: vec![10, 50, 100],
            obs_counts: vec![5, 10, 20, 40, 60, 80, 100, 120],
            instances_per_cell: 10,
            bad_fraction: 0.6,
            noise: Noise::default(),
            seed: 0,
            time_budget: Duration::from_secs(300),
            k: 50,
            handcrafted: false,
            shape: ModelShape::default(),
            params: CostParams::default(),
            workers: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(0.0..=1.0).contains(&self.bad_fraction) {
            return Err(EvalError::InvalidArgument("bad_fraction must lie in [0, 1]".into()));
        }
        self.noise.validate()?;
        if self.k == 0 || self.time_budget.is_zero() {
            return Err(EvalError::InvalidArgument("k and the time budget must be positive".into()));
        }
        if self.state_counts.iter().any(|&n| n < 2) || self.obs_counts.contains(&0) {
            return Err(EvalError::InvalidArgument("state counts must be ≥ 2 and observation counts ≥ 1".into()));
        }
        self.params.validate().map_err(|e| EvalError::InvalidArgument(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub index: usize,
    pub seed: u64,
    pub solved: bool,
    /// The ground truth is a valid hypothesis for its trace.
    pub truth_valid: bool,
    pub trace_len: usize,
    /// 1-based position of the ground truth among the results.
    pub truth_rank: Option<usize>,
    pub time_to_truth_secs: Option<f64>,
    pub hypotheses: usize,
    pub exhausted: bool,
    pub error: Option<String>,
}

impl InstanceOutcome {
    fn empty(index: usize, seed: u64) -> Self {
        InstanceOutcome {
            index,
            seed,
            solved: false,
            truth_valid: false,
            trace_len: 0,
            truth_rank: None,
            time_to_truth_secs: None,
            hypotheses: 0,
            exhausted: false,
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    /// `None` for the hand-crafted column.
    pub states: Option<usize>,
    pub observations: usize,
    pub solved: usize,
    pub total: usize,
    pub percent_solved: f64,
    /// Mean time to the ground truth over solved instances.
    pub mean_time_secs: Option<f64>,
    pub instances: Vec<InstanceOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchMetadata {
    pub engine_version: String,
    pub seed: u64,
    pub config: BenchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub metadata: BenchMetadata,
    pub cells: Vec<CellReport>,
}

impl BenchReport {
    pub fn cell(&self, states: Option<usize>, observations: usize) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.states == states && c.observations == observations)
    }

    /// Solve rate in [0, 1] for a random-model cell.
    pub fn solve_rate(&self, states: usize, observations: usize) -> Option<f64> {
        self.cell(Some(states), observations).map(|c| c.percent_solved / 100.0)
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of one benchmark instance; independent of scheduling.
pub fn instance_seed(seed: u64, states: Option<usize>, observations: usize, index: usize) -> u64 {
    let s = states.map_or(u64::MAX, |s| s as u64);
    splitmix(splitmix(splitmix(splitmix(seed) ^ s) ^ observations as u64) ^ index as u64)
}

/// Builds and solves one instance. Engine failures become unsolved outcomes.
pub fn run_instance(
    config: &BenchConfig,
    model: &ModelSpec,
    observations: usize,
    index: usize,
    seed: u64,
) -> InstanceOutcome {
    let mut outcome = InstanceOutcome::empty(index, seed);
    let gt = match generate_ground_truth(model, observations, config.noise, splitmix(seed)) {
        Ok(gt) => gt,
        Err(e) => {
            outcome.error = Some(e.to_string());
            return outcome;
        }
    };
    outcome.truth_valid = gt.truth_is_valid(model);
    outcome.trace_len = gt.trace.len();
    let result = compile(model, &gt.trace, &config.params)
        .map_err(|e| e.to_string())
        .and_then(|p| find_top_k(&p, &SearchConfig::new(config.k, config.time_budget)).map_err(|e| e.to_string()));
    match result {
        Ok(rs) => {
            outcome.hypotheses = rs.len();
            outcome.exhausted = rs.exhausted;
            if let Some(pos) = rs.position_of(&gt.truth) {
                outcome.solved = true;
                outcome.truth_rank = Some(pos + 1);
                outcome.time_to_truth_secs = Some(rs.found_after[pos].as_secs_f64());
            }
        }
        Err(e) => outcome.error = Some(e),
    }
    outcome
}

/// Runs every cell of the configuration, in parallel across instances.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport, EvalError> {
    config.validate()?;
    let mut columns: Vec<Option<usize>> = Vec::new();
    if config.handcrafted {
        columns.push(None);
    }
    columns.extend(config.state_counts.iter().map(|&n| Some(n)));

    let mut jobs = Vec::new();
    for &obs in &config.obs_counts {
        for &col in &columns {
            for i in 0..config.instances_per_cell {
                jobs.push((col, obs, i));
            }
        }
    }
    let handcrafted = config.handcrafted.then(crate::corpus::malware);
    let run = |&(col, obs, i): &(Option<usize>, usize, usize)| -> InstanceOutcome {
        let seed = instance_seed(config.seed, col, obs, i);
        let model = match col {
            None => Ok(handcrafted.clone().expect("hand-crafted model")),
            Some(n) => generate_random_model_with(n, config.bad_fraction, seed, config.shape),
        };
        match model {
            Ok(m) => run_instance(config, &m, obs, i, seed),
            Err(e) => InstanceOutcome { error: Some(e.to_string()), ..InstanceOutcome::empty(i, seed) },
        }
    };
    let outcomes: Vec<InstanceOutcome> = if config.workers == 1 {
        jobs.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| EvalError::InvalidArgument(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(run).collect())
    };

    let mut cells = Vec::new();
    let mut it = outcomes.into_iter();
    for &obs in &config.obs_counts {
        for &col in &columns {
            let instances: Vec<InstanceOutcome> = it.by_ref().take(config.instances_per_cell).collect();
            let solved = instances.iter().filter(|o| o.solved).count();
            let total = instances.len();
            let times: Vec<f64> = instances.iter().filter_map(|o| o.time_to_truth_secs).collect();
            cells.push(CellReport {
                states: col,
                observations: obs,
                solved,
                total,
                percent_solved: if total == 0 { 0.0 } else { 100.0 * solved as f64 / total as f64 },
                mean_time_secs: (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64),
                instances,
            });
        }
    }
    Ok(BenchReport {
        metadata: BenchMetadata {
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config: config.clone(),
        },
        cells,
    })
}

/// Text table with one row per observation count and a `% Solved` / `Time`
/// column pair per model size.
pub fn render_table(report: &BenchReport) -> String {
    let cfg = &report.metadata.config;
    let mut columns: Vec<Option<usize>> = Vec::new();
    if cfg.handcrafted {
        columns.push(None);
    }
    columns.extend(cfg.state_counts.iter().map(|&n| Some(n)));
    let title = |c: &Option<usize>| match c {
        None => "Hand-crafted".to_string(),
        Some(n) => format!("{n} states"),
    };
    const W: usize = 19;
    let mut out = String::new();
    let _ = write!(out, "{:<12}", "");
    for c in &columns {
        let _ = write!(out, " | {:<W$}", title(c));
    }
    out.push('\n');
    let _ = write!(out, "{:<12}", "Observations");
    for _ in &columns {
        let _ = write!(out, " | {:<9} {:>9}", "% Solved", "Time");
    }
    out.push('\n');
    let _ = writeln!(out, "{}", "-".repeat(12 + columns.len() * (W + 3)));
    for &obs in &cfg.obs_counts {
        let _ = write!(out, "{obs:<12}");
        for c in &columns {
            let (pct, time) = match report.cell(*c, obs) {
                Some(cell) if cell.total > 0 => (
                    format!("{:.0}%", cell.percent_solved),
                    cell.mean_time_secs.map_or("-".to_string(), |t| format!("{t:.2}")),
                ),
                _ => ("-".to_string(), "-".to_string()),
            };
            let _ = write!(out, " | {pct:<9} {time:>9}");
        }
        out.push('\n');
    }
    out
}
