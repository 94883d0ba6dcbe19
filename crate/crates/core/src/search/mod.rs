//! Top-k plan enumeration over compiled problems.
//!
//! [`find_top_k`] runs A* over plan prefixes. A STRIPS state may be expanded
//! many times, once per distinct prefix reaching it, but a prefix is dropped
//! when the state was already expanded `k` times with a strictly smaller
//! cost: every goal path through the dropped prefix is beaten by `k` others.
//! Hypotheses are emitted in complete cost classes, so the result is exactly
//! the first `k` hypotheses under [`rank_order`](crate::model::rank_order).
//!
//! [`exact_oracle`] computes the same set by dynamic programming over the
//! explicit product graph and is meant for verification on small instances.

mod engine;
mod heuristic;
mod oracle;

use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Hypothesis;

pub use engine::{find_top_k, HypothesisStream, StreamStatus};
pub use oracle::{exact_oracle, exact_oracle_with, DEFAULT_NODE_BOUND};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionMode {
    /// Every returned plan is distinct; distinct plans are distinct hypotheses.
    #[default]
    EnumerateDistinctPlans,
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub k: usize,
    pub time_budget: Duration,
    pub exclusion_mode: ExclusionMode,
    /// Checked between node expansions; setting it stops the search as if
    /// the budget had expired.
    pub cancel: Option<Arc<AtomicBool>>,
}

impl SearchConfig {
    pub const DEFAULT_BUDGET: Duration = Duration::from_secs(300);

    pub fn new(k: usize, time_budget: Duration) -> Self {
        Self { k, time_budget, exclusion_mode: ExclusionMode::default(), cancel: None }
    }

    pub fn with_cancel(mut self, flag: Arc<AtomicBool>) -> Self {
        self.cancel = Some(flag);
        self
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.k == 0 {
            return Err(SearchError::InvalidArgument("k must be at least 1".into()));
        }
        if self.time_budget.is_zero() {
            return Err(SearchError::InvalidArgument("time budget must be positive".into()));
        }
        Ok(())
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self::new(10, Self::DEFAULT_BUDGET)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultSet {
    /// Sorted by rank order; `rank` runs 1..=len.
    pub hypotheses: Vec<Hypothesis>,
    /// True when the set holds every valid hypothesis.
    pub exhausted: bool,
    pub elapsed: Duration,
    /// Time from the start of the search until each hypothesis was final.
    pub found_after: Vec<Duration>,
}

impl ResultSet {
    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn costs(&self) -> Vec<crate::model::Cost> {
        self.hypotheses.iter().map(|h| h.total_cost).collect()
    }

    /// Position of the first hypothesis with the same state sequence as
    /// `truth`.
    pub fn position_of(&self, truth: &Hypothesis) -> Option<usize> {
        let seq = truth.state_sequence();
        self.hypotheses.iter().position(|h| h.state_sequence() == seq)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SearchError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("product graph exceeds the node bound of {bound}")]
    ResourceLimit { bound: usize },
}

/// True iff some result enters the same locations in the same order as
/// `truth`.
pub fn check_ground_truth(results: &ResultSet, truth: &Hypothesis) -> bool {
    results.position_of(truth).is_some()
}

pub(crate) fn assign_ranks(hyps: &mut [Hypothesis]) {
    for (i, h) in hyps.iter_mut().enumerate() {
        h.rank = i + 1;
    }
}

/// Structural checks shared by the engine and the oracle.
pub(crate) fn validate_problem(p: &crate::compile::PlanningProblem) -> Result<(), SearchError> {
    let bad = |m: &str| Err(SearchError::InvalidArgument(m.to_string()));
    let nf = p.fluents.len();
    if p.locations.first() != Some(&crate::compile::ProblemLocation::Init) {
        return bad("the first location must be the init sentinel");
    }
    if p.fluents != p.layout().fluents() {
        return bad("fluents do not follow the compiled layout");
    }
    if p.initial.iter().chain(&p.goal).any(|&f| f >= nf) {
        return bad("initial state or goal mentions an unknown fluent");
    }
    for a in &p.actions {
        if a.pre.iter().chain(&a.add).chain(&a.del).any(|&f| f >= nf) {
            return bad("an action mentions an unknown fluent");
        }
    }
    Ok(())
}
