use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::ops::Deref;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::heuristic::{locate, Heuristic, INF};
use super::{assign_ranks, validate_problem, ResultSet, SearchConfig, SearchError};
use crate::compile::{ActionId, FluentId, PlanningProblem};
use crate::model::{rank_order, Cost, Hypothesis, Step};

const NONE: u32 = u32::MAX;
const CHECK_EVERY: u64 = 256;

type Bits = Box<[u64]>;

fn bits_of(words: usize, fluents: &[FluentId]) -> Bits {
    let mut b = vec![0u64; words].into_boxed_slice();
    for &f in fluents {
        b[f / 64] |= 1 << (f % 64);
    }
    b
}

fn subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

struct PathNode {
    parent: u32,
    action: u32,
    state: u32,
    g: Cost,
}

pub(crate) enum Next {
    /// Every remaining hypothesis of the cheapest outstanding cost, in rank
    /// order.
    Class(Vec<Hypothesis>),
    Exhausted,
    Interrupted,
}

/// A* over plan prefixes with an optional per-state expansion limit.
pub(crate) struct Searcher<P> {
    problem: P,
    words: usize,
    heuristic: Heuristic,
    by_loc: Vec<Vec<ActionId>>,
    floating: Vec<ActionId>,
    pre: Vec<Bits>,
    add: Vec<Bits>,
    del: Vec<Bits>,
    goal: Bits,
    states: Vec<Bits>,
    state_ids: HashMap<Bits, u32>,
    state_loc: Vec<u32>,
    state_h: Vec<Cost>,
    state_goal: Vec<bool>,
    /// Expansions per state and the cost at which the limit was reached.
    pops: Vec<(usize, Cost)>,
    pop_limit: Option<usize>,
    arena: Vec<PathNode>,
    frontier: BinaryHeap<Reverse<(Cost, Cost, u64, u32)>>,
    seq: u64,
    goals: Vec<u32>,
    seen: HashSet<Vec<Step>>,
    pub pruned: bool,
    pub expansions: u64,
}

impl<P: Deref<Target = PlanningProblem>> Searcher<P> {
    pub fn new(problem: P, pop_limit: Option<usize>) -> Result<Self, SearchError> {
        validate_problem(&problem)?;
        let words = problem.fluents.len().div_ceil(64).max(1);
        let nloc = problem.locations.len();
        let mut by_loc = vec![Vec::new(); nloc];
        let mut floating = Vec::new();
        for (i, a) in problem.actions.iter().enumerate() {
            match a.pre.iter().find(|&&f| f < nloc) {
                Some(&l) => by_loc[l].push(i),
                None => floating.push(i),
            }
        }
        let pre = problem.actions.iter().map(|a| bits_of(words, &a.pre)).collect();
        let add = problem.actions.iter().map(|a| bits_of(words, &a.add)).collect();
        let del = problem.actions.iter().map(|a| bits_of(words, &a.del)).collect();
        let goal = bits_of(words, &problem.goal);
        let heuristic = Heuristic::new(&problem);
        let mut s = Self {
            words,
            heuristic,
            by_loc,
            floating,
            pre,
            add,
            del,
            goal,
            states: Vec::new(),
            state_ids: HashMap::new(),
            state_loc: Vec::new(),
            state_h: Vec::new(),
            state_goal: Vec::new(),
            pops: Vec::new(),
            pop_limit,
            arena: Vec::new(),
            frontier: BinaryHeap::new(),
            seq: 0,
            goals: Vec::new(),
            seen: HashSet::new(),
            pruned: false,
            expansions: 0,
            problem,
        };
        let init = bits_of(words, &s.problem.initial);
        let root_state = s.intern(init);
        s.push(NONE, NONE, root_state, 0);
        Ok(s)
    }

    fn intern(&mut self, bits: Bits) -> u32 {
        if let Some(&id) = self.state_ids.get(&bits) {
            return id;
        }
        let id = self.states.len() as u32;
        let layout = self.problem.layout();
        let (loc, index) = locate(&layout, &bits);
        self.state_loc.push(loc as u32);
        self.state_h.push(self.heuristic.get(loc, index));
        self.state_goal.push(subset(&self.goal, &bits));
        self.pops.push((0, 0));
        self.state_ids.insert(bits.clone(), id);
        self.states.push(bits);
        id
    }

    fn over_limit(&self, state: u32, g: Cost) -> bool {
        match self.pop_limit {
            Some(k) => {
                let (count, kth) = self.pops[state as usize];
                count >= k && g > kth
            }
            None => false,
        }
    }

    fn push(&mut self, parent: u32, action: u32, state: u32, g: Cost) {
        let h = self.state_h[state as usize];
        if h == INF {
            return;
        }
        if self.over_limit(state, g) {
            self.pruned = true;
            return;
        }
        let node = self.arena.len() as u32;
        self.arena.push(PathNode { parent, action, state, g });
        self.frontier.push(Reverse((g + h, h, self.seq, node)));
        self.seq += 1;
    }

    fn expand(&mut self, node: u32) {
        let (state, g) = {
            let n = &self.arena[node as usize];
            (n.state, n.g)
        };
        let loc = self.state_loc[state as usize] as usize;
        let cur = self.states[state as usize].clone();
        let candidates: Vec<ActionId> = self.by_loc[loc].iter().chain(&self.floating).copied().collect();
        for a in candidates {
            if !subset(&self.pre[a], &cur) {
                continue;
            }
            let next: Bits = (0..self.words).map(|w| (cur[w] & !self.del[a][w]) | self.add[a][w]).collect();
            let ns = self.intern(next);
            let cost = self.problem.actions[a].cost;
            self.push(node, a as u32, ns, g + cost);
        }
    }

    fn plan_of(&self, mut node: u32) -> Vec<ActionId> {
        let mut plan = Vec::new();
        while node != NONE {
            let n = &self.arena[node as usize];
            if n.action != NONE {
                plan.push(n.action as usize);
            }
            node = n.parent;
        }
        plan.reverse();
        plan
    }

    fn emit(&mut self) -> Next {
        let nodes = std::mem::take(&mut self.goals);
        let mut class: Vec<Hypothesis> = Vec::with_capacity(nodes.len());
        for node in nodes {
            let h = self.problem.hypothesis_for(&self.plan_of(node));
            if self.seen.insert(h.steps.clone()) {
                class.push(h);
            }
        }
        class.sort_by(rank_order);
        Next::Class(class)
    }

    pub fn frontier_is_empty(&self) -> bool {
        self.frontier.is_empty() && self.goals.is_empty()
    }

    pub fn next_class(&mut self, deadline: Option<Instant>, cancel: Option<&AtomicBool>) -> Next {
        loop {
            if self.expansions.is_multiple_of(CHECK_EVERY) {
                let late = deadline.is_some_and(|d| Instant::now() >= d);
                if late || cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
                    return Next::Interrupted;
                }
            }
            let Some(&Reverse((f, _, _, node))) = self.frontier.peek() else {
                return if self.goals.is_empty() { Next::Exhausted } else { self.emit() };
            };
            if let Some(&first) = self.goals.first() {
                if f > self.arena[first as usize].g {
                    return self.emit();
                }
            }
            self.frontier.pop();
            self.expansions += 1;
            let (state, g) = {
                let n = &self.arena[node as usize];
                (n.state as usize, n.g)
            };
            if self.over_limit(state as u32, g) {
                self.pruned = true;
                continue;
            }
            let entry = &mut self.pops[state];
            entry.0 += 1;
            if Some(entry.0) == self.pop_limit {
                entry.1 = g;
            }
            if self.state_goal[state] {
                self.goals.push(node);
            } else {
                self.expand(node);
            }
        }
    }
}

/// The `k` best hypotheses under rank order, found within the time budget.
///
/// On expiry the result holds only cost classes that were fully
/// enumerated, so it is always a prefix of the unbounded answer.
pub fn find_top_k(problem: &PlanningProblem, config: &SearchConfig) -> Result<ResultSet, SearchError> {
    config.validate()?;
    let start = Instant::now();
    let deadline = start.checked_add(config.time_budget);
    let mut searcher = Searcher::new(problem, Some(config.k))?;
    let mut hypotheses = Vec::new();
    let mut found_after = Vec::new();
    let mut complete = false;
    loop {
        match searcher.next_class(deadline, config.cancel.as_deref()) {
            Next::Class(class) => {
                let at = start.elapsed();
                let room = config.k - hypotheses.len();
                let truncated = class.len() > room;
                hypotheses.extend(class.into_iter().take(room));
                found_after.resize(hypotheses.len(), at);
                if hypotheses.len() == config.k {
                    complete = !truncated && searcher.frontier_is_empty() && !searcher.pruned;
                    break;
                }
            }
            Next::Exhausted => {
                complete = !searcher.pruned;
                break;
            }
            Next::Interrupted => break,
        }
    }
    assign_ranks(&mut hypotheses);
    Ok(ResultSet { hypotheses, exhausted: complete, elapsed: start.elapsed(), found_after })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamStatus {
    /// The buffer holds the requested number of hypotheses.
    Ready,
    /// No hypotheses remain beyond the buffer.
    Exhausted,
    /// Budget or cancellation stopped the search; it can be resumed.
    Interrupted,
}

/// Resumable enumeration of all hypotheses in rank order. Pausing keeps the
/// frontier, so later batches continue where the last one stopped.
pub struct HypothesisStream {
    searcher: Searcher<Arc<PlanningProblem>>,
    buffer: VecDeque<Hypothesis>,
    emitted: usize,
    finished: bool,
}

impl HypothesisStream {
    pub fn new(problem: Arc<PlanningProblem>) -> Result<Self, SearchError> {
        Ok(Self { searcher: Searcher::new(problem, None)?, buffer: VecDeque::new(), emitted: 0, finished: false })
    }

    pub fn emitted(&self) -> usize {
        self.emitted
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// Searches until at least `want` hypotheses are buffered.
    pub fn fill(&mut self, want: usize, budget: Duration, cancel: Option<&AtomicBool>) -> StreamStatus {
        let deadline = Instant::now().checked_add(budget);
        while self.buffer.len() < want {
            if self.finished {
                return StreamStatus::Exhausted;
            }
            match self.searcher.next_class(deadline, cancel) {
                Next::Class(class) => self.buffer.extend(class),
                Next::Exhausted => self.finished = true,
                Next::Interrupted => return StreamStatus::Interrupted,
            }
        }
        StreamStatus::Ready
    }

    /// Removes up to `n` buffered hypotheses and numbers them.
    pub fn take(&mut self, n: usize) -> Vec<Hypothesis> {
        let n = n.min(self.buffer.len());
        let mut out: Vec<Hypothesis> = self.buffer.drain(..n).collect();
        for h in &mut out {
            self.emitted += 1;
            h.rank = self.emitted;
        }
        out
    }

    /// Convenience: fill then take.
    pub fn next_batch(&mut self, n: usize, budget: Duration) -> (Vec<Hypothesis>, StreamStatus) {
        let status = self.fill(n, budget, None);
        (self.take(n), status)
    }
}
