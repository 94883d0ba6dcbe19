use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::time::Instant;

use super::{assign_ranks, validate_problem, ResultSet, SearchError};
use crate::compile::{ActionId, FluentId, PlanningProblem};
use crate::model::{rank_order, Cost};

pub const DEFAULT_NODE_BOUND: usize = 1_000_000;

pub fn exact_oracle(problem: &PlanningProblem, k: usize) -> Result<ResultSet, SearchError> {
    exact_oracle_with(problem, k, DEFAULT_NODE_BOUND)
}

/// Top-k by dynamic programming over the explicit state graph.
///
/// Builds every reachable STRIPS state (goal states are sinks), orders them
/// topologically and keeps, per state, every prefix no worse than the k-th
/// cheapest. Fails with a resource error past `node_bound` states.
pub fn exact_oracle_with(problem: &PlanningProblem, k: usize, node_bound: usize) -> Result<ResultSet, SearchError> {
    if k == 0 {
        return Err(SearchError::InvalidArgument("k must be at least 1".into()));
    }
    validate_problem(problem)?;
    let start = Instant::now();
    let goal: BTreeSet<FluentId> = problem.goal.iter().copied().collect();

    let mut states: Vec<BTreeSet<FluentId>> = Vec::new();
    let mut ids: HashMap<BTreeSet<FluentId>, usize> = HashMap::new();
    let mut edges: Vec<Vec<(ActionId, usize)>> = Vec::new();
    let init: BTreeSet<FluentId> = problem.initial.iter().copied().collect();
    ids.insert(init.clone(), 0);
    states.push(init);
    edges.push(Vec::new());
    let mut queue = VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        if goal.is_subset(&states[v]) {
            continue;
        }
        for (a, act) in problem.actions.iter().enumerate() {
            if !act.pre.iter().all(|f| states[v].contains(f)) {
                continue;
            }
            let mut next = states[v].clone();
            for f in &act.del {
                next.remove(f);
            }
            next.extend(act.add.iter().copied());
            let w = match ids.get(&next) {
                Some(&w) => w,
                None => {
                    if states.len() >= node_bound {
                        return Err(SearchError::ResourceLimit { bound: node_bound });
                    }
                    let w = states.len();
                    ids.insert(next.clone(), w);
                    states.push(next);
                    edges.push(Vec::new());
                    queue.push_back(w);
                    w
                }
            };
            edges[v].push((a, w));
        }
    }

    let n = states.len();
    let mut indegree = vec![0usize; n];
    for out in &edges {
        for &(_, w) in out {
            indegree[w] += 1;
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut ready: VecDeque<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    while let Some(v) = ready.pop_front() {
        order.push(v);
        for &(_, w) in &edges[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                ready.push_back(w);
            }
        }
    }
    if order.len() != n {
        return Err(SearchError::InvalidArgument("the state graph has a cycle".into()));
    }

    // entry: (parent entry, action, cost); usize::MAX marks the root
    let mut arena: Vec<(usize, usize, Cost)> = vec![(usize::MAX, usize::MAX, 0)];
    let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
    lists[0].push(0);
    let mut pruned = false;
    for &v in &order {
        let mut list = std::mem::take(&mut lists[v]);
        if list.len() > k {
            list.sort_by_key(|&e| arena[e].2);
            let kth = arena[list[k - 1]].2;
            let before = list.len();
            list.retain(|&e| arena[e].2 <= kth);
            pruned |= list.len() < before;
        }
        for &(a, w) in &edges[v] {
            for &e in &list {
                arena.push((e, a, arena[e].2 + problem.actions[a].cost));
                lists[w].push(arena.len() - 1);
            }
        }
        lists[v] = list;
    }

    let mut goal_entries: Vec<usize> =
        (0..n).filter(|&v| goal.is_subset(&states[v])).flat_map(|v| lists[v].iter().copied()).collect();
    goal_entries.sort_by_key(|&e| arena[e].2);
    let total = goal_entries.len();
    if total > k {
        let kth = arena[goal_entries[k - 1]].2;
        goal_entries.retain(|&e| arena[e].2 <= kth);
    }
    let mut seen = HashSet::new();
    let mut hypotheses = Vec::new();
    for e in goal_entries {
        let mut plan = Vec::new();
        let mut cur = e;
        while arena[cur].0 != usize::MAX {
            plan.push(arena[cur].1);
            cur = arena[cur].0;
        }
        plan.reverse();
        let h = problem.hypothesis_for(&plan);
        if seen.insert(h.steps.clone()) {
            hypotheses.push(h);
        }
    }
    hypotheses.sort_by(rank_order);
    hypotheses.truncate(k);
    assign_ranks(&mut hypotheses);
    let elapsed = start.elapsed();
    Ok(ResultSet {
        found_after: vec![elapsed; hypotheses.len()],
        hypotheses,
        exhausted: !pruned && total <= k,
        elapsed,
    })
}
