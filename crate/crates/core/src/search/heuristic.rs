use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::compile::{FluentLayout, PlanningProblem};
use crate::model::Cost;

pub(crate) const INF: Cost = Cost::MAX;

/// Exact goal distance in the abstraction that keeps only the location and
/// the next pending trace index and forgets the chain counter and the
/// anchored flag. Every action maps to an abstract edge of equal cost, so
/// the distance is admissible and consistent.
pub(crate) struct Heuristic {
    nloc: usize,
    table: Vec<Cost>,
}

struct AbstractAction {
    src: Option<usize>,
    /// `None` keeps the location.
    dst: Option<usize>,
    consumes: Option<usize>,
    cost: Cost,
}

impl Heuristic {
    pub fn new(p: &PlanningProblem) -> Self {
        let layout = p.layout();
        let nloc = p.locations.len();
        let n = p.trace_len();
        let abs: Vec<AbstractAction> = p
            .actions
            .iter()
            .map(|a| AbstractAction {
                src: a.pre.iter().copied().find(|&f| f < nloc),
                dst: a.add.iter().copied().find(|&f| f < nloc),
                consumes: (0..n).find(|&i| a.pre.contains(&layout.pending(i))),
                cost: a.cost,
            })
            .collect();

        // location moves that leave the trace index alone
        let mut moves: BTreeMap<(usize, usize), Cost> = BTreeMap::new();
        for a in abs.iter().filter(|a| a.consumes.is_none()) {
            let Some(dst) = a.dst else { continue };
            let srcs: Vec<usize> = match a.src {
                Some(s) => vec![s],
                None => (0..nloc).collect(),
            };
            for s in srcs.into_iter().filter(|&s| s != dst) {
                let e = moves.entry((s, dst)).or_insert(INF);
                *e = (*e).min(a.cost);
            }
        }
        let mut preds: Vec<Vec<(usize, Cost)>> = vec![Vec::new(); nloc];
        for (&(s, t), &c) in &moves {
            preds[t].push((s, c));
        }
        let mut by_index: Vec<Vec<&AbstractAction>> = vec![Vec::new(); n];
        for a in &abs {
            if let Some(i) = a.consumes {
                by_index[i].push(a);
            }
        }

        let mut table = vec![INF; nloc * (n + 1)];
        let mut layer: Vec<Cost> = (0..nloc).map(|l| if l == 0 { INF } else { 0 }).collect();
        relax(&mut layer, &preds);
        table[n * nloc..].copy_from_slice(&layer);
        for i in (0..n).rev() {
            let above = &table[(i + 1) * nloc..(i + 2) * nloc];
            let mut base = vec![INF; nloc];
            for a in &by_index[i] {
                let srcs: Vec<usize> = match a.src {
                    Some(s) => vec![s],
                    None => (0..nloc).collect(),
                };
                for s in srcs {
                    let d = above[a.dst.unwrap_or(s)];
                    base[s] = base[s].min(d.saturating_add(a.cost));
                }
            }
            relax(&mut base, &preds);
            table[i * nloc..(i + 1) * nloc].copy_from_slice(&base);
        }
        Self { nloc, table }
    }

    pub fn get(&self, loc: usize, index: usize) -> Cost {
        self.table[index * self.nloc + loc]
    }
}

/// Backward Dijkstra: `dist[s] <= c + dist[t]` for every move `s -> t`.
fn relax(dist: &mut [Cost], preds: &[Vec<(usize, Cost)>]) {
    let mut heap: BinaryHeap<Reverse<(Cost, usize)>> =
        dist.iter().enumerate().filter(|(_, &d)| d < INF).map(|(l, &d)| Reverse((d, l))).collect();
    while let Some(Reverse((d, t))) = heap.pop() {
        if d > dist[t] {
            continue;
        }
        for &(s, c) in &preds[t] {
            let nd = d.saturating_add(c);
            if nd < dist[s] {
                dist[s] = nd;
                heap.push(Reverse((nd, s)));
            }
        }
    }
}

/// Location and next pending index of a bit-packed state.
pub(crate) fn locate(layout: &FluentLayout, bits: &[u64]) -> (usize, usize) {
    let test = |f: usize| bits[f / 64] >> (f % 64) & 1 == 1;
    let loc = (0..layout.locations).find(|&l| test(layout.at(l))).unwrap_or(0);
    let index = (0..layout.trace_len).find(|&i| test(layout.pending(i))).unwrap_or(layout.trace_len);
    (loc, index)
}
