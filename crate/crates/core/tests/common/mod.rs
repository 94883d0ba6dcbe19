#![allow(dead_code)]

use std::collections::HashSet;

use hypforge_core::eval::generate_random_model;
use hypforge_core::model::{check_hypothesis, cost_of, Cost, CostParams, Hypothesis, ModelSpec, Step, Trace};
use hypforge_core::compile::PlanningProblem;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random model with 3..=10 states and a trace of 0..=max_obs symbols drawn
/// uniformly from its vocabulary.
pub fn random_instance(seed: u64, max_states: usize, max_obs: usize) -> (ModelSpec, Trace) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n = rng.gen_range(3..=max_states);
    let model = generate_random_model(n, 0.6, seed).unwrap();
    let vocab: Vec<String> = model.observation_vocab().into_iter().collect();
    let len = rng.gen_range(0..=max_obs);
    let trace = Trace::from_symbols((0..len).map(|_| vocab[rng.gen_range(0..vocab.len())].clone()));
    (model, trace)
}

/// Every valid hypothesis with cost at most `bound`, built step by step from
/// the model's location graph without going through the compiler.
pub fn brute_force(model: &ModelSpec, trace: &Trace, params: &CostParams, cap: usize, bound: Cost) -> Vec<Hypothesis> {
    let graph = model.graph();
    let n = trace.len();
    let mut out = Vec::new();

    struct Ctx<'a> {
        graph: hypforge_core::model::LocationGraph,
        trace: &'a Trace,
        params: &'a CostParams,
        cap: usize,
        bound: Cost,
        n: usize,
    }

    #[allow(clippy::too_many_arguments)]
    fn go(
        cx: &Ctx,
        steps: &mut Vec<Step>,
        last_enter: usize,
        loc: usize,
        next: usize,
        chain: usize,
        can_stay: bool,
        cost: Cost,
        out: &mut Vec<Hypothesis>,
    ) {
        if cost > cx.bound {
            return;
        }
        if next == cx.n {
            out.push(Hypothesis { steps: steps.clone(), total_cost: cost, rank: 0 });
            return;
        }
        let sym = cx.trace.symbol(next);
        if can_stay && cx.graph.explains(loc, sym) {
            if let Step::EnterState { explained, .. } = &mut steps[last_enter] {
                explained.push(next);
            }
            go(cx, steps, last_enter, loc, next + 1, chain, can_stay, cost, out);
            if let Step::EnterState { explained, .. } = &mut steps[last_enter] {
                explained.pop();
            }
        }
        if chain == 0 {
            steps.push(Step::Discard { index: next });
            go(cx, steps, last_enter, loc, next + 1, 0, can_stay, cost + cx.params.discard_cost, out);
            steps.pop();
        }
        for &t in cx.graph.successors(loc) {
            let id = cx.graph.locations[t].id.clone();
            if cx.graph.is_hyper(t) {
                if chain < cx.cap {
                    steps.push(Step::EnterHyperstate { hyper: id });
                    let c = cost + cx.params.unobserved_step_cost;
                    go(cx, steps, last_enter, t, next, chain + 1, false, c, out);
                    steps.pop();
                }
                continue;
            }
            let entry = cx.params.entry_cost(cx.graph.state_type(t).unwrap());
            if cx.graph.explains(t, sym) {
                steps.push(Step::enter(id.clone(), vec![next]));
                let at = steps.len() - 1;
                go(cx, steps, at, t, next + 1, 0, true, cost + entry, out);
                steps.pop();
            }
            if chain < cx.cap {
                steps.push(Step::enter(id, vec![]));
                let at = steps.len() - 1;
                let c = cost + entry + cx.params.unobserved_step_cost;
                go(cx, steps, at, t, next, chain + 1, false, c, out);
                steps.pop();
            }
        }
    }

    let cx = Ctx { graph: graph.clone(), trace, params, cap, bound, n };
    for &s in graph.starts() {
        let entry = params.entry_cost(graph.state_type(s).unwrap());
        let mut steps = vec![Step::enter(graph.locations[s].id.clone(), vec![])];
        go(&cx, &mut steps, 0, s, 0, 0, true, entry, &mut out);
    }

    let mut seen = HashSet::new();
    for h in &out {
        assert!(seen.insert(h.steps.clone()), "enumerator produced a duplicate: {:?}", h.steps);
        check_hypothesis(model, trace, h, cap).expect("enumerated hypothesis is valid");
        assert_eq!(cost_of(model, h, params).unwrap(), h.total_cost);
    }
    out.sort_by_key(|h| h.total_cost);
    out
}

/// The `k` smallest costs of a cost-sorted list.
pub fn k_smallest(hyps: &[Hypothesis], k: usize) -> Vec<Cost> {
    hyps.iter().take(k).map(|h| h.total_cost).collect()
}

/// Uniformly random applicable actions until the goal holds; restarts on
/// dead ends. `None` if no plan turned up within the attempt budget.
pub fn random_plan(p: &PlanningProblem, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    for _ in 0..200 {
        let mut state: HashSet<usize> = p.initial.iter().copied().collect();
        let mut plan = Vec::new();
        loop {
            if p.goal.iter().all(|f| state.contains(f)) {
                return Some(plan);
            }
            let applicable: Vec<usize> =
                (0..p.actions.len()).filter(|&a| p.actions[a].pre.iter().all(|f| state.contains(f))).collect();
            let Some(&a) = applicable.choose(rng) else { break };
            for f in &p.actions[a].del {
                state.remove(f);
            }
            state.extend(p.actions[a].add.iter().copied());
            plan.push(a);
        }
    }
    None
}

