//! Compiles a model and an observation trace into a grounded planning
//! problem with action costs.
//!
//! The observations are compiled into the state: `pending-i` marks the next
//! trace index to handle, and every plan handles indices strictly in order,
//! either by explaining the observation in some state or by discarding it.
//! Location changes that explain nothing are unobserved steps; at most
//! `chain_cap` of them may occur in a row, which keeps the plan space finite.
//!
//! Fluents:
//! * `at(l)` for the init sentinel, every state and every multi-member
//!   hyperstate placeholder; exactly one holds in every reachable state;
//! * `pending(i)` for `i < n`, and `done` once all are handled;
//! * `chain(c)` for `c <= chain_cap`, the current run of unobserved steps;
//! * `anchored`: the current state was entered by an explanation (or is the
//!   initial entry), so it may explain further observations in place;
//! * `open`: observations remain; `started`: the start state was entered.

mod pddl;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_model, Cost, CostParams, Hypothesis, LocationKind, ModelError, ModelSpec, StateType, Step, Trace};

pub use pddl::{export_pddl, read_pddl, PddlError, PddlFiles};

pub type FluentId = usize;
pub type ActionId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemLocation {
    Init,
    State { id: String, state_type: StateType },
    Hyper { id: String },
}

impl ProblemLocation {
    pub fn id(&self) -> Option<&str> {
        match self {
            ProblemLocation::Init => None,
            ProblemLocation::State { id, .. } | ProblemLocation::Hyper { id } => Some(id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fluent {
    /// Index into `PlanningProblem::locations`.
    At(usize),
    Pending(usize),
    Done,
    Chain(usize),
    Anchored,
    Open,
    Started,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionKind {
    /// Enter a start state; the only action available initially.
    Begin { state: String },
    /// Move to `state` and explain trace index `index` there.
    Explain { from: String, state: String, index: usize },
    /// Explain `index` in the current state without moving.
    ExplainInPlace { state: String, index: usize },
    Discard { index: usize },
    UnobservedStep { from: String, to: String, chain: usize },
    EnterHyper { from: String, hyper: String, chain: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundAction {
    pub kind: ActionKind,
    pub cost: Cost,
    pub pre: Vec<FluentId>,
    pub add: Vec<FluentId>,
    pub del: Vec<FluentId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanningProblem {
    pub name: String,
    pub trace: Vec<String>,
    pub locations: Vec<ProblemLocation>,
    pub fluents: Vec<Fluent>,
    pub actions: Vec<GroundAction>,
    pub initial: Vec<FluentId>,
    pub goal: Vec<FluentId>,
    pub params: CostParams,
    pub chain_cap: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CompileOptions {
    /// Longest run of unobserved steps; defaults to the number of states.
    pub chain_cap: Option<usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("model is invalid: {0}")]
    InvalidModel(String),
    #[error("unknown observation `{symbol}` at trace position {position}")]
    UnknownObservation { symbol: String, position: usize },
    #[error(transparent)]
    Params(#[from] ModelError),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid plan at action {action_index}: {reason}")]
pub struct DecodeError {
    pub action_index: usize,
    pub reason: String,
}

/// Fluent numbering shared by the compiler and the PDDL reader.
pub(crate) struct FluentLayout {
    pub locations: usize,
    pub trace_len: usize,
    pub chain_cap: usize,
}

impl FluentLayout {
    pub fn at(&self, loc: usize) -> FluentId {
        loc
    }
    pub fn pending(&self, i: usize) -> FluentId {
        if i == self.trace_len {
            self.done()
        } else {
            self.locations + i
        }
    }
    pub fn done(&self) -> FluentId {
        self.locations + self.trace_len
    }
    pub fn chain(&self, c: usize) -> FluentId {
        self.done() + 1 + c
    }
    pub fn anchored(&self) -> FluentId {
        self.chain(self.chain_cap) + 1
    }
    pub fn open(&self) -> FluentId {
        self.anchored() + 1
    }
    pub fn started(&self) -> FluentId {
        self.anchored() + 2
    }
    pub fn fluents(&self) -> Vec<Fluent> {
        let mut f: Vec<Fluent> = (0..self.locations).map(Fluent::At).collect();
        f.extend((0..self.trace_len).map(Fluent::Pending));
        f.push(Fluent::Done);
        f.extend((0..=self.chain_cap).map(Fluent::Chain));
        f.extend([Fluent::Anchored, Fluent::Open, Fluent::Started]);
        f
    }
}

fn sorted(mut v: Vec<FluentId>) -> Vec<FluentId> {
    v.sort_unstable();
    v.dedup();
    v
}

pub fn compile(model: &ModelSpec, trace: &Trace, params: &CostParams) -> Result<PlanningProblem, CompileError> {
    compile_with(model, trace, params, CompileOptions::default())
}

pub fn compile_with(
    model: &ModelSpec,
    trace: &Trace,
    params: &CostParams,
    options: CompileOptions,
) -> Result<PlanningProblem, CompileError> {
    params.validate()?;
    let errors: Vec<String> = validate_model(model).into_iter().filter(|d| d.is_error()).map(|d| d.message).collect();
    if !errors.is_empty() {
        return Err(CompileError::InvalidModel(errors.join("; ")));
    }
    if let Some((position, symbol)) = trace.unknown_symbols(model).into_iter().next() {
        return Err(CompileError::UnknownObservation { symbol, position });
    }

    let graph = model.graph();
    let n = trace.len();
    let cap = options.chain_cap.unwrap_or(graph.state_count());
    // problem location 0 is the init sentinel; graph location g is g + 1
    let mut locations = vec![ProblemLocation::Init];
    locations.extend(graph.locations.iter().map(|l| match l.kind {
        LocationKind::State(t) => ProblemLocation::State { id: l.id.clone(), state_type: t },
        LocationKind::Hyper => ProblemLocation::Hyper { id: l.id.clone() },
    }));
    let layout = FluentLayout { locations: locations.len(), trace_len: n, chain_cap: cap };
    let at = |g: usize| layout.at(g + 1);
    let name = |g: usize| graph.locations[g].id.clone();
    let all_chains: Vec<FluentId> = (0..=cap).map(|c| layout.chain(c)).collect();
    let finish = |i: usize| -> Vec<FluentId> {
        if i + 1 == n {
            vec![layout.open()]
        } else {
            Vec::new()
        }
    };

    let mut actions = Vec::new();
    for &s in graph.starts() {
        let ty = graph.state_type(s).expect("start is a state");
        actions.push(GroundAction {
            kind: ActionKind::Begin { state: name(s) },
            cost: params.entry_cost(ty),
            pre: vec![layout.at(0)],
            add: sorted(vec![at(s), layout.started(), layout.anchored()]),
            del: vec![layout.at(0)],
        });
    }
    for from in 0..graph.len() {
        for &to in graph.successors(from) {
            match graph.state_type(to) {
                Some(ty) => {
                    for i in (0..n).filter(|&i| graph.explains(to, trace.symbol(i))) {
                        let mut del = vec![at(from), layout.pending(i)];
                        del.extend(&all_chains);
                        del.extend(finish(i));
                        actions.push(GroundAction {
                            kind: ActionKind::Explain { from: name(from), state: name(to), index: i },
                            cost: params.entry_cost(ty),
                            pre: sorted(vec![at(from), layout.pending(i)]),
                            add: sorted(vec![at(to), layout.pending(i + 1), layout.chain(0), layout.anchored()]),
                            del: sorted(del),
                        });
                    }
                    if n > 0 {
                        for c in 0..cap {
                            actions.push(GroundAction {
                                kind: ActionKind::UnobservedStep { from: name(from), to: name(to), chain: c },
                                cost: params.entry_cost(ty) + params.unobserved_step_cost,
                                pre: sorted(vec![at(from), layout.chain(c), layout.open()]),
                                add: sorted(vec![at(to), layout.chain(c + 1)]),
                                del: sorted(vec![at(from), layout.chain(c), layout.anchored()]),
                            });
                        }
                    }
                }
                None if n > 0 => {
                    for c in 0..cap {
                        actions.push(GroundAction {
                            kind: ActionKind::EnterHyper { from: name(from), hyper: name(to), chain: c },
                            cost: params.unobserved_step_cost,
                            pre: sorted(vec![at(from), layout.chain(c), layout.open()]),
                            add: sorted(vec![at(to), layout.chain(c + 1)]),
                            del: sorted(vec![at(from), layout.chain(c), layout.anchored()]),
                        });
                    }
                }
                None => {}
            }
        }
    }
    for s in 0..graph.state_count() {
        for i in (0..n).filter(|&i| graph.explains(s, trace.symbol(i))) {
            let mut del = vec![layout.pending(i)];
            del.extend(finish(i));
            actions.push(GroundAction {
                kind: ActionKind::ExplainInPlace { state: name(s), index: i },
                cost: 0,
                pre: sorted(vec![at(s), layout.pending(i), layout.anchored()]),
                add: vec![layout.pending(i + 1)],
                del: sorted(del),
            });
        }
    }
    for i in 0..n {
        let mut del = vec![layout.pending(i)];
        del.extend(finish(i));
        actions.push(GroundAction {
            kind: ActionKind::Discard { index: i },
            cost: params.discard_cost,
            pre: sorted(vec![layout.started(), layout.chain(0), layout.pending(i)]),
            add: vec![layout.pending(i + 1)],
            del: sorted(del),
        });
    }

    let mut initial = vec![layout.at(0), layout.pending(0), layout.chain(0)];
    if n > 0 {
        initial.push(layout.open());
    }
    Ok(PlanningProblem {
        name: model.name.clone(),
        trace: trace.symbols().into_iter().map(String::from).collect(),
        fluents: layout.fluents(),
        locations,
        actions,
        initial: sorted(initial),
        goal: sorted(vec![layout.done(), layout.started()]),
        params: *params,
        chain_cap: cap,
    })
}

impl PlanningProblem {
    pub fn trace_len(&self) -> usize {
        self.trace.len()
    }

    pub(crate) fn layout(&self) -> FluentLayout {
        FluentLayout { locations: self.locations.len(), trace_len: self.trace.len(), chain_cap: self.chain_cap }
    }

    pub fn count_actions(&self, pred: impl Fn(&ActionKind) -> bool) -> usize {
        self.actions.iter().filter(|a| pred(&a.kind)).count()
    }

    pub fn plan_cost(&self, plan: &[ActionId]) -> Cost {
        plan.iter().map(|&a| self.actions[a].cost).sum()
    }

    /// Builds the hypothesis a plan stands for, trusting that the plan is
    /// valid for this problem. Use [`decode`] to validate against the model.
    pub fn hypothesis_for(&self, plan: &[ActionId]) -> Hypothesis {
        let mut steps: Vec<Step> = Vec::new();
        let mut last_enter = 0usize;
        for &a in plan {
            match &self.actions[a].kind {
                ActionKind::Begin { state } | ActionKind::UnobservedStep { to: state, .. } => {
                    last_enter = steps.len();
                    steps.push(Step::enter(state.clone(), vec![]));
                }
                ActionKind::Explain { state, index, .. } => {
                    last_enter = steps.len();
                    steps.push(Step::enter(state.clone(), vec![*index]));
                }
                ActionKind::ExplainInPlace { index, .. } => {
                    if let Some(Step::EnterState { explained, .. }) = steps.get_mut(last_enter) {
                        explained.push(*index);
                    }
                }
                ActionKind::Discard { index } => steps.push(Step::Discard { index: *index }),
                ActionKind::EnterHyper { hyper, .. } => steps.push(Step::EnterHyperstate { hyper: hyper.clone() }),
            }
        }
        Hypothesis { steps, total_cost: self.plan_cost(plan), rank: 0 }
    }

    /// Inverse of [`PlanningProblem::hypothesis_for`]: the unique plan whose
    /// decoding is `h`, if `h` is valid for this problem.
    pub fn encode(&self, h: &Hypothesis) -> Option<Vec<ActionId>> {
        let lookup: HashMap<&ActionKind, ActionId> = self.actions.iter().enumerate().map(|(i, a)| (&a.kind, i)).collect();
        let mut kinds: Vec<ActionKind> = Vec::new();
        let mut current: Option<String> = None;
        let mut chain = 0usize;
        let mut stays: Vec<usize> = Vec::new();
        let flush = |stays: &mut Vec<usize>, kinds: &mut Vec<ActionKind>, cur: &Option<String>, upto: Option<usize>| {
            let keep = stays.iter().position(|&i| upto.is_some_and(|u| i > u)).unwrap_or(stays.len());
            for i in stays.drain(..keep) {
                kinds.push(ActionKind::ExplainInPlace { state: cur.clone().unwrap_or_default(), index: i });
            }
        };
        for (pos, step) in h.steps.iter().enumerate() {
            match step {
                Step::EnterState { state, explained } if pos == 0 => {
                    kinds.push(ActionKind::Begin { state: state.clone() });
                    stays = explained.clone();
                    current = Some(state.clone());
                }
                Step::EnterState { state, explained } => {
                    flush(&mut stays, &mut kinds, &current, None);
                    let from = current.clone()?;
                    match explained.split_first() {
                        None => {
                            kinds.push(ActionKind::UnobservedStep { from, to: state.clone(), chain });
                            chain += 1;
                        }
                        Some((&first, rest)) => {
                            kinds.push(ActionKind::Explain { from, state: state.clone(), index: first });
                            stays = rest.to_vec();
                            chain = 0;
                        }
                    }
                    current = Some(state.clone());
                }
                Step::EnterHyperstate { hyper } => {
                    flush(&mut stays, &mut kinds, &current, None);
                    kinds.push(ActionKind::EnterHyper { from: current.clone()?, hyper: hyper.clone(), chain });
                    chain += 1;
                    current = Some(hyper.clone());
                }
                Step::Discard { index } => {
                    flush(&mut stays, &mut kinds, &current, Some(*index));
                    kinds.push(ActionKind::Discard { index: *index });
                }
            }
        }
        flush(&mut stays, &mut kinds, &current, None);
        let plan: Option<Vec<ActionId>> = kinds.iter().map(|k| lookup.get(k).copied()).collect();
        let plan = plan?;
        self.is_valid_plan(&plan).then_some(plan)
    }

    /// Applies the plan with STRIPS semantics and checks it reaches the goal.
    pub fn is_valid_plan(&self, plan: &[ActionId]) -> bool {
        let mut state = vec![false; self.fluents.len()];
        for &f in &self.initial {
            state[f] = true;
        }
        for &a in plan {
            let Some(act) = self.actions.get(a) else { return false };
            if !act.pre.iter().all(|&f| state[f]) {
                return false;
            }
            for &f in &act.del {
                state[f] = false;
            }
            for &f in &act.add {
                state[f] = true;
            }
        }
        self.goal.iter().all(|&f| state[f])
    }
}

/// Turns a plan into a hypothesis, checking every action against the model
/// and trace. The reported cost is the sum of the action costs.
pub fn decode(plan: &[GroundAction], model: &ModelSpec, trace: &Trace) -> Result<Hypothesis, DecodeError> {
    let graph = model.graph();
    let n = trace.len();
    let mut steps: Vec<Step> = Vec::new();
    let mut loc: Option<usize> = None;
    let mut next = 0usize;
    let mut chain = 0usize;
    let mut anchored = false;
    let mut last_enter = 0usize;
    let fail = |i: usize, reason: String| Err(DecodeError { action_index: i, reason });

    for (i, action) in plan.iter().enumerate() {
        let here = |loc: Option<usize>| loc.map(|l| graph.locations[l].id.as_str());
        match &action.kind {
            ActionKind::Begin { state } => {
                let Some(s) = graph.state_index(state).filter(|s| graph.starts().contains(s)) else {
                    return fail(i, format!("`{state}` is not a start state"));
                };
                if loc.is_some() {
                    return fail(i, "begin after the start state was entered".into());
                }
                loc = Some(s);
                anchored = true;
                last_enter = steps.len();
                steps.push(Step::enter(state.clone(), vec![]));
            }
            _ if loc.is_none() => return fail(i, "the plan must begin by entering the start state".into()),
            ActionKind::Explain { from, state, index } => {
                let to = graph.state_index(state);
                if here(loc) != Some(from.as_str()) {
                    return fail(i, format!("explain from `{from}` but the plan is elsewhere"));
                }
                let Some(to) = to.filter(|t| graph.successors(loc.unwrap()).contains(t)) else {
                    return fail(i, format!("no transition from `{from}` to `{state}`"));
                };
                if *index != next || next >= n || !graph.explains(to, trace.symbol(next)) {
                    return fail(i, format!("`{state}` cannot explain trace index {index} here"));
                }
                next += 1;
                chain = 0;
                anchored = true;
                loc = Some(to);
                last_enter = steps.len();
                steps.push(Step::enter(state.clone(), vec![*index]));
            }
            ActionKind::ExplainInPlace { state, index } => {
                if here(loc) != Some(state.as_str()) || !anchored {
                    return fail(i, format!("cannot explain in place at `{state}`"));
                }
                if *index != next || next >= n || !graph.explains(loc.unwrap(), trace.symbol(next)) {
                    return fail(i, format!("`{state}` cannot explain trace index {index} here"));
                }
                next += 1;
                if let Some(Step::EnterState { explained, .. }) = steps.get_mut(last_enter) {
                    explained.push(*index);
                }
            }
            ActionKind::Discard { index } => {
                if chain != 0 || *index != next || next >= n {
                    return fail(i, format!("discard of trace index {index} is not allowed here"));
                }
                next += 1;
                steps.push(Step::Discard { index: *index });
            }
            ActionKind::UnobservedStep { from, to, chain: c } => {
                if here(loc) != Some(from.as_str()) || *c != chain || next >= n {
                    return fail(i, format!("unobserved step from `{from}` is not allowed here"));
                }
                let Some(t) = graph.state_index(to).filter(|t| graph.successors(loc.unwrap()).contains(t)) else {
                    return fail(i, format!("no transition from `{from}` to `{to}`"));
                };
                chain += 1;
                anchored = false;
                loc = Some(t);
                last_enter = steps.len();
                steps.push(Step::enter(to.clone(), vec![]));
            }
            ActionKind::EnterHyper { from, hyper, chain: c } => {
                if here(loc) != Some(from.as_str()) || *c != chain || next >= n {
                    return fail(i, format!("hyperstate step from `{from}` is not allowed here"));
                }
                let Some(h) = graph.hyper_index(hyper).filter(|h| graph.successors(loc.unwrap()).contains(h)) else {
                    return fail(i, format!("no transition from `{from}` into hyperstate `{hyper}`"));
                };
                chain += 1;
                anchored = false;
                loc = Some(h);
                steps.push(Step::EnterHyperstate { hyper: hyper.clone() });
            }
        }
    }
    if loc.is_none() || next != n {
        return fail(plan.len(), format!("plan ends with {} of {n} observations handled", next));
    }
    Ok(Hypothesis { steps, total_cost: plan.iter().map(|a| a.cost).sum(), rank: 0 })
}
