//! Domain types shared by every stage: models, traces, costs and hypotheses.
//!
//! A model is a set of hyperstates, each holding one or more member states.
//! Plain states are singleton hyperstates. Searching happens over
//! *locations*: every concrete state is a location, and every hyperstate with
//! more than one member adds a placeholder location that stands for "somewhere
//! inside this hyperstate, no observation attached".

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostic::{sort_diagnostics, Diagnostic, Span};

pub type Cost = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateType {
    Good,
    Bad,
}

impl fmt::Display for StateType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StateType::Good => "good",
            StateType::Bad => "bad",
        })
    }
}

impl FromStr for StateType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "good" => Ok(StateType::Good),
            "bad" => Ok(StateType::Bad),
            other => Err(format!("unknown state type `{other}` (expected good or bad)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub target: String,
    #[serde(default)]
    pub span: Span,
}

impl Transition {
    pub fn to(target: impl Into<String>) -> Self {
        Self { target: target.into(), span: Span::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    pub id: String,
    pub state_type: StateType,
    /// Whether the type was written out; unannotated states take the default.
    #[serde(default)]
    pub type_annotated: bool,
    pub observations: BTreeSet<String>,
    /// The source wrote `{}`: an explicit, empty observation set.
    #[serde(default)]
    pub empty_obs_braces: bool,
    pub transitions: Vec<Transition>,
    #[serde(default)]
    pub span: Span,
}

impl State {
    pub fn new(id: impl Into<String>, state_type: StateType) -> Self {
        Self {
            id: id.into(),
            state_type,
            type_annotated: true,
            observations: BTreeSet::new(),
            empty_obs_braces: false,
            transitions: Vec::new(),
            span: Span::default(),
        }
    }

    pub fn with_observations<I, S>(mut self, obs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.observations.extend(obs.into_iter().map(Into::into));
        self
    }

    pub fn with_transitions<I, S>(mut self, targets: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.transitions.extend(targets.into_iter().map(Transition::to));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperstate {
    pub id: String,
    pub declared_type: Option<StateType>,
    pub members: Vec<State>,
    /// Transitions written at hyperstate level. They are already expanded into
    /// every member's `transitions`; kept here for printing.
    #[serde(default)]
    pub exits: Vec<Transition>,
    /// A bare state declaration wrapped as a singleton.
    pub implicit: bool,
    #[serde(default)]
    pub span: Span,
}

impl Hyperstate {
    pub fn singleton(state: State) -> Self {
        Self {
            id: state.id.clone(),
            declared_type: None,
            span: state.span,
            members: vec![state],
            exits: Vec::new(),
            implicit: true,
        }
    }

    pub fn group(id: impl Into<String>, members: Vec<State>) -> Self {
        Self {
            id: id.into(),
            declared_type: None,
            members,
            exits: Vec::new(),
            implicit: false,
            span: Span::default(),
        }
    }

    /// Multi-member hyperstates get a placeholder location in the search.
    pub fn is_group(&self) -> bool {
        self.members.len() > 1
    }

    pub fn contains(&self, state: &str) -> bool {
        self.members.iter().any(|m| m.id == state)
    }

    pub fn internal_transitions(&self) -> Vec<(&str, &str)> {
        self.members
            .iter()
            .flat_map(|m| {
                m.transitions
                    .iter()
                    .filter(|t| self.contains(&t.target))
                    .map(move |t| (m.id.as_str(), t.target.as_str()))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub default_type: StateType,
    pub hyperstates: Vec<Hyperstate>,
    pub start: String,
    #[serde(default)]
    pub start_span: Span,
}

impl ModelSpec {
    pub fn states(&self) -> impl Iterator<Item = &State> {
        self.hyperstates.iter().flat_map(|h| h.members.iter())
    }

    pub fn state(&self, id: &str) -> Option<&State> {
        self.states().find(|s| s.id == id)
    }

    pub fn hyperstate(&self, id: &str) -> Option<&Hyperstate> {
        self.hyperstates.iter().find(|h| h.id == id)
    }

    pub fn hyperstate_of(&self, state: &str) -> Option<&Hyperstate> {
        self.hyperstates.iter().find(|h| h.contains(state))
    }

    pub fn state_count(&self) -> usize {
        self.hyperstates.iter().map(|h| h.members.len()).sum()
    }

    /// Every observation symbol attached to some state, sorted.
    pub fn observation_vocab(&self) -> BTreeSet<String> {
        self.states().flat_map(|s| s.observations.iter().cloned()).collect()
    }

    /// States the hypothesis may begin in: the start state itself, or every
    /// member when the start names a hyperstate ("one of" start).
    pub fn start_states(&self) -> Vec<&str> {
        if let Some(s) = self.state(&self.start) {
            return vec![s.id.as_str()];
        }
        match self.hyperstate(&self.start) {
            Some(h) => h.members.iter().map(|m| m.id.as_str()).collect(),
            None => Vec::new(),
        }
    }

    /// Copy with every span zeroed, for structural comparison.
    pub fn without_spans(&self) -> ModelSpec {
        let mut m = self.clone();
        m.start_span = Span::default();
        for h in &mut m.hyperstates {
            h.span = Span::default();
            for t in &mut h.exits {
                t.span = Span::default();
            }
            for s in &mut h.members {
                s.span = Span::default();
                for t in &mut s.transitions {
                    t.span = Span::default();
                }
            }
        }
        m
    }

    pub fn graph(&self) -> LocationGraph {
        LocationGraph::build(self)
    }
}

/// Structural checks on a model. Returns one error per violated invariant.
pub fn validate_model(model: &ModelSpec) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut seen: HashMap<&str, Span> = HashMap::new();
    for h in &model.hyperstates {
        if h.members.is_empty() {
            diags.push(Diagnostic::error(
                "empty-hyperstate",
                format!("hyperstate `{}` has no member states", h.id),
                h.span,
            ));
        }
        for s in &h.members {
            if seen.insert(s.id.as_str(), s.span).is_some() {
                diags.push(Diagnostic::error(
                    "duplicate-state",
                    format!("state `{}` is declared more than once", s.id),
                    s.span,
                ));
            }
        }
    }
    let mut group_ids: HashMap<&str, Span> = HashMap::new();
    for h in model.hyperstates.iter().filter(|h| !h.implicit) {
        if group_ids.insert(h.id.as_str(), h.span).is_some() {
            diags.push(Diagnostic::error(
                "duplicate-hyperstate",
                format!("hyperstate `{}` is declared more than once", h.id),
                h.span,
            ));
        }
        let clashes_with_foreign_state = seen.contains_key(h.id.as_str())
            && !(h.members.len() == 1 && h.members[0].id == h.id);
        if clashes_with_foreign_state {
            diags.push(Diagnostic::error(
                "duplicate-state",
                format!("hyperstate `{}` reuses the name of a state", h.id),
                h.span,
            ));
        }
    }
    for s in model.states() {
        for t in &s.transitions {
            if !seen.contains_key(t.target.as_str()) {
                diags.push(Diagnostic::error(
                    "unknown-state",
                    format!("transition from `{}` targets undeclared state `{}`", s.id, t.target),
                    t.span,
                ));
            }
        }
    }
    let start_known = seen.contains_key(model.start.as_str()) || group_ids.contains_key(model.start.as_str());
    if !start_known {
        diags.push(Diagnostic::error(
            "unknown-start",
            format!("unknown start state `{}`", model.start),
            model.start_span,
        ));
    }
    sort_diagnostics(&mut diags);
    diags
}

// ---------------------------------------------------------------------------
// Locations

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationKind {
    State(StateType),
    Hyper,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub id: String,
    pub kind: LocationKind,
}

/// The transition relation over locations, derived from a model.
///
/// Concrete states come first in declaration order, followed by one
/// placeholder per multi-member hyperstate. A placeholder is entered from a
/// state outside the hyperstate that has an edge into it, and left towards a
/// state outside the hyperstate that some member has an edge to.
#[derive(Debug, Clone)]
pub struct LocationGraph {
    pub locations: Vec<Location>,
    index: HashMap<String, usize>,
    hyper_index: HashMap<String, usize>,
    successors: Vec<Vec<usize>>,
    observations: Vec<BTreeSet<String>>,
    starts: Vec<usize>,
    state_count: usize,
}

impl LocationGraph {
    fn build(model: &ModelSpec) -> Self {
        let mut locations = Vec::new();
        let mut index = HashMap::new();
        let mut observations = Vec::new();
        for s in model.states() {
            if index.contains_key(&s.id) {
                continue;
            }
            index.insert(s.id.clone(), locations.len());
            locations.push(Location { id: s.id.clone(), kind: LocationKind::State(s.state_type) });
            observations.push(s.observations.clone());
        }
        let state_count = locations.len();
        let mut hyper_index = HashMap::new();
        let groups: Vec<&Hyperstate> = model.hyperstates.iter().filter(|h| h.is_group()).collect();
        for h in &groups {
            if hyper_index.contains_key(&h.id) {
                continue;
            }
            hyper_index.insert(h.id.clone(), locations.len());
            locations.push(Location { id: h.id.clone(), kind: LocationKind::Hyper });
            observations.push(BTreeSet::new());
        }

        let mut successors: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); locations.len()];
        for s in model.states() {
            let from = index[&s.id];
            for t in &s.transitions {
                if let Some(&to) = index.get(&t.target) {
                    successors[from].insert(to);
                }
            }
        }
        let member_of: Vec<Vec<usize>> = groups
            .iter()
            .map(|h| h.members.iter().filter_map(|m| index.get(&m.id).copied()).collect())
            .collect();
        for (gi, h) in groups.iter().enumerate() {
            let hloc = hyper_index[&h.id];
            let members = &member_of[gi];
            // into the placeholder
            for (from, succ) in successors.iter_mut().enumerate().take(state_count) {
                if !members.contains(&from) && succ.iter().any(|t| members.contains(t)) {
                    succ.insert(hloc);
                }
            }
            // out of the placeholder
            let exits: BTreeSet<usize> = members
                .iter()
                .flat_map(|&m| successors[m].iter().copied())
                .filter(|&t| t < state_count && !members.contains(&t))
                .collect();
            successors[hloc].extend(exits);
            for (gj, other) in groups.iter().enumerate() {
                if gi == gj {
                    continue;
                }
                let other_loc = hyper_index[&other.id];
                let touches = members
                    .iter()
                    .any(|&m| successors[m].iter().any(|t| member_of[gj].contains(t)));
                if touches {
                    successors[hloc].insert(other_loc);
                }
            }
        }

        let starts = model.start_states().iter().filter_map(|s| index.get(*s).copied()).collect();
        Self {
            locations,
            index,
            hyper_index,
            successors: successors.into_iter().map(|s| s.into_iter().collect()).collect(),
            observations,
            starts,
            state_count,
        }
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn state_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn hyper_index(&self, id: &str) -> Option<usize> {
        self.hyper_index.get(id).copied()
    }

    pub fn successors(&self, loc: usize) -> &[usize] {
        &self.successors[loc]
    }

    pub fn explains(&self, loc: usize, symbol: &str) -> bool {
        self.observations[loc].contains(symbol)
    }

    pub fn observations(&self, loc: usize) -> &BTreeSet<String> {
        &self.observations[loc]
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn is_hyper(&self, loc: usize) -> bool {
        loc >= self.state_count
    }

    pub fn state_type(&self, loc: usize) -> Option<StateType> {
        match self.locations[loc].kind {
            LocationKind::State(t) => Some(t),
            LocationKind::Hyper => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Traces

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub symbol: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn from_symbols<I, S>(symbols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            events: symbols
                .into_iter()
                .map(|s| TraceEvent { symbol: s.into(), timestamp: None })
                .collect(),
        }
    }

    /// Line-oriented trace format: one observation per line, optionally
    /// preceded by a timestamp field. Blank lines and `#` comments are skipped.
    pub fn parse_lines(text: &str) -> Self {
        let events = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                let mut fields = l.split_whitespace();
                let first = fields.next().unwrap_or_default();
                match fields.next() {
                    Some(symbol) => TraceEvent { symbol: symbol.to_string(), timestamp: Some(first.to_string()) },
                    None => TraceEvent { symbol: first.to_string(), timestamp: None },
                }
            })
            .collect();
        Self { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn symbols(&self) -> Vec<&str> {
        self.events.iter().map(|e| e.symbol.as_str()).collect()
    }

    pub fn symbol(&self, index: usize) -> &str {
        &self.events[index].symbol
    }

    /// Symbols absent from the model vocabulary, with their positions.
    pub fn unknown_symbols(&self, model: &ModelSpec) -> Vec<(usize, String)> {
        let vocab = model.observation_vocab();
        self.events
            .iter()
            .enumerate()
            .filter(|(_, e)| !vocab.contains(&e.symbol))
            .map(|(i, e)| (i, e.symbol.clone()))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Costs

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid cost parameters: {0}")]
    InvalidCostParams(String),
    #[error("invalid hypothesis: {0}")]
    InvalidHypothesis(String),
    #[error("hypotheses are not comparable: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CostParams {
    pub discard_cost: Cost,
    pub good_entry_cost: Cost,
    pub bad_entry_cost: Cost,
    pub unobserved_step_cost: Cost,
}

impl Default for CostParams {
    fn default() -> Self {
        Self { discard_cost: 100, good_entry_cost: 1, bad_entry_cost: 10, unobserved_step_cost: 5 }
    }
}

impl CostParams {
    pub fn new(
        discard_cost: Cost,
        good_entry_cost: Cost,
        bad_entry_cost: Cost,
        unobserved_step_cost: Cost,
    ) -> Result<Self, ModelError> {
        let p = Self { discard_cost, good_entry_cost, bad_entry_cost, unobserved_step_cost };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.bad_entry_cost <= self.good_entry_cost {
            return Err(ModelError::InvalidCostParams(
                "bad_entry_cost must exceed good_entry_cost".into(),
            ));
        }
        if self.discard_cost <= self.bad_entry_cost {
            return Err(ModelError::InvalidCostParams(
                "discard_cost must exceed bad_entry_cost".into(),
            ));
        }
        if self.unobserved_step_cost == 0 {
            return Err(ModelError::InvalidCostParams("unobserved_step_cost must be positive".into()));
        }
        Ok(())
    }

    pub fn entry_cost(&self, t: StateType) -> Cost {
        match t {
            StateType::Good => self.good_entry_cost,
            StateType::Bad => self.bad_entry_cost,
        }
    }
}

// ---------------------------------------------------------------------------
// Hypotheses

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Step {
    /// Entering a concrete state; `explained` lists the trace indices it
    /// accounts for, in increasing order. Empty means unobserved.
    EnterState { state: String, explained: Vec<usize> },
    /// Passing through a hyperstate without an observed member.
    EnterHyperstate { hyper: String },
    Discard { index: usize },
}

impl Step {
    pub fn enter(state: impl Into<String>, explained: Vec<usize>) -> Self {
        Step::EnterState { state: state.into(), explained }
    }

    pub fn location_id(&self) -> Option<&str> {
        match self {
            Step::EnterState { state, .. } => Some(state),
            Step::EnterHyperstate { hyper } => Some(hyper),
            Step::Discard { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hypothesis {
    pub steps: Vec<Step>,
    pub total_cost: Cost,
    pub rank: usize,
}

impl Hypothesis {
    pub fn new(steps: Vec<Step>) -> Self {
        Self { steps, total_cost: 0, rank: 0 }
    }

    /// Entered locations in order, ignoring explanation bookkeeping.
    pub fn state_sequence(&self) -> Vec<&str> {
        self.steps.iter().filter_map(Step::location_id).collect()
    }

    pub fn discard_count(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, Step::Discard { .. })).count()
    }

    /// Trace indices mentioned by the hypothesis, sorted, duplicates kept.
    pub fn covered_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .steps
            .iter()
            .flat_map(|s| match s {
                Step::EnterState { explained, .. } => explained.clone(),
                Step::Discard { index } => vec![*index],
                Step::EnterHyperstate { .. } => Vec::new(),
            })
            .collect();
        v.sort_unstable();
        v
    }
}

/// Deterministic total order used for ranking: cost, then fewer discards,
/// then fewer steps, then the entered-location sequence, then the steps.
pub fn rank_order(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    a.total_cost
        .cmp(&b.total_cost)
        .then_with(|| a.discard_count().cmp(&b.discard_count()))
        .then_with(|| a.steps.len().cmp(&b.steps.len()))
        .then_with(|| a.state_sequence().cmp(&b.state_sequence()))
        .then_with(|| a.steps.cmp(&b.steps))
}

/// Cost of a hypothesis: discards, entry cost per entered state, and the
/// unobserved-step surcharge for every unexplained state entry and every
/// hyperstate placeholder. The initial entry is never charged as unobserved.
pub fn cost_of(model: &ModelSpec, hypothesis: &Hypothesis, params: &CostParams) -> Result<Cost, ModelError> {
    let graph = model.graph();
    check_shape(&graph, hypothesis)?;
    let mut total: Cost = 0;
    for (i, step) in hypothesis.steps.iter().enumerate() {
        total += match step {
            Step::Discard { .. } => params.discard_cost,
            Step::EnterHyperstate { .. } => params.unobserved_step_cost,
            Step::EnterState { state, explained } => {
                let loc = graph.state_index(state).expect("checked by check_shape");
                let ty = graph.state_type(loc).expect("concrete state");
                let surcharge = if explained.is_empty() && i > 0 { params.unobserved_step_cost } else { 0 };
                params.entry_cost(ty) + surcharge
            }
        };
    }
    Ok(total)
}

/// Plausibility preorder: `Less` means `a` is strictly more plausible.
pub fn compare_plausibility(
    model: &ModelSpec,
    a: &Hypothesis,
    b: &Hypothesis,
    params: &CostParams,
) -> Result<Ordering, ModelError> {
    let (ia, ib) = (a.covered_indices(), b.covered_indices());
    if ia != ib {
        return Err(ModelError::Mismatch(format!(
            "hypotheses cover different trace indices ({ia:?} vs {ib:?})"
        )));
    }
    Ok(cost_of(model, a, params)?.cmp(&cost_of(model, b, params)?))
}

/// Checks that do not need the trace: known ids, initial entry, unique indices.
fn check_shape(graph: &LocationGraph, h: &Hypothesis) -> Result<(), ModelError> {
    let invalid = |m: String| Err(ModelError::InvalidHypothesis(m));
    match h.steps.first() {
        Some(Step::EnterState { .. }) => {}
        Some(_) => return invalid("the first step must enter the start state".into()),
        None => return invalid("a hypothesis has at least one step".into()),
    }
    for step in &h.steps {
        match step {
            Step::EnterState { state, explained } => {
                if graph.state_index(state).is_none() {
                    return invalid(format!("unknown state `{state}`"));
                }
                if explained.windows(2).any(|w| w[0] >= w[1]) {
                    return invalid(format!("explanations of `{state}` are not strictly increasing"));
                }
            }
            Step::EnterHyperstate { hyper } => {
                if graph.hyper_index(hyper).is_none() {
                    return invalid(format!("`{hyper}` is not a multi-member hyperstate"));
                }
            }
            Step::Discard { .. } => {}
        }
    }
    let idx = h.covered_indices();
    if idx.windows(2).any(|w| w[0] == w[1]) {
        return invalid("a trace index is covered twice".into());
    }
    Ok(())
}

/// Full validity of a hypothesis against a model and trace.
///
/// The rules mirror the compiled planning problem exactly, so that valid
/// hypotheses and plans are in one-to-one correspondence:
/// * the first step enters a start state; it may explain observations later
///   in place, interleaved with discards;
/// * every later state entry follows the location transition relation and
///   either explains the next pending observation or is unobserved;
/// * unobserved entries and placeholders need a pending observation and are
///   capped at `chain_cap` in a row;
/// * a discard may not directly follow an unobserved entry;
/// * every trace index is handled exactly once, in order.
pub fn check_hypothesis(
    model: &ModelSpec,
    trace: &Trace,
    hypothesis: &Hypothesis,
    chain_cap: usize,
) -> Result<(), ModelError> {
    let graph = model.graph();
    check_shape(&graph, hypothesis)?;
    let invalid = |m: String| Err(ModelError::InvalidHypothesis(m));
    let n = trace.len();
    let mut next = 0usize;
    let mut chain = 0usize;
    let mut stay: VecDeque<usize> = VecDeque::new();
    let mut loc = usize::MAX;

    for (pos, step) in hypothesis.steps.iter().enumerate() {
        match step {
            Step::EnterState { state, explained } => {
                let to = graph.state_index(state).expect("shape checked");
                for &i in explained {
                    if i >= n || !graph.explains(to, trace.symbol(i)) {
                        return invalid(format!("`{state}` cannot explain trace index {i}"));
                    }
                }
                if pos == 0 {
                    if !graph.starts().contains(&to) {
                        return invalid(format!("`{state}` is not a start state"));
                    }
                    stay = explained.iter().copied().collect();
                } else {
                    drain_stays(&mut stay, &mut next, None)?;
                    if !graph.successors(loc).contains(&to) {
                        return invalid(format!("no transition from `{}` to `{state}`", graph.locations[loc].id));
                    }
                    if explained.is_empty() {
                        if next >= n || chain >= chain_cap {
                            return invalid(format!("unobserved entry of `{state}` at step {pos} is not allowed"));
                        }
                        chain += 1;
                    } else {
                        if explained[0] != next {
                            return invalid(format!("`{state}` explains index {} out of order", explained[0]));
                        }
                        next += 1;
                        chain = 0;
                        stay = explained[1..].iter().copied().collect();
                    }
                }
                loc = to;
            }
            Step::EnterHyperstate { hyper } => {
                drain_stays(&mut stay, &mut next, None)?;
                let to = graph.hyper_index(hyper).expect("shape checked");
                if !graph.successors(loc).contains(&to) {
                    return invalid(format!("no transition from `{}` into hyperstate `{hyper}`", graph.locations[loc].id));
                }
                if next >= n || chain >= chain_cap {
                    return invalid(format!("placeholder `{hyper}` at step {pos} is not allowed"));
                }
                chain += 1;
                loc = to;
            }
            Step::Discard { index } => {
                if chain > 0 {
                    return invalid(format!("discard of {index} directly follows an unobserved entry"));
                }
                drain_stays(&mut stay, &mut next, Some(*index))?;
                if *index != next {
                    return invalid(format!("discard of index {index} out of order"));
                }
                next += 1;
            }
        }
    }
    drain_stays(&mut stay, &mut next, None)?;
    if next != n {
        return invalid(format!("{} of {n} observations handled", next));
    }
    Ok(())
}

fn drain_stays(stay: &mut VecDeque<usize>, next: &mut usize, before: Option<usize>) -> Result<(), ModelError> {
    while let Some(&i) = stay.front() {
        if before.is_some_and(|b| i > b) {
            break;
        }
        if i != *next {
            return Err(ModelError::InvalidHypothesis(format!("trace index {i} explained out of order")));
        }
        *next += 1;
        stay.pop_front();
    }
    Ok(())
}

/// Groups hypotheses by entered-location sequence; handy in reports.
pub fn sequence_histogram<'a>(hyps: impl IntoIterator<Item = &'a Hypothesis>) -> BTreeMap<Vec<String>, usize> {
    let mut m = BTreeMap::new();
    for h in hyps {
        *m.entry(h.state_sequence().into_iter().map(String::from).collect()).or_insert(0) += 1;
    }
    m
}
