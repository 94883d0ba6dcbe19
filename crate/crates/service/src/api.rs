//! Request and response bodies. API.md in this crate documents them.

use hypforge_core::lts::{lint, parse_named, render_graph, tokenize, GraphDoc, NodeClass, Token};
use hypforge_core::model::{Hypothesis, ModelSpec, StateType, Step, Trace};
use hypforge_core::{Cost, Diagnostic};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsePayload {
    pub tokens: Vec<Token>,
    /// Parse errors, or lint warnings when the model is valid.
    pub diagnostics: Vec<Diagnostic>,
    /// Present iff there are no errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphDoc>,
}

/// Parses `source`, returning the payload and the model when it is valid.
pub fn analyze(name: &str, source: &str) -> (ParsePayload, Option<ModelSpec>) {
    let tokens = tokenize(source);
    match parse_named(name, source) {
        Ok(model) => {
            let payload = ParsePayload { tokens, diagnostics: lint(&model), graph: Some(render_graph(&model)) };
            (payload, Some(model))
        }
        Err(diagnostics) => (ParsePayload { tokens, diagnostics, graph: None }, None),
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ParseRequest {
    pub source: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ModelRequest {
    pub source: String,
    #[serde(default)]
    pub name: Option<String>,
}

/// A trace given either as a list of symbols or as line-oriented text.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TraceInput {
    Symbols(Vec<String>),
    Lines(String),
}

impl TraceInput {
    pub fn into_trace(self) -> Trace {
        match self {
            TraceInput::Symbols(s) => Trace::from_symbols(s),
            TraceInput::Lines(text) => Trace::parse_lines(&text),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct GenerateRequest {
    #[serde(default)]
    pub trace: Option<TraceInput>,
    #[serde(default)]
    pub token: Option<String>,
    /// Starts a fresh search and returns this page (1-based) directly.
    #[serde(default)]
    pub page: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationKind {
    State,
    Hyperstate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepView {
    pub location: String,
    pub kind: LocationKind,
    pub class: NodeClass,
    /// Trace indices this entry explains; empty means unobserved.
    pub explained: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Disposition {
    Explained,
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationView {
    pub index: usize,
    pub symbol: String,
    pub disposition: Disposition,
    /// Position in `steps` of the explaining entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisItem {
    pub rank: usize,
    pub cost: Cost,
    pub discards: usize,
    pub steps: Vec<StepView>,
    /// One entry per trace observation, in trace order.
    pub observations: Vec<ObservationView>,
}

impl HypothesisItem {
    pub fn render(model: &ModelSpec, trace: &Trace, h: &Hypothesis) -> Self {
        let mut steps = Vec::new();
        let mut observations: Vec<ObservationView> = trace
            .events
            .iter()
            .enumerate()
            .map(|(index, e)| ObservationView {
                index,
                symbol: e.symbol.clone(),
                disposition: Disposition::Discarded,
                step: None,
            })
            .collect();
        for step in &h.steps {
            match step {
                Step::EnterState { state, explained } => {
                    let class = match model.state(state).map(|s| s.state_type) {
                        Some(StateType::Good) => NodeClass::Good,
                        _ => NodeClass::Bad,
                    };
                    for &i in explained {
                        if let Some(o) = observations.get_mut(i) {
                            o.disposition = Disposition::Explained;
                            o.step = Some(steps.len());
                        }
                    }
                    steps.push(StepView {
                        location: state.clone(),
                        kind: LocationKind::State,
                        class,
                        explained: explained.clone(),
                    });
                }
                Step::EnterHyperstate { hyper } => steps.push(StepView {
                    location: hyper.clone(),
                    kind: LocationKind::Hyperstate,
                    class: NodeClass::Hyper,
                    explained: Vec::new(),
                }),
                Step::Discard { .. } => {}
            }
        }
        Self { rank: h.rank, cost: h.total_cost, discards: h.discard_count(), steps, observations }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisPage {
    /// 1-based.
    pub page_index: usize,
    pub items: Vec<HypothesisItem>,
    pub has_next: bool,
    /// False when the per-page time budget ran out before the page filled.
    pub complete: bool,
    /// Pass back to get the next page; absent on the last page.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation_token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub symbols: Vec<String>,
}
