use serde::{Deserialize, Serialize};

use crate::model::{ModelSpec, StateType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeClass {
    Good,
    Bad,
    Hyper,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub class: NodeClass,
    pub observations: Vec<String>,
    /// Enclosing hyperstate container, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    pub start: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
}

/// Topology for the IDE's transition graph; layout is left to the client.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl GraphDoc {
    pub fn state_nodes(&self) -> impl Iterator<Item = &GraphNode> {
        self.nodes.iter().filter(|n| n.class != NodeClass::Hyper)
    }
}

pub fn render_graph(model: &ModelSpec) -> GraphDoc {
    let starts = model.start_states();
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for h in &model.hyperstates {
        let parent = if h.is_group() {
            nodes.push(GraphNode {
                id: h.id.clone(),
                class: NodeClass::Hyper,
                observations: Vec::new(),
                parent: None,
                start: model.start == h.id,
            });
            Some(h.id.clone())
        } else {
            None
        };
        for s in &h.members {
            nodes.push(GraphNode {
                id: s.id.clone(),
                class: match s.state_type {
                    StateType::Good => NodeClass::Good,
                    StateType::Bad => NodeClass::Bad,
                },
                observations: s.observations.iter().cloned().collect(),
                parent: parent.clone(),
                start: starts.contains(&s.id.as_str()),
            });
            edges.extend(s.transitions.iter().map(|t| GraphEdge { from: s.id.clone(), to: t.target.clone() }));
        }
    }
    GraphDoc { nodes, edges }
}
