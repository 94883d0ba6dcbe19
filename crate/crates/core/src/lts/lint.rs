use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::diagnostic::{sort_diagnostics, Diagnostic};
use crate::model::ModelSpec;

/// Warnings for a parsed model, ordered by source position.
pub fn lint(model: &ModelSpec) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let reachable = reachable_states(model);

    for s in model.states() {
        if !reachable.contains(s.id.as_str()) {
            diags.push(Diagnostic::warning(
                "unreachable-state",
                format!("unreachable state `{}`: no path from the start state", s.id),
                s.span,
            ));
        }
        if s.empty_obs_braces {
            diags.push(Diagnostic::warning(
                "no-observations",
                format!("state `{}` explains no observation", s.id),
                s.span,
            ));
        }
        if s.observations.is_empty() && s.transitions.is_empty() {
            diags.push(Diagnostic::warning(
                "dead-end",
                format!("state `{}` has no observations and no outgoing transitions", s.id),
                s.span,
            ));
        }
    }

    // symbol -> first state carrying it, and whether any reachable state does
    let mut carriers: BTreeMap<&str, (bool, &crate::model::State)> = BTreeMap::new();
    for s in model.states() {
        let live = reachable.contains(s.id.as_str());
        for o in &s.observations {
            let e = carriers.entry(o.as_str()).or_insert((live, s));
            e.0 |= live;
        }
    }
    for (symbol, (live, first)) in carriers {
        if !live {
            diags.push(Diagnostic::warning(
                "unexplainable-observation",
                format!("observation `{symbol}` is attached to no reachable state"),
                first.span,
            ));
        }
    }

    for h in model.hyperstates.iter().filter(|h| !h.implicit) {
        let caps = h.id.chars().all(|c| !c.is_ascii_lowercase());
        if !caps {
            diags.push(Diagnostic::warning(
                "hyperstate-case",
                format!("hyperstate `{}` should be written in all caps", h.id),
                h.span,
            ));
        }
    }
    sort_diagnostics(&mut diags);
    diags
}

fn reachable_states(model: &ModelSpec) -> BTreeSet<&str> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut queue: VecDeque<&str> = model.start_states().into_iter().collect();
    while let Some(id) = queue.pop_front() {
        if !seen.insert(id) {
            continue;
        }
        if let Some(s) = model.state(id) {
            for t in &s.transitions {
                if !seen.contains(t.target.as_str()) {
                    queue.push_back(t.target.as_str());
                }
            }
        }
    }
    seen
}
