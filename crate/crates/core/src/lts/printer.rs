use std::fmt::Write;

use crate::model::{ModelSpec, State, Transition};

/// Prints a model back to LTS++ source that parses to the same structure.
pub fn pretty_print(model: &ModelSpec) -> String {
    let mut out = String::new();
    writeln!(out, "default <{}>", model.default_type).unwrap();
    for h in &model.hyperstates {
        if h.implicit {
            print_state(&mut out, "", &h.members[0]);
            continue;
        }
        match h.declared_type {
            Some(t) => writeln!(out, "{} <{t}> {{", h.id).unwrap(),
            None => writeln!(out, "{} {{", h.id).unwrap(),
        }
        for s in &h.members {
            print_state(&mut out, "  ", s);
        }
        if h.exits.is_empty() {
            out.push_str("}\n");
        } else {
            writeln!(out, "}} -> {}", targets(&h.exits)).unwrap();
        }
    }
    writeln!(out, "start: {}", model.start).unwrap();
    out
}

fn targets(ts: &[Transition]) -> String {
    ts.iter().map(|t| t.target.as_str()).collect::<Vec<_>>().join(" | ")
}

fn print_state(out: &mut String, indent: &str, s: &State) {
    out.push_str(indent);
    out.push_str(&s.id);
    if s.type_annotated {
        write!(out, " <{}>", s.state_type).unwrap();
    }
    if !s.observations.is_empty() || s.empty_obs_braces {
        let obs: Vec<&str> = s.observations.iter().map(String::as_str).collect();
        write!(out, " {{{}}}", obs.join(", ")).unwrap();
    }
    if !s.transitions.is_empty() {
        write!(out, " -> {}", targets(&s.transitions)).unwrap();
    }
    out.push('\n');
}
