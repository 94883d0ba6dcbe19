//! PDDL export and import of compiled problems.
//!
//! The domain is fully grounded: every fluent is a nullary predicate and
//! every action has an empty parameter list, so any classical planner with
//! action costs can solve it. The object section of the problem records the
//! model locations, trace slots and symbols so that [`read_pddl`] can rebuild
//! the exact [`PlanningProblem`].
//!
//! Identifiers are mangled to lowercase PDDL names: `_` becomes `__`, an
//! uppercase letter `X` becomes `_x`, and any other character becomes `_`
//! followed by its decimal code point and a closing `_`.

use std::collections::HashMap;
use std::fmt::Write;

use thiserror::Error;

use super::{ActionKind, Fluent, FluentId, GroundAction, PlanningProblem, ProblemLocation};
use crate::model::{Cost, CostParams, StateType};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PddlFiles {
    pub domain: String,
    pub problem: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct PddlError {
    pub line: usize,
    pub message: String,
}

fn mangle(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for c in id.chars() {
        match c {
            'a'..='z' | '0'..='9' => out.push(c),
            'A'..='Z' => {
                out.push('_');
                out.push(c.to_ascii_lowercase());
            }
            '_' => out.push_str("__"),
            other => {
                let _ = write!(out, "_{}_", other as u32);
            }
        }
    }
    out
}

fn unmangle(s: &str) -> Option<String> {
    let mut out = String::new();
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '_' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            '_' => out.push('_'),
            l @ 'a'..='z' => out.push(l.to_ascii_uppercase()),
            d @ '0'..='9' => {
                let mut code = d.to_digit(10)?;
                loop {
                    match chars.next()? {
                        '_' => break,
                        n => code = code.checked_mul(10)?.checked_add(n.to_digit(10)?)?,
                    }
                }
                out.push(char::from_u32(code)?);
            }
            _ => return None,
        }
    }
    Some(out)
}

fn loc_token(loc: &ProblemLocation) -> String {
    match loc {
        ProblemLocation::Init => "init".into(),
        ProblemLocation::State { id, .. } => format!("s{}", mangle(id)),
        ProblemLocation::Hyper { id } => format!("h{}", mangle(id)),
    }
}

fn id_token(problem: &PlanningProblem, id: &str) -> String {
    let loc = problem.locations.iter().find(|l| l.id() == Some(id));
    loc.map(loc_token).unwrap_or_else(|| format!("s{}", mangle(id)))
}

fn fluent_name(problem: &PlanningProblem, f: Fluent) -> String {
    match f {
        Fluent::At(l) => format!("at-{}", loc_token(&problem.locations[l])),
        Fluent::Pending(i) => format!("pending-{i}"),
        Fluent::Done => "done".into(),
        Fluent::Chain(c) => format!("chain-{c}"),
        Fluent::Anchored => "anchored".into(),
        Fluent::Open => "open".into(),
        Fluent::Started => "started".into(),
    }
}

fn action_name(problem: &PlanningProblem, kind: &ActionKind) -> String {
    let t = |id: &str| id_token(problem, id);
    match kind {
        ActionKind::Begin { state } => format!("begin-{}", t(state)),
        ActionKind::Explain { from, state, index } => format!("explain-{}-{}-{index}", t(from), t(state)),
        ActionKind::ExplainInPlace { state, index } => format!("stay-{}-{index}", t(state)),
        ActionKind::Discard { index } => format!("discard-{index}"),
        ActionKind::UnobservedStep { from, to, chain } => format!("step-{}-{}-{chain}", t(from), t(to)),
        ActionKind::EnterHyper { from, hyper, chain } => format!("hyper-{}-{}-{chain}", t(from), t(hyper)),
    }
}

/// Renders the domain and problem files.
pub fn export_pddl(problem: &PlanningProblem) -> PddlFiles {
    let names: Vec<String> = problem.fluents.iter().map(|&f| fluent_name(problem, f)).collect();
    let dname = format!("hyp-{}", mangle(&problem.name));

    let mut d = String::new();
    let _ = writeln!(d, "(define (domain {dname})");
    d.push_str("  (:requirements :strips :typing :action-costs)\n");
    d.push_str("  (:types state hyperstate slot symbol)\n");
    d.push_str("  (:predicates\n");
    d.push_str("    (good ?s - state) (bad ?s - state)\n");
    d.push_str("    (observed ?o - slot ?y - symbol) (follows ?a ?b - slot)\n");
    for n in &names {
        let _ = writeln!(d, "    ({n})");
    }
    d.push_str("  )\n");
    d.push_str("  (:functions (total-cost) (discard-cost) (good-entry-cost) (bad-entry-cost)\n");
    d.push_str("              (unobserved-step-cost) (chain-cap) - number)\n");
    for a in &problem.actions {
        let _ = writeln!(d, "  (:action {}", action_name(problem, &a.kind));
        d.push_str("    :parameters ()\n");
        let pre: Vec<String> = a.pre.iter().map(|&f| format!("({})", names[f])).collect();
        let _ = writeln!(d, "    :precondition (and {})", pre.join(" "));
        let mut eff: Vec<String> = a.del.iter().map(|&f| format!("(not ({}))", names[f])).collect();
        eff.extend(a.add.iter().map(|&f| format!("({})", names[f])));
        eff.push(format!("(increase (total-cost) {})", a.cost));
        let _ = writeln!(d, "    :effect (and {}))", eff.join(" "));
    }
    d.push_str(")\n");

    let mut p = String::new();
    let _ = writeln!(p, "(define (problem {dname}-problem)");
    let _ = writeln!(p, "  (:domain {dname})");
    p.push_str("  (:objects\n");
    let states: Vec<String> = problem
        .locations
        .iter()
        .filter(|l| matches!(l, ProblemLocation::State { .. }))
        .map(loc_token)
        .collect();
    let hypers: Vec<String> = problem
        .locations
        .iter()
        .filter(|l| matches!(l, ProblemLocation::Hyper { .. }))
        .map(loc_token)
        .collect();
    let slots: Vec<String> = (0..problem.trace.len()).map(|i| format!("o{i}")).collect();
    let mut symbols: Vec<String> = Vec::new();
    for s in &problem.trace {
        let tok = format!("y{}", mangle(s));
        if !symbols.contains(&tok) {
            symbols.push(tok);
        }
    }
    for (list, ty) in [(&states, "state"), (&hypers, "hyperstate"), (&slots, "slot"), (&symbols, "symbol")] {
        if !list.is_empty() {
            let _ = writeln!(p, "    {} - {ty}", list.join(" "));
        }
    }
    p.push_str("  )\n");
    p.push_str("  (:init\n");
    let cp = &problem.params;
    let _ = writeln!(p, "    (= (total-cost) 0)");
    let _ = writeln!(p, "    (= (discard-cost) {})", cp.discard_cost);
    let _ = writeln!(p, "    (= (good-entry-cost) {})", cp.good_entry_cost);
    let _ = writeln!(p, "    (= (bad-entry-cost) {})", cp.bad_entry_cost);
    let _ = writeln!(p, "    (= (unobserved-step-cost) {})", cp.unobserved_step_cost);
    let _ = writeln!(p, "    (= (chain-cap) {})", problem.chain_cap);
    for l in &problem.locations {
        if let ProblemLocation::State { state_type, .. } = l {
            let _ = writeln!(p, "    ({state_type} {})", loc_token(l));
        }
    }
    for (i, s) in problem.trace.iter().enumerate() {
        let _ = writeln!(p, "    (observed o{i} y{})", mangle(s));
    }
    for i in 1..problem.trace.len() {
        let _ = writeln!(p, "    (follows o{} o{i})", i - 1);
    }
    for &f in &problem.initial {
        let _ = writeln!(p, "    ({})", names[f]);
    }
    p.push_str("  )\n");
    let goal: Vec<String> = problem.goal.iter().map(|&f| format!("({})", names[f])).collect();
    let _ = writeln!(p, "  (:goal (and {}))", goal.join(" "));
    p.push_str("  (:metric minimize (total-cost))\n)\n");

    PddlFiles { domain: d, problem: p }
}

// ---------------------------------------------------------------------------
// Reading

#[derive(Debug, Clone)]
enum Sexp {
    Atom(String, usize),
    List(Vec<Sexp>, usize),
}

impl Sexp {
    fn line(&self) -> usize {
        match self {
            Sexp::Atom(_, l) | Sexp::List(_, l) => *l,
        }
    }
    fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a, _) => Some(a),
            Sexp::List(..) => None,
        }
    }
    fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(v, _) => Some(v),
            Sexp::Atom(..) => None,
        }
    }
    /// `(head ...)` with an atom head.
    fn head(&self) -> Option<&str> {
        self.list()?.first()?.atom()
    }
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, PddlError> {
    Err(PddlError { line, message: message.into() })
}

fn parse_sexp(text: &str) -> Result<Sexp, PddlError> {
    let mut stack: Vec<(Vec<Sexp>, usize)> = Vec::new();
    let mut done: Option<Sexp> = None;
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let code = raw.split(';').next().unwrap_or("");
        let mut chars = code.char_indices().peekable();
        while let Some((start, c)) = chars.next() {
            match c {
                c if c.is_whitespace() => {}
                '(' => {
                    if done.is_some() {
                        return err(line, "unexpected text after the closing parenthesis");
                    }
                    stack.push((Vec::new(), line));
                }
                ')' => {
                    let Some((items, open_line)) = stack.pop() else {
                        return err(line, "unbalanced `)`");
                    };
                    let node = Sexp::List(items, open_line);
                    match stack.last_mut() {
                        Some((parent, _)) => parent.push(node),
                        None => done = Some(node),
                    }
                }
                _ => {
                    let mut end = start + c.len_utf8();
                    while let Some(&(i, n)) = chars.peek() {
                        if n.is_whitespace() || n == '(' || n == ')' {
                            break;
                        }
                        end = i + n.len_utf8();
                        chars.next();
                    }
                    let Some((parent, _)) = stack.last_mut() else {
                        return err(line, format!("unexpected `{}` outside parentheses", &code[start..end]));
                    };
                    parent.push(Sexp::Atom(code[start..end].to_ascii_lowercase(), line));
                }
            }
        }
    }
    if let Some((_, open_line)) = stack.last() {
        return err(*open_line, "unclosed `(`");
    }
    done.ok_or(PddlError { line: 1, message: "empty input".into() })
}

fn section<'a>(root: &'a [Sexp], key: &str) -> Option<&'a Sexp> {
    root.iter().find(|s| s.head() == Some(key))
}

fn parse_num<T: std::str::FromStr>(s: &Sexp) -> Result<T, PddlError> {
    match s.atom().and_then(|a| a.parse().ok()) {
        Some(v) => Ok(v),
        None => err(s.line(), "expected a non-negative integer"),
    }
}

fn location_from_token(tok: &str) -> Option<(bool, String)> {
    let (kind, rest) = tok.split_at_checked(1)?;
    let id = unmangle(rest)?;
    match kind {
        "s" => Some((false, id)),
        "h" => Some((true, id)),
        _ => None,
    }
}

fn atoms_of(s: &Sexp) -> Result<Vec<&Sexp>, PddlError> {
    match s.head() {
        Some("and") => Ok(s.list().unwrap()[1..].iter().collect()),
        _ if s.list().is_some() => Ok(vec![s]),
        _ => err(s.line(), "expected a conjunction"),
    }
}

/// Parses files written by [`export_pddl`] back into the planning problem.
pub fn read_pddl(domain: &str, problem: &str) -> Result<PlanningProblem, PddlError> {
    let dom = parse_sexp(domain)?;
    let prob = parse_sexp(problem)?;
    let (Some(droot), Some(proot)) = (dom.list(), prob.list()) else {
        return err(1, "expected a define form");
    };
    if dom.head() != Some("define") || prob.head() != Some("define") {
        return err(dom.line(), "expected `(define ...)`");
    }
    let dname = droot
        .get(1)
        .and_then(|s| s.list())
        .filter(|l| l.first().and_then(Sexp::atom) == Some("domain"))
        .and_then(|l| l.get(1)?.atom())
        .ok_or(PddlError { line: dom.line(), message: "missing domain name".into() })?;
    let name = dname
        .strip_prefix("hyp-")
        .and_then(unmangle)
        .ok_or(PddlError { line: dom.line(), message: format!("unrecognised domain name `{dname}`") })?;

    // objects: locations in order, slots, symbols
    let objects = section(proot, ":objects").ok_or(PddlError { line: prob.line(), message: "missing :objects".into() })?;
    let mut locations = vec![ProblemLocation::Init];
    let mut loc_index: HashMap<String, usize> = HashMap::from([("init".to_string(), 0)]);
    let mut slot_count = 0usize;
    let items = &objects.list().unwrap()[1..];
    let mut i = 0;
    while i < items.len() {
        let mut group = Vec::new();
        while i < items.len() && items[i].atom() != Some("-") {
            group.push(&items[i]);
            i += 1;
        }
        let Some(ty) = items.get(i + 1).and_then(Sexp::atom) else {
            return err(items.last().map_or(objects.line(), Sexp::line), "object list without a type");
        };
        i += 2;
        for obj in group {
            let tok = obj.atom().unwrap_or_default();
            match ty {
                "state" | "hyperstate" => {
                    let Some((hyper, id)) = location_from_token(tok).filter(|(h, _)| *h == (ty == "hyperstate")) else {
                        return err(obj.line(), format!("bad location object `{tok}`"));
                    };
                    loc_index.insert(tok.to_string(), locations.len());
                    locations.push(if hyper {
                        ProblemLocation::Hyper { id }
                    } else {
                        ProblemLocation::State { id, state_type: StateType::Good }
                    });
                }
                "slot" => slot_count += 1,
                "symbol" => {}
                other => return err(obj.line(), format!("unknown object type `{other}`")),
            }
        }
    }

    // init: numeric values, types, observations, initial fluents
    let init = section(proot, ":init").ok_or(PddlError { line: prob.line(), message: "missing :init".into() })?;
    let mut numbers: HashMap<String, Cost> = HashMap::new();
    let mut trace: Vec<Option<String>> = vec![None; slot_count];
    let mut initial_atoms: Vec<&Sexp> = Vec::new();
    for fact in &init.list().unwrap()[1..] {
        let Some(parts) = fact.list() else { return err(fact.line(), "expected a fact") };
        match fact.head() {
            Some("=") => {
                let key = parts.get(1).and_then(Sexp::head);
                let (Some(key), Some(v)) = (key, parts.get(2)) else { return err(fact.line(), "malformed assignment") };
                numbers.insert(key.to_string(), parse_num(v)?);
            }
            Some(t @ ("good" | "bad")) => {
                let tok = parts.get(1).and_then(Sexp::atom).unwrap_or_default();
                let Some(&l) = loc_index.get(tok) else { return err(fact.line(), format!("unknown state `{tok}`")) };
                let ty = if t == "good" { StateType::Good } else { StateType::Bad };
                match &mut locations[l] {
                    ProblemLocation::State { state_type, .. } => *state_type = ty,
                    _ => return err(fact.line(), format!("`{tok}` is not a state")),
                }
            }
            Some("observed") => {
                let slot = parts.get(1).and_then(Sexp::atom).and_then(|s| s.strip_prefix('o')?.parse::<usize>().ok());
                let sym = parts.get(2).and_then(Sexp::atom).and_then(|s| unmangle(s.strip_prefix('y')?));
                match (slot, sym) {
                    (Some(i), Some(sym)) if i < slot_count => trace[i] = Some(sym),
                    _ => return err(fact.line(), "malformed observation fact"),
                }
            }
            Some("follows") => {}
            Some(_) if parts.len() == 1 => initial_atoms.push(fact),
            _ => return err(fact.line(), "unexpected fact in :init"),
        }
    }
    let Some(trace) = trace.into_iter().collect::<Option<Vec<String>>>() else {
        return err(init.line(), "a trace slot has no observation");
    };
    let num = |k: &str| numbers.get(k).copied().ok_or(PddlError { line: init.line(), message: format!("missing value for `{k}`") });
    let params = CostParams {
        discard_cost: num("discard-cost")?,
        good_entry_cost: num("good-entry-cost")?,
        bad_entry_cost: num("bad-entry-cost")?,
        unobserved_step_cost: num("unobserved-step-cost")?,
    };
    let chain_cap = num("chain-cap")? as usize;

    // fluents from the nullary predicates
    let preds = section(droot, ":predicates").ok_or(PddlError { line: dom.line(), message: "missing :predicates".into() })?;
    let mut fluents = Vec::new();
    let mut fluent_index: HashMap<String, FluentId> = HashMap::new();
    for p in &preds.list().unwrap()[1..] {
        let Some(parts) = p.list() else { return err(p.line(), "expected a predicate") };
        if parts.len() != 1 {
            continue;
        }
        let name = parts[0].atom().unwrap_or_default();
        let f = match name {
            "done" => Fluent::Done,
            "anchored" => Fluent::Anchored,
            "open" => Fluent::Open,
            "started" => Fluent::Started,
            _ => {
                let parsed = if let Some(l) = name.strip_prefix("at-") {
                    loc_index.get(l).map(|&l| Fluent::At(l))
                } else if let Some(i) = name.strip_prefix("pending-") {
                    i.parse().ok().map(Fluent::Pending)
                } else if let Some(c) = name.strip_prefix("chain-") {
                    c.parse().ok().map(Fluent::Chain)
                } else {
                    None
                };
                match parsed {
                    Some(f) => f,
                    None => return err(p.line(), format!("unknown predicate `{name}`")),
                }
            }
        };
        fluent_index.insert(name.to_string(), fluents.len());
        fluents.push(f);
    }
    let lookup = |s: &Sexp| -> Result<FluentId, PddlError> {
        let name = s.head().filter(|_| s.list().is_some_and(|l| l.len() == 1));
        match name.and_then(|n| fluent_index.get(n)) {
            Some(&f) => Ok(f),
            None => err(s.line(), "expected a declared nullary predicate"),
        }
    };
    let mut initial: Vec<FluentId> = initial_atoms.into_iter().map(lookup).collect::<Result<_, _>>()?;
    initial.sort_unstable();
    let goal_sec = section(proot, ":goal").ok_or(PddlError { line: prob.line(), message: "missing :goal".into() })?;
    let Some(goal_expr) = goal_sec.list().and_then(|l| l.get(1)) else { return err(goal_sec.line(), "empty goal") };
    let mut goal: Vec<FluentId> = atoms_of(goal_expr)?.into_iter().map(lookup).collect::<Result<_, _>>()?;
    goal.sort_unstable();

    // actions
    let mut actions = Vec::new();
    for a in droot.iter().filter(|s| s.head() == Some(":action")) {
        let parts = a.list().unwrap();
        let Some(aname) = parts.get(1).and_then(Sexp::atom) else { return err(a.line(), "action without a name") };
        let kind = parse_action_name(aname).ok_or(PddlError { line: a.line(), message: format!("unrecognised action `{aname}`") })?;
        let field = |key: &str| parts.iter().position(|s| s.atom() == Some(key)).and_then(|i| parts.get(i + 1));
        let (Some(pre), Some(eff)) = (field(":precondition"), field(":effect")) else {
            return err(a.line(), format!("action `{aname}` lacks a precondition or effect"));
        };
        let mut pre_ids: Vec<FluentId> = atoms_of(pre)?.into_iter().map(lookup).collect::<Result<_, _>>()?;
        pre_ids.sort_unstable();
        let (mut add, mut del, mut cost) = (Vec::new(), Vec::new(), None);
        for e in atoms_of(eff)? {
            match e.head() {
                Some("not") => del.push(lookup(e.list().unwrap().get(1).unwrap_or(e))?),
                Some("increase") => {
                    let l = e.list().unwrap();
                    if l.get(1).and_then(Sexp::head) != Some("total-cost") || l.len() != 3 {
                        return err(e.line(), "only (increase (total-cost) N) is supported");
                    }
                    cost = Some(parse_num(&l[2])?);
                }
                _ => add.push(lookup(e)?),
            }
        }
        add.sort_unstable();
        del.sort_unstable();
        actions.push(GroundAction { kind, cost: cost.unwrap_or(0), pre: pre_ids, add, del });
    }

    Ok(PlanningProblem { name, trace, locations, fluents, actions, initial, goal, params, chain_cap })
}

fn parse_action_name(name: &str) -> Option<ActionKind> {
    let parts: Vec<&str> = name.split('-').collect();
    let id = |t: &str| location_from_token(t).map(|(_, id)| id);
    let num = |t: &str| t.parse::<usize>().ok();
    Some(match parts.as_slice() {
        ["begin", s] => ActionKind::Begin { state: id(s)? },
        ["explain", f, s, i] => ActionKind::Explain { from: id(f)?, state: id(s)?, index: num(i)? },
        ["stay", s, i] => ActionKind::ExplainInPlace { state: id(s)?, index: num(i)? },
        ["discard", i] => ActionKind::Discard { index: num(i)? },
        ["step", f, t, c] => ActionKind::UnobservedStep { from: id(f)?, to: id(t)?, chain: num(c)? },
        ["hyper", f, h, c] => ActionKind::EnterHyper { from: id(f)?, hyper: id(h)?, chain: num(c)? },
        _ => return None,
    })
}
