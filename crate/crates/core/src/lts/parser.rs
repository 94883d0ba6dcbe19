use std::collections::{BTreeSet, HashMap};

use crate::diagnostic::{sort_diagnostics, Diagnostic, Span};
use crate::lts::lexer::{tokenize, Token, TokenKind};
use crate::model::{validate_model, Hyperstate, ModelSpec, State, StateType, Transition};

/// Parses LTS++ source into a validated model, or returns every error found.
pub fn parse(source: &str) -> Result<ModelSpec, Vec<Diagnostic>> {
    parse_named("model", source)
}

pub fn parse_named(name: &str, source: &str) -> Result<ModelSpec, Vec<Diagnostic>> {
    let tokens: Vec<Token> = tokenize(source)
        .into_iter()
        .filter(|t| t.kind != TokenKind::Comment)
        .collect();
    let mut p = Parser { tokens: &tokens, pos: 0, diags: Vec::new(), eof: eof_span(source) };
    for t in tokens.iter().filter(|t| t.kind == TokenKind::Error) {
        p.diags.push(Diagnostic::error(
            "unexpected-character",
            format!("unexpected character `{}`", t.text),
            t.span,
        ));
    }
    let raw = p.model();
    let mut diags = p.diags;
    let model = raw.map(|raw| resolve(sanitize_name(name), raw));
    if let Some(m) = &model {
        diags.extend(validate_model(m));
    }
    sort_diagnostics(&mut diags);
    diags.dedup();
    match model {
        Some(m) if diags.iter().all(|d| !d.is_error()) => Ok(m),
        _ => Err(diags),
    }
}

fn eof_span(source: &str) -> Span {
    let line = source.lines().count().max(1) as u32;
    let last = source.lines().last().unwrap_or("");
    let offset = source.len();
    if source.ends_with('\n') {
        Span::new(line + 1, 1, offset, 0)
    } else {
        Span::new(line, last.chars().count() as u32 + 1, offset, 0)
    }
}

fn sanitize_name(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "model".into()
    } else {
        s
    }
}

struct RawState {
    id: String,
    ty: Option<StateType>,
    obs: Option<BTreeSet<String>>,
    targets: Vec<Transition>,
    span: Span,
}

struct RawBlock {
    id: String,
    ty: Option<StateType>,
    members: Vec<RawState>,
    exits: Vec<Transition>,
    implicit: bool,
    span: Span,
}

struct RawModel {
    default_type: StateType,
    blocks: Vec<RawBlock>,
    start: String,
    start_span: Span,
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    diags: Vec<Diagnostic>,
    eof: Span,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.skip_errors_from(self.pos).map(|i| &self.tokens[i])
    }

    fn skip_errors_from(&self, mut i: usize) -> Option<usize> {
        while i < self.tokens.len() && self.tokens[i].kind == TokenKind::Error {
            i += 1;
        }
        (i < self.tokens.len()).then_some(i)
    }

    fn peek_kind(&self) -> Option<TokenKind> {
        self.peek().map(|t| t.kind)
    }

    fn next(&mut self) -> Option<&'t Token> {
        let i = self.skip_errors_from(self.pos)?;
        self.pos = i + 1;
        Some(&self.tokens[i])
    }

    fn here(&self) -> Span {
        self.peek().map(|t| t.span).unwrap_or(self.eof)
    }

    fn error(&mut self, code: &str, message: impl Into<String>, span: Span) {
        self.diags.push(Diagnostic::error(code, message, span));
    }

    fn state_type(&mut self, tok: &Token) -> Option<StateType> {
        match tok.type_name().parse() {
            Ok(t) => Some(t),
            Err(msg) => {
                self.error("unknown-type", msg, tok.span);
                None
            }
        }
    }

    fn model(&mut self) -> Option<RawModel> {
        if self.tokens.is_empty() {
            self.error("empty-model", "empty model", self.eof);
            return None;
        }
        let default_type = match self.peek_kind() {
            Some(TokenKind::KeywordDefault) => {
                let kw = self.next().expect("peeked");
                match self.peek_kind() {
                    Some(TokenKind::LangleType) => {
                        let t = self.next().expect("peeked");
                        self.state_type(t).unwrap_or(StateType::Good)
                    }
                    _ => {
                        self.error("missing-default", "expected a state type such as <good> after `default`", kw.span);
                        StateType::Good
                    }
                }
            }
            _ => {
                let span = self.here();
                self.error("missing-default", "missing default declaration (`default <good>` or `default <bad>` on the first line)", span);
                StateType::Good
            }
        };

        let mut blocks = Vec::new();
        let mut start: Option<(String, Span)> = None;
        while let Some(tok) = self.peek() {
            match tok.kind {
                TokenKind::HyperIdentifier => {
                    if let Some(b) = self.block() {
                        blocks.push(b);
                    }
                }
                TokenKind::Identifier => {
                    if let Some(s) = self.state_decl() {
                        blocks.push(RawBlock {
                            id: s.id.clone(),
                            ty: None,
                            span: s.span,
                            members: vec![s],
                            exits: Vec::new(),
                            implicit: true,
                        });
                    }
                }
                TokenKind::KeywordStart => {
                    start = self.start_decl();
                    if let Some(extra) = self.peek() {
                        self.error(
                            "trailing-tokens",
                            format!("unexpected `{}` after the start declaration (it must be the last line)", extra.text),
                            extra.span,
                        );
                        while self.next().is_some() {}
                    }
                    break;
                }
                TokenKind::KeywordDefault => {
                    self.error("duplicate-default", "the default type may only be declared once, on the first line", tok.span);
                    self.next();
                    if self.peek_kind() == Some(TokenKind::LangleType) {
                        self.next();
                    }
                }
                _ => {
                    self.error("unexpected-token", format!("unexpected `{}`", tok.text), tok.span);
                    self.next();
                }
            }
        }
        let (start, start_span) = match start {
            Some(s) => s,
            None => {
                if !self.diags.iter().any(|d| d.code == "missing-start") {
                    self.error("missing-start", "missing start declaration (`start: <state>` on the last line)", self.eof);
                }
                return None;
            }
        };
        Some(RawModel { default_type, blocks, start, start_span })
    }

    fn start_decl(&mut self) -> Option<(String, Span)> {
        let kw = self.next().expect("peeked start");
        if self.peek_kind() != Some(TokenKind::Colon) {
            self.error("missing-start", "expected `:` after `start`", kw.span);
            return None;
        }
        self.next();
        match self.peek_kind() {
            Some(TokenKind::Identifier) | Some(TokenKind::HyperIdentifier) => {
                let t = self.next().expect("peeked");
                Some((t.text.clone(), t.span))
            }
            _ => {
                let span = self.here();
                self.error("missing-start", "expected the start state name after `start:`", span);
                None
            }
        }
    }

    fn block(&mut self) -> Option<RawBlock> {
        let id_tok = self.next().expect("peeked hyper id");
        let ty = if self.peek_kind() == Some(TokenKind::LangleType) {
            let t = self.next().expect("peeked");
            self.state_type(t)
        } else {
            None
        };
        let open = match self.peek_kind() {
            Some(TokenKind::LBrace) => self.next().expect("peeked"),
            _ => {
                let span = self.here();
                self.error("expected-brace", format!("expected `{{` after hyperstate `{}`", id_tok.text), span);
                return None;
            }
        };
        let mut members = Vec::new();
        loop {
            match self.peek_kind() {
                Some(TokenKind::RBrace) => {
                    self.next();
                    break;
                }
                Some(TokenKind::Identifier) => {
                    if let Some(s) = self.state_decl() {
                        members.push(s);
                    }
                }
                Some(TokenKind::HyperIdentifier) | Some(TokenKind::KeywordStart) | None => {
                    self.error(
                        "unclosed-brace",
                        format!("hyperstate `{}` is missing its closing `}}`", id_tok.text),
                        open.span,
                    );
                    break;
                }
                Some(_) => {
                    let t = self.next().expect("peeked");
                    self.error("unexpected-token", format!("unexpected `{}` inside hyperstate `{}`", t.text, id_tok.text), t.span);
                }
            }
        }
        let exits = if self.peek_kind() == Some(TokenKind::Arrow) { self.targets() } else { Vec::new() };
        if members.is_empty() {
            self.error("empty-hyperstate", format!("hyperstate `{}` has no member states", id_tok.text), id_tok.span);
        }
        Some(RawBlock { id: id_tok.text.clone(), ty, members, exits, implicit: false, span: id_tok.span })
    }

    fn state_decl(&mut self) -> Option<RawState> {
        let id_tok = self.next().expect("peeked identifier");
        let mut ty = None;
        if self.peek_kind() == Some(TokenKind::LangleType) {
            let t = self.next().expect("peeked");
            ty = self.state_type(t);
        }
        let mut obs = None;
        if self.peek_kind() == Some(TokenKind::LBrace) {
            obs = Some(self.obs_set());
        }
        let targets = if self.peek_kind() == Some(TokenKind::Arrow) { self.targets() } else { Vec::new() };
        Some(RawState { id: id_tok.text.clone(), ty, obs, targets, span: id_tok.span })
    }

    fn obs_set(&mut self) -> BTreeSet<String> {
        let open = self.next().expect("peeked brace");
        let mut set = BTreeSet::new();
        let mut expect_symbol = true;
        let mut last_comma: Option<Span> = None;
        loop {
            match self.peek_kind() {
                Some(TokenKind::ObsSymbol) => {
                    let t = self.next().expect("peeked");
                    set.insert(t.text.clone());
                    expect_symbol = false;
                    last_comma = None;
                }
                Some(TokenKind::Comma) => {
                    let t = self.next().expect("peeked");
                    if expect_symbol {
                        self.error("empty-observation", "expected an observation before `,`", t.span);
                    }
                    expect_symbol = true;
                    last_comma = Some(t.span);
                }
                Some(TokenKind::RBrace) => {
                    self.next();
                    if let Some(span) = last_comma {
                        self.error("empty-observation", "trailing `,` in observation set", span);
                    }
                    return set;
                }
                _ => {
                    self.error("unclosed-brace", "observation set is missing its closing `}`", open.span);
                    return set;
                }
            }
        }
    }

    fn targets(&mut self) -> Vec<Transition> {
        let arrow = self.next().expect("peeked arrow");
        let mut out = Vec::new();
        let mut sep = arrow;
        loop {
            match self.peek_kind() {
                Some(TokenKind::Identifier) => {
                    let t = self.next().expect("peeked");
                    out.push(Transition { target: t.text.clone(), span: t.span });
                }
                _ => {
                    let span = self.here();
                    self.error(
                        "expected-state",
                        format!("expected a state name after `{}`", sep.text),
                        if span == self.eof { sep.span } else { span },
                    );
                    if self.peek_kind() == Some(TokenKind::Pipe) {
                        sep = self.next().expect("peeked");
                        continue;
                    }
                    return out;
                }
            }
            if self.peek_kind() == Some(TokenKind::Pipe) {
                sep = self.next().expect("peeked");
            } else {
                return out;
            }
        }
    }
}

/// Resolves types and expands hyperstate-level transitions into members.
fn resolve(name: String, raw: RawModel) -> ModelSpec {
    let group_members: HashMap<&str, Vec<&str>> = raw
        .blocks
        .iter()
        .filter(|b| !b.implicit)
        .map(|b| (b.id.as_str(), b.members.iter().map(|m| m.id.as_str()).collect()))
        .collect();
    let state_ids: BTreeSet<&str> = raw.blocks.iter().flat_map(|b| b.members.iter().map(|m| m.id.as_str())).collect();
    let expand = |t: &Transition| -> Vec<Transition> {
        if state_ids.contains(t.target.as_str()) {
            return vec![t.clone()];
        }
        match group_members.get(t.target.as_str()) {
            Some(members) => members.iter().map(|m| Transition { target: m.to_string(), span: t.span }).collect(),
            None => vec![t.clone()],
        }
    };

    let hyperstates = raw
        .blocks
        .iter()
        .map(|b| {
            let members = b
                .members
                .iter()
                .map(|s| {
                    let mut transitions: Vec<Transition> = Vec::new();
                    for t in s.targets.iter().chain(b.exits.iter()) {
                        for e in expand(t) {
                            if !transitions.iter().any(|x| x.target == e.target) {
                                transitions.push(e);
                            }
                        }
                    }
                    State {
                        id: s.id.clone(),
                        state_type: s.ty.or(b.ty).unwrap_or(raw.default_type),
                        type_annotated: s.ty.is_some(),
                        empty_obs_braces: s.obs.as_ref().is_some_and(|o| o.is_empty()),
                        observations: s.obs.clone().unwrap_or_default(),
                        transitions,
                        span: s.span,
                    }
                })
                .collect();
            Hyperstate {
                id: b.id.clone(),
                declared_type: b.ty,
                members,
                exits: b.exits.clone(),
                implicit: b.implicit,
                span: b.span,
            }
        })
        .collect();
    ModelSpec {
        name,
        default_type: raw.default_type,
        hyperstates,
        start: raw.start,
        start_span: raw.start_span,
    }
}
