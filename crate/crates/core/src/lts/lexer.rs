use serde::{Deserialize, Serialize};

use crate::diagnostic::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Identifier,
    /// An identifier that opens a hyperstate block.
    HyperIdentifier,
    ObsSymbol,
    Arrow,
    Pipe,
    LBrace,
    RBrace,
    /// `<good>` or `<bad>`, angle brackets included.
    LangleType,
    Comma,
    KeywordDefault,
    KeywordStart,
    Colon,
    Comment,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
    pub text: String,
}

impl Token {
    /// The type name inside a `LangleType` token.
    pub fn type_name(&self) -> &str {
        self.text.trim_start_matches('<').trim_end_matches('>').trim()
    }
}

pub(crate) fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, byte_ahead: usize) -> Option<char> {
        self.src.get(self.pos + byte_ahead..).and_then(|s| s.chars().next())
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn rest_of_line(&self) -> &'a str {
        let rest = &self.src[self.pos..];
        match rest.find('\n') {
            Some(i) => &rest[..i],
            None => rest,
        }
    }
}

/// Splits LTS++ source into tokens. Never fails: characters that fit no rule
/// become `Error` tokens for the parser to report.
///
/// Curly braces are classified by looking ahead on the same line: a `{` whose
/// matching `}` appears on that line with no `{` or `->` in between opens an
/// observation set; any other `{` opens a hyperstate block.
pub fn tokenize(source: &str) -> Vec<Token> {
    let mut cur = Cursor { src: source, pos: 0, line: 1, col: 1 };
    let mut tokens: Vec<Token> = Vec::new();
    let mut in_obs = false;

    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        let (start, line, col) = (cur.pos, cur.line, cur.col);
        let kind = if c == '#' {
            let len = cur.rest_of_line().len();
            for _ in cur.src[cur.pos..cur.pos + len].chars() {
                cur.bump();
            }
            TokenKind::Comment
        } else if c == '-' && cur.peek_at(1) == Some('>') {
            cur.bump();
            cur.bump();
            TokenKind::Arrow
        } else if c == '|' {
            cur.bump();
            TokenKind::Pipe
        } else if c == ',' {
            cur.bump();
            TokenKind::Comma
        } else if c == ':' {
            cur.bump();
            TokenKind::Colon
        } else if c == '}' {
            cur.bump();
            in_obs = false;
            TokenKind::RBrace
        } else if c == '{' {
            let line_rest = &cur.rest_of_line()[1..];
            let obs = match line_rest.find('}') {
                Some(close) => {
                    let inner = &line_rest[..close];
                    !inner.contains('{') && !inner.contains("->")
                }
                None => false,
            };
            cur.bump();
            if obs {
                in_obs = true;
            } else {
                promote_block_owner(&mut tokens);
            }
            TokenKind::LBrace
        } else if c == '<' {
            let line_rest = cur.rest_of_line();
            match line_rest.find('>') {
                Some(close) if !line_rest[1..close].contains('<') => {
                    for _ in line_rest[..=close].chars() {
                        cur.bump();
                    }
                    TokenKind::LangleType
                }
                _ => {
                    cur.bump();
                    TokenKind::Error
                }
            }
        } else if is_ident_char(c) {
            while cur.peek().is_some_and(is_ident_char) {
                cur.bump();
            }
            let word = &source[start..cur.pos];
            let next = source[cur.pos..].trim_start_matches([' ', '\t']).chars().next();
            if in_obs {
                TokenKind::ObsSymbol
            } else if word == "default" && next == Some('<') {
                TokenKind::KeywordDefault
            } else if word == "start" && next == Some(':') {
                TokenKind::KeywordStart
            } else {
                TokenKind::Identifier
            }
        } else {
            cur.bump();
            TokenKind::Error
        };
        let text = source[start..cur.pos].to_string();
        tokens.push(Token { kind, span: Span::new(line, col, start, cur.pos - start), text });
    }
    tokens
}

/// The identifier right before a block brace (possibly with a type in
/// between) names a hyperstate.
fn promote_block_owner(tokens: &mut [Token]) {
    let mut idx = tokens.len();
    while idx > 0 {
        idx -= 1;
        match tokens[idx].kind {
            TokenKind::Comment | TokenKind::LangleType => continue,
            TokenKind::Identifier => {
                tokens[idx].kind = TokenKind::HyperIdentifier;
                return;
            }
            _ => return,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use TokenKind::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn start_line() {
        assert_eq!(kinds("start: host"), vec![KeywordStart, Colon, Identifier]);
    }

    #[test]
    fn observation_list_with_comma() {
        assert_eq!(
            kinds("{HighNXVolume, IRCTraffic}"),
            vec![LBrace, ObsSymbol, Comma, ObsSymbol, RBrace]
        );
        assert_eq!(kinds("s {a b}"), vec![Identifier, LBrace, ObsSymbol, ObsSymbol, RBrace]);
    }

    #[test]
    fn empty_source() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn block_owner_becomes_hyper_identifier() {
        let src = "INFECTION <bad> {\n  a {x} -> b | c\n}";
        assert_eq!(
            kinds(src),
            vec![
                HyperIdentifier, LangleType, LBrace, Identifier, LBrace, ObsSymbol, RBrace, Arrow,
                Identifier, Pipe, Identifier, RBrace
            ]
        );
    }

    #[test]
    fn state_named_start_is_not_a_keyword() {
        assert_eq!(kinds("start -> a"), vec![Identifier, Arrow, Identifier]);
        assert_eq!(kinds("default <good>"), vec![KeywordDefault, LangleType]);
    }

    #[test]
    fn spans_are_one_based_and_track_lines() {
        let toks = tokenize("default <good>\n  s {o}");
        let s = &toks[2];
        assert_eq!((s.span.line, s.span.column, s.span.offset, s.span.length), (2, 3, 17, 1));
        assert_eq!(toks[1].type_name(), "good");
    }

    #[test]
    fn stray_characters_become_error_tokens() {
        assert_eq!(kinds("a @ b"), vec![Identifier, Error, Identifier]);
        assert_eq!(kinds("a - b"), vec![Identifier, Error, Identifier]);
        assert_eq!(kinds("# note\na"), vec![Comment, Identifier]);
    }
}
