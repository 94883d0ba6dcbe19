use std::fmt;

use serde::{Deserialize, Serialize};

/// Location of a piece of source text.
///
/// `line` and `column` are 1-based; `column` counts characters. `offset` and
/// `length` are in bytes so the span can slice the original source.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub column: u32,
    pub offset: usize,
    pub length: usize,
}

impl Span {
    pub fn new(line: u32, column: u32, offset: usize, length: usize) -> Self {
        Self { line, column, offset, length }
    }

    pub fn end(&self) -> usize {
        self.offset + self.length
    }

    /// True for spans that never came from source text (programmatic models).
    pub fn is_synthetic(&self) -> bool {
        self.line == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    pub span: Span,
}

impl Diagnostic {
    pub fn error(code: &str, message: impl Into<String>, span: Span) -> Self {
        Self { severity: Severity::Error, code: code.to_string(), message: message.into(), span }
    }

    pub fn warning(code: &str, message: impl Into<String>, span: Span) -> Self {
        Self { severity: Severity::Warning, code: code.to_string(), message: message.into(), span }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(
            f,
            "{}:{}: {}[{}]: {}",
            self.span.line, self.span.column, level, self.code, self.message
        )
    }
}

/// Sorts diagnostics by position, then severity, then code.
pub fn sort_diagnostics(diags: &mut [Diagnostic]) {
    diags.sort_by(|a, b| {
        (a.span.offset, a.span.line, a.severity, &a.code, &a.message)
            .cmp(&(b.span.offset, b.span.line, b.severity, &b.code, &b.message))
    });
}
