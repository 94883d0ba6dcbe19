//! The LTS++ modeling language: tokens for highlighting, a parser that
//! produces span-accurate diagnostics, a linter, a printer and the
//! transition-graph export used by the IDE.
//!
//! ```text
//! default <bad>
//! START <good> {
//!   start -> crawling | INFECTION
//! }
//! crawling <good> {blacklisted_download, adserver_increase}
//! INFECTION {
//!   infection_download {blacklisted_download} -> CC
//! }
//! CC {irc_increase}
//! start: start
//! ```
//!
//! Line 1 fixes the default state type and the last line names the start
//! state. Observation sets sit on one line; a `{` that does not close on its
//! own line opens a hyperstate block. A transition written after a block's
//! closing brace applies to every member, and a target naming a hyperstate
//! fans out to all of its members.

mod graph;
mod lexer;
mod lint;
mod parser;
mod printer;

pub use graph::{render_graph, GraphDoc, GraphEdge, GraphNode, NodeClass};
pub use lexer::{tokenize, Token, TokenKind};
pub use lint::lint;
pub use parser::{parse, parse_named};
pub use printer::pretty_print;
