//! Editable model of a Lean 4 tactic proof.
//!
//! A script is parsed into a tree driven purely by indentation: every line
//! that carries code becomes a node, and a node's children are the lines
//! indented past it that follow it. Comments and blank lines ride along
//! with the node before them, so serializing the tree reproduces the
//! original bytes exactly.

pub mod lex;
mod script;
mod statement;
mod tree;

use thiserror::Error;

pub use script::{count_sorries, sorry_positions, ProofScript};
pub use statement::TheoremStatement;
pub use tree::{BlockKind, NodeId, ProofBlock, SourceSpan};

pub use statement::normalize_ws;

pub(crate) use statement::is_valid_ident;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unterminated block comment starting on line {line}")]
    UnterminatedComment { line: usize },
    #[error("unterminated string literal starting on line {line}")]
    UnterminatedString { line: usize },
    #[error("no `:= by` tactic proof found")]
    NoProofBody,
    #[error("tab character in indentation on line {line}")]
    TabIndent { line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditError {
    #[error("edit target not found in the proof tree")]
    NodeNotFound,
    #[error("edited script no longer parses: {0}")]
    Reparse(ParseError),
}

/// Parse `source` as the proof of `statement`. When `source` holds only a
/// tactic body (no declaration), the statement is prepended.
pub fn parse_script(source: &str, statement: &TheoremStatement) -> Result<ProofScript, ParseError> {
    let masked = lex::mask(source)?;
    let has_decl = masked
        .split('\n')
        .any(|l| !lex::find_word(l, "theorem").is_empty() || !lex::find_word(l, "lemma").is_empty());
    if has_decl {
        ProofScript::parse(source, statement)
    } else {
        let mut text = statement.render();
        if !source.starts_with('\n') {
            text.push('\n');
        }
        text.push_str(source);
        ProofScript::parse(&text, statement)
    }
}

/// Number of tactics in the proof. Every node of the tree counts once,
/// except continuation lines nested under an anonymous block (the
/// arguments of a multi-line tactic, or the steps of a `calc`), which
/// belong to the tactic that opened them.
pub fn proof_length(script: &ProofScript) -> usize {
    fn count(block: &ProofBlock) -> usize {
        let own = usize::from(block.kind != BlockKind::Root);
        if block.kind == BlockKind::AnonymousBlock {
            return own;
        }
        own + block.children.iter().map(count).sum::<usize>()
    }
    count(&script.root)
}

/// Trim trailing whitespace on every line; the normal form used for
/// round-trip comparison and transcript keys.
pub fn normalize_trailing_ws(text: &str) -> String {
    text.split('\n').map(str::trim_end).collect::<Vec<_>>().join("\n")
}
