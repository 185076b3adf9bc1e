use serde::{Deserialize, Serialize};

use super::lex;

/// A region of source text. Lines are 1-based, columns are 0-based char
/// columns, matching the REPL's position convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceSpan {
    pub start_line: usize,
    pub start_col: usize,
    pub end_line: usize,
    pub end_col: usize,
}

impl SourceSpan {
    pub fn new(start_line: usize, start_col: usize, end_line: usize, end_col: usize) -> Self {
        SourceSpan { start_line, start_col, end_line, end_col }
    }

    pub fn start(&self) -> (usize, usize) {
        (self.start_line, self.start_col)
    }

    pub fn end(&self) -> (usize, usize) {
        (self.end_line, self.end_col)
    }

    pub fn contains(&self, other: &SourceSpan) -> bool {
        self.start() <= other.start() && other.end() <= self.end()
    }

    pub fn contains_line(&self, line: usize) -> bool {
        self.start_line <= line && line <= self.end_line
    }

    pub fn disjoint(&self, other: &SourceSpan) -> bool {
        self.end() <= other.start() || other.end() <= self.start()
    }
}

/// Preorder index of a node; the root is always 0.
pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockKind {
    /// The tactic body right after the statement's `by`.
    Root,
    /// `have`/`obtain`/`suffices` lines, with or without a nested proof.
    HaveBlock,
    /// `case`, `next` and `·` focus blocks.
    CaseBlock,
    /// Any other line that owns indented continuation lines (`calc`,
    /// multi-line tactic arguments, `induction ... with`).
    AnonymousBlock,
    TacticLine,
}

/// A node of the indentation tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofBlock {
    pub id: NodeId,
    pub kind: BlockKind,
    pub indent: usize,
    pub span: SourceSpan,
    /// Lines owned by this node itself: its header line followed by any
    /// blank or comment-only lines before the next node starts.
    pub lines: Vec<String>,
    pub children: Vec<ProofBlock>,
    /// Index of the first owned line in the script body.
    #[serde(skip)]
    pub(crate) first_body_line: usize,
    /// Index of the last body line covered by the subtree.
    #[serde(skip)]
    pub(crate) last_body_line: usize,
}

impl ProofBlock {
    pub fn is_block(&self) -> bool {
        !matches!(self.kind, BlockKind::TacticLine)
    }

    /// Preorder walk of the subtree.
    pub fn walk(&self) -> Vec<&ProofBlock> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.walk());
        }
        out
    }

    pub fn find(&self, id: NodeId) -> Option<&ProofBlock> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(id))
    }

    pub fn parent_of(&self, id: NodeId) -> Option<&ProofBlock> {
        for c in &self.children {
            if c.id == id {
                return Some(self);
            }
            if let Some(p) = c.parent_of(id) {
                return Some(p);
            }
        }
        None
    }

    /// Chain of ancestors from the root down to (excluding) `id`.
    pub fn ancestors(&self, id: NodeId) -> Vec<&ProofBlock> {
        let mut chain = Vec::new();
        let mut cur = id;
        while let Some(p) = self.parent_of(cur) {
            chain.push(p);
            cur = p.id;
        }
        chain.reverse();
        chain
    }

    /// Deepest node whose subtree covers the 1-based `line` at `col`.
    pub fn innermost_at(&self, line: usize, col: usize) -> &ProofBlock {
        for c in &self.children {
            if (line, col) >= c.span.start() && line <= c.span.end_line {
                return c.innermost_at(line, col);
            }
        }
        self
    }

    /// Total number of source lines in the subtree.
    pub fn line_count(&self) -> usize {
        self.lines.len() + self.children.iter().map(|c| c.line_count()).sum::<usize>()
    }

    /// Children that carry code (trivia never forms its own node, so this
    /// is every child).
    pub fn code_children(&self) -> usize {
        self.children.len()
    }

    /// The header line (first owned line).
    pub fn header(&self) -> &str {
        self.lines.first().map(String::as_str).unwrap_or("")
    }

    /// Whether a `have`-style header names the proposition it proves
    /// (`have h : T := ...`), as opposed to `have := e` or `obtain ⟨..⟩ := h`.
    pub fn has_stated_goal(&self) -> bool {
        if self.kind != BlockKind::HaveBlock {
            return false;
        }
        let masked = lex::mask(self.header()).unwrap_or_default();
        let t = masked.trim_start();
        let Some(rest) = t.strip_prefix("have").or_else(|| t.strip_prefix("suffices")) else {
            return false;
        };
        let chars: Vec<char> = rest.chars().collect();
        let mut depth = 0i32;
        for i in 0..chars.len() {
            match chars[i] {
                '(' | '[' | '{' | '⟨' => depth += 1,
                ')' | ']' | '}' | '⟩' => depth -= 1,
                ':' if depth == 0 => return chars.get(i + 1) != Some(&'='),
                _ => {}
            }
        }
        false
    }

    /// Checks the containment/disjointness/indentation invariants of the
    /// subtree. Returns a description of the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.span.start() > self.span.end() {
            return Err(format!("node {} has inverted span {:?}", self.id, self.span));
        }
        for (i, c) in self.children.iter().enumerate() {
            if !self.span.contains(&c.span) {
                return Err(format!("child {} escapes parent {}", c.id, self.id));
            }
            if self.kind != BlockKind::Root && c.indent <= self.indent {
                return Err(format!("child {} not indented past parent {}", c.id, self.id));
            }
            if let Some(next) = self.children.get(i + 1) {
                if !c.span.disjoint(&next.span) || c.span.start() > next.span.start() {
                    return Err(format!("siblings {} and {} overlap", c.id, next.id));
                }
            }
            c.check_invariants()?;
        }
        Ok(())
    }
}

pub(crate) fn classify_header(masked_header: &str, has_children: bool) -> BlockKind {
    let t = masked_header.trim_start();
    let first: String = t
        .chars()
        .take_while(|c| lex::is_ident_char(*c) && *c != '.')
        .collect();
    if t.starts_with('·') || t.starts_with(". ") {
        return BlockKind::CaseBlock;
    }
    match first.as_str() {
        "have" | "haveI" | "obtain" | "suffices" => BlockKind::HaveBlock,
        "case" | "case'" | "next" => BlockKind::CaseBlock,
        _ if has_children => BlockKind::AnonymousBlock,
        _ => BlockKind::TacticLine,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_classification() {
        assert_eq!(classify_header("  have h : x = 1 := by", true), BlockKind::HaveBlock);
        assert_eq!(classify_header("  have h : x = 1 := by simp", false), BlockKind::HaveBlock);
        assert_eq!(classify_header("  · nlinarith", false), BlockKind::CaseBlock);
        assert_eq!(classify_header("  case inl h =>", true), BlockKind::CaseBlock);
        assert_eq!(classify_header("  calc a = b := by ring", true), BlockKind::AnonymousBlock);
        assert_eq!(classify_header("  nlinarith [sq_nonneg x]", false), BlockKind::TacticLine);
        assert_eq!(classify_header("  haveX", false), BlockKind::TacticLine);
    }

    #[test]
    fn span_relations() {
        let outer = SourceSpan::new(2, 2, 5, 10);
        let inner = SourceSpan::new(3, 4, 4, 8);
        assert!(outer.contains(&inner));
        assert!(!inner.contains(&outer));
        assert!(SourceSpan::new(1, 0, 1, 5).disjoint(&SourceSpan::new(2, 0, 2, 3)));
    }
}
