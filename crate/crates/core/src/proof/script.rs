use serde::{Deserialize, Serialize};

use super::lex;
use super::statement::{locate_decl, offset_of, TheoremStatement};
use super::tree::{classify_header, BlockKind, NodeId, ProofBlock, SourceSpan};
use super::{EditError, ParseError};

/// A Lean proof: verbatim source split at the statement's `by`, plus the
/// indentation tree of the tactic body.
///
/// The text up to and including `by` is kept as an opaque prefix. The body
/// is stored line by line; `body[0]` is whatever follows `by` on its own
/// line (usually empty).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofScript {
    pub statement: TheoremStatement,
    pub root: ProofBlock,
    pub raw_text: String,
    prefix: String,
    body: Vec<String>,
    /// 1-based line of the `by` token.
    by_line: usize,
    /// Char column just past `by`.
    by_end_col: usize,
}

struct Draft {
    indent: usize,
    first: usize,
    own_last: usize,
    children: Vec<usize>,
}

impl ProofScript {
    /// Parse a complete source file. The declaration is chosen by
    /// `statement.name` when present, falling back to the last theorem.
    pub fn parse(source: &str, statement: &TheoremStatement) -> Result<Self, ParseError> {
        Self::parse_named(source, Some(&statement.name), statement.informal_prefix.clone())
    }

    /// Parse a source file, taking the last declaration as the theorem.
    pub fn parse_source(source: &str) -> Result<Self, ParseError> {
        Self::parse_named(source, None, None)
    }

    fn parse_named(
        source: &str,
        name: Option<&str>,
        informal_prefix: Option<String>,
    ) -> Result<Self, ParseError> {
        let loc = locate_decl(source, name)?;
        let lines: Vec<&str> = source.split('\n').collect();
        let kw = offset_of(&lines, loc.keyword);
        let by_end = offset_of(&lines, loc.by_end);
        let statement = TheoremStatement {
            name: loc.name.clone(),
            header: source[..kw].to_string(),
            statement_text: source[kw..by_end].to_string(),
            informal_prefix,
        };
        let prefix = source[..by_end].to_string();
        let body: Vec<String> = source[by_end..].split('\n').map(str::to_string).collect();
        Self::assemble(statement, prefix, body, loc.by_end.0 + 1, loc.by_end.1)
    }

    fn assemble(
        statement: TheoremStatement,
        prefix: String,
        body: Vec<String>,
        by_line: usize,
        by_end_col: usize,
    ) -> Result<Self, ParseError> {
        let root = build_tree(&body, by_line, by_end_col)?;
        let raw_text = format!("{}{}", prefix, body.join("\n"));
        Ok(ProofScript { statement, root, raw_text, prefix, body, by_line, by_end_col })
    }

    fn with_body(&self, body: Vec<String>) -> Result<Self, EditError> {
        Self::assemble(self.statement.clone(), self.prefix.clone(), body, self.by_line, self.by_end_col)
            .map_err(EditError::Reparse)
    }

    /// Verbatim source text.
    pub fn serialize(&self) -> String {
        self.raw_text.clone()
    }

    /// Text before the declaration keyword (imports, opens, helper lemmas).
    pub fn preamble_text(&self) -> &str {
        &self.statement.header
    }

    pub fn body_lines(&self) -> &[String] {
        &self.body
    }

    /// 1-based line of the statement's `by`.
    pub fn by_line(&self) -> usize {
        self.by_line
    }

    pub fn by_end_col(&self) -> usize {
        self.by_end_col
    }

    /// Number of lines in the whole file.
    pub fn line_count(&self) -> usize {
        self.raw_text.split('\n').count()
    }

    pub fn node(&self, id: NodeId) -> Option<&ProofBlock> {
        self.root.find(id)
    }

    /// Node whose span starts exactly at `(line, col)`.
    pub fn node_starting_at(&self, line: usize, col: usize) -> Option<&ProofBlock> {
        self.root.walk().into_iter().find(|n| n.span.start() == (line, col))
    }

    /// Positions (1-based line, char column) of every `sorry`/`admit`
    /// token outside comments and strings, in source order.
    pub fn sorry_positions(&self) -> Vec<(usize, usize)> {
        sorry_positions(&self.raw_text)
    }

    pub fn count_sorries(&self) -> usize {
        self.sorry_positions().len()
    }

    fn body_index(&self, line: usize) -> Option<usize> {
        line.checked_sub(self.by_line).filter(|i| *i < self.body.len())
    }

    // ---- edits ----

    /// Remove the source lines covered by `span`.
    pub fn remove_line(&self, span: SourceSpan) -> Result<Self, EditError> {
        let node = self
            .node_starting_at(span.start_line, span.start_col)
            .or_else(|| {
                let n = self.root.innermost_at(span.start_line, span.start_col);
                (n.kind != BlockKind::Root).then_some(n)
            })
            .ok_or(EditError::NodeNotFound)?;
        let first = self.body_index(span.start_line).ok_or(EditError::NodeNotFound)?;
        let last = self.body_index(span.end_line).ok_or(EditError::NodeNotFound)?;
        self.remove_range(node.id, first, last)
    }

    /// Remove a node together with its subtree.
    pub fn remove_block(&self, id: NodeId) -> Result<Self, EditError> {
        let node = self.node(id).ok_or(EditError::NodeNotFound)?;
        if node.kind == BlockKind::Root {
            return Err(EditError::NodeNotFound);
        }
        self.remove_range(id, node.first_body_line, node.last_body_line)
    }

    /// Clamp an inclusive body range end so the empty slot after a final
    /// newline survives edits.
    fn keep_eof(&self, first: usize, last: usize) -> usize {
        if last + 1 == self.body.len() && last > first && self.body[last].is_empty() {
            last - 1
        } else {
            last
        }
    }

    fn remove_range(&self, id: NodeId, first: usize, last: usize) -> Result<Self, EditError> {
        let last = self.keep_eof(first, last);
        let node = self.node(id).ok_or(EditError::NodeNotFound)?;
        let parent = self.root.parent_of(id).ok_or(EditError::NodeNotFound)?;
        let emptied = parent.code_children() == 1
            && first <= node.first_body_line
            && last >= self.keep_eof(first, node.last_body_line)
            && parent.kind != BlockKind::AnonymousBlock;
        let mut body = self.body.clone();
        if emptied {
            let fill = if first == 0 { " sorry".to_string() } else { format!("{}sorry", " ".repeat(node.indent)) };
            body.splice(first..=last, [fill]);
        } else if first == 0 {
            body[0].clear();
            body.drain(1..=last);
        } else {
            body.drain(first..=last);
        }
        self.with_body(body)
    }

    /// Replace a node and its subtree by a `sorry` that keeps whatever the
    /// node promised: `have h : T := by sorry`, `· sorry`, `case x => sorry`,
    /// or a bare `sorry` for anything else.
    pub fn replace_block_with_sorry(&self, id: NodeId) -> Result<Self, EditError> {
        let node = self.node(id).ok_or(EditError::NodeNotFound)?;
        if node.kind == BlockKind::Root {
            return Err(EditError::NodeNotFound);
        }
        let first = node.first_body_line;
        let last = self.keep_eof(first, node.last_body_line);
        let indent = " ".repeat(if first == 0 { 0 } else { node.indent });
        let mut replacement: Vec<String> = Vec::new();
        match node.kind {
            BlockKind::HaveBlock if node.has_stated_goal() => {
                match find_assign(&self.body[first..=last]) {
                    Some((li, col)) => {
                        replacement.extend(self.body[first..first + li].iter().cloned());
                        let line = &self.body[first + li];
                        let cut = lex::byte_of_col(line, col + 2);
                        replacement.push(format!("{} by sorry", &line[..cut]));
                    }
                    None => replacement.push(format!("{indent}sorry")),
                }
            }
            BlockKind::CaseBlock => {
                let header = &self.body[first];
                let masked = lex::mask(header).unwrap_or_default();
                let keep = if let Some(pos) = masked.find("=>") {
                    let col = masked[..pos].chars().count() + 2;
                    header[..lex::byte_of_col(header, col)].to_string()
                } else if let Some(pos) = masked.find('·') {
                    let col = masked[..pos].chars().count() + 1;
                    header[..lex::byte_of_col(header, col)].to_string()
                } else {
                    indent.clone()
                };
                replacement.push(format!("{} sorry", keep.trim_end()));
            }
            _ => replacement.push(format!("{indent}sorry")),
        }
        if first == 0 && !replacement[0].starts_with(' ') {
            replacement[0].insert(0, ' ');
        }
        let mut body = self.body.clone();
        body.splice(first..=last, replacement);
        self.with_body(body)
    }

    /// Insert a `sorry` right after the node starting at `span`. A new line
    /// is opened at the node's indentation; nodes that live on a `by` line
    /// (the statement's own, or an inline `have ... := by tac`) get `; sorry`
    /// appended instead, since a new line could not continue that block.
    pub fn insert_sorry_after(&self, span: SourceSpan) -> Result<Self, EditError> {
        let node = self
            .node_starting_at(span.start_line, span.start_col)
            .ok_or(EditError::NodeNotFound)?;
        let mut body = self.body.clone();
        let inline = node.first_body_line == 0
            || (node.kind == BlockKind::HaveBlock && node.children.is_empty());
        if inline {
            let idx = node.last_body_line;
            let line = &mut body[idx];
            let code_end = code_end_byte(line);
            line.insert_str(code_end, "; sorry");
        } else {
            let at = self.body_index(span.end_line).ok_or(EditError::NodeNotFound)?;
            let at = at.max(node.last_body_line);
            body.insert(at + 1, format!("{}sorry", " ".repeat(node.indent)));
        }
        self.with_body(body)
    }

    /// Close whatever a block leaves open by adding `sorry` as its last
    /// step: a new line after the last child, or `; sorry` when the block
    /// has no body lines of its own (`have h : T := by simp`, `· simp`).
    pub fn append_sorry(&self, id: NodeId) -> Result<Self, EditError> {
        let node = self.node(id).ok_or(EditError::NodeNotFound)?;
        let mut body = self.body.clone();
        match node.children.last() {
            Some(last) if last.first_body_line > 0 => {
                let at = self.keep_eof(last.first_body_line, last.last_body_line);
                body.insert(at + 1, format!("{}sorry", " ".repeat(last.indent)));
            }
            Some(last) => {
                let line = &mut body[last.first_body_line];
                let end = code_end_byte(line);
                line.insert_str(end, "; sorry");
            }
            None if node.kind == BlockKind::Root => {
                body[0].push_str(" sorry");
            }
            None => {
                let line = &mut body[node.first_body_line];
                let end = code_end_byte(line);
                line.insert_str(end, "; sorry");
            }
        }
        self.with_body(body)
    }

    /// Replace the `sorry` token at `(line, col)` with `replacement`
    /// (single-line text).
    pub fn replace_sorry_at(&self, line: usize, col: usize, replacement: &str) -> Result<Self, EditError> {
        if !self.sorry_positions().contains(&(line, col)) {
            return Err(EditError::NodeNotFound);
        }
        let i = self.body_index(line).ok_or(EditError::NodeNotFound)?;
        let col = if i == 0 { col - self.by_end_col } else { col };
        let mut body = self.body.clone();
        let text = &body[i];
        let start = lex::byte_of_col(text, col);
        let end = start + "sorry".len();
        body[i] = format!("{}{}{}", &text[..start], replacement, &text[end..]);
        self.with_body(body)
    }

    /// Replace body lines `first..=last` (file line numbers) wholesale.
    pub(crate) fn splice_lines(&self, first: usize, last: usize, lines: Vec<String>) -> Result<Self, EditError> {
        let a = self.body_index(first).ok_or(EditError::NodeNotFound)?;
        let b = self.body_index(last).ok_or(EditError::NodeNotFound)?;
        let mut body = self.body.clone();
        body.splice(a..=b, lines);
        self.with_body(body)
    }

    /// Text with `preamble` prepended to the lines before the declaration,
    /// re-parsed. Used for standalone lemma insertion.
    pub(crate) fn with_extra_preamble(&self, extra: &str) -> Result<Self, EditError> {
        let kw = self.statement.header.len();
        let mut text = String::with_capacity(self.raw_text.len() + extra.len());
        text.push_str(&self.raw_text[..kw]);
        text.push_str(extra);
        text.push_str(&self.raw_text[kw..]);
        Self::parse_named(&text, Some(&self.statement.name), self.statement.informal_prefix.clone())
            .map_err(EditError::Reparse)
    }
}

/// `sorry`/`admit` token positions in arbitrary text (1-based lines).
pub fn sorry_positions(text: &str) -> Vec<(usize, usize)> {
    let masked = match lex::mask(text) {
        Ok(m) => m,
        Err(_) => return Vec::new(),
    };
    masked
        .split('\n')
        .enumerate()
        .flat_map(|(i, l)| lex::sorry_columns(l).into_iter().map(move |c| (i + 1, c)))
        .collect()
}

/// Count `sorry`/`admit` tokens outside comments and strings.
pub fn count_sorries(text: &str) -> usize {
    sorry_positions(text).len()
}

/// Byte index just past the last code char of a line (comments excluded).
fn code_end_byte(line: &str) -> usize {
    let masked = lex::mask(line).unwrap_or_else(|_| line.to_string());
    let n = masked.trim_end().chars().count();
    lex::byte_of_col(line, n)
}

/// First top-level `:=` in a run of lines: (line offset, char column).
fn find_assign(lines: &[String]) -> Option<(usize, usize)> {
    let joined = lines.join("\n");
    let masked = lex::mask(&joined).ok()?;
    let mut depth = 0i32;
    for (li, line) in masked.split('\n').enumerate() {
        let chars: Vec<char> = line.chars().collect();
        for c in 0..chars.len() {
            match chars[c] {
                '(' | '[' | '{' | '⟨' => depth += 1,
                ')' | ']' | '}' | '⟩' => depth -= 1,
                ':' if depth == 0 && chars.get(c + 1) == Some(&'=') => return Some((li, c)),
                _ => {}
            }
        }
    }
    None
}

fn build_tree(body: &[String], by_line: usize, by_end_col: usize) -> Result<ProofBlock, ParseError> {
    let joined = body.join("\n");
    let masked_all = lex::mask(&joined).map_err(|e| match e {
        ParseError::UnterminatedComment { line } => ParseError::UnterminatedComment { line: line + by_line - 1 },
        ParseError::UnterminatedString { line } => ParseError::UnterminatedString { line: line + by_line - 1 },
        other => other,
    })?;
    let masked: Vec<&str> = masked_all.split('\n').collect();

    let mut drafts: Vec<Draft> = vec![Draft { indent: 0, first: 0, own_last: 0, children: Vec::new() }];
    let mut stack: Vec<usize> = vec![0];
    let mut last_created = 0usize;
    for (i, m) in masked.iter().enumerate() {
        let code = m.trim_start();
        if code.is_empty() {
            drafts[last_created].own_last = i;
            continue;
        }
        let lead = &body[i][..body[i].len() - body[i].trim_start().len()];
        if lead.contains('\t') {
            return Err(ParseError::TabIndent { line: by_line + i });
        }
        let indent = lead.chars().count() + if i == 0 { by_end_col } else { 0 };
        while stack.len() > 1 && drafts[*stack.last().unwrap()].indent >= indent {
            stack.pop();
        }
        let parent = *stack.last().unwrap();
        drafts.push(Draft { indent, first: i, own_last: i, children: Vec::new() });
        let idx = drafts.len() - 1;
        drafts[parent].children.push(idx);
        stack.push(idx);
        last_created = idx;
    }

    let mut next_id = 0;
    Ok(finish(0, &drafts, body, &masked, by_line, by_end_col, &mut next_id).0)
}

fn finish(
    idx: usize,
    drafts: &[Draft],
    body: &[String],
    masked: &[&str],
    by_line: usize,
    by_end_col: usize,
    next_id: &mut usize,
) -> (ProofBlock, usize) {
    let d = &drafts[idx];
    let id = *next_id;
    *next_id += 1;
    let mut children = Vec::new();
    let mut last = d.own_last;
    for &c in &d.children {
        let (child, child_last) = finish(c, drafts, body, masked, by_line, by_end_col, next_id);
        last = last.max(child_last);
        children.push(child);
    }
    let col_of = |i: usize, c: usize| if i == 0 { c + by_end_col } else { c };
    let block = if idx == 0 {
        let last = body.len() - 1;
        let own_end = d.children.first().map(|&c| drafts[c].first).unwrap_or(body.len());
        ProofBlock {
            id,
            kind: BlockKind::Root,
            indent: 0,
            span: SourceSpan::new(by_line, by_end_col, by_line + last, col_of(last, body[last].chars().count())),
            lines: body[..own_end].to_vec(),
            children,
            first_body_line: 0,
            last_body_line: last,
        }
    } else {
        ProofBlock {
            id,
            kind: classify_header(masked[d.first], !children.is_empty()),
            indent: d.indent,
            span: SourceSpan::new(by_line + d.first, d.indent, by_line + last, col_of(last, body[last].chars().count())),
            lines: body[d.first..=d.own_last].to_vec(),
            children,
            first_body_line: d.first,
            last_body_line: last,
        }
    };
    (block, last)
}
