use serde::{Deserialize, Serialize};

use super::lex::{self, is_ident_char};
use super::ParseError;

/// A theorem statement as handed to the prover: the file header, an
/// optional informal comment, and the text from the `theorem`/`lemma`
/// keyword through the `:= by` that opens the tactic proof.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremStatement {
    pub name: String,
    pub header: String,
    pub statement_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub informal_prefix: Option<String>,
}

/// Where a declaration sits inside a source text. Lines are 0-based
/// indices into the text's lines, columns are char columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct DeclLocation {
    pub name: String,
    pub keyword: (usize, usize),
    /// Position just past the `by` token.
    pub by_end: (usize, usize),
}

const DECL_KEYWORDS: [&str; 2] = ["theorem", "lemma"];

impl TheoremStatement {
    /// Build a statement from an already formatted `statement_text`
    /// (e.g. a dataset record), validating its shape.
    pub fn new(
        header: impl Into<String>,
        statement_text: impl Into<String>,
        informal_prefix: Option<String>,
    ) -> Result<Self, ParseError> {
        let statement_text = statement_text.into();
        let loc = locate_decl(&statement_text, None)?;
        let lines: Vec<&str> = statement_text.split('\n').collect();
        let end = offset_of(&lines, loc.by_end);
        let start = offset_of(&lines, loc.keyword);
        Ok(TheoremStatement {
            name: loc.name,
            header: header.into(),
            statement_text: statement_text[start..end].to_string(),
            informal_prefix: informal_prefix.filter(|p| !p.trim().is_empty()),
        })
    }

    /// Header plus informal prefix plus statement, ready to receive a body.
    pub fn render(&self) -> String {
        let mut out = String::new();
        push_block(&mut out, &self.header);
        if let Some(prefix) = &self.informal_prefix {
            push_block(&mut out, prefix);
        }
        out.push_str(&self.statement_text);
        out
    }

    /// The statement followed by a bare `sorry` body.
    pub fn with_sorry_body(&self) -> String {
        format!("{}\n  sorry\n", self.render())
    }

    /// Whitespace-insensitive comparison key for the statement text.
    pub fn normalized_text(&self) -> String {
        normalize_ws(&self.statement_text)
    }

    /// Number of `:=` tokens outside brackets, comments and strings.
    pub fn top_level_assignments(&self) -> usize {
        let masked = match lex::mask(&self.statement_text) {
            Ok(m) => m,
            Err(_) => return 0,
        };
        let chars: Vec<char> = masked.chars().collect();
        let mut depth = 0i32;
        let mut count = 0;
        for i in 0..chars.len() {
            match chars[i] {
                '(' | '[' | '{' | '⟨' => depth += 1,
                ')' | ']' | '}' | '⟩' => depth -= 1,
                ':' if depth == 0 && chars.get(i + 1) == Some(&'=') => count += 1,
                _ => {}
            }
        }
        count
    }
}

fn push_block(out: &mut String, text: &str) {
    if text.is_empty() {
        return;
    }
    out.push_str(text);
    if !text.ends_with('\n') {
        out.push('\n');
    }
}

pub fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub(crate) fn offset_of(lines: &[&str], (line, col): (usize, usize)) -> usize {
    let mut off = 0;
    for l in &lines[..line] {
        off += l.len() + 1;
    }
    off + lex::byte_of_col(lines[line], col)
}

pub(crate) fn is_valid_ident(name: &str) -> bool {
    !name.is_empty()
        && !name.chars().next().unwrap().is_numeric()
        && name.chars().all(|c| is_ident_char(c) || c == '«' || c == '»')
}

/// Find the declaration named `name` (or the last declaration when `name`
/// is `None` or absent) and the `:= by` that opens its proof.
pub(crate) fn locate_decl(text: &str, name: Option<&str>) -> Result<DeclLocation, ParseError> {
    let masked = lex::mask(text)?;
    let lines: Vec<Vec<char>> = masked.split('\n').map(|l| l.chars().collect()).collect();

    let mut candidates = Vec::new();
    for (li, line) in lines.iter().enumerate() {
        let s: String = line.iter().collect();
        for kw in DECL_KEYWORDS {
            for col in lex::find_word(&s, kw) {
                if let Some((decl_name, after)) = read_name(&lines, li, col + kw.chars().count()) {
                    candidates.push((decl_name, (li, col), after));
                }
            }
        }
    }
    candidates.sort_by_key(|c| c.1);
    let chosen = match name {
        Some(n) => candidates
            .iter()
            .find(|c| c.0 == n)
            .or_else(|| candidates.last()),
        None => candidates.last(),
    }
    .ok_or(ParseError::NoProofBody)?
    .clone();

    let (decl_name, keyword, after_name) = chosen;
    let assign = find_top_level_assign(&lines, after_name).ok_or(ParseError::NoProofBody)?;
    let by_start = skip_ws(&lines, (assign.0, assign.1 + 2)).ok_or(ParseError::NoProofBody)?;
    let line = &lines[by_start.0];
    let is_by = line.get(by_start.1) == Some(&'b')
        && line.get(by_start.1 + 1) == Some(&'y')
        && line.get(by_start.1 + 2).map_or(true, |c| !is_ident_char(*c));
    if !is_by {
        return Err(ParseError::NoProofBody);
    }
    Ok(DeclLocation {
        name: decl_name,
        keyword,
        by_end: (by_start.0, by_start.1 + 2),
    })
}

fn read_name(lines: &[Vec<char>], li: usize, col: usize) -> Option<(String, (usize, usize))> {
    let (l, mut c) = skip_ws(lines, (li, col))?;
    let line = &lines[l];
    let start = c;
    while c < line.len() && (is_ident_char(line[c]) || line[c] == '«' || line[c] == '»') {
        c += 1;
    }
    if c == start {
        return None;
    }
    Some((line[start..c].iter().collect(), (l, c)))
}

fn skip_ws(lines: &[Vec<char>], (mut l, mut c): (usize, usize)) -> Option<(usize, usize)> {
    while l < lines.len() {
        while c < lines[l].len() {
            if !lines[l][c].is_whitespace() {
                return Some((l, c));
            }
            c += 1;
        }
        l += 1;
        c = 0;
    }
    None
}

fn find_top_level_assign(lines: &[Vec<char>], (mut l, mut c): (usize, usize)) -> Option<(usize, usize)> {
    let mut depth = 0i32;
    while l < lines.len() {
        let line = &lines[l];
        while c < line.len() {
            match line[c] {
                '(' | '[' | '{' | '⟨' => depth += 1,
                ')' | ']' | '}' | '⟩' => depth -= 1,
                ':' if depth == 0 && line.get(c + 1) == Some(&'=') => return Some((l, c)),
                _ => {}
            }
            c += 1;
        }
        l += 1;
        c = 0;
    }
    None
}
