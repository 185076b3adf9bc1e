//! Comment and string-literal masking for Lean source.
//!
//! Every structural decision in this crate (keywords, `sorry` tokens,
//! bracket depth) is made on a masked copy of the text in which comment
//! and string characters are replaced by spaces. Masking is char-for-char,
//! so char columns in the masked text line up with the original.

use super::ParseError;

/// What a character of the source belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Code,
    Comment,
    Str,
}

/// Classify every char of `text`. The returned vector has one entry per
/// `char` (not per byte).
pub fn classify(text: &str) -> Result<Vec<Region>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = vec![Region::Code; chars.len()];
    let mut line = 1usize;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                out[i] = Region::Comment;
                i += 1;
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'-') {
            let start_line = line;
            let mut depth = 0usize;
            loop {
                if i >= chars.len() {
                    return Err(ParseError::UnterminatedComment { line: start_line });
                }
                if chars[i] == '/' && chars.get(i + 1) == Some(&'-') {
                    depth += 1;
                    out[i] = Region::Comment;
                    out[i + 1] = Region::Comment;
                    i += 2;
                    continue;
                }
                if chars[i] == '-' && chars.get(i + 1) == Some(&'/') {
                    depth -= 1;
                    out[i] = Region::Comment;
                    out[i + 1] = Region::Comment;
                    i += 2;
                    if depth == 0 {
                        break;
                    }
                    continue;
                }
                if chars[i] == '\n' {
                    line += 1;
                }
                out[i] = Region::Comment;
                i += 1;
            }
            continue;
        }
        if c == '"' {
            let start_line = line;
            out[i] = Region::Str;
            i += 1;
            loop {
                if i >= chars.len() {
                    return Err(ParseError::UnterminatedString { line: start_line });
                }
                out[i] = Region::Str;
                match chars[i] {
                    '\\' => {
                        if i + 1 < chars.len() {
                            out[i + 1] = Region::Str;
                            if chars[i + 1] == '\n' {
                                line += 1;
                            }
                        }
                        i += 2;
                    }
                    '"' => {
                        i += 1;
                        break;
                    }
                    '\n' => {
                        line += 1;
                        i += 1;
                    }
                    _ => i += 1,
                }
            }
            continue;
        }
        if c == '\n' {
            line += 1;
        }
        i += 1;
    }
    Ok(out)
}

/// Masked copy of `text`: comment and string chars become spaces, newlines
/// are always kept so line structure survives.
pub fn mask(text: &str) -> Result<String, ParseError> {
    let regions = classify(text)?;
    Ok(text
        .chars()
        .zip(regions)
        .map(|(c, r)| match (c, r) {
            ('\n', _) => '\n',
            (c, Region::Code) => c,
            _ => ' ',
        })
        .collect())
}

/// Chars that may appear inside a Lean identifier (including the
/// namespace dot and the trailing `!`/`?` of tactic names).
pub fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '\'' | '.' | '!' | '?')
}

/// Char columns of every standalone occurrence of `word` in an already
/// masked line. A match must not be glued to identifier chars on either
/// side.
pub fn find_word(masked_line: &str, word: &str) -> Vec<usize> {
    let chars: Vec<char> = masked_line.chars().collect();
    let w: Vec<char> = word.chars().collect();
    let mut hits = Vec::new();
    if w.is_empty() || chars.len() < w.len() {
        return hits;
    }
    for start in 0..=chars.len() - w.len() {
        if chars[start..start + w.len()] != w[..] {
            continue;
        }
        if start > 0 && is_ident_char(chars[start - 1]) {
            continue;
        }
        if let Some(&next) = chars.get(start + w.len()) {
            if is_ident_char(next) {
                continue;
            }
        }
        hits.push(start);
    }
    hits
}

/// Columns of `sorry`/`admit` tokens in a masked line.
pub fn sorry_columns(masked_line: &str) -> Vec<usize> {
    let mut cols = find_word(masked_line, "sorry");
    cols.extend(find_word(masked_line, "admit"));
    cols.sort_unstable();
    cols
}

/// Byte offset of char column `col` in `line` (clamped to the line end).
pub fn byte_of_col(line: &str, col: usize) -> usize {
    line.char_indices().nth(col).map(|(b, _)| b).unwrap_or(line.len())
}
