//! Character-level helpers: comment masking, tokens, bracket-aware splits.

/// Replace comment characters by spaces (newlines kept). Returns `None`
/// on an unterminated block comment.
pub fn mask_comments(text: &str) -> Option<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = chars.clone();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '"' {
            i += 1;
            while i < chars.len() && chars[i] != '"' {
                if chars[i] == '\\' {
                    i += 1;
                }
                i += 1;
            }
            i += 1;
            continue;
        }
        if chars[i] == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                out[i] = ' ';
                i += 1;
            }
            continue;
        }
        if chars[i] == '/' && chars.get(i + 1) == Some(&'-') {
            let mut depth = 0;
            loop {
                if i >= chars.len() {
                    return None;
                }
                if chars[i] == '/' && chars.get(i + 1) == Some(&'-') {
                    depth += 1;
                    out[i] = ' ';
                    out[i + 1] = ' ';
                    i += 2;
                } else if chars[i] == '-' && chars.get(i + 1) == Some(&'/') {
                    depth -= 1;
                    out[i] = ' ';
                    out[i + 1] = ' ';
                    i += 2;
                    if depth == 0 {
                        break;
                    }
                } else {
                    if chars[i] != '\n' {
                        out[i] = ' ';
                    }
                    i += 1;
                }
            }
            continue;
        }
        i += 1;
    }
    Some(out.into_iter().collect())
}

pub fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

pub fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '\'' | '.' | '!' | '?') || ('₀'..='₉').contains(&c)
}

/// Identifier tokens with their char offsets.
pub fn idents(text: &str) -> Vec<(usize, String)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if is_ident_start(chars[i]) && (i == 0 || !is_ident_char(chars[i - 1])) {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            let mut tok: String = chars[start..i].iter().collect();
            while tok.ends_with('.') {
                tok.pop();
            }
            out.push((start, tok));
        } else {
            i += 1;
        }
    }
    out
}

/// A short variable-like identifier: one Latin letter plus optional
/// digits, subscripts or primes.
pub fn is_variable_like(tok: &str) -> bool {
    let mut cs = tok.chars();
    match cs.next() {
        Some(c) if c.is_ascii_lowercase() => cs.all(|c| c.is_ascii_digit() || c == '\'' || ('₀'..='₉').contains(&c)),
        _ => false,
    }
}

fn opens(c: char) -> bool {
    matches!(c, '(' | '[' | '{' | '⟨')
}

fn closes(c: char) -> bool {
    matches!(c, ')' | ']' | '}' | '⟩')
}

/// Char offset of the first top-level occurrence of `pat`.
pub fn find_top(text: &str, pat: &str) -> Option<usize> {
    let chars: Vec<char> = text.chars().collect();
    let p: Vec<char> = pat.chars().collect();
    let mut depth = 0i32;
    for i in 0..chars.len() {
        if depth == 0 && chars[i..].starts_with(&p) {
            return Some(i);
        }
        if opens(chars[i]) {
            depth += 1;
        } else if closes(chars[i]) {
            depth -= 1;
        }
    }
    None
}

/// Split a tactic line on `;` that is not part of `<;>`.
pub fn split_semicolons(text: &str) -> Vec<(usize, String)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for i in 0..chars.len() {
        let c = chars[i];
        if opens(c) {
            depth += 1;
        } else if closes(c) {
            depth -= 1;
        } else if c == ';' && depth == 0 && !(i > 0 && chars[i - 1] == '<' && chars.get(i + 1) == Some(&'>')) {
            out.push((start, chars[start..i].iter().collect()));
            start = i + 1;
        }
    }
    out.push((start, chars[start..].iter().collect()));
    out
}

/// Whether `text` has unbalanced open brackets at its end.
pub fn unbalanced(text: &str) -> bool {
    let mut depth = 0i32;
    for c in text.chars() {
        if opens(c) {
            depth += 1;
        } else if closes(c) {
            depth -= 1;
        }
    }
    depth > 0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks_nested_comments() {
        assert_eq!(mask_comments("a /- b /- c -/ -/ d -- e\nf").unwrap(), "a                 d     \nf");
        assert!(mask_comments("/- open").is_none());
    }

    #[test]
    fn semicolons_vs_combinator() {
        let parts = split_semicolons("norm_num <;> simp; sorry");
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[1].1.trim(), "sorry");
    }

    #[test]
    fn variable_like_tokens() {
        assert!(is_variable_like("x"));
        assert!(is_variable_like("x₁"));
        assert!(!is_variable_like("hx"));
        assert!(!is_variable_like("X"));
        let ids: Vec<String> = idents("Real.sqrt (x * y) = h₀.1").into_iter().map(|t| t.1).collect();
        assert_eq!(ids, vec!["Real.sqrt", "x", "y", "h₀.1"]);
    }
}
