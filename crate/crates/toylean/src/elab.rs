//! Command and tactic elaboration over goals represented as text.

use crate::expr::Relation;
use crate::text::{self, find_top, idents, is_variable_like, normalize, split_semicolons};
use crate::world::{Effect, HintEntry, World};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Msg {
    pub severity: &'static str,
    pub pos: (usize, usize),
    pub end: (usize, usize),
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SorryRec {
    pub pos: (usize, usize),
    pub end: (usize, usize),
    pub goal: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Hyp {
    name: String,
    ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Goal {
    hyps: Vec<Hyp>,
    target: String,
    tag: Option<String>,
}

impl Goal {
    fn render(&self) -> String {
        let mut out = String::new();
        if let Some(tag) = &self.tag {
            out.push_str(&format!("case {tag}\n"));
        }
        let mut i = 0;
        while i < self.hyps.len() {
            let ty = &self.hyps[i].ty;
            let mut names = vec![self.hyps[i].name.as_str()];
            let mut j = i + 1;
            while j < self.hyps.len() && &self.hyps[j].ty == ty {
                names.push(&self.hyps[j].name);
                j += 1;
            }
            out.push_str(&format!("{} : {}\n", names.join(" "), ty));
            i = j;
        }
        out.push_str(&format!("⊢ {}", self.target));
        out
    }

    fn names(&self) -> Vec<&str> {
        self.hyps.iter().map(|h| h.name.as_str()).collect()
    }

    fn with_target(&self, target: impl Into<String>) -> Goal {
        Goal { hyps: self.hyps.clone(), target: normalize(&target.into()), tag: self.tag.clone() }
    }

    fn push_hyp(&mut self, name: &str, ty: &str) {
        for h in &mut self.hyps {
            if h.name == name {
                h.name.push('✝');
            }
        }
        self.hyps.push(Hyp { name: name.to_string(), ty: normalize(ty) });
    }
}

#[derive(Debug, Clone)]
struct CodeLine {
    line: usize,
    col: usize,
    text: String,
}

#[derive(Debug, Clone)]
struct Item {
    head: CodeLine,
    sub: Vec<CodeLine>,
}

const TACTICS: &[&str] = &[
    "sorry", "admit", "have", "haveI", "obtain", "suffices", "show", "intro", "intros", "rintro", "constructor",
    "exact", "apply", "refine", "refine'", "use", "exists", "linarith", "nlinarith", "norm_num", "simp", "simp_all",
    "ring", "ring_nf", "field_simp", "positivity", "omega", "norm_cast", "push_cast", "decide", "rfl", "trivial",
    "assumption", "rw", "rwa", "rewrite", "nth_rewrite", "nth_rw", "calc", "cases", "rcases", "induction", "by_contra",
    "by_cases", "contrapose", "contrapose!", "push_neg", "exfalso", "left", "right", "specialize", "unfold", "subst",
    "hint", "aesop", "tauto", "gcongr", "bound", "interval_cases", "norm_num1", "simp_arith", "try", "first",
    "all_goals", "any_goals", "repeat", "case", "next", "focus", "split_ifs", "congr", "ext", "funext", "fin_cases",
    "exact_mod_cast", "linear_combination", "polyrith", "set", "let", "change", "clear", "symm", "exact?", "apply?",
    "simp?", "field_simp?", "native_decide", "abel", "group", "noncomm_ring", "mono", "continuity", "split",
];

const CLOSERS: &[&str] = &[
    "linarith", "nlinarith", "norm_num", "simp", "simp_all", "ring", "ring_nf", "field_simp", "positivity", "omega",
    "norm_cast", "decide", "rfl", "trivial", "assumption", "aesop", "tauto", "exact_mod_cast", "linear_combination",
    "norm_num1", "simp_arith", "native_decide", "polyrith", "bound",
];

const LEMMAS: &[&str] = &[
    "sq_nonneg", "sq_abs", "abs_nonneg", "mul_pos", "mul_nonneg", "add_pos", "add_nonneg", "pow_pos", "pow_nonneg",
    "pow_two", "mul_self_nonneg", "mul_comm", "mul_assoc", "add_comm", "add_assoc", "two_mul", "add_sq", "sub_sq",
    "sub_nonneg", "sub_pos", "div_pos", "sq_sqrt", "sqrt_nonneg", "le_refl", "le_of_lt", "lt_of_le_of_lt",
    "add_pow_two", "mul_self_abs", "abs_mul_abs_self", "neg_nonpos", "div_add_div", "mul_div_cancel_left₀",
    "sq_eq_sq'", "pow_le_pow_left", "mul_lt_mul", "abs_sub_comm", "ne_of_gt", "ne_of_lt", "le_antisymm",
    "norm_num", "ring_nf", "simp_all", "field_simp", "norm_cast", "push_cast", "exact_mod_cast", "nth_rewrite",
    "mul_one", "one_mul", "add_zero", "zero_add", "sub_self", "mul_zero", "zero_mul", "div_self", "sq",
];

const KEYWORDS: &[&str] = &[
    "at", "with", "only", "using", "fun", "by", "in", "if", "then", "else", "this", "from", "generalizing", "with",
];

pub struct Elab<'w> {
    world: &'w World,
    pub msgs: Vec<Msg>,
    pub sorries: Vec<SorryRec>,
    decls: Vec<String>,
    used_sorry: bool,
    /// Column of a parse error that cut the current body short, and the
    /// last line that survived the cut.
    truncation: Option<(usize, usize)>,
}

const COMMANDS: &[&str] = &[
    "theorem", "lemma", "example", "def", "abbrev", "instance", "import", "open", "set_option", "namespace",
    "section", "end", "noncomputable", "variable", "universe", "attribute", "axiom", "private", "protected",
    "macro", "syntax", "#eval", "#check", "#print",
];

fn first_word(text: &str) -> &str {
    let t = text.trim_start();
    let end = t
        .char_indices()
        .find(|(_, c)| !(text::is_ident_char(*c) || *c == '#'))
        .map(|(i, _)| i)
        .unwrap_or(t.len());
    &t[..end]
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

fn char_slice(s: &str, from: usize) -> String {
    s.chars().skip(from).collect()
}

fn leading(s: &str) -> usize {
    s.chars().take_while(|c| *c == ' ').count()
}

impl<'w> Elab<'w> {
    pub fn new(world: &'w World) -> Self {
        Elab { world, msgs: Vec::new(), sorries: Vec::new(), decls: Vec::new(), used_sorry: false, truncation: None }
    }

    fn error(&mut self, pos: (usize, usize), end: (usize, usize), data: impl Into<String>) {
        self.msgs.push(Msg { severity: "error", pos, end, data: data.into() });
    }

    /// Elaborate every command of `masked` (comments already blanked,
    /// import lines blanked by the caller).
    pub fn run(&mut self, masked: &str) {
        let lines: Vec<&str> = masked.split('\n').collect();
        let mut starts = Vec::new();
        for (i, l) in lines.iter().enumerate() {
            if l.starts_with(|c: char| !c.is_whitespace()) {
                let w = first_word(l);
                if COMMANDS.contains(&w) || l.starts_with("@[") {
                    starts.push(i);
                } else if starts.is_empty() {
                    self.error((i + 1, 0), (i + 1, char_len(l)), "unexpected identifier; expected command");
                }
            }
        }
        // names first, so `exact foo_sub1 ...` can see lemmas declared in the same file
        for &s in &starts {
            let w = first_word(lines[s]);
            if matches!(w, "theorem" | "lemma" | "def" | "abbrev") {
                let rest = char_slice(lines[s], char_len(w));
                if let Some((_, name)) = idents(&rest).first() {
                    self.decls.push(name.clone());
                }
            }
        }
        for (k, &s) in starts.iter().enumerate() {
            let e = starts.get(k + 1).copied().unwrap_or(lines.len());
            let w = first_word(lines[s]);
            if matches!(w, "theorem" | "lemma" | "example") {
                self.decl(&lines, s, e);
            }
        }
    }

    fn decl(&mut self, lines: &[&str], start: usize, end: usize) {
        // flatten the region with positions
        let mut chars: Vec<(char, usize, usize)> = Vec::new();
        for (i, l) in lines[start..end].iter().enumerate() {
            for (c, ch) in l.chars().enumerate() {
                chars.push((ch, start + i + 1, c));
            }
            chars.push(('\n', start + i + 1, char_len(l)));
        }
        let flat: String = chars.iter().map(|c| c.0).collect();
        let pos_of = |i: usize| chars.get(i).map(|c| (c.1, c.2)).unwrap_or((end, 0));
        self.used_sorry = false;
        self.truncation = None;

        let kw = first_word(lines[start]);
        let after_kw = char_len(kw);
        let (_name, name_span, sig_start) = if kw == "example" {
            ("_example".to_string(), (pos_of(0), pos_of(after_kw)), after_kw)
        } else {
            match idents(&char_slice(&flat, after_kw)).first() {
                Some((off, n)) => {
                    let s = after_kw + off;
                    (n.clone(), (pos_of(s), pos_of(s + char_len(n))), s + char_len(n))
                }
                None => {
                    self.error(pos_of(after_kw), pos_of(after_kw), "expected identifier");
                    return;
                }
            }
        };
        let sig_rest = char_slice(&flat, sig_start);
        let Some(assign_rel) = find_top(&sig_rest, ":=") else {
            let words = idents(&sig_rest);
            match words.iter().find(|(_, w)| w == "from") {
                Some((off, _)) => {
                    let p = pos_of(sig_start + off);
                    self.error(p, (p.0, p.1 + 4), "unexpected token 'from'; expected ':=', 'where' or '|'");
                }
                None => {
                    let p = pos_of(chars.len().saturating_sub(1));
                    self.error(p, p, "unexpected end of input; expected ':=', 'where' or '|'");
                }
            }
            return;
        };
        let signature: String = sig_rest.chars().take(assign_rel).collect();
        let Some(colon) = top_colon(&signature) else {
            let p = pos_of(sig_start + assign_rel);
            self.error(p, p, "unexpected token ':='; expected ':'");
            return;
        };
        // binders
        let binders: String = signature.chars().take(colon).collect();
        let mut goal = Goal { hyps: Vec::new(), target: String::new(), tag: None };
        for (off, names, ty) in binder_groups(&binders) {
            if let Some((voff, v)) = free_variable(&ty.1, &goal.names()) {
                let p = pos_of(sig_start + off + ty.0 + voff);
                self.error(p, (p.0, p.1 + char_len(&v)), format!("unknown identifier '{v}'"));
                return;
            }
            for n in names {
                goal.push_hyp(&n, &ty.1);
            }
        }
        let target: String = signature.chars().skip(colon + 1).collect();
        if let Some((voff, v)) = free_variable(&target, &goal.names()) {
            let p = pos_of(sig_start + colon + 1 + voff);
            self.error(p, (p.0, p.1 + char_len(&v)), format!("unknown identifier '{v}'"));
            return;
        }
        goal.target = normalize(&target);

        // value
        let value_start = sig_start + assign_rel + 2;
        let value: String = char_slice(&flat, value_start);
        let lead = value.chars().take_while(|c| c.is_whitespace()).count();
        let v = char_slice(&value, lead);
        let by_idx = value_start + lead;
        if first_word(&v) == "by" {
            let (by_line, by_col) = pos_of(by_idx);
            let mut body = Vec::new();
            let first_rest = char_slice(lines[by_line - 1], by_col + 2);
            if !first_rest.trim().is_empty() {
                let l = leading(&first_rest);
                body.push(CodeLine { line: by_line, col: by_col + 2 + l, text: first_rest.trim().to_string() });
            }
            for li in by_line..end {
                let t = lines[li];
                if !t.trim().is_empty() {
                    body.push(CodeLine { line: li + 1, col: leading(t), text: t.trim().to_string() });
                }
            }
            let body = self.truncate_at_parse_error(body, (by_line, by_col + 2));
            let end_pos = body.last().map(|l| (l.line, l.col + char_len(&l.text))).unwrap_or((by_line, by_col + 2));
            self.run_by(&body, goal, (by_line, by_col), end_pos);
        } else if v.trim().is_empty() {
            let p = pos_of(by_idx.min(chars.len().saturating_sub(1)));
            self.error(p, p, "unexpected end of input; expected term");
        } else {
            let term = normalize(&v);
            let head = first_word(&term);
            if !head.is_empty() && !self.known_head(head, &goal) {
                let p = pos_of(by_idx);
                self.error(p, (p.0, p.1 + char_len(head)), format!("unknown identifier '{head}'"));
            } else if let Err((off, m)) = self.check_term(&term, &goal) {
                let p = pos_of(by_idx + off);
                self.error(p, p, m);
            } else if let Some(off) = sorry_offset(&v) {
                let p = pos_of(by_idx + off);
                self.record_sorry(p, &goal);
            }
        }
        if self.used_sorry {
            self.msgs.push(Msg {
                severity: "warning",
                pos: name_span.0,
                end: name_span.1,
                data: "declaration uses 'sorry'".into(),
            });
        }
    }

    fn record_sorry(&mut self, pos: (usize, usize), goal: &Goal) {
        self.used_sorry = true;
        self.sorries.push(SorryRec { pos, end: (pos.0, pos.1 + 5), goal: goal.render() });
    }

    // ---- parsing of tactic blocks ----

    fn truncate_at_parse_error(&mut self, body: Vec<CodeLine>, by_end: (usize, usize)) -> Vec<CodeLine> {
        if body.is_empty() {
            self.error(by_end, by_end, "unexpected end of input; expected '{' or tactic");
            self.truncation = Some((0, by_end.0));
            return body;
        }
        let items = parse_items(&body);
        let mut found = None;
        check_items(&items, body[0].col, &mut found);
        let Some((line, col, msg)) = found else {
            return body;
        };
        let err_line = body.iter().find(|l| l.line == line);
        let end = (line, err_line.map(|l| l.col + char_len(&l.text)).unwrap_or(col));
        let err_col = err_line.map(|l| l.col).unwrap_or(col);
        self.error((line, col), end, msg);
        let kept: Vec<CodeLine> = body.into_iter().filter(|l| l.line < line).collect();
        self.truncation = Some((err_col, kept.last().map(|l| l.line).unwrap_or(0)));
        kept
    }

    fn run_by(&mut self, lines: &[CodeLine], goal: Goal, pos: (usize, usize), end: (usize, usize)) {
        if lines.is_empty() {
            return;
        }
        let items = parse_items(lines);
        let block_col = lines[0].col;
        let last_line = lines.last().map(|l| l.line).unwrap_or(0);
        if let Ok(rest) = self.run_seq(&items, vec![goal]) {
            let cut = matches!(self.truncation, Some((ecol, kept)) if block_col <= ecol && last_line == kept);
            if !rest.is_empty() && !cut {
                let data = format!(
                    "unsolved goals\n{}",
                    rest.iter().map(Goal::render).collect::<Vec<_>>().join("\n\n")
                );
                self.error(pos, end, data);
            }
        }
    }

    fn run_seq(&mut self, items: &[Item], mut goals: Vec<Goal>) -> Result<Vec<Goal>, ()> {
        for item in items {
            let pieces = split_semicolons(&item.head.text);
            let n = pieces.len();
            for (i, (off, piece)) in pieces.into_iter().enumerate() {
                let col = item.head.col + off + leading(&piece);
                let sub: &[CodeLine] = if i + 1 == n { &item.sub } else { &[] };
                goals = self.run_piece(piece.trim(), item.head.line, col, sub, goals)?;
            }
        }
        Ok(goals)
    }

    fn run_piece(
        &mut self,
        text: &str,
        line: usize,
        col: usize,
        sub: &[CodeLine],
        mut goals: Vec<Goal>,
    ) -> Result<Vec<Goal>, ()> {
        if text.is_empty() {
            return Ok(goals);
        }
        let pos = (line, col);
        let end = sub.last().map(|l| (l.line, l.col + char_len(&l.text))).unwrap_or((line, col + char_len(text)));
        if goals.is_empty() {
            self.error(pos, end, "no goals to be solved");
            return Err(());
        }
        let word = first_word(text);
        if text.starts_with('·') || text.starts_with(". ") || word == "next" || word == "case" {
            let (inline_off, tag) = if word == "case" || word == "next" {
                match text.find("=>") {
                    Some(b) => {
                        let tag = text[word.len()..b].split_whitespace().next().map(str::to_string);
                        (char_len(&text[..b + 2]), if word == "case" { tag } else { None })
                    }
                    None => (char_len(text), None),
                }
            } else {
                (1, None)
            };
            let idx = match &tag {
                Some(t) => match goals.iter().position(|g| g.tag.as_deref() == Some(t.as_str())) {
                    Some(i) => i,
                    None => {
                        self.error(pos, end, format!("Case tag '{t}' not found."));
                        return Err(());
                    }
                },
                None => 0,
            };
            let goal = goals.remove(idx);
            let rest = char_slice(text, inline_off);
            let mut nested = Vec::new();
            if !rest.trim().is_empty() {
                nested.push(CodeLine { line, col: col + inline_off + leading(&rest), text: rest.trim().to_string() });
            }
            nested.extend(sub.iter().cloned());
            self.run_by(&nested, goal, pos, end);
            return Ok(goals);
        }
        if word == "have" || word == "haveI" {
            return self.run_have(text, line, col, sub, goals);
        }
        if word == "sorry" || word == "admit" {
            let g = goals.remove(0);
            self.record_sorry(pos, &g);
            return Ok(goals);
        }
        if word == "hint" {
            return self.run_hint(pos, end, goals);
        }
        let mut full = text.to_string();
        for l in sub {
            full.push(' ');
            full.push_str(&l.text);
        }
        match self.simple(goals, &normalize(&full)) {
            Ok(g) => Ok(g),
            Err(m) => {
                self.error(pos, end, m);
                Err(())
            }
        }
    }

    fn run_have(
        &mut self,
        text: &str,
        line: usize,
        col: usize,
        sub: &[CodeLine],
        mut goals: Vec<Goal>,
    ) -> Result<Vec<Goal>, ()> {
        let kw = first_word(text);
        let rest = char_slice(text, char_len(kw));
        let rest_off = char_len(kw);
        let (lhs, value) = match find_top(&rest, ":=") {
            Some(i) => (rest.chars().take(i).collect::<String>(), Some((i + 2, char_slice(&rest, i + 2)))),
            None => (rest.clone(), None),
        };
        let lhs_trim = lhs.trim_start();
        let name = if lhs_trim.starts_with(':') || lhs_trim.is_empty() {
            "this".to_string()
        } else {
            idents(lhs_trim).first().map(|t| t.1.clone()).unwrap_or_else(|| "this".into())
        };
        let ty = top_colon(&lhs).map(|c| (c + 1, lhs.chars().skip(c + 1).collect::<String>()));
        let cur = goals[0].clone();
        if let Some((toff, t)) = &ty {
            if let Some((voff, v)) = free_variable(t, &cur.names()) {
                let p = (line, col + rest_off + toff + voff);
                self.error(p, (p.0, p.1 + char_len(&v)), format!("unknown identifier '{v}'"));
                return Err(());
            }
        }
        let end = sub.last().map(|l| (l.line, l.col + char_len(&l.text))).unwrap_or((line, col + char_len(text)));
        let Some((voff, value)) = value else {
            let Some((_, t)) = ty else {
                self.error((line, col), end, "expected ':' or ':='");
                return Err(());
            };
            let mut main = goals.remove(0);
            let side = main.with_target(&t);
            main.push_hyp(&name, &t);
            let mut out = vec![side, main];
            out.extend(goals);
            return Ok(out);
        };
        let lead = leading(&value);
        let v = value.trim();
        let vcol = col + rest_off + voff + lead;
        let target = ty.as_ref().map(|t| normalize(&t.1));
        if first_word(v) == "by" {
            let Some(target) = target.clone() else {
                self.error((line, col), end, "toylean: `have name := by` needs a stated type");
                return Err(());
            };
            let inline = char_slice(v, 2);
            let mut nested = Vec::new();
            if !inline.trim().is_empty() {
                nested.push(CodeLine { line, col: vcol + 2 + leading(&inline), text: inline.trim().to_string() });
            }
            nested.extend(sub.iter().cloned());
            self.run_by(&nested, cur.with_target(target), (line, vcol), end);
        } else {
            let mut term = v.to_string();
            for l in sub {
                term.push(' ');
                term.push_str(&l.text);
            }
            if let Err((off, m)) = self.check_term(&term, &cur) {
                let p = (line, vcol + off.min(char_len(v)));
                self.error(p, end, m);
                return Err(());
            }
            if let Some(off) = sorry_offset(v) {
                let g = cur.with_target(target.clone().unwrap_or_default());
                self.record_sorry((line, vcol + off), &g);
            }
        }
        let ty_text = match target {
            Some(t) => t,
            None => cur.hyps.iter().find(|h| h.name == v).map(|h| h.ty.clone()).unwrap_or_else(|| "?_".into()),
        };
        goals[0].push_hyp(&name, &ty_text);
        Ok(goals)
    }

    fn run_hint(&mut self, pos: (usize, usize), end: (usize, usize), mut goals: Vec<Goal>) -> Result<Vec<Goal>, ()> {
        let goal = goals[0].clone();
        let entries: Vec<HintEntry> = match self.world.hints.get(&goal.target) {
            Some(e) => e.clone(),
            None => ["linarith", "nlinarith", "norm_num", "simp_all", "positivity", "omega", "decide", "ring"]
                .iter()
                .filter(|t| matches!(self.single(&goal, t), Ok(g) if g.is_empty()))
                .map(|t| HintEntry::Closes(t.to_string()))
                .collect(),
        };
        if entries.is_empty() {
            self.error(pos, end, "hint failed: no tactic made progress");
            return Err(());
        }
        let mut data = String::from("Try these:");
        let mut closed = false;
        for e in &entries {
            match e {
                HintEntry::Closes(t) => {
                    closed = true;
                    data.push_str(&format!("\n• {t}"));
                }
                HintEntry::Progress { tactic, remaining } => {
                    data.push_str(&format!("\n• {tactic}\nRemaining subgoals:"));
                    for r in remaining {
                        data.push_str(&format!("\n⊢ {r}"));
                    }
                }
            }
        }
        self.msgs.push(Msg { severity: "info", pos, end, data });
        if closed {
            goals.remove(0);
        }
        Ok(goals)
    }

    // ---- tactic semantics ----

    fn simple(&self, mut goals: Vec<Goal>, text: &str) -> Result<Vec<Goal>, String> {
        if goals.is_empty() {
            return Err("no goals to be solved".into());
        }
        if let Some(t) = text.strip_prefix("try ") {
            return Ok(self.simple(goals.clone(), t.trim()).unwrap_or(goals));
        }
        if let Some(t) = text.strip_prefix("all_goals ") {
            let mut out = Vec::new();
            for g in goals {
                out.extend(self.simple(vec![g], t.trim())?);
            }
            return Ok(out);
        }
        if let Some(t) = text.strip_prefix("any_goals ") {
            let mut out = Vec::new();
            let mut any = false;
            for g in goals {
                match self.simple(vec![g.clone()], t.trim()) {
                    Ok(r) => {
                        any = true;
                        out.extend(r);
                    }
                    Err(_) => out.push(g),
                }
            }
            return if any { Ok(out) } else { Err(format!("{t} failed on all goals")) };
        }
        if let Some(t) = text.strip_prefix("first ") {
            let alts: Vec<String> =
                t.split('|').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect();
            let mut last = String::from("first failed");
            for a in alts {
                match self.simple(goals.clone(), &a) {
                    Ok(r) => return Ok(r),
                    Err(m) => last = m,
                }
            }
            return Err(last);
        }
        let head = goals.remove(0);
        let mut out = if let Some(effect) = self.rule(&head, text) {
            effect?
        } else if let Some(i) = find_top(text, "<;>") {
            let a: String = text.chars().take(i).collect();
            let b = char_slice(text, i + 3);
            let mid = self.simple(vec![head], a.trim())?;
            let mut acc = Vec::new();
            for g in mid {
                acc.extend(self.simple(vec![g], b.trim())?);
            }
            acc
        } else {
            self.single(&head, text)?
        };
        out.extend(goals);
        Ok(out)
    }

    fn rule(&self, goal: &Goal, text: &str) -> Option<Result<Vec<Goal>, String>> {
        let effect = self.world.lookup(&goal.target, text, &goal.names())?;
        Some(match effect {
            Effect::Close => Ok(Vec::new()),
            Effect::Noop => Ok(vec![goal.clone()]),
            Effect::Goals(ts) => Ok(ts.iter().map(|t| goal.with_target(t)).collect()),
            Effect::Error(m) => Err(m.clone()),
        })
    }

    fn single(&self, goal: &Goal, text: &str) -> Result<Vec<Goal>, String> {
        if let Some(r) = self.rule(goal, text) {
            return r;
        }
        let word = first_word(text);
        let args = char_slice(text, char_len(word));
        let base = word.trim_end_matches(['!', '?']);
        match base {
            "intro" | "intros" | "rintro" => return intro(goal, &args),
            "constructor" => {
                return if let Some(i) = find_top(&goal.target, "∧") {
                    let (a, b) = split_at_char(&goal.target, i, 1);
                    Ok(vec![tagged(goal.with_target(a), "left"), tagged(goal.with_target(b), "right")])
                } else if let Some(i) = find_top(&goal.target, "↔") {
                    let (a, b) = split_at_char(&goal.target, i, 1);
                    Ok(vec![
                        tagged(goal.with_target(format!("{a} → {b}")), "mp"),
                        tagged(goal.with_target(format!("{b} → {a}")), "mpr"),
                    ])
                } else {
                    Err("constructor failed, target is not an inductive datatype with one constructor".into())
                };
            }
            "left" | "right" => {
                return match find_top(&goal.target, "∨") {
                    Some(i) => {
                        let (a, b) = split_at_char(&goal.target, i, 1);
                        Ok(vec![goal.with_target(if base == "left" { a } else { b })])
                    }
                    None => Err(format!("{base} failed, target is not an inductive datatype with two constructors")),
                };
            }
            "exfalso" => return Ok(vec![goal.with_target("False")]),
            "by_contra" => {
                let name = idents(&args).first().map(|t| t.1.clone()).unwrap_or_else(|| "h✝".into());
                let mut g = goal.with_target("False");
                g.push_hyp(&name, &format!("¬{}", paren(&goal.target)));
                return Ok(vec![g]);
            }
            "show" | "change" if !text.contains(" at ") => return Ok(vec![goal.with_target(args.trim())]),
            "calc" | "use" | "exists" | "refine" | "refine'" | "apply" | "linear_combination" => {
                self.check_term(&args, goal).map_err(|e| e.1)?;
                return Ok(Vec::new());
            }
            "exact" | "exact_mod_cast" => {
                self.check_term(&args, goal).map_err(|e| e.1)?;
                let term = args.trim();
                return match goal.hyps.iter().find(|h| h.name == term) {
                    Some(h) if h.ty == goal.target => Ok(Vec::new()),
                    Some(h) => Err(format!(
                        "type mismatch\n  {}\nhas type\n  {} : Prop\nbut is expected to have type\n  {} : Prop",
                        h.name, h.ty, goal.target
                    )),
                    None => Ok(Vec::new()),
                };
            }
            _ => {}
        }
        self.check_term(&args, goal).map_err(|e| e.1)?;
        if text.contains(" at ") || !CLOSERS.contains(&base) {
            return Ok(vec![goal.clone()]);
        }
        if self.closes(goal, base) {
            Ok(Vec::new())
        } else {
            Err(failure_message(base))
        }
    }

    /// Built-in decision procedure for the finishing tactics.
    fn closes(&self, goal: &Goal, tactic: &str) -> bool {
        let t = goal.target.as_str();
        let uses_hyps = matches!(
            tactic,
            "linarith" | "nlinarith" | "assumption" | "simp_all" | "aesop" | "tauto" | "exact_mod_cast" | "polyrith"
        );
        if uses_hyps && goal.hyps.iter().any(|h| h.ty == t) {
            return true;
        }
        if t == "True" {
            return matches!(tactic, "trivial" | "simp" | "norm_num" | "aesop" | "simp_all" | "decide" | "tauto");
        }
        if let Some((l, r)) = t.split_once(" = ") {
            if l.trim() == r.trim() && matches!(tactic, "rfl" | "simp" | "norm_num" | "ring" | "ring_nf" | "linarith" | "nlinarith" | "aesop" | "simp_all") {
                return true;
            }
        }
        let Some(rel) = Relation::parse(t) else {
            return false;
        };
        if rel.is_closed() {
            let truth = rel.decide() == Some(true);
            let eq = rel.rel == crate::expr::Rel::Eq;
            return truth
                && match tactic {
                    "norm_num" | "norm_num1" | "simp" | "simp_all" | "linarith" | "nlinarith" | "aesop" | "simp_arith"
                    | "bound" => true,
                    "decide" | "omega" | "native_decide" | "trivial" => rel.is_integral(),
                    "rfl" | "ring" | "ring_nf" | "field_simp" | "linear_combination" => eq,
                    "positivity" => rel.positivity(),
                    "norm_cast" => eq && rel.is_integral(),
                    _ => false,
                };
        }
        let linear = matches!(tactic, "linarith" | "nlinarith" | "simp_all" | "aesop" | "polyrith" | "bound");
        if linear {
            let facts: Vec<Relation> = goal.hyps.iter().filter_map(|h| Relation::parse(&h.ty)).collect();
            if rel.decide_given(&facts) == Some(true) {
                return true;
            }
        }
        if rel.is_identity() {
            return matches!(tactic, "ring" | "ring_nf" | "linarith" | "nlinarith" | "field_simp" | "linear_combination");
        }
        if rel.positivity() {
            return matches!(tactic, "positivity" | "nlinarith" | "bound");
        }
        false
    }

    fn known_head(&self, head: &str, goal: &Goal) -> bool {
        head.contains('.')
            || matches!(head, "sorry" | "fun" | "by" | "calc" | "show" | "rfl" | "trivial" | "le_refl")
            || goal.names().contains(&head)
            || self.decls.iter().any(|d| d == head)
            || LEMMAS.contains(&head)
            || self.world.lemmas.iter().any(|l| l == head)
    }

    /// Reject identifiers that cannot resolve: out-of-scope variables and
    /// unknown snake_case lemma names. Returns (char offset, message).
    fn check_term(&self, term: &str, goal: &Goal) -> Result<(), (usize, String)> {
        let names = goal.names();
        let bound = bound_names(term);
        for (off, tok) in idents(term) {
            let known = names.contains(&tok.as_str())
                || bound.contains(&tok)
                || self.decls.contains(&tok)
                || tok.contains('.')
                || LEMMAS.contains(&tok.as_str())
                || self.world.lemmas.contains(&tok)
                || KEYWORDS.contains(&tok.as_str())
                || TACTICS.contains(&tok.as_str());
            if known {
                continue;
            }
            if is_variable_like(&tok) || tok.contains('_') || tok.chars().all(|c| c.is_ascii_lowercase()) {
                return Err((off, format!("unknown identifier '{tok}'")));
            }
        }
        Ok(())
    }
}

fn tagged(mut g: Goal, tag: &str) -> Goal {
    g.tag = Some(tag.to_string());
    g
}

fn paren(t: &str) -> String {
    if t.contains(' ') {
        format!("({t})")
    } else {
        t.to_string()
    }
}

fn split_at_char(text: &str, i: usize, width: usize) -> (String, String) {
    let a: String = text.chars().take(i).collect();
    let b = char_slice(text, i + width);
    (a.trim().to_string(), b.trim().to_string())
}

fn failure_message(tactic: &str) -> String {
    match tactic {
        "linarith" | "nlinarith" => "linarith failed to find a contradiction".into(),
        "norm_num" | "norm_num1" => "norm_num failed to simplify".into(),
        "simp" | "field_simp" | "simp_arith" => "simp made no progress".into(),
        "simp_all" => "simp_all made no progress".into(),
        "ring" => "ring failed to prove equality, try ring_nf to normalize".into(),
        "ring_nf" => "ring_nf failed".into(),
        "positivity" => "failed to prove positivity".into(),
        "omega" => "omega could not prove the goal".into(),
        "decide" | "native_decide" => "failed to reduce to true/false".into(),
        "rfl" => "The rfl tactic failed.".into(),
        "norm_cast" | "exact_mod_cast" => "norm_cast failed to simplify".into(),
        "assumption" => "assumption failed".into(),
        "aesop" => "aesop: failed to prove the goal after exhaustive search.".into(),
        "tauto" => "tauto failed to solve some goals.".into(),
        other => format!("{other} failed"),
    }
}

fn intro(goal: &Goal, args: &str) -> Result<Vec<Goal>, String> {
    let mut names: Vec<String> = args.split_whitespace().map(str::to_string).collect();
    if names.is_empty() {
        names.push(String::new());
    }
    let mut g = goal.clone();
    for n in names {
        let t = g.target.clone();
        if let Some(rest) = t.strip_prefix('∀') {
            let Some(comma) = find_top(rest, ",") else {
                return Err("intro failed: malformed binder".into());
            };
            let binders: String = rest.chars().take(comma).collect();
            let body = char_slice(rest, comma + 1);
            let groups = binder_groups(&binders);
            let (vars, ty) = if groups.is_empty() {
                match top_colon(&binders) {
                    Some(c) => (
                        binders.chars().take(c).collect::<String>().split_whitespace().map(str::to_string).collect(),
                        char_slice(&binders, c + 1).trim().to_string(),
                    ),
                    None => (binders.split_whitespace().map(str::to_string).collect::<Vec<_>>(), "?_".to_string()),
                }
            } else {
                (groups[0].1.clone(), groups[0].2 .1.trim().to_string())
            };
            let Some(first) = vars.first().cloned() else {
                return Err("intro failed".into());
            };
            let new = if n.is_empty() { format!("{first}✝") } else { n.clone() };
            let rest_vars = &vars[1..];
            let mut body = rename_word(&body, &first, &new);
            if !rest_vars.is_empty() {
                body = format!("∀ {} : {}, {}", rest_vars.join(" "), ty, body.trim());
            } else if groups.len() > 1 {
                let tail: Vec<String> =
                    groups[1..].iter().map(|g| format!("({} : {})", g.1.join(" "), g.2 .1.trim())).collect();
                body = format!("∀ {}, {}", tail.join(" "), body.trim());
            }
            g.push_hyp(&new, &ty);
            g.target = normalize(&body);
        } else if let Some(i) = find_top(&t, "→") {
            let (a, b) = split_at_char(&t, i, 1);
            let new = if n.is_empty() { "a✝".to_string() } else { n.clone() };
            g.push_hyp(&new, &a);
            g.target = b;
        } else {
            return Err("no additional binders or let bindings in the goal to introduce".into());
        }
    }
    Ok(vec![g])
}

fn rename_word(text: &str, from: &str, to: &str) -> String {
    let mut out = String::new();
    let mut last = 0;
    let byte_of = |s: &str, c: usize| s.char_indices().nth(c).map(|x| x.0).unwrap_or(s.len());
    for (off, tok) in idents(text) {
        if tok == from {
            let b = byte_of(text, off);
            out.push_str(&text[last..b]);
            out.push_str(to);
            last = b + from.len();
        }
    }
    out.push_str(&text[last..]);
    out
}

/// Offset of the first `:` at depth zero that is not part of `:=`.
fn top_colon(text: &str) -> Option<usize> {
    let chars: Vec<char> = text.chars().collect();
    let mut depth = 0i32;
    for i in 0..chars.len() {
        match chars[i] {
            '(' | '[' | '{' | '⟨' | '⦃' => depth += 1,
            ')' | ']' | '}' | '⟩' | '⦄' => depth -= 1,
            ':' if depth == 0 && chars.get(i + 1) != Some(&'=') => return Some(i),
            _ => {}
        }
    }
    None
}

type BinderGroup = (usize, Vec<String>, (usize, String));

/// Bracketed binder groups `(a b : T)`: (offset of group, names, (offset
/// of type within group, type text)). Instance binders `[..]` are skipped.
fn binder_groups(text: &str) -> Vec<BinderGroup> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if matches!(c, '(' | '{' | '⦃' | '[') {
            let close = match c {
                '(' => ')',
                '{' => '}',
                '⦃' => '⦄',
                _ => ']',
            };
            let start = i;
            let mut depth = 0;
            let mut j = i;
            while j < chars.len() {
                if chars[j] == c {
                    depth += 1;
                } else if chars[j] == close {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                j += 1;
            }
            let inner: String = chars[start + 1..j.min(chars.len())].iter().collect();
            if c != '[' {
                if let Some(colon) = top_colon(&inner) {
                    let names: Vec<String> =
                        inner.chars().take(colon).collect::<String>().split_whitespace().map(str::to_string).collect();
                    out.push((start, names, (1 + colon + 1, char_slice(&inner, colon + 1))));
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Variables bound inside the text itself (∀, ∃, λ, fun, ∑, set-builder).
fn bound_names(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let is_fun = chars[i..].starts_with(&['f', 'u', 'n', ' ']) && (i == 0 || !text::is_ident_char(chars[i - 1]));
        if matches!(chars[i], '∀' | '∃' | 'λ' | '∑' | '∏') || is_fun {
            let mut j = i + 1;
            while j < chars.len() && chars[j] != ',' && chars[j] != '↦' && !chars[j..].starts_with(&['=', '>']) {
                j += 1;
            }
            let region: String = chars[i + 1..j].iter().collect();
            let region = region.split(" in ").next().unwrap_or("").to_string();
            let region = region.split('∈').next().unwrap_or("").to_string();
            out.extend(idents(&region).into_iter().map(|t| t.1));
            i = j;
        } else if chars[i] == '{' {
            let inner: String = chars[i + 1..].iter().take_while(|c| **c != '|' && **c != '}').collect();
            if chars.get(i + 1 + char_len(&inner)) == Some(&'|') {
                out.extend(idents(inner.split(':').next().unwrap_or("")).into_iter().map(|t| t.1));
            }
            i += 1;
        } else {
            i += 1;
        }
    }
    out
}

/// First variable-like identifier in `ty` that is neither in scope nor
/// bound within `ty`.
fn free_variable(ty: &str, scope: &[&str]) -> Option<(usize, String)> {
    let bound = bound_names(ty);
    idents(ty)
        .into_iter()
        .find(|(_, t)| is_variable_like(t) && !scope.contains(&t.as_str()) && !bound.contains(t))
}

fn sorry_offset(text: &str) -> Option<usize> {
    idents(text).into_iter().find(|t| t.1 == "sorry" || t.1 == "admit").map(|t| t.0)
}

fn parse_items(lines: &[CodeLine]) -> Vec<Item> {
    let mut items: Vec<Item> = Vec::new();
    let Some(first) = lines.first() else {
        return items;
    };
    let c = first.col;
    for l in lines {
        if l.col <= c || items.is_empty() {
            items.push(Item { head: l.clone(), sub: Vec::new() });
        } else {
            items.last_mut().unwrap().sub.push(l.clone());
        }
    }
    items
}

fn opens_block(text: &str) -> bool {
    let t = text.trim_end();
    t.starts_with('·')
        || t.starts_with(". ")
        || t.ends_with("=>")
        || (t.ends_with(" by") || t == "by")
        || matches!(first_word(t), "case" | "next")
}

/// Walk items in source order and report the first parse error.
fn check_items(items: &[Item], block_col: usize, found: &mut Option<(usize, usize, String)>) {
    for item in items {
        if found.is_some() {
            return;
        }
        if item.head.col < block_col {
            *found = Some((item.head.line, item.head.col, "unexpected identifier; expected command".into()));
            return;
        }
        let pieces = split_semicolons(&item.head.text);
        for (off, p) in &pieces {
            let piece_col = item.head.col + off + leading(p);
            if let Some((o, m)) = syntax_error(p.trim()) {
                *found = Some((item.head.line, piece_col + o, m));
                return;
            }
        }
        let last = pieces.last().map(|p| p.1.trim().to_string()).unwrap_or_default();
        if item.sub.is_empty() {
            if opens_block(&last) && !last.starts_with('·') && !last.starts_with(". ") {
                let end = item.head.col + char_len(&item.head.text);
                *found = Some((item.head.line, end, "unexpected end of input; expected '{' or tactic".into()));
                return;
            }
            continue;
        }
        if opens_block(&last) {
            let mut nested = Vec::new();
            let inline_col;
            if last.starts_with('·') || last.starts_with(". ") {
                let rest = char_slice(&last, 1);
                inline_col = item.head.col + char_len(&item.head.text) - char_len(&last) + 1 + leading(&rest);
                if !rest.trim().is_empty() {
                    nested.push(CodeLine { line: item.head.line, col: inline_col, text: rest.trim().to_string() });
                }
            }
            nested.extend(item.sub.iter().cloned());
            let col = nested[0].col;
            check_items(&parse_items(&nested), col, found);
        } else {
            let tail = item.sub.last().unwrap();
            if tail.text.trim_end().ends_with(',') && !text::unbalanced(&join_text(item)) {
                *found = Some((tail.line, tail.col + char_len(tail.text.trim_end()) - 1, comma_msg()));
            }
        }
    }
}

fn join_text(item: &Item) -> String {
    let mut s = item.head.text.clone();
    for l in &item.sub {
        s.push(' ');
        s.push_str(&l.text);
    }
    s
}

fn comma_msg() -> String {
    "unexpected token ','; expected command".into()
}

/// Lean-3 leftovers and unknown tactics, as (char offset, message).
fn syntax_error(text: &str) -> Option<(usize, String)> {
    if text.is_empty() {
        return None;
    }
    if let Some(rest) = text.strip_prefix('·').or_else(|| text.strip_prefix(". ")) {
        let off = char_len(text) - char_len(rest);
        let lead = leading(rest);
        return syntax_error(rest.trim()).map(|(o, m)| (o + off + lead, m));
    }
    if text.starts_with('(') || text.starts_with('{') || text.starts_with('_') {
        return None;
    }
    let word = first_word(text);
    if !TACTICS.contains(&word) && !TACTICS.contains(&word.trim_end_matches(['!', '?'])) {
        return Some((0, "unknown tactic".into()));
    }
    let after = char_slice(text, char_len(word));
    if matches!(word, "rw" | "rwa" | "rewrite" | "nth_rewrite" | "nth_rw") {
        let skip = if word.starts_with("nth") {
            let l = leading(&after);
            l + after.chars().skip(l).take_while(|c| c.is_ascii_digit()).count()
        } else {
            0
        };
        let rest = char_slice(&after, skip);
        let l = leading(&rest);
        if !rest.trim_start().starts_with('[') {
            return Some((char_len(word) + skip + l, "unexpected identifier; expected '['".into()));
        }
    }
    if matches!(word, "cases" | "induction") {
        if let Some(w) = find_word_offset(text, "with") {
            let rest = char_slice(text, w + 4);
            if !rest.trim().is_empty() && !rest.trim_start().starts_with('|') {
                return Some((w + 4 + leading(&rest), "unexpected identifier; expected '|'".into()));
            }
        }
    }
    if matches!(word, "have" | "haveI") {
        if let Some(f) = find_word_offset(text, "from") {
            if find_top(text, ":=").map_or(true, |a| f < a) {
                return Some((f, "unexpected token 'from'; expected ':=' or '|'".into()));
            }
        }
        if find_top(text, ":=").is_none() {
            if let Some(c) = find_top(text, ",") {
                return Some((c, "unexpected token ','; expected ':=' or '|'".into()));
            }
        }
    }
    for kw in ["fun ", "λ"] {
        if let Some(f) = text.find(kw) {
            let start = char_len(&text[..f]);
            let rest = char_slice(text, start);
            let comma = rest.find(',');
            let arrow = [rest.find("=>"), rest.find('↦')].into_iter().flatten().min();
            if let Some(c) = comma {
                if arrow.map_or(true, |a| c < a) {
                    return Some((start + char_len(&rest[..c]), "unexpected token ','; expected '↦', '=>'".into()));
                }
            }
        }
    }
    if text.trim_end().ends_with(',') && !text::unbalanced(text) {
        return Some((char_len(text.trim_end()) - 1, comma_msg()));
    }
    None
}

fn find_word_offset(text: &str, word: &str) -> Option<usize> {
    idents(text).into_iter().find(|t| t.1 == word).map(|t| t.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(world: &World, code: &str) -> Elab<'static> {
        let world: &'static World = Box::leak(Box::new(world.clone()));
        let mut e = Elab::new(world);
        e.run(&text::mask_comments(code).unwrap());
        e
    }

    fn errors(e: &Elab) -> Vec<String> {
        e.msgs.iter().filter(|m| m.severity == "error").map(|m| m.data.clone()).collect()
    }

    #[test]
    fn rfl_passes() {
        let e = run(&World::default(), "theorem t : 1 = 1 := by rfl");
        assert!(e.msgs.is_empty(), "{:?}", e.msgs);
    }

    #[test]
    fn sorry_body_reports_goal() {
        let e = run(&World::default(), "theorem t : 1 = 1 := by\n  sorry\n");
        assert_eq!(e.sorries.len(), 1);
        assert!(e.sorries[0].goal.ends_with("⊢ 1 = 1"));
        assert_eq!(e.sorries[0].pos, (2, 2));
        assert_eq!(e.msgs[0].data, "declaration uses 'sorry'");
        assert_eq!(e.msgs[0].pos, (1, 8));
    }

    #[test]
    fn unknown_tactic_truncates() {
        let e = run(&World::default(), "theorem t : 1 = 1 := by\n  foo_bar\n  rfl\n");
        assert_eq!(errors(&e), vec!["unknown tactic"]);
        assert_eq!(e.msgs[0].pos, (2, 2));
    }

    #[test]
    fn unbound_variable_in_statement() {
        let e = run(&World::default(), "theorem t (x : ℝ) (hz : z > 0) : x = x := by\n  sorry\n");
        assert_eq!(errors(&e), vec!["unknown identifier 'z'"]);
        assert_eq!(e.msgs[0].pos, (1, 24));
        assert!(e.sorries.is_empty());
    }

    #[test]
    fn have_errors_recover() {
        let code = "theorem t (x : ℝ) (h : x = 2) : x + x = 5 := by\n  have h2 : x * 0 = 1 := by\n    norm_num\n  have h3 : 2 + 2 = 4 := by norm_num\n  linarith\n";
        let e = run(&World::default(), code);
        let errs = errors(&e);
        assert_eq!(errs[0], "norm_num failed to simplify");
        assert_eq!(errs[1], "linarith failed to find a contradiction");
        assert_eq!(errs.len(), 2);
    }

    #[test]
    fn unsolved_goals_at_by() {
        let code = "theorem t (a b : ℕ) : a + b = b + a := by\n  have h : a = a := by\n    rw [Nat.add_comm]\n  ring\n";
        let e = run(&World::default(), code);
        let errs = errors(&e);
        assert_eq!(errs.len(), 1);
        assert!(errs[0].starts_with("unsolved goals\na b : ℕ\n⊢ a = a"), "{errs:?}");
        assert_eq!(e.msgs[0].pos, (2, 20));
    }

    #[test]
    fn constructor_and_bullets() {
        let code = "theorem t : 2 + 2 = 4 ∧ 3 < 5 := by\n  constructor\n  · norm_num\n  · sorry\n";
        let e = run(&World::default(), code);
        assert_eq!(e.sorries.len(), 1);
        assert!(e.sorries[0].goal.starts_with("case right\n"));
        assert!(errors(&e).is_empty());
    }

    #[test]
    fn lean3_syntax_is_rejected() {
        for (code, msg) in [
            ("theorem t : 1 = 1 from by rfl", "unexpected token 'from'; expected ':=', 'where' or '|'"),
            ("theorem t (h : 1 = 1) : 1 = 1 := by\n  rw h\n", "unexpected identifier; expected '['"),
            ("theorem t : 1 = 1 := by\n  norm_num,\n", "unexpected token ','; expected command"),
            ("theorem t : 1 = 1 :=\nbegin\n  norm_num\nend\n", "unknown identifier 'begin'"),
        ] {
            let e = run(&World::default(), code);
            assert_eq!(errors(&e).first().map(String::as_str), Some(msg), "{code}");
        }
    }

    #[test]
    fn intro_names_inaccessible() {
        let code = "theorem t : ∀ x : ℕ, x = x := by\n  intro\n  sorry\n";
        let e = run(&World::default(), code);
        assert_eq!(e.sorries[0].goal, "x✝ : ℕ\n⊢ x✝ = x✝");
    }

    #[test]
    fn hint_lists_closing_tactics() {
        let e = run(&World::default(), "theorem t (a b : ℝ) : a + b = b + a := by\n  hint\n");
        let info = e.msgs.iter().find(|m| m.severity == "info").unwrap();
        assert!(info.data.starts_with("Try these:\n• linarith"), "{}", info.data);
        assert!(errors(&e).is_empty());
    }

    #[test]
    fn linarith_substitutes_values() {
        let e = run(&World::default(), "theorem t (x y : ℝ) (h : x = 2) (h2 : y = x + 1) : x + y = 5 := by\n  linarith\n");
        assert!(errors(&e).is_empty(), "{:?}", e.msgs);
        let e = run(&World::default(), "theorem t (x y : ℝ) (h : x = 2) : x + y = 5 := by\n  linarith\n");
        assert_eq!(errors(&e).len(), 1);
    }

    #[test]
    fn no_goals_error() {
        let e = run(&World::default(), "theorem t : 2 + 2 = 4 := by\n  norm_num\n  linarith\n");
        assert_eq!(errors(&e), vec!["no goals to be solved"]);
    }

    #[test]
    fn rules_override_defaults() {
        let w: World = serde_json::from_str(
            r#"{"rules":[{"goal":"x ^ 2 + y ^ 2 = 158","tactic":"nlinarith*","requires":["h7"],"effect":"close"}]}"#,
        )
        .unwrap();
        let ok = run(&w, "theorem t (x y : ℝ) (h7 : x * y = 19) : x ^ 2 + y ^ 2 = 158 := by\n  nlinarith [h7]\n");
        assert!(errors(&ok).is_empty());
        let bad = run(&w, "theorem t (x y : ℝ) : x ^ 2 + y ^ 2 = 158 := by\n  nlinarith\n");
        assert_eq!(errors(&bad).len(), 1);
    }
}
