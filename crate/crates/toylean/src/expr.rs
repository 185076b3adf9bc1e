//! A small arithmetic language: enough of Lean's numeric notation to decide
//! closed (in)equalities, polynomial identities and obvious sign facts.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(BigRational),
    Atom(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Inv(Box<Expr>),
    Abs(Box<Expr>),
    App(String, Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub lhs: Expr,
    pub rel: Rel,
    pub rhs: Expr,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Op(char),
}

fn lex(text: &str) -> Option<Vec<Tok>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() || c == '↑' {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let mut den_digits = 0;
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                    den_digits += 1;
                }
            }
            let digits: String = chars[start..i].iter().filter(|c| **c != '.').collect();
            let num: BigInt = digits.parse().ok()?;
            let den = num::pow(BigInt::from(10), den_digits);
            out.push(Tok::Num(BigRational::new(num, den)));
        } else if crate::text::is_ident_start(c) && c != 'λ' {
            let start = i;
            while i < chars.len() && (crate::text::is_ident_char(chars[i]) && chars[i] != '!' && chars[i] != '?') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if c == '⁻' && chars.get(i + 1) == Some(&'¹') {
            out.push(Tok::Op('⁻'));
            i += 2;
        } else if "+-*/^()|√:·%".contains(c) {
            out.push(Tok::Op(if c == '·' { '*' } else { c }));
            i += 1;
        } else {
            return None;
        }
    }
    Some(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Option<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Some(lhs);
            }
        }
    }

    fn term(&mut self) -> Option<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('%') {
                lhs = Expr::App("%".into(), vec![lhs, self.unary()?]);
            } else {
                return Some(lhs);
            }
        }
    }

    fn unary(&mut self) -> Option<Expr> {
        if self.eat('-') {
            return Some(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Option<Expr> {
        let base = self.postfix()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Some(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Some(base)
    }

    fn postfix(&mut self) -> Option<Expr> {
        let mut e = self.app()?;
        while self.eat('⁻') {
            e = Expr::Inv(Box::new(e));
        }
        Some(e)
    }

    fn starts_atom(&self) -> bool {
        matches!(self.peek(), Some(Tok::Num(_)) | Some(Tok::Ident(_)) | Some(Tok::Op('(')) | Some(Tok::Op('√')))
    }

    fn app(&mut self) -> Option<Expr> {
        if let Some(Tok::Ident(name)) = self.peek().cloned() {
            self.pos += 1;
            let mut args = Vec::new();
            while self.starts_atom() {
                args.push(self.atom()?);
            }
            if args.is_empty() {
                return Some(Expr::Atom(name));
            }
            return Some(match name.as_str() {
                "abs" if args.len() == 1 => Expr::Abs(Box::new(args.remove(0))),
                _ => Expr::App(name, args),
            });
        }
        self.atom()
    }

    fn atom(&mut self) -> Option<Expr> {
        match self.peek().cloned()? {
            Tok::Num(n) => {
                self.pos += 1;
                Some(Expr::Num(n))
            }
            Tok::Ident(name) => {
                self.pos += 1;
                Some(Expr::Atom(name))
            }
            Tok::Op('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.eat(':') {
                    // type ascription: skip to the closing paren
                    let mut depth = 0;
                    loop {
                        match self.peek()? {
                            Tok::Op('(') => depth += 1,
                            Tok::Op(')') if depth == 0 => break,
                            Tok::Op(')') => depth -= 1,
                            _ => {}
                        }
                        self.pos += 1;
                    }
                }
                if !self.eat(')') {
                    return None;
                }
                Some(e)
            }
            Tok::Op('|') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat('|') {
                    return None;
                }
                Some(Expr::Abs(Box::new(e)))
            }
            Tok::Op('√') => {
                self.pos += 1;
                let e = self.atom()?;
                Some(Expr::App("Real.sqrt".into(), vec![e]))
            }
            _ => None,
        }
    }
}

impl Expr {
    pub fn parse(text: &str) -> Option<Expr> {
        let toks = lex(text)?;
        let mut p = Parser { toks, pos: 0 };
        let e = p.expr()?;
        (p.pos == p.toks.len()).then_some(e)
    }

    fn key(&self) -> String {
        format!("{self:?}")
    }
}

impl Relation {
    pub fn parse(text: &str) -> Option<Relation> {
        let chars: Vec<char> = text.chars().collect();
        let mut depth = 0i32;
        for i in 0..chars.len() {
            let c = chars[i];
            match c {
                '(' | '[' | '{' | '⟨' => depth += 1,
                ')' | ']' | '}' | '⟩' => depth -= 1,
                _ if depth != 0 => {}
                '=' | '≠' | '<' | '≤' | '>' | '≥' => {
                    let rel = match c {
                        '=' => Rel::Eq,
                        '≠' => Rel::Ne,
                        '<' => Rel::Lt,
                        '≤' => Rel::Le,
                        '>' => Rel::Gt,
                        _ => Rel::Ge,
                    };
                    let lhs: String = chars[..i].iter().collect();
                    let rhs: String = chars[i + 1..].iter().collect();
                    return Some(Relation { lhs: Expr::parse(&lhs)?, rel, rhs: Expr::parse(&rhs)? });
                }
                _ => {}
            }
        }
        None
    }
}

/// Evaluation environment: atoms get deterministic pseudo-random values
/// per sample point, and `closed` records whether any atom was consulted.
struct Env {
    point: u64,
    values: BTreeMap<String, BigRational>,
    closed: bool,
}

impl Env {
    fn atom(&mut self, key: &str) -> BigRational {
        self.closed = false;
        let point = self.point;
        self.values
            .entry(key.to_string())
            .or_insert_with(|| {
                let mut h: u64 = 1469598103934665603 ^ point.wrapping_mul(0x9e3779b97f4a7c15);
                for b in key.bytes() {
                    h = (h ^ u64::from(b)).wrapping_mul(1099511628211);
                }
                let num = (h % 97) as i64 + 2;
                let den = ((h >> 17) % 7) as i64 + 1;
                BigRational::new(BigInt::from(num), BigInt::from(den))
            })
            .clone()
    }
}

fn perfect_sqrt(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let r = n.sqrt();
    (&r * &r == *n).then_some(r)
}

fn eval(e: &Expr, env: &mut Env) -> Option<BigRational> {
    Some(match e {
        Expr::Num(n) => n.clone(),
        Expr::Atom(a) => env.atom(a),
        Expr::Neg(a) => -eval(a, env)?,
        Expr::Add(a, b) => eval(a, env)? + eval(b, env)?,
        Expr::Sub(a, b) => eval(a, env)? - eval(b, env)?,
        Expr::Mul(a, b) => eval(a, env)? * eval(b, env)?,
        Expr::Div(a, b) => {
            let a = eval(a, env)?;
            let b = eval(b, env)?;
            if b.is_zero() {
                BigRational::zero()
            } else {
                a / b
            }
        }
        Expr::Inv(a) => {
            let a = eval(a, env)?;
            if a.is_zero() {
                a
            } else {
                a.recip()
            }
        }
        Expr::Abs(a) => eval(a, env)?.abs(),
        Expr::Pow(b, x) => {
            let mut probe = Env { point: env.point, values: BTreeMap::new(), closed: true };
            let x = eval(x, &mut probe)?;
            if !probe.closed || !x.is_integer() || x.abs() > BigRational::from_integer(64.into()) {
                return Some(env.atom(&e.key()));
            }
            let n = x.to_integer().to_i32()?;
            let b = eval(b, env)?;
            if n < 0 && b.is_zero() {
                return Some(BigRational::zero());
            }
            num::pow::Pow::pow(b, n)
        }
        Expr::App(f, args) => match (f.as_str(), args.as_slice()) {
            ("Real.sqrt" | "sqrt" | "√", [a]) => {
                let mut probe = Env { point: env.point, values: BTreeMap::new(), closed: true };
                match eval(a, &mut probe) {
                    Some(v) if probe.closed => {
                        if v.is_negative() || v.is_zero() {
                            BigRational::zero()
                        } else {
                            match (perfect_sqrt(v.numer()), perfect_sqrt(v.denom())) {
                                (Some(n), Some(d)) => BigRational::new(n, d),
                                _ => env.atom(&e.key()),
                            }
                        }
                    }
                    _ => env.atom(&e.key()),
                }
            }
            ("%", [a, b]) => {
                let a = eval(a, env)?;
                let b = eval(b, env)?;
                if !a.is_integer() || !b.is_integer() || b.is_zero() {
                    return None;
                }
                let m = a.to_integer() % b.to_integer();
                let m = if m.is_negative() { m + b.to_integer().abs() } else { m };
                BigRational::from_integer(m)
            }
            _ => env.atom(&e.key()),
        },
    })
}

/// Value of a closed expression (no atoms).
pub fn eval_closed(e: &Expr) -> Option<BigRational> {
    let mut env = Env { point: 0, values: BTreeMap::new(), closed: true };
    let v = eval(e, &mut env)?;
    env.closed.then_some(v)
}

pub fn is_closed(e: &Expr) -> bool {
    eval_closed(e).is_some()
}

/// True when every numeral in the expression is an integer and no
/// division occurs (the `omega`/`decide` fragment).
pub fn is_integral(e: &Expr) -> bool {
    match e {
        Expr::Num(n) => n.is_integer(),
        Expr::Atom(_) => true,
        Expr::Neg(a) | Expr::Abs(a) => is_integral(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Pow(a, b) => is_integral(a) && is_integral(b),
        Expr::App(f, args) if f == "%" => args.iter().all(is_integral),
        _ => false,
    }
}

fn subst(e: &Expr, values: &BTreeMap<String, BigRational>) -> Expr {
    let go = |x: &Expr| Box::new(subst(x, values));
    match e {
        Expr::Atom(a) => match values.get(a) {
            Some(v) => Expr::Num(v.clone()),
            None => e.clone(),
        },
        Expr::Num(_) => e.clone(),
        Expr::Neg(a) => Expr::Neg(go(a)),
        Expr::Inv(a) => Expr::Inv(go(a)),
        Expr::Abs(a) => Expr::Abs(go(a)),
        Expr::Add(a, b) => Expr::Add(go(a), go(b)),
        Expr::Sub(a, b) => Expr::Sub(go(a), go(b)),
        Expr::Mul(a, b) => Expr::Mul(go(a), go(b)),
        Expr::Div(a, b) => Expr::Div(go(a), go(b)),
        Expr::Pow(a, b) => Expr::Pow(go(a), go(b)),
        Expr::App(f, args) => Expr::App(f.clone(), args.iter().map(|x| subst(x, values)).collect()),
    }
}

impl Relation {
    /// Truth value after substituting every `atom = value` fact.
    pub fn decide_given(&self, facts: &[Relation]) -> Option<bool> {
        let mut values: BTreeMap<String, BigRational> = BTreeMap::new();
        for _ in 0..3 {
            for f in facts.iter().filter(|f| f.rel == Rel::Eq) {
                let (l, r) = (subst(&f.lhs, &values), subst(&f.rhs, &values));
                match (&l, &r) {
                    (Expr::Atom(a), other) | (other, Expr::Atom(a)) => {
                        if let Some(v) = eval_closed(other) {
                            values.entry(a.clone()).or_insert(v);
                        }
                    }
                    _ => {}
                }
            }
        }
        Relation { lhs: subst(&self.lhs, &values), rel: self.rel, rhs: subst(&self.rhs, &values) }.decide()
    }
}

impl Relation {
    /// Truth value when both sides are closed.
    pub fn decide(&self) -> Option<bool> {
        let a = eval_closed(&self.lhs)?;
        let b = eval_closed(&self.rhs)?;
        Some(match self.rel {
            Rel::Eq => a == b,
            Rel::Ne => a != b,
            Rel::Lt => a < b,
            Rel::Le => a <= b,
            Rel::Gt => a > b,
            Rel::Ge => a >= b,
        })
    }

    pub fn is_closed(&self) -> bool {
        is_closed(&self.lhs) && is_closed(&self.rhs)
    }

    /// Whether an equation holds as an identity in its atoms, tested at
    /// several deterministic sample points.
    pub fn is_identity(&self) -> bool {
        if self.rel != Rel::Eq {
            return false;
        }
        (1..=5).all(|point| {
            let mut env = Env { point, values: BTreeMap::new(), closed: true };
            match (eval(&self.lhs, &mut env), eval(&self.rhs, &mut env)) {
                (Some(a), Some(b)) => a == b,
                _ => false,
            }
        })
    }

    pub fn is_integral(&self) -> bool {
        is_integral(&self.lhs) && is_integral(&self.rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Sign {
    Unknown,
    Nonneg,
    Pos,
}

/// Syntactic sign analysis in the spirit of `positivity`.
pub fn sign(e: &Expr) -> Sign {
    use Sign::*;
    match e {
        Expr::Num(n) => {
            if n.is_positive() {
                Pos
            } else if n.is_zero() {
                Nonneg
            } else {
                Unknown
            }
        }
        Expr::Atom(_) | Expr::Neg(_) | Expr::Sub(_, _) => Unknown,
        Expr::Add(a, b) => match (sign(a), sign(b)) {
            (Unknown, _) | (_, Unknown) => Unknown,
            (Pos, _) | (_, Pos) => Pos,
            _ => Nonneg,
        },
        Expr::Mul(a, b) | Expr::Div(a, b) => sign(a).min(sign(b)),
        Expr::Inv(a) => sign(a),
        Expr::Abs(a) => {
            if sign(a) == Pos {
                Pos
            } else {
                Nonneg
            }
        }
        Expr::Pow(b, x) => {
            let even = eval_closed(x)
                .filter(|v| v.is_integer())
                .map(|v| (v.to_integer() % BigInt::from(2)).is_zero())
                .unwrap_or(false);
            match sign(b) {
                Pos => Pos,
                _ if even => Nonneg,
                s => s,
            }
        }
        Expr::App(f, args) => match f.as_str() {
            "Real.sqrt" | "sqrt" => {
                if args.first().map(sign) == Some(Pos) {
                    Pos
                } else {
                    Nonneg
                }
            }
            "Real.exp" | "exp" => Pos,
            _ => Unknown,
        },
    }
}

impl Relation {
    /// Whether `positivity` proves this relation.
    pub fn positivity(&self) -> bool {
        let zero = |e: &Expr| eval_closed(e).is_some_and(|v| v.is_zero());
        match self.rel {
            Rel::Lt if zero(&self.lhs) => sign(&self.rhs) == Sign::Pos,
            Rel::Gt if zero(&self.rhs) => sign(&self.lhs) == Sign::Pos,
            Rel::Le if zero(&self.lhs) => sign(&self.rhs) >= Sign::Nonneg,
            Rel::Ge if zero(&self.rhs) => sign(&self.lhs) >= Sign::Nonneg,
            Rel::Ne if zero(&self.rhs) => sign(&self.lhs) == Sign::Pos,
            _ => false,
        }
    }
}
