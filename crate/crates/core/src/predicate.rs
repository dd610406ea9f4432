//! Record predicates: a small comparison grammar.
//!
//! ```text
//! expr    := conj ( ("OR" | "||") conj )*
//! conj    := atom ( ("AND" | "&&") atom )*
//! atom    := "(" expr ")" | column op literal
//! op      := "=" | "==" | "!=" | "<" | "<=" | ">" | ">="
//! literal := number | true | false | "text" | 'text'
//! ```
//!
//! Keywords are case-insensitive. Numeric columns compare against numbers,
//! bool and string columns support only `=` and `!=`.
//!
//! Besides evaluation, compiled predicates support an exact satisfiability
//! check, which partitions use to prove pieces disjoint before touching data.

use std::collections::BTreeMap;
use std::fmt;

use crate::calculus::{Cell, CellKind, Record, Schema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Number(f64),
    Bool(bool),
    Str(String),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(x) => write!(f, "{x}"),
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Str(s) => write!(f, "{s:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Cmp { column: String, op: CmpOp, literal: Literal },
    And(Vec<Expr>),
    Or(Vec<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Cmp { column, op, literal } => write!(f, "{column} {op} {literal}"),
            Expr::And(xs) | Expr::Or(xs) => {
                let sep = if matches!(self, Expr::And(_)) { " AND " } else { " OR " };
                f.write_str("(")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(f64),
    Str(String),
    Op(CmpOp),
    And,
    Or,
    True,
    False,
    LParen,
    RParen,
}

fn parse_err(position: usize, message: impl Into<String>) -> Error {
    Error::PredicateParse { position, message: message.into() }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => {
                out.push((start, Token::LParen));
                i += 1;
            }
            b')' => {
                out.push((start, Token::RParen));
                i += 1;
            }
            b'=' => {
                i += if bytes.get(i + 1) == Some(&b'=') { 2 } else { 1 };
                out.push((start, Token::Op(CmpOp::Eq)));
            }
            b'!' => {
                if bytes.get(i + 1) != Some(&b'=') {
                    return Err(parse_err(start, "expected '!='"));
                }
                i += 2;
                out.push((start, Token::Op(CmpOp::Ne)));
            }
            b'<' | b'>' => {
                let eq = bytes.get(i + 1) == Some(&b'=');
                let op = match (c, eq) {
                    (b'<', false) => CmpOp::Lt,
                    (b'<', true) => CmpOp::Le,
                    (b'>', false) => CmpOp::Gt,
                    _ => CmpOp::Ge,
                };
                i += if eq { 2 } else { 1 };
                out.push((start, Token::Op(op)));
            }
            b'&' | b'|' => {
                if bytes.get(i + 1) != Some(&c) {
                    return Err(parse_err(start, format!("expected '{0}{0}'", c as char)));
                }
                i += 2;
                out.push((start, if c == b'&' { Token::And } else { Token::Or }));
            }
            b'"' | b'\'' => {
                i += 1;
                let mut s = String::new();
                loop {
                    let rest = src.get(i..).ok_or_else(|| parse_err(start, "unterminated string"))?;
                    let ch = rest.chars().next().ok_or_else(|| parse_err(start, "unterminated string"))?;
                    i += ch.len_utf8();
                    if ch as u32 == c as u32 {
                        // a doubled quote is an escaped quote
                        if bytes.get(i) == Some(&c) {
                            s.push(ch);
                            i += 1;
                            continue;
                        }
                        break;
                    }
                    s.push(ch);
                }
                out.push((start, Token::Str(s)));
            }
            b'0'..=b'9' | b'-' | b'+' | b'.' => {
                i += 1;
                while i < bytes.len() {
                    let b = bytes[i];
                    let exp_sign = (b == b'-' || b == b'+') && matches!(bytes[i - 1], b'e' | b'E');
                    if b.is_ascii_digit() || b == b'.' || b == b'e' || b == b'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| parse_err(start, format!("bad number {text:?}")))?;
                if !v.is_finite() {
                    return Err(parse_err(start, format!("number {text:?} is not finite")));
                }
                out.push((start, Token::Number(v)));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &src[start..i];
                let tok = match word.to_ascii_lowercase().as_str() {
                    "and" => Token::And,
                    "or" => Token::Or,
                    "true" => Token::True,
                    "false" => Token::False,
                    _ => Token::Ident(word.to_string()),
                };
                out.push((start, tok));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(parse_err(start, format!("unexpected character {ch:?}")));
            }
        }
    }
    Ok(out)
}

const MAX_DEPTH: usize = 64;

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expr(&mut self, depth: usize) -> Result<Expr> {
        if depth > MAX_DEPTH {
            return Err(parse_err(self.offset(), "expression nested too deeply"));
        }
        let mut terms = vec![self.conj(depth)?];
        while self.peek() == Some(&Token::Or) {
            self.pos += 1;
            terms.push(self.conj(depth)?);
        }
        Ok(if terms.len() == 1 { terms.pop().expect("one term") } else { Expr::Or(terms) })
    }

    fn conj(&mut self, depth: usize) -> Result<Expr> {
        let mut atoms = vec![self.atom(depth)?];
        while self.peek() == Some(&Token::And) {
            self.pos += 1;
            atoms.push(self.atom(depth)?);
        }
        Ok(if atoms.len() == 1 { atoms.pop().expect("one atom") } else { Expr::And(atoms) })
    }

    fn atom(&mut self, depth: usize) -> Result<Expr> {
        let at = self.offset();
        match self.next() {
            Some(Token::LParen) => {
                let e = self.expr(depth + 1)?;
                let close = self.offset();
                match self.next() {
                    Some(Token::RParen) => Ok(e),
                    _ => Err(parse_err(close, "expected ')'")),
                }
            }
            Some(Token::Ident(column)) => {
                let oat = self.offset();
                let op = match self.next() {
                    Some(Token::Op(op)) => op,
                    _ => return Err(parse_err(oat, "expected a comparison operator")),
                };
                let lat = self.offset();
                let literal = match self.next() {
                    Some(Token::Number(v)) => Literal::Number(v),
                    Some(Token::True) => Literal::Bool(true),
                    Some(Token::False) => Literal::Bool(false),
                    Some(Token::Str(s)) => Literal::Str(s),
                    _ => return Err(parse_err(lat, "expected a literal")),
                };
                Ok(Expr::Cmp { column, op, literal })
            }
            _ => Err(parse_err(at, "expected a column name or '('")),
        }
    }
}

/// Parses the textual grammar into an untyped expression.
pub fn parse(src: &str) -> Result<Expr> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0, end: src.len() };
    let e = p.expr(0)?;
    if p.pos < p.tokens.len() {
        return Err(parse_err(p.offset(), "unexpected trailing input"));
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
enum TypedLit {
    Number(f64),
    Bool(bool),
    Str(String),
}

#[derive(Debug, Clone, PartialEq)]
struct Atom {
    index: usize,
    kind: CellKind,
    op: CmpOp,
    literal: TypedLit,
}

impl Atom {
    fn eval(&self, r: &Record) -> bool {
        let cell = match r.get(self.index) {
            Some(c) => c,
            None => return false,
        };
        match (&self.literal, cell) {
            (TypedLit::Number(l), Cell::Int(v)) => cmp_f64(self.op, *v as f64, *l),
            (TypedLit::Number(l), Cell::Float(v)) => cmp_f64(self.op, *v, *l),
            (TypedLit::Bool(l), Cell::Bool(v)) => (v == l) == (self.op == CmpOp::Eq),
            (TypedLit::Str(l), Cell::Str(v)) => (v == l) == (self.op == CmpOp::Eq),
            _ => false,
        }
    }
}

fn cmp_f64(op: CmpOp, v: f64, l: f64) -> bool {
    match op {
        CmpOp::Eq => v == l,
        CmpOp::Ne => v != l,
        CmpOp::Lt => v < l,
        CmpOp::Le => v <= l,
        CmpOp::Gt => v > l,
        CmpOp::Ge => v >= l,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Atom(Atom),
    And(Vec<Node>),
    Or(Vec<Node>),
}

/// A predicate type-checked against a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    source: String,
    root: Node,
}

impl Predicate {
    pub fn parse(src: &str, schema: &Schema) -> Result<Self> {
        Self::compile(&parse(src)?, schema).map(|mut p| {
            p.source = src.trim().to_string();
            p
        })
    }

    pub fn compile(expr: &Expr, schema: &Schema) -> Result<Self> {
        Ok(Predicate { source: expr.to_string(), root: compile_node(expr, schema)? })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, r: &Record) -> bool {
        eval_node(&self.root, r)
    }

    /// Whether some record of the schema satisfies both predicates. `None`
    /// when the disjunctive normal form is too large to decide.
    pub fn overlaps(&self, other: &Predicate) -> Option<bool> {
        let a = dnf(&self.root)?;
        let b = dnf(&other.root)?;
        Some(a.iter().any(|ta| b.iter().any(|tb| satisfiable(ta.iter().chain(tb.iter())))))
    }

    /// Whether any record satisfies this predicate.
    pub fn satisfiable(&self) -> Option<bool> {
        Some(dnf(&self.root)?.iter().any(|t| satisfiable(t.iter())))
    }
}

fn compile_node(expr: &Expr, schema: &Schema) -> Result<Node> {
    match expr {
        Expr::And(xs) => Ok(Node::And(xs.iter().map(|x| compile_node(x, schema)).collect::<Result<_>>()?)),
        Expr::Or(xs) => Ok(Node::Or(xs.iter().map(|x| compile_node(x, schema)).collect::<Result<_>>()?)),
        Expr::Cmp { column, op, literal } => {
            let index = schema.index_of(column)?;
            let kind = schema.columns()[index].kind;
            let mismatch = |expected: &str| Error::ColumnKind {
                column: column.clone(),
                expected: expected.into(),
                actual: kind.to_string(),
            };
            let literal = match (kind, literal) {
                (CellKind::Int64 | CellKind::Float64, Literal::Number(v)) => TypedLit::Number(*v),
                (CellKind::Bool, Literal::Bool(b)) => TypedLit::Bool(*b),
                (CellKind::String, Literal::Str(s)) => TypedLit::Str(s.clone()),
                (_, Literal::Number(_)) => return Err(mismatch("numeric")),
                (_, Literal::Bool(_)) => return Err(mismatch("bool")),
                (_, Literal::Str(_)) => return Err(mismatch("string")),
            };
            if !kind.is_numeric() && !matches!(op, CmpOp::Eq | CmpOp::Ne) {
                return Err(Error::PredicateParse {
                    position: 0,
                    message: format!("column {column:?} of kind {kind} supports only = and !="),
                });
            }
            Ok(Node::Atom(Atom { index, kind, op: *op, literal }))
        }
    }
}

fn eval_node(n: &Node, r: &Record) -> bool {
    match n {
        Node::Atom(a) => a.eval(r),
        Node::And(xs) => xs.iter().all(|x| eval_node(x, r)),
        Node::Or(xs) => xs.iter().any(|x| eval_node(x, r)),
    }
}

const MAX_DNF_TERMS: usize = 256;

fn dnf(n: &Node) -> Option<Vec<Vec<Atom>>> {
    match n {
        Node::Atom(a) => Some(vec![vec![a.clone()]]),
        Node::Or(xs) => {
            let mut out = Vec::new();
            for x in xs {
                out.extend(dnf(x)?);
                if out.len() > MAX_DNF_TERMS {
                    return None;
                }
            }
            Some(out)
        }
        Node::And(xs) => {
            let mut acc: Vec<Vec<Atom>> = vec![Vec::new()];
            for x in xs {
                let terms = dnf(x)?;
                if acc.len().saturating_mul(terms.len()) > MAX_DNF_TERMS {
                    return None;
                }
                acc =
                    acc.iter().flat_map(|a| terms.iter().map(move |t| a.iter().chain(t).cloned().collect())).collect();
            }
            Some(acc)
        }
    }
}

#[derive(Default)]
struct NumRange {
    lower: Option<(f64, bool)>, // (value, inclusive)
    upper: Option<(f64, bool)>,
    excluded: Vec<f64>,
}

impl NumRange {
    fn tighten_lower(&mut self, v: f64, inclusive: bool) {
        let replace = match self.lower {
            None => true,
            Some((l, li)) => v > l || (v == l && li && !inclusive),
        };
        if replace {
            self.lower = Some((v, inclusive));
        }
    }

    fn tighten_upper(&mut self, v: f64, inclusive: bool) {
        let replace = match self.upper {
            None => true,
            Some((u, ui)) => v < u || (v == u && ui && !inclusive),
        };
        if replace {
            self.upper = Some((v, inclusive));
        }
    }

    fn add(&mut self, op: CmpOp, v: f64) {
        match op {
            CmpOp::Eq => {
                self.tighten_lower(v, true);
                self.tighten_upper(v, true);
            }
            CmpOp::Ne => self.excluded.push(v),
            CmpOp::Lt => self.tighten_upper(v, false),
            CmpOp::Le => self.tighten_upper(v, true),
            CmpOp::Gt => self.tighten_lower(v, false),
            CmpOp::Ge => self.tighten_lower(v, true),
        }
    }

    fn satisfiable_real(&self) -> bool {
        match (self.lower, self.upper) {
            (Some((l, li)), Some((u, ui))) => {
                if l < u {
                    true
                } else if l == u {
                    li && ui && !self.excluded.contains(&l)
                } else {
                    false
                }
            }
            _ => true,
        }
    }

    fn satisfiable_int(&self) -> bool {
        let lo: i128 = match self.lower {
            None => i64::MIN as i128,
            Some((v, inc)) => {
                let b = if inc { v.ceil() } else { v.floor() + 1.0 };
                b.max(i64::MIN as f64) as i128
            }
        };
        let hi: i128 = match self.upper {
            None => i64::MAX as i128,
            Some((v, inc)) => {
                let b = if inc { v.floor() } else { v.ceil() - 1.0 };
                b.min(i64::MAX as f64) as i128
            }
        };
        if lo > hi {
            return false;
        }
        let mut holes: Vec<i128> = self
            .excluded
            .iter()
            .filter(|x| x.fract() == 0.0)
            .map(|x| *x as i128)
            .filter(|x| (lo..=hi).contains(x))
            .collect();
        holes.sort_unstable();
        holes.dedup();
        (hi - lo + 1) > holes.len() as i128
    }
}

fn satisfiable<'a>(atoms: impl Iterator<Item = &'a Atom>) -> bool {
    let mut nums: BTreeMap<usize, (CellKind, NumRange)> = BTreeMap::new();
    let mut bools: BTreeMap<usize, [bool; 2]> = BTreeMap::new(); // allowed [false, true]
    let mut strs: BTreeMap<usize, (Option<String>, Vec<String>, bool)> = BTreeMap::new();
    for a in atoms {
        match &a.literal {
            TypedLit::Number(v) => nums.entry(a.index).or_insert_with(|| (a.kind, NumRange::default())).1.add(a.op, *v),
            TypedLit::Bool(b) => {
                let allowed = bools.entry(a.index).or_insert([true, true]);
                let keep = if a.op == CmpOp::Eq { *b } else { !*b };
                allowed[usize::from(!keep)] = false;
            }
            TypedLit::Str(s) => {
                let e = strs.entry(a.index).or_insert((None, Vec::new(), true));
                if a.op == CmpOp::Eq {
                    match &e.0 {
                        Some(prev) if prev != s => e.2 = false,
                        _ => e.0 = Some(s.clone()),
                    }
                } else {
                    e.1.push(s.clone());
                }
            }
        }
    }
    let nums_ok = nums.values().all(|(kind, r)| match kind {
        CellKind::Int64 => r.satisfiable_int(),
        _ => r.satisfiable_real(),
    });
    let bools_ok = bools.values().all(|a| a[0] || a[1]);
    let strs_ok = strs.values().all(|(eq, ne, ok)| *ok && eq.as_ref().is_none_or(|v| !ne.contains(v)));
    nums_ok && bools_ok && strs_ok
}
