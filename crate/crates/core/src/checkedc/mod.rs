//! Checked pointer kinds, bounds expressions, annotation sites and the
//! pattern-based pointer classifier.

pub mod classify;
pub mod rewrite;
pub mod sites;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::source::lexer::{tokenize, TokKind};

pub use classify::{classify_pointer_lite, classify_program, Classification};
pub use rewrite::{
    annotate, convert_spelling, find_declarator, insert_line_before, strip_bounds, DeclaratorLoc,
};
pub use sites::{extract_sites, validate_scope, AnnotationSite, Scope, ScopeVerdict, SiteScope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointerKind {
    Ptr,
    Arr,
    NtArr,
    Unchecked,
}

/// Which names to print for checked pointer types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spelling {
    /// `ptr`, `arr`, `nt_arr`.
    #[default]
    Short,
    /// `_Ptr`, `_Array_ptr`, `_Nt_array_ptr`.
    Long,
}

impl PointerKind {
    pub fn from_spelling(s: &str) -> Option<PointerKind> {
        match s {
            "ptr" | "_Ptr" => Some(PointerKind::Ptr),
            "arr" | "_Array_ptr" => Some(PointerKind::Arr),
            "nt_arr" | "_Nt_array_ptr" => Some(PointerKind::NtArr),
            _ => None,
        }
    }

    /// Type constructor name; `None` for unchecked pointers.
    pub fn spelling(self, spelling: Spelling) -> Option<&'static str> {
        match (self, spelling) {
            (PointerKind::Ptr, Spelling::Short) => Some("ptr"),
            (PointerKind::Arr, Spelling::Short) => Some("arr"),
            (PointerKind::NtArr, Spelling::Short) => Some("nt_arr"),
            (PointerKind::Ptr, Spelling::Long) => Some("_Ptr"),
            (PointerKind::Arr, Spelling::Long) => Some("_Array_ptr"),
            (PointerKind::NtArr, Spelling::Long) => Some("_Nt_array_ptr"),
            (PointerKind::Unchecked, _) => None,
        }
    }

    pub fn needs_bounds(self) -> bool {
        matches!(self, PointerKind::Arr | PointerKind::NtArr)
    }

    pub fn parse_label(s: &str) -> Option<PointerKind> {
        match s {
            "ptr" => Some(PointerKind::Ptr),
            "arr" => Some(PointerKind::Arr),
            "nt_arr" => Some(PointerKind::NtArr),
            "unchecked" => Some(PointerKind::Unchecked),
            _ => None,
        }
    }
}

impl fmt::Display for PointerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.spelling(Spelling::Short).unwrap_or("unchecked"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

impl Op {
    fn symbol(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
        }
    }

    fn prec(self) -> u8 {
        match self {
            Op::Add | Op::Sub => 1,
            Op::Mul | Op::Div => 2,
        }
    }
}

/// Arithmetic over identifiers and integer literals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Ident(String),
    Int(u64),
    Bin(Op, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn bin(op: Op, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Bin(op, ..) => op.prec(),
            _ => 3,
        }
    }

    pub fn identifiers(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Ident(s) => {
                out.insert(s.clone());
            }
            Expr::Int(_) => {}
            Expr::Bin(_, l, r) => {
                l.identifiers(out);
                r.identifiers(out);
            }
        }
    }

    /// Canonical text with commutative operands of `+` and `*` sorted and no
    /// whitespace. Two expressions that differ only by commutativity,
    /// associativity of a single commutative operator, or spacing agree.
    pub fn normalized(&self) -> String {
        self.norm().0
    }

    fn norm(&self) -> (String, u8) {
        match self {
            Expr::Ident(s) => (s.clone(), 3),
            Expr::Int(v) => (v.to_string(), 3),
            Expr::Bin(op @ (Op::Add | Op::Mul), ..) => {
                let mut operands = Vec::new();
                self.flatten(*op, &mut operands);
                let mut parts: Vec<String> = operands
                    .iter()
                    .map(|e| {
                        let (s, p) = e.norm();
                        if p <= op.prec() {
                            format!("({s})")
                        } else {
                            s
                        }
                    })
                    .collect();
                parts.sort();
                (parts.join(op.symbol()), op.prec())
            }
            Expr::Bin(op, l, r) => {
                let (ls, lp) = l.norm();
                let (rs, rp) = r.norm();
                let ls = if lp < op.prec() {
                    format!("({ls})")
                } else {
                    ls
                };
                let rs = if rp <= op.prec() {
                    format!("({rs})")
                } else {
                    rs
                };
                (format!("{ls}{}{rs}", op.symbol()), op.prec())
            }
        }
    }

    fn flatten<'a>(&'a self, op: Op, out: &mut Vec<&'a Expr>) {
        match self {
            Expr::Bin(o, l, r) if *o == op => {
                l.flatten(op, out);
                r.flatten(op, out);
            }
            e => out.push(e),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Ident(s) => f.write_str(s),
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Bin(op, l, r) => {
                if l.prec() < op.prec() {
                    write!(f, "({l})")?;
                } else {
                    write!(f, "{l}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if r.prec() <= op.prec() {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
        }
    }
}

/// A bounds annotation attached after the colon of a pointer declaration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub enum BoundsAnnotation {
    #[default]
    None,
    Count(Expr),
    ByteCount(Expr),
    Bounds(Expr, Expr),
}

impl BoundsAnnotation {
    pub fn is_none(&self) -> bool {
        matches!(self, BoundsAnnotation::None)
    }

    pub fn identifiers(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        match self {
            BoundsAnnotation::None => {}
            BoundsAnnotation::Count(e) | BoundsAnnotation::ByteCount(e) => e.identifiers(&mut out),
            BoundsAnnotation::Bounds(lo, hi) => {
                lo.identifiers(&mut out);
                hi.identifiers(&mut out);
            }
        }
        out
    }

    /// Whitespace-free canonical form used for comparisons.
    pub fn normalized(&self) -> String {
        match self {
            BoundsAnnotation::None => String::new(),
            BoundsAnnotation::Count(e) => format!("count({})", e.normalized()),
            BoundsAnnotation::ByteCount(e) => format!("byte_count({})", e.normalized()),
            BoundsAnnotation::Bounds(lo, hi) => {
                format!("bounds({},{})", lo.normalized(), hi.normalized())
            }
        }
    }
}

impl fmt::Display for BoundsAnnotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundsAnnotation::None => Ok(()),
            BoundsAnnotation::Count(e) => write!(f, "count({e})"),
            BoundsAnnotation::ByteCount(e) => write!(f, "byte_count({e})"),
            BoundsAnnotation::Bounds(lo, hi) => write!(f, "bounds({lo}, {hi})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundsError {
    #[error("syntax error in bounds annotation: {0}")]
    Syntax(String),
    #[error("a null-terminated array needs at least one element")]
    DegenerateArray,
}

struct ExprParser<'a> {
    toks: Vec<(TokKind, &'a str)>,
    pos: usize,
}

impl<'a> ExprParser<'a> {
    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).map(|t| t.1)
    }

    fn expect(&mut self, s: &str) -> Result<(), BoundsError> {
        match self.peek() {
            Some(t) if t == s => {
                self.pos += 1;
                Ok(())
            }
            other => Err(BoundsError::Syntax(format!(
                "expected `{s}`, found {}",
                other.map_or("end of input".to_string(), |t| format!("`{t}`"))
            ))),
        }
    }

    fn expr(&mut self) -> Result<Expr, BoundsError> {
        let mut lhs = self.term()?;
        while let Some(op) = self.peek().and_then(|t| match t {
            "+" => Some(Op::Add),
            "-" => Some(Op::Sub),
            _ => None,
        }) {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, BoundsError> {
        let mut lhs = self.atom()?;
        while let Some(op) = self.peek().and_then(|t| match t {
            "*" => Some(Op::Mul),
            "/" => Some(Op::Div),
            _ => None,
        }) {
            self.pos += 1;
            let rhs = self.atom()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<Expr, BoundsError> {
        let Some(&(kind, text)) = self.toks.get(self.pos) else {
            return Err(BoundsError::Syntax("unexpected end of expression".into()));
        };
        self.pos += 1;
        match kind {
            TokKind::Ident => {
                if self.peek() == Some("(") {
                    return Err(BoundsError::Syntax(format!(
                        "function call `{text}(...)` is not allowed in bounds"
                    )));
                }
                Ok(Expr::Ident(text.to_string()))
            }
            TokKind::Number => parse_int(text)
                .map(Expr::Int)
                .ok_or_else(|| BoundsError::Syntax(format!("bad integer literal `{text}`"))),
            TokKind::Punct if text == "(" => {
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            _ => Err(BoundsError::Syntax(format!("unexpected `{text}`"))),
        }
    }
}

fn parse_int(text: &str) -> Option<u64> {
    let t = text.trim_end_matches(['u', 'U', 'l', 'L']);
    if let Some(hex) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).ok()
    } else if t.len() > 1 && t.starts_with('0') {
        u64::from_str_radix(&t[1..], 8).ok()
    } else {
        t.parse().ok()
    }
}

fn lex_expr(text: &str) -> Result<Vec<(TokKind, &str)>, BoundsError> {
    let toks = tokenize(text).map_err(|e| BoundsError::Syntax(e.to_string()))?;
    Ok(toks.iter().map(|t| (t.kind, t.text(text))).collect())
}

/// Parses a bounds expression such as `longs * 4`.
pub fn parse_expr(text: &str) -> Result<Expr, BoundsError> {
    let mut p = ExprParser {
        toks: lex_expr(text)?,
        pos: 0,
    };
    let e = p.expr()?;
    match p.peek() {
        None => Ok(e),
        Some(t) => Err(BoundsError::Syntax(format!("trailing `{t}`"))),
    }
}

/// Parses annotation text (`count(e)`, `byte_count(e)`, `bounds(lo, hi)`);
/// empty text yields [`BoundsAnnotation::None`].
pub fn parse_bounds(text: &str) -> Result<BoundsAnnotation, BoundsError> {
    if text.trim().is_empty() {
        return Ok(BoundsAnnotation::None);
    }
    let mut p = ExprParser {
        toks: lex_expr(text)?,
        pos: 0,
    };
    let form = p.peek().unwrap_or_default().to_string();
    p.pos += 1;
    p.expect("(")?;
    let ann = match form.as_str() {
        "count" => BoundsAnnotation::Count(p.expr()?),
        "byte_count" => BoundsAnnotation::ByteCount(p.expr()?),
        "bounds" => {
            let lo = p.expr()?;
            p.expect(",")?;
            let hi = p.expr()?;
            BoundsAnnotation::Bounds(lo, hi)
        }
        other => {
            return Err(BoundsError::Syntax(format!(
                "unknown bounds form `{other}`"
            )));
        }
    };
    p.expect(")")?;
    match p.peek() {
        None => Ok(ann),
        Some(t) => Err(BoundsError::Syntax(format!("trailing `{t}`"))),
    }
}

/// Count of a null-terminated pointer derived from an array of
/// `array_size` elements: the terminator is not counted.
pub fn nt_count_from_array(array_size: u64) -> Result<BoundsAnnotation, BoundsError> {
    if array_size == 0 {
        return Err(BoundsError::DegenerateArray);
    }
    Ok(BoundsAnnotation::Count(Expr::Int(array_size - 1)))
}
