//! Coefficient expressions `c_α(x)`.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary ('*' unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' UINT)?
//! atom   := NUMBER | 'pi' | 'x' DIGITS | IDENT | ('sin' | 'cos') '(' expr ')' | '(' expr ')'
//! ```
//!
//! `x1 … xd` are coordinates (1-based). Any other identifier is a named
//! parameter that must be bound with [`Expr::bind`] before evaluation.
//! Printing emits the minimal parenthesization, and `parse(print(e)) == e`.

use core::fmt;

use crate::prelude::*;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Zero-based coordinate index; printed as `x{i+1}`.
    Coord(usize),
    Param(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    /// Replaces named parameters by constants; unknown names are left in place.
    pub fn bind(&self, params: &[(&str, f64)]) -> Expr {
        use Expr::*;
        match self {
            Param(name) => match params.iter().find(|(n, _)| n == name) {
                Some((_, v)) => Const(*v),
                None => self.clone(),
            },
            Const(_) | Coord(_) => self.clone(),
            Neg(a) => Neg(Box::new(a.bind(params))),
            Add(a, b) => Add(Box::new(a.bind(params)), Box::new(b.bind(params))),
            Sub(a, b) => Sub(Box::new(a.bind(params)), Box::new(b.bind(params))),
            Mul(a, b) => Mul(Box::new(a.bind(params)), Box::new(b.bind(params))),
            Sin(a) => Sin(Box::new(a.bind(params))),
            Cos(a) => Cos(Box::new(a.bind(params))),
            Pow(a, k) => Pow(Box::new(a.bind(params)), *k),
        }
    }

    /// First unbound parameter name, if any.
    pub fn free_param(&self) -> Option<&str> {
        use Expr::*;
        match self {
            Param(name) => Some(name),
            Const(_) | Coord(_) => None,
            Neg(a) | Sin(a) | Cos(a) | Pow(a, _) => a.free_param(),
            Add(a, b) | Sub(a, b) | Mul(a, b) => a.free_param().or_else(|| b.free_param()),
        }
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_coord(&self) -> Option<usize> {
        use Expr::*;
        match self {
            Coord(i) => Some(*i),
            Const(_) | Param(_) => None,
            Neg(a) | Sin(a) | Cos(a) | Pow(a, _) => a.max_coord(),
            Add(a, b) | Sub(a, b) | Mul(a, b) => match (a.max_coord(), b.max_coord()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    /// Evaluates at `x`. Unbound parameters evaluate to NaN.
    pub fn eval(&self, x: &[f64]) -> f64 {
        use Expr::*;
        match self {
            Const(c) => *c,
            Coord(i) => x.get(*i).copied().unwrap_or(f64::NAN),
            Param(_) => f64::NAN,
            Neg(a) => -a.eval(x),
            Add(a, b) => a.eval(x) + b.eval(x),
            Sub(a, b) => a.eval(x) - b.eval(x),
            Mul(a, b) => a.eval(x) * b.eval(x),
            Sin(a) => a.eval(x).sin(),
            Cos(a) => a.eval(x).cos(),
            Pow(a, k) => powi(a.eval(x), *k),
        }
    }

    /// Folds coordinate-free subtrees into constants.
    pub fn folded(&self) -> Expr {
        use Expr::*;
        let e = match self {
            Const(_) | Coord(_) | Param(_) => return self.clone(),
            Neg(a) => Neg(Box::new(a.folded())),
            Add(a, b) => Add(Box::new(a.folded()), Box::new(b.folded())),
            Sub(a, b) => Sub(Box::new(a.folded()), Box::new(b.folded())),
            Mul(a, b) => Mul(Box::new(a.folded()), Box::new(b.folded())),
            Sin(a) => Sin(Box::new(a.folded())),
            Cos(a) => Cos(Box::new(a.folded())),
            Pow(a, k) => Pow(Box::new(a.folded()), *k),
        };
        if e.max_coord().is_none() && e.free_param().is_none() {
            Const(e.eval(&[]))
        } else {
            e
        }
    }

    fn precedence(&self) -> u8 {
        use Expr::*;
        match self {
            Add(..) | Sub(..) => 1,
            Mul(..) => 2,
            Neg(_) => 3,
            Const(c) if c.is_sign_negative() => 3,
            Pow(..) => 4,
            _ => 5,
        }
    }
}

fn powi(base: f64, k: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..k {
        acc *= base;
    }
    acc
}

struct Wrap<'a>(&'a Expr, u8);

impl fmt::Display for Wrap<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.precedence() < self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Expr::*;
        match self {
            Const(c) => write!(f, "{c:?}"),
            Coord(i) => write!(f, "x{}", i + 1),
            Param(name) => f.write_str(name),
            Neg(a) => write!(f, "-{}", Wrap(a, 3)),
            Add(a, b) => write!(f, "{} + {}", Wrap(a, 1), Wrap(b, 2)),
            Sub(a, b) => write!(f, "{} - {}", Wrap(a, 1), Wrap(b, 2)),
            Mul(a, b) => write!(f, "{}*{}", Wrap(a, 2), Wrap(b, 3)),
            Sin(a) => write!(f, "sin({a})"),
            Cos(a) => write!(f, "cos({a})"),
            Pow(a, k) => write!(f, "{}^{k}", Wrap(a, 5)),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Syntax {
            column: self.pos + 1,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while self.eat(b'*') {
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(match self.unary()? {
                Expr::Const(c) if !c.is_sign_negative() => Expr::Const(-c),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.error("expected a non-negative integer exponent"));
            }
            let digits = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
            let k: u32 = digits.parse().map_err(|_| self.error("exponent out of range"))?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.error("unexpected end of expression")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        let text = core::str::from_utf8(&s[start..self.pos]).unwrap_or("");
        text.parse::<f64>().map(Expr::Const).map_err(|_| Error::Syntax {
            column: start + 1,
            message: "malformed number".to_string(),
        })
    }

    fn identifier(&mut self) -> Result<Expr> {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_alphanumeric() || s[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = core::str::from_utf8(&s[start..self.pos]).unwrap_or("");
        match name {
            "pi" => Ok(Expr::Const(core::f64::consts::PI)),
            "sin" | "cos" => {
                if !self.eat(b'(') {
                    return Err(self.error("expected `(` after function name"));
                }
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(if name == "sin" {
                    Expr::Sin(Box::new(arg))
                } else {
                    Expr::Cos(Box::new(arg))
                })
            }
            _ => {
                if let Some(idx) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                    if idx == 0 {
                        return Err(Error::Syntax {
                            column: start + 1,
                            message: "coordinates are numbered from x1".to_string(),
                        });
                    }
                    Ok(Expr::Coord(idx - 1))
                } else {
                    Ok(Expr::Param(name.to_string()))
                }
            }
        }
    }
}

/// A validated coefficient function on `R^d`: every parameter bound and every
/// coordinate within range.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFn {
    expr: Expr,
    constant: Option<f64>,
}

impl CoefficientFn {
    pub fn new(expr: Expr, dim: usize) -> Result<Self> {
        if let Some(name) = expr.free_param() {
            return Err(Error::UnboundVariable(name.to_string()));
        }
        if let Some(i) = expr.max_coord() {
            if i >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: i + 1,
                });
            }
        }
        let constant = match expr.folded() {
            Expr::Const(c) => Some(c),
            _ => None,
        };
        Ok(Self { expr, constant })
    }

    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        Self::new(Expr::parse(text)?, dim)
    }

    pub fn constant(c: f64) -> Self {
        Self {
            expr: Expr::Const(c),
            constant: Some(c),
        }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    pub fn is_zero(&self) -> bool {
        self.constant == Some(0.0)
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.constant {
            Some(c) => c,
            None => self.expr.eval(x),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match self.constant {
            Some(c) => Self::constant(c * factor),
            None => Self {
                expr: Expr::Mul(Box::new(Expr::Const(factor)), Box::new(self.expr.clone())),
                constant: None,
            },
        }
    }

    pub fn plus(&self, other: &CoefficientFn) -> Self {
        match (self.constant, other.constant) {
            (Some(a), Some(b)) => Self::constant(a + b),
            _ => Self {
                expr: Expr::Add(Box::new(self.expr.clone()), Box::new(other.expr.clone())),
                constant: None,
            },
        }
    }
}

impl fmt::Display for CoefficientFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

#[cfg(feature = "serde")]
mod serde_impl {
    use super::*;
    use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

    impl Serialize for CoefficientFn {
        fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
            s.collect_str(&self.expr)
        }
    }

    impl<'de> Deserialize<'de> for CoefficientFn {
        fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
            let text = String::deserialize(d)?;
            let expr = Expr::parse(&text).map_err(de::Error::custom)?;
            // Dimension is checked again when the owning term is validated.
            CoefficientFn::new(expr, usize::MAX).map_err(de::Error::custom)
        }
    }
}
