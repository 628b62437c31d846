//! Small expression language for vector fields and envelope parameters.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' ['-'] integer)?
//! atom  := number | 'x' index | ('sin' | 'cos') '(' expr ')' | '(' expr ')'
//! ```
//!
//! Variables are `x1 … xn` (1-based). Every expression also has an interval
//! extension used to bound envelope parameters over a box.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Sin(Box<Node>),
    Cos(Box<Node>),
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    source: String,
    root: Node,
    dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    fn add(self, o: Self) -> Self {
        Self::new(self.lo + o.lo, self.hi + o.hi)
    }

    fn sub(self, o: Self) -> Self {
        Self::new(self.lo - o.hi, self.hi - o.lo)
    }

    fn mul(self, o: Self) -> Self {
        let p = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        Self::new(
            p.iter().copied().fold(f64::INFINITY, f64::min),
            p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    }

    fn recip(self) -> Result<Self> {
        if self.contains(0.0) {
            return Err(Error::InvalidBox("division by an interval containing zero".into()));
        }
        Ok(Self::new(1.0 / self.hi, 1.0 / self.lo))
    }

    fn powi(self, e: i32) -> Result<Self> {
        if e < 0 {
            return self.recip()?.powi(-e);
        }
        if e == 0 {
            return Ok(Self::point(1.0));
        }
        let (a, b) = (self.lo.powi(e), self.hi.powi(e));
        if e % 2 == 1 {
            return Ok(Self::new(a, b));
        }
        if self.contains(0.0) {
            Ok(Self::new(0.0, a.max(b)))
        } else {
            Ok(Self::new(a.min(b), a.max(b)))
        }
    }

    /// Exact range of `sin` over the interval.
    fn sin(self) -> Self {
        Self::shifted_sin(self, 0.0)
    }

    /// `cos x = sin(x + π/2)`.
    fn cos(self) -> Self {
        Self::shifted_sin(self, FRAC_PI_2)
    }

    fn shifted_sin(iv: Self, shift: f64) -> Self {
        let (lo, hi) = (iv.lo + shift, iv.hi + shift);
        if hi - lo >= 2.0 * PI {
            return Self::new(-1.0, 1.0);
        }
        let (a, b) = (lo.sin(), hi.sin());
        let mut out = Self::new(a.min(b), a.max(b));
        // maxima at π/2 + 2πj, minima at −π/2 + 2πj
        let hits = |c: f64| {
            let j = ((lo - c) / (2.0 * PI)).ceil();
            c + 2.0 * PI * j <= hi
        };
        if hits(FRAC_PI_2) {
            out.hi = 1.0;
        }
        if hits(-FRAC_PI_2) {
            out.lo = -1.0;
        }
        out
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            position: self.pos,
            message: msg.into(),
        })
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

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let neg = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected integer exponent");
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        let Ok(e) = text.parse::<i32>() else {
            return self.err("exponent too large");
        };
        Ok(Node::Pow(Box::new(base), if neg { -e } else { e }))
    }

    fn number(&mut self) -> Result<Node> {
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
        let text = std::str::from_utf8(&s[start..self.pos]).expect("ascii number");
        match text.parse::<f64>() {
            Ok(v) => Ok(Node::Num(v)),
            Err(_) => {
                self.pos = start;
                self.err(format!("malformed number '{text}'"))
            }
        }
    }

    fn ident(&mut self) -> &'a str {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).expect("ascii identifier")
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            None => self.err("unexpected end of input"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return self.err("expected ')'");
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                let id = self.ident();
                match id {
                    "sin" | "cos" => {
                        if !self.eat(b'(') {
                            return self.err(format!("expected '(' after {id}"));
                        }
                        let arg = Box::new(self.expr()?);
                        if !self.eat(b')') {
                            return self.err("expected ')'");
                        }
                        Ok(if id == "sin" { Node::Sin(arg) } else { Node::Cos(arg) })
                    }
                    _ => {
                        let idx = id
                            .strip_prefix('x')
                            .map(|d| d.trim_start_matches('_'))
                            .and_then(|d| d.parse::<usize>().ok());
                        match idx {
                            Some(i) if i >= 1 && i <= self.dim => Ok(Node::Var(i - 1)),
                            Some(i) => {
                                self.pos = start;
                                self.err(format!("variable x{i} outside x1..x{}", self.dim))
                            }
                            None => {
                                self.pos = start;
                                self.err(format!("unknown identifier '{id}'"))
                            }
                        }
                    }
                }
            }
            Some(c) => self.err(format!("unexpected character '{}'", c as char)),
        }
    }
}

fn eval(node: &Node, x: &[f64]) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Var(i) => x[*i],
        Node::Neg(a) => -eval(a, x),
        Node::Add(a, b) => eval(a, x) + eval(b, x),
        Node::Sub(a, b) => eval(a, x) - eval(b, x),
        Node::Mul(a, b) => eval(a, x) * eval(b, x),
        Node::Div(a, b) => eval(a, x) / eval(b, x),
        Node::Pow(a, e) => eval(a, x).powi(*e),
        Node::Sin(a) => eval(a, x).sin(),
        Node::Cos(a) => eval(a, x).cos(),
    }
}

fn eval_interval(node: &Node, x: &[Interval]) -> Result<Interval> {
    Ok(match node {
        Node::Num(v) => Interval::point(*v),
        Node::Var(i) => x[*i],
        Node::Neg(a) => {
            let v = eval_interval(a, x)?;
            Interval::new(-v.hi, -v.lo)
        }
        Node::Add(a, b) => eval_interval(a, x)?.add(eval_interval(b, x)?),
        Node::Sub(a, b) => eval_interval(a, x)?.sub(eval_interval(b, x)?),
        Node::Mul(a, b) => {
            // x*x has the tighter range of x^2
            if a == b {
                eval_interval(a, x)?.powi(2)?
            } else {
                eval_interval(a, x)?.mul(eval_interval(b, x)?)
            }
        }
        Node::Div(a, b) => eval_interval(a, x)?.mul(eval_interval(b, x)?.recip()?),
        Node::Pow(a, e) => eval_interval(a, x)?.powi(*e)?,
        Node::Sin(a) => eval_interval(a, x)?.sin(),
        Node::Cos(a) => eval_interval(a, x)?.cos(),
    })
}

impl Expression {
    /// Parses `text` over variables `x1 … x{dim}`.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
            dim,
        };
        let root = p.expr()?;
        if p.peek().is_some() {
            return p.err("unexpected trailing input");
        }
        Ok(Self {
            source: text.to_string(),
            root,
            dim,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        eval(&self.root, x)
    }

    /// Enclosure of the range over the box `x`.
    pub fn eval_interval(&self, x: &[Interval]) -> Result<Interval> {
        eval_interval(&self.root, x)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn precedence() {
        let e = Expression::parse("1 + 2*3 - -x1^2", 1).unwrap();
        assert_abs_diff_eq!(e.eval(&[3.0]), 16.0);
        let e = Expression::parse("-x1^2", 1).unwrap();
        assert_abs_diff_eq!(e.eval(&[3.0]), -9.0);
        let e = Expression::parse("x1*(x1^2 - 0.25)", 1).unwrap();
        assert_abs_diff_eq!(e.eval(&[0.5]), 0.0);
        let e = Expression::parse("0.5*((x1 - x1^3) - x3)", 3).unwrap();
        assert_abs_diff_eq!(e.eval(&[2.0, 0.0, 1.0]), -3.5);
        let e = Expression::parse("2.5e-1 * sin(x2) + cos(0)", 2).unwrap();
        assert_abs_diff_eq!(e.eval(&[0.0, FRAC_PI_2]), 1.25);
        let e = Expression::parse("x1 / x2 / 2", 2).unwrap();
        assert_abs_diff_eq!(e.eval(&[8.0, 2.0]), 2.0);
    }

    #[test]
    fn parse_errors_carry_position() {
        match Expression::parse("x1 + * 2", 1) {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 5),
            other => panic!("{other:?}"),
        }
        match Expression::parse("x1 + x4", 3) {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 5),
            other => panic!("{other:?}"),
        }
        assert!(Expression::parse("exp(x1)", 1).is_err());
        assert!(Expression::parse("x1^1.5", 1).is_err());
        assert!(Expression::parse("(x1", 1).is_err());
        assert!(Expression::parse("x1 x1", 1).is_err());
    }

    #[test]
    fn interval_powers_and_trig() {
        let e = Expression::parse("x1^2", 1).unwrap();
        let r = e.eval_interval(&[Interval::new(-2.0, 2.0)]).unwrap();
        assert_eq!((r.lo, r.hi), (0.0, 4.0));
        let r = e.eval_interval(&[Interval::new(1.0, 3.0)]).unwrap();
        assert_eq!((r.lo, r.hi), (1.0, 9.0));
        let s = Expression::parse("sin(x1)", 1).unwrap();
        let r = s.eval_interval(&[Interval::new(-0.2, 1.0)]).unwrap();
        assert_abs_diff_eq!(r.lo, (-0.2f64).sin());
        assert_abs_diff_eq!(r.hi, 1.0f64.sin());
        let c = Expression::parse("cos(x1)", 1).unwrap();
        let r = c.eval_interval(&[Interval::new(-0.2, 1.0)]).unwrap();
        assert_abs_diff_eq!(r.lo, 1.0f64.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.hi, 1.0, epsilon = 1e-15);
        let r = s.eval_interval(&[Interval::new(1.0, 5.0)]).unwrap();
        assert_eq!((r.lo, r.hi), (-1.0, 1.0));
        assert!(Expression::parse("1/x1", 1)
            .unwrap()
            .eval_interval(&[Interval::new(-1.0, 1.0)])
            .is_err());
    }

    proptest! {
        #[test]
        fn interval_encloses_samples(lo in -3.0f64..3.0, w in 0.0f64..4.0, t in 0.0f64..1.0) {
            let hi = lo + w;
            let x = lo + t * w;
            for src in ["x1^2", "x1^3 - 0.25*x1", "sin(x1)", "cos(x1)", "x1*x1 - 2*x1", "sin(2*x1)*cos(x1)"] {
                let e = Expression::parse(src, 1).unwrap();
                let r = e.eval_interval(&[Interval::new(lo, hi)]).unwrap();
                let v = e.eval(&[x]);
                prop_assert!(r.lo - 1e-12 <= v && v <= r.hi + 1e-12, "{src} at {x}: {v} not in [{}, {}]", r.lo, r.hi);
            }
        }
    }
}
