//! Arithmetic expressions over the spatial coordinates `x1`, `x2`.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | ident | ident '(' sum ')' | '(' sum ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so
//! `-x1^2` is `-(x1^2)` and `2^-1` is `0.5`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

/// Expression tree. Variables are indexed from zero (`x1` is `Var(0)`).
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => x.get(*i).copied().unwrap_or(f64::NAN),
            Expr::Neg(e) => -e.eval(x),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(x)),
        }
    }

    pub fn eval2(&self, x1: f64, x2: f64) -> f64 {
        self.eval(&[x1, x2])
    }

    /// Highest variable index used, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(e) | Expr::Call(_, e) => e.arity(),
            Expr::Bin(_, a, b) => a.arity().max(b.arity()),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                let mag = if v.is_infinite() {
                    "1e999".to_string()
                } else {
                    format!("{:?}", v.abs())
                };
                if v.is_sign_negative() {
                    write!(f, "(-{mag})")
                } else {
                    f.write_str(&mag)
                }
            }
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// A parsed coefficient expression together with its source text.
#[derive(Clone, Debug)]
pub struct CoeffExpr {
    source: String,
    tree: Expr,
}

impl CoeffExpr {
    pub fn parse(src: &str) -> Result<Self> {
        let tree = Parser::new(src).parse()?;
        Ok(Self {
            source: src.trim().to_string(),
            tree,
        })
    }

    pub fn constant(v: f64) -> Self {
        Self {
            source: format!("{v:?}"),
            tree: Expr::Num(v),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }
    pub fn tree(&self) -> &Expr {
        &self.tree
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        self.tree.eval2(x1, x2)
    }

    /// Canonical fully parenthesized form; parses back to the same tree.
    pub fn canonical(&self) -> String {
        self.tree.to_string()
    }
}

impl PartialEq for CoeffExpr {
    fn eq(&self, other: &Self) -> bool {
        self.tree == other.tree
    }
}

impl FromStr for CoeffExpr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl fmt::Display for CoeffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

pub fn parse_expr(src: &str) -> Result<CoeffExpr> {
    CoeffExpr::parse(src)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            toks: Vec::new(),
            pos: 0,
        }
    }

    fn syntax(&self, position: usize, message: impl Into<String>) -> Error {
        Error::Syntax {
            position,
            message: message.into(),
        }
    }

    fn lex(&mut self) -> Result<()> {
        let bytes = self.src.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            if c.is_ascii_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() || c == '.' {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &self.src[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| self.syntax(start, format!("malformed number '{text}'")))?;
                self.toks.push((start, Tok::Num(v)));
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                self.toks
                    .push((start, Tok::Ident(self.src[start..i].to_string())));
            } else if "+-*/^()".contains(c) {
                self.toks.push((i, Tok::Sym(c)));
                i += 1;
            } else {
                let ch = self.src[i..].chars().next().unwrap_or('?');
                return Err(self.syntax(i, format!("unexpected character '{ch}'")));
            }
        }
        self.toks.push((self.src.len(), Tok::End));
        Ok(())
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn at(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax(self.at(), format!("expected '{c}'")))
        }
    }

    fn parse(mut self) -> Result<Expr> {
        self.lex()?;
        if *self.peek() == Tok::End {
            return Err(self.syntax(0, "empty expression"));
        }
        let e = self.sum()?;
        if *self.peek() != Tok::End {
            return Err(self.syntax(self.at(), "unexpected trailing input"));
        }
        Ok(e)
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.product()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Sym('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if *self.peek() == Tok::Sym('+') {
            self.bump();
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if *self.peek() == Tok::Sym('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let start = self.at();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Sym('(') => {
                let e = self.sum()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "exp" => Some(Func::Exp),
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "sqrt" => Some(Func::Sqrt),
                    _ => None,
                };
                if let Some(func) = func {
                    if *self.peek() != Tok::Sym('(') {
                        return Err(self.syntax(self.at(), format!("expected '(' after {name}")));
                    }
                    self.bump();
                    let arg = self.sum()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                match name.as_str() {
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "x1" => Ok(Expr::Var(0)),
                    "x2" | "xn" => Ok(Expr::Var(1)),
                    _ => Err(Error::UnknownIdentifier {
                        position: start,
                        name,
                    }),
                }
            }
            Tok::End => Err(self.syntax(start, "unexpected end of input")),
            Tok::Sym(c) => Err(self.syntax(start, format!("unexpected '{c}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(s: &str, x1: f64, x2: f64) -> f64 {
        parse_expr(s).unwrap().eval(x1, x2)
    }

    #[test]
    fn hand_evaluated_values() {
        assert_eq!(ev("1 + 0.5*x1", 1.0, 0.0), 1.5);
        assert_eq!(ev("exp(-x2)", 0.0, 0.0), 1.0);
        assert_eq!(ev("2*x1^2 - x2^2", 1.0, 1.0), 1.0);
    }

    #[test]
    fn power_binds_tighter_than_unary_minus() {
        assert_eq!(ev("-x1^2", 3.0, 0.0), -9.0);
        assert_eq!(ev("2^-1", 0.0, 0.0), 0.5);
        assert_eq!(ev("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(ev("(-2)^2", 0.0, 0.0), 4.0);
    }

    #[test]
    fn left_associative_arithmetic() {
        assert_eq!(ev("8 - 3 - 2", 0.0, 0.0), 3.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
    }

    #[test]
    fn functions_and_constants() {
        assert!((ev("sin(pi/2) + cos(0) + sqrt(4)", 0.0, 0.0) - 4.0).abs() < 1e-15);
        assert_eq!(ev("1.5e1 + 2E-1", 0.0, 0.0), 15.2);
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_expr("1 + * 2") {
            Err(Error::Syntax { position, .. }) => assert_eq!(position, 4),
            other => panic!("{other:?}"),
        }
        match parse_expr("(1 + x1") {
            Err(Error::Syntax { position, .. }) => assert_eq!(position, 7),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_expr(""), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expr("1 $ 2"), Err(Error::Syntax { position: 2, .. })));
    }

    #[test]
    fn unknown_identifier_is_named() {
        match parse_expr("1 + y") {
            Err(Error::UnknownIdentifier { position, name }) => {
                assert_eq!(position, 4);
                assert_eq!(name, "y");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn canonical_printing_round_trips() {
        for s in ["-x1^2", "2^-1", "exp(-x2) * (1 + 0.1*x1)", "1/3", "1e-300 + x2"] {
            let a = parse_expr(s).unwrap();
            let b = parse_expr(&a.canonical()).unwrap();
            assert_eq!(a, b, "{s} -> {}", a.canonical());
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-10.0f64..10.0).prop_map(Expr::Num),
            (0usize..2).prop_map(Expr::Var),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
                (
                    prop_oneof![
                        Just(Func::Exp),
                        Just(Func::Sin),
                        Just(Func::Cos),
                        Just(Func::Sqrt)
                    ],
                    inner
                )
                    .prop_map(|(f, a)| Expr::Call(f, Box::new(a))),
            ]
        })
    }

    // Negative literals print as `-1.0`, which reparses as Neg(Num(1.0)); the
    // tree identity is therefore checked after one normalizing pass.
    proptest! {
        #[test]
        fn parse_print_parse_is_identity(e in arb_expr()) {
            let once = parse_expr(&e.to_string()).unwrap();
            let twice = parse_expr(&once.canonical()).unwrap();
            prop_assert_eq!(once.tree(), twice.tree());
        }

        #[test]
        fn printed_tree_evaluates_identically(e in arb_expr(), x1 in -1.0f64..1.0, x2 in 0.0f64..1.0) {
            let reparsed = parse_expr(&e.to_string()).unwrap();
            let a = e.eval(&[x1, x2]);
            let b = reparsed.eval(x1, x2);
            prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }
}
