//! Arithmetic expressions for Dirichlet data.
//!
//! Grammar, loosest to tightest binding:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-'? power
//! power  := atom ('^' atom)?
//! atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Variables are `x1`..`x9` and `xn`, the latter always naming the last
//! coordinate of the evaluation point.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn variadic(self) -> bool {
        matches!(self, Func::Min | Func::Max)
    }
}

/// A coordinate reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// `x1`..`x9`, stored zero-based.
    Index(usize),
    /// `xn`
    Last,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// Parsed boundary-data expression.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryExpr {
    root: Node,
}

impl BoundaryExpr {
    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Evaluates at `point`; `xn` resolves to the last coordinate.
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        let v = eval_node(&self.root, point)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite)
        }
    }

    /// Largest explicit variable index used (one-based), if any.
    pub fn max_var_index(&self) -> Option<usize> {
        fn walk(node: &Node, acc: &mut Option<usize>) {
            match node {
                Node::Var(Var::Index(i)) => *acc = Some(acc.map_or(*i + 1, |a| a.max(*i + 1))),
                Node::Neg(e) => walk(e, acc),
                Node::Bin(_, l, r) => {
                    walk(l, acc);
                    walk(r, acc);
                }
                Node::Call(_, args) => args.iter().for_each(|a| walk(a, acc)),
                Node::Num(_) | Node::Var(Var::Last) => {}
            }
        }
        let mut acc = None;
        walk(&self.root, &mut acc);
        acc
    }
}

fn eval_node(node: &Node, x: &[f64]) -> Result<f64> {
    Ok(match node {
        Node::Num(v) => *v,
        Node::Var(Var::Index(i)) => *x.get(*i).ok_or(Error::VariableOutOfRange {
            index: i + 1,
            dim: x.len(),
        })?,
        Node::Var(Var::Last) => *x.last().ok_or(Error::VariableOutOfRange { index: 0, dim: 0 })?,
        Node::Neg(e) => -eval_node(e, x)?,
        Node::Bin(op, l, r) => {
            let a = eval_node(l, x)?;
            let b = eval_node(r, x)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(Error::DivisionByZero);
                    }
                    a / b
                }
                BinOp::Pow => pow(a, b),
            }
        }
        Node::Call(f, args) => {
            let vals = args
                .iter()
                .map(|a| eval_node(a, x))
                .collect::<Result<Vec<_>>>()?;
            match f {
                Func::Sin => vals[0].sin(),
                Func::Cos => vals[0].cos(),
                Func::Exp => vals[0].exp(),
                Func::Abs => vals[0].abs(),
                Func::Min => vals.iter().copied().fold(f64::INFINITY, f64::min),
                Func::Max => vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        }
    })
}

fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

/// Canonical printing: every compound node is parenthesized, so the output
/// reparses to the same tree.
impl fmt::Display for BoundaryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, f)
    }
}

fn write_node(node: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match node {
        Node::Num(v) => write!(f, "{v:?}"),
        Node::Var(Var::Index(i)) => write!(f, "x{}", i + 1),
        Node::Var(Var::Last) => write!(f, "xn"),
        Node::Neg(e) => {
            write!(f, "(-")?;
            write_node(e, f)?;
            write!(f, ")")
        }
        Node::Bin(op, l, r) => {
            let sym = match op {
                BinOp::Add => " + ",
                BinOp::Sub => " - ",
                BinOp::Mul => " * ",
                BinOp::Div => " / ",
                BinOp::Pow => "^",
            };
            write!(f, "(")?;
            write_node(l, f)?;
            write!(f, "{sym}")?;
            write_node(r, f)?;
            write!(f, ")")
        }
        Node::Call(func, args) => {
            write!(f, "{}(", func.name())?;
            for (k, a) in args.iter().enumerate() {
                if k > 0 {
                    write!(f, ", ")?;
                }
                write_node(a, f)?;
            }
            write!(f, ")")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::End => "end of input".to_string(),
        other => format!("`{}`", tok_char(other)),
    }
}

fn tok_char(t: &Tok) -> char {
    match t {
        Tok::Plus => '+',
        Tok::Minus => '-',
        Tok::Star => '*',
        Tok::Slash => '/',
        Tok::Caret => '^',
        Tok::LParen => '(',
        Tok::RParen => ')',
        Tok::Comma => ',',
        _ => '?',
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let simple = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = simple {
            out.push((t, start));
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
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
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| Error::Syntax {
                offset: start,
                message: format!("malformed number `{lit}`"),
            })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else {
            let ch = text[start..].chars().next().unwrap_or('?');
            return Err(Error::Syntax {
                offset: start,
                message: format!("unexpected character `{ch}`"),
            });
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> Error {
        Error::Syntax {
            offset: self.offset(),
            message: format!("expected {wanted}, found {}", describe(self.peek())),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Node> {
        if *self.peek() == Tok::Minus {
            self.bump();
            Ok(Node::Neg(Box::new(self.power()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exp = self.atom()?;
            Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Node::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let offset = self.offset();
                self.bump();
                if let Some(var) = parse_var(&name) {
                    return Ok(Node::Var(var));
                }
                let Some(func) = Func::from_name(&name) else {
                    return Err(Error::UnknownIdentifier { name, offset });
                };
                self.expect(Tok::LParen)?;
                let mut args = vec![self.expr()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.expr()?);
                }
                if !func.variadic() && args.len() != 1 {
                    return Err(Error::Syntax {
                        offset,
                        message: format!("`{name}` takes exactly one argument"),
                    });
                }
                self.expect(Tok::RParen)?;
                Ok(Node::Call(func, args))
            }
            _ => Err(self.unexpected("a number, variable, function or `(`")),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{}`", tok_char(&tok))))
        }
    }
}

fn parse_var(name: &str) -> Option<Var> {
    let rest = name.strip_prefix('x')?;
    if rest == "n" {
        return Some(Var::Last);
    }
    match rest.as_bytes() {
        [d @ b'1'..=b'9'] => Some(Var::Index((d - b'1') as usize)),
        _ => None,
    }
}

/// Parses `text` into a [`BoundaryExpr`].
pub fn parse_expr(text: &str) -> Result<BoundaryExpr> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let root = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(BoundaryExpr { root })
}

impl std::str::FromStr for BoundaryExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_expr(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(text: &str, x: &[f64]) -> f64 {
        parse_expr(text).unwrap().eval(x).unwrap()
    }

    #[test]
    fn substitution_examples() {
        assert_eq!(ev("x1^2 - xn^2", &[1.0, 0.0]), 1.0);
        assert_eq!(ev("2 + x1", &[-1.0, 0.0]), 1.0);
    }

    #[test]
    fn dangling_operator_reports_offset() {
        match parse_expr("x1 + ") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("-x1^2", &[3.0, 0.0]), -9.0);
        assert_eq!(ev("2*3^2", &[0.0, 0.0]), 18.0);
        assert_eq!(ev("1 - 2 - 3", &[0.0, 0.0]), -4.0);
        assert_eq!(ev("8 / 2 / 2", &[0.0, 0.0]), 2.0);
        assert_eq!(ev("2 + 3 * 4", &[0.0, 0.0]), 14.0);
        assert_eq!(ev("(2 + 3) * 4", &[0.0, 0.0]), 20.0);
        assert_eq!(ev("-2 * -3", &[0.0, 0.0]), 6.0);
    }

    #[test]
    fn functions_and_variables() {
        assert!((ev("exp(0.5*xn)*cos(0.5*x1)", &[0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert_eq!(ev("max(x1, xn, 0.25)", &[0.1, 0.2]), 0.25);
        assert_eq!(ev("min(x1, xn)", &[0.1, 0.2]), 0.1);
        assert_eq!(ev("abs(x1 - 1)", &[0.0, 0.0]), 1.0);
        assert_eq!(ev("x3 + xn", &[1.0, 2.0, 3.0]), 6.0);
        assert_eq!(ev("1.5e-1 + .5", &[0.0]), 0.65);
        assert!((ev("sin(x1)", &[0.3, 0.0]) - 0.3f64.sin()).abs() < 1e-16);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_expr("y + 1"),
            Err(Error::UnknownIdentifier { ref name, offset: 0 }) if name == "y"
        ));
        assert!(matches!(parse_expr("x0"), Err(Error::UnknownIdentifier { .. })));
        assert!(matches!(parse_expr("sin(1, 2)"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expr("(1 + 2"), Err(Error::Syntax { offset: 6, .. })));
        assert!(matches!(parse_expr("1 2"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse_expr("2^-1"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse_expr("1 $ 2"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse_expr("   "), Err(Error::Syntax { .. })));
        let e = parse_expr("1 / (x1 - 1)").unwrap();
        assert_eq!(e.eval(&[1.0, 0.0]), Err(Error::DivisionByZero));
        let e = parse_expr("x3").unwrap();
        assert!(matches!(e.eval(&[1.0, 0.0]), Err(Error::VariableOutOfRange { .. })));
    }

    fn arb_node() -> impl Strategy<Value = Node> {
        let leaf = prop_oneof![
            (0u32..1000).prop_map(|k| Node::Num(k as f64 / 8.0)),
            (0usize..2).prop_map(|i| Node::Var(Var::Index(i))),
            Just(Node::Var(Var::Last)),
        ];
        leaf.prop_recursive(4, 32, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Node::Neg(Box::new(e))),
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
                    .prop_map(|(op, l, r)| Node::Bin(op, Box::new(l), Box::new(r))),
                (
                    prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Abs)],
                    inner.clone()
                )
                    .prop_map(|(f, a)| Node::Call(f, vec![a])),
                prop::collection::vec(inner, 1..3).prop_map(|a| Node::Call(Func::Max, a)),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn print_parse_round_trip(root in arb_node()) {
            let e = BoundaryExpr { root };
            let printed = e.to_string();
            let reparsed = parse_expr(&printed).unwrap();
            prop_assert_eq!(&reparsed, &e);
            prop_assert_eq!(reparsed.to_string(), printed);
        }
    }
}
