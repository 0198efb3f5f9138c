//! Minimal arithmetic expression language for metric parameters and fields.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom (('^' | '**') unary)?
//! atom  := number | 'pi' | xK | yK | func '(' expr ')' | '(' expr ')'
//! func  := sqrt | exp | ln | log | sin | cos | tan
//! ```
//!
//! Variables are `x1..xn` (position) and `y1..yn` (direction), 1-based.

use std::fmt;

use crate::diffcore::Scalar;
use crate::error::{FinslerError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X(usize),
    Y(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.expr()?;
        match parser.peek() {
            None => Ok(expr),
            Some(tok) => Err(FinslerError::Parse {
                column: tok.column,
                message: format!("unexpected `{}`", tok.kind),
            }),
        }
    }

    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn x(i: usize) -> Expr {
        Expr::Var(Var::X(i))
    }

    pub fn y(i: usize) -> Expr {
        Expr::Var(Var::Y(i))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    /// Largest 1-based variable index, used to validate against the dimension.
    pub fn max_var_index(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(Var::X(i) | Var::Y(i)) => *i,
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var_index(),
            Expr::Bin(_, a, b) => a.max_var_index().max(b.max_var_index()),
        }
    }

    pub fn depends_on_y(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(Var::X(_)) => false,
            Expr::Var(Var::Y(_)) => true,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on_y(),
            Expr::Bin(_, a, b) => a.depends_on_y() || b.depends_on_y(),
        }
    }

    /// Fails with a parse-style error if the expression mentions variables beyond `n`.
    pub fn check_dimension(&self, n: usize) -> Result<()> {
        let max = self.max_var_index();
        if max > n {
            return Err(FinslerError::InvalidModel(format!(
                "`{self}` uses variable index {max} but the dimension is {n}"
            )));
        }
        Ok(())
    }

    /// Evaluates at `(x, y)`; any non-finite intermediate is reported with the
    /// sub-expression that produced it.
    pub fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        let out = match self {
            Expr::Num(v) => x.first().or(y.first()).expect("at least one variable").lift(*v),
            Expr::Var(Var::X(i)) => x[*i - 1].clone(),
            Expr::Var(Var::Y(i)) => y[*i - 1].clone(),
            Expr::Neg(a) => -a.eval(x, y)?,
            Expr::Call(f, a) => {
                let v = a.eval(x, y)?;
                match f {
                    Func::Sqrt => v.sqrt(),
                    Func::Exp => v.exp(),
                    Func::Ln => v.ln(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Tan => v.sin() / v.cos(),
                }
            }
            Expr::Bin(op, a, b) => {
                let lhs = a.eval(x, y)?;
                match op {
                    BinOp::Pow if b.max_var_index() == 0 => {
                        // constant exponent: keep integer powers exact
                        let p: f64 = b.eval(&[0.0], &[0.0])?;
                        if p.fract() == 0.0 && p.abs() <= 64.0 {
                            lhs.powi(p as i32)
                        } else {
                            lhs.powf(p)
                        }
                    }
                    BinOp::Pow => (b.eval(x, y)? * lhs.ln()).exp(),
                    BinOp::Add => lhs + b.eval(x, y)?,
                    BinOp::Sub => lhs - b.eval(x, y)?,
                    BinOp::Mul => lhs * b.eval(x, y)?,
                    BinOp::Div => lhs / b.eval(x, y)?,
                }
            }
        };
        if !out.all_finite() {
            return Err(FinslerError::Domain {
                expr: self.to_string(),
                detail: format!("non-finite value (base value {})", out.value()),
            });
        }
        Ok(out)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(Var::X(i)) => write!(f, "x{i}"),
            Expr::Var(Var::Y(i)) => write!(f, "y{i}"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {sym} {b})")
            }
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = FinslerError;
    fn from_str(s: &str) -> Result<Expr> {
        Expr::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Op(char),
    Pow,
    LParen,
    RParen,
}

impl fmt::Display for TokKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokKind::Num(v) => write!(f, "{v}"),
            TokKind::Ident(s) => write!(f, "{s}"),
            TokKind::Op(c) => write!(f, "{c}"),
            TokKind::Pow => write!(f, "^"),
            TokKind::LParen => write!(f, "("),
            TokKind::RParen => write!(f, ")"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    column: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = text.parse::<f64>().map_err(|_| FinslerError::Parse {
                column,
                message: format!("malformed number `{text}`"),
            })?;
            tokens.push(Token {
                kind: TokKind::Num(value),
                column,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            tokens.push(Token {
                kind: TokKind::Ident(chars[start..i].iter().collect()),
                column,
            });
            continue;
        }
        let kind = match c {
            '+' | '-' | '/' => TokKind::Op(c),
            '*' if chars.get(i + 1) == Some(&'*') => {
                i += 1;
                TokKind::Pow
            }
            '*' | '×' => TokKind::Op('*'),
            '÷' => TokKind::Op('/'),
            '^' => TokKind::Pow,
            '(' => TokKind::LParen,
            ')' => TokKind::RParen,
            other => {
                return Err(FinslerError::Parse {
                    column,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        tokens.push(Token { kind, column });
        i += 1;
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn end_column(&self) -> usize {
        self.tokens.last().map_or(1, |t| t.column + 1)
    }

    fn next(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        tok
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(TokKind::Op(c @ ('+' | '-'))) = self.peek().map(|t| t.kind.clone()) {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(TokKind::Op(c @ ('*' | '/'))) = self.peek().map(|t| t.kind.clone()) {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some(TokKind::Op('-')) = self.peek().map(|t| &t.kind) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if let Some(TokKind::Op('+')) = self.peek().map(|t| &t.kind) {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(TokKind::Pow) = self.peek().map(|t| &t.kind) {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let end = self.end_column();
        let tok = self.next().ok_or(FinslerError::Parse {
            column: end,
            message: "unexpected end of expression".into(),
        })?;
        match tok.kind {
            TokKind::Num(v) => Ok(Expr::Num(v)),
            TokKind::LParen => {
                let inner = self.expr()?;
                self.expect_rparen(tok.column)?;
                Ok(inner)
            }
            TokKind::Ident(name) => self.ident(name, tok.column),
            other => Err(FinslerError::Parse {
                column: tok.column,
                message: format!("unexpected `{other}`"),
            }),
        }
    }

    fn ident(&mut self, name: String, column: usize) -> Result<Expr> {
        if name == "pi" {
            return Ok(Expr::Num(std::f64::consts::PI));
        }
        if let Some(func) = Func::from_name(&name) {
            match self.next() {
                Some(Token {
                    kind: TokKind::LParen,
                    column: open,
                }) => {
                    let arg = self.expr()?;
                    self.expect_rparen(open)?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                _ => {
                    return Err(FinslerError::Parse {
                        column,
                        message: format!("expected `(` after `{name}`"),
                    })
                }
            }
        }
        let (head, digits) = name.split_at(1);
        let index = digits.parse::<usize>().ok().filter(|&i| i >= 1);
        match (head, index) {
            ("x", Some(i)) => Ok(Expr::Var(Var::X(i))),
            ("y", Some(i)) => Ok(Expr::Var(Var::Y(i))),
            _ => Err(FinslerError::Parse {
                column,
                message: format!("unknown identifier `{name}`"),
            }),
        }
    }

    fn expect_rparen(&mut self, open: usize) -> Result<()> {
        match self.next() {
            Some(Token {
                kind: TokKind::RParen,
                ..
            }) => Ok(()),
            Some(tok) => Err(FinslerError::Parse {
                column: tok.column,
                message: format!("expected `)` to close `(` at column {open}"),
            }),
            None => Err(FinslerError::Parse {
                column: self.end_column(),
                message: format!("unclosed `(` at column {open}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::Jet;

    fn eval(src: &str, x: &[f64], y: &[f64]) -> f64 {
        Expr::parse(src).unwrap().eval(x, y).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", &[0.0], &[0.0]), 7.0);
        assert_eq!(eval("2 ^ 3 ^ 2", &[0.0], &[0.0]), 512.0);
        assert_eq!(eval("-2^2", &[0.0], &[0.0]), -4.0);
        assert_eq!(eval("8 / 4 / 2", &[0.0], &[0.0]), 1.0);
        assert_eq!(eval("2 ** 3 - 1", &[0.0], &[0.0]), 7.0);
        assert_eq!(eval("1.5e1 + .5", &[0.0], &[0.0]), 15.5);
    }

    #[test]
    fn variables_and_functions() {
        let v = eval("x1 * y2 + sqrt(y1^2) + cos(0) + exp(ln(2))", &[3.0, 0.0], &[-2.0, 5.0]);
        assert!((v - 20.0).abs() < 1e-12);
    }

    #[test]
    fn jets_and_floats_agree_on_values() {
        let e = Expr::parse("sin(x1*y1) + (1 + x1^2)^(-1.5) * y1").unwrap();
        let vars = Jet::variables(&[0.4, 0.9], 3);
        let j = e.eval(&vars[..1], &vars[1..]).unwrap();
        let f = e.eval(&[0.4], &[0.9]).unwrap();
        assert!((j.value() - f).abs() < 1e-14);
    }

    #[test]
    fn parse_errors_carry_columns() {
        match Expr::parse("x1 + * 2") {
            Err(FinslerError::Parse { column, .. }) => assert_eq!(column, 6),
            other => panic!("{other:?}"),
        }
        match Expr::parse("sqrt(x1") {
            Err(FinslerError::Parse { message, .. }) => assert!(message.contains("unclosed")),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("z3").is_err());
        assert!(Expr::parse("x0").is_err());
        assert!(Expr::parse("2 $ 3").is_err());
    }

    #[test]
    fn domain_error_names_subexpression() {
        let e = Expr::parse("1 + sqrt(x1 - 2)").unwrap();
        match e.eval(&[1.0], &[1.0]) {
            Err(FinslerError::Domain { expr, .. }) => assert_eq!(expr, "sqrt((x1 - 2))"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dimension_check() {
        let e = Expr::parse("x1 + y3").unwrap();
        assert!(e.check_dimension(2).is_err());
        assert!(e.check_dimension(3).is_ok());
        assert!(e.depends_on_y());
    }
}
