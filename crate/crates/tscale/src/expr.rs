//! Expression mini-language for user-defined functions `f(t)` and shift
//! formulas `delta(s, t)`.
//!
//! Grammar (highest precedence first): function calls and parentheses,
//! `^` (left-associative), unary `-`, `* /`, `+ -`. Comparisons (`>=`,
//! `>`, `=`) are only valid as the first argument of `piecewise`. There
//! is no implicit multiplication: `2t` is a syntax error.
//!
//! Built-in functions: `abs`, `sqrt`, `ln`, `exp`, `sin`, `cos`,
//! `pow(a, b)`, `piecewise(cond, then, else)`. Constants: `pi`, `e`.
//! Variables: `t`, `s`.

use crate::error::{EvalError, ParseError};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    S,
}

impl Var {
    pub fn name(self) -> char {
        match self {
            Var::T => 't',
            Var::S => 's',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Neg,
    Abs,
    Sqrt,
    Ln,
    Exp,
    Sin,
    Cos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Ge,
    Gt,
    Eq,
}

/// A comparison, only legal as a `piecewise` condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub op: CmpOp,
    pub lhs: Expression,
    pub rhs: Expression,
}

/// AST of the expression mini-language.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Num(f64),
    Const(Constant),
    Var(Var),
    Unary(UnaryFn, Box<Expression>),
    Binary(BinOp, Box<Expression>, Box<Expression>),
    Piecewise(Box<Condition>, Box<Expression>, Box<Expression>),
}

/// Variable bindings for [`Expression::eval`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Env {
    pub t: Option<f64>,
    pub s: Option<f64>,
}

impl Env {
    pub fn t(value: f64) -> Self {
        Env {
            t: Some(value),
            s: None,
        }
    }

    pub fn ts(t: f64, s: f64) -> Self {
        Env {
            t: Some(t),
            s: Some(s),
        }
    }
}

impl Expression {
    /// Parse source text into an AST.
    pub fn parse(text: &str) -> Result<Expression, ParseError> {
        let tokens = lex(text)?;
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.expression()?;
        parser.expect_end()?;
        Ok(expr)
    }

    /// Evaluate with the given bindings. Non-finite results are errors.
    pub fn eval(&self, env: Env) -> Result<f64, EvalError> {
        let v = self.eval_inner(env)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    fn eval_inner(&self, env: Env) -> Result<f64, EvalError> {
        match self {
            Expression::Num(v) => Ok(*v),
            Expression::Const(Constant::Pi) => Ok(std::f64::consts::PI),
            Expression::Const(Constant::E) => Ok(std::f64::consts::E),
            Expression::Var(v) => match v {
                Var::T => env.t.ok_or(EvalError::UnboundVariable('t')),
                Var::S => env.s.ok_or(EvalError::UnboundVariable('s')),
            },
            Expression::Unary(f, e) => {
                let x = e.eval_inner(env)?;
                match f {
                    UnaryFn::Neg => Ok(-x),
                    UnaryFn::Abs => Ok(x.abs()),
                    UnaryFn::Sqrt => {
                        if x < 0.0 {
                            Err(EvalError::SqrtNegative)
                        } else {
                            Ok(x.sqrt())
                        }
                    }
                    UnaryFn::Ln => {
                        if x <= 0.0 {
                            Err(EvalError::LnNonPositive)
                        } else {
                            Ok(x.ln())
                        }
                    }
                    UnaryFn::Exp => Ok(x.exp()),
                    UnaryFn::Sin => Ok(x.sin()),
                    UnaryFn::Cos => Ok(x.cos()),
                }
            }
            Expression::Binary(op, a, b) => {
                let x = a.eval_inner(env)?;
                let y = b.eval_inner(env)?;
                match op {
                    BinOp::Add => Ok(x + y),
                    BinOp::Sub => Ok(x - y),
                    BinOp::Mul => Ok(x * y),
                    BinOp::Div => {
                        if y == 0.0 {
                            Err(EvalError::DivisionByZero)
                        } else {
                            Ok(x / y)
                        }
                    }
                    BinOp::Pow => {
                        if x == 0.0 && y < 0.0 {
                            Err(EvalError::ZeroToNegative)
                        } else if x < 0.0 && y.fract() != 0.0 {
                            Err(EvalError::PowDomain)
                        } else {
                            Ok(x.powf(y))
                        }
                    }
                }
            }
            Expression::Piecewise(cond, then, els) => {
                let l = cond.lhs.eval_inner(env)?;
                let r = cond.rhs.eval_inner(env)?;
                let taken = match cond.op {
                    CmpOp::Ge => l >= r,
                    CmpOp::Gt => l > r,
                    CmpOp::Eq => l == r,
                };
                if taken {
                    then.eval_inner(env)
                } else {
                    els.eval_inner(env)
                }
            }
        }
    }

    /// Free variables referenced by the expression.
    pub fn uses_var(&self, var: Var) -> bool {
        match self {
            Expression::Num(_) | Expression::Const(_) => false,
            Expression::Var(v) => *v == var,
            Expression::Unary(_, e) => e.uses_var(var),
            Expression::Binary(_, a, b) => a.uses_var(var) || b.uses_var(var),
            Expression::Piecewise(c, a, b) => {
                c.lhs.uses_var(var) || c.rhs.uses_var(var) || a.uses_var(var) || b.uses_var(var)
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expression::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expression::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expression::Unary(UnaryFn::Neg, _) => 3,
            Expression::Binary(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let prec = self.precedence();
        if prec < min {
            write!(f, "(")?;
            self.fmt_node(f)?;
            write!(f, ")")
        } else {
            self.fmt_node(f)
        }
    }

    fn fmt_node(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Num(v) => write!(f, "{}", v),
            Expression::Const(Constant::Pi) => write!(f, "pi"),
            Expression::Const(Constant::E) => write!(f, "e"),
            Expression::Var(v) => write!(f, "{}", v.name()),
            Expression::Unary(UnaryFn::Neg, e) => {
                write!(f, "-")?;
                // A nested negation needs parentheses; `^` binds tighter.
                e.fmt_prec(f, 4)
            }
            Expression::Unary(func, e) => {
                let name = match func {
                    UnaryFn::Abs => "abs",
                    UnaryFn::Sqrt => "sqrt",
                    UnaryFn::Ln => "ln",
                    UnaryFn::Exp => "exp",
                    UnaryFn::Sin => "sin",
                    UnaryFn::Cos => "cos",
                    UnaryFn::Neg => unreachable!(),
                };
                write!(f, "{}(", name)?;
                e.fmt_node(f)?;
                write!(f, ")")
            }
            Expression::Binary(op, a, b) => {
                let (sym, prec) = match op {
                    BinOp::Add => ("+", 1),
                    BinOp::Sub => ("-", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                    BinOp::Pow => ("^", 4),
                };
                a.fmt_prec(f, prec)?;
                write!(f, " {} ", sym)?;
                // Left-associative: the right child must bind strictly tighter.
                b.fmt_prec(f, prec + 1)
            }
            Expression::Piecewise(cond, then, els) => {
                let sym = match cond.op {
                    CmpOp::Ge => ">=",
                    CmpOp::Gt => ">",
                    CmpOp::Eq => "=",
                };
                write!(f, "piecewise(")?;
                cond.lhs.fmt_node(f)?;
                write!(f, " {} ", sym)?;
                cond.rhs.fmt_node(f)?;
                write!(f, ", ")?;
                then.fmt_node(f)?;
                write!(f, ", ")?;
                els.fmt_node(f)?;
                write!(f, ")")
            }
        }
    }
}

/// Canonical text form; `parse(print(e)) == e` structurally.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_node(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
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
    Ge,
    Gt,
    Eq,
}

fn lex(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                tokens.push((Token::Plus, i));
                i += 1;
            }
            '-' => {
                tokens.push((Token::Minus, i));
                i += 1;
            }
            '*' => {
                tokens.push((Token::Star, i));
                i += 1;
            }
            '/' => {
                tokens.push((Token::Slash, i));
                i += 1;
            }
            '^' => {
                tokens.push((Token::Caret, i));
                i += 1;
            }
            '(' => {
                tokens.push((Token::LParen, i));
                i += 1;
            }
            ')' => {
                tokens.push((Token::RParen, i));
                i += 1;
            }
            ',' => {
                tokens.push((Token::Comma, i));
                i += 1;
            }
            '>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    tokens.push((Token::Ge, i));
                    i += 2;
                } else {
                    tokens.push((Token::Gt, i));
                    i += 1;
                }
            }
            '=' => {
                tokens.push((Token::Eq, i));
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit = &text[start..i];
                let value: f64 = lit.parse().map_err(|_| ParseError {
                    position: start,
                    message: format!("invalid number literal `{}`", lit),
                })?;
                tokens.push((Token::Num(value), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push((Token::Ident(text[start..i].to_string()), start));
            }
            other => {
                return Err(ParseError {
                    position: i,
                    message: format!("unexpected character `{}`", other),
                })
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(_, p)| *p)
            .unwrap_or_else(|| {
                self.tokens.last().map(|(_, p)| p + 1).unwrap_or(0)
            })
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, tok: Token, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {}", what)))
        }
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        if self.pos == self.tokens.len() {
            Ok(())
        } else {
            Err(self.err("unexpected trailing input".to_string()))
        }
    }

    fn err(&self, message: String) -> ParseError {
        ParseError {
            position: self.here(),
            message,
        }
    }

    fn expression(&mut self) -> Result<Expression, ParseError> {
        let expr = self.additive()?;
        if matches!(self.peek(), Some(Token::Ge | Token::Gt | Token::Eq)) {
            return Err(self.err("comparisons are only allowed inside piecewise(...)".into()));
        }
        Ok(expr)
    }

    fn condition(&mut self) -> Result<Condition, ParseError> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Some(Token::Ge) => CmpOp::Ge,
            Some(Token::Gt) => CmpOp::Gt,
            Some(Token::Eq) => CmpOp::Eq,
            _ => return Err(self.err("piecewise condition must be a comparison".into())),
        };
        self.pos += 1;
        let rhs = self.additive()?;
        Ok(Condition { op, lhs, rhs })
    }

    fn additive(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Some(Token::Plus) => BinOp::Add,
                Some(Token::Minus) => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.multiplicative()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn multiplicative(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Token::Star) => BinOp::Mul,
                Some(Token::Slash) => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expression, ParseError> {
        if self.peek() == Some(&Token::Minus) {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Expression::Unary(UnaryFn::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.atom()?;
        while self.peek() == Some(&Token::Caret) {
            self.pos += 1;
            let rhs = self.atom()?;
            lhs = Expression::Binary(BinOp::Pow, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<Expression, ParseError> {
        match self.bump() {
            Some(Token::Num(v)) => Ok(Expression::Num(v)),
            Some(Token::LParen) => {
                let inner = self.expression()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => self.named(&name),
            _ => Err(self.err("expected a number, name, or `(`".into())),
        }
    }

    fn named(&mut self, name: &str) -> Result<Expression, ParseError> {
        match name {
            "t" => return Ok(Expression::Var(Var::T)),
            "s" => return Ok(Expression::Var(Var::S)),
            "pi" => return Ok(Expression::Const(Constant::Pi)),
            "e" => return Ok(Expression::Const(Constant::E)),
            _ => {}
        }
        let unary = match name {
            "abs" => Some(UnaryFn::Abs),
            "sqrt" => Some(UnaryFn::Sqrt),
            "ln" => Some(UnaryFn::Ln),
            "exp" => Some(UnaryFn::Exp),
            "sin" => Some(UnaryFn::Sin),
            "cos" => Some(UnaryFn::Cos),
            _ => None,
        };
        if let Some(func) = unary {
            self.expect(Token::LParen, "`(` after function name")?;
            let arg = self.expression()?;
            self.expect(Token::RParen, "`)`")?;
            return Ok(Expression::Unary(func, Box::new(arg)));
        }
        match name {
            "pow" => {
                self.expect(Token::LParen, "`(` after function name")?;
                let a = self.expression()?;
                self.expect(Token::Comma, "`,`")?;
                let b = self.expression()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(Expression::Binary(BinOp::Pow, Box::new(a), Box::new(b)))
            }
            "piecewise" => {
                self.expect(Token::LParen, "`(` after function name")?;
                let cond = self.condition()?;
                self.expect(Token::Comma, "`,`")?;
                let then = self.expression()?;
                self.expect(Token::Comma, "`,`")?;
                let els = self.expression()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(Expression::Piecewise(
                    Box::new(cond),
                    Box::new(then),
                    Box::new(els),
                ))
            }
            other => Err(self.err(format!("unknown identifier `{}`", other))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Expression {
        Expression::parse(s).unwrap()
    }

    #[test]
    fn precedence_mul_over_add() {
        let e = parse("2+3*4");
        assert_eq!(e.eval(Env::default()).unwrap(), 14.0);
    }

    #[test]
    fn pow_binds_tighter_than_unary_minus() {
        let e = parse("-t^2");
        assert_eq!(
            e,
            Expression::Unary(
                UnaryFn::Neg,
                Box::new(Expression::Binary(
                    BinOp::Pow,
                    Box::new(Expression::Var(Var::T)),
                    Box::new(Expression::Num(2.0)),
                )),
            )
        );
        assert_eq!(e.eval(Env::t(3.0)).unwrap(), -9.0);
    }

    #[test]
    fn pow_left_associative() {
        // (2^3)^2 = 64, not 2^(3^2) = 512
        assert_eq!(parse("2^3^2").eval(Env::default()).unwrap(), 64.0);
    }

    #[test]
    fn piecewise_sign_split() {
        let e = parse("piecewise(t>=0, s*t, t/s)");
        assert_eq!(e.eval(Env::ts(3.0, 2.0)).unwrap(), 6.0);
        assert_eq!(e.eval(Env::ts(-6.0, 2.0)).unwrap(), -3.0);
    }

    #[test]
    fn comparison_outside_piecewise_rejected() {
        assert!(Expression::parse("t >= 0").is_err());
    }

    #[test]
    fn no_implicit_multiplication() {
        assert!(Expression::parse("2t").is_err());
    }

    #[test]
    fn division_by_zero_is_typed() {
        let e = parse("1/t");
        assert_eq!(e.eval(Env::t(0.0)), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn ln_and_sqrt_domains() {
        assert_eq!(parse("ln(t)").eval(Env::t(0.0)), Err(EvalError::LnNonPositive));
        assert_eq!(parse("ln(t)").eval(Env::t(-1.0)), Err(EvalError::LnNonPositive));
        assert_eq!(parse("sqrt(t)").eval(Env::t(-4.0)), Err(EvalError::SqrtNegative));
    }

    #[test]
    fn pow_domain_errors() {
        assert_eq!(parse("0^(-1)").eval(Env::default()), Err(EvalError::ZeroToNegative));
        assert_eq!(parse("t^0.5").eval(Env::t(-2.0)), Err(EvalError::PowDomain));
        assert_eq!(parse("t^2").eval(Env::t(-2.0)).unwrap(), 4.0);
    }

    #[test]
    fn unbound_variable() {
        assert_eq!(parse("t+s").eval(Env::t(1.0)), Err(EvalError::UnboundVariable('s')));
    }

    #[test]
    fn nonfinite_is_an_error() {
        assert_eq!(parse("exp(t)").eval(Env::t(1e9)), Err(EvalError::NonFinite));
    }

    // Example 3.5 formula at t = sqrt(2): exponent is -1/2, sin(-pi/2) = -1.
    #[test]
    fn log_wave_at_sqrt2() {
        let f = parse("sin(pi * ln(abs(t)) / ln(0.5))");
        let at = f.eval(Env::t(std::f64::consts::SQRT_2)).unwrap();
        assert!((at - (-1.0)).abs() < 1e-12, "got {at}");
        assert!(f.eval(Env::t(1.0)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn display_uses_minimal_parens() {
        assert_eq!(parse("t/s").to_string(), "t / s");
        assert_eq!(parse("t ^ 2").to_string(), "t ^ 2");
        assert_eq!(parse("(t+s)*2").to_string(), "(t + s) * 2");
        assert_eq!(parse("t+s*2").to_string(), "t + s * 2");
        assert_eq!(parse("t-(s-1)").to_string(), "t - (s - 1)");
        assert_eq!(parse("-t^2").to_string(), "-t ^ 2");
    }

    #[test]
    fn print_parse_round_trip_structural() {
        for text in [
            "sin(pi * ln(abs(t)) / ln(0.5))",
            "piecewise(t >= 0, s * t, t / s)",
            "sqrt(t ^ 2 + s ^ 2)",
            "1 / t",
            "-(-t)",
            "2 ^ ((ln(t / (1 - t)) + ln(s / (1 - s))) / ln(2)) / (1 + 2 ^ ((ln(t / (1 - t)) + ln(s / (1 - s))) / ln(2)))",
        ] {
            let ast = parse(text);
            let printed = ast.to_string();
            assert_eq!(parse(&printed), ast, "round trip failed for `{text}`");
        }
    }
}
