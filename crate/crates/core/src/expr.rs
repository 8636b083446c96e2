//! Arithmetic expressions for right-hand sides, impulse maps and the
//! non-local functional.
//!
//! Grammar (whitespace-insensitive), from loosest to tightest binding:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?            right-associative
//! atom   := number | constant | variable | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! Constants are `e` and `pi`; functions are `exp abs sqrt sin cos ln gamma`.
//! Which of the variables `theta p h pa` may appear depends on the [`Role`].

use std::fmt;

use thiserror::Error;

use crate::special::gamma;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at position {position}: expected {expected}")]
    Syntax { position: usize, expected: String },
    #[error("unknown identifier '{0}'")]
    UnknownIdentifier(String),
    #[error("variable '{name}' is not allowed in {role} expressions")]
    VariableNotAllowed { name: String, role: Role },
    #[error("expression evaluated to a non-finite value ({0})")]
    NonFiniteResult(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Right-hand side `L(theta, p, h)`.
    Rhs,
    /// Impulse map `I(theta, p)`.
    Impulse,
    /// Non-local functional `phi(pa)`.
    Phi,
    /// A function of time only, `f(theta)`.
    Function,
    /// A numeric constant, no variables.
    Constant,
}

impl Role {
    pub fn allows(self, var: Var) -> bool {
        match self {
            Role::Rhs => matches!(var, Var::Theta | Var::P | Var::H),
            Role::Impulse => matches!(var, Var::Theta | Var::P),
            Role::Phi => var == Var::Pa,
            Role::Function => var == Var::Theta,
            Role::Constant => false,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Rhs => "rhs",
            Role::Impulse => "impulse",
            Role::Phi => "phi",
            Role::Function => "function",
            Role::Constant => "constant",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Theta,
    P,
    H,
    Pa,
}

impl Var {
    fn name(self) -> &'static str {
        match self {
            Var::Theta => "theta",
            Var::P => "p",
            Var::H => "h",
            Var::Pa => "pa",
        }
    }

    fn from_name(s: &str) -> Option<Var> {
        Some(match s {
            "theta" => Var::Theta,
            "p" => Var::P,
            "h" => Var::H,
            "pa" => Var::Pa,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Abs,
    Sqrt,
    Sin,
    Cos,
    Ln,
    Gamma,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Ln => "ln",
            Func::Gamma => "gamma",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "ln" => Func::Ln,
            "gamma" => Func::Gamma,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Abs => x.abs(),
            Func::Sqrt => x.sqrt(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Ln => {
                if x > 0.0 {
                    x.ln()
                } else {
                    f64::NAN
                }
            }
            Func::Gamma => gamma(x),
        }
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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    E,
    Pi,
}

impl Constant {
    fn value(self) -> f64 {
        match self {
            Constant::E => std::f64::consts::E,
            Constant::Pi => std::f64::consts::PI,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Const(Constant),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Variable values for evaluation. Unused variables are ignored.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Bindings {
    pub theta: f64,
    pub p: f64,
    pub h: f64,
    pub pa: f64,
}

impl Bindings {
    fn get(&self, v: Var) -> f64 {
        match v {
            Var::Theta => self.theta,
            Var::P => self.p,
            Var::H => self.h,
            Var::Pa => self.pa,
        }
    }
}

impl Expr {
    pub fn parse(text: &str, role: Role) -> Result<Expr, ExprError> {
        let tokens = tokenize(text)?;
        if tokens.is_empty() {
            return Err(ExprError::Empty);
        }
        let mut parser = Parser {
            tokens,
            pos: 0,
            role,
            end: text.len(),
        };
        let expr = parser.expr()?;
        if let Some(tok) = parser.tokens.get(parser.pos) {
            return Err(ExprError::Syntax {
                position: tok.pos,
                expected: "operator or end of input".into(),
            });
        }
        Ok(expr)
    }

    /// Evaluates the expression; any non-finite intermediate is an error.
    pub fn eval(&self, b: &Bindings) -> Result<f64, ExprError> {
        let v = match self {
            Expr::Num(x) => *x,
            Expr::Const(c) => c.value(),
            Expr::Var(v) => b.get(*v),
            Expr::Neg(e) => -e.eval(b)?,
            Expr::Binary(op, l, r) => {
                let (l, r) = (l.eval(b)?, r.eval(b)?);
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => l / r,
                    BinOp::Pow => l.powf(r),
                }
            }
            Expr::Call(f, arg) => f.apply(arg.eval(b)?),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::NonFiniteResult(self.to_string()))
        }
    }

    /// True when the variable occurs anywhere in the tree.
    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Var(v) => *v == var,
            Expr::Num(_) | Expr::Const(_) => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.uses(var),
            Expr::Binary(_, l, r) => l.uses(var) || r.uses(var),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Binary(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Canonical form with the minimum parentheses the grammar needs.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Const(Constant::E) => f.write_str("e"),
            Expr::Const(Constant::Pi) => f.write_str("pi"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(e) => {
                f.write_str("-")?;
                write_operand(f, e, e.precedence() < 3)
            }
            Expr::Call(func, arg) => write!(f, "{}({arg})", func.name()),
            Expr::Binary(op, l, r) => {
                let prec = self.precedence();
                if *op == BinOp::Pow {
                    write_operand(f, l, l.precedence() < 5)?;
                    f.write_str("^")?;
                    write_operand(f, r, r.precedence() < 3)
                } else {
                    write_operand(f, l, l.precedence() < prec)?;
                    write!(f, " {} ", op.symbol())?;
                    write_operand(f, r, r.precedence() <= prec)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    pos: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                // exponent only when digits follow, so `2e` stays `2` then `e`
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut k = i + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        i = k;
                    }
                }
                let lit = &text[start..i];
                let value: f64 = lit.parse().map_err(|_| ExprError::Syntax {
                    position: start,
                    expected: "a number".into(),
                })?;
                out.push(Token {
                    kind: TokKind::Num(value),
                    pos: start,
                });
                continue;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    kind: TokKind::Ident(text[start..i].to_string()),
                    pos: start,
                });
                continue;
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => out.push(Token {
                kind: TokKind::Op(c as char),
                pos: start,
            }),
            b'(' => out.push(Token {
                kind: TokKind::LParen,
                pos: start,
            }),
            b')' => out.push(Token {
                kind: TokKind::RParen,
                pos: start,
            }),
            _ => {
                return Err(ExprError::Syntax {
                    position: start,
                    expected: "a number, identifier, operator or parenthesis".into(),
                })
            }
        }
        i += 1;
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    role: Role,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&TokKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.pos)
    }

    fn syntax<T>(&self, expected: &str) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            position: self.here(),
            expected: expected.into(),
        })
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(TokKind::Op(c)) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat_op(&['-']).is_some() {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat_op(&['^']).is_some() {
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        if self.peek() == Some(&TokKind::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            self.syntax("')'")
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let Some(kind) = self.peek().cloned() else {
            return self.syntax("an operand");
        };
        match kind {
            TokKind::Num(x) => {
                self.pos += 1;
                Ok(Expr::Num(x))
            }
            TokKind::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            TokKind::Ident(name) => {
                self.pos += 1;
                if let Some(func) = Func::from_name(&name) {
                    if self.peek() != Some(&TokKind::LParen) {
                        return self.syntax(&format!("'(' after '{name}'"));
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                match name.as_str() {
                    "e" => return Ok(Expr::Const(Constant::E)),
                    "pi" => return Ok(Expr::Const(Constant::Pi)),
                    _ => {}
                }
                match Var::from_name(&name) {
                    Some(v) if self.role.allows(v) => Ok(Expr::Var(v)),
                    Some(_) => Err(ExprError::VariableNotAllowed {
                        name,
                        role: self.role,
                    }),
                    None => Err(ExprError::UnknownIdentifier(name)),
                }
            }
            TokKind::Op(_) | TokKind::RParen => self.syntax("an operand"),
        }
    }
}
