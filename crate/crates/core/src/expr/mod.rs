//! Single-variable real expressions.
//!
//! An [`Expr`] is parsed from text (see [`parse`]), evaluated pointwise with
//! [`Expr::eval`], and differentiated to any order by propagating truncated
//! Taylor series through the tree ([`Expr::jet`]).
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' factor)?
//! atom   := number | 'x' | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'
//! func   := 'exp' | 'log' | 'sqrt' | 'sin' | 'cos'
//! ```

mod jet;
mod parse;

use std::fmt;

use thiserror::Error;

pub use jet::Jet;
pub use parse::{parse, ParseError};

/// Elementary unary functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
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
    pub fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

/// Parsed expression tree in the single free variable `x`.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

/// Evaluation outside the real domain of an elementary operation.
#[derive(Clone, Debug, PartialEq, Error)]
#[error("domain error in `{node}` at argument {argument}")]
pub struct DomainError {
    pub node: &'static str,
    pub argument: f64,
}

fn domain(node: &'static str, argument: f64) -> DomainError {
    DomainError { node, argument }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Returns the literal value if the subtree contains no `x`.
    ///
    /// Only used to pick the exact integer-power path; the tree itself is
    /// never rewritten.
    pub(crate) fn constant_value(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::X => None,
            Expr::Neg(a) => a.constant_value().map(|v| -v),
            Expr::Call(..) | Expr::Binary(..) => {
                if self.contains_x() {
                    None
                } else {
                    self.eval(0.0).ok()
                }
            }
        }
    }

    fn contains_x(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::X => true,
            Expr::Neg(a) | Expr::Call(_, a) => a.contains_x(),
            Expr::Binary(_, a, b) => a.contains_x() || b.contains_x(),
        }
    }

    /// Evaluates the expression at `x`.
    ///
    /// Overflow produces a signed infinity. Any operation whose real result is
    /// undefined (log of a non-positive number, sqrt of a negative number, a
    /// negative base with a non-integer exponent, 0/0 and similar) is reported
    /// as a [`DomainError`] instead of a NaN.
    pub fn eval(&self, x: f64) -> Result<f64, DomainError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::X => Ok(x),
            Expr::Neg(a) => Ok(-a.eval(x)?),
            Expr::Call(f, a) => {
                let u = a.eval(x)?;
                let r = match f {
                    Func::Exp => u.exp(),
                    Func::Log => {
                        if u <= 0.0 || u.is_nan() {
                            return Err(domain("log", u));
                        }
                        u.ln()
                    }
                    Func::Sqrt => {
                        if u < 0.0 || u.is_nan() {
                            return Err(domain("sqrt", u));
                        }
                        u.sqrt()
                    }
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                };
                if r.is_nan() {
                    return Err(domain(f.name(), u));
                }
                Ok(r)
            }
            Expr::Binary(op, a, b) => {
                let u = a.eval(x)?;
                let v = b.eval(x)?;
                let r = match op {
                    BinOp::Add => u + v,
                    BinOp::Sub => u - v,
                    BinOp::Mul => u * v,
                    BinOp::Div => u / v,
                    BinOp::Pow => {
                        if u < 0.0 && v.fract() != 0.0 {
                            return Err(domain("pow", u));
                        }
                        pow_real(u, v)
                    }
                };
                if r.is_nan() {
                    let node = match op {
                        BinOp::Add => "+",
                        BinOp::Sub => "-",
                        BinOp::Mul => "*",
                        BinOp::Div => "/",
                        BinOp::Pow => "pow",
                    };
                    return Err(domain(node, u));
                }
                Ok(r)
            }
        }
    }

    /// Truncated Taylor expansion of order `order` about `center`.
    pub fn jet(&self, center: f64, order: usize) -> Result<Jet, DomainError> {
        jet::eval_jet(self, center, order)
    }

    /// Exact `k`-th derivative at `x0`, read off the jet.
    pub fn derivative(&self, x0: f64, k: usize) -> Result<f64, DomainError> {
        Ok(self.jet(x0, k)?.derivative(k))
    }
}

/// `u^v` with the integer-exponent case routed through `powi`.
fn pow_real(u: f64, v: f64) -> f64 {
    if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 {
        u.powi(v as i32)
    } else {
        u.powf(v)
    }
}

/// Renders a fully parenthesized form that reparses to an equivalent tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{:?}", v)
                }
            }
            Expr::X => f.write_str("x"),
            Expr::Neg(a) => write!(f, "(-{})", a),
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), a),
            Expr::Binary(op, a, b) => write!(f, "({}{}{})", a, op.symbol(), b),
        }
    }
}
