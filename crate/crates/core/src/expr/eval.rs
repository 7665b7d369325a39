use super::{Expr, Func, Var};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalErrorKind {
    DivisionByZero,
    LogOfNonPositive,
    SqrtOfNegative,
    EmptyClampRange,
    NonFinite,
}

impl std::fmt::Display for EvalErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EvalErrorKind::DivisionByZero => "division by zero",
            EvalErrorKind::LogOfNonPositive => "log of a non-positive number",
            EvalErrorKind::SqrtOfNegative => "square root of a negative number",
            EvalErrorKind::EmptyClampRange => "clamp with lower bound above upper bound",
            EvalErrorKind::NonFinite => "non-finite result",
        })
    }
}

/// Domain error raised while evaluating; `node` is the offending
/// sub-expression as printed source.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} in `{node}`")]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub node: String,
}

fn fail<T>(kind: EvalErrorKind, node: &Expr) -> Result<T, EvalError> {
    Err(EvalError {
        kind,
        node: node.to_string(),
    })
}

fn finite(v: f64, node: &Expr) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        fail(EvalErrorKind::NonFinite, node)
    }
}

pub(crate) fn apply(func: Func, x: f64) -> f64 {
    match func {
        Func::Exp => x.exp(),
        Func::Log => x.ln(),
        Func::Sin => x.sin(),
        Func::Cos => x.cos(),
        Func::Tanh => x.tanh(),
        Func::Sech => 1.0 / x.cosh(),
        Func::Sqrt => x.sqrt(),
        Func::Abs => x.abs(),
    }
}

pub(crate) fn power(base: f64, exp: f64) -> f64 {
    if exp.fract() == 0.0 && exp.abs() <= 64.0 {
        base.powi(exp as i32)
    } else {
        base.powf(exp)
    }
}

impl Expr {
    /// Evaluates in IEEE-754 double precision.
    pub fn eval(&self, t: f64, y: f64) -> Result<f64, EvalError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(Var::T) => Ok(t),
            Expr::Var(Var::Y) => Ok(y),
            Expr::Neg(a) => Ok(-a.eval(t, y)?),
            Expr::Add(a, b) => finite(a.eval(t, y)? + b.eval(t, y)?, self),
            Expr::Sub(a, b) => finite(a.eval(t, y)? - b.eval(t, y)?, self),
            Expr::Mul(a, b) => finite(a.eval(t, y)? * b.eval(t, y)?, self),
            Expr::Div(a, b) => {
                let num = a.eval(t, y)?;
                let den = b.eval(t, y)?;
                if den == 0.0 {
                    return fail(EvalErrorKind::DivisionByZero, self);
                }
                finite(num / den, self)
            }
            Expr::Pow(a, b) => {
                let base = a.eval(t, y)?;
                let exp = b.eval(t, y)?;
                if base == 0.0 && exp < 0.0 {
                    return fail(EvalErrorKind::DivisionByZero, self);
                }
                finite(power(base, exp), self)
            }
            Expr::Call(func, a) => {
                let x = a.eval(t, y)?;
                match func {
                    Func::Log if x <= 0.0 => fail(EvalErrorKind::LogOfNonPositive, self),
                    Func::Sqrt if x < 0.0 => fail(EvalErrorKind::SqrtOfNegative, self),
                    _ => finite(apply(*func, x), self),
                }
            }
            Expr::Min(a, b) => {
                let (u, v) = (a.eval(t, y)?, b.eval(t, y)?);
                Ok(if u <= v { u } else { v })
            }
            Expr::Max(a, b) => {
                let (u, v) = (a.eval(t, y)?, b.eval(t, y)?);
                Ok(if u >= v { u } else { v })
            }
            Expr::Clamp(x, lo, hi) => {
                let (x, lo, hi) = (x.eval(t, y)?, lo.eval(t, y)?, hi.eval(t, y)?);
                if lo > hi {
                    return fail(EvalErrorKind::EmptyClampRange, self);
                }
                Ok(if x <= lo {
                    lo
                } else if x <= hi {
                    x
                } else {
                    hi
                })
            }
            Expr::IfLe(args) => {
                let [a, b, x, z] = &**args;
                if a.eval(t, y)? <= b.eval(t, y)? {
                    x.eval(t, y)
                } else {
                    z.eval(t, y)
                }
            }
        }
    }
}
