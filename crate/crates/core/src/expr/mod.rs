//! A small expression language for coefficient functions of `(t, y)`.
//!
//! Expressions are parsed once, are immutable afterwards and can be
//! evaluated from any number of threads. Symbolic differentiation with
//! respect to either variable supplies the partial derivatives needed by
//! the diffusion generator without finite differencing.
//!
//! The grammar (EBNF) is:
//!
//! ```text
//! expr    = term , { ("+" | "-") , term } ;
//! term    = unary , { ("*" | "/") , unary } ;
//! unary   = "-" , unary | power ;
//! power   = primary , [ "^" , unary ] ;          (* right associative *)
//! primary = number | "t" | "y" | call | "(" , expr , ")" ;
//! call    = name , "(" , expr , { "," , expr } , ")" ;
//! name    = "exp" | "log" | "sin" | "cos" | "tanh" | "sech" | "sqrt" | "abs"
//!         | "min" | "max" | "clamp" | "ifle" ;
//! number  = digits , [ "." , digits ] , [ ("e" | "E") , [ "+" | "-" ] , digits ] ;
//! ```
//!
//! `ifle(a, b, x, z)` evaluates to `x` when `a <= b` and to `z` otherwise.
//! It is what the derivatives of `abs`, `min`, `max` and `clamp` are
//! expressed with; at a kink the derivative of the left branch is used.

mod diff;
mod eval;
mod parse;
mod print;

pub use eval::{EvalError, EvalErrorKind};
pub use parse::{parse, ParseError, ParseErrorKind};

/// Identifiers the grammar already gives a meaning to.
pub fn is_reserved(name: &str) -> bool {
    matches!(name, "t" | "y" | "min" | "max" | "clamp" | "ifle") || Func::from_name(name).is_some()
}

/// Free variable of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    T,
    Y,
}

/// Smooth (or piecewise smooth, for `Abs`) functions of one argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Tanh,
    Sech,
    Sqrt,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Sech => "sech",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            "sech" => Func::Sech,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

/// Abstract syntax tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Clamp(Box<Expr>, Box<Expr>, Box<Expr>),
    /// `ifle(a, b, x, z)`: `x` if `a <= b`, else `z`.
    IfLe(Box<[Expr; 4]>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn t() -> Expr {
        Expr::Var(Var::T)
    }

    pub fn y() -> Expr {
        Expr::Var(Var::Y)
    }

    /// True if the expression mentions `var`.
    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(var),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b)
            | Expr::Min(a, b)
            | Expr::Max(a, b) => a.depends_on(var) || b.depends_on(var),
            Expr::Clamp(a, b, c) => a.depends_on(var) || b.depends_on(var) || c.depends_on(var),
            Expr::IfLe(args) => args.iter().any(|a| a.depends_on(var)),
        }
    }

    /// True if the expression has no free variables.
    pub fn is_constant(&self) -> bool {
        !self.depends_on(Var::T) && !self.depends_on(Var::Y)
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + match self {
            Expr::Num(_) | Expr::Var(_) => 0,
            Expr::Neg(a) | Expr::Call(_, a) => a.size(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b)
            | Expr::Min(a, b)
            | Expr::Max(a, b) => a.size() + b.size(),
            Expr::Clamp(a, b, c) => a.size() + b.size() + c.size(),
            Expr::IfLe(args) => args.iter().map(Expr::size).sum(),
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
