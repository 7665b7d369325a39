use super::eval::{apply, power};
use super::{Expr, Func, Var};

fn as_num(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(v) => Some(*v),
        _ => None,
    }
}

fn folded(v: f64, fallback: impl FnOnce() -> Expr) -> Expr {
    if v.is_finite() {
        Expr::Num(v)
    } else {
        fallback()
    }
}

// Constructors that fold constants and drop 0/1 identities.

pub(crate) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => folded(x + y, || Expr::Add(Box::new(a), Box::new(b))),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => match b {
            Expr::Neg(inner) => Expr::Sub(Box::new(a), inner),
            b => Expr::Add(Box::new(a), Box::new(b)),
        },
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => folded(x - y, || Expr::Sub(Box::new(a), Box::new(b))),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => match b {
            Expr::Neg(inner) => Expr::Add(Box::new(a), inner),
            b => Expr::Sub(Box::new(a), Box::new(b)),
        },
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => folded(x * y, || Expr::Mul(Box::new(a), Box::new(b))),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Num(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) if y != 0.0 => folded(x / y, || Expr::Div(Box::new(a), Box::new(b))),
        (Some(x), _) if x == 0.0 => Expr::Num(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn pow(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) if !(x == 0.0 && y < 0.0) => {
            folded(power(x, y), || Expr::Pow(Box::new(a), Box::new(b)))
        }
        (_, Some(y)) if y == 1.0 => a,
        (_, Some(y)) if y == 0.0 => Expr::Num(1.0),
        _ => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn call(f: Func, a: Expr) -> Expr {
    if let Some(x) = as_num(&a) {
        let domain_ok = match f {
            Func::Log => x > 0.0,
            Func::Sqrt => x >= 0.0,
            _ => true,
        };
        if domain_ok {
            return folded(apply(f, x), || Expr::Call(f, Box::new(a)));
        }
    }
    Expr::Call(f, Box::new(a))
}

fn ifle(a: Expr, b: Expr, x: Expr, z: Expr) -> Expr {
    if x == z {
        return x;
    }
    if let (Some(u), Some(v)) = (as_num(&a), as_num(&b)) {
        return if u <= v { x } else { z };
    }
    Expr::IfLe(Box::new([a, b, x, z]))
}

impl Expr {
    /// Symbolic partial derivative with respect to `var`.
    ///
    /// Piecewise functions differentiate to `ifle` selections; at a tie the
    /// derivative of the left branch is used (for `min`/`max`, the first
    /// argument).
    pub fn diff(&self, var: Var) -> Expr {
        if !self.depends_on(var) {
            return Expr::Num(0.0);
        }
        match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Var(v) => Expr::Num(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(var)),
            Expr::Add(a, b) => add(a.diff(var), b.diff(var)),
            Expr::Sub(a, b) => sub(a.diff(var), b.diff(var)),
            Expr::Mul(a, b) => add(
                mul(a.diff(var), (**b).clone()),
                mul((**a).clone(), b.diff(var)),
            ),
            Expr::Div(a, b) => {
                let (a, b) = (&**a, &**b);
                if !b.depends_on(var) {
                    return div(a.diff(var), b.clone());
                }
                div(
                    sub(mul(a.diff(var), b.clone()), mul(a.clone(), b.diff(var))),
                    pow(b.clone(), Expr::Num(2.0)),
                )
            }
            Expr::Pow(a, b) => {
                let (a, b) = (&**a, &**b);
                if !b.depends_on(var) {
                    // d(u^k) = k u^(k-1) u'
                    let k1 = sub(b.clone(), Expr::Num(1.0));
                    return mul(mul(b.clone(), pow(a.clone(), k1)), a.diff(var));
                }
                // d(u^v) = u^v (v' log u + v u'/u)
                let log_a = call(Func::Log, a.clone());
                let inner = add(
                    mul(b.diff(var), log_a),
                    div(mul(b.clone(), a.diff(var)), a.clone()),
                );
                mul(self.clone(), inner)
            }
            Expr::Call(f, a) => {
                let u = (**a).clone();
                let outer = match f {
                    Func::Exp => call(Func::Exp, u),
                    Func::Log => div(Expr::Num(1.0), u),
                    Func::Sin => call(Func::Cos, u),
                    Func::Cos => neg(call(Func::Sin, u)),
                    Func::Tanh => pow(call(Func::Sech, u), Expr::Num(2.0)),
                    Func::Sech => neg(mul(call(Func::Sech, u.clone()), call(Func::Tanh, u))),
                    Func::Sqrt => div(Expr::Num(0.5), call(Func::Sqrt, u)),
                    Func::Abs => {
                        let du = a.diff(var);
                        return ifle(u, Expr::Num(0.0), neg(du.clone()), du);
                    }
                };
                mul(outer, a.diff(var))
            }
            Expr::Min(a, b) => ifle(
                (**a).clone(),
                (**b).clone(),
                a.diff(var),
                b.diff(var),
            ),
            Expr::Max(a, b) => ifle(
                (**b).clone(),
                (**a).clone(),
                a.diff(var),
                b.diff(var),
            ),
            Expr::Clamp(x, lo, hi) => {
                let inner = ifle(
                    (**x).clone(),
                    (**hi).clone(),
                    x.diff(var),
                    hi.diff(var),
                );
                ifle((**x).clone(), (**lo).clone(), lo.diff(var), inner)
            }
            Expr::IfLe(args) => {
                let [a, b, x, z] = &**args;
                ifle(a.clone(), b.clone(), x.diff(var), z.diff(var))
            }
        }
    }

    /// Returns the tree with constant subexpressions folded.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Num(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => neg(a.simplify()),
            Expr::Add(a, b) => add(a.simplify(), b.simplify()),
            Expr::Sub(a, b) => sub(a.simplify(), b.simplify()),
            Expr::Mul(a, b) => mul(a.simplify(), b.simplify()),
            Expr::Div(a, b) => div(a.simplify(), b.simplify()),
            Expr::Pow(a, b) => pow(a.simplify(), b.simplify()),
            Expr::Call(f, a) => call(*f, a.simplify()),
            Expr::Min(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                match (as_num(&a), as_num(&b)) {
                    (Some(x), Some(y)) => Expr::Num(if x <= y { x } else { y }),
                    _ => Expr::Min(Box::new(a), Box::new(b)),
                }
            }
            Expr::Max(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                match (as_num(&a), as_num(&b)) {
                    (Some(x), Some(y)) => Expr::Num(if x >= y { x } else { y }),
                    _ => Expr::Max(Box::new(a), Box::new(b)),
                }
            }
            Expr::Clamp(x, lo, hi) => Expr::Clamp(
                Box::new(x.simplify()),
                Box::new(lo.simplify()),
                Box::new(hi.simplify()),
            ),
            Expr::IfLe(args) => {
                let [a, b, x, z] = &**args;
                ifle(a.simplify(), b.simplify(), x.simplify(), z.simplify())
            }
        }
    }
}
