//! Arithmetic/boolean expression trees shared by guards, rates, resets and
//! influence-type definitions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }

    /// Exact comparison.
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }

    /// Comparison over the closure of the set it describes (`<` behaves as `<=`).
    pub fn holds_closed(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt | CmpOp::Le => lhs <= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ge | CmpOp::Gt => lhs >= rhs,
        }
    }
}

/// Expression tree over named variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Num(f64),
    Bool(bool),
    Var(String),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Real(f64),
    Bool(bool),
}

impl Value {
    pub fn as_real(self) -> Result<f64, EvalError> {
        match self {
            Value::Real(v) => Ok(v),
            Value::Bool(_) => Err(EvalError::TypeMismatch {
                expected: Type::Real,
                found: Type::Bool,
            }),
        }
    }

    pub fn as_bool(self) -> Result<bool, EvalError> {
        match self {
            Value::Bool(b) => Ok(b),
            Value::Real(_) => Err(EvalError::TypeMismatch {
                expected: Type::Bool,
                found: Type::Real,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Type {
    Real,
    Bool,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Real => f.write_str("real"),
            Type::Bool => f.write_str("boolean"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("type mismatch: expected {expected}, found {found}")]
    TypeMismatch { expected: Type, found: Type },
    #[error("{0}")]
    Domain(String),
}

/// Read access to a variable valuation.
pub trait Valuation {
    fn value_of(&self, name: &str) -> Option<f64>;
}

impl Valuation for BTreeMap<String, f64> {
    fn value_of(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Valuation for HashMap<String, f64> {
    fn value_of(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Valuation for [(&str, f64)] {
    fn value_of(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl<const N: usize> Valuation for [(&str, f64); N] {
    fn value_of(&self, name: &str) -> Option<f64> {
        self.as_slice().value_of(name)
    }
}

fn apply_binary(op: BinOp, a: f64, b: f64) -> Result<f64, EvalError> {
    Ok(match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            a / b
        }
        BinOp::Min => a.min(b),
        BinOp::Max => a.max(b),
        BinOp::Pow => {
            let r = a.powf(b);
            if r.is_nan() && !a.is_nan() && !b.is_nan() {
                return Err(EvalError::Domain(format!("pow({a}, {b}) is undefined")));
            }
            r
        }
    })
}

impl Expr {
    pub fn num(v: f64) -> Self {
        Expr::Num(v)
    }

    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Self {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Self {
        Expr::Cmp(op, Box::new(a), Box::new(b))
    }

    pub fn and(a: Expr, b: Expr) -> Self {
        Expr::And(Box::new(a), Box::new(b))
    }

    pub fn product(a: Expr, b: Expr) -> Self {
        Expr::binary(BinOp::Mul, a, b)
    }

    pub fn is_true_literal(&self) -> bool {
        matches!(self, Expr::Bool(true))
    }

    pub fn eval<V: Valuation + ?Sized>(&self, state: &V) -> Result<Value, EvalError> {
        match self {
            Expr::Num(v) => Ok(Value::Real(*v)),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Var(name) => state
                .value_of(name)
                .map(Value::Real)
                .ok_or_else(|| EvalError::UnknownVariable(name.clone())),
            Expr::Neg(e) => Ok(Value::Real(-e.eval(state)?.as_real()?)),
            Expr::Not(e) => Ok(Value::Bool(!e.eval(state)?.as_bool()?)),
            Expr::Binary(op, a, b) => {
                let a = a.eval(state)?.as_real()?;
                let b = b.eval(state)?.as_real()?;
                apply_binary(*op, a, b).map(Value::Real)
            }
            Expr::Cmp(op, a, b) => {
                let a = a.eval(state)?.as_real()?;
                let b = b.eval(state)?.as_real()?;
                Ok(Value::Bool(op.holds(a, b)))
            }
            Expr::And(a, b) => Ok(Value::Bool(
                a.eval(state)?.as_bool()? && b.eval(state)?.as_bool()?,
            )),
            Expr::Or(a, b) => Ok(Value::Bool(
                a.eval(state)?.as_bool()? || b.eval(state)?.as_bool()?,
            )),
            Expr::If(c, t, e) => {
                if c.eval(state)?.as_bool()? {
                    t.eval(state)
                } else {
                    e.eval(state)
                }
            }
        }
    }

    pub fn eval_real<V: Valuation + ?Sized>(&self, state: &V) -> Result<f64, EvalError> {
        self.eval(state)?.as_real()
    }

    pub fn eval_bool<V: Valuation + ?Sized>(&self, state: &V) -> Result<bool, EvalError> {
        self.eval(state)?.as_bool()
    }

    /// Static type of the expression, or the first mismatch found.
    pub fn infer_type(&self) -> Result<Type, EvalError> {
        fn expect(e: &Expr, want: Type) -> Result<(), EvalError> {
            let got = e.infer_type()?;
            if got == want {
                Ok(())
            } else {
                Err(EvalError::TypeMismatch {
                    expected: want,
                    found: got,
                })
            }
        }
        match self {
            Expr::Num(_) | Expr::Var(_) => Ok(Type::Real),
            Expr::Bool(_) => Ok(Type::Bool),
            Expr::Neg(e) => expect(e, Type::Real).map(|_| Type::Real),
            Expr::Not(e) => expect(e, Type::Bool).map(|_| Type::Bool),
            Expr::Binary(_, a, b) => {
                expect(a, Type::Real)?;
                expect(b, Type::Real)?;
                Ok(Type::Real)
            }
            Expr::Cmp(_, a, b) => {
                expect(a, Type::Real)?;
                expect(b, Type::Real)?;
                Ok(Type::Bool)
            }
            Expr::And(a, b) | Expr::Or(a, b) => {
                expect(a, Type::Bool)?;
                expect(b, Type::Bool)?;
                Ok(Type::Bool)
            }
            Expr::If(c, t, e) => {
                expect(c, Type::Bool)?;
                let tt = t.infer_type()?;
                expect(e, tt)?;
                Ok(tt)
            }
        }
    }

    /// Names referenced by `Var` nodes.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) | Expr::Bool(_) => {}
            Expr::Var(n) => {
                out.insert(n.clone());
            }
            Expr::Neg(e) | Expr::Not(e) => e.collect_vars(out),
            Expr::Binary(_, a, b) | Expr::Cmp(_, a, b) | Expr::And(a, b) | Expr::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::If(c, t, e) => {
                c.collect_vars(out);
                t.collect_vars(out);
                e.collect_vars(out);
            }
        }
    }

    /// Replaces every variable for which `f` returns `Some`.
    pub fn substitute(&self, f: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        let sub = |e: &Expr| Box::new(e.substitute(f));
        match self {
            Expr::Num(_) | Expr::Bool(_) => self.clone(),
            Expr::Var(n) => f(n).unwrap_or_else(|| self.clone()),
            Expr::Neg(e) => Expr::Neg(sub(e)),
            Expr::Not(e) => Expr::Not(sub(e)),
            Expr::Binary(op, a, b) => Expr::Binary(*op, sub(a), sub(b)),
            Expr::Cmp(op, a, b) => Expr::Cmp(*op, sub(a), sub(b)),
            Expr::And(a, b) => Expr::And(sub(a), sub(b)),
            Expr::Or(a, b) => Expr::Or(sub(a), sub(b)),
            Expr::If(c, t, e) => Expr::If(sub(c), sub(t), sub(e)),
        }
    }

    /// Resolves variable names to slot indices for fast repeated evaluation.
    pub fn index(&self, vars: &[String]) -> Result<IndexedExpr, EvalError> {
        let ix = |e: &Expr| e.index(vars).map(Box::new);
        Ok(match self {
            Expr::Num(v) => IndexedExpr::Num(*v),
            Expr::Bool(b) => IndexedExpr::Bool(*b),
            Expr::Var(n) => IndexedExpr::Var(
                vars.iter()
                    .position(|v| v == n)
                    .ok_or_else(|| EvalError::UnknownVariable(n.clone()))?,
            ),
            Expr::Neg(e) => IndexedExpr::Neg(ix(e)?),
            Expr::Not(e) => IndexedExpr::Not(ix(e)?),
            Expr::Binary(op, a, b) => IndexedExpr::Binary(*op, ix(a)?, ix(b)?),
            Expr::Cmp(op, a, b) => IndexedExpr::Cmp(*op, ix(a)?, ix(b)?),
            Expr::And(a, b) => IndexedExpr::And(ix(a)?, ix(b)?),
            Expr::Or(a, b) => IndexedExpr::Or(ix(a)?, ix(b)?),
            Expr::If(c, t, e) => IndexedExpr::If(ix(c)?, ix(t)?, ix(e)?),
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::If(..) => 0,
            Expr::Or(..) => 1,
            Expr::And(..) => 2,
            Expr::Not(..) => 3,
            Expr::Cmp(..) => 4,
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 5,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 6,
            Expr::Neg(_) => 7,
            Expr::Num(v) if v.is_sign_negative() => 7,
            _ => 8,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let p = self.precedence();
        if p < min {
            f.write_str("(")?;
            self.fmt_prec(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Expr::Num(v) => write!(f, "{}", fmt_num(*v)),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Var(n) => f.write_str(n),
            Expr::Neg(e) => {
                f.write_str("-")?;
                // a bare literal would be folded into a negative constant on reparse
                if matches!(**e, Expr::Num(_)) {
                    write!(f, "({e})")
                } else {
                    e.fmt_prec(f, 7)
                }
            }
            Expr::Not(e) => {
                f.write_str("not ")?;
                e.fmt_prec(f, 3)
            }
            Expr::Binary(op, a, b) => match op {
                BinOp::Min | BinOp::Max | BinOp::Pow => {
                    let name = match op {
                        BinOp::Min => "min",
                        BinOp::Max => "max",
                        _ => "pow",
                    };
                    write!(f, "{name}({a}, {b})")
                }
                _ => {
                    let sym = match op {
                        BinOp::Add => "+",
                        BinOp::Sub => "-",
                        BinOp::Mul => "*",
                        _ => "/",
                    };
                    a.fmt_prec(f, p)?;
                    write!(f, " {sym} ")?;
                    b.fmt_prec(f, p + 1)
                }
            },
            Expr::Cmp(op, a, b) => {
                a.fmt_prec(f, 5)?;
                write!(f, " {} ", op.symbol())?;
                b.fmt_prec(f, 5)
            }
            Expr::And(a, b) => {
                a.fmt_prec(f, 2)?;
                f.write_str(" and ")?;
                b.fmt_prec(f, 3)
            }
            Expr::Or(a, b) => {
                a.fmt_prec(f, 1)?;
                f.write_str(" or ")?;
                b.fmt_prec(f, 2)
            }
            Expr::If(c, t, e) => {
                write!(f, "if ")?;
                c.fmt_prec(f, 1)?;
                f.write_str(" then ")?;
                t.fmt_prec(f, 1)?;
                f.write_str(" else ")?;
                e.fmt_prec(f, 0)
            }
        }
    }
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_num(v: f64) -> String {
    let s = format!("{v:?}");
    s.strip_suffix(".0").map(str::to_owned).unwrap_or(s)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// An [`Expr`] whose variables are resolved to positions in a state vector.
#[derive(Debug, Clone, PartialEq)]
pub enum IndexedExpr {
    Num(f64),
    Bool(bool),
    Var(usize),
    Neg(Box<IndexedExpr>),
    Not(Box<IndexedExpr>),
    Binary(BinOp, Box<IndexedExpr>, Box<IndexedExpr>),
    Cmp(CmpOp, Box<IndexedExpr>, Box<IndexedExpr>),
    And(Box<IndexedExpr>, Box<IndexedExpr>),
    Or(Box<IndexedExpr>, Box<IndexedExpr>),
    If(Box<IndexedExpr>, Box<IndexedExpr>, Box<IndexedExpr>),
}

impl IndexedExpr {
    pub fn eval(&self, x: &[f64]) -> Result<Value, EvalError> {
        match self {
            IndexedExpr::Num(v) => Ok(Value::Real(*v)),
            IndexedExpr::Bool(b) => Ok(Value::Bool(*b)),
            IndexedExpr::Var(i) => Ok(Value::Real(x[*i])),
            IndexedExpr::Neg(e) => Ok(Value::Real(-e.eval_real(x)?)),
            IndexedExpr::Not(e) => Ok(Value::Bool(!e.eval_bool(x)?)),
            IndexedExpr::Binary(op, a, b) => {
                apply_binary(*op, a.eval_real(x)?, b.eval_real(x)?).map(Value::Real)
            }
            IndexedExpr::Cmp(op, a, b) => {
                Ok(Value::Bool(op.holds(a.eval_real(x)?, b.eval_real(x)?)))
            }
            IndexedExpr::And(a, b) => Ok(Value::Bool(a.eval_bool(x)? && b.eval_bool(x)?)),
            IndexedExpr::Or(a, b) => Ok(Value::Bool(a.eval_bool(x)? || b.eval_bool(x)?)),
            IndexedExpr::If(c, t, e) => {
                if c.eval_bool(x)? {
                    t.eval(x)
                } else {
                    e.eval(x)
                }
            }
        }
    }

    pub fn eval_real(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.eval(x)?.as_real()
    }

    pub fn eval_bool(&self, x: &[f64]) -> Result<bool, EvalError> {
        self.eval(x)?.as_bool()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn const_type_is_one() {
        assert_eq!(Expr::num(1.0).eval_real(&[("K", 3.0)]).unwrap(), 1.0);
    }

    #[test]
    fn completed_rate_at_zero_data() {
        // lambda / (mu + D) with lambda = 0.5, mu = 10
        let e = Expr::binary(
            BinOp::Div,
            Expr::var("lambda"),
            Expr::binary(BinOp::Add, Expr::var("mu"), Expr::var("D")),
        );
        let v = e
            .eval_real(&[("lambda", 0.5), ("mu", 10.0), ("D", 0.0)])
            .unwrap();
        assert_eq!(v, 0.05);
    }

    #[test]
    fn closed_guard_boundary() {
        let e = Expr::cmp(CmpOp::Le, Expr::var("K"), Expr::var("k2"));
        assert!(e.eval_bool(&[("K", 250.0), ("k2", 250.0)]).unwrap());
    }

    #[test]
    fn errors() {
        assert_eq!(
            Expr::var("Q").eval(&[("K", 1.0)]),
            Err(EvalError::UnknownVariable("Q".into()))
        );
        let div = Expr::binary(BinOp::Div, Expr::num(1.0), Expr::var("D"));
        assert_eq!(div.eval(&[("D", 0.0)]), Err(EvalError::DivisionByZero));
        let bad = Expr::binary(BinOp::Add, Expr::Bool(true), Expr::num(1.0));
        assert!(matches!(
            bad.eval(&[("D", 0.0)]),
            Err(EvalError::TypeMismatch { .. })
        ));
        assert!(bad.infer_type().is_err());
        let pw = Expr::binary(BinOp::Pow, Expr::num(-1.0), Expr::num(0.5));
        assert!(matches!(pw.eval(&[("D", 0.0)]), Err(EvalError::Domain(_))));
    }

    #[test]
    fn display_parenthesizes_by_precedence() {
        let e = Expr::binary(
            BinOp::Mul,
            Expr::binary(BinOp::Sub, Expr::var("a"), Expr::var("b")),
            Expr::Neg(Box::new(Expr::num(2.0))),
        );
        assert_eq!(e.to_string(), "(a - b) * -(2)");
        let e = Expr::binary(
            BinOp::Sub,
            Expr::var("a"),
            Expr::binary(BinOp::Sub, Expr::var("b"), Expr::num(-1.5)),
        );
        assert_eq!(e.to_string(), "a - (b - -1.5)");
    }

    #[test]
    fn indexed_matches_named() {
        let e = Expr::If(
            Box::new(Expr::cmp(CmpOp::Ge, Expr::var("K"), Expr::num(3.0))),
            Box::new(Expr::binary(BinOp::Max, Expr::var("K"), Expr::var("D"))),
            Box::new(Expr::num(0.0)),
        );
        let vars = vec!["D".to_string(), "K".to_string()];
        let ix = e.index(&vars).unwrap();
        for (d, k) in [(1.0, 5.0), (7.0, 4.0), (2.0, 1.0)] {
            assert_eq!(
                ix.eval(&[d, k]).unwrap(),
                e.eval(&[("D", d), ("K", k)]).unwrap()
            );
        }
    }
}
