//! Guards as boolean trees over comparison atoms.
//!
//! Each atom `lhs ⋈ rhs` is monitored through its residual `lhs - rhs`.
//! Atoms are read as closed sets: `<` behaves like `<=`. An equality atom
//! only holds exactly on its root, so when a crossing of that root has just
//! been located the atom is forced true at the located time.

use crate::model::{BinOp, CmpOp, EvalError, Expr, IndexedExpr};

use super::rk45::Step;

#[derive(Debug, Clone)]
enum Node {
    Const(bool),
    Atom(usize),
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    If(Box<Node>, Box<Node>, Box<Node>),
}

#[derive(Debug, Clone)]
pub struct Atom {
    pub op: CmpOp,
    pub residual: IndexedExpr,
}

impl Atom {
    fn holds(&self, r: f64) -> bool {
        match self.op {
            CmpOp::Lt | CmpOp::Le => r <= 0.0,
            CmpOp::Gt | CmpOp::Ge => r >= 0.0,
            CmpOp::Eq => r == 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Guard {
    root: Node,
    pub atoms: Vec<Atom>,
}

impl Guard {
    pub fn new(e: &Expr, vars: &[String]) -> Result<Self, EvalError> {
        let mut atoms = Vec::new();
        let root = build(e, vars, &mut atoms)?;
        Ok(Guard { root, atoms })
    }

    pub fn is_trivially_true(&self) -> bool {
        matches!(self.root, Node::Const(true))
    }

    fn eval_with(
        &self,
        truth: &dyn Fn(usize) -> Result<bool, EvalError>,
    ) -> Result<bool, EvalError> {
        fn go(
            n: &Node,
            truth: &dyn Fn(usize) -> Result<bool, EvalError>,
        ) -> Result<bool, EvalError> {
            Ok(match n {
                Node::Const(b) => *b,
                Node::Atom(i) => truth(*i)?,
                Node::Not(a) => !go(a, truth)?,
                Node::And(a, b) => go(a, truth)? && go(b, truth)?,
                Node::Or(a, b) => go(a, truth)? || go(b, truth)?,
                Node::If(c, a, b) => {
                    if go(c, truth)? {
                        go(a, truth)?
                    } else {
                        go(b, truth)?
                    }
                }
            })
        }
        go(&self.root, truth)
    }

    /// Closed-set truth at `x`.
    pub fn holds(&self, x: &[f64]) -> Result<bool, EvalError> {
        self.eval_with(&|i| {
            let a = &self.atoms[i];
            Ok(a.holds(a.residual.eval_real(x)?))
        })
    }

    /// Truth on entering `x` with velocity `dx`: an inequality atom sitting
    /// exactly on its boundary holds only if the flow points strictly into
    /// it. A state resting on the boundary does not enable the guard.
    pub fn holds_on_entry(&self, x: &[f64], dx: &[f64]) -> Result<bool, EvalError> {
        self.eval_with(&|i| {
            let a = &self.atoms[i];
            let r = a.residual.eval_real(x)?;
            if r != 0.0 || a.op == CmpOp::Eq {
                return Ok(a.holds(r));
            }
            let rate = directional(&a.residual, x, dx)?;
            Ok(match a.op {
                CmpOp::Lt | CmpOp::Le => rate < 0.0,
                _ => rate > 0.0,
            })
        })
    }

    fn holds_forced(&self, x: &[f64], forced: &[bool]) -> Result<bool, EvalError> {
        self.eval_with(&|i| {
            if forced[i] {
                return Ok(true);
            }
            let a = &self.atoms[i];
            Ok(a.holds(a.residual.eval_real(x)?))
        })
    }

    /// Earliest time in `(t0, t1]` of `step` at which the guard holds,
    /// assuming it does not hold at `t0`. `samples` are dense-output states
    /// at equally spaced times `ts` covering the step.
    pub fn first_true(
        &self,
        step: &Step,
        ts: &[f64],
        samples: &[Vec<f64>],
        tol: f64,
    ) -> Result<Option<f64>, EvalError> {
        if self.is_trivially_true() {
            return Ok(Some(step.t0));
        }
        let scale = samples.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        let noise = 1e3 * f64::EPSILON * scale;
        let mut candidates: Vec<(f64, usize)> = Vec::new();
        for (i, atom) in self.atoms.iter().enumerate() {
            let r: Vec<f64> = samples
                .iter()
                .map(|y| atom.residual.eval_real(y))
                .collect::<Result<_, _>>()?;
            for k in 0..r.len() - 1 {
                let (a, b) = (r[k], r[k + 1]);
                if a != 0.0 && (b == 0.0 || (a < 0.0) != (b < 0.0)) {
                    let t = bisect(ts[k], ts[k + 1], tol, |t| {
                        let v = atom.residual.eval_real(&step.at(t))?;
                        Ok(v == 0.0 || (v < 0.0) != (a < 0.0))
                    })?;
                    candidates.push((t, i));
                    break;
                }
            }
            // a residual that dips to zero and turns back inside the step
            for k in 1..r.len() - 1 {
                let (a, m, b) = (r[k - 1].abs(), r[k].abs(), r[k + 1].abs());
                let same_sign =
                    (r[k - 1] < 0.0) == (r[k] < 0.0) && (r[k] < 0.0) == (r[k + 1] < 0.0);
                // the residual has to turn back by more than rounding noise,
                // otherwise an asymptotic approach would count as a touch
                if a - m > noise && b - m > noise && same_sign && r[k] != 0.0 && !atom.holds(r[k]) {
                    let (t, v) = minimize_abs(ts[k - 1], ts[k + 1], tol, |t| {
                        atom.residual.eval_real(&step.at(t))
                    })?;
                    if v.abs() <= noise.max(1e-9 * a.min(b)) {
                        candidates.push((t, i));
                    }
                }
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(t, _) in &candidates {
            let forced: Vec<bool> = (0..self.atoms.len())
                .map(|i| {
                    candidates
                        .iter()
                        .any(|&(s, j)| j == i && (s - t).abs() <= tol)
                })
                .collect();
            if self.holds_forced(&step.at(t), &forced)? {
                return Ok(Some(t));
            }
        }
        // fall back to bisection on the boolean value
        if !self.holds(&step.y0)? && self.holds(&step.y1)? {
            let t = bisect(step.t0, step.t1(), tol, |t| self.holds(&step.at(t)))?;
            return Ok(Some(t));
        }
        Ok(None)
    }
}

fn build(e: &Expr, vars: &[String], atoms: &mut Vec<Atom>) -> Result<Node, EvalError> {
    Ok(match e {
        Expr::Bool(b) => Node::Const(*b),
        Expr::Cmp(op, l, r) => {
            let residual = Expr::binary(BinOp::Sub, (**l).clone(), (**r).clone()).index(vars)?;
            atoms.push(Atom { op: *op, residual });
            Node::Atom(atoms.len() - 1)
        }
        Expr::Not(a) => Node::Not(Box::new(build(a, vars, atoms)?)),
        Expr::And(a, b) => Node::And(
            Box::new(build(a, vars, atoms)?),
            Box::new(build(b, vars, atoms)?),
        ),
        Expr::Or(a, b) => Node::Or(
            Box::new(build(a, vars, atoms)?),
            Box::new(build(b, vars, atoms)?),
        ),
        Expr::If(c, a, b) => Node::If(
            Box::new(build(c, vars, atoms)?),
            Box::new(build(a, vars, atoms)?),
            Box::new(build(b, vars, atoms)?),
        ),
        other => {
            return Err(EvalError::TypeMismatch {
                expected: crate::model::Type::Bool,
                found: other.infer_type().unwrap_or(crate::model::Type::Real),
            })
        }
    })
}

/// Central difference of `r` along `dx` at `x`.
fn directional(r: &IndexedExpr, x: &[f64], dx: &[f64]) -> Result<f64, EvalError> {
    let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let speed = dx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if speed == 0.0 {
        return Ok(0.0);
    }
    let eps = 1e-7 * scale / speed;
    let fwd: Vec<f64> = x.iter().zip(dx).map(|(a, d)| a + eps * d).collect();
    let back: Vec<f64> = x.iter().zip(dx).map(|(a, d)| a - eps * d).collect();
    Ok((r.eval_real(&fwd)? - r.eval_real(&back)?) / (2.0 * eps))
}

/// Smallest `t` in `(lo, hi]` (to within `tol`) with `p(t)`, given `p(hi)`.
pub fn bisect(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    p: impl Fn(f64) -> Result<bool, EvalError>,
) -> Result<f64, EvalError> {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if p(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Golden-section search for the minimum of `|f|` on `[lo, hi]`.
fn minimize_abs(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    f: impl Fn(f64) -> Result<f64, EvalError>,
) -> Result<(f64, f64), EvalError> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let mut fa = f(a)?.abs();
    let mut fb = f(b)?.abs();
    while hi - lo > tol {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a)?.abs();
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b)?.abs();
        }
    }
    let t = 0.5 * (lo + hi);
    Ok((t, f(t)?))
}
