use serde::{Deserialize, Serialize};

use super::Tdsha;
use crate::model::{BinOp, Expr};

/// Right-hand side of the ODEs of one mode: `rhs[j]` is `dX_j/dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledField {
    pub mode: usize,
    pub rhs: Vec<Expr>,
}

/// Sums `s[j] * f(X)` over the flows of `mode`, in flow insertion order.
/// Zero stoichiometric entries contribute nothing; a variable without
/// contributions gets the constant `0`.
pub fn assemble_field(t: &Tdsha, mode: usize) -> CompiledField {
    let mut rhs: Vec<Option<Expr>> = vec![None; t.variables.len()];
    for f in t.flows_in(mode) {
        for (j, &s) in f.stoich.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let term = Expr::product(Expr::num(s), f.rate.clone());
            rhs[j] = Some(match rhs[j].take() {
                None => term,
                Some(acc) => Expr::binary(BinOp::Add, acc, term),
            });
        }
    }
    CompiledField {
        mode,
        rhs: rhs
            .into_iter()
            .map(|e| e.unwrap_or(Expr::num(0.0)))
            .collect(),
    }
}
