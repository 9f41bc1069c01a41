use serde::{Deserialize, Serialize};

use crate::linalg::least_squares;
use crate::linprog::{self, LinearProgram, Relation};
use crate::model::ScreeningModel;
use crate::scalar::{max_of, Scalar};

use super::{atom_utilities, ScreeningError, ScreeningSolution};

/// Residual threshold for an exactly solvable transfer system.
pub const TRANSFER_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquationResidual<T> {
    pub equation: String,
    pub residual: T,
}

/// An equation that cannot hold together with the equations before it.
/// `implied[h]` is the transfer at atom `h` that would satisfy it with the
/// other transfers held at the base solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferConflict<T> {
    pub equation: String,
    pub implied: Vec<Option<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TransferRecovery<T> {
    Recovered {
        transfers: Vec<T>,
        residual: T,
        threshold: f64,
    },
    Infeasible {
        ls_residual: T,
        /// Least total absolute violation over all transfer vectors.
        gap: T,
        ls_transfers: Vec<T>,
        equations: Vec<EquationResidual<T>>,
        /// Solution of the largest consistent leading subsystem.
        base: Vec<T>,
        conflicts: Vec<TransferConflict<T>>,
        threshold: f64,
    },
}

impl<T> TransferRecovery<T> {
    pub fn transfers(&self) -> Option<&[T]> {
        match self {
            TransferRecovery::Recovered { transfers, .. } => Some(transfers),
            TransferRecovery::Infeasible { .. } => None,
        }
    }
}

fn norm<T: Scalar>(r: &[T]) -> T {
    r.iter().fold(T::zero(), |a, x| a + x.clone() * x.clone()).sqrt()
}

/// Equations `PC_1` and downward `IC_i` at equality, rows scaled to unit
/// max-abs coefficient.
fn system<T: Scalar>(model: &ScreeningModel<T>, sol: &ScreeningSolution<T>) -> (Vec<String>, Vec<Vec<T>>, Vec<T>) {
    let n = model.num_types();
    let beta = sol.device(&model.prior);
    let u = atom_utilities(model, sol);
    let mut names = Vec::new();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..n {
        let c: Vec<T> = if i == 0 {
            beta[0].clone()
        } else {
            beta[i].iter().zip(&beta[i - 1]).map(|(x, y)| x.clone() - y.clone()).collect()
        };
        let rhs = c.iter().zip(&u[i]).fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.clone());
        let scale = c.iter().fold(T::zero(), |m, x| max_of(m, x.abs()));
        let (c, rhs) = if scale > T::zero() {
            (c.into_iter().map(|x| x / scale.clone()).collect(), rhs / scale)
        } else {
            (c, rhs)
        };
        names.push(if i == 0 { "PC_1".to_string() } else { format!("IC_{}", i + 1) });
        a.push(c);
        b.push(rhs);
    }
    (names, a, b)
}

fn l1_gap<T: Scalar>(a: &[Vec<T>], b: &[T], h: usize) -> Result<T, ScreeningError> {
    let m = a.len();
    let nv = h + 2 * m;
    let mut obj = vec![T::zero(); nv];
    for x in obj.iter_mut().skip(h) {
        *x = -T::one();
    }
    let mut lp = LinearProgram::new(nv).maximize(obj);
    for j in 0..h {
        lp.set_free(j);
    }
    for (k, row) in a.iter().enumerate() {
        let mut c = row.clone();
        c.resize(nv, T::zero());
        c[h + k] = -T::one();
        c[h + m + k] = T::one();
        lp.push(c, Relation::Eq, b[k].clone());
    }
    let sol = linprog::solve(&lp)?.optimal().ok_or(ScreeningError::Infeasible)?;
    Ok(-sol.value)
}

/// Solves for transfers making participation of the lowest type and every
/// downward adjacent incentive constraint bind.
pub fn recover_transfers<T: Scalar>(
    model: &ScreeningModel<T>,
    sol: &ScreeningSolution<T>,
) -> Result<TransferRecovery<T>, ScreeningError> {
    let h = sol.atoms.len();
    let (names, a, b) = system(model, sol);
    let (x, r) = least_squares(&a, &b, h);
    let residual = norm(&r);
    let tol = T::lit(TRANSFER_TOL);
    if residual <= tol {
        return Ok(TransferRecovery::Recovered { transfers: x, residual, threshold: TRANSFER_TOL });
    }
    let gap = l1_gap(&a, &b, h)?;
    let equations = names
        .iter()
        .zip(&r)
        .map(|(e, x)| EquationResidual { equation: e.clone(), residual: x.clone() })
        .collect();

    let mut keep: Vec<usize> = Vec::new();
    let mut base = vec![T::zero(); h];
    let mut conflicts = Vec::new();
    for k in 0..a.len() {
        let mut rows: Vec<Vec<T>> = keep.iter().map(|&j| a[j].clone()).collect();
        let mut rhs: Vec<T> = keep.iter().map(|&j| b[j].clone()).collect();
        rows.push(a[k].clone());
        rhs.push(b[k].clone());
        let (y, res) = least_squares(&rows, &rhs, h);
        if norm(&res) <= tol {
            keep.push(k);
            base = y;
            continue;
        }
        let dot = a[k].iter().zip(&base).fold(T::zero(), |acc, (c, t)| acc + c.clone() * t.clone());
        let implied = (0..h)
            .map(|j| {
                if a[k][j].abs() <= T::pivot_eps() {
                    None
                } else {
                    let rest = dot.clone() - a[k][j].clone() * base[j].clone();
                    Some((b[k].clone() - rest) / a[k][j].clone())
                }
            })
            .collect();
        conflicts.push(TransferConflict { equation: names[k].clone(), implied });
    }
    Ok(TransferRecovery::Infeasible {
        ls_residual: residual,
        gap,
        ls_transfers: x,
        equations,
        base,
        conflicts,
        threshold: TRANSFER_TOL,
    })
}
