//! Dense two-phase simplex with Dantzig pricing and a Bland fallback.
//!
//! Maximizes `c.x` subject to equality and inequality rows, with each
//! variable either nonnegative or free. The returned point is a basic
//! feasible solution, so at most as many sign-constrained variables are
//! nonzero as there are linearly independent rows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::scalar::{dot, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Eq,
    Ge,
    Le,
}

#[derive(Clone, Debug)]
pub struct Constraint<T> {
    pub coeffs: Vec<T>,
    pub relation: Relation,
    pub rhs: T,
}

#[derive(Clone, Debug)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
    pub free: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub value: T,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome<T> {
    Optimal(LpSolution<T>),
    Infeasible,
    Unbounded,
}

impl<T> LpOutcome<T> {
    pub fn optimal(self) -> Option<LpSolution<T>> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LpError {
    #[error("row {row} has {got} coefficients, expected {expected}")]
    Dimension { row: usize, expected: usize, got: usize },
    #[error("simplex did not terminate within {0} pivots")]
    IterationLimit(usize),
}

const DEGENERATE_RUN: usize = 50;
const MAX_PIVOTS: usize = 200_000;

impl<T: Scalar> LinearProgram<T> {
    /// `n` nonnegative variables, zero objective, no rows.
    pub fn new(n: usize) -> Self {
        LinearProgram {
            objective: vec![T::zero(); n],
            constraints: Vec::new(),
            free: vec![false; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn maximize(mut self, c: Vec<T>) -> Self {
        self.objective = c;
        self
    }

    pub fn push(&mut self, coeffs: Vec<T>, relation: Relation, rhs: T) {
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn set_free(&mut self, j: usize) {
        self.free[j] = true;
    }

    /// Largest violation of any row or sign restriction at `x`.
    pub fn violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for c in &self.constraints {
            let lhs = dot(&c.coeffs, x);
            let v = match c.relation {
                Relation::Eq => (lhs - c.rhs.clone()).abs(),
                Relation::Ge => c.rhs.clone() - lhs,
                Relation::Le => lhs - c.rhs.clone(),
            };
            if v > worst {
                worst = v;
            }
        }
        for (xj, free) in x.iter().zip(&self.free) {
            if !free && -xj.clone() > worst {
                worst = -xj.clone();
            }
        }
        worst
    }
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    obj: Vec<T>,
    basis: Vec<usize>,
    tol: T,
}

enum Status {
    Optimal,
    Unbounded,
}

impl<T: Scalar> Tableau<T> {
    fn width(&self) -> usize {
        self.obj.len() - 1
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for x in self.rows[r].iter_mut() {
            *x = x.clone() / p.clone();
        }
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (x, pv) in row.iter_mut().zip(&prow) {
                if !pv.is_zero() {
                    *x = x.clone() - f.clone() * pv.clone();
                }
            }
            row[c] = T::zero();
        }
        if !self.obj[c].is_zero() {
            let f = self.obj[c].clone();
            for (x, pv) in self.obj.iter_mut().zip(&prow) {
                if !pv.is_zero() {
                    *x = x.clone() - f.clone() * pv.clone();
                }
            }
            self.obj[c] = T::zero();
        }
        self.basis[r] = c;
    }

    fn set_objective(&mut self, cost: &[T]) {
        let w = self.width();
        let mut obj: Vec<T> = cost.iter().cloned().chain(std::iter::once(T::zero())).collect();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b].clone();
            if cb.is_zero() {
                continue;
            }
            for j in 0..=w {
                obj[j] = obj[j].clone() - cb.clone() * self.rows[r][j].clone();
            }
        }
        self.obj = obj;
    }

    /// Dantzig pricing, falling back to Bland's rule after a run of
    /// degenerate pivots so that cycling cannot persist.
    fn run(&mut self, allowed: &[bool], pivots: &mut usize) -> Result<Status, LpError> {
        let w = self.width();
        let mut stalled = 0usize;
        loop {
            let bland = stalled > DEGENERATE_RUN;
            let mut entering: Option<usize> = None;
            for j in (0..w).filter(|&j| allowed[j] && self.obj[j] > self.tol) {
                if bland {
                    entering = Some(j);
                    break;
                }
                if entering.is_none_or(|c| self.obj[j] > self.obj[c]) {
                    entering = Some(j);
                }
            }
            let Some(c) = entering else {
                return Ok(Status::Optimal);
            };
            let mut leave: Option<(usize, T)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if row[c] > self.tol {
                    let ratio = row[w].clone() / row[c].clone();
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, best)) => {
                            let diff = ratio.clone() - best.clone();
                            let better_tie = if bland {
                                self.basis[r] < self.basis[br]
                            } else {
                                row[c] > self.rows[br][c]
                            };
                            if diff < -T::pivot_eps() || (diff.abs() <= T::pivot_eps() && better_tie) {
                                Some((r, ratio))
                            } else {
                                Some((br, best))
                            }
                        }
                    };
                }
            }
            let Some((r, step)) = leave else {
                return Ok(Status::Unbounded);
            };
            if step <= T::pivot_eps() {
                stalled += 1;
            } else {
                stalled = 0;
            }
            self.pivot(r, c);
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(LpError::IterationLimit(MAX_PIVOTS));
            }
        }
    }
}

/// Solves the program. Dimension mismatches and runaway pivoting are errors;
/// infeasibility and unboundedness are outcomes.
pub fn solve<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpOutcome<T>, LpError> {
    let n = lp.num_vars();
    for (i, c) in lp.constraints.iter().enumerate() {
        if c.coeffs.len() != n {
            return Err(LpError::Dimension { row: i, expected: n, got: c.coeffs.len() });
        }
    }
    let tol = T::pivot_eps() * T::lit(100.0);

    // structural columns: one per variable plus a negative part for free ones
    let mut neg_col = vec![None; n];
    let mut ns = n;
    for j in 0..n {
        if lp.free[j] {
            neg_col[j] = Some(ns);
            ns += 1;
        }
    }
    let m = lp.constraints.len();
    let mut slack_col = vec![None; m];
    let mut ncols = ns;
    for (i, c) in lp.constraints.iter().enumerate() {
        if c.relation != Relation::Eq {
            slack_col[i] = Some(ncols);
            ncols += 1;
        }
    }

    let mut base: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut needs_art = Vec::with_capacity(m);
    for (i, c) in lp.constraints.iter().enumerate() {
        let mut row = vec![T::zero(); ncols + 1];
        for j in 0..n {
            row[j] = c.coeffs[j].clone();
            if let Some(k) = neg_col[j] {
                row[k] = -c.coeffs[j].clone();
            }
        }
        if let Some(s) = slack_col[i] {
            row[s] = if c.relation == Relation::Ge { -T::one() } else { T::one() };
        }
        row[ncols] = c.rhs.clone();
        if row[ncols] < T::zero() {
            for x in row.iter_mut() {
                *x = -x.clone();
            }
        }
        let slack_ok = slack_col[i].map(|s| row[s] == T::one()).unwrap_or(false);
        needs_art.push(!slack_ok);
        base.push(row);
    }
    let n_art = needs_art.iter().filter(|&&a| a).count();
    let width = ncols + n_art;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut next_art = ncols;
    for (i, row) in base.iter().enumerate() {
        let mut r: Vec<T> = row[..ncols].to_vec();
        r.extend((0..n_art).map(|_| T::zero()));
        r.push(row[ncols].clone());
        if needs_art[i] {
            r[next_art] = T::one();
            basis.push(next_art);
            next_art += 1;
        } else {
            basis.push(slack_col[i].unwrap());
        }
        rows.push(r);
    }

    let mut tab = Tableau { rows, obj: vec![T::zero(); width + 1], basis, tol: tol.clone() };
    let mut pivots = 0;

    if n_art > 0 {
        let mut cost = vec![T::zero(); width];
        for c in cost.iter_mut().skip(ncols) {
            *c = -T::one();
        }
        tab.set_objective(&cost);
        let allowed = vec![true; width];
        tab.run(&allowed, &mut pivots)?;
        let scale = base
            .iter()
            .fold(T::one(), |acc, r| if r[ncols] > acc { r[ncols].clone() } else { acc });
        // objective row rhs holds -z, and z = -(sum of artificials)
        let infeas = tab.obj[width].clone();
        if infeas > tol.clone() * scale {
            return Ok(LpOutcome::Infeasible);
        }
        // drive zero-level artificials out, dropping redundant rows
        let mut r = 0;
        while r < tab.rows.len() {
            if tab.basis[r] >= ncols {
                let col = (0..ncols).find(|&j| tab.rows[r][j].abs() > tol);
                match col {
                    Some(j) => {
                        tab.pivot(r, j);
                        r += 1;
                    }
                    None => {
                        tab.rows.remove(r);
                        tab.basis.remove(r);
                        base.remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }
    }

    let mut cost = vec![T::zero(); width];
    for j in 0..n {
        cost[j] = lp.objective[j].clone();
        if let Some(k) = neg_col[j] {
            cost[k] = -lp.objective[j].clone();
        }
    }
    tab.set_objective(&cost);
    let allowed: Vec<bool> = (0..width).map(|j| j < ncols).collect();
    if let Status::Unbounded = tab.run(&allowed, &mut pivots)? {
        return Ok(LpOutcome::Unbounded);
    }

    // basic values, refreshed from the original rows when the basis allows
    let mut col_val = vec![T::zero(); ncols];
    let from_tableau: Vec<T> = tab.rows.iter().map(|r| r[width].clone()).collect();
    let bmat: Vec<Vec<T>> = base
        .iter()
        .map(|row| tab.basis.iter().map(|&b| row[b].clone()).collect())
        .collect();
    let rhs: Vec<T> = base.iter().map(|row| row[ncols].clone()).collect();
    let refreshed = if T::is_exact() { None } else { linalg::solve_square(&bmat, &rhs) };
    let xb = match refreshed {
        Some(v) if v.iter().all(|x| *x >= -tol.clone()) => v,
        _ => from_tableau,
    };
    for (&b, v) in tab.basis.iter().zip(xb) {
        col_val[b] = if v < T::zero() { T::zero() } else { v };
    }
    let x: Vec<T> = (0..n)
        .map(|j| match neg_col[j] {
            Some(k) => col_val[j].clone() - col_val[k].clone(),
            None => col_val[j].clone(),
        })
        .collect();
    let value = dot(&lp.objective, &x);
    Ok(LpOutcome::Optimal(LpSolution { x, value }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use num_rational::BigRational;

    #[test]
    fn small_max() {
        // max 3x + 2y, x + y <= 4, x + 3y <= 6, x <= 3
        let mut lp = LinearProgram::<f64>::new(2).maximize(vec![3.0, 2.0]);
        lp.push(vec![1.0, 1.0], Relation::Le, 4.0);
        lp.push(vec![1.0, 3.0], Relation::Le, 6.0);
        lp.push(vec![1.0, 0.0], Relation::Le, 3.0);
        let s = solve(&lp).unwrap().optimal().unwrap();
        assert!((s.value - 11.0).abs() < 1e-9);
        assert!((s.x[0] - 3.0).abs() < 1e-9 && (s.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::<f64>::new(1).maximize(vec![1.0]);
        lp.push(vec![1.0], Relation::Ge, 2.0);
        lp.push(vec![1.0], Relation::Le, 1.0);
        assert_eq!(solve(&lp).unwrap(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::<f64>::new(2).maximize(vec![1.0, 0.0]);
        lp.push(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(solve(&lp).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn free_variable_and_equality() {
        // max -|x - 2| style: max -y, y >= x - 2, y >= 2 - x, x free, x = -1
        let mut lp = LinearProgram::<f64>::new(2).maximize(vec![0.0, -1.0]);
        lp.set_free(0);
        lp.push(vec![-1.0, 1.0], Relation::Ge, -2.0);
        lp.push(vec![1.0, 1.0], Relation::Ge, 2.0);
        lp.push(vec![1.0, 0.0], Relation::Eq, -1.0);
        let s = solve(&lp).unwrap().optimal().unwrap();
        assert!((s.x[0] + 1.0).abs() < 1e-9);
        assert!((s.value + 3.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_rows() {
        let mut lp = LinearProgram::<f64>::new(3).maximize(vec![1.0, 2.0, 3.0]);
        lp.push(vec![1.0, 1.0, 1.0], Relation::Eq, 1.0);
        lp.push(vec![2.0, 2.0, 2.0], Relation::Eq, 2.0);
        lp.push(vec![0.0, 0.0, 1.0], Relation::Le, 0.5);
        let s = solve(&lp).unwrap().optimal().unwrap();
        assert!((s.value - 2.5).abs() < 1e-9);
    }

    #[test]
    fn exact_rationals() {
        let mut lp: LinearProgram<BigRational> =
            LinearProgram::new(2).maximize(vec![ratio(1, 1), ratio(1, 1)]);
        lp.push(vec![ratio(3, 1), ratio(1, 1)], Relation::Le, ratio(1, 1));
        lp.push(vec![ratio(1, 1), ratio(3, 1)], Relation::Le, ratio(1, 1));
        let s = solve(&lp).unwrap().optimal().unwrap();
        assert_eq!(s.value, ratio(1, 2));
        assert_eq!(s.x, vec![ratio(1, 4), ratio(1, 4)]);
    }
}
