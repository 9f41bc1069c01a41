//! Screening with limited commitment.
//!
//! The relaxed program maximizes expected virtual surplus by concavifying the
//! pointwise virtual value over posteriors. The monotone and full-adjacent
//! programs add the monotonicity condition and the adjacent incentive
//! constraints with explicit transfers.

mod candidates;
mod examples;
mod programs;
mod transfers;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concavify::{self, cav, CandidateSet, ConcavifyError};
use crate::linprog::LpError;
use crate::model::{Belief, ModelError, Outcome, PosteriorPolicy, ScreeningModel};
use crate::scalar::Scalar;

pub use candidates::{arrangement_vertices, default_candidates, grid, indifference_normals};
pub use examples::{posted_price_model, three_type_example};
pub use programs::{solve_full_adjacent, solve_with_monotonicity, FullOptions};
pub use transfers::{recover_transfers, EquationResidual, TransferConflict, TransferRecovery};

/// Relative tolerance for ties in the ex-post and allocation argmax.
pub const ARGMAX_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ScreeningError {
    #[error("invalid model: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("the screening programs require transfers")]
    NoTransfers,
    #[error("solution carries no transfers")]
    MissingTransfers,
    #[error("no candidate mixture satisfies the constraints")]
    Infeasible,
    #[error(transparent)]
    Concavify(#[from] ConcavifyError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Program {
    Relaxed,
    Monotone,
    FullAdjacent,
}

/// One posterior of a screening mechanism with its allocation lottery and
/// the principal's ex-post choice after each allocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningAtom<T> {
    pub belief: Belief<T>,
    pub weight: T,
    pub allocation: Vec<T>,
    pub expost: Vec<usize>,
    pub transfer: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningSolution<T> {
    pub program: Program,
    pub value: T,
    pub atoms: Vec<ScreeningAtom<T>>,
}

impl<T: Scalar> ScreeningSolution<T> {
    pub fn policy(&self) -> PosteriorPolicy<T> {
        PosteriorPolicy::new(self.atoms.iter().map(|a| (a.belief.clone(), a.weight.clone())).collect())
    }

    /// `beta[i][h]`, the probability that type `i` lands on atom `h`.
    pub fn device(&self, prior: &[T]) -> Vec<Vec<T>> {
        prior
            .iter()
            .enumerate()
            .map(|(i, p)| {
                self.atoms
                    .iter()
                    .map(|a| a.belief.get(i).clone() * a.weight.clone() / p.clone())
                    .collect()
            })
            .collect()
    }

    pub fn transfers(&self) -> Option<Vec<T>> {
        self.atoms.iter().map(|a| a.transfer.clone()).collect()
    }

    pub fn with_transfers(mut self, t: &[T]) -> Self {
        for (a, x) in self.atoms.iter_mut().zip(t) {
            a.transfer = Some(x.clone());
        }
        self
    }
}

pub(crate) fn ensure_valid<T: Scalar>(model: &ScreeningModel<T>, tol: f64) -> Result<(), ScreeningError> {
    let r = model.validate(tol);
    if !r.is_valid() {
        return Err(ScreeningError::Invalid(r.errors));
    }
    if !model.transfers {
        return Err(ScreeningError::NoTransfers);
    }
    Ok(())
}

/// Virtual utilities
/// `u_i - ((1 - sum_{n<=i} mu0_n) / mu0_i) (u_{i+1} - u_i)`, indexed like the
/// agent table.
pub fn virtual_utility<T: Scalar>(model: &ScreeningModel<T>) -> Vec<Vec<Vec<T>>> {
    let n = model.num_types();
    let mut cum = T::zero();
    (0..n)
        .map(|i| {
            cum = cum.clone() + model.prior[i].clone();
            let k = if i + 1 == n {
                T::zero()
            } else {
                (T::one() - cum.clone()) / model.prior[i].clone()
            };
            model.agent[i]
                .iter()
                .enumerate()
                .map(|(q, row)| {
                    row.iter()
                        .enumerate()
                        .map(|(y, u)| {
                            if k.is_zero() {
                                u.clone()
                            } else {
                                u.clone() - k.clone() * (model.agent[i + 1][q][y].clone() - u.clone())
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn tied<T: Scalar>(a: &T, best: &T) -> bool {
    let scale = T::one() + best.abs();
    (a.clone() - best.clone()).abs() <= T::lit(ARGMAX_TOL) * scale
}

/// Expected virtual surplus of outcome `o` at belief `mu`.
pub fn virtual_surplus<T: Scalar>(model: &ScreeningModel<T>, uhat: &[Vec<Vec<T>>], mu: &Belief<T>, o: Outcome) -> T {
    mu.probs().iter().enumerate().fold(T::zero(), |acc, (i, p)| {
        acc + p.clone() * (model.w(i, o).clone() + uhat[i][o.q][o.y].clone())
    })
}

/// Expected principal payoff of outcome `o` at belief `mu`.
pub fn principal_value<T: Scalar>(model: &ScreeningModel<T>, mu: &Belief<T>, o: Outcome) -> T {
    mu.probs()
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (i, p)| acc + p.clone() * model.w(i, o).clone())
}

/// Principal's ex-post choice after allocation `q`: maximize expected
/// payoff, break ties by virtual surplus, then by lowest index.
pub fn ex_post_choice<T: Scalar>(model: &ScreeningModel<T>, uhat: &[Vec<Vec<T>>], mu: &Belief<T>, q: usize) -> usize {
    let vals: Vec<T> = (0..model.actions[q].len())
        .map(|y| principal_value(model, mu, Outcome { q, y }))
        .collect();
    let best = vals.iter().cloned().fold(vals[0].clone(), |a, b| if b > a { b } else { a });
    let mut pick: Option<(usize, T)> = None;
    for (y, v) in vals.iter().enumerate() {
        if !tied(v, &best) {
            continue;
        }
        let s = virtual_surplus(model, uhat, mu, Outcome { q, y });
        if pick.as_ref().is_none_or(|(_, b)| s > b.clone() && !tied(&s, b)) {
            pick = Some((y, s));
        }
    }
    pick.map(|p| p.0).unwrap_or(0)
}

/// Set of ex-post maximizers after allocation `q`.
pub fn ex_post_argmax<T: Scalar>(model: &ScreeningModel<T>, mu: &Belief<T>, q: usize) -> Vec<usize> {
    let vals: Vec<T> = (0..model.actions[q].len())
        .map(|y| principal_value(model, mu, Outcome { q, y }))
        .collect();
    let best = vals.iter().cloned().fold(vals[0].clone(), |a, b| if b > a { b } else { a });
    (0..vals.len()).filter(|&y| tied(&vals[y], &best)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExPostPolicy {
    pub choice: Vec<usize>,
}

pub fn ex_post_best_response<T: Scalar>(model: &ScreeningModel<T>, mu: &Belief<T>) -> ExPostPolicy {
    let uhat = virtual_utility(model);
    ExPostPolicy { choice: (0..model.num_allocations()).map(|q| ex_post_choice(model, &uhat, mu, q)).collect() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseValue<T> {
    pub value: T,
    pub allocation: usize,
    pub expost: Vec<usize>,
    pub by_allocation: Vec<T>,
}

pub(crate) fn pointwise_with<T: Scalar>(
    model: &ScreeningModel<T>,
    uhat: &[Vec<Vec<T>>],
    mu: &Belief<T>,
) -> PointwiseValue<T> {
    let expost: Vec<usize> = (0..model.num_allocations()).map(|q| ex_post_choice(model, uhat, mu, q)).collect();
    let by_allocation: Vec<T> = expost
        .iter()
        .enumerate()
        .map(|(q, &y)| virtual_surplus(model, uhat, mu, Outcome { q, y }))
        .collect();
    let mut allocation = 0;
    for q in 1..by_allocation.len() {
        if by_allocation[q] > by_allocation[allocation] && !tied(&by_allocation[q], &by_allocation[allocation]) {
            allocation = q;
        }
    }
    PointwiseValue { value: by_allocation[allocation].clone(), allocation, expost, by_allocation }
}

/// `max_q sum_i mu_i (w_i + uhat_i)(q, y_mu(q))`.
pub fn pointwise_virtual_value<T: Scalar>(model: &ScreeningModel<T>, mu: &Belief<T>) -> PointwiseValue<T> {
    pointwise_with(model, &virtual_utility(model), mu)
}

/// Solves the relaxed program over `candidates`.
///
/// The envelope is computed by linear programming, then atoms over which
/// the pointwise value is linear are merged so that ties resolve toward the
/// coarsest optimal policy.
pub fn solve_relaxed<T: Scalar>(
    model: &ScreeningModel<T>,
    candidates: &[Belief<T>],
    tol: f64,
) -> Result<ScreeningSolution<T>, ScreeningError> {
    ensure_valid(model, tol)?;
    let uhat = virtual_utility(model);
    let set = CandidateSet::from_fn(candidates.to_vec(), |b| pointwise_with(model, &uhat, b).value);
    let c = cav(&set, &model.prior)?;
    let (policy, _) = concavify::coarsen(&c.policy, |b| pointwise_with(model, &uhat, b).value, ARGMAX_TOL);
    let mut value = T::zero();
    let atoms = policy
        .atoms
        .into_iter()
        .map(|a| {
            let pv = pointwise_with(model, &uhat, &a.belief);
            value = value.clone() + a.weight.clone() * pv.value.clone();
            let mut allocation = vec![T::zero(); model.num_allocations()];
            allocation[pv.allocation] = T::one();
            ScreeningAtom { belief: a.belief, weight: a.weight, allocation, expost: pv.expost, transfer: None }
        })
        .collect();
    Ok(ScreeningSolution { program: Program::Relaxed, value, atoms })
}

/// `U[i][h]`: type `i`'s expected utility from atom `h` before transfers.
pub(crate) fn atom_utilities<T: Scalar>(model: &ScreeningModel<T>, sol: &ScreeningSolution<T>) -> Vec<Vec<T>> {
    (0..model.num_types())
        .map(|i| {
            sol.atoms
                .iter()
                .map(|a| {
                    a.allocation.iter().enumerate().fold(T::zero(), |acc, (q, p)| {
                        acc + p.clone() * model.u(i, Outcome { q, y: a.expost[q] }).clone()
                    })
                })
                .collect()
        })
        .collect()
}

/// Indices `i >= 1` at which the monotonicity condition between types
/// `i - 1` and `i` fails.
pub fn check_monotonicity<T: Scalar>(model: &ScreeningModel<T>, sol: &ScreeningSolution<T>, tol: f64) -> Vec<usize> {
    let beta = sol.device(&model.prior);
    (1..model.num_types())
        .filter(|&i| {
            let s = sol.atoms.iter().enumerate().fold(T::zero(), |acc, (h, a)| {
                let du = a.allocation.iter().enumerate().fold(T::zero(), |acc, (q, p)| {
                    let o = Outcome { q, y: a.expost[q] };
                    acc + p.clone() * (model.u(i, o).clone() - model.u(i - 1, o).clone())
                });
                acc + (beta[i][h].clone() - beta[i - 1][h].clone()) * du
            });
            s < -T::lit(tol)
        })
        .collect()
}

/// Constraint margins of a mechanism with transfers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullReport<T> {
    /// Equilibrium payoff of each type; participation requires it nonnegative.
    pub participation: Vec<T>,
    /// `incentive[i][k]`: payoff of type `i` minus its payoff from reporting `k`.
    pub incentive: Vec<Vec<T>>,
    /// Atoms at which some allocation's ex-post action is not a best response.
    pub disobedient: Vec<usize>,
    pub bayes_residual: T,
    pub adjacent_ok: bool,
    pub feasible: bool,
    /// Under a MED model, adjacent constraints plus the lowest type's
    /// participation imply all constraints; `Some(false)` flags a breach.
    pub med_implication: Option<bool>,
}

pub fn verify_full<T: Scalar>(
    model: &ScreeningModel<T>,
    sol: &ScreeningSolution<T>,
    tol: f64,
) -> Result<FullReport<T>, ScreeningError> {
    let n = model.num_types();
    let t: Vec<T> = if model.transfers {
        sol.transfers().ok_or(ScreeningError::MissingTransfers)?
    } else {
        vec![T::zero(); sol.atoms.len()]
    };
    let beta = sol.device(&model.prior);
    let u = atom_utilities(model, sol);
    let payoff = |i: usize, k: usize| -> T {
        (0..sol.atoms.len()).fold(T::zero(), |acc, h| acc + beta[k][h].clone() * (u[i][h].clone() - t[h].clone()))
    };
    let participation: Vec<T> = (0..n).map(|i| payoff(i, i)).collect();
    let incentive: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|k| participation[i].clone() - payoff(i, k)).collect())
        .collect();
    let disobedient = sol
        .atoms
        .iter()
        .enumerate()
        .filter(|(_, a)| {
            a.allocation.iter().enumerate().any(|(q, p)| {
                *p > T::lit(concavify::WEIGHT_EPS) && !ex_post_argmax(model, &a.belief, q).contains(&a.expost[q])
            })
        })
        .map(|(h, _)| h)
        .collect::<Vec<_>>();
    let mean = sol.policy().mean();
    let bayes_residual = mean
        .iter()
        .zip(&model.prior)
        .fold(T::zero(), |acc, (m, p)| {
            let d = (m.clone() - p.clone()).abs();
            if d > acc {
                d
            } else {
                acc
            }
        });
    let tl = T::lit(tol);
    let ok = |x: &T| *x >= -tl.clone();
    let adjacent_ok = ok(&participation[0])
        && (0..n).all(|i| {
            (i == 0 || ok(&incentive[i][i - 1])) && (i + 1 == n || ok(&incentive[i][i + 1]))
        });
    let global_ok = participation.iter().all(&ok) && incentive.iter().flatten().all(&ok);
    let feasible = global_ok && disobedient.is_empty() && bayes_residual <= tl;
    let med_implication = model.med.as_ref().map(|_| !adjacent_ok || global_ok);
    Ok(FullReport { participation, incentive, disobedient, bayes_residual, adjacent_ok, feasible, med_implication })
}

/// Whether relabeling the mechanism by outcome keeps the principal obedient:
/// at every pooled belief the recommended action and allocation remain best
/// responses.
pub fn check_straightforward<T: Scalar>(model: &ScreeningModel<T>, sol: &ScreeningSolution<T>, tol: f64) -> bool {
    let uhat = virtual_utility(model);
    let n = model.num_types();
    let mut pools: Vec<(Outcome, Vec<T>)> = Vec::new();
    for a in &sol.atoms {
        for (q, p) in a.allocation.iter().enumerate() {
            if *p <= T::lit(concavify::WEIGHT_EPS) {
                continue;
            }
            let o = Outcome { q, y: a.expost[q] };
            let w = a.weight.clone() * p.clone();
            let idx = match pools.iter().position(|(x, _)| *x == o) {
                Some(k) => k,
                None => {
                    pools.push((o, vec![T::zero(); n]));
                    pools.len() - 1
                }
            };
            for (acc, m) in pools[idx].1.iter_mut().zip(a.belief.probs()) {
                *acc = acc.clone() + w.clone() * m.clone();
            }
        }
    }
    let tl = T::lit(tol);
    pools.into_iter().all(|(o, mass)| {
        let total = mass.iter().fold(T::zero(), |a, b| a + b.clone());
        let mu = Belief::from_vec_unchecked(mass.into_iter().map(|m| m / total.clone()).collect());
        let y_best = (0..model.actions[o.q].len())
            .map(|y| principal_value(model, &mu, Outcome { q: o.q, y }))
            .fold(None::<T>, |a, b| Some(a.map_or(b.clone(), |a| if b > a { b } else { a })))
            .unwrap();
        if principal_value(model, &mu, o) < y_best - tl.clone() {
            return false;
        }
        let here = virtual_surplus(model, &uhat, &mu, o);
        let pv = pointwise_with(model, &uhat, &mu);
        here >= pv.value - tl.clone()
    })
}
