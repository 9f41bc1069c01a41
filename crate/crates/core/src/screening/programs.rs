use crate::concavify::{cav_constrained, CandidateSet, SideConstraint, WEIGHT_EPS};
use crate::linprog::{self, LinearProgram, LpOutcome, Relation};
use crate::model::{Belief, Outcome, ScreeningModel};
use crate::scalar::{max_of, Scalar};

use super::{
    ensure_valid, ex_post_choice, principal_value, virtual_surplus, virtual_utility, Program, ScreeningAtom,
    ScreeningError, ScreeningSolution,
};

/// Options for [`solve_full_adjacent`].
#[derive(Clone, Debug)]
pub struct FullOptions<T> {
    /// Bound on the absolute value of any transfer. `None` picks a bound from
    /// the utility tables that no optimal transfer reaches.
    pub transfer_bound: Option<T>,
}

impl<T> Default for FullOptions<T> {
    fn default() -> Self {
        FullOptions { transfer_bound: None }
    }
}

fn likelihood<T: Scalar>(prior: &[T], b: &Belief<T>, i: usize) -> T {
    b.get(i).clone() / prior[i].clone()
}

/// Groups `(belief, allocation)` weights by belief into allocation lotteries.
fn group_atoms<T: Scalar>(
    model: &ScreeningModel<T>,
    entries: Vec<(Belief<T>, usize, T, Option<T>)>,
) -> Vec<ScreeningAtom<T>> {
    let uhat = virtual_utility(model);
    let nq = model.num_allocations();
    let mut out: Vec<ScreeningAtom<T>> = Vec::new();
    for (b, q, w, t) in entries {
        let k = match out.iter().position(|a| a.belief.approx_eq(&b, 1e-12) && a.transfer == t) {
            Some(k) => k,
            None => {
                let expost = (0..nq).map(|q| ex_post_choice(model, &uhat, &b, q)).collect();
                out.push(ScreeningAtom {
                    belief: b,
                    weight: T::zero(),
                    allocation: vec![T::zero(); nq],
                    expost,
                    transfer: t,
                });
                out.len() - 1
            }
        };
        out[k].weight = out[k].weight.clone() + w.clone();
        out[k].allocation[q] = out[k].allocation[q].clone() + w;
    }
    for a in out.iter_mut() {
        for p in a.allocation.iter_mut() {
            *p = p.clone() / a.weight.clone();
        }
    }
    out
}

/// Relaxed program with the monotonicity constraints
/// `sum_h tau_h (mu_h(i)/mu0(i) - mu_h(i-1)/mu0(i-1)) (u_i - u_{i-1})(q_h, y_h) >= 0`.
///
/// Each candidate belief is paired with every allocation, so that the
/// program may randomize the allocation at a posterior.
pub fn solve_with_monotonicity<T: Scalar>(
    model: &ScreeningModel<T>,
    candidates: &[Belief<T>],
    tol: f64,
) -> Result<ScreeningSolution<T>, ScreeningError> {
    ensure_valid(model, tol)?;
    let n = model.num_types();
    let uhat = virtual_utility(model);
    let mut beliefs = Vec::new();
    let mut values = Vec::new();
    let mut tags = Vec::new();
    let mut g: Vec<Vec<T>> = vec![Vec::new(); n.saturating_sub(1)];
    for b in candidates {
        for q in 0..model.num_allocations() {
            let o = Outcome { q, y: ex_post_choice(model, &uhat, b, q) };
            values.push(virtual_surplus(model, &uhat, b, o));
            for i in 1..n {
                let dl = likelihood(&model.prior, b, i) - likelihood(&model.prior, b, i - 1);
                g[i - 1].push(dl * (model.u(i, o).clone() - model.u(i - 1, o).clone()));
            }
            beliefs.push(b.clone());
            tags.push(q);
        }
    }
    let constraints: Vec<SideConstraint<T>> = g
        .into_iter()
        .map(|values| SideConstraint { values, relation: Relation::Ge, threshold: T::zero() })
        .collect();
    let set = CandidateSet::new(beliefs, values);
    let c = cav_constrained(&set, &model.prior, &constraints)?;
    let entries = c
        .candidates
        .iter()
        .zip(&c.policy.atoms)
        .map(|(&m, a)| (a.belief.clone(), tags[m], a.weight.clone(), None))
        .collect();
    Ok(ScreeningSolution { program: Program::Monotone, value: c.value, atoms: group_atoms(model, entries) })
}

fn default_bound<T: Scalar>(model: &ScreeningModel<T>) -> T {
    let mut m = T::zero();
    for t in &model.agent {
        for row in t {
            for u in row {
                m = max_of(m, u.abs());
            }
        }
    }
    T::one() + T::lit(4.0) * m
}

/// Full program with participation of the lowest type and adjacent
/// incentive constraints, solved as one linear program.
///
/// Variables are `z[h][q] = tau_h alpha_h(q)` and `e[h]` in `[0, tau_h]`,
/// with the transfer mass `m_h = tau_h t_h = B (tau_h - 2 e_h)`, so that
/// `|t_h| <= B`. The lifted optimum is then reduced to a basic mixture of
/// at most `3N - 1` posteriors.
pub fn solve_full_adjacent<T: Scalar>(
    model: &ScreeningModel<T>,
    candidates: &[Belief<T>],
    opts: &FullOptions<T>,
    tol: f64,
) -> Result<ScreeningSolution<T>, ScreeningError> {
    ensure_valid(model, tol)?;
    let n = model.num_types();
    let nq = model.num_allocations();
    let hh = candidates.len();
    let bound = opts.transfer_bound.clone().unwrap_or_else(|| default_bound(model));
    let two_b = bound.clone() + bound.clone();
    let uhat = virtual_utility(model);
    let outcomes: Vec<Vec<Outcome>> = candidates
        .iter()
        .map(|b| (0..nq).map(|q| Outcome { q, y: ex_post_choice(model, &uhat, b, q) }).collect())
        .collect();
    let r: Vec<Vec<T>> = (0..n)
        .map(|i| candidates.iter().map(|b| likelihood(&model.prior, b, i)).collect())
        .collect();
    let zi = |h: usize, q: usize| h * nq + q;
    let ei = |h: usize| hh * nq + h;
    let nv = hh * nq + hh;

    let mut obj = vec![T::zero(); nv];
    for (h, b) in candidates.iter().enumerate() {
        for q in 0..nq {
            obj[zi(h, q)] = principal_value(model, b, outcomes[h][q]) + bound.clone();
        }
        obj[ei(h)] = -two_b.clone();
    }
    let mut lp = LinearProgram::new(nv).maximize(obj);
    for i in 0..n {
        let mut row = vec![T::zero(); nv];
        for (h, b) in candidates.iter().enumerate() {
            for q in 0..nq {
                row[zi(h, q)] = b.get(i).clone();
            }
        }
        lp.push(row, Relation::Eq, model.prior[i].clone());
    }
    // sum_h c_h (sum_q z u_i - m_h)
    let payoff_row = |i: usize, c: &dyn Fn(usize) -> T| {
        let mut row = vec![T::zero(); nv];
        for h in 0..hh {
            let ch = c(h);
            if ch.is_zero() {
                continue;
            }
            for q in 0..nq {
                row[zi(h, q)] = ch.clone() * (model.u(i, outcomes[h][q]).clone() - bound.clone());
            }
            row[ei(h)] = ch * two_b.clone();
        }
        row
    };
    lp.push(payoff_row(0, &|h| r[0][h].clone()), Relation::Eq, T::zero());
    for i in 0..n {
        for k in [i.wrapping_sub(1), i + 1] {
            if k >= n {
                continue;
            }
            lp.push(payoff_row(i, &|h| r[i][h].clone() - r[k][h].clone()), Relation::Ge, T::zero());
        }
    }
    for h in 0..hh {
        let mut row = vec![T::zero(); nv];
        for q in 0..nq {
            row[zi(h, q)] = T::one();
        }
        row[ei(h)] = -T::one();
        lp.push(row, Relation::Ge, T::zero());
    }
    let sol = match linprog::solve(&lp)? {
        LpOutcome::Optimal(s) => s,
        _ => return Err(ScreeningError::Infeasible),
    };

    let eps = T::lit(WEIGHT_EPS);
    let mut beliefs = Vec::new();
    let mut values = Vec::new();
    let mut fixed: Vec<(Vec<T>, T, usize)> = Vec::new();
    for h in 0..hh {
        let tau = (0..nq).fold(T::zero(), |a, q| a + sol.x[zi(h, q)].clone());
        if tau <= eps {
            continue;
        }
        let alpha: Vec<T> = (0..nq).map(|q| sol.x[zi(h, q)].clone() / tau.clone()).collect();
        let t = bound.clone() * (T::one() - (sol.x[ei(h)].clone() + sol.x[ei(h)].clone()) / tau.clone());
        let f = alpha.iter().enumerate().fold(t.clone(), |acc, (q, a)| {
            acc + a.clone() * principal_value(model, &candidates[h], outcomes[h][q])
        });
        beliefs.push(candidates[h].clone());
        values.push(f);
        fixed.push((alpha, t, h));
    }
    let util = |i: usize, j: usize| -> T {
        let (alpha, t, h) = &fixed[j];
        alpha
            .iter()
            .enumerate()
            .fold(-t.clone(), |acc, (q, a)| acc + a.clone() * model.u(i, outcomes[*h][q]).clone())
    };
    let mut constraints = vec![SideConstraint {
        values: (0..fixed.len()).map(|j| r[0][fixed[j].2].clone() * util(0, j)).collect(),
        relation: Relation::Eq,
        threshold: T::zero(),
    }];
    for i in 0..n {
        for k in [i.wrapping_sub(1), i + 1] {
            if k >= n {
                continue;
            }
            constraints.push(SideConstraint {
                values: (0..fixed.len())
                    .map(|j| (r[i][fixed[j].2].clone() - r[k][fixed[j].2].clone()) * util(i, j))
                    .collect(),
                relation: Relation::Ge,
                threshold: T::zero(),
            });
        }
    }
    let set = CandidateSet::new(beliefs, values);
    let c = cav_constrained(&set, &model.prior, &constraints)?;
    let mut atoms = Vec::new();
    for (&m, a) in c.candidates.iter().zip(&c.policy.atoms) {
        let (alpha, t, h) = &fixed[m];
        atoms.push(ScreeningAtom {
            belief: a.belief.clone(),
            weight: a.weight.clone(),
            allocation: alpha.clone(),
            expost: outcomes[*h].iter().map(|o| o.y).collect(),
            transfer: Some(t.clone()),
        });
    }
    Ok(ScreeningSolution { program: Program::FullAdjacent, value: c.value, atoms })
}
