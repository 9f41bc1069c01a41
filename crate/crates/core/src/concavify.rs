//! Concave envelopes over a finite candidate set of beliefs.

use thiserror::Error;

use crate::linalg::null_vector;
use crate::linprog::{self, LinearProgram, LpError, LpOutcome, Relation};
use crate::model::{Belief, PosteriorPolicy};
use crate::scalar::{dot, Scalar};

/// Weights below this are treated as zero.
pub const WEIGHT_EPS: f64 = 1e-12;
/// Slack at or below this marks a side constraint as binding.
pub const BINDING_SLACK: f64 = 1e-7;

#[derive(Debug, Error, PartialEq)]
pub enum ConcavifyError {
    #[error("candidate set is empty")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("target belief is outside the convex hull of the candidates")]
    OutsideHull,
    #[error("side constraints cannot be met by any Bayes-plausible mixture")]
    Infeasible,
    #[error("program is unbounded")]
    Unbounded,
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Beliefs paired with the value of the objective at each.
#[derive(Clone, Debug)]
pub struct CandidateSet<T> {
    pub beliefs: Vec<Belief<T>>,
    pub values: Vec<T>,
}

/// Linear side constraint `sum_m lambda_m g(mu_m) (rel) threshold`.
#[derive(Clone, Debug)]
pub struct SideConstraint<T> {
    pub values: Vec<T>,
    pub relation: Relation,
    pub threshold: T,
}

#[derive(Clone, Debug)]
pub struct Concavification<T> {
    pub policy: PosteriorPolicy<T>,
    pub value: T,
    /// Candidate index behind each atom of `policy`.
    pub candidates: Vec<usize>,
    /// Side constraints binding at the returned policy.
    pub binding: Vec<usize>,
}

impl<T: Scalar> CandidateSet<T> {
    pub fn new(beliefs: Vec<Belief<T>>, values: Vec<T>) -> Self {
        CandidateSet { beliefs, values }
    }

    pub fn from_fn(beliefs: Vec<Belief<T>>, f: impl Fn(&Belief<T>) -> T) -> Self {
        let values = beliefs.iter().map(&f).collect();
        CandidateSet { beliefs, values }
    }

    fn check(&self, target: &[T]) -> Result<(), ConcavifyError> {
        if self.beliefs.is_empty() {
            return Err(ConcavifyError::Empty);
        }
        if self.values.len() != self.beliefs.len() {
            return Err(ConcavifyError::Dimension {
                expected: self.beliefs.len(),
                got: self.values.len(),
            });
        }
        for b in &self.beliefs {
            if b.dim() != target.len() {
                return Err(ConcavifyError::Dimension { expected: target.len(), got: b.dim() });
            }
        }
        Ok(())
    }
}

fn slack<T: Scalar>(c: &SideConstraint<T>, w: &[T]) -> T {
    let lhs = dot(&c.values, w);
    match c.relation {
        Relation::Ge => lhs - c.threshold.clone(),
        Relation::Le => c.threshold.clone() - lhs,
        Relation::Eq => -(lhs - c.threshold.clone()).abs(),
    }
}

fn binding_set<T: Scalar>(constraints: &[SideConstraint<T>], w: &[T]) -> Vec<usize> {
    let tol = T::lit(BINDING_SLACK);
    (0..constraints.len())
        .filter(|&k| constraints[k].relation == Relation::Eq || slack(&constraints[k], w) <= tol)
        .collect()
}

fn barycenter_lp<T: Scalar>(
    set: &CandidateSet<T>,
    target: &[T],
    constraints: &[SideConstraint<T>],
) -> Result<LinearProgram<T>, ConcavifyError> {
    let h = set.beliefs.len();
    let mut lp = LinearProgram::new(h).maximize(set.values.clone());
    for (i, t) in target.iter().enumerate() {
        lp.push(set.beliefs.iter().map(|b| b.get(i).clone()).collect(), Relation::Eq, t.clone());
    }
    for c in constraints {
        if c.values.len() != h {
            return Err(ConcavifyError::Dimension { expected: h, got: c.values.len() });
        }
        match c.relation {
            // equalities enter as a pair of opposite inequalities
            Relation::Eq => {
                lp.push(c.values.clone(), Relation::Ge, c.threshold.clone());
                lp.push(c.values.clone(), Relation::Le, c.threshold.clone());
            }
            r => lp.push(c.values.clone(), r, c.threshold.clone()),
        }
    }
    Ok(lp)
}

/// Concave envelope of the candidate values at `target`.
///
/// The optimum is a basic solution of the barycenter program, so the
/// returned policy has at most `N` atoms.
pub fn cav<T: Scalar>(set: &CandidateSet<T>, target: &[T]) -> Result<Concavification<T>, ConcavifyError> {
    cav_constrained(set, target, &[])
}

/// Envelope with `K` linear side constraints. The policy has at most
/// `N + (number of binding constraints)` atoms.
pub fn cav_constrained<T: Scalar>(
    set: &CandidateSet<T>,
    target: &[T],
    constraints: &[SideConstraint<T>],
) -> Result<Concavification<T>, ConcavifyError> {
    set.check(target)?;
    let lp = barycenter_lp(set, target, constraints)?;
    let sol = match linprog::solve(&lp)? {
        LpOutcome::Optimal(s) => s,
        LpOutcome::Infeasible if constraints.is_empty() => return Err(ConcavifyError::OutsideHull),
        LpOutcome::Infeasible => {
            return match linprog::solve(&barycenter_lp(set, target, &[])?)? {
                LpOutcome::Infeasible => Err(ConcavifyError::OutsideHull),
                _ => Err(ConcavifyError::Infeasible),
            }
        }
        LpOutcome::Unbounded => return Err(ConcavifyError::Unbounded),
    };
    let (weights, binding) = prune_support(set, sol.x, constraints);
    Ok(assemble(set, &weights, binding))
}

fn assemble<T: Scalar>(set: &CandidateSet<T>, weights: &[T], binding: Vec<usize>) -> Concavification<T> {
    let eps = T::lit(WEIGHT_EPS);
    let mut atoms = Vec::new();
    let mut idx = Vec::new();
    for (m, w) in weights.iter().enumerate() {
        if *w > eps {
            atoms.push((set.beliefs[m].clone(), w.clone()));
            idx.push(m);
        }
    }
    let value = dot(&set.values, weights);
    Concavification { policy: PosteriorPolicy::new(atoms), value, candidates: idx, binding }
}

/// Carathéodory reduction.
///
/// Moves along kernel directions of the barycenter and binding rows
/// restricted to the support until the support columns are independent.
/// The objective never decreases and no side constraint is violated.
pub fn prune_support<T: Scalar>(
    set: &CandidateSet<T>,
    mut weights: Vec<T>,
    constraints: &[SideConstraint<T>],
) -> (Vec<T>, Vec<usize>) {
    let eps = T::lit(WEIGHT_EPS);
    let n = set.beliefs.first().map_or(0, |b| b.dim());
    for w in weights.iter_mut() {
        if *w <= eps {
            *w = T::zero();
        }
    }
    // each pass drops an atom or tightens a constraint
    for _ in 0..=weights.len() + constraints.len() {
        let support: Vec<usize> = (0..weights.len()).filter(|&m| weights[m] > eps).collect();
        let binding = binding_set(constraints, &weights);
        if support.len() <= 1 {
            return (weights, binding);
        }
        let mut rows: Vec<Vec<T>> = (0..n)
            .map(|i| support.iter().map(|&m| set.beliefs[m].get(i).clone()).collect())
            .collect();
        for &k in &binding {
            rows.push(support.iter().map(|&m| constraints[k].values[m].clone()).collect());
        }
        let Some(mut d) = null_vector(&rows, support.len()) else {
            return (weights, binding);
        };
        let gain = support
            .iter()
            .zip(&d)
            .fold(T::zero(), |acc, (&m, dm)| acc + set.values[m].clone() * dm.clone());
        if gain < T::zero() {
            for x in d.iter_mut() {
                *x = -x.clone();
            }
        }
        // longest step keeping weights nonnegative and slack rows feasible
        let mut step: Option<(T, Option<usize>)> = None;
        for (j, dj) in d.iter().enumerate() {
            if *dj < T::zero() {
                let s = weights[support[j]].clone() / -dj.clone();
                if step.as_ref().is_none_or(|(b, _)| s < *b) {
                    step = Some((s, Some(j)));
                }
            }
        }
        for (k, c) in constraints.iter().enumerate() {
            if binding.contains(&k) {
                continue;
            }
            let rate = support
                .iter()
                .zip(&d)
                .fold(T::zero(), |acc, (&m, dm)| acc + c.values[m].clone() * dm.clone());
            let shrink = match c.relation {
                Relation::Ge => -rate,
                Relation::Le => rate,
                Relation::Eq => continue,
            };
            if shrink > T::zero() {
                let s = slack(c, &weights) / shrink;
                if step.as_ref().is_none_or(|(b, _)| s < *b) {
                    step = Some((s, None));
                }
            }
        }
        let Some((theta, hit)) = step else {
            return (weights, binding);
        };
        for (j, &m) in support.iter().enumerate() {
            weights[m] = weights[m].clone() + theta.clone() * d[j].clone();
            if weights[m] <= eps {
                weights[m] = T::zero();
            }
        }
        if let Some(j) = hit {
            weights[support[j]] = T::zero();
        }
    }
    let binding = binding_set(constraints, &weights);
    (weights, binding)
}

/// Merges pairs of atoms whenever the objective at their weighted mean is
/// at least the weighted mean of their values. Returns the coarser policy
/// and the objective at each atom.
pub fn coarsen<T: Scalar>(
    policy: &PosteriorPolicy<T>,
    f: impl Fn(&Belief<T>) -> T,
    tol: f64,
) -> (PosteriorPolicy<T>, Vec<T>) {
    let mut atoms: Vec<(Belief<T>, T, T)> = policy
        .atoms
        .iter()
        .map(|a| (a.belief.clone(), a.weight.clone(), f(&a.belief)))
        .collect();
    loop {
        let mut best: Option<(usize, usize, T, Belief<T>, T)> = None;
        for a in 0..atoms.len() {
            for b in a + 1..atoms.len() {
                let (ba, wa, fa) = &atoms[a];
                let (bb, wb, fb) = &atoms[b];
                let w = wa.clone() + wb.clone();
                let mean: Vec<T> = ba
                    .probs()
                    .iter()
                    .zip(bb.probs())
                    .map(|(x, y)| (wa.clone() * x.clone() + wb.clone() * y.clone()) / w.clone())
                    .collect();
                let merged = Belief::from_vec_unchecked(mean);
                let fm = f(&merged);
                let gain = w.clone() * fm.clone() - wa.clone() * fa.clone() - wb.clone() * fb.clone();
                let scale = T::one() + fa.abs() + fb.abs();
                if gain >= -(T::lit(tol) * scale * w.clone())
                    && best.as_ref().is_none_or(|(_, _, g, _, _)| gain > *g)
                {
                    best = Some((a, b, gain, merged, fm));
                }
            }
        }
        let Some((a, b, _, merged, fm)) = best else {
            break;
        };
        let w = atoms[a].1.clone() + atoms[b].1.clone();
        atoms.remove(b);
        atoms[a] = (merged, w, fm);
    }
    let values = atoms.iter().map(|a| a.2.clone()).collect();
    (
        PosteriorPolicy::new(atoms.into_iter().map(|(b, w, _)| (b, w)).collect()),
        values,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1d(k: usize, f: impl Fn(f64) -> f64) -> CandidateSet<f64> {
        let beliefs: Vec<Belief<f64>> = (0..=k)
            .map(|j| {
                let x = j as f64 / k as f64;
                Belief::from_vec_unchecked(vec![1.0 - x, x])
            })
            .collect();
        CandidateSet::from_fn(beliefs, |b| f(b.probs()[1]))
    }

    #[test]
    fn concave_function_gives_single_atom() {
        let set = grid1d(10, |x| -(x - 0.3) * (x - 0.3));
        let c = cav(&set, &[0.7, 0.3]).unwrap();
        assert_eq!(c.policy.len(), 1);
        assert!(c.value.abs() < 1e-12);
    }

    #[test]
    fn convex_function_splits_to_endpoints() {
        let set = grid1d(10, |x| x * x);
        let c = cav(&set, &[0.6, 0.4]).unwrap();
        assert_eq!(c.policy.len(), 2);
        assert!((c.value - 0.4).abs() < 1e-12);
        c.policy.check_bayes_plausible(&[0.6, 0.4], 1e-12).unwrap();
    }

    #[test]
    fn target_outside_hull() {
        let set = CandidateSet::new(
            vec![Belief::from_vec_unchecked(vec![0.5, 0.5]), Belief::from_vec_unchecked(vec![0.0, 1.0])],
            vec![0.0, 1.0],
        );
        assert_eq!(cav(&set, &[0.9, 0.1]).unwrap_err(), ConcavifyError::OutsideHull);
    }

    #[test]
    fn constraint_binds_and_adds_atom() {
        // concave objective would pick the prior; the constraint forces a spread
        let set = grid1d(4, |x| -(x - 0.5) * (x - 0.5));
        let spread: Vec<f64> = set.beliefs.iter().map(|b| (b.probs()[1] - 0.5).powi(2)).collect();
        let c = cav_constrained(
            &set,
            &[0.5, 0.5],
            &[SideConstraint { values: spread, relation: Relation::Ge, threshold: 0.1 }],
        )
        .unwrap();
        assert_eq!(c.binding, vec![0]);
        assert!(c.policy.len() <= 3);
        assert!((c.value + 0.1).abs() < 1e-9);
    }

    #[test]
    fn pruning_reduces_redundant_support() {
        let set = grid1d(4, |x| x);
        // linear objective: any spread is optimal; start from full support
        let w = vec![0.2; 5];
        let (w, _) = prune_support(&set, w, &[]);
        assert!(w.iter().filter(|x| **x > 0.0).count() <= 2);
        let mean: f64 = set.beliefs.iter().zip(&w).map(|(b, w)| b.probs()[1] * w).sum();
        assert!((mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn coarsen_merges_linear_region() {
        let p = PosteriorPolicy::new(vec![
            (Belief::<f64>::from_vec_unchecked(vec![1.0, 0.0]), 0.5),
            (Belief::from_vec_unchecked(vec![0.0, 1.0]), 0.5),
        ]);
        let (q, v) = coarsen(&p, |b| b.probs()[1], 1e-9);
        assert_eq!(q.len(), 1);
        assert!((v[0] - 0.5).abs() < 1e-12);
        let (q, _) = coarsen(&p, |b| b.probs()[1].powi(2), 1e-9);
        assert_eq!(q.len(), 2);
    }
}
