//! Beliefs, posterior policies, devices and the finite screening model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{close, sum, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("belief has a negative entry at index {0}")]
    NegativeMass(usize),
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("policy mean differs from the prior at coordinate {coord} by {gap}")]
    NotBayesPlausible { coord: usize, gap: f64 },
    #[error("atom {0} has zero total probability under the prior")]
    OffPathAtom(usize),
    #[error("outcome ({q}, {y}) is not in the model")]
    UnknownOutcome { q: usize, y: usize },
    #[error("a MED decomposition is required for this check")]
    MissingMed,
}

/// A probability vector over the type space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief<T>(Vec<T>);

impl<T: Scalar> Belief<T> {
    pub fn new(p: Vec<T>, tol: f64) -> Result<Self, ModelError> {
        for (i, x) in p.iter().enumerate() {
            if *x < -T::lit(tol) {
                return Err(ModelError::NegativeMass(i));
            }
        }
        let s = sum(&p);
        if !close(&s, &T::one(), tol) {
            return Err(ModelError::NotNormalized(s.as_f64()));
        }
        Ok(Belief(p))
    }

    /// Skips validation. Callers guarantee the vector is a distribution.
    pub fn from_vec_unchecked(p: Vec<T>) -> Self {
        Belief(p)
    }

    pub fn degenerate(n: usize, i: usize) -> Self {
        let mut p = vec![T::zero(); n];
        p[i] = T::one();
        Belief(p)
    }

    pub fn uniform(n: usize) -> Self {
        let w = T::one() / T::from_usize(n).unwrap();
        Belief(vec![w; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn probs(&self) -> &[T] {
        &self.0
    }

    pub fn get(&self, i: usize) -> &T {
        &self.0[i]
    }

    pub fn support(&self, tol: f64) -> Vec<usize> {
        let t = T::lit(tol);
        (0..self.0.len()).filter(|&i| self.0[i] > t).collect()
    }

    pub fn is_degenerate(&self, tol: f64) -> bool {
        self.support(tol).len() == 1
    }

    pub fn distance(&self, other: &Belief<T>) -> T {
        self.0
            .iter()
            .zip(&other.0)
            .fold(T::zero(), |acc, (a, b)| {
                let d = (a.clone() - b.clone()).abs();
                if d > acc {
                    d
                } else {
                    acc
                }
            })
    }

    pub fn approx_eq(&self, other: &Belief<T>, tol: f64) -> bool {
        self.distance(other) <= T::lit(tol)
    }

    /// Clips tiny negatives and renormalizes.
    pub fn cleaned(mut self) -> Self {
        for x in self.0.iter_mut() {
            if *x < T::zero() {
                *x = T::zero();
            }
        }
        let s = sum(&self.0);
        for x in self.0.iter_mut() {
            *x = x.clone() / s.clone();
        }
        self
    }
}

/// A finite distribution over posteriors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorPolicy<T> {
    pub atoms: Vec<Atom<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom<T> {
    pub belief: Belief<T>,
    pub weight: T,
}

impl<T: Scalar> PosteriorPolicy<T> {
    pub fn new(atoms: Vec<(Belief<T>, T)>) -> Self {
        PosteriorPolicy {
            atoms: atoms.into_iter().map(|(belief, weight)| Atom { belief, weight }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> Vec<T> {
        let n = self.atoms.first().map_or(0, |a| a.belief.dim());
        let mut m = vec![T::zero(); n];
        for a in &self.atoms {
            for (mi, p) in m.iter_mut().zip(a.belief.probs()) {
                *mi = mi.clone() + a.weight.clone() * p.clone();
            }
        }
        m
    }

    /// Weights sum to one and the mean matches the prior.
    pub fn check_bayes_plausible(&self, prior: &[T], tol: f64) -> Result<(), ModelError> {
        let w: Vec<T> = self.atoms.iter().map(|a| a.weight.clone()).collect();
        if let Some(i) = w.iter().position(|x| *x < -T::lit(tol)) {
            return Err(ModelError::NegativeMass(i));
        }
        let s = sum(&w);
        if !close(&s, &T::one(), tol) {
            return Err(ModelError::NotNormalized(s.as_f64()));
        }
        for a in &self.atoms {
            if a.belief.dim() != prior.len() {
                return Err(ModelError::Dimension { expected: prior.len(), got: a.belief.dim() });
            }
        }
        for (i, (m, p)) in self.mean().iter().zip(prior).enumerate() {
            if !close(m, p, tol) {
                return Err(ModelError::NotBayesPlausible {
                    coord: i,
                    gap: (m.clone() - p.clone()).as_f64(),
                });
            }
        }
        Ok(())
    }
}

/// Type-contingent distribution over a list of posteriors: `rows[i][h]` is
/// the probability that type `i` generates atom `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Device<T> {
    pub rows: Vec<Vec<T>>,
}

/// `beta(h | i) = mu_h(i) tau_h / mu0(i)`. Zero-prior rows copy `tau`.
pub fn device_from_policy<T: Scalar>(
    prior: &[T],
    policy: &PosteriorPolicy<T>,
    tol: f64,
) -> Result<Device<T>, ModelError> {
    policy.check_bayes_plausible(prior, tol)?;
    let rows = prior
        .iter()
        .enumerate()
        .map(|(i, p)| {
            policy
                .atoms
                .iter()
                .map(|a| {
                    if p.is_zero() {
                        a.weight.clone()
                    } else {
                        a.belief.get(i).clone() * a.weight.clone() / p.clone()
                    }
                })
                .collect()
        })
        .collect();
    Ok(Device { rows })
}

/// Inverse of [`device_from_policy`]: Bayes' rule column by column.
pub fn posteriors_from_device<T: Scalar>(
    prior: &[T],
    device: &Device<T>,
) -> Result<PosteriorPolicy<T>, ModelError> {
    if device.rows.len() != prior.len() {
        return Err(ModelError::Dimension { expected: prior.len(), got: device.rows.len() });
    }
    let h = device.rows.first().map_or(0, |r| r.len());
    let mut atoms = Vec::with_capacity(h);
    for col in 0..h {
        let joint: Vec<T> = prior
            .iter()
            .zip(&device.rows)
            .map(|(p, r)| p.clone() * r[col].clone())
            .collect();
        let tau = sum(&joint);
        if tau <= T::zero() {
            return Err(ModelError::OffPathAtom(col));
        }
        let belief = joint.into_iter().map(|x| x / tau.clone()).collect();
        atoms.push((Belief(belief), tau));
    }
    Ok(PosteriorPolicy::new(atoms))
}

/// Allocation index and ex-post action index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Outcome {
    pub q: usize,
    pub y: usize,
}

/// Multiplicatively separable decomposition `u_i(q, y) = g1(q, y) f(i) + g2(q, y) + c(i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Med<T> {
    pub g1: Vec<Vec<T>>,
    pub g2: Vec<Vec<T>>,
    pub f: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Scalar> Med<T> {
    pub fn utility(&self, i: usize, o: Outcome) -> T {
        self.g1[o.q][o.y].clone() * self.f[i].clone() + self.g2[o.q][o.y].clone() + self.c[i].clone()
    }
}

/// Finite screening model with quasilinear transfers.
///
/// Utility tables are indexed `[type][allocation][ex-post action]`; the
/// action index ranges over `actions[q]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningModel<T> {
    pub types: Vec<T>,
    pub prior: Vec<T>,
    pub allocations: Vec<String>,
    pub actions: Vec<Vec<String>>,
    pub agent: Vec<Vec<Vec<T>>>,
    pub principal: Vec<Vec<Vec<T>>>,
    pub outside: Outcome,
    pub transfers: bool,
    pub med: Option<Med<T>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

impl<T: Scalar> ScreeningModel<T> {
    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn num_allocations(&self) -> usize {
        self.allocations.len()
    }

    pub fn outcomes(&self) -> impl Iterator<Item = Outcome> + '_ {
        self.actions
            .iter()
            .enumerate()
            .flat_map(|(q, ys)| (0..ys.len()).map(move |y| Outcome { q, y }))
    }

    pub fn u(&self, i: usize, o: Outcome) -> &T {
        &self.agent[i][o.q][o.y]
    }

    pub fn w(&self, i: usize, o: Outcome) -> &T {
        &self.principal[i][o.q][o.y]
    }

    /// Fills `agent` from a MED decomposition.
    pub fn with_med_utilities(mut self, med: Med<T>) -> Self {
        let n = self.types.len();
        self.agent = (0..n)
            .map(|i| {
                self.actions
                    .iter()
                    .enumerate()
                    .map(|(q, ys)| (0..ys.len()).map(|y| med.utility(i, Outcome { q, y })).collect())
                    .collect()
            })
            .collect();
        self.med = Some(med);
        self
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        let mut errors = Vec::new();
        let n = self.types.len();
        if n == 0 {
            errors.push("model has no types".into());
            return ValidationReport { errors };
        }
        if self.types.windows(2).any(|w| w[0] >= w[1]) {
            errors.push("types must be strictly increasing".into());
        }
        if self.prior.len() != n {
            errors.push(format!("prior has {} entries, expected {n}", self.prior.len()));
        } else {
            if let Some(i) = self.prior.iter().position(|p| *p <= T::zero()) {
                errors.push(format!("prior must have full support; entry {i} is not positive"));
            }
            let s = sum(&self.prior);
            if !close(&s, &T::one(), tol) {
                errors.push(format!("prior sums to {}, not 1", s.as_f64()));
            }
        }
        if self.allocations.is_empty() {
            errors.push("allocation set is empty".into());
        }
        if self.actions.len() != self.allocations.len() {
            errors.push(format!(
                "actions list has {} entries, expected one per allocation ({})",
                self.actions.len(),
                self.allocations.len()
            ));
            return ValidationReport { errors };
        }
        if let Some(q) = self.actions.iter().position(|a| a.is_empty()) {
            errors.push(format!("allocation {q} has no ex-post actions"));
        }
        for (name, table) in [("agent", &self.agent), ("principal", &self.principal)] {
            if table.len() != n {
                errors.push(format!("{name} utility has {} type rows, expected {n}", table.len()));
                continue;
            }
            for (i, rows) in table.iter().enumerate() {
                if rows.len() != self.actions.len() {
                    errors.push(format!("{name} utility for type {i} has wrong allocation count"));
                    continue;
                }
                for (q, r) in rows.iter().enumerate() {
                    if r.len() != self.actions[q].len() {
                        errors.push(format!("{name} utility [{i}][{q}] has wrong action count"));
                    }
                }
            }
        }
        if !errors.is_empty() {
            return ValidationReport { errors };
        }
        let o = self.outside;
        if o.q >= self.actions.len() || o.y >= self.actions[o.q].len() {
            errors.push(format!("outside option ({}, {}) is not an outcome", o.q, o.y));
            return ValidationReport { errors };
        }
        for i in 0..n {
            if !close(self.u(i, o), &T::zero(), tol) {
                errors.push(format!("type {i} gets nonzero utility from the outside option"));
            }
        }
        if let Some(med) = &self.med {
            if med.f.len() != n || med.c.len() != n {
                errors.push("MED f and c need one entry per type".into());
            } else if med.g1.len() != self.actions.len()
                || med.g2.len() != self.actions.len()
                || med.g1.iter().zip(&self.actions).any(|(g, a)| g.len() != a.len())
                || med.g2.iter().zip(&self.actions).any(|(g, a)| g.len() != a.len())
            {
                errors.push("MED g1 and g2 must match the outcome table shape".into());
            } else {
                if med.f.windows(2).any(|w| w[0] >= w[1]) {
                    errors.push("MED f must be strictly increasing".into());
                }
                let g_out = &med.g1[o.q][o.y];
                if self.outcomes().any(|x| med.g1[x.q][x.y] < *g_out) {
                    errors.push("MED g1 must be minimized at the outside option".into());
                }
                for i in 0..n {
                    for x in self.outcomes() {
                        if !close(&med.utility(i, x), self.u(i, x), tol) {
                            errors.push(format!(
                                "MED decomposition disagrees with agent utility at type {i}, outcome ({}, {})",
                                x.q, x.y
                            ));
                        }
                    }
                }
            }
        }
        ValidationReport { errors }
    }
}

/// A lottery over outcomes.
pub type Lottery<T> = Vec<(Outcome, T)>;

/// True when every pair of lotteries has utility differences monotone in
/// the type index. Requires a MED decomposition on the model.
pub fn med_check<T: Scalar>(
    model: &ScreeningModel<T>,
    pairs: &[(Lottery<T>, Lottery<T>)],
    tol: f64,
) -> Result<bool, ModelError> {
    if model.med.is_none() {
        return Err(ModelError::MissingMed);
    }
    let eu = |i: usize, l: &Lottery<T>| -> Result<T, ModelError> {
        let mut acc = T::zero();
        for (o, p) in l {
            if o.q >= model.actions.len() || o.y >= model.actions[o.q].len() {
                return Err(ModelError::UnknownOutcome { q: o.q, y: o.y });
            }
            acc = acc + p.clone() * model.u(i, *o).clone();
        }
        Ok(acc)
    };
    let t = T::lit(tol);
    for (a, b) in pairs {
        let d = (0..model.num_types())
            .map(|i| Ok(eu(i, a)? - eu(i, b)?))
            .collect::<Result<Vec<T>, ModelError>>()?;
        let up = d.windows(2).all(|w| w[1].clone() >= w[0].clone() - t.clone());
        let down = d.windows(2).all(|w| w[1].clone() <= w[0].clone() + t.clone());
        if !(up || down) {
            return Ok(false);
        }
    }
    Ok(true)
}
