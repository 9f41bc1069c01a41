//! One-period revelation principle.
//!
//! A general mechanism maps input messages to output messages through a
//! device, and output messages to allocations. Folding participation into
//! the device, merging outputs that induce the same posterior and relabeling
//! outputs by posteriors yields a canonical mechanism with truthful reports.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Belief, Outcome};
use crate::scalar::{close, dot, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum CanonicalError {
    #[error("invalid mechanism: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("type {0} participates with probability below one; fold participation first")]
    NeedsFolding(usize),
    #[error("outputs {0} and {1} induce the same posterior; merge outputs first")]
    NotMerged(usize, usize),
    #[error("no output is reached on path")]
    Degenerate,
    #[error("joint device output {output}: allocation {allocation} ratio differs for type {type_index}")]
    Ratio { output: usize, type_index: usize, allocation: usize },
}

/// Finite mechanism with agent strategies.
///
/// Tables: `device[m][s]`, `allocation[s][a]`, `expost[s][a][y]`,
/// `strategies[v][m]`, `agent[v][a][y]`, `principal[v][a][y]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralMechanism<T> {
    pub prior: Vec<T>,
    pub device: Vec<Vec<T>>,
    pub allocation: Vec<Vec<T>>,
    pub expost: Vec<Vec<Vec<T>>>,
    pub strategies: Vec<Vec<T>>,
    pub participation: Vec<T>,
    pub agent: Vec<Vec<Vec<T>>>,
    pub principal: Vec<Vec<Vec<T>>>,
    /// Allocation and ex-post action after non-participation.
    pub outside: Outcome,
}

fn check_distribution<T: Scalar>(name: &str, row: &[T], len: usize, tol: f64, errors: &mut Vec<String>) {
    if row.len() != len {
        errors.push(format!("{name} has {} entries, expected {len}", row.len()));
        return;
    }
    if row.iter().any(|x| *x < -T::lit(tol)) {
        errors.push(format!("{name} has a negative entry"));
    }
    let s = row.iter().fold(T::zero(), |a, x| a + x.clone());
    if !close(&s, &T::one(), tol) {
        errors.push(format!("{name} sums to {}", s.as_f64()));
    }
}

impl<T: Scalar> GeneralMechanism<T> {
    pub fn num_types(&self) -> usize {
        self.prior.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.device.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.allocation.len()
    }

    pub fn num_allocations(&self) -> usize {
        self.agent.first().map_or(0, |r| r.len())
    }

    pub fn validate(&self, tol: f64) -> Result<(), CanonicalError> {
        let mut e = Vec::new();
        let n = self.num_types();
        let nm = self.num_inputs();
        let ns = self.num_outputs();
        let na = self.num_allocations();
        check_distribution("prior", &self.prior, n, tol, &mut e);
        if nm < n {
            e.push(format!("{nm} input messages cannot label {n} types"));
        }
        for (m, row) in self.device.iter().enumerate() {
            check_distribution(&format!("device row {m}"), row, ns, tol, &mut e);
        }
        for (v, row) in self.strategies.iter().enumerate() {
            check_distribution(&format!("strategy of type {v}"), row, nm, tol, &mut e);
        }
        if self.strategies.len() != n || self.participation.len() != n {
            e.push("need one strategy and one participation probability per type".into());
        }
        if self.participation.iter().any(|p| *p < T::zero() || *p > T::one()) {
            e.push("participation probabilities must lie in [0, 1]".into());
        }
        for (name, t) in [("agent", &self.agent), ("principal", &self.principal)] {
            if t.len() != n || t.iter().any(|r| r.len() != na) {
                e.push(format!("{name} payoff table must be [type][allocation][action]"));
            }
        }
        let ny: Vec<usize> = self.agent.first().map_or(Vec::new(), |r| r.iter().map(|y| y.len()).collect());
        if self.agent.iter().chain(&self.principal).any(|r| r.iter().map(|y| y.len()).ne(ny.iter().copied())) {
            e.push("payoff tables disagree on action counts".into());
        }
        if self.expost.len() != ns {
            e.push(format!("expost has {} outputs, expected {ns}", self.expost.len()));
        }
        for s in 0..ns.min(self.expost.len()) {
            check_distribution(&format!("allocation of output {s}"), &self.allocation[s], na, tol, &mut e);
            if self.expost[s].len() != na {
                e.push(format!("expost of output {s} has wrong allocation count"));
                continue;
            }
            for a in 0..na.min(ny.len()) {
                check_distribution(&format!("expost of output {s}, allocation {a}"), &self.expost[s][a], ny[a], tol, &mut e);
            }
        }
        if self.outside.q >= na || ny.get(self.outside.q).is_none_or(|k| self.outside.y >= *k) {
            e.push("outside outcome is not in the payoff tables".into());
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(CanonicalError::Invalid(e))
        }
    }

    /// Output distribution of each type when it participates: `sum_m r_v(m) beta(s|m)`.
    pub fn type_output_distribution(&self) -> Vec<Vec<T>> {
        self.strategies
            .iter()
            .map(|r| {
                (0..self.num_outputs())
                    .map(|s| (0..self.num_inputs()).fold(T::zero(), |acc, m| acc + r[m].clone() * self.device[m][s].clone()))
                    .collect()
            })
            .collect()
    }

    /// Expected payoff from output `s` under table `u[v]`.
    fn output_value(&self, u: &[Vec<T>], s: usize) -> T {
        (0..self.num_allocations()).fold(T::zero(), |acc, a| {
            acc + self.allocation[s][a].clone() * dot(&self.expost[s][a], &u[a])
        })
    }

    /// Payoff of type `v` when reporting input `m` and participating.
    pub fn report_payoff(&self, v: usize, m: usize) -> T {
        (0..self.num_outputs()).fold(T::zero(), |acc, s| {
            acc + self.device[m][s].clone() * self.output_value(&self.agent[v], s)
        })
    }

    fn outside_payoff(&self, table: &[Vec<Vec<T>>], v: usize) -> T {
        table[v][self.outside.q][self.outside.y].clone()
    }

    /// Equilibrium payoff of each type.
    pub fn type_payoffs(&self) -> Vec<T> {
        let dist = self.type_output_distribution();
        (0..self.num_types())
            .map(|v| {
                let inside = (0..self.num_outputs())
                    .fold(T::zero(), |acc, s| acc + dist[v][s].clone() * self.output_value(&self.agent[v], s));
                let p = self.participation[v].clone();
                p.clone() * inside + (T::one() - p) * self.outside_payoff(&self.agent, v)
            })
            .collect()
    }

    pub fn principal_payoff(&self) -> T {
        let dist = self.type_output_distribution();
        (0..self.num_types()).fold(T::zero(), |acc, v| {
            let inside = (0..self.num_outputs())
                .fold(T::zero(), |a, s| a + dist[v][s].clone() * self.output_value(&self.principal[v], s));
            let p = self.participation[v].clone();
            acc + self.prior[v].clone() * (p.clone() * inside + (T::one() - p) * self.outside_payoff(&self.principal, v))
        })
    }

    /// Largest gain any positive-prior type gets from deviating to another
    /// input or from switching participation.
    pub fn max_deviation_gain(&self) -> T {
        let pay = self.type_payoffs();
        let mut worst = T::zero();
        for v in (0..self.num_types()).filter(|&v| self.prior[v] > T::zero()) {
            let mut best = self.outside_payoff(&self.agent, v);
            for m in 0..self.num_inputs() {
                let x = self.report_payoff(v, m);
                if x > best {
                    best = x;
                }
            }
            let g = best - pay[v].clone();
            if g > worst {
                worst = g;
            }
        }
        worst
    }

    fn require_participation(&self) -> Result<(), CanonicalError> {
        match (0..self.num_types()).find(|&v| self.prior[v] > T::zero() && !self.participation[v].is_one()) {
            Some(v) => Err(CanonicalError::NeedsFolding(v)),
            None => Ok(()),
        }
    }
}

/// Posterior induced by each output, and the probability of each output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorMap<T> {
    pub beliefs: Vec<Option<Belief<T>>>,
    pub probabilities: Vec<T>,
    pub unreachable: Vec<usize>,
}

pub fn induced_posterior_map<T: Scalar>(mech: &GeneralMechanism<T>) -> Result<PosteriorMap<T>, CanonicalError> {
    mech.require_participation()?;
    let dist = mech.type_output_distribution();
    let mut beliefs = Vec::new();
    let mut probabilities = Vec::new();
    let mut unreachable = Vec::new();
    for s in 0..mech.num_outputs() {
        let joint: Vec<T> = (0..mech.num_types()).map(|v| mech.prior[v].clone() * dist[v][s].clone()).collect();
        let p = joint.iter().fold(T::zero(), |a, x| a + x.clone());
        if p > T::zero() {
            beliefs.push(Some(Belief::from_vec_unchecked(joint.into_iter().map(|x| x / p.clone()).collect())));
        } else {
            beliefs.push(None);
            unreachable.push(s);
        }
        probabilities.push(p);
    }
    if unreachable.len() == mech.num_outputs() {
        return Err(CanonicalError::Degenerate);
    }
    Ok(PosteriorMap { beliefs, probabilities, unreachable })
}

/// Moves non-participation into the device.
///
/// Input `m_i` for `i < N` now stands for type `i`'s strategy, reached with
/// its participation probability, and a new output sends everyone else to
/// the outside outcome. Remaining inputs lead to the outside output.
pub fn fold_participation<T: Scalar>(mech: &GeneralMechanism<T>) -> GeneralMechanism<T> {
    if mech.participation.iter().all(|p| p.is_one()) {
        return mech.clone();
    }
    let n = mech.num_types();
    let ns = mech.num_outputs();
    let na = mech.num_allocations();
    let dist = mech.type_output_distribution();
    let device = (0..mech.num_inputs())
        .map(|m| {
            let mut row = vec![T::zero(); ns + 1];
            if m < n {
                let p = mech.participation[m].clone();
                for s in 0..ns {
                    row[s] = p.clone() * dist[m][s].clone();
                }
                row[ns] = T::one() - p;
            } else {
                row[ns] = T::one();
            }
            row
        })
        .collect();
    let mut allocation = mech.allocation.clone();
    let mut out_alloc = vec![T::zero(); na];
    out_alloc[mech.outside.q] = T::one();
    allocation.push(out_alloc);
    let mut expost = mech.expost.clone();
    expost.push(
        (0..na)
            .map(|a| {
                let mut row = vec![T::zero(); mech.agent[0][a].len()];
                row[if a == mech.outside.q { mech.outside.y } else { 0 }] = T::one();
                row
            })
            .collect(),
    );
    let strategies = (0..n)
        .map(|v| (0..mech.num_inputs()).map(|m| if m == v { T::one() } else { T::zero() }).collect())
        .collect();
    GeneralMechanism {
        prior: mech.prior.clone(),
        device,
        allocation,
        expost,
        strategies,
        participation: vec![T::one(); n],
        agent: mech.agent.clone(),
        principal: mech.principal.clone(),
        outside: mech.outside,
    }
}

/// Groups reachable outputs with equal posteriors into one output.
///
/// The merged allocation averages allocations by output probability, and the
/// merged ex-post rule averages by the joint probability of output and
/// allocation. Unreachable outputs are kept as they are.
pub fn merge_equivalent_outputs<T: Scalar>(mech: &GeneralMechanism<T>, tol: f64) -> Result<GeneralMechanism<T>, CanonicalError> {
    let map = induced_posterior_map(mech)?;
    let na = mech.num_allocations();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for s in 0..mech.num_outputs() {
        let Some(b) = &map.beliefs[s] else {
            groups.push(vec![s]);
            continue;
        };
        let hit = groups.iter().position(|g| map.beliefs[g[0]].as_ref().is_some_and(|x| x.approx_eq(b, tol)));
        match hit {
            Some(k) => groups[k].push(s),
            None => groups.push(vec![s]),
        }
    }
    if groups.len() == mech.num_outputs() {
        return Ok(mech.clone());
    }
    let device = mech
        .device
        .iter()
        .map(|row| groups.iter().map(|g| g.iter().fold(T::zero(), |a, &s| a + row[s].clone())).collect())
        .collect();
    let mut allocation = Vec::with_capacity(groups.len());
    let mut expost = Vec::with_capacity(groups.len());
    for g in &groups {
        if g.len() == 1 {
            allocation.push(mech.allocation[g[0]].clone());
            expost.push(mech.expost[g[0]].clone());
            continue;
        }
        let pg = g.iter().fold(T::zero(), |a, &s| a + map.probabilities[s].clone());
        let alpha: Vec<T> = (0..na)
            .map(|a| {
                g.iter().fold(T::zero(), |acc, &s| acc + map.probabilities[s].clone() * mech.allocation[s][a].clone())
                    / pg.clone()
            })
            .collect();
        let gamma = (0..na)
            .map(|a| {
                let w: Vec<T> = g.iter().map(|&s| map.probabilities[s].clone() * mech.allocation[s][a].clone()).collect();
                let tot = w.iter().fold(T::zero(), |x, y| x + y.clone());
                if tot.is_zero() {
                    return mech.expost[g[0]][a].clone();
                }
                (0..mech.expost[g[0]][a].len())
                    .map(|y| {
                        g.iter()
                            .zip(&w)
                            .fold(T::zero(), |acc, (&s, ws)| acc + ws.clone() * mech.expost[s][a][y].clone())
                            / tot.clone()
                    })
                    .collect()
            })
            .collect();
        allocation.push(alpha);
        expost.push(gamma);
    }
    Ok(GeneralMechanism { device, allocation, expost, ..mech.clone() })
}

/// Direct mechanism whose outputs are the posteriors they induce.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalMechanism<T> {
    pub prior: Vec<T>,
    pub beliefs: Vec<Belief<T>>,
    /// `device[v][h]`: probability of posterior `h` after report `v`.
    pub device: Vec<Vec<T>>,
    pub allocation: Vec<Vec<T>>,
    pub expost: Vec<Vec<Vec<T>>>,
    pub agent: Vec<Vec<Vec<T>>>,
    pub principal: Vec<Vec<Vec<T>>>,
}

impl<T: Scalar> CanonicalMechanism<T> {
    fn value(&self, u: &[Vec<T>], h: usize) -> T {
        (0..self.allocation[h].len())
            .fold(T::zero(), |acc, a| acc + self.allocation[h][a].clone() * dot(&self.expost[h][a], &u[a]))
    }

    /// Payoff of type `v` reporting `k`.
    pub fn report_payoff(&self, v: usize, k: usize) -> T {
        (0..self.beliefs.len()).fold(T::zero(), |acc, h| acc + self.device[k][h].clone() * self.value(&self.agent[v], h))
    }

    pub fn type_payoffs(&self) -> Vec<T> {
        (0..self.prior.len()).map(|v| self.report_payoff(v, v)).collect()
    }

    pub fn principal_payoff(&self) -> T {
        (0..self.prior.len()).fold(T::zero(), |acc, v| {
            let x = (0..self.beliefs.len())
                .fold(T::zero(), |a, h| a + self.device[v][h].clone() * self.value(&self.principal[v], h));
            acc + self.prior[v].clone() * x
        })
    }

    /// `gains[v][k]`: payoff of type `v` from reporting `k` minus truthful payoff.
    pub fn deviation_gains(&self) -> Vec<Vec<T>> {
        let n = self.prior.len();
        (0..n)
            .map(|v| {
                let own = self.report_payoff(v, v);
                (0..n).map(|k| self.report_payoff(v, k) - own.clone()).collect()
            })
            .collect()
    }

    pub fn is_truthful(&self, tol: f64) -> bool {
        self.deviation_gains().iter().flatten().all(|g| *g <= T::lit(tol))
    }

    /// Largest gap between a posterior label and the posterior it induces.
    pub fn consistency_residual(&self) -> T {
        let mut worst = T::zero();
        for (h, b) in self.beliefs.iter().enumerate() {
            let joint: Vec<T> = (0..self.prior.len()).map(|v| self.prior[v].clone() * self.device[v][h].clone()).collect();
            let p = joint.iter().fold(T::zero(), |a, x| a + x.clone());
            for (v, j) in joint.into_iter().enumerate() {
                let d = (j / p.clone() - b.get(v).clone()).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }
}

/// Relabels outputs by their posteriors with truthful reports.
///
/// A zero-prior type never moves the posterior, so its row is set to the
/// positive-prior row it likes best (lowest index on ties), which makes
/// truthful reporting optimal for it too.
pub fn canonicalize_mechanism<T: Scalar>(mech: &GeneralMechanism<T>, tol: f64) -> Result<CanonicalMechanism<T>, CanonicalError> {
    let map = induced_posterior_map(mech)?;
    let reach: Vec<usize> = (0..mech.num_outputs()).filter(|s| map.beliefs[*s].is_some()).collect();
    for (i, &a) in reach.iter().enumerate() {
        for &b in &reach[i + 1..] {
            if map.beliefs[a].as_ref().unwrap().approx_eq(map.beliefs[b].as_ref().unwrap(), tol) {
                return Err(CanonicalError::NotMerged(a, b));
            }
        }
    }
    let dist = mech.type_output_distribution();
    let n = mech.num_types();
    let mut canon = CanonicalMechanism {
        prior: mech.prior.clone(),
        beliefs: reach.iter().map(|&s| map.beliefs[s].clone().unwrap()).collect(),
        device: (0..n).map(|v| reach.iter().map(|&s| dist[v][s].clone()).collect()).collect(),
        allocation: reach.iter().map(|&s| mech.allocation[s].clone()).collect(),
        expost: reach.iter().map(|&s| mech.expost[s].clone()).collect(),
        agent: mech.agent.clone(),
        principal: mech.principal.clone(),
    };
    let positive: Vec<usize> = (0..n).filter(|&v| mech.prior[v] > T::zero()).collect();
    for v in (0..n).filter(|&v| mech.prior[v].is_zero()) {
        let mut best = positive[0];
        for &k in &positive[1..] {
            if canon.report_payoff(v, k) > canon.report_payoff(v, best) {
                best = k;
            }
        }
        canon.device[v] = canon.device[best].clone();
    }
    Ok(canon)
}

/// Outcome statistics that every rewriting step must preserve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismSummary<T> {
    pub principal: T,
    pub types: Vec<T>,
    /// Mass of each (posterior, allocation) pair, with non-participation
    /// counted as an output.
    pub joint: Vec<(Belief<T>, usize, T)>,
}

fn push_joint<T: Scalar>(joint: &mut Vec<(Belief<T>, usize, T)>, b: &Belief<T>, a: usize, w: T, tol: f64) {
    if w.is_zero() {
        return;
    }
    match joint.iter_mut().find(|(x, y, _)| *y == a && x.approx_eq(b, tol)) {
        Some(e) => e.2 = e.2.clone() + w,
        None => joint.push((b.clone(), a, w)),
    }
}

pub fn summarize_general<T: Scalar>(mech: &GeneralMechanism<T>, tol: f64) -> MechanismSummary<T> {
    let n = mech.num_types();
    let dist = mech.type_output_distribution();
    let mut joint = Vec::new();
    for s in 0..mech.num_outputs() {
        let mass: Vec<T> = (0..n)
            .map(|v| mech.prior[v].clone() * mech.participation[v].clone() * dist[v][s].clone())
            .collect();
        let p = mass.iter().fold(T::zero(), |a, x| a + x.clone());
        if p <= T::zero() {
            continue;
        }
        let b = Belief::from_vec_unchecked(mass.into_iter().map(|x| x / p.clone()).collect());
        for a in 0..mech.num_allocations() {
            push_joint(&mut joint, &b, a, p.clone() * mech.allocation[s][a].clone(), tol);
        }
    }
    let out: Vec<T> = (0..n).map(|v| mech.prior[v].clone() * (T::one() - mech.participation[v].clone())).collect();
    let p = out.iter().fold(T::zero(), |a, x| a + x.clone());
    if p > T::zero() {
        let b = Belief::from_vec_unchecked(out.into_iter().map(|x| x / p.clone()).collect());
        push_joint(&mut joint, &b, mech.outside.q, p, tol);
    }
    MechanismSummary { principal: mech.principal_payoff(), types: mech.type_payoffs(), joint }
}

pub fn summarize_canonical<T: Scalar>(mech: &CanonicalMechanism<T>, tol: f64) -> MechanismSummary<T> {
    let mut joint = Vec::new();
    for (h, b) in mech.beliefs.iter().enumerate() {
        let p = (0..mech.prior.len()).fold(T::zero(), |a, v| a + mech.prior[v].clone() * mech.device[v][h].clone());
        for a in 0..mech.allocation[h].len() {
            push_joint(&mut joint, b, a, p.clone() * mech.allocation[h][a].clone(), tol);
        }
    }
    MechanismSummary { principal: mech.principal_payoff(), types: mech.type_payoffs(), joint }
}

/// Compares two summaries on the principal, every positive-prior type and
/// the joint distribution. Returns the first mismatch.
pub fn summary_mismatch<T: Scalar>(
    a: &MechanismSummary<T>,
    b: &MechanismSummary<T>,
    prior: &[T],
    tol: f64,
) -> Option<String> {
    if !close(&a.principal, &b.principal, tol) {
        return Some(format!("principal payoff {} vs {}", a.principal.as_f64(), b.principal.as_f64()));
    }
    for v in (0..prior.len()).filter(|&v| prior[v] > T::zero()) {
        if !close(&a.types[v], &b.types[v], tol) {
            return Some(format!("type {v} payoff {} vs {}", a.types[v].as_f64(), b.types[v].as_f64()));
        }
    }
    let mass = |s: &MechanismSummary<T>, bel: &Belief<T>, al: usize| {
        s.joint
            .iter()
            .filter(|(x, y, _)| *y == al && x.approx_eq(bel, tol))
            .fold(T::zero(), |acc, e| acc + e.2.clone())
    };
    for (x, y) in [(a, b), (b, a)] {
        for (bel, al, _) in &x.joint {
            let (m1, m2) = (mass(x, bel, *al), mass(y, bel, *al));
            if !close(&m1, &m2, tol) {
                return Some(format!("mass at allocation {al} differs: {} vs {}", m1.as_f64(), m2.as_f64()));
            }
        }
    }
    None
}

/// Splits a joint device `joint[v][h][a]` over (output, allocation) into a
/// device over outputs and an allocation rule per output.
pub fn split_general_device<T: Scalar>(
    joint: &[Vec<Vec<T>>],
    prior: &[T],
    tol: f64,
) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>), CanonicalError> {
    let n = prior.len();
    let nh = joint.first().map_or(0, |r| r.len());
    let na = joint.first().and_then(|r| r.first()).map_or(0, |r| r.len());
    let beta: Vec<Vec<T>> = (0..n)
        .map(|v| (0..nh).map(|h| joint[v][h].iter().fold(T::zero(), |a, x| a + x.clone())).collect())
        .collect();
    let mut alpha = Vec::with_capacity(nh);
    for h in 0..nh {
        let p = (0..n).fold(T::zero(), |acc, v| acc + prior[v].clone() * beta[v][h].clone());
        let row: Vec<T> = if p > T::zero() {
            (0..na)
                .map(|a| (0..n).fold(T::zero(), |acc, v| acc + prior[v].clone() * joint[v][h][a].clone()) / p.clone())
                .collect()
        } else {
            let v = (0..n).find(|&v| beta[v][h] > T::zero()).unwrap_or(0);
            if beta[v][h] > T::zero() {
                (0..na).map(|a| joint[v][h][a].clone() / beta[v][h].clone()).collect()
            } else {
                let mut r = vec![T::zero(); na];
                if na > 0 {
                    r[0] = T::one();
                }
                r
            }
        };
        for v in (0..n).filter(|&v| prior[v] > T::zero() && beta[v][h] > T::zero()) {
            for a in 0..na {
                let own = joint[v][h][a].clone() / beta[v][h].clone();
                if !close(&own, &row[a], tol) {
                    return Err(CanonicalError::Ratio { output: h, type_index: v, allocation: a });
                }
            }
        }
        alpha.push(row);
    }
    Ok((beta, alpha))
}

/// The three-message, two-type example with quadratic payoffs: allocations
/// `{0, 1, 2}`, low type mixing over the first two inputs, high type over
/// the last two, and the principal choosing `2 (1 - mu)`.
pub fn bester_strausz<T: Scalar>() -> GeneralMechanism<T> {
    let half = T::one() / T::from_u8(2).unwrap();
    let sq = |x: T| x.clone() * x;
    let a_vals: Vec<T> = (0..3).map(|a| T::from_u8(a).unwrap()).collect();
    let agent = vec![
        a_vals.iter().map(|a| vec![-sq(half.clone() - a.clone())]).collect(),
        a_vals.iter().map(|a| vec![-sq(T::from_u8(3).unwrap() * half.clone() - a.clone())]).collect(),
    ];
    let principal = vec![
        a_vals.iter().map(|a| vec![-sq(a.clone())]).collect(),
        a_vals.iter().map(|a| vec![-sq(T::from_u8(2).unwrap() - a.clone())]).collect(),
    ];
    let id = |k: usize| (0..3).map(|j| if j == k { T::one() } else { T::zero() }).collect::<Vec<T>>();
    GeneralMechanism {
        prior: vec![half.clone(), half.clone()],
        device: (0..3).map(id).collect(),
        allocation: (0..3).map(id).collect(),
        expost: (0..3).map(|_| (0..3).map(|_| vec![T::one()]).collect()).collect(),
        strategies: vec![
            vec![half.clone(), half.clone(), T::zero()],
            vec![T::zero(), half.clone(), half.clone()],
        ],
        participation: vec![T::one(), T::one()],
        agent,
        principal,
        outside: Outcome { q: 1, y: 0 },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesterStrauszReport<T> {
    /// Posterior probability of the low type after each input.
    pub posteriors: Vec<T>,
    pub allocations: Vec<usize>,
    /// Principal's best allocation at each posterior.
    pub best_responses: Vec<usize>,
    /// Low type's payoffs at allocations 0 and 1.
    pub low_payoffs: [T; 2],
    /// High type's payoffs at allocations 1 and 2.
    pub high_payoffs: [T; 2],
    /// Expected payoff of the uninformed second agent, `-10 (1 - a)^2`.
    pub second_agent_payoff: T,
    pub canonical: CanonicalMechanism<T>,
    pub preserved: bool,
    pub truthful: bool,
    pub passed: bool,
}

pub fn replicate_bester_strausz<T: Scalar>() -> Result<BesterStrauszReport<T>, CanonicalError> {
    let mech = bester_strausz::<T>();
    mech.validate(1e-12)?;
    let map = induced_posterior_map(&mech)?;
    let posteriors: Vec<T> = map.beliefs.iter().map(|b| b.as_ref().unwrap().get(0).clone()).collect();
    let allocations: Vec<usize> = mech
        .allocation
        .iter()
        .map(|r| r.iter().position(|x| x.is_one()).unwrap_or(0))
        .collect();
    let best_responses = map
        .beliefs
        .iter()
        .map(|b| {
            let b = b.as_ref().unwrap();
            let w = |a: usize| b.get(0).clone() * mech.principal[0][a][0].clone() + b.get(1).clone() * mech.principal[1][a][0].clone();
            (0..3).fold(0, |best, a| if w(a) > w(best) { a } else { best })
        })
        .collect::<Vec<_>>();
    let low_payoffs = [mech.agent[0][0][0].clone(), mech.agent[0][1][0].clone()];
    let high_payoffs = [mech.agent[1][1][0].clone(), mech.agent[1][2][0].clone()];
    let ten = T::from_u8(10).unwrap();
    let second_agent_payoff = summarize_general(&mech, 1e-12)
        .joint
        .iter()
        .fold(T::zero(), |acc, (_, a, p)| {
            let d = T::one() - T::from_usize(*a).unwrap();
            acc - p.clone() * ten.clone() * d.clone() * d
        });
    let merged = merge_equivalent_outputs(&fold_participation(&mech), 1e-12)?;
    let canonical = canonicalize_mechanism(&merged, 1e-12)?;
    let preserved = summary_mismatch(&summarize_general(&mech, 1e-12), &summarize_canonical(&canonical, 1e-12), &mech.prior, 1e-12)
        .is_none();
    let truthful = canonical.is_truthful(1e-12);
    let quarter = -(T::one() / T::from_u8(4).unwrap());
    let passed = preserved
        && truthful
        && allocations == best_responses
        && low_payoffs.iter().chain(&high_payoffs).all(|x| *x == quarter);
    Ok(BesterStrauszReport {
        posteriors,
        allocations,
        best_responses,
        low_payoffs,
        high_payoffs,
        second_agent_payoff,
        canonical,
        preserved,
        truthful,
        passed,
    })
}
