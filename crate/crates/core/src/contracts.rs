//! Implementation of canonical mechanisms as menus of contracts.
//!
//! A menu lets each type pick a belief-labeled contract `(q, y, t)`. The
//! device is implementable when every type prefers the contracts it is
//! assigned (DIC-P) and the transfers can be chosen to keep revenue (DIC-T).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{posteriors_from_device, Belief, Device, ModelError, Outcome, ScreeningModel};
use crate::scalar::Scalar;
use crate::screening::ScreeningSolution;

/// Minimum total mass for a belief to count as on-path.
pub const ON_PATH_MASS: f64 = 1e-12;
/// Tolerance for DIC-T and for the DIC-P audit.
pub const CONTRACT_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ContractError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("menu checks need a MED decomposition of the agent's utility")]
    MissingMed,
    #[error("beliefs {0} and {1} have equal g1, so payoff differences are not strictly monotone")]
    Assumption1(usize, usize),
    #[error("belief {0} randomizes its allocation; menus need deterministic outcomes")]
    RandomizedOutcome(usize),
    #[error("belief {0} is not on path")]
    OffPath(usize),
    #[error("outcome ({}, {}) is not in the model", .0.q, .0.y)]
    UnknownOutcome(Outcome),
    #[error("beliefs {0} and {1} coincide; canonical outputs are distinct posteriors")]
    DuplicateBelief(usize, usize),
    #[error("the instance carries no original transfers")]
    MissingTransfers,
    #[error("expected {expected} entries, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// On-path beliefs of a canonical device with a deterministic outcome each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MenuInstance<T> {
    pub model: ScreeningModel<T>,
    pub beliefs: Vec<Belief<T>>,
    /// `device[i][h]`: probability that type `i` is sent to belief `h`.
    pub device: Vec<Vec<T>>,
    pub outcomes: Vec<Outcome>,
    pub transfers: Option<Vec<T>>,
    /// Input columns dropped for carrying no mass.
    pub dropped: Vec<usize>,
}

impl<T: Scalar> MenuInstance<T> {
    pub fn new(
        model: ScreeningModel<T>,
        device: Vec<Vec<T>>,
        outcomes: Vec<Outcome>,
        transfers: Option<Vec<T>>,
    ) -> Result<Self, ContractError> {
        let n = model.num_types();
        if device.len() != n {
            return Err(ContractError::Dimension { expected: n, got: device.len() });
        }
        let h = outcomes.len();
        for row in &device {
            if row.len() != h {
                return Err(ContractError::Dimension { expected: h, got: row.len() });
            }
        }
        if let Some(t) = &transfers {
            if t.len() != h {
                return Err(ContractError::Dimension { expected: h, got: t.len() });
            }
        }
        for o in &outcomes {
            if o.q >= model.actions.len() || o.y >= model.actions[o.q].len() {
                return Err(ContractError::UnknownOutcome(*o));
            }
        }
        let eps = T::lit(ON_PATH_MASS);
        let (keep, dropped): (Vec<usize>, Vec<usize>) = (0..h).partition(|&k| {
            let mass = (0..n).fold(T::zero(), |a, i| a + model.prior[i].clone() * device[i][k].clone());
            mass > eps
        });
        let device: Vec<Vec<T>> = device.iter().map(|r| keep.iter().map(|&k| r[k].clone()).collect()).collect();
        let outcomes = keep.iter().map(|&k| outcomes[k]).collect();
        let transfers = transfers.map(|t| keep.iter().map(|&k| t[k].clone()).collect());
        let policy = posteriors_from_device(&model.prior, &Device { rows: device.clone() })?;
        let beliefs: Vec<Belief<T>> = policy.atoms.into_iter().map(|a| a.belief).collect();
        for a in 0..beliefs.len() {
            if let Some(b) = (a + 1..beliefs.len()).find(|&b| beliefs[a].approx_eq(&beliefs[b], ON_PATH_MASS)) {
                return Err(ContractError::DuplicateBelief(a, b));
            }
        }
        Ok(MenuInstance { model, beliefs, device, outcomes, transfers, dropped })
    }

    /// Builds the instance induced by a screening solution with pure allocations.
    pub fn from_solution(model: ScreeningModel<T>, sol: &ScreeningSolution<T>) -> Result<Self, ContractError> {
        let mut outcomes = Vec::with_capacity(sol.atoms.len());
        for (h, a) in sol.atoms.iter().enumerate() {
            let q = a
                .allocation
                .iter()
                .position(|p| p.is_one() || *p >= T::one() - T::lit(CONTRACT_TOL))
                .ok_or(ContractError::RandomizedOutcome(h))?;
            outcomes.push(Outcome { q, y: a.expost[q] });
        }
        let device = sol.device(&model.prior);
        MenuInstance::new(model, device, outcomes, sol.transfers())
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    fn support(&self, h: usize) -> Vec<usize> {
        (0..self.model.num_types()).filter(|&i| self.device[i][h] > T::zero()).collect()
    }

    fn g1(&self, h: usize) -> Result<&T, ContractError> {
        let med = self.model.med.as_ref().ok_or(ContractError::MissingMed)?;
        let o = self.outcomes[h];
        Ok(&med.g1[o.q][o.y])
    }
}

/// `D_i(h, h') = u_i(x_h) - u_i(x_h')`.
pub fn payoff_difference<T: Scalar>(inst: &MenuInstance<T>, i: usize, h: usize, h2: usize) -> Result<T, ContractError> {
    for k in [h, h2] {
        if k >= inst.len() {
            return Err(ContractError::OffPath(k));
        }
    }
    Ok(inst.model.u(i, inst.outcomes[h]).clone() - inst.model.u(i, inst.outcomes[h2]).clone())
}

/// Strict monotonicity of payoff differences: distinct `g1` across every
/// pair of on-path beliefs.
pub fn check_assumption_one<T: Scalar>(inst: &MenuInstance<T>) -> Result<(), ContractError> {
    for a in 0..inst.len() {
        for b in a + 1..inst.len() {
            let d = inst.g1(a)?.clone() - inst.g1(b)?.clone();
            if d.abs() <= T::pivot_eps() {
                return Err(ContractError::Assumption1(a, b));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum MenuFailure {
    /// Type `high` at belief `upper` and type `low` at belief `lower`, with
    /// `D_high(upper, lower) < D_low(upper, lower)`.
    DicM { high: usize, low: usize, upper: usize, lower: usize },
    /// Consecutive beliefs in support order where the top type of `first`
    /// exceeds the bottom type of `second`.
    Labeling { first: usize, second: usize },
    /// A type is assigned to too many beliefs, or to three with a mixed middle one.
    Structure { type_index: usize, beliefs: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum MenuVerdict {
    /// Belief indices in menu order.
    Implementable { labeling: Vec<usize> },
    Fails { reason: MenuFailure },
}

/// Decides whether the device induces a monotone information structure.
///
/// Support order and the three-belief structure are checked before DIC-M,
/// so overlapping supports are reported as a structural failure.
pub fn check_menu_implementable<T: Scalar>(inst: &MenuInstance<T>) -> Result<MenuVerdict, ContractError> {
    check_assumption_one(inst)?;
    let n = inst.model.num_types();
    let h = inst.len();
    let supports: Vec<Vec<usize>> = (0..h).map(|k| inst.support(k)).collect();
    let mut labeling: Vec<usize> = (0..h).collect();
    let key = |k: usize| (supports[k][0], *supports[k].last().unwrap());
    let mut g = Vec::with_capacity(h);
    for k in 0..h {
        g.push(inst.g1(k)?.clone());
    }
    labeling.sort_by(|&a, &b| {
        key(a).cmp(&key(b)).then(g[a].partial_cmp(&g[b]).unwrap_or(std::cmp::Ordering::Equal))
    });
    for w in labeling.windows(2) {
        if key(w[0]).1 > key(w[1]).0 {
            return Ok(MenuVerdict::Fails { reason: MenuFailure::Labeling { first: w[0], second: w[1] } });
        }
    }
    for i in 0..n {
        let holding: Vec<usize> = labeling.iter().copied().filter(|&k| supports[k].contains(&i)).collect();
        let bad = holding.len() > 3 || (holding.len() == 3 && supports[holding[1]].len() != 1);
        if bad {
            return Ok(MenuVerdict::Fails { reason: MenuFailure::Structure { type_index: i, beliefs: holding } });
        }
    }
    for upper in 0..h {
        for lower in 0..h {
            if upper == lower {
                continue;
            }
            for &j in &supports[upper] {
                for &i in supports[lower].iter().filter(|&&i| i < j) {
                    let dj = payoff_difference(inst, j, upper, lower)?;
                    let di = payoff_difference(inst, i, upper, lower)?;
                    if dj < di - T::lit(CONTRACT_TOL) {
                        return Ok(MenuVerdict::Fails { reason: MenuFailure::DicM { high: j, low: i, upper, lower } });
                    }
                }
            }
        }
    }
    Ok(MenuVerdict::Implementable { labeling })
}

/// Transfers making the lowest type of each belief indifferent to the
/// previous contract in the menu. Indexed like `inst.beliefs`.
pub fn build_menu_transfers<T: Scalar>(inst: &MenuInstance<T>, labeling: &[usize]) -> Vec<T> {
    let mut t = vec![T::zero(); inst.len()];
    let mut prev: Option<usize> = None;
    for &k in labeling {
        let low = inst.support(k)[0];
        let here = inst.model.u(low, inst.outcomes[k]).clone();
        t[k] = match prev {
            None => here,
            Some(p) => here - (inst.model.u(low, inst.outcomes[p]).clone() - t[p].clone()),
        };
        prev = Some(k);
    }
    t
}

/// A type that strictly gains by taking contract `to` instead of `from`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deviation<T> {
    pub type_index: usize,
    pub from: usize,
    pub to: usize,
    pub gain: T,
}

/// Every profitable deviation from an assigned contract.
pub fn dic_p_violations<T: Scalar>(inst: &MenuInstance<T>, t: &[T], tol: f64) -> Vec<Deviation<T>> {
    let mut out = Vec::new();
    let tl = T::lit(tol);
    for i in 0..inst.model.num_types() {
        for from in 0..inst.len() {
            if inst.device[i][from] <= T::zero() {
                continue;
            }
            let stay = inst.model.u(i, inst.outcomes[from]).clone() - t[from].clone();
            for to in 0..inst.len() {
                let go = inst.model.u(i, inst.outcomes[to]).clone() - t[to].clone();
                let gain = go - stay.clone();
                if gain > tl {
                    out.push(Deviation { type_index: i, from, to, gain });
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DicTReport<T> {
    pub holds: bool,
    /// First belief at which the new transfer differs from the original.
    pub witness: Option<(usize, T, T)>,
}

/// Whether the menu transfers reproduce the original transfer at every belief.
pub fn check_dic_t<T: Scalar>(inst: &MenuInstance<T>, t_new: &[T]) -> Result<DicTReport<T>, ContractError> {
    let t = inst.transfers.as_ref().ok_or(ContractError::MissingTransfers)?;
    let witness = (0..inst.len())
        .find(|&k| (t_new[k].clone() - t[k].clone()).abs() > T::lit(CONTRACT_TOL))
        .map(|k| (k, t_new[k].clone(), t[k].clone()));
    Ok(DicTReport { holds: witness.is_none(), witness })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MenuReport<T> {
    pub verdict: MenuVerdict,
    pub transfers: Option<Vec<T>>,
    pub dic_p_violations: Vec<Deviation<T>>,
    pub dic_t: Option<DicTReport<T>>,
}

/// Full menu check: implementability, menu transfers, DIC-P audit and,
/// when original transfers are present, DIC-T.
pub fn analyze_menu<T: Scalar>(inst: &MenuInstance<T>) -> Result<MenuReport<T>, ContractError> {
    let verdict = check_menu_implementable(inst)?;
    let MenuVerdict::Implementable { labeling } = &verdict else {
        return Ok(MenuReport { verdict, transfers: None, dic_p_violations: Vec::new(), dic_t: None });
    };
    let t = build_menu_transfers(inst, labeling);
    let dic_p_violations = dic_p_violations(inst, &t, CONTRACT_TOL);
    let dic_t = match inst.transfers {
        Some(_) => Some(check_dic_t(inst, &t)?),
        None => None,
    };
    Ok(MenuReport { verdict, transfers: Some(t), dic_p_violations, dic_t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::durable_good::{as_screening_model, DurableGood};

    fn two_type() -> ScreeningModel<f64> {
        as_screening_model(&DurableGood::<f64>::new(1.0, 2.0, 0.5, 0.6).unwrap())
    }

    #[test]
    fn full_revelation_is_implementable() {
        let m = two_type();
        let sell = Outcome { q: 1, y: 0 };
        let wait_low = Outcome { q: 0, y: 0 };
        let inst = MenuInstance::new(m, vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![wait_low, sell], None).unwrap();
        let v = check_menu_implementable(&inst).unwrap();
        let MenuVerdict::Implementable { labeling } = v else { panic!() };
        assert_eq!(labeling, vec![0, 1]);
        let t = build_menu_transfers(&inst, &labeling);
        // low type pays its waiting value, high type indifferent downward
        assert!((t[0] - 0.0).abs() < 1e-12);
        assert!((t[1] - (2.0 - 0.5 * 1.0)).abs() < 1e-12);
        assert!(dic_p_violations(&inst, &t, 1e-9).is_empty());
    }

    #[test]
    fn off_path_columns_are_dropped() {
        let m = two_type();
        let o = vec![Outcome { q: 0, y: 0 }, Outcome { q: 0, y: 1 }, Outcome { q: 1, y: 0 }];
        let inst = MenuInstance::new(m, vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]], o, None).unwrap();
        assert_eq!(inst.len(), 2);
        assert_eq!(inst.dropped, vec![1]);
    }

    #[test]
    fn missing_med_is_an_error() {
        let mut m = two_type();
        m.med = None;
        let inst = MenuInstance::new(m, vec![vec![1.0], vec![1.0]], vec![Outcome { q: 1, y: 0 }], None).unwrap();
        assert_eq!(check_menu_implementable(&inst), Err(ContractError::MissingMed));
    }

    #[test]
    fn equal_g1_breaks_assumption_one() {
        let m = two_type();
        let o = Outcome { q: 1, y: 0 };
        let inst = MenuInstance::new(m, vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![o, o], None).unwrap();
        assert_eq!(check_menu_implementable(&inst), Err(ContractError::Assumption1(0, 1)));
    }

    #[test]
    fn dic_t_reports_witness() {
        let m = two_type();
        let o = vec![Outcome { q: 0, y: 0 }, Outcome { q: 1, y: 0 }];
        let inst = MenuInstance::new(m, vec![vec![1.0, 0.0], vec![0.0, 1.0]], o, Some(vec![0.0, 1.0])).unwrap();
        let r = analyze_menu(&inst).unwrap();
        let d = r.dic_t.unwrap();
        assert!(!d.holds);
        assert_eq!(d.witness.unwrap().0, 1);
        let inst2 = MenuInstance { transfers: Some(vec![0.0, 1.5]), ..inst };
        assert!(analyze_menu(&inst2).unwrap().dic_t.unwrap().holds);
    }
}
