//! Two-type, two-period durable good sold by a seller who cannot commit to
//! future prices.
//!
//! The seller faces a low and a high valuation buyer, discounts period two
//! by `delta`, and designs period-one information to maximize revenue. The
//! period-one problem is the concave envelope of a piecewise linear function
//! of the period-two posterior, solved here exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::least_squares;
use crate::model::{Med, Outcome, ScreeningModel};
use crate::scalar::{max_of, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DurableError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("posterior {0} lies outside [0, 1]")]
    OutOfRange(f64),
    #[error("posterior {0} is unreachable when the prior puts all mass on the high type")]
    Unreachable(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurableGood<T> {
    pub v_low: T,
    pub v_high: T,
    pub delta: T,
    /// Prior probability of the high valuation.
    pub prior_high: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Trade in period one.
    Sell,
    /// Wait, then price at the low valuation.
    DelayLow,
    /// Wait, then price at the high valuation.
    DelayHigh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Sell to both types at the low valuation, no information.
    Commitment,
    /// Reveal the type; period-two price drops to the low valuation.
    Ratchet,
    /// High type mixes; the no-sale posterior sits at the indifference point.
    Mixing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurableAtom<T> {
    pub posterior: T,
    pub weight: T,
    pub branch: Branch,
    pub transfer: T,
    pub period_two_price: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurableSolution<T> {
    pub mu_bar: T,
    pub revenue: T,
    pub regime: Regime,
    pub atoms: Vec<DurableAtom<T>>,
    pub period_one_price: Option<T>,
    pub period_two_price: Option<T>,
    pub posterior_after_no_sale: Option<T>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
    Both,
}

impl<T: Scalar> DurableGood<T> {
    pub fn new(v_low: T, v_high: T, delta: T, prior_high: T) -> Result<Self, DurableError> {
        let g = DurableGood { v_low, v_high, delta, prior_high };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), DurableError> {
        if !(self.v_low > T::zero() && self.v_high > self.v_low) {
            return Err(DurableError::Invalid("need 0 < v_low < v_high".into()));
        }
        if !(self.delta > T::zero() && self.delta < T::one()) {
            return Err(DurableError::Invalid("need 0 < delta < 1".into()));
        }
        if self.prior_high < T::zero() || self.prior_high > T::one() {
            return Err(DurableError::Invalid("prior_high must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn gap(&self) -> T {
        self.v_high.clone() - self.v_low.clone()
    }

    fn check_posterior(&self, mu: &T) -> Result<(), DurableError> {
        if *mu < T::zero() || *mu > T::one() {
            return Err(DurableError::OutOfRange(mu.as_f64()));
        }
        if self.prior_high == T::one() && *mu != T::one() {
            return Err(DurableError::Unreachable(mu.as_f64()));
        }
        Ok(())
    }

    fn branch_value(&self, mu: &T, side: Side) -> Result<(T, Branch), DurableError> {
        let s = sell_now_value(self, mu)?;
        let mb = mu_bar(self);
        let mut best = (s.clone(), Branch::Sell);
        let low_ok = *mu < mb || (*mu == mb && side != Side::Right);
        let high_ok = *mu > mb || (*mu == mb && side != Side::Left);
        if low_ok {
            let v = self.delta.clone() * s;
            if v > best.0 {
                best = (v, Branch::DelayLow);
            }
        }
        if high_ok {
            let v = self.delta.clone() * mu.clone() * self.v_high.clone();
            if v > best.0 {
                best = (v, Branch::DelayHigh);
            }
        }
        Ok(best)
    }
}

/// Posterior on the high type at which the period-two seller is indifferent
/// between the two prices.
pub fn mu_bar<T: Scalar>(g: &DurableGood<T>) -> T {
    g.v_low.clone() / g.v_high.clone()
}

/// Virtual value of the low type under the period-one prior; `None` when
/// the prior is degenerate on the high type.
pub fn virtual_low<T: Scalar>(g: &DurableGood<T>) -> Option<T> {
    let mu = &g.prior_high;
    if *mu == T::one() {
        return None;
    }
    Some(g.v_low.clone() - mu.clone() / (T::one() - mu.clone()) * g.gap())
}

/// Optimal period-two revenue at posterior `mu2`.
pub fn period_two_revenue<T: Scalar>(g: &DurableGood<T>, mu2: &T) -> T {
    if *mu2 <= mu_bar(g) {
        g.v_low.clone()
    } else {
        mu2.clone() * g.v_high.clone()
    }
}

/// Revenue line from trading in period one.
pub fn sell_now_value<T: Scalar>(g: &DurableGood<T>, mu2: &T) -> Result<T, DurableError> {
    g.check_posterior(mu2)?;
    match virtual_low(g) {
        Some(vl) => Ok(mu2.clone() * g.v_high.clone() + (T::one() - mu2.clone()) * vl),
        None => Ok(g.v_high.clone()),
    }
}

/// Discounted period-two revenue in virtual values. At the indifference
/// point the better of the two prices is taken.
pub fn adjusted_revenue<T: Scalar>(g: &DurableGood<T>, mu2: &T) -> Result<T, DurableError> {
    let s = sell_now_value(g, mu2)?;
    let mb = mu_bar(g);
    let low = g.delta.clone() * s;
    let high = g.delta.clone() * mu2.clone() * g.v_high.clone();
    Ok(if *mu2 < mb {
        low
    } else if *mu2 > mb {
        high
    } else {
        max_of(low, high)
    })
}

/// Upper semicontinuous objective of the period-one design problem.
pub fn period_one_pointwise<T: Scalar>(g: &DurableGood<T>, mu2: &T) -> Result<T, DurableError> {
    Ok(max_of(sell_now_value(g, mu2)?, adjusted_revenue(g, mu2)?))
}

/// Exact solution of the period-one problem.
///
/// The objective is convex on each side of the indifference point, so the
/// envelope at the prior is spanned by a pair of breakpoints.
pub fn solve_durable_good<T: Scalar>(g: &DurableGood<T>) -> Result<DurableSolution<T>, DurableError> {
    g.validate()?;
    let mu1 = g.prior_high.clone();
    let mb = mu_bar(g);
    let single = g.branch_value(&mu1, Side::Both)?;

    let mut points: Vec<(T, T, Branch)> = Vec::new();
    if mu1 < T::one() {
        let vl = virtual_low(g).expect("prior below one");
        let mut xs = vec![T::zero(), T::one()];
        // sign change of the sell-now line, then its crossing with the
        // high-price branch
        let denom = g.v_high.clone() - vl.clone();
        if denom > T::zero() {
            xs.push(-vl.clone() / denom);
        }
        let denom = g.v_high.clone() * (T::one() - g.delta.clone()) - vl.clone();
        if denom > T::zero() {
            xs.push(-vl.clone() / denom);
        }
        for x in xs {
            if x >= T::zero() && x <= T::one() && x != mb {
                let (v, b) = g.branch_value(&x, Side::Both)?;
                points.push((x, v, b));
            }
        }
        for side in [Side::Left, Side::Right] {
            let (v, b) = g.branch_value(&mb, side)?;
            points.push((mb.clone(), v, b));
        }
    }

    let eps = T::pivot_eps();
    let mut best_val = single.0.clone();
    let mut best: Option<(usize, usize, T)> = None;
    for (a, pa) in points.iter().enumerate() {
        if pa.0 >= mu1 {
            continue;
        }
        for (b, pb) in points.iter().enumerate() {
            if pb.0 <= mu1 {
                continue;
            }
            let lam = (mu1.clone() - pa.0.clone()) / (pb.0.clone() - pa.0.clone());
            let v = (T::one() - lam.clone()) * pa.1.clone() + lam.clone() * pb.1.clone();
            if v > best_val.clone() + eps.clone() {
                best_val = v;
                best = Some((a, b, lam));
            }
        }
    }

    if best.is_none() && single.1 == Branch::Sell && mu1 <= mb {
        // the sell-now line at the prior is v_L; avoid its rounding
        best_val = g.v_low.clone();
    }
    let mut atoms = match best {
        None => vec![DurableAtom {
            posterior: mu1.clone(),
            weight: T::one(),
            branch: single.1,
            transfer: T::zero(),
            period_two_price: None,
        }],
        Some((a, b, lam)) => vec![
            DurableAtom {
                posterior: points[a].0.clone(),
                weight: T::one() - lam.clone(),
                branch: points[a].2,
                transfer: T::zero(),
                period_two_price: None,
            },
            DurableAtom {
                posterior: points[b].0.clone(),
                weight: lam,
                branch: points[b].2,
                transfer: T::zero(),
                period_two_price: None,
            },
        ],
    };
    for a in atoms.iter_mut() {
        a.period_two_price = match a.branch {
            Branch::Sell => None,
            Branch::DelayLow => Some(g.v_low.clone()),
            Branch::DelayHigh => Some(g.v_high.clone()),
        };
    }
    let transfers = recover_transfers(g, &atoms);
    for (a, t) in atoms.iter_mut().zip(transfers) {
        a.transfer = t;
    }

    let regime = if atoms.len() == 1 {
        Regime::Commitment
    } else if atoms.iter().any(|a| a.branch == Branch::DelayLow) {
        Regime::Ratchet
    } else {
        Regime::Mixing
    };
    let sale = atoms.iter().find(|a| a.branch == Branch::Sell);
    let wait = atoms.iter().find(|a| a.branch != Branch::Sell);
    Ok(DurableSolution {
        mu_bar: mb,
        revenue: best_val,
        regime,
        period_one_price: sale.map(|a| a.transfer.clone()),
        period_two_price: wait.and_then(|a| a.period_two_price.clone()),
        posterior_after_no_sale: wait.map(|a| a.posterior.clone()),
        atoms,
    })
}

/// Transfers from the binding low-type participation and high-to-low
/// incentive constraints.
fn recover_transfers<T: Scalar>(g: &DurableGood<T>, atoms: &[DurableAtom<T>]) -> Vec<T> {
    let mu1 = g.prior_high.clone();
    let h = atoms.len();
    let util = |v: &T, a: &DurableAtom<T>| -> T {
        match &a.period_two_price {
            None => v.clone(),
            Some(p) => g.delta.clone() * max_of(v.clone() - p.clone(), T::zero()),
        }
    };
    let beta_low: Vec<T> = atoms
        .iter()
        .map(|a| {
            if mu1 == T::one() {
                T::zero()
            } else {
                (T::one() - a.posterior.clone()) * a.weight.clone() / (T::one() - mu1.clone())
            }
        })
        .collect();
    let beta_high: Vec<T> = atoms
        .iter()
        .map(|a| {
            if mu1.is_zero() {
                T::zero()
            } else {
                a.posterior.clone() * a.weight.clone() / mu1.clone()
            }
        })
        .collect();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    if mu1 < T::one() {
        rows.push(beta_low.clone());
        rhs.push((0..h).fold(T::zero(), |acc, k| acc + beta_low[k].clone() * util(&g.v_low, &atoms[k])));
    }
    if mu1 > T::zero() {
        let diff: Vec<T> = (0..h)
            .map(|k| beta_high[k].clone() - if mu1 < T::one() { beta_low[k].clone() } else { T::zero() })
            .collect();
        rhs.push((0..h).fold(T::zero(), |acc, k| acc + diff[k].clone() * util(&g.v_high, &atoms[k])));
        rows.push(diff);
    }
    least_squares(&rows, &rhs, h).0
}

/// The same problem written as a two-type screening model.
///
/// Allocation 0 waits and leaves a period-two price (low or high) to the
/// seller; allocation 1 trades now. The agent utilities carry a MED
/// decomposition with `f(i) = v_i`.
pub fn as_screening_model<T: Scalar>(g: &DurableGood<T>) -> ScreeningModel<T> {
    let d = g.delta.clone();
    let v = [g.v_low.clone(), g.v_high.clone()];
    let principal = v
        .iter()
        .map(|vi| {
            let high = if *vi >= g.v_high { d.clone() * g.v_high.clone() } else { T::zero() };
            vec![vec![d.clone() * g.v_low.clone(), high], vec![T::zero()]]
        })
        .collect();
    let med = Med {
        g1: vec![vec![d.clone(), T::zero()], vec![T::one()]],
        g2: vec![vec![-(d.clone() * g.v_low.clone()), T::zero()], vec![T::zero()]],
        f: v.to_vec(),
        c: vec![T::zero(), T::zero()],
    };
    ScreeningModel {
        types: v.to_vec(),
        prior: vec![T::one() - g.prior_high.clone(), g.prior_high.clone()],
        allocations: vec!["wait".into(), "sell".into()],
        actions: vec![vec!["price_low".into(), "price_high".into()], vec!["none".into()]],
        agent: Vec::new(),
        principal,
        outside: Outcome { q: 0, y: 1 },
        transfers: true,
        med: None,
    }
    .with_med_utilities(med)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use num_rational::BigRational;

    fn worked() -> DurableGood<f64> {
        DurableGood::new(1.0, 2.0, 0.5, 0.8).unwrap()
    }

    #[test]
    fn worked_example_breakpoints() {
        let g = worked();
        assert!((period_one_pointwise(&g, &0.0).unwrap() + 1.5).abs() < 1e-12);
        assert!((period_one_pointwise(&g, &0.5).unwrap() - 0.5).abs() < 1e-12);
        assert!((period_one_pointwise(&g, &0.75).unwrap() - 0.75).abs() < 1e-12);
        assert!((period_one_pointwise(&g, &1.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn worked_example_mixing() {
        let s = solve_durable_good(&worked()).unwrap();
        assert_eq!(s.regime, Regime::Mixing);
        assert!((s.revenue - 1.4).abs() < 1e-12);
        assert!((s.atoms[0].posterior - 0.5).abs() < 1e-12);
        assert!((s.atoms[0].weight - 0.4).abs() < 1e-12);
        assert!((s.period_one_price.unwrap() - 2.0).abs() < 1e-12);
        assert!(s.atoms[0].transfer.abs() < 1e-12);
        assert_eq!(s.period_two_price, Some(2.0));
    }

    #[test]
    fn low_prior_commits() {
        let g = DurableGood::<f64>::new(1.0, 2.0, 0.5, 0.3).unwrap();
        let s = solve_durable_good(&g).unwrap();
        assert_eq!(s.regime, Regime::Commitment);
        assert_eq!(s.atoms.len(), 1);
        assert!((s.revenue - 1.0).abs() < 1e-12);
        assert!((s.period_one_price.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn just_above_threshold_ratchets() {
        let g = DurableGood::<f64>::new(1.0, 2.0, 0.5, 0.52).unwrap();
        let s = solve_durable_good(&g).unwrap();
        assert_eq!(s.regime, Regime::Ratchet);
        let expect = 2.0 - 0.5 * 1.0;
        assert!((s.period_one_price.unwrap() - expect).abs() < 1e-12);
        assert_eq!(s.period_two_price, Some(1.0));
        assert_eq!(s.posterior_after_no_sale, Some(0.0));
    }

    #[test]
    fn exact_rational_mixing() {
        let g = DurableGood::new(ratio(1, 1), ratio(2, 1), ratio(1, 2), ratio(4, 5)).unwrap();
        let s = solve_durable_good::<BigRational>(&g).unwrap();
        assert_eq!(s.revenue, ratio(7, 5));
        assert_eq!(s.atoms[0].weight, ratio(2, 5));
    }

    #[test]
    fn degenerate_priors() {
        let g = DurableGood::<f64>::new(1.0, 2.0, 0.5, 1.0).unwrap();
        let s = solve_durable_good(&g).unwrap();
        assert!((s.revenue - 2.0).abs() < 1e-12);
        assert!(sell_now_value(&g, &0.5).is_err());
        let g = DurableGood::<f64>::new(1.0, 2.0, 0.5, 0.0).unwrap();
        assert!((solve_durable_good(&g).unwrap().revenue - 1.0).abs() < 1e-12);
    }

    #[test]
    fn screening_model_is_valid_med() {
        let m = as_screening_model(&worked());
        let r = m.validate(1e-12);
        assert!(r.is_valid(), "{:?}", r.errors);
    }
}
