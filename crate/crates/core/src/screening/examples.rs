use crate::model::{Outcome, ScreeningModel};
use crate::scalar::Scalar;

/// Two-period sale of one durable unit to a buyer with `values.len()` types.
///
/// Allocation `wait` leaves the good unsold today; tomorrow the seller posts
/// one of the values as a price, discounted by `delta`. Allocation `sell`
/// trades today. Utilities exclude today's transfer.
pub fn posted_price_model<T: Scalar>(values: &[T], prior: &[T], delta: T) -> ScreeningModel<T> {
    let n = values.len();
    let agent = values
        .iter()
        .map(|v| {
            let wait = values
                .iter()
                .map(|p| if v > p { delta.clone() * (v.clone() - p.clone()) } else { T::zero() })
                .collect();
            vec![wait, vec![v.clone()]]
        })
        .collect();
    let principal = values
        .iter()
        .map(|v| {
            let wait = values
                .iter()
                .map(|p| if v >= p { delta.clone() * p.clone() } else { T::zero() })
                .collect();
            vec![wait, vec![T::zero()]]
        })
        .collect();
    ScreeningModel {
        types: values.to_vec(),
        prior: prior.to_vec(),
        allocations: vec!["wait".into(), "sell".into()],
        actions: vec![(0..n).map(|k| format!("price_{}", k + 1)).collect(), vec!["none".into()]],
        agent,
        principal,
        outside: Outcome { q: 0, y: n - 1 },
        transfers: true,
        med: None,
    }
}

/// The three-type instance with values `(0.0357, 2.5528, 4.8385)`, prior
/// `(0.1194, 0.4169, 0.4637)` and discount factor `0.95`.
pub fn three_type_example<T: Scalar>() -> ScreeningModel<T> {
    let v: Vec<T> = [0.0357, 2.5528, 4.8385].iter().map(|x| T::lit(*x)).collect();
    let p: Vec<T> = [0.1194, 0.4169, 0.4637].iter().map(|x| T::lit(*x)).collect();
    posted_price_model(&v, &p, T::lit(0.95))
}
