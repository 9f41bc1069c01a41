use proptest::prelude::*;

use limcom::concavify::{cav, cav_constrained, CandidateSet, SideConstraint};
use limcom::linprog::Relation;
use limcom::model::Belief;
use limcom::screening::grid;

fn set(values: &[f64]) -> CandidateSet<f64> {
    CandidateSet::new(grid(3, 4), values.to_vec())
}

fn target() -> impl Strategy<Value = Vec<f64>> {
    (0.01f64..1.0, 0.01f64..1.0, 0.01f64..1.0).prop_map(|(a, b, c)| {
        let s = a + b + c;
        vec![a / s, b / s, c / s]
    })
}

proptest! {
    #[test]
    fn envelope_is_a_plausible_mixture(values in prop::collection::vec(-5.0f64..5.0, 15), t in target()) {
        let s = set(&values);
        let c = cav(&s, &t).unwrap();
        prop_assert!(c.policy.len() <= 3);
        let mean = c.policy.mean();
        for i in 0..3 {
            prop_assert!((mean[i] - t[i]).abs() < 1e-9);
        }
        let v: f64 = c.policy.atoms.iter().zip(&c.candidates).map(|(a, &k)| a.weight * values[k]).sum();
        prop_assert!((v - c.value).abs() < 1e-9);
        prop_assert!(c.value <= values.iter().cloned().fold(f64::MIN, f64::max) + 1e-9);
    }

    #[test]
    fn envelope_dominates_candidates_and_is_concave(
        values in prop::collection::vec(-5.0f64..5.0, 15),
        a in target(),
        b in target(),
        k in 0usize..15,
    ) {
        let s = set(&values);
        let at = |p: &[f64]| cav(&s, p).unwrap().value;
        prop_assert!(at(s.beliefs[k].probs()) >= values[k] - 1e-9);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        prop_assert!(at(&mid) >= 0.5 * (at(&a) + at(&b)) - 1e-9);
    }

    #[test]
    fn side_constraints_cost_value_and_add_at_most_their_count(
        values in prop::collection::vec(-5.0f64..5.0, 15),
        g in prop::collection::vec(-1.0f64..1.0, 15),
        t in target(),
    ) {
        let s = set(&values);
        let free = cav(&s, &t).unwrap();
        let side = SideConstraint { values: g.clone(), relation: Relation::Ge, threshold: -0.2 };
        if let Ok(c) = cav_constrained(&s, &t, &[side]) {
            prop_assert!(c.value <= free.value + 1e-9);
            prop_assert!(c.policy.len() <= 3 + c.binding.len());
            let lhs: f64 = c.policy.atoms.iter().zip(&c.candidates).map(|(a, &k)| a.weight * g[k]).sum();
            prop_assert!(lhs >= -0.2 - 1e-9);
        }
    }

    #[test]
    fn beliefs_validate_sums(p in prop::collection::vec(0.0f64..1.0, 1..6)) {
        let s: f64 = p.iter().sum();
        prop_assume!(s > 1e-3);
        let q: Vec<f64> = p.iter().map(|x| x / s).collect();
        prop_assert!(Belief::new(q.clone(), 1e-9).is_ok());
        let mut bad = q;
        bad[0] += 0.01;
        prop_assert!(Belief::new(bad, 1e-9).is_err());
    }
}
