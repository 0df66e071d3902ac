mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rcm_lab::calculus::{lp_norm, VertexField};
use rcm_lab::lattice::LatticeBox;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn discrete_identities_hold(dim in 1usize..=3, seed in any::<u64>()) {
        let [sbp, form, product] = common::calculus_residuals(dim, seed);
        prop_assert!(sbp <= 1e-12, "summation by parts {sbp:e}");
        prop_assert!(form <= 1e-12, "divergence form {form:e}");
        prop_assert!(product <= 1e-12, "product rule {product:e}");
    }

    #[test]
    fn normalized_norms_increase_with_the_exponent(
        values in prop::collection::vec(-1e3f64..1e3, 1..200),
        r in 1.0f64..8.0,
        s in 1.0f64..8.0,
    ) {
        let (lo, hi) = if r <= s { (r, s) } else { (s, r) };
        let a = lp_norm(&values, lo, true).unwrap();
        let b = lp_norm(&values, hi, true).unwrap();
        prop_assert!(a <= b * (1.0 + 1e-12) + 1e-300);
        let sup = lp_norm(&values, f64::INFINITY, true).unwrap();
        prop_assert!(b <= sup * (1.0 + 1e-12));
    }
}

#[test]
fn product_rule_example() {
    // d = 1, f = g = x on the bond {0, 1}: grad(fg) = 1 = 1*1 + 0*1.
    let set = Arc::new(LatticeBox::centered(1, 1).to_set());
    let f = VertexField::from_fn(set, |p| p.get(0) as f64);
    let fg = f.zip_with(&f, |a, b| a * b).unwrap();
    let up = rcm_lab::lattice::Point::new(&[1]);
    let lo = rcm_lab::lattice::Point::new(&[0]);
    let grad = |h: &VertexField| h.get(&up).unwrap() - h.get(&lo).unwrap();
    assert_eq!(grad(&fg), 1.0);
    assert_eq!(f.get(&up).unwrap() * grad(&f) + f.get(&lo).unwrap() * grad(&f), 1.0);
}
