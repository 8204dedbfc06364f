use approx::assert_abs_diff_eq;
use minkowski_tensors::symtensor::{component_count, metric_tensor, vector_power, Rotation, SymTensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn arb_tensor(n: usize, rank: usize) -> impl Strategy<Value = SymTensor> {
    prop::collection::vec(-1.0f64..1.0, component_count(n, rank)).prop_map(move |c| SymTensor::from_coeffs(n, rank, c).unwrap())
}

fn arb_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_evaluates_pointwise(a in arb_tensor(3, 2), b in arb_tensor(3, 1), x in arb_vec(3)) {
        let ab = a.sym_product(&b).unwrap();
        let lhs = ab.evaluate_diag(&x).unwrap();
        let rhs = a.evaluate_diag(&x).unwrap() * b.evaluate_diag(&x).unwrap();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
    }

    #[test]
    fn product_commutes(a in arb_tensor(4, 2), b in arb_tensor(4, 3)) {
        let ab = a.sym_product(&b).unwrap();
        let ba = b.sym_product(&a).unwrap();
        assert_abs_diff_eq!(ab.max_abs_diff(&ba).unwrap(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn vector_power_is_inner_product_power(x in arb_vec(3), y in arb_vec(3), r in 0usize..5) {
        let v = vector_power(&x, r).evaluate_diag(&y).unwrap();
        assert_abs_diff_eq!(v, dot(&x, &y).powi(r as i32), epsilon = 1e-12);
    }

    #[test]
    fn metric_is_squared_norm(x in arb_vec(4), m in 0usize..3) {
        let q = metric_tensor(4).power(m);
        assert_abs_diff_eq!(q.evaluate_diag(&x).unwrap(), dot(&x, &x).powi(m as i32), epsilon = 1e-12);
    }

    #[test]
    fn rotation_commutes_with_powers(x in arb_vec(3), r in 0usize..4, seed in 0u64..10_000) {
        let rot = Rotation::random(3, &mut ChaCha8Rng::seed_from_u64(seed));
        let lhs = vector_power(&x, r).rotate(&rot).unwrap();
        let rhs = vector_power(&rot.apply(&x), r);
        assert_abs_diff_eq!(lhs.max_abs_diff(&rhs).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_round_trip(a in arb_tensor(3, 3), seed in 0u64..10_000) {
        let rot = Rotation::random(3, &mut ChaCha8Rng::seed_from_u64(seed));
        let back = a.rotate(&rot).unwrap().rotate(&rot.inverse()).unwrap();
        assert_abs_diff_eq!(back.max_abs_diff(&a).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(metric_tensor(3).rotate(&rot).unwrap().max_abs_diff(&metric_tensor(3)).unwrap(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn full_form_round_trip(a in arb_tensor(3, 3)) {
        let b = SymTensor::from_full(3, 3, &a.to_full());
        assert_abs_diff_eq!(a.max_abs_diff(&b).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn text_round_trip(a in arb_tensor(3, 2)) {
        let b = SymTensor::from_text(&a.to_text()).unwrap();
        assert_eq!(a.coeffs(), b.coeffs());
    }
}
