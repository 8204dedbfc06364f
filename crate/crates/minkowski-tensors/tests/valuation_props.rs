use approx::assert_abs_diff_eq;
use minkowski_tensors::geometry::{cuboid, random_polytope, Halfspace, Polytope};
use minkowski_tensors::identities::evaluate_specs;
use minkowski_tensors::sphereint::QuadratureSpec;
use minkowski_tensors::symtensor::{Rotation, SymTensor};
use minkowski_tensors::valuations::{local_tensor, LocalTensorSpec, TestFunction};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn polytope(seed: u64, count: usize) -> Polytope {
    random_polytope(3, count, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn specs() -> Vec<LocalTensorSpec> {
    (0..=1).flat_map(|p| LocalTensorSpec::basis(3, p)).collect()
}

fn value(p: &Polytope, s: &LocalTensorSpec) -> SymTensor {
    local_tensor(p, s, &TestFunction::Full, &QuadratureSpec::default()).unwrap().tensor
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn box_intrinsic_volumes(a in 0.1f64..3.0, b in 0.1f64..3.0, c in 0.1f64..3.0) {
        let p = cuboid(&[0.0; 3], &[a, b, c]).unwrap();
        let v1 = value(&p, &LocalTensorSpec::new(1, 0, 0, 0, 0)).value();
        let v2 = value(&p, &LocalTensorSpec::new(2, 0, 0, 0, 0)).value();
        assert_abs_diff_eq!(v1, a + b + c, epsilon = 1e-11);
        assert_abs_diff_eq!(v2, a * b + b * c + c * a, epsilon = 1e-11);
    }

    #[test]
    fn translation_invariant_without_position(seed in 0u64..100_000, t in prop::collection::vec(-2.0f64..2.0, 3), k in 0usize..3, s in 0usize..3) {
        let p = polytope(seed, 7);
        let spec = LocalTensorSpec::new(k, 0, s, 0, 0);
        let d = value(&p, &spec).max_abs_diff(&value(&p.translate(&t), &spec)).unwrap();
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn rotation_covariant(seed in 0u64..100_000, k in 0usize..3, r in 0usize..2, s in 0usize..3) {
        let p = polytope(seed, 7);
        let rot = Rotation::random(3, &mut ChaCha8Rng::seed_from_u64(seed ^ 0xabc));
        let spec = LocalTensorSpec::new(k, r, s, 0, 0);
        let lhs = value(&p.rotate(&rot), &spec);
        let rhs = value(&p, &spec).rotate(&rot).unwrap();
        assert_abs_diff_eq!(lhs.max_abs_diff(&rhs).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn additive_under_cuts(seed in 0u64..100_000, normal in prop::collection::vec(-1.0f64..1.0, 3), off in -0.3f64..0.3) {
        prop_assume!(normal.iter().map(|x| x * x).sum::<f64>() > 0.05);
        let p = polytope(seed, 8);
        let h = Halfspace::new(normal, off).unwrap();
        let parts = [p.intersect_halfspace(&h), p.intersect_halfspace(&h.flipped()), p.intersect_hyperplane(&h)];
        prop_assume!(parts.iter().all(|x| x.is_ok()));
        let q = QuadratureSpec::default();
        let sp = specs();
        let vals: Vec<Vec<SymTensor>> = parts.iter().map(|x| evaluate_specs(x.as_ref().unwrap(), &sp, &TestFunction::Full, &q).unwrap()).collect();
        let whole = evaluate_specs(&p, &sp, &TestFunction::Full, &q).unwrap();
        for i in 0..sp.len() {
            let d = vals[0][i].add(&vals[1][i]).unwrap().sub(&whole[i]).unwrap().sub(&vals[2][i]).unwrap();
            assert_abs_diff_eq!(d.max_abs(), 0.0, epsilon = 1e-9);
        }
    }
}

// a cut leaving a vertex cone close to a half-space
#[test]
fn additive_under_cut_with_wide_vertex_cone() {
    let p = polytope(17774, 8);
    let h = Halfspace::new(vec![-0.15543312091792688, -0.8423546944250312, 0.1028443135480157], 0.0).unwrap();
    let q = QuadratureSpec::default();
    let sp = specs();
    let parts: Vec<Vec<SymTensor>> = [p.intersect_halfspace(&h), p.intersect_halfspace(&h.flipped()), p.intersect_hyperplane(&h)]
        .iter()
        .map(|x| evaluate_specs(x.as_ref().unwrap(), &sp, &TestFunction::Full, &q).unwrap())
        .collect();
    let whole = evaluate_specs(&p, &sp, &TestFunction::Full, &q).unwrap();
    for i in 0..sp.len() {
        let d = parts[0][i].add(&parts[1][i]).unwrap().sub(&whole[i]).unwrap().sub(&parts[2][i]).unwrap();
        assert_abs_diff_eq!(d.max_abs(), 0.0, epsilon = 1e-12);
    }
}
