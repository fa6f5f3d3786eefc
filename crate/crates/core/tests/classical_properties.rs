use gz_core::classical::{
    build_family, char_minor, independence_rank, verify_commutes, FamilyKind, FamilySpec, Momentum, Side, Status,
};
use gz_core::poisson::canonical::random_matrix;
use gz_core::poisson::{evaluate, CMatrix, CanonicalPoint};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn block_det(x: &CMatrix, rows: &[usize], cols: &[usize], lambda: Complex64) -> Complex64 {
    let m = DMatrix::from_fn(rows.len(), cols.len(), |a, b| {
        let (r, c) = (rows[a], cols[b]);
        let diag = if r == c { lambda } else { Complex64::new(0.0, 0.0) };
        diag - x[(r - 1, c - 1)]
    });
    m.determinant()
}

fn rel_err(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn minors_match_numeric_determinants(n in 1usize..=4, seed in any::<u64>(), lre in -2.0f64..2.0, lim in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pt = CanonicalPoint::random(n, &mut rng);
        let lambda = Complex64::new(lre, lim);
        let zero = Complex64::new(0.0, 0.0);
        for momentum in [Momentum::U, Momentum::UTilde] {
            let x = if momentum == Momentum::U { pt.u() } else { pt.utilde() };
            for k in 1..=n {
                let cols: Vec<usize> = (1..=k).collect();
                let principal = evaluate(&char_minor(n, momentum, k, false).unwrap(), &pt, lambda, zero).unwrap();
                prop_assert!(rel_err(principal, block_det(&x, &cols, &cols, lambda)) < 1e-10);
                let rows: Vec<usize> = (n - k + 1..=n).collect();
                let corner = evaluate(&char_minor(n, momentum, k, true).unwrap(), &pt, lambda, zero).unwrap();
                prop_assert!(rel_err(corner, block_det(&x, &rows, &cols, lambda)) < 1e-10);
            }
        }
    }

    #[test]
    fn full_minor_is_conjugation_invariant(n in 1usize..=4, seed in any::<u64>(), lre in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pt = CanonicalPoint::random(n, &mut rng);
        let h = random_matrix(n, &mut rng);
        let Some(h_inv) = h.clone().try_inverse() else { return Ok(()) };
        // u = -gᵀp, so g ↦ g hᵀ and p ↦ p h⁻¹ send u to h u h⁻¹
        let moved = CanonicalPoint::new(pt.g() * h.transpose(), pt.p() * &h_inv).unwrap();
        let conj = &h * pt.u() * &h_inv;
        prop_assert!((moved.u() - &conj).norm() <= 1e-9 * conj.norm().max(1.0));
        let lambda = Complex64::new(lre, 0.3);
        let full = char_minor(n, Momentum::U, n, false).unwrap();
        let a = evaluate(&full, &pt, lambda, Complex64::new(0.0, 0.0)).unwrap();
        let b = evaluate(&full, &moved, lambda, Complex64::new(0.0, 0.0)).unwrap();
        // floating scale of the terms in a degree-n determinant of λ − u
        let scale = (lambda.norm() + pt.u().norm().max(conj.norm())).powi(n as i32).max(1.0);
        prop_assert!((b - a).norm() / scale < 1e-10, "{} vs {} at scale {}", a, b, scale);
    }

    #[test]
    fn principal_rank_is_n_squared(n in 1usize..=3, seed in any::<u64>()) {
        let fam = build_family(&FamilySpec::new(FamilyKind::GzPrincipal, n, Side::Both)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pt = CanonicalPoint::random(n, &mut rng);
        prop_assert_eq!(independence_rank(&fam, &pt).unwrap(), n * n);
    }
}

#[test]
fn every_small_family_commutes() {
    for n in 1..=3 {
        for kind in [FamilyKind::GzPrincipal, FamilyKind::GzCorner] {
            for side in [Side::Left, Side::Right, Side::Both] {
                let fam = build_family(&FamilySpec::new(kind, n, side)).unwrap();
                let rep = verify_commutes(&fam);
                assert_eq!(rep.status, Status::Ok, "{kind:?} {side:?} n={n}: {:?}", rep.witness);
            }
        }
    }
}
