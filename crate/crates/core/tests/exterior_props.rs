use lusin_core::exterior::{
    blade_basis, boundary_operator_spec, derivative_operator_spec, MultiVector,
};
use proptest::prelude::*;

fn multivector(n: usize, degree: usize) -> impl Strategy<Value = MultiVector> {
    let len = blade_basis(n, degree).len();
    prop::collection::vec(-2.0f64..2.0, len)
        .prop_map(move |c| MultiVector::new(n, degree, c).unwrap())
}

fn close(a: &MultiVector, b: &MultiVector) -> bool {
    a.degree() == b.degree()
        && a.add(&b.scaled(-1.0)).unwrap().norm() <= 1e-10 * (1.0 + a.norm() + b.norm())
}

fn triple() -> impl Strategy<Value = (MultiVector, MultiVector, MultiVector)> {
    (1usize..=5)
        .prop_flat_map(|n| (Just(n), 0..=n, 0..=n, 0..=n))
        .prop_filter("total degree fits", |&(n, p, q, s)| p + q + s <= n)
        .prop_flat_map(|(n, p, q, s)| (multivector(n, p), multivector(n, q), multivector(n, s)))
}

fn pair_and_vector() -> impl Strategy<Value = (MultiVector, MultiVector, Vec<f64>)> {
    (1usize..=5)
        .prop_flat_map(|n| (Just(n), 0..=n, 0..=n))
        .prop_filter("total degree fits", |&(n, p, q)| p + q <= n)
        .prop_flat_map(|(n, p, q)| {
            (
                multivector(n, p),
                multivector(n, q),
                prop::collection::vec(-2.0f64..2.0, n),
            )
        })
}

proptest! {
    #[test]
    fn wedge_is_associative((a, b, c) in triple()) {
        let left = a.wedge(&b).unwrap().wedge(&c).unwrap();
        let right = a.wedge(&b.wedge(&c).unwrap()).unwrap();
        prop_assert!(close(&left, &right));
    }

    #[test]
    fn wedge_is_graded_commutative((a, b, _v) in pair_and_vector()) {
        let sign = if a.degree() * b.degree() % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(close(&a.wedge(&b).unwrap(), &b.wedge(&a).unwrap().scaled(sign)));
    }

    #[test]
    fn interior_is_an_antiderivation((a, b, v) in pair_and_vector()) {
        prop_assume!(a.degree() + b.degree() >= 1);
        let lhs = a.wedge(&b).unwrap().interior(&v).unwrap();
        // Right contraction: (a∧b)⌟v = a∧(b⌟v) + (−1)^{|b|} (a⌟v)∧b.
        let sign = if b.degree() % 2 == 0 { 1.0 } else { -1.0 };
        let n = a.space_dim();
        let first = if a.degree() > 0 {
            a.interior(&v).unwrap().wedge(&b).unwrap().scaled(sign)
        } else {
            MultiVector::zero(n, a.degree() + b.degree() - 1).unwrap()
        };
        let second = if b.degree() > 0 {
            a.wedge(&b.interior(&v).unwrap()).unwrap()
        } else {
            MultiVector::zero(n, a.degree() + b.degree() - 1).unwrap()
        };
        prop_assert!(close(&lhs, &first.add(&second).unwrap()));
    }

    #[test]
    fn interior_is_adjoint_to_right_wedge((a, b, v) in pair_and_vector()) {
        prop_assume!(a.degree() + b.degree() >= 1 && b.degree() >= 1);
        // ω = b of degree q, η = a of degree q−1 when the degrees allow it.
        let n = a.space_dim();
        let eta = MultiVector::new(n, b.degree() - 1, a.coeffs().iter().copied().cycle().take(blade_basis(n, b.degree() - 1).len()).collect()).unwrap();
        let lhs = b.interior(&v).unwrap().inner(&eta);
        let rhs = b.inner(&eta.wedge(&MultiVector::vector(&v).unwrap()).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs() + rhs.abs()));
    }

    #[test]
    fn interior_twice_vanishes((a, _b, v) in pair_and_vector()) {
        prop_assume!(a.degree() >= 2);
        let twice = a.interior(&v).unwrap().interior(&v).unwrap();
        prop_assert!(twice.norm() <= 1e-12 * (1.0 + a.norm()));
    }

    #[test]
    fn wedge_with_a_vector_twice_vanishes((a, _b, v) in pair_and_vector()) {
        prop_assume!(a.degree() + 2 <= a.space_dim());
        let e = MultiVector::vector(&v).unwrap();
        prop_assert!(a.wedge(&e).unwrap().wedge(&e).unwrap().norm() <= 1e-12 * (1.0 + a.norm()));
    }

    #[test]
    fn boundary_symbol_is_nilpotent(n in 2usize..=5, xi in prop::collection::vec(-1.0f64..1.0, 5)) {
        let xi = &xi[..n];
        for degree in 1..n {
            let outer = boundary_operator_spec(n, degree - 1).unwrap().symbol(xi).unwrap();
            let inner = boundary_operator_spec(n, degree).unwrap().symbol(xi).unwrap();
            prop_assert!((outer * inner).amax() <= 1e-12);
        }
    }

    #[test]
    fn boundary_and_derivative_symbols_are_transposes(n in 1usize..=5, xi in prop::collection::vec(-1.0f64..1.0, 5)) {
        let xi = &xi[..n];
        for degree in 0..n {
            let d = derivative_operator_spec(n, degree).unwrap().symbol(xi).unwrap();
            let b = boundary_operator_spec(n, degree).unwrap().symbol(xi).unwrap();
            prop_assert!((d - b.transpose()).amax() <= 1e-12);
        }
    }
}

#[test]
fn blade_counts_are_binomial() {
    let counts: Vec<usize> = (0..=5).map(|k| blade_basis(5, k).len()).collect();
    assert_eq!(counts, vec![1, 5, 10, 10, 5, 1]);
}
