use dragreg::linops::{from_vecs, kron, lstsq, vec, vecs, vecv, Matrix, SymMatrix, Vector};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-10.0..10.0f64, rows * cols)
        .prop_map(move |v| Matrix::from_column_slice(rows, cols, &v))
}

fn sym(n: usize) -> impl Strategy<Value = SymMatrix> {
    matrix(n, n).prop_map(|m| SymMatrix::symmetrize(&m + m.transpose()))
}

proptest! {
    #[test]
    fn half_vectors_pair_to_quadratic_form(p in sym(6), x in prop::collection::vec(-5.0..5.0f64, 6)) {
        let xv = Vector::from_column_slice(&x);
        let lhs = vecs(&p).dot(&vecv(&x));
        let rhs = xv.dot(&(p.as_matrix() * &xv));
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn half_vectorization_round_trips(p in sym(5)) {
        let back = from_vecs(vecs(&p).as_slice()).unwrap();
        prop_assert!((back.as_matrix() - p.as_matrix()).norm() <= 1e-12 * (1.0 + p.norm()));
    }

    #[test]
    fn vec_of_product_is_kronecker(a in matrix(3, 4), x in matrix(4, 2), b in matrix(2, 5)) {
        let lhs = vec(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a) * vec(&x);
        prop_assert!((lhs - &rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn least_squares_satisfies_normal_equations(m in matrix(12, 4), rhs in matrix(12, 2)) {
        prop_assume!(dragreg::linops::rank(&m) == 4);
        let z = lstsq(&m, &rhs).unwrap();
        let normal = m.transpose() * (&m * &z - &rhs);
        let scale = m.norm() * (m.norm() * z.norm() + rhs.norm());
        prop_assert!(normal.norm() <= 1e-10 * scale);
    }
}
