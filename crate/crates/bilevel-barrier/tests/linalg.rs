use approx::assert_abs_diff_eq;
use bilevel_barrier::linalg::{self, Matrix};
use bilevel_barrier::Error;

#[test]
fn solve_spd_roundtrip() {
    // A = L L^T for a fixed lower-triangular L, so A is SPD by construction.
    let a = Matrix::from_rows(&[
        vec![4.0, 2.0, 0.6],
        vec![2.0, 5.0, 1.4],
        vec![0.6, 1.4, 3.3],
    ]);
    let x_true = vec![1.0, -2.0, 0.5];
    let b = a.matvec(&x_true);
    let x = linalg::solve_spd(&a, &b).unwrap();
    for (xi, ti) in x.iter().zip(&x_true) {
        assert_abs_diff_eq!(xi, ti, epsilon = 1e-10);
    }
}

#[test]
fn solve_spd_identity_is_identity() {
    let a = Matrix::identity(4);
    let b = vec![3.0, -1.0, 0.0, 7.5];
    assert_eq!(linalg::solve_spd(&a, &b).unwrap(), b);
}

#[test]
fn solve_spd_rejects_asymmetric() {
    let a = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]);
    assert!(matches!(linalg::solve_spd(&a, &b()), Err(Error::NotSymmetric(_))));
    fn b() -> Vec<f64> {
        vec![1.0, 1.0]
    }
}

#[test]
fn solve_spd_rejects_indefinite() {
    let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]); // eigenvalues 3, -1
    assert!(matches!(
        linalg::solve_spd(&a, &[1.0, 1.0]),
        Err(Error::NotPositiveDefinite)
    ));
}

#[test]
fn solve_spd_dimension_mismatch() {
    let a = Matrix::identity(3);
    assert!(matches!(
        linalg::solve_spd(&a, &[1.0, 2.0]),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn min_eig_bound_brackets_spectrum() {
    // diag(2, 5, 9): smallest eigenvalue is exactly 2.
    let mut a = Matrix::zeros(3, 3);
    a[(0, 0)] = 2.0;
    a[(1, 1)] = 5.0;
    a[(2, 2)] = 9.0;
    assert!(linalg::min_eig_lower_bound(&a, 1.9).unwrap());
    assert!(!linalg::min_eig_lower_bound(&a, 2.1).unwrap());
}

#[test]
fn vector_helpers() {
    let a = vec![1.0, 2.0];
    let b = vec![3.0, -1.0];
    assert_eq!(linalg::dot(&a, &b), 1.0);
    assert_eq!(linalg::axpy(&a, 2.0, &b), vec![7.0, 0.0]);
    assert_eq!(linalg::sub(&a, &b), vec![-2.0, 3.0]);
    assert_abs_diff_eq!(linalg::dist(&a, &b), 13.0f64.sqrt(), epsilon = 1e-15);
    assert_abs_diff_eq!(linalg::norm(&[3.0, 4.0]), 5.0, epsilon = 1e-15);
}

#[test]
fn matrix_outer_and_asymmetry() {
    let m = Matrix::outer(&[1.0, 2.0], &[3.0, 4.0], 2.0);
    assert_eq!(m[(0, 1)], 8.0);
    assert_eq!(m[(1, 0)], 12.0);
    assert_abs_diff_eq!(m.asymmetry(), 4.0, epsilon = 1e-15);
    assert_eq!(Matrix::identity(5).asymmetry(), 0.0);
}
