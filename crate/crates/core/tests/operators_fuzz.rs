use nucnorm::harness::random_operator;
use nucnorm::linalg::{self, Matrix};
use nucnorm::{sampling, LinearOperatorSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn adjoint_identity_across_kinds() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let p = rng.random_range(1..=6);
        let op = random_operator(&mut rng, n, p);
        let x = sampling::gaussian(&mut rng, n, p);
        let y = sampling::gaussian_vector(&mut rng, op.m());
        let lhs = op.apply(&x).unwrap().dot(&y);
        let rhs = x.dot(&op.adjoint(&y).unwrap());
        assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + x.norm() * y.norm() * op.op_norm()), "{}", op.kind_name());
    }
}

#[test]
fn matricization_agrees_with_apply() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..200 {
        let n = rng.random_range(1..=5);
        let p = rng.random_range(1..=5);
        let op = random_operator(&mut rng, n, p);
        let x = sampling::gaussian(&mut rng, n, p);
        let via_matrix = op.matricize() * linalg::vec_rows(&x);
        assert!((via_matrix - op.apply(&x).unwrap()).norm() <= 1e-12 * (1.0 + x.norm()));
    }
}

#[test]
fn kernel_and_range_split_the_domain() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..100 {
        let n = rng.random_range(1..=5);
        let p = rng.random_range(1..=5);
        let op = random_operator(&mut rng, n, p);
        let bases = op.bases();
        assert_eq!(bases.kernel.len() + bases.range.len(), n * p);
        for k in &bases.kernel {
            assert!(op.apply(k).unwrap().norm() <= 1e-9);
            for r in &bases.range {
                assert!(k.dot(r).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn transposed_operator_acts_on_transposes() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..100 {
        let n = rng.random_range(1..=5);
        let p = rng.random_range(1..=5);
        let op = random_operator(&mut rng, n, p);
        let t = op.transposed().unwrap();
        let x = sampling::gaussian(&mut rng, n, p);
        assert_eq!((t.n(), t.p()), (p, n));
        assert!((t.apply(&x.transpose()).unwrap() - op.apply(&x).unwrap()).norm() <= 1e-12 * (1.0 + x.norm()));
    }
}

#[test]
fn padding_lift_ignores_extra_columns() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for _ in 0..100 {
        let n = rng.random_range(2..=5);
        let p = rng.random_range(1..n);
        let op = random_operator(&mut rng, n, p);
        let lifted = op.lift_padded().unwrap();
        assert_eq!((lifted.n(), lifted.p()), (n, n));
        let x = sampling::gaussian(&mut rng, n, p);
        let mut padded = Matrix::zeros(n, n);
        padded.columns_mut(0, p).copy_from(&x);
        padded.columns_mut(p, n - p).copy_from(&sampling::gaussian(&mut rng, n, n - p));
        assert!((lifted.apply(&padded).unwrap() - op.apply(&x).unwrap()).norm() <= 1e-12 * (1.0 + padded.norm()));
    }
}

#[test]
fn shape_errors_are_reported() {
    let op = LinearOperatorSpec::full_mask(2, 3).unwrap();
    assert!(op.apply(&Matrix::zeros(3, 2)).is_err());
    assert!(op.adjoint(&nucnorm::Vector::zeros(5)).is_err());
    assert!(LinearOperatorSpec::entry_mask(2, 2, vec![(2, 0)]).is_err());
    assert!(LinearOperatorSpec::dense(2, 2, Matrix::zeros(1, 3)).is_err());
    assert!(LinearOperatorSpec::stacked(vec![]).is_err());
}
