//! Seeded random matrices and instance generators used by the harness,
//! the examples and the test suites.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{self, Matrix, Vector};
use crate::operators::{LinearOperatorSpec, ProblemInstance};
use crate::subgeom::{self, SubdiffFrame};

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vector {
    Vector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// Uniformly distributed `n x k` Stiefel matrix (`k <= n`).
pub fn random_stiefel<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Matrix {
    assert!(k <= n, "Stiefel matrix needs k <= n");
    if k == 0 {
        return Matrix::zeros(n, 0);
    }
    subgeom::polarize(&gaussian(rng, n, k)).expect("finite gaussian input")
}

pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    random_stiefel(rng, n, n)
}

/// `U diag(s) V^T` for an `n x p` target with the given singular values.
pub fn with_singular_values(u: &Matrix, s: &[f64], v: &Matrix) -> Matrix {
    let mut d = Matrix::zeros(u.nrows(), v.nrows());
    for (i, &x) in s.iter().enumerate() {
        d[(i, i)] = x;
    }
    u * d * v.transpose()
}

/// Random `n x p` matrix of exact rank `r` with singular values in `[0.5, 2]`.
pub fn random_low_rank<R: Rng + ?Sized>(rng: &mut R, n: usize, p: usize, r: usize) -> Matrix {
    let u = random_orthogonal(rng, n);
    let v = random_orthogonal(rng, p);
    let s: Vec<f64> = (0..r).map(|_| rng.random_range(0.5..2.0)).collect();
    with_singular_values(&u, &s, &v)
}

/// Nonnegative vector of length `k` with `support` positive entries summing to `total`.
pub fn simplex_point<R: Rng + ?Sized>(rng: &mut R, k: usize, support: usize, total: f64) -> Vec<f64> {
    let mut out = vec![0.0; k];
    let raw: Vec<f64> = (0..support).map(|_| rng.random_range(0.1..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    for (o, x) in out.iter_mut().zip(raw) {
        *o = total * x / sum;
    }
    out
}

/// Two matrices with a common SVD frame and equal singular-value sums.
pub fn flat_pair<R: Rng + ?Sized>(rng: &mut R, n: usize, p: usize) -> (Matrix, Matrix) {
    let u = random_orthogonal(rng, n);
    let v = random_orthogonal(rng, p);
    let total = rng.random_range(0.5..3.0);
    let k1 = rng.random_range(1..=p);
    let s1 = simplex_point(rng, p, k1, total);
    let k2 = rng.random_range(1..=p);
    let s2 = simplex_point(rng, p, k2, total);
    (with_singular_values(&u, &s1, &v), with_singular_values(&u, &s2, &v))
}

/// A problem whose solution set contains a planted flat through `xbar`.
#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub instance: ProblemInstance,
    pub xbar: Matrix,
    /// Direction in `ker A` along which the nuclear norm stays constant.
    pub direction: Matrix,
}

/// Builds `xbar` of rank `r` and a direction `D = U M blockdiag(I_r, R) V^T`
/// with `M` symmetric, traceless and `diag(sigma) + M` PSD. The operator has
/// the dual certificate `U blockdiag(I_r, R) V^T` as one row and random rows
/// orthogonal to `D`, so `kernel_extra + 1` is the kernel dimension.
pub fn planted_nonunique<R: Rng + ?Sized>(rng: &mut R, n: usize, p: usize, r: usize, kernel_extra: usize) -> PlantedInstance {
    assert!(r >= 1 && r < p && p <= n);
    let xbar = random_low_rank(rng, n, p, r);
    let frame = SubdiffFrame::new(&xbar).expect("finite");
    let k = p - r;
    let rb = random_stiefel(rng, n - r, k);
    let q = {
        let g = gaussian(rng, k, k);
        &g * g.transpose() + Matrix::identity(k, k) * 0.1
    };
    let pblock = &rb * &q * rb.transpose();
    let h = gaussian(rng, k, r) * 0.3;
    let cblock = &rb * &h;
    let mut a = {
        let g = gaussian(rng, r, r);
        linalg::sym(&g)
    };
    let shift = (a.trace() + pblock.trace()) / r as f64;
    for i in 0..r {
        a[(i, i)] -= shift;
    }
    let mut m = Matrix::zeros(n, n);
    m.view_mut((0, 0), (r, r)).copy_from(&a);
    m.view_mut((r, 0), (n - r, r)).copy_from(&cblock);
    m.view_mut((0, r), (r, n - r)).copy_from(&cblock.transpose());
    m.view_mut((r, r), (n - r, n - r)).copy_from(&pblock);
    // keep diag(sigma) + M comfortably PSD
    let sigma_r = frame.sigma[r - 1];
    let q_min = linalg::min_eig_sym(&q).expect("square");
    let h_sq = linalg::op_norm(&h).powi(2).max(1e-12);
    let scale = (0.5 * sigma_r / linalg::op_norm(&m).max(1e-12)).min(0.25 * q_min * sigma_r / h_sq);
    let m = m * scale;
    let bd = linalg::block_diag_identity(r, &rb);
    let direction = frame.from_frame(&(&m * &bd));
    let dual = frame.from_frame(&bd);

    let np = n * p;
    let mtotal = np - 1 - kernel_extra;
    let dvec = linalg::vec_rows(&direction);
    let dunit = &dvec / dvec.norm();
    let mut rows = Matrix::zeros(mtotal, np);
    rows.set_row(0, &linalg::vec_rows(&dual).transpose());
    for i in 1..mtotal {
        let g = gaussian_vector(rng, np);
        let g = &g - &dunit * dunit.dot(&g);
        rows.set_row(i, &g.transpose());
    }
    let op = LinearOperatorSpec::dense(n, p, rows).expect("valid payload");
    let b = op.apply(&xbar).expect("shape");
    PlantedInstance {
        instance: ProblemInstance::new(op, b, None).expect("finite"),
        xbar,
        direction,
    }
}

/// An instance where both sufficient conditions hold at `xbar`: a dual
/// certificate `U blockdiag(I_r, F) V^T` with `||F||_op = 1/2` is one row and
/// the remaining rows are random, with enough of them to cover the parallel
/// complement.
pub fn assumption_instance<R: Rng + ?Sized>(rng: &mut R, n: usize, p: usize, r: usize, extra_rows: usize) -> (ProblemInstance, Matrix) {
    let xbar = random_low_rank(rng, n, p, r);
    let frame = SubdiffFrame::new(&xbar).expect("finite");
    let f = gaussian(rng, n - r, p - r);
    let f = if f.is_empty() { f } else { &f * (0.5 / linalg::op_norm(&f)) };
    let dual = frame.subgradient(&f).expect("shape");
    let np = n * p;
    let needed = r * (n + p - r);
    let m = (needed + extra_rows).clamp(1, np);
    let mut rows = Matrix::zeros(m, np);
    rows.set_row(0, &linalg::vec_rows(&dual).transpose());
    for i in 1..m {
        rows.set_row(i, &gaussian_vector(rng, np).transpose());
    }
    let op = LinearOperatorSpec::dense(n, p, rows).expect("valid payload");
    let b = op.apply(&xbar).expect("shape");
    (ProblemInstance::new(op, b, None).expect("finite"), xbar)
}

/// `tr X = 1` on `n x n` matrices; every PSD matrix of unit trace solves it.
pub fn trace_instance(n: usize) -> ProblemInstance {
    let op = LinearOperatorSpec::trace_functional(n).expect("n >= 1");
    ProblemInstance::new(op, Vector::from_element(1, 1.0), None).expect("finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subgeom::is_flat_segment;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stiefel_and_orthogonal_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(linalg::orthonormality_error(&random_stiefel(&mut rng, 5, 3)) < 1e-12);
        assert!(linalg::orthonormality_error(&random_orthogonal(&mut rng, 4)) < 1e-12);
        assert_eq!(random_stiefel(&mut rng, 3, 0).shape(), (3, 0));
    }

    #[test]
    fn flat_pairs_are_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (a, b) = flat_pair(&mut rng, 4, 3);
            assert!(is_flat_segment(&a, &b, 1e-10).unwrap());
        }
    }

    #[test]
    fn planted_direction_is_a_flat_kernel_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inst = planted_nonunique(&mut rng, 4, 3, 1, 2);
        let op = &inst.instance.op;
        assert!(op.apply(&inst.direction).unwrap().norm() < 1e-10);
        assert_eq!(op.kernel_basis().len(), 3);
        let xhat = &inst.xbar + &inst.direction;
        assert!(is_flat_segment(&inst.xbar, &xhat, 1e-10).unwrap());
        assert!(inst.direction.norm() > 1e-3);
    }
}
