//! Jacobi SVD, the three matrix norms and the von Neumann trace inequality.

use nucnorm::linalg::{self, Matrix};
use nucnorm::sampling;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let x = Matrix::from_row_slice(3, 2, &[3.0, 0.0, 4.0, 5.0, 0.0, 0.0]);
    let f = linalg::svd(&x).unwrap();
    println!("X = {x:.3}");
    println!("singular values {:?}, rank {}", f.sigma, f.rank);
    println!("reconstruction error {:.2e}", (f.reconstruct() - &x).norm());

    let n = linalg::norms(&x).unwrap();
    println!("nuclear {:.6}  frobenius {:.6}  operator {:.6}", n.nuclear, n.frobenius, n.operator);

    // <X, Y> <= sum_i sigma_i(X) sigma_i(Y), with equality in a shared frame
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let y = sampling::gaussian(&mut rng, 3, 2);
    println!("\nvon Neumann gap for a random Y: {:.6}", linalg::von_neumann_gap(&x, &y).unwrap());
    let y_shared = &f.u.columns(0, 2) * Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0])) * f.v.transpose();
    println!("gap for Y in the frame of X:   {:.2e}", linalg::von_neumann_gap(&x, &y_shared).unwrap());

    // a numerically rank-deficient input
    let low = sampling::random_low_rank(&mut rng, 5, 4, 2);
    let noisy = &low + sampling::gaussian(&mut rng, 5, 4) * 1e-12;
    let sv = linalg::singular_values(&noisy);
    println!("\nrank of a rank-2 matrix plus 1e-12 noise: {}", linalg::numerical_rank(&sv, linalg::DEFAULT_RANK_TOL));
    println!("singular values {}", sv.iter().map(|s| format!("{s:.3e}")).collect::<Vec<_>>().join(", "));
}
