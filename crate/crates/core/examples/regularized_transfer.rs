//! The regularized problem can have many solutions, but A(X) and ||X||_*
//! are the same across all of them. Here tr X is measured, so every PSD
//! matrix with the right trace is optimal.

use nucnorm::linalg;
use nucnorm::solver::{self, SolverConfig};
use nucnorm::{sampling, LinearOperatorSpec, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let op = LinearOperatorSpec::trace_functional(3).unwrap();
    let b = Vector::from_element(1, 2.0);
    let lambda = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    let mut sols = Vec::new();
    for k in 0..5 {
        let start = sampling::gaussian(&mut rng, 3, 3) * 2.0;
        let cfg = SolverConfig {
            start: Some(start),
            tol_dual: 1e-11,
            max_iter: 100_000,
            ..Default::default()
        };
        let rep = solver::solve_regularized(&op, &b, lambda, &cfg).unwrap();
        println!(
            "start {k}: tr X = {:.9}, ||X||_* = {:.9}, min eig {:+.3e}, objective {:.9}",
            rep.x.trace(),
            rep.nuclear_norm,
            linalg::min_eig_sym(&linalg::sym(&rep.x)).unwrap(),
            rep.objective
        );
        sols.push(rep.x);
    }
    let spread = sols.iter().map(|x| (x - &sols[0]).norm()).fold(0.0, f64::max);
    println!("\nsolutions differ by up to {spread:.3} in Frobenius norm");
    println!("A(X) and ||X||_* agree within 1e-6: {}", solver::transfer_invariants(&sols, &op, 1e-6).unwrap());
}
