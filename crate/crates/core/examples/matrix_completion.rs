//! Rank-one completion of a 5x5 matrix from 20 observed entries, followed by
//! a uniqueness certificate for the recovered matrix.

use nucnorm::certify::{self, CertifyConfig};
use nucnorm::solver::{self, SolverConfig};
use nucnorm::{LinearOperatorSpec, Matrix};

fn main() {
    let u = [1.0, -2.0, 0.5, 1.5, -1.0];
    let v = [2.0, 1.0, -1.0, 0.5, 1.0];
    let truth = Matrix::from_fn(5, 5, |i, j| u[i] * v[j]);

    // drop the five entries (i, (2 i + 1) mod 5)
    let observed: Vec<(usize, usize)> = (0..5).flat_map(|i| (0..5).map(move |j| (i, j))).filter(|&(i, j)| j != (2 * i + 1) % 5).collect();
    let op = LinearOperatorSpec::entry_mask(5, 5, observed).unwrap();
    let b = op.apply(&truth).unwrap();
    println!("observed {} of 25 entries", op.m());

    let cfg = SolverConfig {
        tol_primal: 1e-10,
        tol_dual: 1e-10,
        max_iter: 50_000,
        ..Default::default()
    };
    let rep = solver::solve_affine(&op, &b, &cfg).unwrap();
    println!("ADMM: {} iterations, converged {}", rep.iterations, rep.converged);
    println!("recovery error {:.2e}", (&rep.x - &truth).norm());

    let cert_cfg = CertifyConfig {
        rank_tol: 1e-6,
        ..Default::default()
    };
    let uniq = certify::certify_uniqueness(&op, &b, &rep.x, &cert_cfg).unwrap();
    println!(
        "certified {} by {}; gamma_star {:?}, parallel span {}",
        uniq.verdict.as_str(),
        uniq.decided_by.as_str(),
        uniq.assumption.ri.gamma_star,
        uniq.assumption.parallel_span
    );
}
