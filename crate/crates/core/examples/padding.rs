//! Rectangular problems reduce to square ones by zero padding: solving the
//! padded problem and dropping the extra columns gives the original solution.

use nucnorm::sampling;
use nucnorm::solver::{self, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (inst, xbar) = sampling::assumption_instance(&mut rng, 5, 3, 1, 2);
    let cfg = SolverConfig {
        tol_primal: 1e-11,
        tol_dual: 1e-11,
        max_iter: 50_000,
        ..Default::default()
    };
    let base = solver::solve_affine(&inst.op, &inst.b, &cfg).unwrap();
    let lifted_op = inst.op.lift_padded().unwrap();
    let lifted = solver::solve_affine(&lifted_op, &inst.b, &cfg).unwrap();
    println!("original {}x{}, padded {}x{}", inst.op.n(), inst.op.p(), lifted_op.n(), lifted_op.p());
    println!("error of the 5x3 solve:      {:.2e}", (&base.x - &xbar).norm());
    println!("truncated padded vs direct:  {:.2e}", (lifted.x.columns(0, 3) - &base.x).norm());
    println!("norm of the padded block:    {:.2e}", lifted.x.columns(3, 2).norm());
}
