//! Flat segments of the nuclear-norm sphere and simultaneous polarization.
//!
//! Two matrices lie on a common flat exactly when one matrix polarizes
//! both. The midpoint test and the polarizer test must agree.

use nucnorm::linalg::{self, Matrix};
use nucnorm::{sampling, subgeom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn report(label: &str, x1: &Matrix, x2: &Matrix) {
    let tol = 1e-8;
    let flat = subgeom::is_flat_segment(x1, x2, tol).unwrap();
    let by_polar = subgeom::is_flat_by_polarization(x1, x2, tol).unwrap();
    let mid = (x1 + x2) / 2.0;
    println!(
        "{label}: norms {:.4} {:.4}, midpoint {:.4}, flat {flat}, by polarization {by_polar}",
        linalg::nuclear_norm(x1),
        linalg::nuclear_norm(x2),
        linalg::nuclear_norm(&mid)
    );
    if let Some(u) = subgeom::common_polarizer(x1, x2, tol).unwrap() {
        println!("  common polarizer {u:.4}");
    }
}

fn main() {
    let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let b = Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
    report("diag(1,0) and diag(0,1)", &a, &b);

    let c = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    report("diag(1,0) and e1 e2^T", &a, &c);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (x1, x2) = sampling::flat_pair(&mut rng, 4, 3);
    report("random pair in a shared frame", &x1, &x2);

    let g = sampling::gaussian(&mut rng, 4, 3);
    let x2p = &x2 + &g * (0.05 / g.norm());
    report("same pair, second point perturbed", &x1, &x2p);

    let u = subgeom::polarize(&x1).unwrap();
    println!("\npolarizer of X1 is a polarizer: {}", subgeom::is_polarizer(&x1, &u, 1e-10).unwrap());
    println!("<U, X1> = {:.6}, ||X1||_* = {:.6}", u.dot(&x1), linalg::nuclear_norm(&x1));
}
