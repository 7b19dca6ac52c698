//! A problem with a planted flat of solutions: certification finds a
//! direction in ker A ∩ W(X), builds a second solution and the certificate
//! can be recovered from the two solutions alone.

use nucnorm::certify::{self, CertifyConfig};
use nucnorm::linalg;
use nucnorm::{sampling, wcone};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let planted = sampling::planted_nonunique(&mut rng, 4, 3, 1, 2);
    let inst = &planted.instance;
    println!("4x3 problem, {} measurements, kernel dimension {}", inst.op.m(), inst.op.kernel_basis().len());

    let rep = certify::certify_uniqueness(&inst.op, &inst.b, &planted.xbar, &CertifyConfig::default()).unwrap();
    println!("verdict {} (decided by {})", rep.verdict.as_str(), rep.decided_by.as_str());
    let cert = rep.certificate.as_ref().unwrap();
    let xhat = rep.second_solution.as_ref().unwrap();
    println!("certificate eps_hat {:.4}, M = {:.4}", cert.eps_hat, cert.m);

    println!("||X||_* = {:.10}", linalg::nuclear_norm(&planted.xbar));
    println!("||X'||_* = {:.10}", linalg::nuclear_norm(xhat));
    println!("||A(X') - b|| = {:.2e}", (inst.op.apply(xhat).unwrap() - &inst.b).norm());
    println!("||X' - X||_F = {:.4}", (xhat - &planted.xbar).norm());

    let back = wcone::extract_certificate(&planted.xbar, xhat, 1e-8).unwrap();
    back.validate().unwrap();
    let d1 = xhat - &planted.xbar;
    let d2 = back.direction();
    println!("\nrecovered direction, cosine with X' - X: {:.12}", d1.dot(&d2) / (d1.norm() * d2.norm()));
}
