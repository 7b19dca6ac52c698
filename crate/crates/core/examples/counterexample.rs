//! The built-in 2x2 instance: the solution diag(1, 0) is unique, yet the
//! relative-interior condition fails there, so only the cone test decides.

use nucnorm::certify::{self, CertifyConfig};
use nucnorm::harness;
use nucnorm::operators::{counterexample_point, ProblemInstance};
use nucnorm::wcone::{self, WConeFrame};
use nucnorm::Matrix;

fn main() {
    let inst = ProblemInstance::counterexample();
    let xbar = counterexample_point();
    println!("b = {:?}", inst.b.as_slice());

    let rep = certify::certify_uniqueness(&inst.op, &inst.b, &xbar, &CertifyConfig::default()).unwrap();
    println!("verdict {} (decided by {})", rep.verdict.as_str(), rep.decided_by.as_str());
    println!("gamma_star {:?}, ri status {}", rep.assumption.ri.gamma_star, rep.assumption.ri.status.as_str());
    println!("parallel span {} (rank {})", rep.assumption.parallel_span, rep.assumption.parallel_rank);

    let kernel = inst.op.kernel_basis();
    println!("\nkernel dimension {}: {:.4}", kernel.len(), kernel[0]);
    let wf = WConeFrame::new(&xbar).unwrap();
    for s in [1.0, -1.0] {
        let r = Matrix::from_element(1, 1, s);
        let m = wf.m_for_block(&kernel[0], &r).unwrap();
        let member = wcone::w_membership_with_block(&wf, &kernel[0], &r, 1e-8).unwrap();
        println!("R = {s:+}: M = {m:.4}  member {}", member.is_some());
    }

    let reg = harness::counterexample_regression().unwrap();
    println!("\npinned checks:");
    for c in &reg.checks {
        println!("  [{}] {} = {} (expected {})", if c.passed { "ok" } else { "DRIFT" }, c.name, c.observed, c.expected);
    }
}
