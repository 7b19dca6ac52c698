use nucnorm::certify::{self, CertifyConfig, DecidedBy, Verdict};
use nucnorm::linalg::{self, Matrix};
use nucnorm::solver::{self, SolverConfig};
use nucnorm::{sampling, LinearOperatorSpec, ProblemInstance, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tight() -> SolverConfig {
    SolverConfig {
        tol_primal: 1e-11,
        tol_dual: 1e-11,
        max_iter: 50_000,
        ..Default::default()
    }
}

#[test]
fn rank_one_completion_from_twenty_entries() {
    let u = [1.0, -2.0, 0.5, 1.5, -1.0];
    let v = [2.0, 1.0, -1.0, 0.5, 1.0];
    let truth = Matrix::from_fn(5, 5, |i, j| u[i] * v[j]);
    let observed: Vec<(usize, usize)> = (0..5).flat_map(|i| (0..5).map(move |j| (i, j))).filter(|&(i, j)| j != (2 * i + 1) % 5).collect();
    assert_eq!(observed.len(), 20);
    let op = LinearOperatorSpec::entry_mask(5, 5, observed).unwrap();
    let b = op.apply(&truth).unwrap();
    let rep = solver::solve_affine(&op, &b, &tight()).unwrap();
    assert!(rep.converged);
    assert!((&rep.x - &truth).norm() <= 1e-6, "error {}", (&rep.x - &truth).norm());
    let cfg = CertifyConfig {
        rank_tol: 1e-6,
        ..Default::default()
    };
    let cert = certify::certify_uniqueness(&op, &b, &rep.x, &cfg).unwrap();
    assert_eq!(cert.verdict, Verdict::Unique);
    assert_eq!(cert.rank, 1);
}

#[test]
fn full_mask_returns_the_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = sampling::gaussian(&mut rng, 3, 4);
    let op = LinearOperatorSpec::full_mask(3, 4).unwrap();
    let b = op.apply(&x).unwrap();
    let rep = solver::solve_affine(&op, &b, &tight()).unwrap();
    assert!((&rep.x - &x).norm() <= 1e-8);
}

#[test]
fn solver_outputs_certify_as_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (n, p, r) in [(4, 3, 1), (5, 3, 2), (3, 5, 1), (4, 4, 2)] {
        let (tall_n, tall_p) = (n.max(p), n.min(p));
        let (inst, xbar) = sampling::assumption_instance(&mut rng, tall_n, tall_p, r, 2);
        let (op, xbar) = if n < p { (inst.op.transposed().unwrap(), xbar.transpose()) } else { (inst.op.clone(), xbar) };
        let rep = solver::solve_affine(&op, &inst.b, &tight()).unwrap();
        assert!((&rep.x - &xbar).norm() <= 1e-6);
        assert!(solver::dual_certificate_residual(&op, &xbar).unwrap() <= 1e-8);
        let cfg = CertifyConfig {
            rank_tol: 1e-6,
            ..Default::default()
        };
        let cert = certify::certify_uniqueness(&op, &inst.b, &rep.x, &cfg).unwrap();
        assert_eq!(cert.verdict, Verdict::Unique, "{n}x{p}");
        assert_eq!(cert.decided_by, DecidedBy::Assumption);
        assert_eq!(cert.transposed, n < p);
    }
}

#[test]
fn fista_and_admm_agree_for_small_lambda() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (inst, xbar) = sampling::assumption_instance(&mut rng, 4, 3, 1, 1);
    let lambda = 1e-4;
    let cfg = SolverConfig {
        tol_dual: 1e-12,
        max_iter: 200_000,
        ..Default::default()
    };
    let reg = solver::solve_regularized(&inst.op, &inst.b, lambda, &cfg).unwrap();
    assert!((&reg.x - &xbar).norm() <= 1e-2, "{}", (&reg.x - &xbar).norm());
    assert!(reg.objective <= lambda * linalg::nuclear_norm(&xbar) + 1e-12);
}

#[test]
fn non_optimal_point_is_inconclusive() {
    let op = LinearOperatorSpec::trace_functional(2).unwrap();
    let b = Vector::from_element(1, 1.0);
    // feasible but not of minimal nuclear norm
    let x = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -1.0]);
    let rep = certify::certify_uniqueness(&op, &b, &x, &CertifyConfig::default()).unwrap();
    assert_eq!(rep.verdict, Verdict::Inconclusive);
    assert_eq!(rep.decided_by, DecidedBy::OptimalityCheck);
    assert!(rep.optimality_residual > 1e-3);
}

#[test]
fn infeasible_point_is_an_error() {
    let inst = ProblemInstance::counterexample();
    let x = Matrix::identity(2, 2);
    assert!(certify::certify_uniqueness(&inst.op, &inst.b, &x, &CertifyConfig::default()).is_err());
}

#[test]
fn trace_instance_has_a_second_solution() {
    let inst = sampling::trace_instance(3);
    let x = Matrix::from_diagonal(&Vector::from_vec(vec![0.5, 0.5, 0.0]));
    let rep = certify::certify_uniqueness(&inst.op, &inst.b, &x, &CertifyConfig::default()).unwrap();
    assert_eq!(rep.verdict, Verdict::NotUnique);
    let xhat = rep.second_solution.unwrap();
    assert!(certify::verify_second_solution(&inst.op, &inst.b, &x, &xhat).unwrap());
    assert!(linalg::min_eig_sym(&linalg::sym(&xhat)).unwrap() >= -1e-9);
}

#[test]
fn wide_planted_instances_are_certified_in_the_original_orientation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let planted = sampling::planted_nonunique(&mut rng, 5, 3, 1, 2);
        let op = planted.instance.op.transposed().unwrap();
        let xbar = planted.xbar.transpose();
        let rep = certify::certify_uniqueness(&op, &planted.instance.b, &xbar, &CertifyConfig::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::NotUnique);
        assert!(rep.transposed);
        let xhat = rep.second_solution.unwrap();
        assert_eq!(xhat.shape(), (3, 5));
        assert!(certify::verify_second_solution(&op, &planted.instance.b, &xbar, &xhat).unwrap());
    }
}

#[test]
fn regularized_transfer_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let op = LinearOperatorSpec::dense(3, 3, sampling::gaussian(&mut rng, 4, 9)).unwrap();
    let b = sampling::gaussian_vector(&mut rng, 4);
    let mut sols = Vec::new();
    for _ in 0..4 {
        let cfg = SolverConfig {
            start: Some(sampling::gaussian(&mut rng, 3, 3)),
            tol_dual: 1e-12,
            max_iter: 100_000,
            ..Default::default()
        };
        sols.push(solver::solve_regularized(&op, &b, 0.3, &cfg).unwrap().x);
    }
    assert!(solver::transfer_invariants(&sols, &op, 1e-6).unwrap());
}
