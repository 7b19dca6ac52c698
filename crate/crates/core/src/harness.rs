//! Seeded property batteries and the pinned regression run on the built-in
//! 2x2 instance. Both back the `harness` and `counterexample` subcommands.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::certify::{self, CertifyConfig, RiStatus, Verdict};
use crate::linalg::{self, Matrix};
use crate::operators::{counterexample_point, LinearOperatorSpec, ProblemInstance};
use crate::sampling;
use crate::solver::{self, SolverConfig};
use crate::subgeom::{self, SubdiffFrame};
use crate::wcone::{self, SearchConfig, WConeFrame};

#[derive(Debug, Clone, Serialize)]
pub struct BatteryReport {
    pub name: &'static str,
    pub cases: usize,
    pub passed: usize,
    pub failed: usize,
    pub seed: u64,
}

impl BatteryReport {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

type Case = fn(&mut ChaCha8Rng) -> bool;

const BATTERIES: &[(&str, usize, Case)] = &[
    ("adjoint_identity", 200, adjoint_case),
    ("svd_reconstruction", 200, svd_case),
    ("polarizer_equivalence", 200, polarizer_case),
    ("flat_segments", 200, flat_case),
    ("von_neumann", 500, von_neumann_case),
    ("planted_certificates", 20, planted_case),
    ("assumption_soundness", 20, assumption_case),
    ("padding", 10, padding_case),
];

pub fn battery_names() -> Vec<&'static str> {
    BATTERIES.iter().map(|b| b.0).collect()
}

/// Runs every battery; battery `i` uses seed `seed + i`.
pub fn run_batteries(seed: u64) -> Vec<BatteryReport> {
    BATTERIES
        .iter()
        .enumerate()
        .map(|(i, &(name, cases, case))| run_one(name, cases, case, seed.wrapping_add(i as u64)))
        .collect()
}

pub fn run_battery(name: &str, seed: u64) -> Option<BatteryReport> {
    BATTERIES.iter().find(|b| b.0 == name).map(|&(name, cases, case)| run_one(name, cases, case, seed))
}

fn run_one(name: &'static str, cases: usize, case: Case, seed: u64) -> BatteryReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let passed = (0..cases).filter(|_| case(&mut rng)).count();
    BatteryReport {
        name,
        cases,
        passed,
        failed: cases - passed,
        seed,
    }
}

/// A random operator of any kind on `n x p` matrices.
pub fn random_operator<R: Rng + ?Sized>(rng: &mut R, n: usize, p: usize) -> LinearOperatorSpec {
    match rng.random_range(0..4) {
        0 => {
            let m = rng.random_range(1..=n * p);
            LinearOperatorSpec::dense(n, p, sampling::gaussian(rng, m, n * p)).expect("valid")
        }
        1 => {
            let indices = (0..n).flat_map(|i| (0..p).map(move |j| (i, j))).filter(|_| rng.random_bool(0.5)).collect::<Vec<_>>();
            if indices.is_empty() {
                LinearOperatorSpec::full_mask(n, p).expect("valid")
            } else {
                LinearOperatorSpec::entry_mask(n, p, indices).expect("valid")
            }
        }
        2 => {
            let q = rng.random_range(1..=n);
            LinearOperatorSpec::left_mul(p, sampling::gaussian(rng, q, n)).expect("valid")
        }
        _ => {
            let a = LinearOperatorSpec::dense(n, p, sampling::gaussian(rng, 1, n * p)).expect("valid");
            let b = LinearOperatorSpec::full_mask(n, p).expect("valid");
            LinearOperatorSpec::stacked(vec![a, b]).expect("valid")
        }
    }
}

fn shape(rng: &mut ChaCha8Rng, max: usize) -> (usize, usize) {
    (rng.random_range(1..=max), rng.random_range(1..=max))
}

fn adjoint_case(rng: &mut ChaCha8Rng) -> bool {
    let (n, p) = shape(rng, 5);
    let op = random_operator(rng, n, p);
    let x = sampling::gaussian(rng, n, p);
    let y = sampling::gaussian_vector(rng, op.m());
    let lhs = op.apply(&x).unwrap().dot(&y);
    let rhs = x.dot(&op.adjoint(&y).unwrap());
    (lhs - rhs).abs() <= 1e-10 * (1.0 + x.norm() * y.norm() * op.op_norm())
}

fn svd_case(rng: &mut ChaCha8Rng) -> bool {
    let (n, p) = shape(rng, 7);
    let r = rng.random_range(0..=n.min(p));
    let x = sampling::random_low_rank(rng, n, p, r);
    let f = linalg::svd(&x).unwrap();
    f.rank == r
        && (f.reconstruct() - &x).norm() <= 1e-12 * (1.0 + x.norm())
        && linalg::orthonormality_error(&f.u) <= 1e-12
        && linalg::orthonormality_error(&f.v) <= 1e-12
        && f.sigma.windows(2).all(|w| w[0] >= w[1])
}

fn polarizer_case(rng: &mut ChaCha8Rng) -> bool {
    let tol = 1e-8;
    let n = rng.random_range(1..=6);
    let p = rng.random_range(1..=n);
    let r = rng.random_range(0..=p);
    let x = sampling::random_low_rank(rng, n, p, r);
    let frame = SubdiffFrame::new(&x).unwrap();
    let u = if rng.random_bool(0.5) {
        frame.subgradient(&sampling::random_stiefel(rng, n - frame.r, p - frame.r)).unwrap()
    } else {
        sampling::random_stiefel(rng, n, p)
    };
    let a = subgeom::subgrad_check(&frame, &x, &u, tol).unwrap().member;
    let b = (u.dot(&x) - linalg::nuclear_norm(&x)).abs() <= tol;
    let c = subgeom::is_polarizer(&x, &u, tol).unwrap();
    a == b && b == c
}

fn flat_case(rng: &mut ChaCha8Rng) -> bool {
    let tol = 1e-8;
    let n = rng.random_range(1..=6);
    let p = rng.random_range(1..=n);
    let (x1, x2) = sampling::flat_pair(rng, n, p);
    if rng.random_bool(0.5) {
        let common = subgeom::common_polarizer(&x1, &x2, tol).unwrap();
        subgeom::is_flat_segment(&x1, &x2, tol).unwrap()
            && common.is_some_and(|u| subgeom::is_polarizer(&x1, &u, tol).unwrap() && subgeom::is_polarizer(&x2, &u, tol).unwrap())
    } else {
        let g = sampling::gaussian(rng, n, p);
        let x2 = &x2 + &g * (0.1 / g.norm());
        !subgeom::is_flat_segment(&x1, &x2, tol).unwrap()
    }
}

fn von_neumann_case(rng: &mut ChaCha8Rng) -> bool {
    let (n, p) = shape(rng, 8);
    let x = sampling::gaussian(rng, n, p);
    let y = sampling::gaussian(rng, n, p);
    let scale = 1.0 + x.norm() * y.norm();
    let lower = linalg::von_neumann_gap(&x, &y).unwrap() >= -1e-9 * scale;
    let u = sampling::random_orthogonal(rng, n);
    let v = sampling::random_orthogonal(rng, p);
    let mut s: Vec<f64> = (0..n.min(p)).map(|_| rng.random_range(0.0..2.0)).collect();
    let mut t: Vec<f64> = (0..n.min(p)).map(|_| rng.random_range(0.0..2.0)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    t.sort_by(|a, b| b.total_cmp(a));
    let (xs, ys) = (sampling::with_singular_values(&u, &s, &v), sampling::with_singular_values(&u, &t, &v));
    lower && linalg::von_neumann_gap(&xs, &ys).unwrap().abs() <= 1e-8 * (1.0 + xs.norm() * ys.norm())
}

fn planted_case(rng: &mut ChaCha8Rng) -> bool {
    let n = rng.random_range(2..=5);
    let p = rng.random_range(2..=n);
    let r = rng.random_range(1..p);
    let extra = rng.random_range(0..=(n * p - 2).min(4));
    let planted = sampling::planted_nonunique(rng, n, p, r, extra);
    let inst = &planted.instance;
    match certify::certify_uniqueness(&inst.op, &inst.b, &planted.xbar, &CertifyConfig::default()) {
        Ok(rep) => {
            rep.verdict == Verdict::NotUnique
                && rep
                    .second_solution
                    .as_ref()
                    .is_some_and(|x| certify::verify_second_solution(&inst.op, &inst.b, &planted.xbar, x).unwrap_or(false))
        }
        Err(_) => false,
    }
}

fn assumption_case(rng: &mut ChaCha8Rng) -> bool {
    let n = rng.random_range(2..=5);
    let p = rng.random_range(2..=n);
    let r = rng.random_range(1..p);
    let extra = rng.random_range(0..=2);
    let (inst, xbar) = sampling::assumption_instance(rng, n, p, r, extra);
    let holds = certify::check_assumption(&inst.op, &xbar, &CertifyConfig::default()).is_ok_and(|a| a.holds());
    let cfg = SearchConfig {
        starts: 8,
        ..Default::default()
    };
    holds && wcone::kernel_w_search(&inst.op, &xbar, &cfg).is_ok_and(|s| !s.is_found())
}

fn padding_case(rng: &mut ChaCha8Rng) -> bool {
    let n = rng.random_range(3..=5);
    let p = rng.random_range(1..n);
    let r = rng.random_range(1..=p);
    let (inst, _) = sampling::assumption_instance(rng, n, p, r, 2);
    let cfg = SolverConfig {
        max_iter: 50_000,
        tol_primal: 1e-11,
        tol_dual: 1e-11,
        ..Default::default()
    };
    let base = solver::solve_affine(&inst.op, &inst.b, &cfg).unwrap();
    let lifted = solver::solve_affine(&inst.op.lift_padded().unwrap(), &inst.b, &cfg).unwrap();
    (lifted.x.columns(0, p) - &base.x).norm() <= 1e-6 && lifted.x.columns(p, n - p).norm() <= 1e-6
}

/// One pinned value of the built-in instance.
#[derive(Debug, Clone, Serialize)]
pub struct RegressionCheck {
    pub name: &'static str,
    pub expected: String,
    pub observed: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegressionReport {
    pub verdict: &'static str,
    pub decided_by: &'static str,
    pub gamma_star: Option<f64>,
    pub ri_status: &'static str,
    pub parallel_span: bool,
    pub kernel_dim: usize,
    pub solver_error: f64,
    pub checks: Vec<RegressionCheck>,
    pub passed: bool,
}

/// Solves the built-in instance, certifies `diag(1, 0)` and compares every
/// pinned value: the verdict, `gamma_star = 1` on the boundary, the parallel
/// span, the kernel direction and the rejection of both `R = 1` and `R = -1`.
pub fn counterexample_regression() -> crate::Result<RegressionReport> {
    let inst = ProblemInstance::counterexample();
    let xbar = counterexample_point();
    let solved = solver::solve_affine(
        &inst.op,
        &inst.b,
        &SolverConfig {
            tol_primal: 1e-12,
            tol_dual: 1e-12,
            max_iter: 20_000,
            ..Default::default()
        },
    )?;
    let solver_error = (&solved.x - &xbar).norm();
    let rep = certify::certify_uniqueness(&inst.op, &inst.b, &xbar, &CertifyConfig::default())?;
    let gamma = rep.assumption.ri.gamma_star;
    let kernel = inst.op.kernel_basis();
    let target = Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]) / 2.0;
    let kernel_err = match kernel.as_slice() {
        [k] => (k - &target).norm().min((k + &target).norm()),
        _ => f64::INFINITY,
    };
    let wf = WConeFrame::new(&xbar)?;
    let mut rejected = Vec::new();
    for s in [1.0, -1.0] {
        let member = wcone::w_membership_with_block(&wf, &target, &Matrix::from_element(1, 1, s), 1e-8)?;
        rejected.push(member.is_none());
    }
    let check = |name, expected: &str, observed: String, passed| RegressionCheck {
        name,
        expected: expected.to_string(),
        observed,
        passed,
    };
    let checks = vec![
        check("solver_recovers_point", "||X - diag(1,0)|| <= 1e-6", format!("{solver_error:.3e}"), solver_error <= 1e-6),
        check("verdict", "Unique", rep.verdict.as_str().to_string(), rep.verdict == Verdict::Unique),
        check(
            "gamma_star",
            "1 +- 1e-6",
            format!("{gamma:?}"),
            gamma.is_some_and(|g| (g - 1.0).abs() <= 1e-6),
        ),
        check(
            "ri_condition_fails",
            "boundary",
            rep.assumption.ri.status.as_str().to_string(),
            rep.assumption.ri.status == RiStatus::Boundary,
        ),
        check("parallel_span", "true", rep.assumption.parallel_span.to_string(), rep.assumption.parallel_span),
        check("kernel_direction", "[[1,-1],[-1,1]] / 2 within 1e-9", format!("{kernel_err:.3e}"), kernel_err <= 1e-9),
        check("w_rejects_r_plus_one", "not a member", format!("rejected={}", rejected[0]), rejected[0]),
        check("w_rejects_r_minus_one", "not a member", format!("rejected={}", rejected[1]), rejected[1]),
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(RegressionReport {
        verdict: rep.verdict.as_str(),
        decided_by: rep.decided_by.as_str(),
        gamma_star: gamma,
        ri_status: rep.assumption.ri.status.as_str(),
        parallel_span: rep.assumption.parallel_span,
        kernel_dim: rep.kernel_dim,
        solver_error,
        checks,
        passed,
    })
}
