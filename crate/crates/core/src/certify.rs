//! Uniqueness certification for `min ||X||_* s.t. A(X) = b` at a feasible
//! point, in tiers:
//!
//! 1. the sufficient conditions `ri subdiff(X) ∩ rge A* != ∅` and
//!    `par subdiff(X) + rge A* = R^{n x p}`;
//! 2. no kernel direction enters `span W(X)`;
//! 3. a search of `ker A ∩ W(X)`, which either produces a verified second
//!    solution or, for kernels of dimension at most one, proves uniqueness.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::operators::LinearOperatorSpec;
use crate::solver::{DualSystem, MinOpNorm};
use crate::subgeom::{self, SubdiffFrame};
use crate::wcone::{self, NonUniquenessCertificate, SearchConfig, SearchOutcome, WConeFrame};

#[derive(Debug, Clone)]
pub struct CertifyConfig {
    /// Feasibility tolerance, relative to `1 + ||b||`.
    pub feas_tol: f64,
    /// Largest optimality residual accepted before any verdict.
    pub opt_tol: f64,
    /// Half-width of the undecided band around `gamma_star = 1`.
    pub margin: f64,
    /// Tolerance for cone memberships.
    pub tol: f64,
    pub rank_tol: f64,
    pub starts: usize,
    pub seed: u64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            opt_tol: 1e-5,
            margin: 1e-6,
            tol: 1e-8,
            rank_tol: linalg::DEFAULT_RANK_TOL,
            starts: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiStatus {
    Holds,
    Fails,
    Boundary,
}

impl RiStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RiStatus::Holds => "holds",
            RiStatus::Fails => "fails",
            RiStatus::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RiCheck {
    pub status: RiStatus,
    /// `min ||R||_op` with `U blockdiag(I_r, R) V^T` in `rge A*`; `None` when
    /// no such `R` exists.
    pub gamma_star: Option<f64>,
    /// The minimizing subgradient `U blockdiag(I_r, R) V^T`.
    pub witness: Option<Matrix>,
    /// Violation of the linear constraints by the witness.
    pub witness_residual: f64,
}

#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub ri: RiCheck,
    pub parallel_span: bool,
    pub parallel_rank: usize,
}

impl AssumptionReport {
    pub fn holds(&self) -> bool {
        self.parallel_span && self.ri.status == RiStatus::Holds
    }
}

/// Whether `par subdiff(X) + rge A*` is the whole space, and its dimension.
pub fn check_parallel_span(op: &LinearOperatorSpec, xbar: &Matrix) -> Result<(bool, usize)> {
    check_parallel_span_with_tol(op, xbar, linalg::DEFAULT_RANK_TOL)
}

pub fn check_parallel_span_with_tol(op: &LinearOperatorSpec, xbar: &Matrix, rank_tol: f64) -> Result<(bool, usize)> {
    check_shape(op, xbar)?;
    let frame = SubdiffFrame::with_rank_tol(xbar, rank_tol)?;
    let mut cols: Vec<Vector> = subgeom::parallel_basis(&frame).iter().map(linalg::vec_rows).collect();
    cols.extend(op.range_adjoint_basis().iter().map(linalg::vec_rows));
    let np = op.n() * op.p();
    if cols.is_empty() {
        return Ok((np == 0, 0));
    }
    let stacked = Matrix::from_columns(&cols);
    let sv = linalg::singular_values(&stacked);
    let rank = linalg::numerical_rank(&sv, 1e-9);
    Ok((rank == np, rank))
}

/// Relative-interior test by minimizing `||R||_op` over the subgradients in
/// `rge A*`.
pub fn check_ri_intersection(op: &LinearOperatorSpec, xbar: &Matrix, cfg: &CertifyConfig) -> Result<RiCheck> {
    check_shape(op, xbar)?;
    let sys = DualSystem::new(op, xbar, cfg.rank_tol)?;
    Ok(ri_from_system(&sys, cfg.margin))
}

fn ri_from_system(sys: &DualSystem, margin: f64) -> RiCheck {
    match sys.min_opnorm() {
        MinOpNorm::Infeasible { residual } => RiCheck {
            status: RiStatus::Fails,
            gamma_star: None,
            witness: None,
            witness_residual: residual,
        },
        MinOpNorm::Feasible { gamma, witness } => {
            let status = if gamma <= 1.0 - margin {
                RiStatus::Holds
            } else if gamma >= 1.0 + margin {
                RiStatus::Fails
            } else {
                RiStatus::Boundary
            };
            RiCheck {
                status,
                gamma_star: Some(gamma),
                witness_residual: sys.residual(&witness),
                witness: Some(sys.frame.subgradient(&witness).expect("block shape")),
            }
        }
    }
}

pub fn check_assumption(op: &LinearOperatorSpec, xbar: &Matrix, cfg: &CertifyConfig) -> Result<AssumptionReport> {
    let (parallel_span, parallel_rank) = check_parallel_span_with_tol(op, xbar, cfg.rank_tol)?;
    Ok(AssumptionReport {
        ri: check_ri_intersection(op, xbar, cfg)?,
        parallel_span,
        parallel_rank,
    })
}

fn check_shape(op: &LinearOperatorSpec, xbar: &Matrix) -> Result<()> {
    if xbar.shape() != (op.n(), op.p()) {
        return Err(Error::Shape(format!(
            "X is {}x{}, operator domain is {}x{}",
            xbar.nrows(),
            xbar.ncols(),
            op.n(),
            op.p()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Unique,
    NotUnique,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Unique => "Unique",
            Verdict::NotUnique => "NotUnique",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecidedBy {
    Assumption,
    SpanW,
    ExhaustiveSearch,
    Certificate,
    /// The search ran out of starts without a decision.
    HeuristicSearch,
    /// The point failed the optimality check.
    OptimalityCheck,
}

impl DecidedBy {
    pub fn as_str(&self) -> &'static str {
        match self {
            DecidedBy::Assumption => "assumption",
            DecidedBy::SpanW => "span_w",
            DecidedBy::ExhaustiveSearch => "exhaustive_search",
            DecidedBy::Certificate => "certificate",
            DecidedBy::HeuristicSearch => "heuristic_search",
            DecidedBy::OptimalityCheck => "optimality_check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchDiagnostics {
    pub starts: usize,
    pub best_violation: f64,
}

#[derive(Debug, Clone)]
pub struct UniquenessReport {
    pub verdict: Verdict,
    pub decided_by: DecidedBy,
    pub assumption: AssumptionReport,
    /// Certificate in the frame of `X` (of `X^T` when `transposed`).
    pub certificate: Option<NonUniquenessCertificate>,
    pub second_solution: Option<Matrix>,
    pub search: Option<SearchDiagnostics>,
    pub feasibility_residual: f64,
    pub optimality_residual: f64,
    pub kernel_dim: usize,
    pub rank: usize,
    /// The problem was certified on its transpose (`n < p`).
    pub transposed: bool,
}

/// Tolerances a second solution must meet before a `NotUnique` verdict.
pub const SECOND_FEAS_TOL: f64 = 1e-8;
pub const SECOND_NORM_TOL: f64 = 1e-7;
pub const SECOND_MIN_DISTANCE: f64 = 1e-6;

/// Whether `xhat` is a verified second solution next to `xbar`.
pub fn verify_second_solution(op: &LinearOperatorSpec, b: &Vector, xbar: &Matrix, xhat: &Matrix) -> Result<bool> {
    let feas = (op.apply(xhat)? - b).norm();
    let gap = (linalg::nuclear_norm(xhat) - linalg::nuclear_norm(xbar)).abs();
    let dist = (xhat - xbar).norm();
    Ok(feas <= SECOND_FEAS_TOL && gap <= SECOND_NORM_TOL && dist >= SECOND_MIN_DISTANCE && subgeom::is_flat_segment(xbar, xhat, SECOND_NORM_TOL)?)
}

pub fn certify_uniqueness(op: &LinearOperatorSpec, b: &Vector, xbar: &Matrix, cfg: &CertifyConfig) -> Result<UniquenessReport> {
    check_shape(op, xbar)?;
    if b.len() != op.m() {
        return Err(Error::Shape(format!("b has length {}, operator codomain is {}", b.len(), op.m())));
    }
    linalg::ensure_finite(xbar, "X")?;
    let feas = (op.apply(xbar)? - b).norm();
    let feas_bound = cfg.feas_tol * (1.0 + b.norm());
    if feas > feas_bound {
        return Err(Error::Infeasible {
            residual: feas,
            tol: feas_bound,
        });
    }
    if op.n() < op.p() {
        let mut rep = certify_tall(&op.transposed()?, b, &xbar.transpose(), cfg, feas)?;
        rep.second_solution = rep.second_solution.map(|x| x.transpose());
        rep.transposed = true;
        return Ok(rep);
    }
    certify_tall(op, b, xbar, cfg, feas)
}

fn certify_tall(op: &LinearOperatorSpec, b: &Vector, xbar: &Matrix, cfg: &CertifyConfig, feas: f64) -> Result<UniquenessReport> {
    let sys = DualSystem::new(op, xbar, cfg.rank_tol)?;
    let (opt_res, dual_block) = sys.optimality_residual();
    let (parallel_span, parallel_rank) = check_parallel_span_with_tol(op, xbar, cfg.rank_tol)?;
    let assumption = AssumptionReport {
        ri: ri_from_system(&sys, cfg.margin),
        parallel_span,
        parallel_rank,
    };
    let kernel_dim = sys.trailing.len();
    let mut report = UniquenessReport {
        verdict: Verdict::Inconclusive,
        decided_by: DecidedBy::OptimalityCheck,
        assumption,
        certificate: None,
        second_solution: None,
        search: None,
        feasibility_residual: feas,
        optimality_residual: opt_res,
        kernel_dim,
        rank: sys.frame.r,
        transposed: false,
    };
    if opt_res > cfg.opt_tol {
        return Ok(report);
    }
    if report.assumption.holds() {
        report.verdict = Verdict::Unique;
        report.decided_by = DecidedBy::Assumption;
        return Ok(report);
    }
    let wf = WConeFrame::with_rank_tol(xbar, cfg.rank_tol)?;
    let kernel = op.kernel_basis();
    if kernel.len() > 1 && wcone::span_w_excludes_kernel(&wf, &kernel) {
        report.verdict = Verdict::Unique;
        report.decided_by = DecidedBy::SpanW;
        return Ok(report);
    }
    let search_cfg = SearchConfig {
        tol: cfg.tol,
        starts: cfg.starts,
        seed: cfg.seed,
        rank_tol: cfg.rank_tol,
        dual_certificate: Some(sys.frame.subgradient(&dual_block)?),
    };
    match wcone::kernel_w_search(op, xbar, &search_cfg)? {
        SearchOutcome::NoneFoundExhaustive { .. } => {
            report.verdict = Verdict::Unique;
            report.decided_by = DecidedBy::ExhaustiveSearch;
        }
        SearchOutcome::NoneFoundHeuristic { starts, best_violation } => {
            report.decided_by = DecidedBy::HeuristicSearch;
            report.search = Some(SearchDiagnostics { starts, best_violation });
        }
        SearchOutcome::FoundNonzero {
            certificate,
            direction,
            residual,
        } => {
            report.search = Some(SearchDiagnostics {
                starts: cfg.starts,
                best_violation: residual,
            });
            match verified_second_solution(op, b, xbar, &certificate, &direction)? {
                Some(xhat) => {
                    report.verdict = Verdict::NotUnique;
                    report.decided_by = DecidedBy::Certificate;
                    report.second_solution = Some(xhat);
                }
                None => report.decided_by = DecidedBy::HeuristicSearch,
            }
            report.certificate = Some(certificate);
        }
    }
    Ok(report)
}

/// The certificate's own second solution, or failing verification a
/// shorter step along the certificate or kernel direction.
fn verified_second_solution(
    op: &LinearOperatorSpec,
    b: &Vector,
    xbar: &Matrix,
    cert: &NonUniquenessCertificate,
    kernel_dir: &Matrix,
) -> Result<Option<Matrix>> {
    let first = wcone::second_solution(xbar, cert)?;
    if verify_second_solution(op, b, xbar, &first)? {
        return Ok(Some(first));
    }
    let step = cert.direction() * cert.eps_hat;
    let reach = step.norm();
    let mut t = 0.5;
    while reach * t >= SECOND_MIN_DISTANCE {
        for cand in [xbar + &step * t, xbar + kernel_dir * (reach * t)] {
            if verify_second_solution(op, b, xbar, &cand)? {
                return Ok(Some(cand));
            }
        }
        t *= 0.5;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{counterexample_point, ProblemInstance};
    use crate::sampling;

    fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn parallel_span_examples() {
        let xbar = counterexample_point();
        let (ok, rank) = check_parallel_span(&LinearOperatorSpec::counterexample(), &xbar).unwrap();
        assert!(ok);
        assert_eq!(rank, 4);
        assert!(check_parallel_span(&LinearOperatorSpec::full_mask(2, 2).unwrap(), &xbar).unwrap().0);
        let trace = sampling::trace_instance(3);
        let (ok, rank) = check_parallel_span(&trace.op, &Matrix::identity(3, 3)).unwrap();
        assert!(!ok);
        assert_eq!(rank, 1);
    }

    #[test]
    fn ri_examples() {
        let cfg = CertifyConfig::default();
        let ri = check_ri_intersection(&LinearOperatorSpec::counterexample(), &counterexample_point(), &cfg).unwrap();
        assert_eq!(ri.status, RiStatus::Boundary);
        assert!((ri.gamma_star.unwrap() - 1.0).abs() <= 1e-6);
        let w = ri.witness.unwrap();
        assert!((&w - m(2, 2, &[1.0, 0.0, 0.0, -1.0])).norm() < 1e-9);

        let full = LinearOperatorSpec::full_mask(2, 2).unwrap();
        let ri = check_ri_intersection(&full, &counterexample_point(), &cfg).unwrap();
        assert_eq!(ri.status, RiStatus::Holds);
        assert!(ri.gamma_star.unwrap() < 1e-12);
        assert!((ri.witness.unwrap() - counterexample_point()).norm() < 1e-12);

        // rge A* = span{I} meets the subdifferential only at I, a boundary point
        let trace = sampling::trace_instance(2);
        let ri = check_ri_intersection(&trace.op, &counterexample_point(), &cfg).unwrap();
        assert_ne!(ri.status, RiStatus::Holds);
        assert!((ri.gamma_star.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ri_infeasible_when_no_subgradient_is_in_range() {
        // A(X) = x_12 at X = diag(1, 0): rge A* = span{e1 e2^T} misses every subgradient
        let op = LinearOperatorSpec::entry_mask(2, 2, vec![(0, 1)]).unwrap();
        let ri = check_ri_intersection(&op, &counterexample_point(), &CertifyConfig::default()).unwrap();
        assert_eq!(ri.status, RiStatus::Fails);
        assert!(ri.gamma_star.is_none());
    }

    #[test]
    fn certify_examples() {
        let cfg = CertifyConfig::default();
        let inst = ProblemInstance::counterexample();
        let rep = certify_uniqueness(&inst.op, &inst.b, &counterexample_point(), &cfg).unwrap();
        assert_eq!(rep.verdict, Verdict::Unique);
        assert_eq!(rep.decided_by, DecidedBy::ExhaustiveSearch);
        assert!(rep.assumption.parallel_span);
        assert_ne!(rep.assumption.ri.status, RiStatus::Holds);

        let trace = sampling::trace_instance(2);
        let rep = certify_uniqueness(&trace.op, &trace.b, &counterexample_point(), &cfg).unwrap();
        assert_eq!(rep.verdict, Verdict::NotUnique);
        let xhat = rep.second_solution.unwrap();
        assert!((linalg::nuclear_norm(&xhat) - 1.0).abs() <= 1e-7);
        assert!((xhat.trace() - 1.0).abs() <= 1e-8);

        let data = m(2, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 3.0]);
        let full = LinearOperatorSpec::full_mask(2, 3).unwrap();
        let b = full.apply(&data).unwrap();
        let rep = certify_uniqueness(&full, &b, &data, &cfg).unwrap();
        assert_eq!(rep.verdict, Verdict::Unique);
        assert_eq!(rep.decided_by, DecidedBy::Assumption);
        assert!(rep.transposed);
    }

    #[test]
    fn certify_rejects_infeasible_and_flags_non_optimal() {
        let cfg = CertifyConfig::default();
        let inst = ProblemInstance::counterexample();
        let bad = m(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        assert!(matches!(certify_uniqueness(&inst.op, &inst.b, &bad, &cfg), Err(Error::Infeasible { .. })));
        // feasible for the trace functional but not of minimal norm
        let trace = sampling::trace_instance(2);
        let x = m(2, 2, &[2.0, 0.0, 0.0, -1.0]);
        let rep = certify_uniqueness(&trace.op, &trace.b, &x, &cfg).unwrap();
        assert_eq!(rep.verdict, Verdict::Inconclusive);
        assert_eq!(rep.decided_by, DecidedBy::OptimalityCheck);
        assert!(rep.optimality_residual > 1e-2);
    }

    #[test]
    fn zero_point_with_zero_data_is_unique() {
        let op = LinearOperatorSpec::entry_mask(2, 2, vec![(0, 0), (1, 1)]).unwrap();
        let rep = certify_uniqueness(&op, &Vector::zeros(2), &Matrix::zeros(2, 2), &CertifyConfig::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Unique);
        assert_eq!(rep.decided_by, DecidedBy::Assumption);
    }

    #[test]
    fn planted_instances_are_not_unique() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for extra in [0, 2] {
            let inst = sampling::planted_nonunique(&mut rng, 4, 3, 1, extra);
            let p = &inst.instance;
            let rep = certify_uniqueness(&p.op, &p.b, &inst.xbar, &CertifyConfig::default()).unwrap();
            assert_eq!(rep.verdict, Verdict::NotUnique, "{rep:?}");
            let xhat = rep.second_solution.unwrap();
            assert!(verify_second_solution(&p.op, &p.b, &inst.xbar, &xhat).unwrap());
        }
    }
}
