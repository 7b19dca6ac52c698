//! Solvers for `min ||X||_* s.t. A(X) = b` (ADMM with exact affine
//! projections) and `1/2 ||A(X) - b||^2 + lambda ||X||_*` (accelerated
//! proximal gradient), plus the optimality residual of a candidate point.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::operators::LinearOperatorSpec;
use crate::subgeom::SubdiffFrame;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub max_iter: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    /// ADMM penalty, rescaled by the operator norm; unused by the
    /// regularized solver.
    pub rho: f64,
    pub seed: u64,
    pub start: Option<Matrix>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            tol_primal: 1e-8,
            tol_dual: 1e-8,
            rho: 1.0,
            seed: 0,
            start: None,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || !(self.tol_primal > 0.0) || !(self.tol_dual > 0.0) || !(self.rho > 0.0) {
            return Err(Error::InvalidArgument(
                "solver needs max_iter >= 1 and positive tolerances and penalty".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Matrix,
    pub nuclear_norm: f64,
    pub primal_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `||X||_*` in affine mode, the penalized objective in regularized mode.
    pub objective: f64,
}

/// Singular value soft-thresholding, the proximal map of `tau ||.||_*`.
pub fn prox_nuclear(x: &Matrix, tau: f64) -> Result<Matrix> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be nonnegative, got {tau}")));
    }
    if tau == 0.0 {
        return Ok(x.clone());
    }
    let f = linalg::svd(x)?;
    let shrunk: Vec<f64> = f.sigma.iter().map(|s| (s - tau).max(0.0)).collect();
    let mut d = Matrix::zeros(x.nrows(), x.ncols());
    for (i, &s) in shrunk.iter().enumerate() {
        d[(i, i)] = s;
    }
    Ok(&f.u * d * f.v.transpose())
}

fn check_instance(op: &LinearOperatorSpec, b: &Vector, start: Option<&Matrix>) -> Result<()> {
    if b.len() != op.m() {
        return Err(Error::Shape(format!("b has length {}, operator codomain is {}", b.len(), op.m())));
    }
    if let Some(x) = start {
        if x.shape() != (op.n(), op.p()) {
            return Err(Error::Shape("start does not match the operator domain".into()));
        }
    }
    Ok(())
}

/// Exact projection onto `{X : A(X) = b}` through the pseudo-inverse of the
/// matricized operator.
struct AffineProjector {
    amat: Matrix,
    pinv: Matrix,
    n: usize,
    p: usize,
}

impl AffineProjector {
    fn new(op: &LinearOperatorSpec) -> Self {
        let amat = op.matricize();
        let f = linalg::svd(&amat).expect("finite operator");
        let smax = f.sigma.first().copied().unwrap_or(0.0);
        let (m, np) = amat.shape();
        let mut pinv = Matrix::zeros(np, m);
        for (j, &s) in f.sigma.iter().enumerate() {
            if s > crate::operators::OPERATOR_RANK_CUTOFF * smax {
                pinv += f.v.column(j) * f.u.column(j).transpose() / s;
            }
        }
        Self {
            amat,
            pinv,
            n: op.n(),
            p: op.p(),
        }
    }

    fn project(&self, x: &Matrix, b: &Vector) -> Matrix {
        let v = linalg::vec_rows(x);
        let corr = &self.pinv * (&self.amat * &v - b);
        linalg::unvec_rows(&(v - corr), self.n, self.p)
    }

    fn residual(&self, x: &Matrix, b: &Vector) -> f64 {
        (&self.amat * linalg::vec_rows(x) - b).norm()
    }
}

/// ADMM on `min ||Z||_*  s.t. X = Z, A(X) = b` with residual balancing.
///
/// The reported point is the final nuclear-norm iterate projected back onto
/// the affine constraint.
pub fn solve_affine(op: &LinearOperatorSpec, b: &Vector, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    check_instance(op, b, cfg.start.as_ref())?;
    let proj = AffineProjector::new(op);
    let (n, p) = (op.n(), op.p());
    let x0 = proj.project(&Matrix::zeros(n, p), b);
    let scale = linalg::op_norm(&x0).max(1e-12);
    let mut rho = cfg.rho / scale;
    let mut z = cfg.start.clone().unwrap_or_else(|| x0.clone());
    let mut u = Matrix::zeros(n, p);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=cfg.max_iter {
        iterations = it;
        let x = proj.project(&(&z - &u), b);
        let z_prev = z.clone();
        z = prox_nuclear(&(&x + &u), 1.0 / rho)?;
        u += &x - &z;
        let r = (&x - &z).norm();
        let s = rho * (&z - &z_prev).norm();
        let zn = z.norm().max(1.0);
        if r <= cfg.tol_primal * zn && s <= cfg.tol_dual * (rho * u.norm()).max(1.0) {
            converged = true;
            break;
        }
        if r > 10.0 * s {
            rho *= 2.0;
            u /= 2.0;
        } else if s > 10.0 * r {
            rho /= 2.0;
            u *= 2.0;
        }
    }
    let x = proj.project(&z, b);
    let nuc = linalg::nuclear_norm(&x);
    Ok(SolveReport {
        primal_residual: proj.residual(&x, b),
        nuclear_norm: nuc,
        objective: nuc,
        x,
        iterations,
        converged,
    })
}

/// FISTA with backtracking and gradient-based adaptive restart on
/// `1/2 ||A(X) - b||^2 + lambda ||X||_*`. Stops when the scaled
/// proximal-gradient step is below `tol_dual`.
pub fn solve_regularized(op: &LinearOperatorSpec, b: &Vector, lambda: f64, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    check_instance(op, b, cfg.start.as_ref())?;
    let amat = op.matricize();
    let (n, p) = (op.n(), op.p());
    let smooth = |x: &Matrix| -> (f64, Matrix) {
        let r = &amat * linalg::vec_rows(x) - b;
        let g = linalg::unvec_rows(&(amat.transpose() * &r), n, p);
        (0.5 * r.norm_squared(), g)
    };
    let mut x = cfg.start.clone().unwrap_or_else(|| Matrix::zeros(n, p));
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut lip = (linalg::op_norm(&amat).powi(2) * 1e-3).max(1e-12);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=cfg.max_iter {
        iterations = it;
        let (fy, gy) = smooth(&y);
        let mut x_new;
        loop {
            x_new = prox_nuclear(&(&y - &gy / lip), lambda / lip)?;
            let d = &x_new - &y;
            let (fx, _) = smooth(&x_new);
            if fx <= fy + gy.dot(&d) + 0.5 * lip * d.norm_squared() + 1e-15 * fy.abs().max(1.0) {
                break;
            }
            lip *= 2.0;
        }
        let step = lip * (&x_new - &y).norm();
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        // restart momentum when it points uphill
        if (&y - &x_new).dot(&(&x_new - &x)) > 0.0 {
            y = x_new.clone();
            t = 1.0;
        } else {
            y = &x_new + (&x_new - &x) * ((t - 1.0) / t_new);
            t = t_new;
        }
        x = x_new;
        if step <= cfg.tol_dual {
            converged = true;
            break;
        }
    }
    let r = &amat * linalg::vec_rows(&x) - b;
    let nuc = linalg::nuclear_norm(&x);
    Ok(SolveReport {
        primal_residual: r.norm(),
        nuclear_norm: nuc,
        objective: 0.5 * r.norm_squared() + lambda * nuc,
        x,
        iterations,
        converged,
    })
}

/// `max_{i,j} ||A(X_i) - A(X_j)||` and `max |‖X_i‖_* - ‖X_j‖_*|` are both within `tol`.
pub fn transfer_invariants(solutions: &[Matrix], op: &LinearOperatorSpec, tol: f64) -> Result<bool> {
    if solutions.is_empty() {
        return Err(Error::InvalidArgument("transfer_invariants needs at least one solution".into()));
    }
    let images = solutions.iter().map(|x| op.apply(x)).collect::<Result<Vec<_>>>()?;
    let norms: Vec<f64> = solutions.iter().map(linalg::nuclear_norm).collect();
    for i in 0..solutions.len() {
        for j in (i + 1)..solutions.len() {
            if (&images[i] - &images[j]).norm() > tol || (norms[i] - norms[j]).abs() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Result of minimizing `||F||_op` over an affine set of matrices.
#[derive(Debug, Clone)]
pub enum MinOpNorm {
    /// The constraints are inconsistent.
    Infeasible { residual: f64 },
    Feasible { gamma: f64, witness: Matrix },
}

const POLISH_TOL: f64 = 1e-9;
const BARRIER_GAP: f64 = 1e-10;

/// `min ||F||_op  s.t.  <C_k, F> = c_k` over `rows x cols` matrices.
///
/// Log-barrier method on `[[t I, F], [F^T, t I]] >= 0` over the affine set,
/// parametrized by its null-space directions.
pub fn min_opnorm_affine(constraints: &[Matrix], rhs: &Vector, rows: usize, cols: usize) -> MinOpNorm {
    let q = rows * cols;
    if q == 0 || constraints.is_empty() {
        let residual = rhs.norm();
        if residual <= 1e-10 {
            return MinOpNorm::Feasible {
                gamma: 0.0,
                witness: Matrix::zeros(rows, cols),
            };
        }
        return MinOpNorm::Infeasible { residual };
    }
    let mut l = Matrix::zeros(constraints.len(), q);
    for (k, c) in constraints.iter().enumerate() {
        l.set_row(k, &linalg::vec_rows(c).transpose());
    }
    let (row_space, null) = linalg::row_and_null_space(&l, 1e-10);
    // minimum-norm solution inside the row space
    let lr = &l * &row_space;
    let coef = lr.clone().svd(true, true).solve(rhs, 1e-14).expect("svd solve");
    let f0 = &row_space * coef;
    let residual = (&l * &f0 - rhs).norm();
    if residual > 1e-9 * (1.0 + rhs.norm()) {
        return MinOpNorm::Infeasible { residual };
    }
    let f0 = linalg::unvec_rows(&f0, rows, cols);
    let dirs: Vec<Matrix> = null.column_iter().map(|c| linalg::unvec_rows(&c.into_owned(), rows, cols)).collect();
    let witness = if dirs.is_empty() { f0 } else { barrier_min_opnorm(&f0, &dirs) };
    MinOpNorm::Feasible {
        gamma: linalg::op_norm(&witness),
        witness,
    }
}

fn lmi(t: f64, f: &Matrix) -> Matrix {
    let (a, b) = f.shape();
    let mut s = Matrix::identity(a + b, a + b) * t;
    s.view_mut((0, a), (a, b)).copy_from(f);
    s.view_mut((a, 0), (b, a)).copy_from(&f.transpose());
    s
}

fn barrier_min_opnorm(f0: &Matrix, dirs: &[Matrix]) -> Matrix {
    let (a, b) = f0.shape();
    let dim = a + b;
    let nv = dirs.len() + 1;
    let coeffs: Vec<Matrix> = std::iter::once(Matrix::identity(dim, dim)).chain(dirs.iter().map(|d| lmi(0.0, d))).collect();
    let point = |x: &Vector| -> (f64, Matrix) {
        let mut fm = f0.clone();
        for (d, &c) in dirs.iter().zip(x.iter().skip(1)) {
            fm += d * c;
        }
        (x[0], fm)
    };
    let phi = |x: &Vector, weight: f64| -> Option<f64> {
        let (t, fm) = point(x);
        let chol = lmi(t, &fm).cholesky()?;
        let logdet: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        Some(weight * t - logdet)
    };
    let mut x = Vector::zeros(nv);
    x[0] = 1.5 * linalg::op_norm(f0) + 1.0;
    let mut weight = 1.0;
    loop {
        for _ in 0..100 {
            let (t, fm) = point(&x);
            let Some(chol) = lmi(t, &fm).cholesky() else { break };
            let sinv = chol.inverse();
            let k: Vec<Matrix> = coeffs.iter().map(|c| &sinv * c).collect();
            let mut grad = Vector::from_iterator(nv, k.iter().map(|m| -m.trace()));
            grad[0] += weight;
            let hess = Matrix::from_fn(nv, nv, |i, j| k[i].component_mul(&k[j].transpose()).sum());
            let Some(step) = hess.cholesky().map(|c| c.solve(&grad)) else { break };
            let decrement = grad.dot(&step);
            if decrement <= 1e-14 {
                break;
            }
            let current = phi(&x, weight).unwrap_or(f64::INFINITY);
            let mut tau = 1.0;
            let mut moved = false;
            for _ in 0..40 {
                let cand = &x - &step * tau;
                if let Some(v) = phi(&cand, weight) {
                    if v <= current - 0.25 * tau * decrement {
                        x = cand;
                        moved = true;
                        break;
                    }
                }
                tau *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if dim as f64 / weight <= BARRIER_GAP * (1.0 + x[0].abs()) {
            break;
        }
        weight *= 10.0;
    }
    point(&x).1
}

// Damped Gauss-Newton on `Z_a^T (F^T F - I) Z_a = 0` over `F + span(dirs)`,
// where `Z_a` spans the top `active` right singular vectors of the iterate.
fn polish_active(f: &Matrix, dirs: &[Matrix], active: usize) -> Option<Matrix> {
    let pairs: Vec<(usize, usize)> = (0..active).flat_map(|i| (i..active).map(move |j| (i, j))).collect();
    let state = |f: &Matrix| -> Option<(Matrix, Matrix, Vector)> {
        let svd = linalg::svd(f).ok()?;
        let za = svd.v.columns(0, active).into_owned();
        let fz = f * &za;
        let gram = fz.transpose() * &fz;
        let res = Vector::from_iterator(pairs.len(), pairs.iter().map(|&(i, j)| gram[(i, j)] - if i == j { 1.0 } else { 0.0 }));
        Some((za, fz, res))
    };
    let mut f = f.clone();
    let (mut za, mut fz, mut res) = state(&f)?;
    for _ in 0..100 {
        if res.norm() <= 1e-15 || dirs.is_empty() {
            break;
        }
        let mut jac = Matrix::zeros(pairs.len(), dirs.len());
        for (k, d) in dirs.iter().enumerate() {
            let dz = d * &za;
            let dg = dz.transpose() * &fz + fz.transpose() * &dz;
            for (row, &(i, j)) in pairs.iter().enumerate() {
                jac[(row, k)] = dg[(i, j)];
            }
        }
        let step = jac.svd(true, true).solve(&res, 1e-12).ok()?;
        let mut delta = Matrix::zeros(f.nrows(), f.ncols());
        for (d, &c) in dirs.iter().zip(step.iter()) {
            delta += d * c;
        }
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            let cand = &f - &delta * t;
            if let Some((za2, fz2, res2)) = state(&cand) {
                if res2.norm() < res.norm() {
                    (f, za, fz, res) = (cand, za2, fz2, res2);
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (res.norm() <= POLISH_TOL).then_some(f)
}

/// `U diag(min(sigma, gamma)) V^T`.
pub fn clip_singular_values(x: &Matrix, gamma: f64) -> Matrix {
    let f = linalg::svd(x).expect("finite");
    let mut d = Matrix::zeros(x.nrows(), x.ncols());
    for (i, &s) in f.sigma.iter().enumerate() {
        d[(i, i)] = s.min(gamma);
    }
    &f.u * d * f.v.transpose()
}

/// The affine data of `subdiff ||.||_*(X) ∩ rge A*` in the frame of `X`: a
/// subgradient `U blockdiag(I_r, F) V^T` lies in `rge A*` iff
/// `<E_k, F> = -tr A_k` for each kernel basis element, where `A_k` and `E_k`
/// are its leading and trailing frame blocks.
#[derive(Debug, Clone)]
pub struct DualSystem {
    pub frame: SubdiffFrame,
    pub trailing: Vec<Matrix>,
    pub rhs: Vector,
}

impl DualSystem {
    pub fn new(op: &LinearOperatorSpec, x: &Matrix, rank_tol: f64) -> Result<Self> {
        if x.shape() != (op.n(), op.p()) {
            return Err(Error::Shape("X does not match the operator domain".into()));
        }
        let frame = SubdiffFrame::with_rank_tol(x, rank_tol)?;
        let kernel = op.kernel_basis();
        let (n, p, r) = (frame.n(), frame.p(), frame.r);
        let mut trailing = Vec::with_capacity(kernel.len());
        let mut rhs = Vector::zeros(kernel.len());
        for (k, kk) in kernel.iter().enumerate() {
            let t = frame.to_frame(kk);
            rhs[k] = -t.view((0, 0), (r, r)).trace();
            trailing.push(t.view((r, r), (n - r, p - r)).into_owned());
        }
        Ok(Self { frame, trailing, rhs })
    }

    pub fn block_shape(&self) -> (usize, usize) {
        (self.frame.n() - self.frame.r, self.frame.p() - self.frame.r)
    }

    pub fn min_opnorm(&self) -> MinOpNorm {
        let (a, b) = self.block_shape();
        min_opnorm_affine(&self.trailing, &self.rhs, a, b)
    }

    /// Newton correction of an approximate minimizer onto an exact point of
    /// norm at most one: the singular values near one are driven to one along
    /// the affine set, trying a few thresholds for which values count as active.
    pub fn polish(&self, f: &Matrix) -> Option<Matrix> {
        let (a, b) = self.block_shape();
        let mut l = Matrix::zeros(self.trailing.len(), a * b);
        for (k, e) in self.trailing.iter().enumerate() {
            l.set_row(k, &linalg::vec_rows(e).transpose());
        }
        let (_, null) = linalg::row_and_null_space(&l, 1e-10);
        let dirs: Vec<Matrix> = null.column_iter().map(|c| linalg::unvec_rows(&c.into_owned(), a, b)).collect();
        let fv = linalg::vec_rows(f);
        let fix = l.clone().svd(true, true).solve(&(&l * &fv - &self.rhs), 1e-10).ok()?;
        let f = linalg::unvec_rows(&(fv - fix), a, b);
        let sv = linalg::singular_values(&f);
        for delta in [1e-1, 1e-2, 1e-3, 1e-4] {
            let active = sv.iter().filter(|&&s| s > 1.0 - delta).count();
            if active == 0 {
                continue;
            }
            if let Some(g) = polish_active(&f, &dirs, active) {
                let g = clip_singular_values(&g, 1.0);
                if self.residual(&g) <= POLISH_TOL * (1.0 + self.rhs.norm()) {
                    return Some(g);
                }
            }
        }
        None
    }

    /// `||L(F) - rhs||` for a trailing block `F`.
    pub fn residual(&self, f: &Matrix) -> f64 {
        let v = Vector::from_iterator(self.trailing.len(), self.trailing.iter().map(|e| e.dot(f)));
        (v - &self.rhs).norm()
    }
}

/// Distance from 0 to `subdiff ||.||_*(X) + rge A*`; zero certifies that `X`
/// solves the affine problem with `b = A(X)`.
pub fn dual_certificate_residual(op: &LinearOperatorSpec, x: &Matrix) -> Result<f64> {
    dual_certificate_residual_with_tol(op, x, linalg::DEFAULT_RANK_TOL)
}

pub fn dual_certificate_residual_with_tol(op: &LinearOperatorSpec, x: &Matrix, rank_tol: f64) -> Result<f64> {
    if x.nrows() < x.ncols() {
        return dual_certificate_residual_with_tol(&op.transposed()?, &x.transpose(), rank_tol);
    }
    let sys = DualSystem::new(op, x, rank_tol)?;
    Ok(sys.optimality_residual().0)
}

impl DualSystem {
    /// `(min_{||F||_op <= 1} ||L(F) - rhs||, minimizer)`.
    pub fn optimality_residual(&self) -> (f64, Matrix) {
        let (a, b) = self.block_shape();
        if self.trailing.is_empty() {
            return (0.0, Matrix::zeros(a, b));
        }
        if a * b == 0 {
            return (self.rhs.norm(), Matrix::zeros(a, b));
        }
        let mut start = Matrix::zeros(a, b);
        if let MinOpNorm::Feasible { witness, .. } = self.min_opnorm() {
            let clipped = clip_singular_values(&witness, 1.0);
            let res = self.residual(&clipped);
            if res <= 1e-12 {
                return (res, clipped);
            }
            if let Some(f) = self.polish(&witness) {
                return (self.residual(&f), f);
            }
            start = clipped;
        }
        // projected gradient with momentum on 1/2 ||L F - rhs||^2
        let lip = self.trailing.iter().map(|e| e.norm_squared()).sum::<f64>().max(1e-12);
        let grad = |f: &Matrix| -> Matrix {
            let mut g = Matrix::zeros(a, b);
            for (e, c) in self.trailing.iter().zip(self.rhs.iter()) {
                g += e * (e.dot(f) - c);
            }
            g
        };
        let mut f = start.clone();
        let mut y = start;
        let mut t = 1.0_f64;
        let mut best = (self.residual(&f), f.clone());
        for _ in 0..5000 {
            let next = clip_singular_values(&(&y - grad(&y) / lip), 1.0);
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &next + (&next - &f) * ((t - 1.0) / t_new);
            t = t_new;
            let moved = (&next - &f).norm();
            f = next;
            let res = self.residual(&f);
            if res < best.0 {
                best = (res, f.clone());
            }
            if moved <= 1e-14 {
                break;
            }
        }
        if best.0 > 1e-12 {
            if let Some(f) = self.polish(&best.1) {
                return (self.residual(&f), f);
            }
        }
        best
    }
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
    fn prox_examples() {
        let x = m(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        assert!((prox_nuclear(&x, 1.0).unwrap() - m(2, 2, &[2.0, 0.0, 0.0, 0.0])).norm() < 1e-12);
        assert_eq!(prox_nuclear(&x, 0.0).unwrap(), x);
        assert_eq!(prox_nuclear(&Matrix::zeros(2, 3), 0.5).unwrap(), Matrix::zeros(2, 3));
        assert!(prox_nuclear(&x, -1.0).is_err());
    }

    #[test]
    fn affine_solver_recovers_counterexample_point() {
        let inst = ProblemInstance::counterexample();
        let rep = solve_affine(&inst.op, &inst.b, &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        assert!((rep.nuclear_norm - 1.0).abs() <= 1e-6);
        assert!((&rep.x - counterexample_point()).norm() <= 1e-6);
    }

    #[test]
    fn affine_solver_full_mask_returns_data() {
        let data = m(2, 3, &[1.0, -2.0, 0.5, 3.0, 0.0, 1.0]);
        let op = LinearOperatorSpec::full_mask(2, 3).unwrap();
        let b = op.apply(&data).unwrap();
        let rep = solve_affine(&op, &b, &SolverConfig::default()).unwrap();
        assert!((&rep.x - &data).norm() < 1e-10);
        assert!(rep.primal_residual < 1e-10);
    }

    #[test]
    fn regularized_examples() {
        let op = LinearOperatorSpec::full_mask(2, 2).unwrap();
        let b = linalg::vec_rows(&m(2, 2, &[3.0, 0.0, 0.0, 1.0]));
        let rep = solve_regularized(&op, &b, 1.0, &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        assert!((&rep.x - m(2, 2, &[2.0, 0.0, 0.0, 0.0])).norm() < 1e-7);
        let big = linalg::op_norm(&op.adjoint(&b).unwrap()) * 1.01;
        let rep = solve_regularized(&op, &b, big, &SolverConfig::default()).unwrap();
        assert!(rep.x.norm() < 1e-9);
        assert!(solve_regularized(&op, &b, 0.0, &SolverConfig::default()).is_err());
    }

    #[test]
    fn small_lambda_approaches_affine_solution() {
        let inst = ProblemInstance::counterexample();
        let cfg = SolverConfig {
            max_iter: 20000,
            tol_dual: 1e-10,
            ..Default::default()
        };
        let rep = solve_regularized(&inst.op, &inst.b, 1e-6, &cfg).unwrap();
        assert!((rep.nuclear_norm - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn dual_residual_examples() {
        let op = LinearOperatorSpec::counterexample();
        assert!(dual_certificate_residual(&op, &counterexample_point()).unwrap() <= 1e-8);
        let full = LinearOperatorSpec::full_mask(2, 2).unwrap();
        assert_eq!(dual_certificate_residual(&full, &m(2, 2, &[1.0, 2.0, 3.0, 4.0])).unwrap(), 0.0);
        let off = m(2, 2, &[1.0, 0.0, 0.0, 0.5]);
        assert!(dual_certificate_residual(&op, &off).unwrap() > 1e-2);
    }

    #[test]
    fn transfer_examples() {
        let trace = sampling::trace_instance(2);
        let a = m(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let b = m(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert!(transfer_invariants(&[a.clone()], &trace.op, 1e-12).unwrap());
        assert!(transfer_invariants(&[a.clone(), b], &trace.op, 1e-12).unwrap());
        assert!(!transfer_invariants(&[a.clone(), &a * 2.0], &trace.op, 1e-12).unwrap());
        assert!(transfer_invariants(&[], &trace.op, 1e-12).is_err());
    }

    #[test]
    fn min_opnorm_on_counterexample_is_one() {
        let sys = DualSystem::new(&LinearOperatorSpec::counterexample(), &counterexample_point(), 1e-9).unwrap();
        match sys.min_opnorm() {
            MinOpNorm::Feasible { gamma, witness } => {
                assert!((gamma - 1.0).abs() < 1e-12);
                assert!((witness[(0, 0)] + 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }
}
