//! Dense kernels: one-sided Jacobi SVD, norms, symmetric eigenvalue checks,
//! the von Neumann trace gap and square padding.
//!
//! Every routine is a pure function of its inputs. Matrices are
//! `nalgebra::DMatrix<f64>`; "vectorized" always means row-major order.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative cutoff (against `sigma[0]`) used to infer numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

const MAX_SWEEPS: usize = 80;

pub(crate) fn ensure_finite(x: &Matrix, what: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn ensure_same_shape(x: &Matrix, y: &Matrix) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(Error::Shape(format!(
            "{}x{} vs {}x{}",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    Ok(())
}

/// Full singular value decomposition `X = U diag(sigma) V^T`.
///
/// `u` is `n x n`, `v` is `p x p`, `sigma` has length `min(n, p)` and is
/// nonincreasing. Each left singular vector has a nonnegative first
/// nonzero component.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
    pub rank: usize,
    pub rank_tol: f64,
}

impl SvdFactors {
    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    /// `diag(sigma)` as an `n x p` matrix.
    pub fn sigma_matrix(&self) -> Matrix {
        let mut s = Matrix::zeros(self.nrows(), self.ncols());
        for (i, &v) in self.sigma.iter().enumerate() {
            s[(i, i)] = v;
        }
        s
    }

    /// Singular values zero-padded (or truncated) to `len`.
    pub fn sigma_padded(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (o, s) in out.iter_mut().zip(&self.sigma) {
            *o = *s;
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        &self.u * self.sigma_matrix() * self.v.transpose()
    }
}

pub fn svd(x: &Matrix) -> Result<SvdFactors> {
    svd_with_tol(x, DEFAULT_RANK_TOL)
}

/// SVD with an explicit relative rank tolerance. Wide inputs are handled by
/// factoring the transpose and swapping the frames.
pub fn svd_with_tol(x: &Matrix, rank_tol: f64) -> Result<SvdFactors> {
    ensure_finite(x, "svd input")?;
    if !(rank_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("rank_tol must be positive, got {rank_tol}")));
    }
    let (u, sigma, v) = if x.nrows() >= x.ncols() {
        jacobi_svd_tall(x)
    } else {
        let (u, s, v) = jacobi_svd_tall(&x.transpose());
        let (mut left, mut right) = (v, u);
        fix_signs(&mut left, &mut right);
        (left, s, right)
    };
    let rank = numerical_rank(&sigma, rank_tol);
    Ok(SvdFactors {
        u,
        sigma,
        v,
        rank,
        rank_tol,
    })
}

/// `#{i : sigma[i] > tol * sigma[0]}`; zero when `sigma[0] == 0`.
pub fn numerical_rank(sigma: &[f64], tol: f64) -> usize {
    match sigma.first() {
        Some(&s0) if s0 > 0.0 => sigma.iter().filter(|&&s| s > tol * s0).count(),
        _ => 0,
    }
}

// One-sided (Hestenes) Jacobi with a fixed cyclic pair order. Requires n >= p.
fn jacobi_svd_tall(x: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let (n, p) = x.shape();
    debug_assert!(n >= p);
    let mut a = x.clone();
    let mut v = Matrix::identity(p, p);
    let tol = f64::EPSILON * (n.max(1) as f64);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..p {
            for j in (i + 1)..p {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dot(&a.column(j));
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut a, i, j, c, s);
                rotate_columns(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..p).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..p).collect();
    // stable: ties keep sweep order
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));

    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let s0 = sigma.first().copied().unwrap_or(0.0);
    let mut v_sorted = Matrix::zeros(p, p);
    let mut u_cols: Vec<Vector> = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        v_sorted.set_column(k, &v.column(j));
        if sigma[k] > 0.0 && sigma[k] > s0 * 1e-14 {
            let mut col: Vector = a.column(j) / sigma[k];
            orthogonalize_against(&mut col, &u_cols);
            let nrm = col.norm();
            if nrm > 0.5 {
                u_cols.push(col / nrm);
                continue;
            }
        }
        missing.push(k);
        u_cols.push(Vector::zeros(n));
    }
    let mut u = Matrix::zeros(n, n);
    for (k, c) in u_cols.iter().enumerate() {
        u.set_column(k, c);
    }
    // fill zero-sigma slots and the trailing n - p columns
    let mut fill: Vec<usize> = missing;
    fill.extend(p..n);
    if !fill.is_empty() {
        let present: Vec<usize> = (0..n).filter(|k| !fill.contains(k)).collect();
        let basis: Vec<Vector> = present.iter().map(|&k| u.column(k).into_owned()).collect();
        let extra = complete_columns(&basis, n, fill.len());
        for (slot, col) in fill.iter().zip(extra) {
            u.set_column(*slot, &col);
        }
    }
    let mut v_out = v_sorted;
    fix_signs(&mut u, &mut v_out);
    (u, sigma, v_out)
}

fn rotate_columns(m: &mut Matrix, i: usize, j: usize, c: f64, s: f64) {
    for k in 0..m.nrows() {
        let xi = m[(k, i)];
        let xj = m[(k, j)];
        m[(k, i)] = c * xi - s * xj;
        m[(k, j)] = s * xi + c * xj;
    }
}

// Flip u_j (and v_j when it exists) so the first nonzero entry of u_j is >= 0.
fn fix_signs(u: &mut Matrix, v: &mut Matrix) {
    for j in 0..u.ncols() {
        let lead = u.column(j).iter().copied().find(|x| x.abs() > 1e-12);
        if matches!(lead, Some(x) if x < 0.0) {
            u.column_mut(j).neg_mut();
            if j < v.ncols() {
                v.column_mut(j).neg_mut();
            }
        }
    }
}

fn orthogonalize_against(col: &mut Vector, basis: &[Vector]) {
    for _ in 0..2 {
        for b in basis {
            let nb = b.norm_squared();
            if nb > 0.0 {
                let proj = b.dot(col) / nb;
                col.axpy(-proj, b, 1.0);
            }
        }
    }
}

/// Extends an orthonormal set in R^n by `count` further orthonormal vectors,
/// greedily picking the standard basis vector with the largest residual.
fn complete_columns(basis: &[Vector], n: usize, count: usize) -> Vec<Vector> {
    let mut current: Vec<Vector> = basis.iter().filter(|b| b.norm() > 0.0).cloned().collect();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut best: Option<Vector> = None;
        let mut best_norm = -1.0;
        for k in 0..n {
            let mut e = Vector::zeros(n);
            e[k] = 1.0;
            orthogonalize_against(&mut e, &current);
            let nrm = e.norm();
            if nrm > best_norm + 1e-12 {
                best_norm = nrm;
                best = Some(e);
            }
        }
        let col = best.expect("n >= 1") / best_norm;
        current.push(col.clone());
        out.push(col);
    }
    out
}

/// Completes the orthonormal columns of `q` (n x k) to an `n x n` orthogonal matrix.
pub fn complete_orthonormal(q: &Matrix) -> Matrix {
    let n = q.nrows();
    let k = q.ncols();
    let basis: Vec<Vector> = (0..k).map(|j| q.column(j).into_owned()).collect();
    let extra = complete_columns(&basis, n, n - k);
    let mut out = Matrix::zeros(n, n);
    for j in 0..k {
        out.set_column(j, &q.column(j));
    }
    for (j, c) in extra.iter().enumerate() {
        out.set_column(k + j, c);
    }
    out
}

/// Nuclear, operator and Frobenius norms of a matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub nuclear: f64,
    pub operator: f64,
    pub frobenius: f64,
}

pub fn norms(x: &Matrix) -> Result<Norms> {
    let f = svd(x)?;
    Ok(Norms {
        nuclear: f.sigma.iter().sum(),
        operator: f.sigma.first().copied().unwrap_or(0.0),
        frobenius: x.norm(),
    })
}

pub fn nuclear_norm(x: &Matrix) -> f64 {
    singular_values(x).iter().sum()
}

pub fn op_norm(x: &Matrix) -> f64 {
    singular_values(x).first().copied().unwrap_or(0.0)
}

/// Singular values only (nonincreasing). Empty for an empty matrix.
pub fn singular_values(x: &Matrix) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    if x.nrows() >= x.ncols() {
        jacobi_svd_tall(x).1
    } else {
        jacobi_svd_tall(&x.transpose()).1
    }
}

/// `<sigma(X), sigma(Y)> - <X, Y>`; nonnegative, zero iff a simultaneous SVD exists.
pub fn von_neumann_gap(x: &Matrix, y: &Matrix) -> Result<f64> {
    ensure_same_shape(x, y)?;
    ensure_finite(x, "X")?;
    ensure_finite(y, "Y")?;
    let sx = singular_values(x);
    let sy = singular_values(y);
    let sigma_dot: f64 = sx.iter().zip(&sy).map(|(a, b)| a * b).sum();
    Ok(sigma_dot - x.dot(y))
}

/// Smallest eigenvalue of `(S + S^T) / 2`. An empty matrix yields `+inf`.
pub fn min_eig_sym(s: &Matrix) -> Result<f64> {
    if s.nrows() != s.ncols() {
        return Err(Error::Shape(format!(
            "min_eig_sym needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    ensure_finite(s, "symmetric matrix")?;
    if s.is_empty() {
        return Ok(f64::INFINITY);
    }
    let sym = sym(s);
    Ok(sym.symmetric_eigenvalues().min())
}

/// `[X 0]` in `R^{n x n}`.
pub fn pad_square(x: &Matrix) -> Result<Matrix> {
    let (n, p) = x.shape();
    if n < p {
        return Err(Error::Shape(format!("pad_square needs n >= p, got {n}x{p}")));
    }
    let mut out = Matrix::zeros(n, n);
    out.view_mut((0, 0), (n, p)).copy_from(x);
    Ok(out)
}

pub fn sym(x: &Matrix) -> Matrix {
    (x + x.transpose()) * 0.5
}

pub fn skew(x: &Matrix) -> Matrix {
    (x - x.transpose()) * 0.5
}

/// `||Q^T Q - I||_F`.
pub fn orthonormality_error(q: &Matrix) -> f64 {
    let k = q.ncols();
    (q.transpose() * q - Matrix::identity(k, k)).norm()
}

/// The `n x p` matrix `blockdiag(I_r, R)` for `R` of shape `(n-r) x (p-r)`.
pub fn block_diag_identity(r: usize, block: &Matrix) -> Matrix {
    let n = r + block.nrows();
    let p = r + block.ncols();
    let mut out = Matrix::zeros(n, p);
    for i in 0..r {
        out[(i, i)] = 1.0;
    }
    out.view_mut((r, r), block.shape()).copy_from(block);
    out
}

/// Row-major vectorization.
pub fn vec_rows(x: &Matrix) -> Vector {
    let (n, p) = x.shape();
    Vector::from_fn(n * p, |k, _| x[(k / p, k % p)])
}

/// Inverse of [`vec_rows`].
pub fn unvec_rows(v: &Vector, n: usize, p: usize) -> Matrix {
    debug_assert_eq!(v.len(), n * p);
    Matrix::from_fn(n, p, |i, j| v[i * p + j])
}

/// Orthonormal bases `(row space, null space)` of `a`, as columns in
/// `R^{a.ncols()}`, using a singular-value cutoff `rel_cutoff * sigma_max`.
pub fn row_and_null_space(a: &Matrix, rel_cutoff: f64) -> (Matrix, Matrix) {
    let cols = a.ncols();
    if a.nrows() == 0 || cols == 0 {
        return (Matrix::zeros(cols, 0), Matrix::identity(cols, cols));
    }
    // right singular vectors of `a` are the left ones of `a^T`
    let f = svd_with_tol(a, rel_cutoff).expect("finite operator matrix");
    let rank = f.rank;
    let v = &f.v;
    (v.columns(0, rank).into_owned(), v.columns(rank, cols - rank).into_owned())
}
