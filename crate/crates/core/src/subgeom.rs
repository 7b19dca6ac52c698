//! Subdifferential geometry of the nuclear norm, polarizers and flats.
//!
//! For `X = U diag(sigma) V^T` of rank `r`,
//!
//! ```text
//! subdiff ||.||_*(X) = U [[I_r, 0], [0, R]] V^T,   ||R||_op <= 1,
//! ```
//!
//! its relative interior takes `||R||_op < 1`, and the parallel subspace is
//! spanned by `u_i v_j^T` with `i, j > r`.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, SvdFactors};

/// Default tolerance for membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-8;
/// Default tolerance for flatness of solver outputs.
pub const SOLVER_FLAT_TOL: f64 = 1e-6;
/// Allowed deviation of `U^T U` from the identity for a Stiefel matrix.
pub const STIEFEL_TOL: f64 = 1e-9;

/// SVD frame `(U, V, r, sigma)` describing the subdifferential at a point.
#[derive(Debug, Clone)]
pub struct SubdiffFrame {
    pub ubar: Matrix,
    pub vbar: Matrix,
    pub r: usize,
    pub sigma: Vec<f64>,
}

impl SubdiffFrame {
    pub fn new(x: &Matrix) -> Result<Self> {
        Self::with_rank_tol(x, linalg::DEFAULT_RANK_TOL)
    }

    pub fn with_rank_tol(x: &Matrix, rank_tol: f64) -> Result<Self> {
        Ok(Self::from_svd(linalg::svd_with_tol(x, rank_tol)?))
    }

    pub fn from_svd(f: SvdFactors) -> Self {
        Self {
            ubar: f.u,
            vbar: f.v,
            r: f.rank,
            sigma: f.sigma,
        }
    }

    /// Frame from explicit factors, e.g. an alternative SVD for repeated
    /// singular values.
    pub fn from_parts(ubar: Matrix, vbar: Matrix, sigma: Vec<f64>, r: usize) -> Result<Self> {
        let (n, p) = (ubar.nrows(), vbar.nrows());
        if ubar.ncols() != n || vbar.ncols() != p {
            return Err(Error::Shape("frame factors must be square".into()));
        }
        if sigma.len() != n.min(p) || r > sigma.len() {
            return Err(Error::Shape(format!(
                "frame of size {n}x{p} needs {} singular values and r <= that",
                n.min(p)
            )));
        }
        if linalg::orthonormality_error(&ubar) > 1e-10 * n as f64 || linalg::orthonormality_error(&vbar) > 1e-10 * p as f64 {
            return Err(Error::InvalidArgument("frame factors are not orthogonal".into()));
        }
        Ok(Self { ubar, vbar, r, sigma })
    }

    pub fn n(&self) -> usize {
        self.ubar.nrows()
    }

    pub fn p(&self) -> usize {
        self.vbar.nrows()
    }

    /// Nuclear norm of the base point.
    pub fn nuclear_norm(&self) -> f64 {
        self.sigma.iter().sum()
    }

    /// `U diag(sigma) V^T`.
    pub fn base_point(&self) -> Matrix {
        let mut s = Matrix::zeros(self.n(), self.p());
        for (i, &v) in self.sigma.iter().enumerate() {
            s[(i, i)] = v;
        }
        &self.ubar * s * self.vbar.transpose()
    }

    /// `U^T Y V`.
    pub fn to_frame(&self, y: &Matrix) -> Matrix {
        self.ubar.transpose() * y * &self.vbar
    }

    /// `U T V^T`.
    pub fn from_frame(&self, t: &Matrix) -> Matrix {
        &self.ubar * t * self.vbar.transpose()
    }

    /// The subgradient `U blockdiag(I_r, R) V^T`.
    pub fn subgradient(&self, r_block: &Matrix) -> Result<Matrix> {
        let shape = (self.n() - self.r, self.p() - self.r);
        if r_block.shape() != shape {
            return Err(Error::Shape(format!(
                "R block must be {}x{}, got {}x{}",
                shape.0,
                shape.1,
                r_block.nrows(),
                r_block.ncols()
            )));
        }
        Ok(self.from_frame(&linalg::block_diag_identity(self.r, r_block)))
    }
}

/// Outcome of [`subgrad_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubgradCheck {
    pub member: bool,
    pub ri_member: bool,
}

/// Membership of `Y` in the subdifferential at `X` and in its relative interior.
pub fn subgrad_check(frame: &SubdiffFrame, x: &Matrix, y: &Matrix, tol: f64) -> Result<SubgradCheck> {
    linalg::ensure_same_shape(x, y)?;
    if x.shape() != (frame.n(), frame.p()) {
        return Err(Error::Shape("frame does not match X".into()));
    }
    let member = x.dot(y) >= frame.nuclear_norm() - tol && linalg::op_norm(y) <= 1.0 + tol;
    if !member {
        return Ok(SubgradCheck {
            member,
            ri_member: false,
        });
    }
    let t = frame.to_frame(y);
    let (n, p, r) = (frame.n(), frame.p(), frame.r);
    let top_ok = (t.view((0, 0), (r, r)) - Matrix::identity(r, r)).norm() <= tol;
    let off_ok = t.view((0, r), (r, p - r)).norm() <= tol && t.view((r, 0), (n - r, r)).norm() <= tol;
    let block_ok = linalg::op_norm(&t.view((r, r), (n - r, p - r)).into_owned()) <= 1.0 - tol;
    Ok(SubgradCheck {
        member,
        ri_member: top_ok && off_ok && block_ok,
    })
}

/// Orthonormal basis `{u_i v_j^T : i, j > r}` of the parallel subspace.
pub fn parallel_basis(frame: &SubdiffFrame) -> Vec<Matrix> {
    let mut out = Vec::new();
    for i in frame.r..frame.n() {
        for j in frame.r..frame.p() {
            out.push(frame.ubar.column(i) * frame.vbar.column(j).transpose());
        }
    }
    out
}

/// A Stiefel matrix `U` (`n x p`, `n >= p`) with `X U^T` positive semidefinite.
///
/// Computed from the polar decomposition of `[X 0]`: with
/// `[X 0] = W S Z^T`, the orthogonal factor is `Q = W Z^T` and `U` is its
/// first `p` columns, so `X U^T = W S W^T`.
pub fn polarize(x: &Matrix) -> Result<Matrix> {
    let padded = linalg::pad_square(x)?;
    let f = linalg::svd(&padded)?;
    let q = &f.u * f.v.transpose();
    Ok(q.columns(0, x.ncols()).into_owned())
}

fn check_stiefel(u: &Matrix) -> Result<()> {
    if u.nrows() < u.ncols() {
        return Err(Error::Shape(format!("Stiefel matrix must be tall, got {}x{}", u.nrows(), u.ncols())));
    }
    let err = linalg::orthonormality_error(u);
    if err > STIEFEL_TOL {
        return Err(Error::InvalidArgument(format!("U^T U deviates from I by {err:.3e}")));
    }
    Ok(())
}

/// Whether `X U^T` is symmetric and positive semidefinite, within `tol`.
pub fn is_polarizer(x: &Matrix, u: &Matrix, tol: f64) -> Result<bool> {
    linalg::ensure_same_shape(x, u)?;
    check_stiefel(u)?;
    let prod = x * u.transpose();
    let asym = (&prod - prod.transpose()).norm();
    Ok(asym <= tol && linalg::min_eig_sym(&prod)? >= -tol)
}

/// Midpoint test for a segment of constant nuclear norm.
///
/// A convex function equal to `c` at both endpoints and at the midpoint is
/// constant on the whole segment.
pub fn is_flat_segment(x1: &Matrix, x2: &Matrix, tol: f64) -> Result<bool> {
    linalg::ensure_same_shape(x1, x2)?;
    let n1 = linalg::nuclear_norm(x1);
    let n2 = linalg::nuclear_norm(x2);
    let mid = linalg::nuclear_norm(&((x1 + x2) * 0.5));
    Ok((n1 - n2).abs() <= tol && mid >= n1 - tol)
}

/// Flatness decided by simultaneous polarization instead of the midpoint:
/// equal norms and a polarizer of the midpoint that polarizes both ends.
pub fn is_flat_by_polarization(x1: &Matrix, x2: &Matrix, tol: f64) -> Result<bool> {
    linalg::ensure_same_shape(x1, x2)?;
    if (linalg::nuclear_norm(x1) - linalg::nuclear_norm(x2)).abs() > tol {
        return Ok(false);
    }
    let u = polarize(&((x1 + x2) * 0.5))?;
    Ok(is_polarizer(x1, &u, tol)? && is_polarizer(x2, &u, tol)?)
}

/// A single Stiefel `U` polarizing both matrices, if their unit-norm
/// rescalings span a flat.
pub fn common_polarizer(x1: &Matrix, x2: &Matrix, tol: f64) -> Result<Option<Matrix>> {
    linalg::ensure_same_shape(x1, x2)?;
    let n1 = linalg::nuclear_norm(x1);
    let n2 = linalg::nuclear_norm(x2);
    if n1 == 0.0 {
        return polarize(x2).map(Some);
    }
    if n2 == 0.0 {
        return polarize(x1).map(Some);
    }
    let y1 = x1 / n1;
    let y2 = x2 / n2;
    if !is_flat_segment(&y1, &y2, tol)? {
        return Ok(None);
    }
    let u = polarize(&((&y1 + &y2) * 0.5))?;
    if is_polarizer(&y1, &u, tol)? && is_polarizer(&y2, &u, tol)? {
        Ok(Some(u))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, cols, data)
    }

    fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }

    #[test]
    fn polarize_examples() {
        for x in [m(2, 2, &[2.0, 0.0, 0.0, 3.0]), m(2, 2, &[0.0, -1.0, 1.0, 0.0]), Matrix::zeros(2, 2)] {
            let u = polarize(&x).unwrap();
            assert!(linalg::orthonormality_error(&u) < 1e-12);
            assert!(is_polarizer(&x, &u, 1e-12).unwrap());
        }
        let x = m(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let u = polarize(&x).unwrap();
        assert!((&x * u.transpose() - Matrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn polarize_rectangular_and_rejects_wide() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = gaussian(&mut rng, 5, 3);
        let u = polarize(&x).unwrap();
        assert_eq!(u.shape(), (5, 3));
        assert!(is_polarizer(&x, &u, 1e-10).unwrap());
        assert!((x.dot(&u) - linalg::nuclear_norm(&x)).abs() < 1e-10);
        assert!(polarize(&x.transpose()).is_err());
    }

    #[test]
    fn is_polarizer_examples() {
        let x = m(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(is_polarizer(&x, &Matrix::identity(2, 2), 1e-12).unwrap());
        assert!(!is_polarizer(&x, &m(2, 2, &[0.0, 1.0, 1.0, 0.0]), 1e-12).unwrap());
        assert!(is_polarizer(&x, &m(2, 2, &[1.0, 0.0, 0.0, -1.0]), 1e-12).unwrap());
        assert!(is_polarizer(&x, &m(2, 2, &[2.0, 0.0, 0.0, 1.0]), 1e-12).is_err());
    }

    #[test]
    fn subgrad_check_examples() {
        let x = m(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let frame = SubdiffFrame::new(&x).unwrap();
        for beta in [-1.0, -0.5, 0.0, 0.7, 1.0] {
            let y = m(2, 2, &[1.0, 0.0, 0.0, beta]);
            let c = subgrad_check(&frame, &x, &y, 1e-9).unwrap();
            assert!(c.member);
            assert_eq!(c.ri_member, f64::abs(beta) < 1.0, "beta = {beta}");
        }
        let c = subgrad_check(&frame, &x, &m(2, 2, &[1.0, 0.0, 0.0, 2.0]), 1e-9).unwrap();
        assert!(!c.member && !c.ri_member);
        let x = m(2, 3, &[1.0, 2.0, 0.0, 2.0, 4.0, 0.0]);
        let y = &x / x.norm();
        let c = subgrad_check(&SubdiffFrame::new(&x).unwrap(), &x, &y, 1e-9).unwrap();
        assert!(c.member);
    }

    #[test]
    fn zero_base_point_reduces_to_ball() {
        let x = Matrix::zeros(2, 2);
        let frame = SubdiffFrame::new(&x).unwrap();
        assert_eq!(frame.r, 0);
        assert_eq!(parallel_basis(&frame).len(), 4);
        let inside = m(2, 2, &[0.3, 0.1, 0.0, -0.2]);
        let c = subgrad_check(&frame, &x, &inside, 1e-9).unwrap();
        assert!(c.member && c.ri_member);
        let edge = m(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let c = subgrad_check(&frame, &x, &edge, 1e-9).unwrap();
        assert!(c.member && !c.ri_member);
    }

    #[test]
    fn parallel_basis_examples() {
        let frame = SubdiffFrame::new(&m(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        let basis = parallel_basis(&frame);
        assert_eq!(basis.len(), 1);
        assert!((basis[0].abs() - m(2, 2, &[0.0, 0.0, 0.0, 1.0])).norm() < 1e-14);
        let full = SubdiffFrame::new(&m(2, 2, &[2.0, 0.0, 0.0, 1.0])).unwrap();
        assert!(parallel_basis(&full).is_empty());
        let tall = SubdiffFrame::new(&m(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(parallel_basis(&tall).len(), 2);
    }

    #[test]
    fn flat_segment_examples() {
        let a = m(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let b = m(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert!(is_flat_segment(&a, &b, 1e-10).unwrap());
        assert!(!is_flat_segment(&a, &(-&a), 1e-10).unwrap());
        assert!(is_flat_segment(&a, &a, 1e-10).unwrap());
        assert!(is_flat_by_polarization(&a, &b, 1e-10).unwrap());
        assert!(!is_flat_by_polarization(&a, &(-&a), 1e-10).unwrap());
    }

    #[test]
    fn common_polarizer_examples() {
        let a = m(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let b = m(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let u = common_polarizer(&a, &b, 1e-10).unwrap().unwrap();
        assert!(is_polarizer(&a, &u, 1e-10).unwrap() && is_polarizer(&b, &u, 1e-10).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = gaussian(&mut rng, 3, 2);
        let u = common_polarizer(&x, &(&x * 2.0), 1e-10).unwrap().unwrap();
        assert!(is_polarizer(&x, &u, 1e-10).unwrap());
        assert!(common_polarizer(&a, &(-&a), 1e-10).unwrap().is_none());
        let u = common_polarizer(&Matrix::zeros(3, 2), &x, 1e-10).unwrap().unwrap();
        assert!(is_polarizer(&x, &u, 1e-10).unwrap());
    }

    #[test]
    fn ri_verdict_is_frame_independent() {
        // repeated zero singular values: rotate the trailing frame block
        let x = m(3, 3, &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let frame = SubdiffFrame::new(&x).unwrap();
        let (c, s) = (0.6, 0.8);
        let rot = m(3, 3, &[1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c]);
        let alt = SubdiffFrame::from_parts(&frame.ubar * &rot, &frame.vbar * rot.transpose(), frame.sigma.clone(), frame.r).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for scale in [0.5, 0.99, 1.0, 1.5] {
            let g = gaussian(&mut rng, 2, 2);
            let block = &g * (scale / linalg::op_norm(&g));
            let y = frame.subgradient(&block).unwrap();
            let a = subgrad_check(&frame, &x, &y, 1e-9).unwrap();
            let b = subgrad_check(&alt, &x, &y, 1e-9).unwrap();
            assert_eq!(a, b, "scale {scale}");
        }
    }
}
