//! The cone `W(X)` of directions along which the nuclear norm admits a flat
//! through `X`, and the search for a nonzero element of `ker A ∩ W(X)`.
//!
//! In the frame of `X = U diag(sigma) V^T` (rank `r`, `n >= p`),
//!
//! ```text
//! W(X) = { U M blockdiag(I_r, R) V^T :  M symmetric, tr M = 0,
//!          diag(sigma) + eps M PSD for some eps > 0,
//!          R Stiefel, M blockdiag(I_r, R R^T) = M }.
//! ```
//!
//! For a direction `D` write `T = U^T D V` and let `E` be its trailing
//! `(n-r) x (p-r)` block. The constraint on `M` forces `M = T blockdiag(I_r, R)^T`,
//! and PSD-ness of the trailing block of `M` forces `R` to polarize `E`. Since
//! `E R^T = (E E^T)^{1/2}` for every polarizer, and the off-diagonal blocks
//! only see `R` on the range of `E^T`, every admissible `R` yields the same
//! `M`. Membership is therefore decided exactly with `R = polarize(E)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::operators::LinearOperatorSpec;
use crate::sampling;
use crate::subgeom::{self, SubdiffFrame};

/// Upper end of the `eps_hat` bisection bracket; returned when unbounded.
pub const EPS_HAT_CAP: f64 = 1e6;
const EPS_HAT_ABS_TOL: f64 = 1e-10;
const EPS_HAT_MAX_ITER: usize = 200;
// relative slack on the PSD test, absorbing eigen-solver roundoff
const PSD_SLACK: f64 = 1e-12;
/// Tolerance for the certificate invariants, relative to `1 + ||M||`.
pub const CERT_TOL: f64 = 1e-9;

/// The frame of a base point with `n >= p`.
#[derive(Debug, Clone)]
pub struct WConeFrame {
    pub frame: SubdiffFrame,
}

impl WConeFrame {
    pub fn new(xbar: &Matrix) -> Result<Self> {
        Self::with_rank_tol(xbar, linalg::DEFAULT_RANK_TOL)
    }

    pub fn with_rank_tol(xbar: &Matrix, rank_tol: f64) -> Result<Self> {
        if xbar.nrows() < xbar.ncols() {
            return Err(Error::Shape(format!(
                "base point must have n >= p, got {}x{}; transpose first",
                xbar.nrows(),
                xbar.ncols()
            )));
        }
        Ok(Self {
            frame: SubdiffFrame::with_rank_tol(xbar, rank_tol)?,
        })
    }

    pub fn n(&self) -> usize {
        self.frame.n()
    }

    pub fn p(&self) -> usize {
        self.frame.p()
    }

    pub fn r(&self) -> usize {
        self.frame.r
    }

    /// Singular values zero-padded to length `n`.
    pub fn sigma_n(&self) -> Vec<f64> {
        let mut s = self.frame.sigma.clone();
        s.resize(self.n(), 0.0);
        s
    }

    fn sigma_max(&self) -> f64 {
        self.frame.sigma.first().copied().unwrap_or(0.0)
    }

    /// `M(R) = U^T D V blockdiag(I_r, R)^T`.
    pub fn m_for_block(&self, d: &Matrix, r_block: &Matrix) -> Result<Matrix> {
        self.check_direction_shape(d)?;
        let (n, p, r) = (self.n(), self.p(), self.r());
        if r_block.shape() != (n - r, p - r) {
            return Err(Error::Shape(format!("R must be {}x{}", n - r, p - r)));
        }
        Ok(self.frame.to_frame(d) * linalg::block_diag_identity(r, r_block).transpose())
    }

    /// The polarizer of the trailing block of `U^T D V`.
    pub fn canonical_block(&self, d: &Matrix) -> Result<Matrix> {
        self.check_direction_shape(d)?;
        Ok(self.block_from_frame_coords(&self.frame.to_frame(d)))
    }

    fn block_from_frame_coords(&self, t: &Matrix) -> Matrix {
        let (n, p, r) = (self.n(), self.p(), self.r());
        if p == r {
            return Matrix::zeros(n - r, 0);
        }
        let e = t.view((r, r), (n - r, p - r)).into_owned();
        subgeom::polarize(&e).expect("trailing block is tall and finite")
    }

    fn check_direction_shape(&self, d: &Matrix) -> Result<()> {
        if d.shape() != (self.n(), self.p()) {
            return Err(Error::Shape(format!(
                "direction must be {}x{}, got {}x{}",
                self.n(),
                self.p(),
                d.nrows(),
                d.ncols()
            )));
        }
        Ok(())
    }
}

/// Largest `eps` in `[0, EPS_HAT_CAP]` with `diag(sigma) + eps M` PSD.
///
/// `sigma` is zero-padded to the size of `M`. The feasible set is an
/// interval containing 0, so bisection applies; the returned value is on the
/// PSD side of the bracket.
pub fn eps_hat(sigma: &[f64], m: &Matrix) -> Result<f64> {
    let n = m.nrows();
    if m.ncols() != n || sigma.len() > n {
        return Err(Error::Shape(format!(
            "eps_hat needs square M of size >= {}, got {}x{}",
            sigma.len(),
            n,
            m.ncols()
        )));
    }
    linalg::ensure_finite(m, "M")?;
    let mnorm = m.norm();
    let asym = (m - m.transpose()).norm();
    if asym > CERT_TOL * (1.0 + mnorm) {
        return Err(Error::InvalidArgument(format!("M is not symmetric (asymmetry {asym:.3e})")));
    }
    let ms = linalg::sym(m);
    let mut base = Matrix::zeros(n, n);
    for (i, &s) in sigma.iter().enumerate() {
        base[(i, i)] = s;
    }
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let psd = |e: f64| -> bool {
        let s = &base + &ms * e;
        linalg::min_eig_sym(&s).expect("square") >= -PSD_SLACK * (smax + e * mnorm)
    };
    if psd(EPS_HAT_CAP) {
        return Ok(EPS_HAT_CAP);
    }
    let (mut lo, mut hi) = (0.0_f64, EPS_HAT_CAP);
    for _ in 0..EPS_HAT_MAX_ITER {
        if hi - lo <= EPS_HAT_ABS_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if psd(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Whether an `eps_hat` result hit the bracket cap.
pub fn is_unbounded(eps: f64) -> bool {
    eps >= EPS_HAT_CAP
}

/// A witness `(M, R)` for membership of a direction in `W(X)`.
#[derive(Debug, Clone)]
pub struct WMembership {
    pub m: Matrix,
    pub r_block: Matrix,
    pub eps_hat: f64,
}

/// Violation measures of `M(R)` for a direction, all relative to `||M||_F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembershipDefects {
    pub asymmetry: f64,
    pub trace: f64,
    /// `eps_hat * ||M||_F / sigma_1`; invariant under scaling of the direction.
    pub reach: f64,
}

impl MembershipDefects {
    fn accepts(&self, tol: f64) -> bool {
        self.asymmetry <= tol && self.trace <= tol && self.reach > tol
    }
}

fn defects(wf: &WConeFrame, m: &Matrix) -> (MembershipDefects, f64) {
    let mnorm = m.norm();
    let asymmetry = (m - m.transpose()).norm() / mnorm;
    let trace = m.trace().abs() / mnorm;
    let scale = if wf.sigma_max() > 0.0 { wf.sigma_max() } else { 1.0 };
    let eps = if asymmetry <= 1e-6 {
        eps_hat(&wf.sigma_n(), &linalg::sym(m)).expect("symmetrized")
    } else {
        0.0
    };
    (
        MembershipDefects {
            asymmetry,
            trace,
            reach: eps * mnorm / scale,
        },
        eps,
    )
}

/// Membership test for a fixed `R`.
pub fn w_membership_with_block(wf: &WConeFrame, d: &Matrix, r_block: &Matrix, tol: f64) -> Result<Option<WMembership>> {
    if d.norm() == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let m = wf.m_for_block(d, r_block)?;
    let (def, eps) = defects(wf, &m);
    Ok(def.accepts(tol).then(|| WMembership {
        m,
        r_block: r_block.clone(),
        eps_hat: eps,
    }))
}

/// Exact membership of `D` in `W(X)`, using the canonical `R`.
pub fn w_membership(wf: &WConeFrame, d: &Matrix, tol: f64) -> Result<Option<WMembership>> {
    if d.norm() == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let r_block = wf.canonical_block(d)?;
    w_membership_with_block(wf, d, &r_block, tol)
}

/// Distance of `D` from `span W(X)`: the skew part of the leading `r x r`
/// block of `U^T D V`.
pub fn span_w_residual(wf: &WConeFrame, d: &Matrix) -> Result<f64> {
    wf.check_direction_shape(d)?;
    let r = wf.r();
    let t = wf.frame.to_frame(d);
    Ok(linalg::skew(&t.view((0, 0), (r, r)).into_owned()).norm())
}

/// Combined defect `||skew M|| + |tr M| + ||negative part of M_22||`,
/// relative to `||M||`, with the canonical `R`.
pub fn w_violation(wf: &WConeFrame, d: &Matrix) -> Result<f64> {
    let r_block = wf.canonical_block(d)?;
    let m = wf.m_for_block(d, &r_block)?;
    let mnorm = m.norm();
    if mnorm == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let r = wf.r();
    let k = wf.n() - r;
    let m22 = linalg::sym(&m.view((r, r), (k, k)).into_owned());
    let neg: f64 = if k == 0 {
        0.0
    } else {
        m22.symmetric_eigenvalues().iter().map(|&l| l.min(0.0).powi(2)).sum::<f64>().sqrt()
    };
    Ok(((&m - m.transpose()).norm() * 0.5 + m.trace().abs() + neg) / mnorm)
}

/// `(M, R, eps_hat)` describing a flat through the base point, with the frame
/// it refers to.
#[derive(Debug, Clone)]
pub struct NonUniquenessCertificate {
    pub m: Matrix,
    pub r_block: Matrix,
    pub eps_hat: f64,
    pub frame: SubdiffFrame,
}

impl NonUniquenessCertificate {
    /// Symmetrizes `M`, removes residual trace from its leading block and
    /// recomputes `eps_hat`.
    pub fn from_membership(wf: &WConeFrame, w: WMembership) -> Result<Self> {
        let mut m = linalg::sym(&w.m);
        let r = wf.r();
        if r > 0 {
            let shift = m.trace() / r as f64;
            for i in 0..r {
                m[(i, i)] -= shift;
            }
        }
        let eps = eps_hat(&wf.sigma_n(), &m)?;
        let cert = Self {
            m,
            r_block: w.r_block,
            eps_hat: eps,
            frame: wf.frame.clone(),
        };
        cert.validate()?;
        Ok(cert)
    }

    /// `U M blockdiag(I_r, R) V^T`.
    pub fn direction(&self) -> Matrix {
        self.frame.from_frame(&(&self.m * linalg::block_diag_identity(self.frame.r, &self.r_block)))
    }

    pub fn validate(&self) -> Result<()> {
        let (n, p, r) = (self.frame.n(), self.frame.p(), self.frame.r);
        let bad = |msg: String| Err(Error::InvalidCertificate(msg));
        if self.m.shape() != (n, n) || self.r_block.shape() != (n - r, p - r) {
            return bad("M or R has the wrong shape".into());
        }
        let scale = 1.0 + self.m.norm();
        let asym = (&self.m - self.m.transpose()).norm();
        if asym > CERT_TOL * scale {
            return bad(format!("M asymmetric by {asym:.3e}"));
        }
        if self.m.trace().abs() > CERT_TOL * scale {
            return bad(format!("tr M = {:.3e}", self.m.trace()));
        }
        if self.r_block.ncols() > 0 && linalg::orthonormality_error(&self.r_block) > subgeom::STIEFEL_TOL {
            return bad("R is not Stiefel".into());
        }
        let rrt = &self.r_block * self.r_block.transpose();
        let proj = linalg::block_diag_identity(r, &rrt);
        if (&self.m * proj - &self.m).norm() > CERT_TOL * scale {
            return bad("M blockdiag(I_r, R R^T) != M".into());
        }
        if !(self.eps_hat > 0.0) {
            return bad(format!("eps_hat = {:e} is not positive", self.eps_hat));
        }
        let mut s = &self.m * self.eps_hat;
        for (i, &v) in self.frame.sigma.iter().enumerate() {
            s[(i, i)] += v;
        }
        let lam = linalg::min_eig_sym(&s)?;
        if lam < -CERT_TOL * (1.0 + self.frame.sigma.first().copied().unwrap_or(0.0)) {
            return bad(format!("diag(sigma) + eps_hat M has eigenvalue {lam:.3e}"));
        }
        Ok(())
    }
}

/// `X + eps_hat U M blockdiag(I_r, R) V^T`, another point of equal nuclear norm.
pub fn second_solution(xbar: &Matrix, cert: &NonUniquenessCertificate) -> Result<Matrix> {
    cert.validate()?;
    if xbar.shape() != (cert.frame.n(), cert.frame.p()) {
        return Err(Error::Shape("certificate frame does not match X".into()));
    }
    let drift = (cert.frame.base_point() - xbar).norm();
    if drift > 1e-8 * xbar.norm().max(1.0) {
        return Err(Error::InvalidCertificate(format!("frame reconstructs X only to {drift:.3e}")));
    }
    Ok(xbar + cert.direction() * cert.eps_hat)
}

/// Certificate for the flat through `xbar` and `xhat`.
pub fn extract_certificate(xbar: &Matrix, xhat: &Matrix, tol: f64) -> Result<NonUniquenessCertificate> {
    linalg::ensure_same_shape(xbar, xhat)?;
    let wf = WConeFrame::new(xbar)?;
    let d = xhat - xbar;
    if d.norm() <= tol * xbar.norm().max(1.0) {
        return Err(Error::NotFlat);
    }
    let flat = subgeom::is_flat_segment(xbar, xhat, tol)?;
    let u = match subgeom::common_polarizer(xbar, xhat, tol)? {
        Some(u) if flat => u,
        _ => return Err(Error::NotFlat),
    };
    let (n, p, r) = (wf.n(), wf.p(), wf.r());
    let r_block = if p == r {
        Matrix::zeros(n - r, 0)
    } else {
        let raw = wf.frame.to_frame(&u).view((r, r), (n - r, p - r)).into_owned();
        subgeom::polarize(&raw)?
    };
    let m = wf.m_for_block(&d, &r_block)?;
    let asym = (&m - m.transpose()).norm();
    if asym > tol.max(1e-9) * (1.0 + m.norm()) * 1e2 {
        return Err(Error::NotFlat);
    }
    let eps = eps_hat(&wf.sigma_n(), &linalg::sym(&m))?;
    NonUniquenessCertificate::from_membership(
        &wf,
        WMembership {
            m,
            r_block,
            eps_hat: eps,
        },
    )
}

/// Settings for [`kernel_w_search`].
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub tol: f64,
    /// Random Stiefel starts for kernels of dimension above one.
    pub starts: usize,
    pub seed: u64,
    pub rank_tol: f64,
    /// A dual certificate `Y` in `rge A* ∩ subdiff(X)`, if known. Its trailing
    /// block fixes `R` for every solution direction at once.
    pub dual_certificate: Option<Matrix>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            starts: 32,
            seed: 0,
            rank_tol: linalg::DEFAULT_RANK_TOL,
            dual_certificate: None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum SearchOutcome {
    /// A unit-norm kernel element in `W(X)`, with its certificate.
    FoundNonzero {
        certificate: NonUniquenessCertificate,
        direction: Matrix,
        residual: f64,
    },
    /// The intersection is provably trivial.
    NoneFoundExhaustive { kernel_dim: usize },
    NoneFoundHeuristic { starts: usize, best_violation: f64 },
}

impl SearchOutcome {
    pub fn is_found(&self) -> bool {
        matches!(self, SearchOutcome::FoundNonzero { .. })
    }
}

/// Whether no nonzero kernel combination lies in `span W(X)`: the skew parts
/// of the leading blocks of the kernel basis are linearly independent.
pub fn span_w_excludes_kernel(wf: &WConeFrame, kernel: &[Matrix]) -> bool {
    if kernel.is_empty() {
        return true;
    }
    let r = wf.r();
    let rows = r * r.saturating_sub(1) / 2;
    if rows < kernel.len() {
        return false;
    }
    let mut s = Matrix::zeros(rows, kernel.len());
    for (j, k) in kernel.iter().enumerate() {
        let t = wf.frame.to_frame(k);
        let mut idx = 0;
        for a in 0..r {
            for b in (a + 1)..r {
                s[(idx, j)] = t[(a, b)] - t[(b, a)];
                idx += 1;
            }
        }
    }
    let sv = linalg::singular_values(&s);
    sv.last().is_some_and(|&v| v > 1e-6)
}

/// Searches `ker A ∩ W(X)` for a nonzero element.
///
/// Kernels of dimension at most one are decided exactly. Larger kernels use
/// the dual certificate hint if present, then `cfg.starts` seeded Stiefel
/// starts; a miss is then reported as heuristic. Wide problems are solved
/// on the transpose; the returned direction is transposed back while the
/// certificate stays in the transposed frame.
pub fn kernel_w_search(op: &LinearOperatorSpec, xbar: &Matrix, cfg: &SearchConfig) -> Result<SearchOutcome> {
    if xbar.shape() != (op.n(), op.p()) {
        return Err(Error::Shape("X does not match the operator domain".into()));
    }
    if op.n() < op.p() {
        let cfg_t = SearchConfig {
            dual_certificate: cfg.dual_certificate.as_ref().map(|y| y.transpose()),
            ..cfg.clone()
        };
        let out = kernel_w_search(&op.transposed()?, &xbar.transpose(), &cfg_t)?;
        return Ok(match out {
            SearchOutcome::FoundNonzero {
                certificate,
                direction,
                residual,
            } => SearchOutcome::FoundNonzero {
                certificate,
                direction: direction.transpose(),
                residual,
            },
            other => other,
        });
    }
    let wf = WConeFrame::with_rank_tol(xbar, cfg.rank_tol)?;
    let kernel = op.kernel_basis();
    let d = kernel.len();
    let exhaustive = SearchOutcome::NoneFoundExhaustive { kernel_dim: d };
    // W(0) = {0}: a traceless PSD M vanishes
    if d == 0 || wf.r() == 0 {
        return Ok(exhaustive);
    }
    if d == 1 {
        for sign in [1.0, -1.0] {
            let k = &kernel[0] * sign;
            if let Some(found) = accept(&wf, &k, cfg.tol)? {
                return Ok(found);
            }
        }
        return Ok(exhaustive);
    }
    if span_w_excludes_kernel(&wf, &kernel) {
        return Ok(exhaustive);
    }
    let search = KernelSearch::new(&wf, &kernel, cfg.tol);
    let mut best = f64::INFINITY;
    if let Some(y) = &cfg.dual_certificate {
        if y.shape() == (wf.n(), wf.p()) {
            let r_block = wf.block_from_frame_coords(&wf.frame.to_frame(y));
            if let Some(found) = search.try_block(&r_block, &mut best)? {
                return Ok(found);
            }
            let r_block = search.alternate(r_block, &mut best);
            if let Some(found) = search.try_block(&r_block, &mut best)? {
                return Ok(found);
            }
        }
    }
    let (n, p, r) = (wf.n(), wf.p(), wf.r());
    for start in 0..cfg.starts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(start as u64));
        let r0 = sampling::random_stiefel(&mut rng, n - r, p - r);
        let r_block = search.alternate(r0, &mut best);
        if let Some(found) = search.try_block(&r_block, &mut best)? {
            return Ok(found);
        }
        if p == r {
            break;
        }
    }
    Ok(SearchOutcome::NoneFoundHeuristic {
        starts: cfg.starts,
        best_violation: best,
    })
}

fn accept(wf: &WConeFrame, k: &Matrix, tol: f64) -> Result<Option<SearchOutcome>> {
    let k = k / k.norm();
    match w_membership(wf, &k, tol)? {
        Some(w) => {
            let residual = w_violation(wf, &k)?;
            let certificate = NonUniquenessCertificate::from_membership(wf, w)?;
            Ok(Some(SearchOutcome::FoundNonzero {
                certificate,
                direction: k,
                residual,
            }))
        }
        None => Ok(None),
    }
}

// Loose cutoff for constraint near-null spaces; candidates are refined and
// then checked exactly, so spurious directions are harmless.
const NEAR_NULL_CUTOFF: f64 = 1e-5;
const AP_MAX_ITER: usize = 3000;
const REFINE_STEPS: usize = 40;
const ALTERNATE_STEPS: usize = 60;
const NEWTON_STEPS: usize = 20;

struct KernelSearch<'a> {
    wf: &'a WConeFrame,
    kernel: &'a [Matrix],
    frame_coords: Vec<Matrix>,
    tol: f64,
}

impl<'a> KernelSearch<'a> {
    fn new(wf: &'a WConeFrame, kernel: &'a [Matrix], tol: f64) -> Self {
        let frame_coords = kernel.iter().map(|k| wf.frame.to_frame(k)).collect();
        Self {
            wf,
            kernel,
            frame_coords,
            tol,
        }
    }

    fn combine(&self, c: &[f64]) -> Matrix {
        let mut out = Matrix::zeros(self.wf.n(), self.wf.p());
        for (k, &ci) in self.kernel.iter().zip(c) {
            out += k * ci;
        }
        out
    }

    fn m_parts(&self, r_block: &Matrix) -> Vec<Matrix> {
        let bdt = linalg::block_diag_identity(self.wf.r(), r_block).transpose();
        self.frame_coords.iter().map(|t| t * &bdt).collect()
    }

    /// Rows: strictly-upper skew entries and the trace; columns: kernel basis.
    fn constraint_matrix(&self, parts: &[Matrix]) -> Matrix {
        let n = self.wf.n();
        let rows = n * (n - 1) / 2 + 1;
        let mut g = Matrix::zeros(rows, parts.len());
        for (j, m) in parts.iter().enumerate() {
            let mut idx = 0;
            for a in 0..n {
                for b in (a + 1)..n {
                    g[(idx, j)] = m[(a, b)] - m[(b, a)];
                    idx += 1;
                }
            }
            g[(idx, j)] = m.trace();
        }
        g
    }

    fn violation_of(&self, c: &[f64]) -> f64 {
        let k = self.combine(c);
        if k.norm() == 0.0 {
            return f64::INFINITY;
        }
        w_violation(self.wf, &k).unwrap_or(f64::INFINITY)
    }

    /// Alternates between the least-violating coefficients for a fixed `R`
    /// and the canonical `R` of the resulting direction.
    fn alternate(&self, mut r_block: Matrix, best: &mut f64) -> Matrix {
        if r_block.ncols() == 0 {
            return r_block;
        }
        let r = self.wf.r();
        for _ in 0..ALTERNATE_STEPS {
            let parts = self.m_parts(&r_block);
            let g = self.constraint_matrix(&parts);
            let c = smallest_right_singular(&g);
            let mut c: Vec<f64> = c.iter().copied().collect();
            let tr22: f64 = parts
                .iter()
                .zip(&c)
                .map(|(m, &ci)| ci * (m.trace() - m.view((0, 0), (r, r)).trace()))
                .sum();
            if tr22 < 0.0 {
                c.iter_mut().for_each(|v| *v = -*v);
            }
            *best = best.min(self.violation_of(&c));
            let next = self.wf.canonical_block(&self.combine(&c)).expect("shape");
            if (&next - &r_block).norm() < 1e-13 {
                break;
            }
            r_block = next;
        }
        r_block
    }

    fn try_block(&self, r_block: &Matrix, best: &mut f64) -> Result<Option<SearchOutcome>> {
        let parts = self.m_parts(r_block);
        let g = self.constraint_matrix(&parts);
        let z = near_null(&g, NEAR_NULL_CUTOFF);
        if z.ncols() == 0 {
            return Ok(None);
        }
        let (n, r) = (self.wf.n(), self.wf.r());
        let mut candidates: Vec<Vec<f64>> = Vec::new();

        // coefficients that keep M supported on its leading block
        let mut tail = Matrix::zeros(n * n - r * r, z.ncols());
        for j in 0..z.ncols() {
            let mut m = Matrix::zeros(n, n);
            for (i, part) in parts.iter().enumerate() {
                m += part * z[(i, j)];
            }
            let mut idx = 0;
            for a in 0..n {
                for b in 0..n {
                    if a >= r || b >= r {
                        tail[(idx, j)] = m[(a, b)];
                        idx += 1;
                    }
                }
            }
        }
        let z0 = near_null(&tail, 1e-9);
        if z0.ncols() > 0 {
            candidates.push((&z * z0.column(0)).iter().copied().collect());
        } else if z.ncols() == 1 {
            let c: Vec<f64> = z.column(0).iter().copied().collect();
            candidates.push(c.iter().map(|v| -v).collect());
            candidates.push(c);
        } else if let Some(w) = self.spectrahedron_point(&parts, &z) {
            candidates.push((&z * w).iter().copied().collect());
        }

        for c in candidates {
            let c = self.refine(c);
            *best = best.min(self.violation_of(&c));
            let k = self.combine(&c);
            if k.norm() == 0.0 {
                continue;
            }
            if let Some(found) = accept(self.wf, &k, self.tol)? {
                return Ok(Some(found));
            }
        }
        Ok(None)
    }

    /// Newton-type correction of the coefficients onto the linear constraints
    /// for their own canonical `R`.
    fn refine(&self, c: Vec<f64>) -> Vec<f64> {
        let mut c = nalgebra::DVector::from_vec(c);
        let norm = c.norm();
        if norm == 0.0 {
            return c.iter().copied().collect();
        }
        c /= norm;
        for _ in 0..REFINE_STEPS {
            let k = self.combine(c.as_slice());
            let r_block = self.wf.canonical_block(&k).expect("shape");
            let g = self.constraint_matrix(&self.m_parts(&r_block));
            let res = &g * &c;
            if res.norm() <= 1e-15 {
                break;
            }
            let step = pseudo_solve(&g, &res);
            let next = &c - step;
            let nn = next.norm();
            if nn < 0.5 {
                break;
            }
            c = next / nn;
        }
        // full Newton with a difference Jacobian, since R depends on c
        let n_coef = c.len();
        let mut res = self.own_residual(&c);
        for _ in 0..NEWTON_STEPS {
            if res.norm() <= 1e-15 {
                break;
            }
            let h = 1e-7;
            let mut jac = Matrix::zeros(res.len(), n_coef);
            for j in 0..n_coef {
                let mut cp = c.clone();
                cp[j] += h;
                let mut cm = c.clone();
                cm[j] -= h;
                jac.set_column(j, &((self.own_residual(&cp) - self.own_residual(&cm)) / (2.0 * h)));
            }
            let next = &c - pseudo_solve(&jac, &res);
            let nn = next.norm();
            if nn < 0.5 {
                break;
            }
            let next = next / nn;
            let next_res = self.own_residual(&next);
            if next_res.norm() >= res.norm() {
                break;
            }
            c = next;
            res = next_res;
        }
        c.iter().copied().collect()
    }

    /// Skew and trace constraints of `c` under its own canonical `R`.
    fn own_residual(&self, c: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        let k = self.combine(c.as_slice());
        let r_block = self.wf.canonical_block(&k).expect("shape");
        self.constraint_matrix(&self.m_parts(&r_block)) * c
    }

    /// A nonzero `w` with `diag(sigma) + M(Z w)` PSD, by alternating
    /// projections at a few levels of `tr M_22`.
    fn spectrahedron_point(&self, parts: &[Matrix], z: &Matrix) -> Option<nalgebra::DVector<f64>> {
        let (n, r) = (self.wf.n(), self.wf.r());
        let k = z.ncols();
        let basis: Vec<Matrix> = (0..k)
            .map(|j| {
                let mut m = Matrix::zeros(n, n);
                for (i, part) in parts.iter().enumerate() {
                    m += part * z[(i, j)];
                }
                linalg::sym(&m)
            })
            .collect();
        let ell = nalgebra::DVector::from_iterator(k, basis.iter().map(|m| m.trace() - m.view((0, 0), (r, r)).trace()));
        if ell.norm() <= 1e-12 {
            return None;
        }
        let gram = Matrix::from_fn(k, k, |a, b| basis[a].dot(&basis[b]));
        let gram_inv = gram.try_inverse()?;
        let mut sig = Matrix::zeros(n, n);
        for (i, &s) in self.wf.sigma_n().iter().enumerate() {
            sig[(i, i)] = s;
        }
        let sigma_r = self.wf.frame.sigma[r - 1];
        let h_ell = &gram_inv * &ell;
        let denom = ell.dot(&h_ell);

        for level in [1e-1, 1e-2, 1e-3] {
            let tau = level * sigma_r;
            let mut s = sig.clone();
            let mut w = nalgebra::DVector::zeros(k);
            let mut feasible = false;
            for _ in 0..AP_MAX_ITER {
                let diff = &s - &sig;
                let g = nalgebra::DVector::from_iterator(k, basis.iter().map(|m| m.dot(&diff)));
                let hg = &gram_inv * &g;
                let mu = (tau - ell.dot(&hg)) / denom;
                w = hg + &h_ell * mu;
                let mut sa = sig.clone();
                for (j, m) in basis.iter().enumerate() {
                    sa += m * w[j];
                }
                let sp = psd_projection(&sa);
                let gap = (&sa - &sp).norm();
                if gap <= 1e-13 * (1.0 + sigma_r) {
                    feasible = true;
                    break;
                }
                s = sp;
            }
            if feasible {
                return Some(w);
            }
        }
        None
    }
}

fn psd_projection(s: &Matrix) -> Matrix {
    let eig = linalg::sym(s).symmetric_eigen();
    let vals = eig.eigenvalues.map(|l| l.max(0.0));
    &eig.eigenvectors * Matrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Right singular vectors of `g` with singular value at most `cutoff * (1 + sigma_max)`.
fn near_null(g: &Matrix, cutoff: f64) -> Matrix {
    let cols = g.ncols();
    if cols == 0 {
        return Matrix::zeros(0, 0);
    }
    if g.nrows() == 0 {
        return Matrix::identity(cols, cols);
    }
    let f = linalg::svd(g).expect("finite");
    let sv = f.sigma_padded(cols);
    let thresh = cutoff * (1.0 + sv[0]);
    let keep: Vec<usize> = (0..cols).filter(|&j| sv[j] <= thresh).collect();
    let mut out = Matrix::zeros(cols, keep.len());
    for (o, &j) in keep.iter().enumerate() {
        out.set_column(o, &f.v.column(j));
    }
    out
}

fn smallest_right_singular(g: &Matrix) -> nalgebra::DVector<f64> {
    let f = linalg::svd(g).expect("finite");
    f.v.column(g.ncols() - 1).into_owned()
}

/// Minimum-norm least-squares solution of `g x = rhs`, truncating tiny
/// singular values.
fn pseudo_solve(g: &Matrix, rhs: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
    let f = linalg::svd(g).expect("finite");
    let mut out = nalgebra::DVector::zeros(g.ncols());
    let smax = f.sigma.first().copied().unwrap_or(0.0);
    for (j, &s) in f.sigma.iter().enumerate() {
        if s > 1e-10 * smax && s > 0.0 {
            let coef = f.u.column(j).dot(rhs) / s;
            out += f.v.column(j) * coef;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;

    fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, cols, data)
    }

    fn diag10() -> WConeFrame {
        WConeFrame::new(&m(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap()
    }

    #[test]
    fn eps_hat_examples() {
        assert!((eps_hat(&[1.0, 0.0], &m(2, 2, &[-1.0, 0.0, 0.0, 1.0])).unwrap() - 1.0).abs() <= 1e-9);
        assert!(eps_hat(&[1.0, 0.0], &m(2, 2, &[1.0, 0.0, 0.0, -1.0])).unwrap() <= 1e-9);
        assert!((eps_hat(&[2.0, 1.0], &(-Matrix::identity(2, 2))).unwrap() - 1.0).abs() <= 1e-9);
        assert!(is_unbounded(eps_hat(&[1.0, 1.0], &Matrix::identity(2, 2)).unwrap()));
        assert!(eps_hat(&[1.0, 0.0], &m(2, 2, &[0.0, 1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn membership_examples() {
        let wf = diag10();
        let k = m(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert!(w_membership(&wf, &k, 1e-8).unwrap().is_none());
        for s in [1.0, -1.0] {
            let rb = m(1, 1, &[s]);
            assert!(w_membership_with_block(&wf, &k, &rb, 1e-8).unwrap().is_none());
        }
        let d = m(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let w = w_membership(&wf, &d, 1e-8).unwrap().unwrap();
        assert!((&w.m - &d).norm() < 1e-14);
        assert_eq!(w.r_block, m(1, 1, &[1.0]));
        assert!((w.eps_hat - 1.0).abs() < 1e-9);
        assert!(w_membership(&wf, &Matrix::identity(2, 2), 1e-8).unwrap().is_none());
        assert!(matches!(w_membership(&wf, &Matrix::zeros(2, 2), 1e-8), Err(Error::ZeroDirection)));
    }

    #[test]
    fn membership_is_a_cone() {
        let wf = diag10();
        let d = m(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        for c in [0.5, 2.0, 10.0] {
            assert!(w_membership(&wf, &(&d * c), 1e-8).unwrap().is_some());
        }
    }

    #[test]
    fn span_w_residual_examples() {
        let wf = diag10();
        let k = m(2, 2, &[0.3, -1.0, 2.0, 1.0]);
        assert_eq!(span_w_residual(&wf, &k).unwrap(), 0.0);
        let full = WConeFrame::new(&m(2, 2, &[2.0, 0.0, 0.0, 1.0])).unwrap();
        let skew = m(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((span_w_residual(&full, &skew).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        let sym = m(2, 2, &[1.0, 0.5, 0.5, -1.0]);
        assert!(span_w_residual(&full, &sym).unwrap() < 1e-15);
    }

    #[test]
    fn second_solution_examples() {
        let xbar = m(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let wf = WConeFrame::new(&xbar).unwrap();
        let d = m(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let w = w_membership(&wf, &d, 1e-8).unwrap().unwrap();
        let cert = NonUniquenessCertificate::from_membership(&wf, w).unwrap();
        let xhat = second_solution(&xbar, &cert).unwrap();
        assert!((&xhat - m(2, 2, &[0.0, 0.0, 0.0, 1.0])).norm() < 1e-9);
        let half = NonUniquenessCertificate {
            eps_hat: cert.eps_hat / 2.0,
            ..cert.clone()
        };
        let xh = second_solution(&xbar, &half).unwrap();
        assert!((&xh - m(2, 2, &[0.5, 0.0, 0.0, 0.5])).norm() < 1e-9);
        let scaled = NonUniquenessCertificate {
            m: &cert.m * 2.0,
            eps_hat: cert.eps_hat / 2.0,
            ..cert.clone()
        };
        assert!((second_solution(&xbar, &scaled).unwrap() - &xhat).norm() < 1e-12);
        let broken = NonUniquenessCertificate {
            m: m(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            ..cert
        };
        assert!(matches!(second_solution(&xbar, &broken), Err(Error::InvalidCertificate(_))));
    }

    #[test]
    fn extract_certificate_examples() {
        let xbar = m(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let xhat = m(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let cert = extract_certificate(&xbar, &xhat, 1e-8).unwrap();
        assert!((&cert.m - m(2, 2, &[-1.0, 0.0, 0.0, 1.0])).norm() < 1e-12);
        assert!((cert.r_block[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!(cert.eps_hat >= 1.0 - 1e-9);

        let xbar = m(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let xhat = m(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let cert = extract_certificate(&xbar, &xhat, 1e-8).unwrap();
        assert_eq!(cert.r_block.shape(), (0, 0));
        // frame of diag(2,1) is the identity
        assert!((&cert.m - m(2, 2, &[-1.0, 0.0, 0.0, 1.0])).norm() < 1e-12);
        assert!(matches!(extract_certificate(&xbar, &xbar, 1e-8), Err(Error::NotFlat)));
        let opposite = -&xbar;
        assert!(extract_certificate(&xbar, &opposite, 1e-8).is_err());
    }

    #[test]
    fn search_examples() {
        let op = LinearOperatorSpec::counterexample();
        let xbar = crate::operators::counterexample_point();
        let out = kernel_w_search(&op, &xbar, &SearchConfig::default()).unwrap();
        assert!(matches!(out, SearchOutcome::NoneFoundExhaustive { kernel_dim: 1 }));

        let trace = sampling::trace_instance(2);
        let out = kernel_w_search(&trace.op, &xbar, &SearchConfig::default()).unwrap();
        match out {
            SearchOutcome::FoundNonzero { direction, residual, .. } => {
                let target = m(2, 2, &[-1.0, 0.0, 0.0, 1.0]) / 2f64.sqrt();
                assert!((direction.dot(&target).abs() - 1.0).abs() < 1e-8, "{direction}");
                assert!(residual <= 1e-8);
            }
            other => panic!("expected a flat direction, got {other:?}"),
        }

        let full = LinearOperatorSpec::full_mask(2, 2).unwrap();
        let out = kernel_w_search(&full, &xbar, &SearchConfig::default()).unwrap();
        assert!(matches!(out, SearchOutcome::NoneFoundExhaustive { kernel_dim: 0 }));
    }

    #[test]
    fn search_finds_planted_directions() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for extra in [0, 1, 3] {
            let inst = sampling::planted_nonunique(&mut rng, 4, 3, 1, extra);
            let out = kernel_w_search(&inst.instance.op, &inst.xbar, &SearchConfig::default()).unwrap();
            assert!(out.is_found(), "kernel extra {extra}: {out:?}");
        }
    }
}
