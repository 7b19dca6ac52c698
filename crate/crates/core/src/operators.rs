//! Linear measurement maps from `R^{n x p}` into a flat codomain `R^m`.
//!
//! Every operator can be matricized as an `m x (n p)` matrix acting on the
//! row-major vectorization of its input; kernel and adjoint-range bases are
//! read off the SVD of that matrix.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// Singular-value cutoff, relative to the largest, for kernel/range splits.
pub const OPERATOR_RANK_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    /// `m x (n p)` matrix applied to `vec(X)`.
    Dense { matrix: Matrix },
    /// Selects the listed entries (0-based `(row, col)`), in order.
    EntryMask { indices: Vec<(usize, usize)> },
    /// `X -> A X` with `A` of shape `q x n`, flattened row-major.
    LeftMul { a: Matrix },
    /// The fixed 2x2 instance `X -> [B X, (X - X^T)/2]`, `B = [[1,1],[0,0]]`.
    /// The codomain is `R^8`: `B X` row-major, then the skew part row-major.
    Counterexample,
    /// Codomains concatenated in order.
    Stacked { parts: Vec<LinearOperatorSpec> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperatorSpec {
    kind: OperatorKind,
    n: usize,
    p: usize,
    m: usize,
}

fn counterexample_b() -> Matrix {
    Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0])
}

impl LinearOperatorSpec {
    pub fn dense(n: usize, p: usize, matrix: Matrix) -> Result<Self> {
        check_dims(n, p)?;
        if matrix.ncols() != n * p {
            return Err(Error::Shape(format!(
                "dense payload has {} columns, expected n*p = {}",
                matrix.ncols(),
                n * p
            )));
        }
        if matrix.nrows() == 0 {
            return Err(Error::InvalidArgument("operator codomain must have m >= 1".into()));
        }
        linalg::ensure_finite(&matrix, "dense operator")?;
        let m = matrix.nrows();
        Ok(Self {
            kind: OperatorKind::Dense { matrix },
            n,
            p,
            m,
        })
    }

    /// Entry selection with 0-based indices.
    pub fn entry_mask(n: usize, p: usize, indices: Vec<(usize, usize)>) -> Result<Self> {
        check_dims(n, p)?;
        if indices.is_empty() {
            return Err(Error::InvalidArgument("entry mask must select at least one entry".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for &(i, j) in &indices {
            if i >= n || j >= p {
                return Err(Error::InvalidArgument(format!(
                    "mask index ({}, {}) outside {n}x{p}",
                    i + 1,
                    j + 1
                )));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidArgument(format!("duplicate mask index ({}, {})", i + 1, j + 1)));
            }
        }
        let m = indices.len();
        Ok(Self {
            kind: OperatorKind::EntryMask { indices },
            n,
            p,
            m,
        })
    }

    /// Selects every entry; the identity on `vec(X)`.
    pub fn full_mask(n: usize, p: usize) -> Result<Self> {
        let idx = (0..n).flat_map(|i| (0..p).map(move |j| (i, j))).collect();
        Self::entry_mask(n, p, idx)
    }

    pub fn left_mul(p: usize, a: Matrix) -> Result<Self> {
        let n = a.ncols();
        check_dims(n, p)?;
        if a.nrows() == 0 {
            return Err(Error::InvalidArgument("left factor needs at least one row".into()));
        }
        linalg::ensure_finite(&a, "left factor")?;
        let m = a.nrows() * p;
        Ok(Self {
            kind: OperatorKind::LeftMul { a },
            n,
            p,
            m,
        })
    }

    pub fn counterexample() -> Self {
        Self {
            kind: OperatorKind::Counterexample,
            n: 2,
            p: 2,
            m: 8,
        }
    }

    /// The trace functional `X -> tr X` on square `n x n` matrices.
    pub fn trace_functional(n: usize) -> Result<Self> {
        let eye = Matrix::identity(n, n);
        let row = linalg::vec_rows(&eye);
        Self::dense(n, n, Matrix::from_row_slice(1, n * n, row.as_slice()))
    }

    pub fn stacked(parts: Vec<LinearOperatorSpec>) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("stacked operator needs at least one part".into()))?;
        let (n, p) = (first.n, first.p);
        if let Some(bad) = parts.iter().find(|q| q.n != n || q.p != p) {
            return Err(Error::Shape(format!(
                "stacked parts disagree on domain: {n}x{p} vs {}x{}",
                bad.n, bad.p
            )));
        }
        let m = parts.iter().map(|q| q.m).sum();
        Ok(Self {
            kind: OperatorKind::Stacked { parts },
            n,
            p,
            m,
        })
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            OperatorKind::Dense { .. } => "dense",
            OperatorKind::EntryMask { .. } => "entry_mask",
            OperatorKind::LeftMul { .. } => "left_mul",
            OperatorKind::Counterexample => "counterexample",
            OperatorKind::Stacked { .. } => "stacked",
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.shape() != (self.n, self.p) {
            return Err(Error::Shape(format!(
                "operator expects {}x{}, got {}x{}",
                self.n,
                self.p,
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, x: &Matrix) -> Result<Vector> {
        self.check_input(x)?;
        Ok(self.apply_unchecked(x))
    }

    fn apply_unchecked(&self, x: &Matrix) -> Vector {
        match &self.kind {
            OperatorKind::Dense { matrix } => matrix * linalg::vec_rows(x),
            OperatorKind::EntryMask { indices } => Vector::from_iterator(indices.len(), indices.iter().map(|&(i, j)| x[(i, j)])),
            OperatorKind::LeftMul { a } => linalg::vec_rows(&(a * x)),
            OperatorKind::Counterexample => {
                let first = linalg::vec_rows(&(counterexample_b() * x));
                let second = linalg::vec_rows(&linalg::skew(x));
                Vector::from_iterator(8, first.iter().chain(second.iter()).copied())
            }
            OperatorKind::Stacked { parts } => {
                let mut out = Vec::with_capacity(self.m);
                for part in parts {
                    out.extend(part.apply_unchecked(x).iter().copied());
                }
                Vector::from_vec(out)
            }
        }
    }

    pub fn adjoint(&self, y: &Vector) -> Result<Matrix> {
        if y.len() != self.m {
            return Err(Error::Shape(format!("adjoint expects length {}, got {}", self.m, y.len())));
        }
        Ok(self.adjoint_unchecked(y))
    }

    fn adjoint_unchecked(&self, y: &Vector) -> Matrix {
        let (n, p) = (self.n, self.p);
        match &self.kind {
            OperatorKind::Dense { matrix } => linalg::unvec_rows(&(matrix.transpose() * y), n, p),
            OperatorKind::EntryMask { indices } => {
                let mut out = Matrix::zeros(n, p);
                for (&(i, j), v) in indices.iter().zip(y.iter()) {
                    out[(i, j)] = *v;
                }
                out
            }
            OperatorKind::LeftMul { a } => {
                let yq = linalg::unvec_rows(y, a.nrows(), p);
                a.transpose() * yq
            }
            OperatorKind::Counterexample => {
                let first = linalg::unvec_rows(&y.rows(0, 4).into_owned(), 2, 2);
                let second = linalg::unvec_rows(&y.rows(4, 4).into_owned(), 2, 2);
                counterexample_b().transpose() * first + linalg::skew(&second)
            }
            OperatorKind::Stacked { parts } => {
                let mut out = Matrix::zeros(n, p);
                let mut offset = 0;
                for part in parts {
                    let seg = y.rows(offset, part.m).into_owned();
                    out += part.adjoint_unchecked(&seg);
                    offset += part.m;
                }
                out
            }
        }
    }

    /// The `m x (n p)` matrix of the operator on row-major `vec(X)`.
    pub fn matricize(&self) -> Matrix {
        if let OperatorKind::Dense { matrix } = &self.kind {
            return matrix.clone();
        }
        let np = self.n * self.p;
        let mut out = Matrix::zeros(self.m, np);
        let mut basis = Vector::zeros(np);
        for k in 0..np {
            basis[k] = 1.0;
            let e = linalg::unvec_rows(&basis, self.n, self.p);
            out.set_column(k, &self.apply_unchecked(&e));
            basis[k] = 0.0;
        }
        out
    }

    /// Orthonormal bases of `rge A*` and `ker A`, as matrices.
    pub fn bases(&self) -> OperatorBases {
        let (range, kernel) = linalg::row_and_null_space(&self.matricize(), OPERATOR_RANK_CUTOFF);
        let to_mats = |cols: &Matrix| -> Vec<Matrix> {
            (0..cols.ncols())
                .map(|j| linalg::unvec_rows(&cols.column(j).into_owned(), self.n, self.p))
                .collect()
        };
        OperatorBases {
            range: to_mats(&range),
            kernel: to_mats(&kernel),
        }
    }

    pub fn kernel_basis(&self) -> Vec<Matrix> {
        self.bases().kernel
    }

    pub fn range_adjoint_basis(&self) -> Vec<Matrix> {
        self.bases().range
    }

    /// Largest singular value of the matricized operator.
    pub fn op_norm(&self) -> f64 {
        linalg::op_norm(&self.matricize())
    }

    /// The operator on `R^{n x n}` that acts as `self` on the first `p`
    /// columns and ignores the rest.
    pub fn lift_padded(&self) -> Result<Self> {
        let (n, p) = (self.n, self.p);
        if n < p {
            return Err(Error::Shape(format!("lift_padded needs n >= p, got {n}x{p}")));
        }
        if n == p {
            return Ok(self.clone());
        }
        match &self.kind {
            OperatorKind::EntryMask { indices } => Self::entry_mask(n, n, indices.clone()),
            OperatorKind::Stacked { parts } => Self::stacked(parts.iter().map(|q| q.lift_padded()).collect::<Result<_>>()?),
            // `A [X Y]` would also constrain the padding, so left factors lift to dense.
            OperatorKind::Dense { .. } | OperatorKind::LeftMul { .. } => {
                let base = self.matricize();
                let mut lifted = Matrix::zeros(self.m, n * n);
                for i in 0..n {
                    for j in 0..p {
                        lifted.set_column(i * n + j, &base.column(i * p + j));
                    }
                }
                Self::dense(n, n, lifted)
            }
            OperatorKind::Counterexample => unreachable!("counterexample is square"),
        }
    }

    /// `X' -> A(X'^T)` on `R^{p x n}`, as a dense operator.
    pub fn transposed(&self) -> Result<Self> {
        let (n, p) = (self.n, self.p);
        let base = self.matricize();
        let mut out = Matrix::zeros(self.m, n * p);
        // entry (j, i) of X' is entry (i, j) of X
        for i in 0..n {
            for j in 0..p {
                out.set_column(j * n + i, &base.column(i * p + j));
            }
        }
        Self::dense(p, n, out)
    }
}

fn check_dims(n: usize, p: usize) -> Result<()> {
    if n == 0 || p == 0 {
        return Err(Error::Shape(format!("operator domain must be nonempty, got {n}x{p}")));
    }
    Ok(())
}

/// Orthonormal bases of the adjoint range and the kernel.
#[derive(Debug, Clone)]
pub struct OperatorBases {
    pub range: Vec<Matrix>,
    pub kernel: Vec<Matrix>,
}

impl OperatorBases {
    /// Coordinates of `x` along the kernel basis.
    pub fn kernel_coords(&self, x: &Matrix) -> Vector {
        Vector::from_iterator(self.kernel.len(), self.kernel.iter().map(|k| k.dot(x)))
    }

    /// Orthogonal projection onto `ker A`.
    pub fn project_kernel(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.nrows(), x.ncols());
        for k in &self.kernel {
            out += k * k.dot(x);
        }
        out
    }
}

/// An affine (`lambda = None`) or regularized nuclear-norm problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub op: LinearOperatorSpec,
    pub b: Vector,
    pub lambda: Option<f64>,
}

impl ProblemInstance {
    pub fn new(op: LinearOperatorSpec, b: Vector, lambda: Option<f64>) -> Result<Self> {
        if b.len() != op.m() {
            return Err(Error::Shape(format!("b has length {}, operator codomain is {}", b.len(), op.m())));
        }
        if !b.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("b"));
        }
        if let Some(l) = lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidArgument(format!("lambda must be positive, got {l}")));
            }
        }
        Ok(Self { op, b, lambda })
    }

    /// The built-in 2x2 instance with `b = A(diag(1, 0))`.
    pub fn counterexample() -> Self {
        let op = LinearOperatorSpec::counterexample();
        let b = op.apply_unchecked(&counterexample_point());
        Self { op, b, lambda: None }
    }
}

/// `diag(1, 0)`, the distinguished feasible point of the built-in instance.
pub fn counterexample_point() -> Matrix {
    Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])
}
