//! Dense linear-algebra kernels used by the estimation stages: a
//! symmetric-definite generalized eigensolver, SVD-based rank-1 Kronecker
//! factorization, and greedy pivoted incomplete Cholesky decomposition.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Which end of the spectrum a generalized eigensolve should return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenSelect {
    Largest,
    Smallest,
}

/// A symmetric matrix pencil `A v = rho B v` with a selection policy.
///
/// `a` must be symmetric and `b` symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct GevProblem {
    pub a: Matrix,
    pub b: Matrix,
    pub select: EigenSelect,
}

/// One eigenpair of a [`GevProblem`]; the eigenvector has unit Euclidean
/// norm and its first nonzero component is positive.
#[derive(Debug, Clone)]
pub struct GevSolution {
    pub eigenvalue: f64,
    pub eigenvector: Vector,
}

impl GevProblem {
    pub fn new(a: Matrix, b: Matrix, select: EigenSelect) -> Result<Self> {
        if !a.is_square() || !b.is_square() || a.nrows() != b.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "pencil blocks must be square and equally sized, got {}x{} and {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        if a.is_empty() {
            return Err(Error::Empty("pencil"));
        }
        if a.iter().any(|x| !x.is_finite()) || b.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("generalized eigenvalue pencil"));
        }
        check_symmetric(&a)?;
        check_symmetric(&b)?;
        Ok(Self { a, b, select })
    }
}

fn check_symmetric(m: &Matrix) -> Result<()> {
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::NotSymmetric);
            }
        }
    }
    Ok(())
}

/// Flip `v` so that its first non-negligible component is positive.
///
/// Eigenvectors are defined up to sign; fixing the sign makes results
/// reproducible across runs and platforms.
pub(crate) fn fix_sign(v: &mut Vector) {
    let scale = v.amax();
    if scale == 0.0 {
        return;
    }
    for k in 0..v.len() {
        if v[k].abs() > 1e-12 * scale {
            if v[k] < 0.0 {
                *v = -&*v;
            }
            return;
        }
    }
}

/// Solves the symmetric-definite pencil `A v = rho B v`.
///
/// The pencil is reduced to a standard symmetric problem through the
/// Cholesky factor of `B`; if `B` is numerically singular a jitter of
/// `1e-12 * trace(B)/dim` is added to its diagonal before giving up.
pub fn solve_gev(problem: &GevProblem) -> Result<GevSolution> {
    let n = problem.a.nrows();
    let chol = match nalgebra::Cholesky::new(problem.b.clone()) {
        Some(c) => c,
        None => {
            let eps = 1e-12 * problem.b.trace() / n as f64;
            let jittered = &problem.b + Matrix::identity(n, n) * eps;
            nalgebra::Cholesky::new(jittered).ok_or(Error::SingularPencil)?
        }
    };
    let l = chol.l();

    // C = L^{-1} A L^{-T}, computed by two triangular solves.
    let t = l
        .solve_lower_triangular(&problem.a)
        .ok_or(Error::SingularPencil)?;
    let c = l
        .solve_lower_triangular(&t.transpose())
        .ok_or(Error::SingularPencil)?;
    let c = (&c + c.transpose()) * 0.5;

    let eigen = nalgebra::SymmetricEigen::new(c);
    let idx = match problem.select {
        EigenSelect::Largest => eigen
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("nonempty spectrum"),
        EigenSelect::Smallest => eigen
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("nonempty spectrum"),
    };
    let rho = eigen.eigenvalues[idx];
    let u = eigen.eigenvectors.column(idx).into_owned();

    // Map back: v = L^{-T} u.
    let mut v = l
        .transpose()
        .solve_upper_triangular(&u)
        .ok_or(Error::SingularPencil)?;
    let norm = v.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::SingularPencil);
    }
    v /= norm;
    fix_sign(&mut v);
    Ok(GevSolution {
        eigenvalue: rho,
        eigenvector: v,
    })
}

/// Factors `v` (length `rows * cols`) into the nearest Kronecker product
/// `h ⊗ alpha` with `h` of length `rows` and `alpha` of length `cols`.
///
/// Element `v[l*cols + m]` corresponds to `h[l] * alpha[m]`, so the
/// row-major `rows x cols` reshaping of `v` is the rank-1 matrix
/// `h alpha^T`; the leading singular pair is the Frobenius-nearest such
/// factorization. `h` is returned with unit norm (scale carried by
/// `alpha`) and with its first nonzero component positive.
pub fn nearest_kronecker_rank1(v: &Vector, rows: usize, cols: usize) -> Result<(Vector, Vector)> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} cannot reshape to {}x{}",
            v.len(),
            rows,
            cols
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("rank-1 factorization input"));
    }
    if v.amax() == 0.0 {
        return Err(Error::DegenerateRankOne);
    }
    let b = Matrix::from_fn(rows, cols, |i, j| v[i * cols + j]);
    let svd = nalgebra::SVD::new(b, true, true);
    let (u, v_t) = (
        svd.u.ok_or(Error::DegenerateRankOne)?,
        svd.v_t.ok_or(Error::DegenerateRankOne)?,
    );
    let lead = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("nonempty singular values");
    let sigma = svd.singular_values[lead];
    if sigma == 0.0 {
        return Err(Error::DegenerateRankOne);
    }
    let mut h = u.column(lead).into_owned();
    let mut alpha = v_t.row(lead).transpose() * sigma;
    // Keep h ⊗ alpha unchanged while normalizing the sign of h.
    let before = h.clone();
    fix_sign(&mut h);
    if (&h - &before).amax() != 0.0 {
        alpha = -alpha;
    }
    Ok((h, alpha))
}

/// Greedy pivoted incomplete Cholesky decomposition of a kernel matrix.
///
/// `kernel(i, j)` evaluates the (symmetric PSD) kernel matrix entry on
/// demand. Columns are added, pivoting on the largest remaining diagonal,
/// until the residual trace drops to `precision`; the result `G` (n x M,
/// M <= n) satisfies `K ≈ G G^T` with the approximation error controlled
/// by the residual trace.
pub fn incomplete_cholesky<F>(kernel: F, n: usize, precision: f64) -> Result<Matrix>
where
    F: Fn(usize, usize) -> f64,
{
    if n == 0 {
        return Err(Error::Empty("kernel matrix"));
    }
    if !(precision > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "icd precision must be positive, got {precision}"
        )));
    }
    let mut diag: Vec<f64> = (0..n).map(|i| kernel(i, i)).collect();
    if diag.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("kernel diagonal"));
    }
    let trace0: f64 = diag.iter().sum();
    let neg_tol = -1e-10 * trace0.abs().max(f64::MIN_POSITIVE);
    let mut cols: Vec<Vector> = Vec::new();
    let mut residual = trace0;

    while residual > precision && cols.len() < n {
        let (pivot, &dp) = diag
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty diagonal");
        if dp <= 0.0 {
            break;
        }
        let sp = dp.sqrt();
        let mut col = Vector::zeros(n);
        for i in 0..n {
            let mut s = kernel(i, pivot);
            for c in &cols {
                s -= c[i] * c[pivot];
            }
            col[i] = s / sp;
        }
        col[pivot] = sp;
        for i in 0..n {
            diag[i] -= col[i] * col[i];
        }
        diag[pivot] = 0.0;
        let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if dmin < neg_tol {
            return Err(Error::NotPsd { residual: dmin });
        }
        residual = diag.iter().sum();
        cols.push(col);
    }

    let m = cols.len();
    Ok(Matrix::from_fn(n, m, |i, j| cols[j][i]))
}
