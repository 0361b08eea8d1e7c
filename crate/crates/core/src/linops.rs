//! Dense matrix operators: vectorization maps, Kronecker products, block
//! diagonals, spectra and least-squares solves.
//!
//! Vectorization conventions:
//!
//! * `vec` stacks columns top to bottom.
//! * `vecs` scans the upper triangle row by row and doubles off-diagonal
//!   entries: `[p11, 2p12, .., 2p1m, p22, 2p23, .., pmm]`.
//! * `vecv` lists the quadratic monomials in the same order:
//!   `[v1², v1v2, .., v1vn, v2², .., vn²]`.
//!
//! With these, `vecv(v)ᵀ vecs(P) = vᵀ P v` for every symmetric `P`.

use std::ops::Deref;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Strict margin for Hurwitz tests: every eigenvalue must satisfy `Re λ < -TOL_HURWITZ`.
pub const TOL_HURWITZ: f64 = 1e-10;
/// Singular values below `σ_max · RANK_RTOL` count as zero.
pub const RANK_RTOL: f64 = 1e-10;
/// Relative asymmetry accepted by [`SymMatrix::new`].
pub const SYM_RTOL: f64 = 1e-12;

/// A real symmetric matrix.
///
/// Construction symmetrizes `(P + Pᵀ)/2` after checking that the input is
/// symmetric to within [`SYM_RTOL`] relative.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        Self::with_tolerance(m, SYM_RTOL)
    }

    pub fn with_tolerance(m: Matrix, rtol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim(
                "SymMatrix",
                format!("expected square, got {}x{}", m.nrows(), m.ncols()),
            ));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let asym = (&m - m.transpose()).amax() / scale;
        if asym > rtol {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        Ok(Self::symmetrize(m))
    }

    /// Symmetrize without checking. Used where symmetry holds up to rounding
    /// by construction (Riccati/Lyapunov updates).
    pub fn symmetrize(m: Matrix) -> Self {
        let s = (&m + m.transpose()) * 0.5;
        SymMatrix(s)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(Matrix::identity(n, n))
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        SymMatrix(Matrix::identity(n, n) * s)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.0.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn is_positive_definite(&self) -> bool {
        self.0.clone().cholesky().is_some() && self.min_eigenvalue() > 0.0
    }
}

impl Deref for SymMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// Column stacking.
pub fn vec(m: &Matrix) -> Vector {
    // nalgebra storage is column-major
    Vector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &[f64], rows: usize, cols: usize) -> Result<Matrix> {
    if v.len() != rows * cols {
        return Err(Error::dim(
            "unvec",
            format!("length {} != {rows}x{cols}", v.len()),
        ));
    }
    Ok(Matrix::from_column_slice(rows, cols, v))
}

pub fn half_vec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Upper-triangular scan with doubled off-diagonal entries.
pub fn vecs(p: &SymMatrix) -> Vector {
    let n = p.dim();
    let mut out = Vector::zeros(half_vec_len(n));
    let mut k = 0;
    for i in 0..n {
        out[k] = p[(i, i)];
        k += 1;
        for j in i + 1..n {
            out[k] = 2.0 * p[(i, j)];
            k += 1;
        }
    }
    out
}

/// [`vecs`] on a plain matrix, rejecting asymmetric input.
pub fn vecs_checked(p: &Matrix) -> Result<Vector> {
    Ok(vecs(&SymMatrix::new(p.clone())?))
}

/// Inverse of [`vecs`].
pub fn from_vecs(h: &[f64]) -> Result<SymMatrix> {
    let len = h.len();
    // solve n(n+1)/2 = len
    let n = (((8 * len + 1) as f64).sqrt() as usize - 1) / 2;
    if half_vec_len(n) != len {
        return Err(Error::dim("from_vecs", format!("{len} is not triangular")));
    }
    let mut m = Matrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        m[(i, i)] = h[k];
        k += 1;
        for j in i + 1..n {
            m[(i, j)] = 0.5 * h[k];
            m[(j, i)] = 0.5 * h[k];
            k += 1;
        }
    }
    Ok(SymMatrix(m))
}

/// Quadratic monomials of `v` in `vecs` order.
pub fn vecv(v: &[f64]) -> Vector {
    let n = v.len();
    let mut out = Vector::zeros(half_vec_len(n));
    vecv_into(v, out.as_mut_slice());
    out
}

/// Allocation-free [`vecv`]; `out` must have length `n(n+1)/2`.
pub fn vecv_into(v: &[f64], out: &mut [f64]) {
    let n = v.len();
    debug_assert_eq!(out.len(), half_vec_len(n));
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            out[k] = v[i] * v[j];
            k += 1;
        }
    }
}

/// Kronecker product; `(p·m) × (q·n)` for `a: p×q`, `b: m×n`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Block-diagonal assembly.
pub fn bdiag(blocks: &[Matrix]) -> Result<Matrix> {
    if blocks.is_empty() {
        return Err(Error::dim("bdiag", "no blocks"));
    }
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    Ok(out)
}

fn require_square(a: &Matrix, context: &'static str) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::dim(
            context,
            format!("expected square, got {}x{}", a.nrows(), a.ncols()),
        ))
    }
}

/// Complex spectrum of a real square matrix.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<Complex<f64>>> {
    require_square(a, "eigenvalues")?;
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("eigenvalues of non-finite matrix".into()));
    }
    Ok(a.complex_eigenvalues().iter().copied().collect())
}

pub fn max_real_eigenvalue(a: &Matrix) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// True iff every eigenvalue has real part below `-TOL_HURWITZ`.
pub fn is_hurwitz(a: &Matrix) -> Result<bool> {
    Ok(max_real_eigenvalue(a)? < -TOL_HURWITZ)
}

pub fn singular_values(m: &Matrix) -> Vector {
    m.clone().svd(false, false).singular_values
}

/// Induced 2-norm.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).max()
}

fn rank_from_singular(sv: impl Iterator<Item = f64> + Clone) -> usize {
    let smax = sv.clone().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.filter(|s| *s > smax * RANK_RTOL).count()
}

/// Numerical rank with the [`RANK_RTOL`] threshold.
pub fn rank(m: &Matrix) -> usize {
    if m.is_empty() {
        return 0;
    }
    rank_from_singular(singular_values(m).iter().copied())
}

/// Numerical rank of a complex matrix (PBH tests).
pub fn rank_complex(m: &DMatrix<Complex<f64>>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    rank_from_singular(sv.iter().copied())
}

/// Embed a real matrix into the complex field.
pub fn complexify(m: &Matrix) -> DMatrix<Complex<f64>> {
    m.map(|x| Complex::new(x, 0.0))
}

/// Reusable least-squares factorization of a tall matrix.
///
/// Columns are equilibrated to unit norm before an SVD; rank is judged on the
/// equilibrated matrix so that the wide dynamic range between data columns
/// does not masquerade as rank loss. The pseudo-inverse is never formed from
/// the normal equations.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    u_t: Matrix,
    inv_sigma: Vector,
    v: Matrix,
    col_scale: Vector,
    rank: usize,
    nrows: usize,
}

impl LeastSquares {
    pub fn new(m: &Matrix) -> Result<Self> {
        let (nrows, ncols) = m.shape();
        if nrows == 0 || ncols == 0 {
            return Err(Error::dim("lstsq", "empty matrix"));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("least squares on non-finite matrix".into()));
        }
        let col_scale = Vector::from_iterator(
            ncols,
            m.column_iter().map(|c| {
                let nrm = c.norm();
                if nrm > 0.0 {
                    1.0 / nrm
                } else {
                    1.0
                }
            }),
        );
        let mut scaled = m.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= col_scale[j];
        }
        let svd = scaled.svd(true, true);
        let sv = &svd.singular_values;
        let rank = rank_from_singular(sv.iter().copied());
        let required = ncols;
        if rank < required {
            return Err(Error::RankDeficient {
                rank,
                required,
                context: None,
            });
        }
        let u = svd.u.expect("svd computed with u");
        let v_t = svd.v_t.expect("svd computed with v_t");
        Ok(LeastSquares {
            u_t: u.transpose(),
            inv_sigma: sv.map(|s| 1.0 / s),
            v: v_t.transpose(),
            col_scale,
            rank,
            nrows,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        if rhs.nrows() != self.nrows {
            return Err(Error::dim(
                "lstsq",
                format!("rhs has {} rows, expected {}", rhs.nrows(), self.nrows),
            ));
        }
        let mut y = &self.u_t * rhs;
        for (i, mut row) in y.row_iter_mut().enumerate() {
            row *= self.inv_sigma[i];
        }
        let mut x = &self.v * y;
        for (i, mut row) in x.row_iter_mut().enumerate() {
            row *= self.col_scale[i];
        }
        Ok(x)
    }

    /// Orthogonal projection of `rhs` onto the range of the matrix.
    pub fn project(&self, rhs: &Vector) -> Vector {
        self.u_t.transpose() * (&self.u_t * rhs)
    }

    pub fn solve_vec(&self, rhs: &Vector) -> Result<Vector> {
        let m = Matrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
        Ok(self.solve(&m)?.column(0).into_owned())
    }
}

/// Numerical rank after scaling every nonzero column to unit norm.
pub fn equilibrated_rank(m: &Matrix) -> usize {
    let mut scaled = m.clone();
    for mut col in scaled.column_iter_mut() {
        let nrm = col.norm();
        if nrm > 0.0 {
            col /= nrm;
        }
    }
    rank(&scaled)
}

/// Minimizer of `‖M·Z − rhs‖_F` for full-column-rank `M`.
pub fn lstsq(m: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    LeastSquares::new(m)?.solve(rhs)
}

/// Solve `Aᵀ P + P A + Q = 0` through the vectorized `n² × n²` system.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<SymMatrix> {
    require_square(a, "solve_lyapunov")?;
    let n = a.nrows();
    if q.shape() != (n, n) {
        return Err(Error::dim("solve_lyapunov", "Q shape"));
    }
    let eye = Matrix::identity(n, n);
    // vec(AᵀP + PA) = (I⊗Aᵀ + Aᵀ⊗I) vec(P)
    let op = kron(&eye, &a.transpose()) + kron(&a.transpose(), &eye);
    let rhs = -vec(q);
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular Lyapunov operator".into()))?;
    if sol.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite Lyapunov solution".into()));
    }
    Ok(SymMatrix::symmetrize(unvec(sol.as_slice(), n, n)?))
}

/// Outcome of [`constrained_quadratic_min`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedMin {
    pub z: Vector,
    /// Dimension of the feasible affine set (0 when the constraints pin `z`).
    pub free_dims: usize,
}

/// Minimize `(Hz + h)ᵀ W (Hz + h)` over `{z : Mz = r}`.
///
/// The feasible set is parametrized as `z_p + Nα` with `N` a null-space
/// basis of `M`; when `M` has full column rank the objective plays no role.
pub fn constrained_quadratic_min(
    m: &Matrix,
    r: &Vector,
    h: &Matrix,
    h0: &Vector,
    w: &Matrix,
) -> Result<ConstrainedMin> {
    let (rows, cols) = m.shape();
    if r.len() != rows || h.ncols() != cols || h0.len() != h.nrows() || w.shape() != (h.nrows(), h.nrows())
    {
        return Err(Error::dim("constrained_quadratic_min", "operand shapes"));
    }
    let scale = Vector::from_iterator(
        cols,
        m.column_iter().map(|c| {
            let nrm = c.norm();
            if nrm > 0.0 {
                1.0 / nrm
            } else {
                1.0
            }
        }),
    );
    // pad to at least square so the SVD exposes the whole null space
    let mut padded = Matrix::zeros(rows.max(cols), cols);
    padded.view_mut((0, 0), (rows, cols)).copy_from(m);
    for (j, mut col) in padded.column_iter_mut().enumerate() {
        col *= scale[j];
    }
    let padded_rows = padded.nrows();
    let svd = padded.svd(true, true);
    let sv = &svd.singular_values;
    let rank = rank_from_singular(sv.iter().copied());
    let smax = sv.max();
    let u = svd.u.as_ref().expect("svd computed with u");
    let v = svd.v_t.as_ref().expect("svd computed with v_t").transpose();

    let mut r_pad = Vector::zeros(padded_rows);
    r_pad.rows_mut(0, rows).copy_from(r);
    let ur = u.transpose() * &r_pad;
    let mut zs = Vector::zeros(cols);
    let mut null_cols = Vec::new();
    for (i, &s) in sv.iter().enumerate() {
        if s > smax * RANK_RTOL {
            zs += v.column(i) * (ur[i] / s);
        } else {
            null_cols.push(i);
        }
    }
    let z_p = zs.component_mul(&scale);
    let miss = (m * &z_p - r).norm();
    if miss > 1e-8 * (1.0 + r.norm()) {
        return Err(Error::Assumption(format!(
            "linear constraints are inconsistent (residual {miss:.3e})"
        )));
    }
    let free_dims = cols - rank;
    if free_dims == 0 {
        return Ok(ConstrainedMin { z: z_p, free_dims });
    }
    let mut n = Matrix::zeros(cols, null_cols.len());
    for (k, &i) in null_cols.iter().enumerate() {
        n.set_column(k, &v.column(i).component_mul(&scale));
    }
    let hn = h * &n;
    let gram = hn.transpose() * w * &hn;
    let lin = hn.transpose() * w * (h * &z_p + h0);
    let alpha = gram
        .lu()
        .solve(&(-lin))
        .ok_or_else(|| Error::Numerical("objective is not definite on the feasible set".into()))?;
    Ok(ConstrainedMin {
        z: z_p + n * alpha,
        free_dims,
    })
}
