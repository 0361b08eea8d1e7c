//! Regulator equations `XE = AX + BU + D`, `CX + F = 0` and the feedforward
//! gain `L = U + KX`.

use crate::error::{Error, Result};
use crate::linops::{constrained_quadratic_min, kron, unvec, vec, Matrix, SymMatrix, Vector};
use crate::plant::regulator_ranks;

pub const REGULATOR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorSolution {
    pub x: Matrix,
    pub u: Matrix,
    /// `Tr(XᵀQ̄X + UᵀR̄U)`
    pub objective: f64,
    /// `‖XE − AX − BU − D‖/(1+‖D‖)` and `‖CX + F‖/(1+‖F‖)`
    pub residuals: (f64, f64),
    /// True when the equations alone determine `(X, U)`.
    pub unique: bool,
}

/// Relative residuals of the two regulator equations.
#[allow(clippy::too_many_arguments)]
pub fn regulator_residuals(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    e: &Matrix,
    f: &Matrix,
    x: &Matrix,
    u: &Matrix,
) -> (f64, f64) {
    let dyn_res = (x * e - a * x - b * u - d).norm() / (1.0 + d.norm());
    let out_res = (c * x + f).norm() / (1.0 + f.norm());
    (dyn_res, out_res)
}

/// Weighted objective `Tr(XᵀQ̄X + UᵀR̄U)`.
pub fn trace_objective(x: &Matrix, u: &Matrix, q_bar: &SymMatrix, r_bar: &SymMatrix) -> f64 {
    (x.transpose() * q_bar.as_matrix() * x).trace() + (u.transpose() * r_bar.as_matrix() * u).trace()
}

/// Solve the regulator equations, returning the trace-weighted minimizer when
/// the solution set is an affine family.
#[allow(clippy::too_many_arguments)]
pub fn solve_regulator(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    e: &Matrix,
    f: &Matrix,
    q_bar: &SymMatrix,
    r_bar: &SymMatrix,
) -> Result<RegulatorSolution> {
    let (n, m, p, q) = (a.nrows(), b.ncols(), c.nrows(), e.nrows());
    if a.ncols() != n
        || b.nrows() != n
        || c.ncols() != n
        || d.shape() != (n, q)
        || e.ncols() != q
        || f.shape() != (p, q)
        || q_bar.dim() != n
        || r_bar.dim() != m
    {
        return Err(Error::dim("solve_regulator", "operand shapes"));
    }
    if !q_bar.is_positive_definite() || !r_bar.is_positive_definite() {
        return Err(Error::Assumption(
            "regulator weights must be positive definite".into(),
        ));
    }
    let bad: Vec<String> = regulator_ranks(a, b, c, e)?
        .into_iter()
        .filter(|r| r.rank < r.required)
        .map(|r| {
            format!(
                "rank [A - λI, B; C, 0] = {} < {} at λ = {:.4}{:+.4}i",
                r.rank, r.required, r.lambda.re, r.lambda.im
            )
        })
        .collect();
    if !bad.is_empty() {
        return Err(Error::Assumption(format!(
            "regulator equations not solvable: {}",
            bad.join("; ")
        )));
    }

    let (nx, nu) = (n * q, m * q);
    let iq = Matrix::identity(q, q);
    let mut sys = Matrix::zeros(nx + p * q, nx + nu);
    let sylv = kron(&e.transpose(), &Matrix::identity(n, n)) - kron(&iq, a);
    sys.view_mut((0, 0), (nx, nx)).copy_from(&sylv);
    sys.view_mut((0, nx), (nx, nu)).copy_from(&(-kron(&iq, b)));
    sys.view_mut((nx, 0), (p * q, nx)).copy_from(&kron(&iq, c));
    let mut rhs = Vector::zeros(nx + p * q);
    rhs.rows_mut(0, nx).copy_from(&vec(d));
    rhs.rows_mut(nx, p * q).copy_from(&(-vec(f)));

    let mut weight = Matrix::zeros(nx + nu, nx + nu);
    weight
        .view_mut((0, 0), (nx, nx))
        .copy_from(&kron(&iq, q_bar.as_matrix()));
    weight
        .view_mut((nx, nx), (nu, nu))
        .copy_from(&kron(&iq, r_bar.as_matrix()));
    let sol = constrained_quadratic_min(
        &sys,
        &rhs,
        &Matrix::identity(nx + nu, nx + nu),
        &Vector::zeros(nx + nu),
        &weight,
    )?;
    let x = unvec(&sol.z.as_slice()[..nx], n, q)?;
    let u = unvec(&sol.z.as_slice()[nx..], m, q)?;
    let residuals = regulator_residuals(a, b, c, d, e, f, &x, &u);
    if residuals.0 > REGULATOR_TOL || residuals.1 > REGULATOR_TOL {
        return Err(Error::Numerical(format!(
            "regulator residuals {:.3e}, {:.3e} exceed {REGULATOR_TOL:e}",
            residuals.0, residuals.1
        )));
    }
    Ok(RegulatorSolution {
        objective: trace_objective(&x, &u, q_bar, r_bar),
        x,
        u,
        residuals,
        unique: sol.free_dims == 0,
    })
}

/// `L = U + K X`.
pub fn feedforward_gain(u: &Matrix, k: &Matrix, x: &Matrix) -> Result<Matrix> {
    if k.ncols() != x.nrows() || u.nrows() != k.nrows() || u.ncols() != x.ncols() {
        return Err(Error::dim(
            "feedforward_gain",
            format!("U {:?}, K {:?}, X {:?}", u.shape(), k.shape(), x.shape()),
        ));
    }
    Ok(u + k * x)
}
