//! Model-based solvers for the continuous-time algebraic Riccati equation
//!
//! `AᵀP + PA + Q − P B R⁻¹ Bᵀ P = 0`.
//!
//! Three independent routes are provided: a direct solve through the matrix
//! sign function of the Hamiltonian, Kleinman policy iteration from a
//! stabilizing gain, and value iteration with diminishing steps that needs no
//! stabilizing initialization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{
    is_hurwitz, max_real_eigenvalue, solve_lyapunov, spectral_norm, Matrix, SymMatrix,
};
use crate::plant::{pbh_controllable, pbh_observable, sym_sqrt};

/// Stabilizing ARE solution with its gain.
#[derive(Debug, Clone, PartialEq)]
pub struct AreSolution {
    pub p: SymMatrix,
    pub k: Matrix,
    /// `‖Ric(P)‖_F / ‖Q‖_F`
    pub residual: f64,
}

fn check_shapes(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<()> {
    let n = a.nrows();
    let m = b.ncols();
    if !a.is_square() || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::dim(
            "riccati",
            format!(
                "A {:?}, B {:?}, Q {:?}, R {:?}",
                a.shape(),
                b.shape(),
                q.shape(),
                r.shape()
            ),
        ));
    }
    Ok(())
}

fn r_inverse(r: &SymMatrix) -> Result<Matrix> {
    let chol = r
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Assumption("R must be positive definite".into()))?;
    Ok(chol.inverse())
}

/// `AᵀP + PA + Q − P G P` with `G = B R⁻¹ Bᵀ`.
pub fn riccati_operator(a: &Matrix, g: &Matrix, q: &Matrix, p: &Matrix) -> Matrix {
    let pa = p * a;
    &pa + pa.transpose() + q - p * g * p
}

pub fn are_residual(a: &Matrix, b: &Matrix, q: &SymMatrix, r: &SymMatrix, p: &Matrix) -> Result<f64> {
    let g = b * r_inverse(r)? * b.transpose();
    let res = riccati_operator(a, &g, q, p);
    Ok(res.norm() / q.norm().max(f64::MIN_POSITIVE))
}

/// `K = R⁻¹ Bᵀ P`.
pub fn gain_from_value(b: &Matrix, r: &SymMatrix, p: &Matrix) -> Result<Matrix> {
    Ok(r_inverse(r)? * b.transpose() * p)
}

fn finish(a: &Matrix, b: &Matrix, q: &SymMatrix, r: &SymMatrix, p: SymMatrix) -> Result<AreSolution> {
    let k = gain_from_value(b, r, &p)?;
    let residual = are_residual(a, b, q, r, &p)?;
    Ok(AreSolution { p, k, residual })
}

fn matrix_sign(h: &Matrix) -> Result<Matrix> {
    let dim = h.nrows();
    let mut z = h.clone();
    for _ in 0..100 {
        let lu = z.clone().lu();
        let det = lu.determinant();
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::Numerical("Hamiltonian has imaginary-axis eigenvalues".into()))?;
        // determinant scaling accelerates the early Newton steps
        let c = if det.is_finite() && det != 0.0 {
            det.abs().powf(-1.0 / dim as f64)
        } else {
            1.0
        };
        let next = (&z * c + inv / c) * 0.5;
        let delta = (&next - &z).norm();
        let scale = next.norm();
        z = next;
        if !scale.is_finite() {
            break;
        }
        if delta <= 1e-13 * scale {
            return Ok(z);
        }
    }
    Err(Error::Numerical("matrix sign iteration did not converge".into()))
}

/// Direct stabilizing solution through the sign function of the Hamiltonian,
/// polished by Newton steps.
pub fn solve_are_exact(a: &Matrix, b: &Matrix, q: &SymMatrix, r: &SymMatrix) -> Result<AreSolution> {
    check_shapes(a, b, q, r)?;
    let n = a.nrows();
    let r_inv = r_inverse(r)?;
    if !pbh_controllable(a, b, false)? {
        return Err(Error::Assumption("(A, B) is not stabilizable".into()));
    }
    if !pbh_observable(&sym_sqrt(q), a)? {
        return Err(Error::Assumption("(A, sqrt(Q)) is not observable".into()));
    }
    let g = b * &r_inv * b.transpose();
    let mut h = Matrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q.as_matrix()));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    let w = matrix_sign(&h)?;

    // [W12; W22 + I] P = −[W11 + I; W21]
    let eye = Matrix::identity(n, n);
    let mut lhs = Matrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(w.view((n, n), (n, n)) + &eye));
    let mut rhs = Matrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(w.view((0, 0), (n, n)) + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w.view((n, 0), (n, n))));
    let p = crate::linops::lstsq(&lhs, &rhs)?;
    let mut sol = finish(a, b, q, r, SymMatrix::symmetrize(p))?;

    for _ in 0..4 {
        if sol.residual <= 1e-14 {
            break;
        }
        let closed = a - b * &sol.k;
        if !is_hurwitz(&closed)? {
            break;
        }
        let rhs = q.as_matrix() + sol.k.transpose() * r.as_matrix() * &sol.k;
        let p = solve_lyapunov(&closed, &rhs)?;
        let next = finish(a, b, q, r, p)?;
        if next.residual >= sol.residual {
            break;
        }
        sol = next;
    }
    let closed = a - b * &sol.k;
    if !is_hurwitz(&closed)? {
        return Err(Error::NotHurwitz {
            what: "A - B K*",
            max_real: max_real_eigenvalue(&closed)?,
        });
    }
    Ok(sol)
}

/// Iterates of Kleinman policy iteration.
#[derive(Debug, Clone)]
pub struct PolicyIterationTrace {
    /// `P_1, P_2, ...`
    pub values: Vec<SymMatrix>,
    /// `K_0, K_1, ...` (one more than `values`)
    pub gains: Vec<Matrix>,
    pub solution: AreSolution,
}

pub const PI_REL_TOL: f64 = 1e-10;
pub const PI_MAX_ITER: usize = 200;

/// Kleinman policy iteration from a stabilizing `k0`.
///
/// Each step solves `P_k (A − BK_{k−1}) + (A − BK_{k−1})ᵀ P_k + Q + K_{k−1}ᵀ R K_{k−1} = 0`
/// and sets `K_k = R⁻¹ Bᵀ P_k`.
pub fn kleinman_pi(
    a: &Matrix,
    b: &Matrix,
    q: &SymMatrix,
    r: &SymMatrix,
    k0: &Matrix,
) -> Result<PolicyIterationTrace> {
    check_shapes(a, b, q, r)?;
    if k0.shape() != (b.ncols(), a.nrows()) {
        return Err(Error::dim("kleinman_pi", "K0 shape"));
    }
    let closed = a - b * k0;
    if !is_hurwitz(&closed)? {
        return Err(Error::NotHurwitz {
            what: "A - B K0",
            max_real: max_real_eigenvalue(&closed)?,
        });
    }
    let mut gains = vec![k0.clone()];
    let mut values: Vec<SymMatrix> = Vec::new();
    for _ in 0..PI_MAX_ITER {
        let k = gains.last().expect("seeded");
        let closed = a - b * k;
        let rhs = q.as_matrix() + k.transpose() * r.as_matrix() * k;
        let p = solve_lyapunov(&closed, &rhs)?;
        let k_next = gain_from_value(b, r, &p)?;
        let done = values
            .last()
            .map(|prev| (p.as_matrix() - prev.as_matrix()).norm() <= PI_REL_TOL * p.norm())
            .unwrap_or(false);
        values.push(p);
        gains.push(k_next);
        if done {
            let p = values.last().expect("pushed").clone();
            let solution = finish(a, b, q, r, p)?;
            return Ok(PolicyIterationTrace {
                values,
                gains,
                solution,
            });
        }
    }
    let last = values.last().map(|p| p.norm()).unwrap_or(f64::NAN);
    Err(Error::NonConvergence {
        iterations: PI_MAX_ITER,
        last_metric: last,
    })
}

/// Step sizes `ε_k = scale / (k + 1)^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSizes {
    pub scale: f64,
    pub exponent: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        StepSizes {
            scale: 1.0,
            exponent: 1.0,
        }
    }
}

impl StepSizes {
    pub fn at(&self, k: usize) -> f64 {
        self.scale / ((k + 1) as f64).powf(self.exponent)
    }

    /// `ε_k > 0`, `Σ ε_k = ∞`, `ε_k → 0`.
    pub fn validate(&self, problems: &mut Vec<String>) {
        if !(self.scale > 0.0) {
            problems.push(format!("step size scale {} must be positive", self.scale));
        }
        if !(self.exponent > 0.0 && self.exponent <= 1.0) {
            problems.push(format!(
                "step size exponent {} must lie in (0, 1] so that the steps vanish but do not sum to a finite value",
                self.exponent
            ));
        }
    }
}

/// Bounded sets `B_r` as spectral-norm balls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum BoundSchedule {
    /// radius `scale · (r + 1)`
    Expanding { scale: f64 },
    /// radius `gamma` for every r, usable when `‖P*‖ < gamma` is known
    Fixed { gamma: f64 },
}

impl Default for BoundSchedule {
    fn default() -> Self {
        BoundSchedule::Expanding { scale: 10.0 }
    }
}

impl BoundSchedule {
    pub fn radius(&self, r: usize) -> f64 {
        match *self {
            BoundSchedule::Expanding { scale } => scale * (r + 1) as f64,
            BoundSchedule::Fixed { gamma } => gamma,
        }
    }

    pub fn validate(&self, problems: &mut Vec<String>) {
        let ok = match *self {
            BoundSchedule::Expanding { scale } => scale > 0.0,
            BoundSchedule::Fixed { gamma } => gamma > 0.0,
        };
        if !ok {
            problems.push("bound schedule radius must be positive".into());
        }
    }
}

pub const DEFAULT_VI_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_VI_MAX_ITER: usize = 1_000_000;

/// Value-iteration schedule: steps, bounds, stopping threshold and `P0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViSchedule {
    pub steps: StepSizes,
    pub bounds: BoundSchedule,
    pub threshold: f64,
    pub p0: SymMatrix,
    pub max_iter: usize,
}

impl ViSchedule {
    pub fn new(p0: SymMatrix) -> Self {
        ViSchedule {
            steps: StepSizes::default(),
            bounds: BoundSchedule::default(),
            threshold: DEFAULT_VI_THRESHOLD,
            p0,
            max_iter: DEFAULT_VI_MAX_ITER,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        self.steps.validate(&mut problems);
        self.bounds.validate(&mut problems);
        if !(self.threshold > 0.0) {
            problems.push("VI threshold must be positive".into());
        }
        if self.max_iter == 0 {
            problems.push("VI iteration cap must be positive".into());
        }
        if !self.p0.is_positive_definite() {
            problems.push("P0 must be positive definite".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Per-iteration record of a value-iteration run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViTrace {
    /// `‖P̃_k − P_{k−1}‖ / ε_{k−1}` for k = 1, 2, ...
    pub metrics: Vec<f64>,
    /// Iteration indices at which `P̃ ∉ B_r` forced a reset to `P0`.
    pub resets: Vec<usize>,
    pub iterations: usize,
    pub final_r: usize,
}

impl ViTrace {
    /// True when the stopping metric never increases over the final `frac`
    /// of iterations.
    pub fn tail_monotone(&self, frac: f64) -> bool {
        let n = self.metrics.len();
        let start = n - ((n as f64 * frac).ceil() as usize).min(n);
        let last_reset = self.resets.last().copied().unwrap_or(0);
        let start = start.max(last_reset);
        self.metrics[start..].windows(2).all(|w| w[1] <= w[0])
    }
}

/// Spectral norm of a symmetric matrix.
pub(crate) fn sym_norm(m: &Matrix) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Cheap membership test for `‖P‖₂ ≤ radius`: the Frobenius norm bounds the
/// spectral norm from above.
pub(crate) fn within_ball(p: &Matrix, radius: f64) -> bool {
    if !p.iter().all(|x| x.is_finite()) {
        return false;
    }
    p.norm() <= radius || sym_norm(p) <= radius
}

/// Value iteration with diminishing steps and bounded-set resets.
pub fn model_based_vi(
    a: &Matrix,
    b: &Matrix,
    q: &SymMatrix,
    r: &SymMatrix,
    schedule: &ViSchedule,
) -> Result<(AreSolution, ViTrace)> {
    check_shapes(a, b, q, r)?;
    schedule.validate()?;
    if q.min_eigenvalue() < -1e-12 * q.norm() {
        return Err(Error::Assumption("Q must be positive semidefinite".into()));
    }
    let g = b * r_inverse(r)? * b.transpose();
    let p0 = schedule.p0.as_matrix();
    let mut p = p0.clone();
    let mut radius_index = 0;
    let mut trace = ViTrace::default();
    for k in 0..schedule.max_iter {
        let eps = schedule.steps.at(k);
        let ric = riccati_operator(a, &g, q, &p);
        let candidate = &p + &ric * eps;
        // ‖P̃_{k+1} − P_k‖ / ε_k
        let metric = sym_norm(&ric);
        trace.metrics.push(metric);
        trace.iterations = k + 1;
        if !within_ball(&candidate, schedule.bounds.radius(radius_index)) {
            p = p0.clone();
            radius_index += 1;
            trace.resets.push(k + 1);
            continue;
        }
        p = candidate;
        if metric < schedule.threshold {
            trace.final_r = radius_index;
            let sol = finish(a, b, q, r, SymMatrix::symmetrize(p))?;
            return Ok((sol, trace));
        }
    }
    trace.final_r = radius_index;
    Err(Error::NonConvergence {
        iterations: schedule.max_iter,
        last_metric: trace.metrics.last().copied().unwrap_or(f64::NAN),
    })
}

/// Relative distance `‖X − Y‖_F / ‖Y‖_F`.
pub fn rel_err(x: &Matrix, y: &Matrix) -> f64 {
    (x - y).norm() / y.norm().max(f64::MIN_POSITIVE)
}

/// `‖P‖₂` convenience for callers holding a [`SymMatrix`].
pub fn value_norm(p: &SymMatrix) -> f64 {
    spectral_norm(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> Matrix {
        Matrix::from_element(1, 1, x)
    }

    fn sym_scalar(x: f64) -> SymMatrix {
        SymMatrix::new(scalar(x)).unwrap()
    }

    #[test]
    fn scalar_integrator_are() {
        let sol = solve_are_exact(&scalar(0.0), &scalar(1.0), &sym_scalar(1.0), &sym_scalar(1.0))
            .unwrap();
        assert_close!(sol.p[(0, 0)], 1.0, 1e-12);
        assert_close!(sol.k[(0, 0)], 1.0, 1e-12);
        assert!(sol.residual < 1e-12);
    }

    #[test]
    fn scalar_stable_are() {
        let sol = solve_are_exact(&scalar(-1.0), &scalar(1.0), &sym_scalar(1.0), &sym_scalar(1.0))
            .unwrap();
        assert_close!(sol.p[(0, 0)], 2f64.sqrt() - 1.0, 1e-12);
    }

    #[test]
    fn are_rejects_unstabilizable() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let err = solve_are_exact(&a, &b, &SymMatrix::identity(2), &sym_scalar(1.0)).unwrap_err();
        assert!(matches!(err, Error::Assumption(ref s) if s.contains("stabilizable")));
    }

    #[test]
    fn are_rejects_unobservable_cost() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = Matrix::identity(2, 2);
        let q = SymMatrix::new(Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])).unwrap();
        let err = solve_are_exact(&a, &b, &q, &SymMatrix::identity(2)).unwrap_err();
        assert!(matches!(err, Error::Assumption(ref s) if s.contains("observable")));
    }

    #[test]
    fn kleinman_scalar_one_step() {
        let trace = kleinman_pi(
            &scalar(0.0),
            &scalar(1.0),
            &sym_scalar(1.0),
            &sym_scalar(1.0),
            &scalar(1.0),
        )
        .unwrap();
        assert_close!(trace.values[0][(0, 0)], 1.0, 1e-14);
        assert_close!(trace.solution.p[(0, 0)], 1.0, 1e-14);
    }

    #[test]
    fn kleinman_rejects_destabilizing_seed() {
        let err = kleinman_pi(
            &scalar(1.0),
            &scalar(1.0),
            &sym_scalar(1.0),
            &sym_scalar(1.0),
            &scalar(0.5),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotHurwitz { .. }));
    }

    #[test]
    fn scalar_vi_reaches_fixed_point() {
        // from P0 = 2 the unit first step lands exactly on the other root −1
        let mut schedule = ViSchedule::new(sym_scalar(0.5));
        schedule.threshold = 1e-8;
        let (sol, trace) = model_based_vi(
            &scalar(0.0),
            &scalar(1.0),
            &sym_scalar(1.0),
            &sym_scalar(1.0),
            &schedule,
        )
        .unwrap();
        assert_close!(sol.p[(0, 0)], 1.0, 1e-6);
        assert!(trace.resets.is_empty());
    }

    #[test]
    fn vi_schedule_validation() {
        let mut s = ViSchedule::new(sym_scalar(1.0));
        s.steps.exponent = 1.5;
        assert!(matches!(s.validate(), Err(Error::Config(_))));
        s.steps.exponent = 0.0;
        assert!(s.validate().is_err());
        s.steps.exponent = 0.5;
        assert!(s.validate().is_ok());
        s.p0 = sym_scalar(-1.0);
        assert!(s.validate().is_err());
    }

    #[test]
    fn fixed_bound_never_resets_inside_ball() {
        // ‖P*‖ = 1 < γ = 3, P0 inside the ball, small first step
        let mut schedule = ViSchedule::new(sym_scalar(0.5));
        schedule.bounds = BoundSchedule::Fixed { gamma: 3.0 };
        schedule.steps.scale = 0.5;
        let (_, trace) = model_based_vi(
            &scalar(0.0),
            &scalar(1.0),
            &sym_scalar(1.0),
            &sym_scalar(1.0),
            &schedule,
        )
        .unwrap();
        assert!(trace.resets.is_empty());
    }

    #[test]
    fn bound_radii() {
        let b = BoundSchedule::default();
        assert_eq!(b.radius(0), 10.0);
        assert_eq!(b.radius(4), 50.0);
        assert_eq!(StepSizes::default().at(0), 1.0);
        assert_eq!(StepSizes::default().at(3), 0.25);
    }
}
