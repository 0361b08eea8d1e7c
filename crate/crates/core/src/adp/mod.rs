//! Data-driven value iteration for optimal output regulation.
//!
//! From one recorded trajectory the learner recovers the optimal feedback
//! gain, the input and disturbance matrices, the Sylvester-map images of the
//! basis matrices, and from those the feedforward gain, without access to
//! `A`, `B` or `D`.

pub mod basis;
pub mod data;
pub mod noise;

use crate::error::{Error, Result};
use crate::linops::{
    constrained_quadratic_min, from_vecs, half_vec_len, kron, unvec, vec, vecs, LeastSquares,
    Matrix, SymMatrix, Vector,
};
use crate::regulator::feedforward_gain;
use crate::riccati::{sym_norm, within_ball, ViSchedule, ViTrace};
use crate::sim::Trajectory;

pub use basis::{build_xj_basis, XjBasis};
pub use data::{accumulate, check_rank, required_rank, DataLog};
pub use noise::{ExplorationNoise, NoiseSpec};

/// Least-squares form of the data equation
/// `Θ_j [vecs H; vec K; vec((D − S(X_j))ᵀP)] = δ_j vecs P`, factored once.
#[derive(Debug, Clone)]
pub struct DataEquation {
    ls: LeastSquares,
    delta: Matrix,
    n: usize,
    m: usize,
    q: usize,
}

/// Unknowns recovered from one solve of the data equation.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSolve {
    pub h: SymMatrix,
    pub k: Matrix,
    /// `(D − S(X_j))ᵀ P`, `q × n`
    pub m: Matrix,
    /// `‖Θz − δ vecs P‖ / ‖δ vecs P‖`
    pub residual: f64,
}

impl DataEquation {
    pub fn new(log: &DataLog, r: &SymMatrix) -> Result<Self> {
        let rho = log.rho();
        let nh = log.i_xx.ncols();
        let m = r.dim();
        let n = log.g_xu.ncols() / m;
        let q = log.g_xv.ncols() / n;
        if half_vec_len(n) != nh || n * m != log.g_xu.ncols() || n * q != log.g_xv.ncols() {
            return Err(Error::dim("DataEquation", "log widths do not match R"));
        }
        let mut theta = Matrix::zeros(rho, nh + n * m + n * q);
        theta.view_mut((0, 0), (rho, nh)).copy_from(&log.i_xx);
        let gu = &log.g_xu * kron(&Matrix::identity(n, n), r.as_matrix()) * 2.0;
        theta.view_mut((0, nh), (rho, n * m)).copy_from(&gu);
        theta
            .view_mut((0, nh + n * m), (rho, n * q))
            .copy_from(&(&log.g_xv * 2.0));
        let ls = LeastSquares::new(&theta)
            .map_err(|e| e.with_rank_context(format!("data equation for j = {}", log.j)))?;
        Ok(DataEquation {
            ls,
            delta: log.delta.clone(),
            n,
            m,
            q,
        })
    }

    pub fn solve(&self, p: &SymMatrix) -> Result<DataSolve> {
        let (n, m, q) = (self.n, self.m, self.q);
        if p.dim() != n {
            return Err(Error::dim("DataEquation::solve", "P dimension"));
        }
        let rhs = &self.delta * vecs(p);
        let z = self.ls.solve_vec(&rhs)?;
        let nh = half_vec_len(n);
        let zs = z.as_slice();
        let h = from_vecs(&zs[..nh])?;
        let k = unvec(&zs[nh..nh + n * m], m, n)?;
        let mm = unvec(&zs[nh + n * m..], q, n)?;
        // Θz is the orthogonal projection of the rhs onto range(Θ)
        let residual =
            (&rhs - self.ls.project(&rhs)).norm() / rhs.norm().max(f64::MIN_POSITIVE);
        Ok(DataSolve {
            h,
            k,
            m: mm,
            residual,
        })
    }
}

/// One value-iteration step on data.
#[derive(Debug, Clone, PartialEq)]
pub struct ViDataStep {
    pub p_next: SymMatrix,
    pub k_next: Matrix,
    pub h: SymMatrix,
    /// `‖H + Q − KᵀRK‖`, i.e. `‖P̃ − P‖ / ε`
    pub metric: f64,
    pub reset: bool,
}

/// `P̃ = P + ε(H + Q − KᵀRK)`, reset to `P0` when `‖P̃‖ > radius`.
pub fn vi_data_step(
    eq: &DataEquation,
    p: &SymMatrix,
    q: &SymMatrix,
    r: &SymMatrix,
    eps: f64,
    radius: f64,
    p0: &SymMatrix,
) -> Result<ViDataStep> {
    let sol = eq.solve(p)?;
    let incr = sol.h.as_matrix() + q.as_matrix() - sol.k.transpose() * r.as_matrix() * &sol.k;
    let metric = sym_norm(&incr);
    let candidate = p.as_matrix() + incr * eps;
    let (p_next, reset) = if within_ball(&candidate, radius) {
        (SymMatrix::symmetrize(candidate), false)
    } else {
        (p0.clone(), true)
    };
    Ok(ViDataStep {
        p_next,
        k_next: sol.k,
        h: sol.h,
        metric,
        reset,
    })
}

/// Diagnostics of a learning run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningTrace {
    pub vi: ViTrace,
    /// Number of times `Θ_0` was assembled (one per run).
    pub theta0_assemblies: usize,
    /// Numerical rank of the stacked data matrix for each `j`.
    pub ranks: Vec<usize>,
    /// Data-equation residual at the converged value matrix, per `j`.
    pub residuals: Vec<f64>,
    /// Condition number of the converged `P`.
    pub p_condition: f64,
    /// Degrees of freedom left in the least-trace regulator problem after the constraints.
    pub regulator_free_dims: usize,
}

/// Everything the data-driven learner produces.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedPolicy {
    pub k: Matrix,
    pub l: Matrix,
    pub x: Matrix,
    pub u: Matrix,
    pub p: SymMatrix,
    pub b_hat: Matrix,
    pub d_hat: Matrix,
    /// `S(X_j)` for `j = 0..=h+1`
    pub sylvester_images: Vec<Matrix>,
    pub trace: LearningTrace,
}

/// Settings for [`learn_from_trajectory`].
#[derive(Debug, Clone)]
pub struct LearningSetup {
    pub q: SymMatrix,
    pub r: SymMatrix,
    pub schedule: ViSchedule,
    pub q_bar: SymMatrix,
    pub r_bar: SymMatrix,
    /// Window length `Δt` (s).
    pub window: f64,
    /// Window count `ρ`.
    pub rho: usize,
}

fn spd_solve(p: &SymMatrix, rhs: &Matrix) -> Result<Matrix> {
    let chol = p
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("learned value matrix is not positive definite".into()))?;
    Ok(chol.solve(rhs))
}

/// Run the full data-driven pipeline on a recorded trajectory.
pub fn learn_from_trajectory(traj: &Trajectory, basis: &XjBasis, setup: &LearningSetup) -> Result<LearnedPolicy> {
    let (n, m, q, _) = traj.dims();
    setup.schedule.validate()?;
    if setup.q.dim() != n || setup.r.dim() != m || setup.q_bar.dim() != n || setup.r_bar.dim() != m {
        return Err(Error::dim("learn_from_trajectory", "weight dimensions"));
    }
    let need = required_rank(n, m, q);
    if setup.rho < need {
        return Err(Error::RankDeficient {
            rank: setup.rho,
            required: need,
            context: Some(format!("only {} windows for {need} unknowns", setup.rho)),
        });
    }

    // (1) integrals for every X_j, checked before any solve
    let logs = accumulate(traj, basis, setup.window, setup.rho)?;
    let mut trace = LearningTrace::default();
    for log in &logs {
        let (ok, r) = check_rank(log);
        trace.ranks.push(r);
        if !ok {
            return Err(Error::RankDeficient {
                rank: r,
                required: need,
                context: Some(format!("data for j = {}", log.j)),
            });
        }
    }

    // (2) value iteration on the j = 0 data
    let eq0 = DataEquation::new(&logs[0], &setup.r)?;
    trace.theta0_assemblies += 1;
    let sched = &setup.schedule;
    let mut p = sched.p0.clone();
    let mut radius_index = 0;
    let mut converged = false;
    for k in 0..sched.max_iter {
        let step = vi_data_step(
            &eq0,
            &p,
            &setup.q,
            &setup.r,
            sched.steps.at(k),
            sched.bounds.radius(radius_index),
            &sched.p0,
        )?;
        trace.vi.metrics.push(step.metric);
        trace.vi.iterations = k + 1;
        p = step.p_next;
        if step.reset {
            radius_index += 1;
            trace.vi.resets.push(k + 1);
            continue;
        }
        if step.metric < sched.threshold {
            converged = true;
            break;
        }
    }
    trace.vi.final_r = radius_index;
    if !converged {
        return Err(Error::NonConvergence {
            iterations: sched.max_iter,
            last_metric: trace.vi.metrics.last().copied().unwrap_or(f64::NAN),
        });
    }
    let eig = p.eigenvalues();
    trace.p_condition = eig[eig.len() - 1] / eig[0];
    log::debug!(
        "data-driven VI converged after {} iterations, cond(P) = {:.3e}",
        trace.vi.iterations,
        trace.p_condition
    );

    // (3) Sylvester images at the converged P
    let at_p0 = eq0.solve(&p)?;
    trace.residuals.push(at_p0.residual);
    let d_hat = spd_solve(&p, &at_p0.m.transpose())?;
    let mut images = vec![Matrix::zeros(n, q)];
    for log in &logs[1..] {
        let eq = DataEquation::new(log, &setup.r)?;
        let sol = eq.solve(&p)?;
        trace.residuals.push(sol.residual);
        images.push(&d_hat - spd_solve(&p, &sol.m.transpose())?);
    }

    // (4) input matrix
    let k_star = at_p0.k;
    let b_hat = spd_solve(&p, &(k_star.transpose() * setup.r.as_matrix()))?;

    // (5) least-trace regulator solution over X = X_1 + Σ α_j X_j
    let h = basis.h();
    let (nq, mq) = (n * q, m * q);
    let mut cons = Matrix::zeros(nq, h + mq);
    for (c, img) in images[2..].iter().enumerate() {
        cons.set_column(c, &vec(img));
    }
    cons.view_mut((0, h), (nq, mq))
        .copy_from(&(-kron(&Matrix::identity(q, q), &b_hat)));
    let rhs = vec(&(&d_hat - &images[1]));
    let mut lift = Matrix::zeros(nq + mq, h + mq);
    for (c, xj) in basis.kernel().iter().enumerate() {
        lift.view_mut((0, c), (nq, 1)).copy_from(&vec(xj));
    }
    lift.view_mut((nq, h), (mq, mq)).fill_with_identity();
    let mut offset = Vector::zeros(nq + mq);
    offset.rows_mut(0, nq).copy_from(&vec(basis.get(1)));
    let mut weight = Matrix::zeros(nq + mq, nq + mq);
    let iq = Matrix::identity(q, q);
    weight
        .view_mut((0, 0), (nq, nq))
        .copy_from(&kron(&iq, setup.q_bar.as_matrix()));
    weight
        .view_mut((nq, nq), (mq, mq))
        .copy_from(&kron(&iq, setup.r_bar.as_matrix()));
    let sol = constrained_quadratic_min(&cons, &rhs, &lift, &offset, &weight)?;
    trace.regulator_free_dims = sol.free_dims;
    let mut x_star = basis.get(1).clone();
    for (alpha, xj) in sol.z.iter().take(h).zip(basis.kernel()) {
        x_star += xj * *alpha;
    }
    let u_star = unvec(&sol.z.as_slice()[h..], m, q)?;

    // (6) feedforward gain
    let l_star = feedforward_gain(&u_star, &k_star, &x_star)?;
    Ok(LearnedPolicy {
        k: k_star,
        l: l_star,
        x: x_star,
        u: u_star,
        p,
        b_hat,
        d_hat,
        sylvester_images: images,
        trace,
    })
}
