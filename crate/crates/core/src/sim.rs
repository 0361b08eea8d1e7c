//! Fixed-step closed-loop simulation of `ẋ = Ax + Bu + Dv`, `v̇ = Ev`.
//!
//! The state is advanced with classical RK4; the exostate follows the exact
//! rotation of each harmonic block, and the policy is evaluated at every
//! stage with the exostate at that stage's time.

use crate::adp::noise::ExplorationNoise;
use crate::error::{Error, Result};
use crate::linops::{Matrix, SymMatrix, Vector};
use crate::plant::{OrbitalElements, PlantModel};

pub const DEFAULT_STATE_CAP_KM: f64 = 1e4;
pub const DEFAULT_SETTLING_TOL_KM: f64 = 1e-3;

/// Input law `u = π(t, x, v)`.
pub trait Policy: Sync {
    fn input(&self, t: f64, x: &[f64], v: &[f64], u: &mut [f64]);
}

impl<F> Policy for F
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]) + Sync,
{
    fn input(&self, t: f64, x: &[f64], v: &[f64], u: &mut [f64]) {
        self(t, x, v, u)
    }
}

/// `u = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroInput;

impl Policy for ZeroInput {
    fn input(&self, _t: f64, _x: &[f64], _v: &[f64], u: &mut [f64]) {
        u.fill(0.0);
    }
}

/// `u = −Kx + Lv`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackFeedforward {
    pub k: Matrix,
    pub l: Matrix,
}

impl Policy for FeedbackFeedforward {
    fn input(&self, _t: f64, x: &[f64], v: &[f64], u: &mut [f64]) {
        u.fill(0.0);
        gemv_acc(&self.k, x, -1.0, u);
        gemv_acc(&self.l, v, 1.0, u);
    }
}

/// `u = −K₀x + η(t)`, the behaviour policy used while collecting data.
#[derive(Debug, Clone)]
pub struct Exploring {
    pub k0: Matrix,
    pub noise: ExplorationNoise,
}

impl Policy for Exploring {
    fn input(&self, t: f64, x: &[f64], _v: &[f64], u: &mut [f64]) {
        self.noise.eval_into(t, u);
        gemv_acc(&self.k0, x, -1.0, u);
    }
}

/// `out += s · M x` on a column-major matrix.
fn gemv_acc(m: &Matrix, x: &[f64], s: f64, out: &mut [f64]) {
    let rows = m.nrows();
    for (j, col) in m.as_slice().chunks_exact(rows).enumerate() {
        let xj = s * x[j];
        if xj != 0.0 {
            for (o, c) in out.iter_mut().zip(col) {
                *o += c * xj;
            }
        }
    }
}

/// Uniformly sampled record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    n: usize,
    m: usize,
    q: usize,
    p: usize,
    x: Vec<f64>,
    v: Vec<f64>,
    u: Vec<f64>,
    e: Vec<f64>,
    /// Time at which the state left the cap and integration stopped.
    pub blowup: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.x.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.n, self.m, self.q, self.p)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Time of the last sample.
    pub fn end_time(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.x[k * self.n..(k + 1) * self.n]
    }

    pub fn exo(&self, k: usize) -> &[f64] {
        &self.v[k * self.q..(k + 1) * self.q]
    }

    pub fn input(&self, k: usize) -> &[f64] {
        &self.u[k * self.m..(k + 1) * self.m]
    }

    pub fn error(&self, k: usize) -> &[f64] {
        &self.e[k * self.p..(k + 1) * self.p]
    }

    pub fn error_norm(&self, k: usize) -> f64 {
        norm(self.error(k))
    }

    /// Largest `‖e − (Cx + Fv)‖` over the record.
    pub fn output_identity_defect(&self, c: &Matrix, f: &Matrix) -> f64 {
        let mut worst: f64 = 0.0;
        let mut out = vec![0.0; self.p];
        for k in 0..self.len() {
            out.fill(0.0);
            gemv_acc(c, self.state(k), 1.0, &mut out);
            gemv_acc(f, self.exo(k), 1.0, &mut out);
            let d = out
                .iter()
                .zip(self.error(k))
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(d);
        }
        worst
    }

    /// Fails when the run stopped early at the state cap.
    pub fn require_complete(&self) -> Result<()> {
        match self.blowup {
            Some(t) => Err(Error::Numerical(format!(
                "state exceeded the cap at t = {t:.3} s"
            ))),
            None => Ok(()),
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub t0: f64,
    pub state_cap: f64,
    /// RK4 steps per recorded sample.
    pub substeps: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            t0: 0.0,
            state_cap: DEFAULT_STATE_CAP_KM,
            substeps: 1,
        }
    }
}

struct Workspace {
    u: Vec<f64>,
    xs: Vec<f64>,
    k: [Vec<f64>; 4],
}

fn rhs(plant: &PlantModel, x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    gemv_acc(&plant.a, x, 1.0, out);
    gemv_acc(&plant.b, u, 1.0, out);
    gemv_acc(&plant.d, v, 1.0, out);
}

/// Integrate over `[t0, t0 + horizon]`, recording `round(horizon / dt)`
/// samples after the initial one, each reached by `opts.substeps` RK4 steps.
pub fn integrate(
    plant: &PlantModel,
    policy: &dyn Policy,
    x0: &[f64],
    v0: &[f64],
    horizon: f64,
    dt: f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let (n, m, q, p) = (plant.n(), plant.m(), plant.q(), plant.p());
    if x0.len() != n || v0.len() != q {
        return Err(Error::dim(
            "integrate",
            format!("x0 has {} entries, v0 has {}", x0.len(), v0.len()),
        ));
    }
    if !(dt > 0.0 && dt.is_finite()) || !(horizon >= dt) || opts.substeps == 0 {
        return Err(Error::Config(vec![format!(
            "integration needs dt > 0, horizon >= dt and at least one substep (dt = {dt}, horizon = {horizon})"
        )]));
    }
    let exo = plant.exosystem()?;
    let steps = (horizon / dt).round() as usize;
    let samples = steps + 1;
    let mut traj = Trajectory {
        t0: opts.t0,
        dt,
        n,
        m,
        q,
        p,
        x: Vec::with_capacity(samples * n),
        v: Vec::with_capacity(samples * q),
        u: Vec::with_capacity(samples * m),
        e: Vec::with_capacity(samples * p),
        blowup: None,
    };
    let mut ws = Workspace {
        u: vec![0.0; m],
        xs: vec![0.0; n],
        k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
    };
    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    let mut v_half = vec![0.0; q];
    let mut v_next = vec![0.0; q];
    let mut e = vec![0.0; p];
    let h = dt / opts.substeps as f64;
    let h_half = 0.5 * h;

    for step in 0..=steps {
        let t = opts.t0 + step as f64 * dt;
        policy.input(t, &x, &v, &mut ws.u);
        e.fill(0.0);
        gemv_acc(&plant.c, &x, 1.0, &mut e);
        gemv_acc(&plant.f, &v, 1.0, &mut e);
        traj.x.extend_from_slice(&x);
        traj.v.extend_from_slice(&v);
        traj.u.extend_from_slice(&ws.u);
        traj.e.extend_from_slice(&e);
        if step == steps {
            break;
        }

        for sub in 0..opts.substeps {
            let t = t + sub as f64 * h;
            if sub > 0 {
                policy.input(t, &x, &v, &mut ws.u);
            }
            exo.step_into(&v, h_half, &mut v_half);
            exo.step_into(&v, h, &mut v_next);
            let [k1, k2, k3, k4] = &mut ws.k;
            rhs(plant, &x, &ws.u, &v, k1);
            for i in 0..n {
                ws.xs[i] = x[i] + h_half * k1[i];
            }
            policy.input(t + h_half, &ws.xs, &v_half, &mut ws.u);
            rhs(plant, &ws.xs, &ws.u, &v_half, k2);
            for i in 0..n {
                ws.xs[i] = x[i] + h_half * k2[i];
            }
            policy.input(t + h_half, &ws.xs, &v_half, &mut ws.u);
            rhs(plant, &ws.xs, &ws.u, &v_half, k3);
            for i in 0..n {
                ws.xs[i] = x[i] + h * k3[i];
            }
            policy.input(t + h, &ws.xs, &v_next, &mut ws.u);
            rhs(plant, &ws.xs, &ws.u, &v_next, k4);
            for i in 0..n {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            std::mem::swap(&mut v, &mut v_next);
        }

        let size = norm(&x);
        if !size.is_finite() || size > opts.state_cap {
            let t_stop = t + dt;
            log::warn!("state norm {size:.3e} km exceeded the cap at t = {t_stop:.3} s; stopping");
            traj.blowup = Some(t_stop);
            break;
        }
    }
    Ok(traj)
}

/// Summary figures of one closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    /// `∫ x̄ᵀQx̄ + ūᵀRū dt`, trapezoidal.
    pub cost: f64,
    pub terminal_error: f64,
    pub initial_error: f64,
    /// Earliest time from which `‖e‖` stays within tolerance; `None` if never.
    pub settling_time: Option<f64>,
    pub max_input: f64,
}

/// Run metrics with `x̄ = x − Xv`, `ū = u − Uv`.
pub fn metrics(
    traj: &Trajectory,
    x_reg: &Matrix,
    u_reg: &Matrix,
    q: &SymMatrix,
    r: &SymMatrix,
    settle_tol: f64,
) -> Result<RunMetrics> {
    let (n, m, nq, _) = traj.dims();
    if x_reg.shape() != (n, nq) || u_reg.shape() != (m, nq) || q.dim() != n || r.dim() != m {
        return Err(Error::dim("metrics", "regulator or weight shapes"));
    }
    if traj.is_empty() {
        return Err(Error::dim("metrics", "empty trajectory"));
    }
    let mut xbar = vec![0.0; n];
    let mut ubar = vec![0.0; m];
    let quad = |w: &Matrix, z: &[f64]| {
        let zv = Vector::from_column_slice(z);
        zv.dot(&(w * &zv))
    };
    let mut cost = 0.0;
    let mut prev: Option<f64> = None;
    let mut max_input: f64 = 0.0;
    let mut settled_from: Option<usize> = None;
    for k in 0..traj.len() {
        xbar.copy_from_slice(traj.state(k));
        gemv_acc(x_reg, traj.exo(k), -1.0, &mut xbar);
        ubar.copy_from_slice(traj.input(k));
        gemv_acc(u_reg, traj.exo(k), -1.0, &mut ubar);
        let g = quad(q.as_matrix(), &xbar) + quad(r.as_matrix(), &ubar);
        if let Some(gp) = prev {
            cost += 0.5 * traj.dt * (gp + g);
        }
        prev = Some(g);
        max_input = max_input.max(norm(traj.input(k)));
        if traj.error_norm(k) <= settle_tol {
            settled_from.get_or_insert(k);
        } else {
            settled_from = None;
        }
    }
    Ok(RunMetrics {
        cost,
        terminal_error: traj.error_norm(traj.len() - 1),
        initial_error: traj.error_norm(0),
        settling_time: settled_from.map(|k| traj.time(k)),
        max_input,
    })
}

/// First-order relative Hill state of `deputy` about a near-circular `chief`.
pub fn hill_initial_state(deputy: &OrbitalElements, chief: &OrbitalElements, n_bar: f64) -> Vector {
    let a = chief.semi_major_axis_km;
    let da = deputy.semi_major_axis_km - a;
    let lat = |o: &OrbitalElements| (o.arg_perigee_deg + o.true_anomaly_deg).to_radians();
    let theta = lat(chief);
    let d_theta = wrap_pi(lat(deputy) - theta);
    let inc = chief.inclination_deg.to_radians();
    let d_inc = (deputy.inclination_deg - chief.inclination_deg).to_radians();
    let d_raan = wrap_pi((deputy.raan_deg - chief.raan_deg).to_radians());
    let (st, ct) = theta.sin_cos();
    Vector::from_vec(vec![
        da,
        a * (d_theta + inc.cos() * d_raan),
        a * (st * d_inc - ct * inc.sin() * d_raan),
        0.0,
        -1.5 * n_bar * da,
        a * n_bar * (ct * d_inc + st * inc.sin() * d_raan),
    ])
}

fn wrap_pi(x: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    (x + std::f64::consts::PI).rem_euclid(tau) - std::f64::consts::PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::PlantParams;

    #[test]
    fn equilibrium_stays_put() {
        let mut plant = PlantModel::build(&PlantParams::default()).unwrap();
        plant.d = Matrix::zeros(6, 8);
        let traj = integrate(
            &plant,
            &ZeroInput,
            &[0.0; 6],
            &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            100.0,
            1.0,
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(traj.len(), 101);
        assert!((0..traj.len()).all(|k| traj.state(k).iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn blowup_is_reported() {
        let plant = PlantModel::build(&PlantParams::default()).unwrap();
        let push = |_t: f64, _x: &[f64], _v: &[f64], u: &mut [f64]| u.fill(1.0);
        let traj = integrate(
            &plant,
            &push,
            &[0.0; 6],
            &[0.0; 8],
            100.0,
            1.0,
            &SimOptions::default(),
        )
        .unwrap();
        assert!(traj.blowup.is_some());
        assert!(traj.len() < 101);
        assert!(traj.require_complete().is_err());
    }

    #[test]
    fn metrics_vanish_on_the_manifold() {
        let plant = PlantModel::build(&PlantParams::default()).unwrap();
        let x_reg = Matrix::zeros(6, 8);
        let u_reg = Matrix::zeros(3, 8);
        let mut p = plant.clone();
        p.d = Matrix::zeros(6, 8);
        let traj =
            integrate(&p, &ZeroInput, &[0.0; 6], &[0.0; 8], 10.0, 1.0, &SimOptions::default())
                .unwrap();
        let q = SymMatrix::identity(6);
        let r = SymMatrix::identity(3);
        let met = metrics(&traj, &x_reg, &u_reg, &q, &r, 1e-3).unwrap();
        assert_eq!(met.cost, 0.0);
        assert_eq!(met.settling_time, Some(0.0));
    }

    #[test]
    fn hill_state_of_default_formation() {
        let chief = OrbitalElements::chief_default();
        assert_eq!(hill_initial_state(&chief, &chief, 0.00108), Vector::zeros(6));
        let x0 = hill_initial_state(&OrbitalElements::deputy_default(), &chief, 0.00108);
        assert_close!(x0[0], 0.24, 1e-9);
        assert_close!(x0[1], -6678.136 * 0.25f64.to_radians(), 1e-9);
        assert_close!(x0[2], 0.0, 1e-12);
        assert_close!(x0[4], -1.5 * 0.00108 * 0.24, 1e-12);
    }
}
