//! Window integrals of a recorded trajectory for each basis matrix `X_j`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linops::{equilibrated_rank, half_vec_len, vecv_into, Matrix};
use crate::sim::Trajectory;

use super::basis::XjBasis;

/// Integrals of `x̄_j = x − X_j v` over `ρ` consecutive windows.
#[derive(Debug, Clone, PartialEq)]
pub struct DataLog {
    pub j: usize,
    /// rows `∫ vecv(x̄)ᵀ`
    pub i_xx: Matrix,
    /// rows `∫ (x̄ ⊗ u)ᵀ`
    pub g_xu: Matrix,
    /// rows `∫ (x̄ ⊗ v)ᵀ`
    pub g_xv: Matrix,
    /// rows `vecv(x̄(t_l))ᵀ − vecv(x̄(t_{l−1}))ᵀ`
    pub delta: Matrix,
    /// `t_0 < t_1 < … < t_ρ`
    pub boundaries: Vec<f64>,
}

impl DataLog {
    pub fn rho(&self) -> usize {
        self.i_xx.nrows()
    }

    /// `[𝕀, Γ_u, Γ_v]`, whose column rank decides identifiability.
    pub fn stacked(&self) -> Matrix {
        let rho = self.rho();
        let (a, b, c) = (self.i_xx.ncols(), self.g_xu.ncols(), self.g_xv.ncols());
        let mut out = Matrix::zeros(rho, a + b + c);
        out.view_mut((0, 0), (rho, a)).copy_from(&self.i_xx);
        out.view_mut((0, a), (rho, b)).copy_from(&self.g_xu);
        out.view_mut((0, a + b), (rho, c)).copy_from(&self.g_xv);
        out
    }
}

/// `n(n+1)/2 + (m+q)n`.
pub fn required_rank(n: usize, m: usize, q: usize) -> usize {
    half_vec_len(n) + (m + q) * n
}

/// Whether the stacked data matrix has full column rank, with the rank found.
pub fn check_rank(log: &DataLog) -> (bool, usize) {
    let stacked = log.stacked();
    let r = equilibrated_rank(&stacked);
    (r == stacked.ncols(), r)
}

/// Samples per window, requiring `Δt` to be a whole number of steps.
fn steps_per_window(traj: &Trajectory, window: f64) -> Result<usize> {
    let steps = (window / traj.dt).round();
    if !(steps >= 1.0) || (steps * traj.dt - window).abs() > 1e-9 * window {
        return Err(Error::Config(vec![format!(
            "window length {window} s is not a whole number of integrator steps ({} s)",
            traj.dt
        )]));
    }
    Ok(steps as usize)
}

fn accumulate_one(traj: &Trajectory, x_j: &Matrix, spw: usize, rho: usize, j: usize) -> DataLog {
    let (n, m, q, _) = traj.dims();
    let nh = half_vec_len(n);
    let mut i_xx = Matrix::zeros(rho, nh);
    let mut g_xu = Matrix::zeros(rho, n * m);
    let mut g_xv = Matrix::zeros(rho, n * q);
    let mut delta = Matrix::zeros(rho, nh);

    let mut xbar = vec![0.0; n];
    let mut quad = vec![0.0; nh];
    let mut acc_xx = vec![0.0; nh];
    let mut acc_xu = vec![0.0; n * m];
    let mut acc_xv = vec![0.0; n * q];
    let mut start_quad = vec![0.0; nh];
    let h = traj.dt;

    let sample = |k: usize, xbar: &mut [f64]| {
        xbar.copy_from_slice(traj.state(k));
        let v = traj.exo(k);
        for (c, &vc) in v.iter().enumerate() {
            if vc != 0.0 {
                for (i, xb) in xbar.iter_mut().enumerate() {
                    *xb -= x_j[(i, c)] * vc;
                }
            }
        }
    };

    for l in 0..rho {
        acc_xx.fill(0.0);
        acc_xu.fill(0.0);
        acc_xv.fill(0.0);
        let first = l * spw;
        for k in first..=first + spw {
            let w = if k == first || k == first + spw { 0.5 * h } else { h };
            sample(k, &mut xbar);
            vecv_into(&xbar, &mut quad);
            if k == first {
                start_quad.copy_from_slice(&quad);
            }
            for (a, z) in acc_xx.iter_mut().zip(&quad) {
                *a += w * z;
            }
            let u = traj.input(k);
            let v = traj.exo(k);
            for (i, &xi) in xbar.iter().enumerate() {
                let wx = w * xi;
                for (a, &uk) in acc_xu[i * m..(i + 1) * m].iter_mut().zip(u) {
                    *a += wx * uk;
                }
                for (a, &vk) in acc_xv[i * q..(i + 1) * q].iter_mut().zip(v) {
                    *a += wx * vk;
                }
            }
        }
        for c in 0..nh {
            i_xx[(l, c)] = acc_xx[c];
            delta[(l, c)] = quad[c] - start_quad[c];
        }
        for c in 0..n * m {
            g_xu[(l, c)] = acc_xu[c];
        }
        for c in 0..n * q {
            g_xv[(l, c)] = acc_xv[c];
        }
    }
    let boundaries = (0..=rho).map(|l| traj.time(l * spw)).collect();
    DataLog {
        j,
        i_xx,
        g_xu,
        g_xv,
        delta,
        boundaries,
    }
}

/// Integrals for every `X_j` over `ρ` windows of length `Δt` starting at the
/// first sample, sharing one trajectory.
pub fn accumulate(traj: &Trajectory, basis: &XjBasis, window: f64, rho: usize) -> Result<Vec<DataLog>> {
    let (n, _, q, _) = traj.dims();
    if basis.iter().any(|x| x.shape() != (n, q)) {
        return Err(Error::dim("accumulate", "basis matrices do not match the trajectory"));
    }
    if rho == 0 {
        return Err(Error::Config(vec!["at least one window is required".into()]));
    }
    let spw = steps_per_window(traj, window)?;
    let needed = rho * spw + 1;
    if traj.len() < needed {
        let cause = match traj.blowup {
            Some(t) => format!(" (state cap hit at t = {t:.1} s)"),
            None => String::new(),
        };
        return Err(Error::Config(vec![format!(
            "trajectory spans {:.3} s but {rho} windows of {window} s need {:.3} s{cause}",
            traj.end_time() - traj.t0,
            rho as f64 * window
        )]));
    }
    Ok((0..basis.len())
        .into_par_iter()
        .map(|j| accumulate_one(traj, basis.get(j), spw, rho, j))
        .collect())
}
