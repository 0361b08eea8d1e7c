//! Shared numerics probes for the integration and acceptance suites.
#![allow(dead_code)]

use dragreg::adp::{accumulate, build_xj_basis};
use dragreg::linops::Matrix;
use dragreg::plant::{PlantModel, PlantParams};
use dragreg::sim::{integrate, SimOptions, ZeroInput};

pub const CW_N: f64 = 0.00108;

/// Pure Clohessy–Wiltshire plant with the disturbance input removed.
pub fn cw_plant() -> PlantModel {
    let n = CW_N;
    let mut plant = PlantModel::build(&PlantParams::default()).unwrap();
    let mut a = Matrix::zeros(6, 6);
    for i in 0..3 {
        a[(i, i + 3)] = 1.0;
    }
    a[(3, 0)] = 3.0 * n * n;
    a[(3, 4)] = 2.0 * n;
    a[(4, 3)] = -2.0 * n;
    a[(5, 2)] = -n * n;
    plant.a = a;
    plant.d = Matrix::zeros(6, 8);
    plant
}

/// Closed-form CW solution.
pub fn cw_exact(x0: &[f64], t: f64) -> [f64; 6] {
    let n = CW_N;
    let (s, c) = (n * t).sin_cos();
    let [x, y, z, xd, yd, zd] = [x0[0], x0[1], x0[2], x0[3], x0[4], x0[5]];
    [
        (4.0 - 3.0 * c) * x + s / n * xd + 2.0 / n * (1.0 - c) * yd,
        6.0 * (s - n * t) * x + y - 2.0 / n * (1.0 - c) * xd + (4.0 * s - 3.0 * n * t) / n * yd,
        z * c + zd / n * s,
        3.0 * n * s * x + c * xd + 2.0 * s * yd,
        6.0 * n * (c - 1.0) * x - 2.0 * s * xd + (4.0 * c - 3.0) * yd,
        -z * n * s + zd * c,
    ]
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Smallest observed convergence order between consecutive halvings.
pub fn min_order(errs: &[f64]) -> f64 {
    errs.windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .fold(f64::INFINITY, f64::min)
}

/// Final-state errors of RK4 against the CW solution at t = 6000 s (about one
/// orbit) for dt = 120, 60, 30 s.
pub fn cw_errors() -> Vec<f64> {
    let plant = cw_plant();
    let x0 = [1.0, -2.0, 0.5, 1e-3, -2.0 * CW_N, 2e-4];
    [120.0, 60.0, 30.0]
        .iter()
        .map(|&dt| {
            let traj = integrate(&plant, &ZeroInput, &x0, &[0.0; 8], 6000.0, dt, &SimOptions::default()).unwrap();
            let last = traj.len() - 1;
            dist(traj.state(last), &cw_exact(&x0, traj.time(last)))
        })
        .collect()
}

/// Largest change of any exosystem block norm over `horizon` seconds.
pub fn exo_drift(horizon: f64, substeps: usize) -> f64 {
    let mut plant = PlantModel::build(&PlantParams::default()).unwrap();
    plant.d = Matrix::zeros(6, 8);
    let opts = SimOptions { substeps, ..SimOptions::default() };
    let v0 = [1.0, 0.0, 0.6, -0.8, 0.0, 2.0, 0.3, 0.4];
    let traj = integrate(&plant, &ZeroInput, &[0.0; 6], &v0, horizon, 1.0, &opts).unwrap();
    traj.require_complete().unwrap();
    let block = |v: &[f64], b: usize| v[2 * b].hypot(v[2 * b + 1]);
    let mut worst: f64 = 0.0;
    for k in (0..traj.len()).step_by(97).chain([traj.len() - 1]) {
        for b in 0..4 {
            worst = worst.max((block(traj.exo(k), b) - block(&v0, b)).abs());
        }
    }
    worst
}

/// Window-integral errors of `∫ x₁²` for `x₁ = cos(0.2 t)` sampled at
/// h = 0.5, 0.25, 0.125 s.
pub fn quadrature_errors() -> Vec<f64> {
    let w = 0.2;
    let mut plant = PlantModel::build(&PlantParams::default()).unwrap();
    plant.a = Matrix::zeros(6, 6);
    plant.a[(0, 3)] = 1.0;
    plant.a[(3, 0)] = -w * w;
    plant.d = Matrix::zeros(6, 8);
    let basis = build_xj_basis(&plant.c, &plant.f).unwrap();
    let exact = |a: f64, b: f64| 0.5 * (b - a) + ((2.0 * w * b).sin() - (2.0 * w * a).sin()) / (4.0 * w);
    [0.5, 0.25, 0.125]
        .iter()
        .map(|&h| {
            let opts = SimOptions { substeps: 32, ..SimOptions::default() };
            let x0 = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
            let traj = integrate(&plant, &ZeroInput, &x0, &[0.0; 8], 20.0, h, &opts).unwrap();
            let log = &accumulate(&traj, &basis, 5.0, 4).unwrap()[0];
            (0..4)
                .map(|l| (log.i_xx[(l, 0)] - exact(5.0 * l as f64, 5.0 * (l + 1) as f64)).abs())
                .sum::<f64>()
        })
        .collect()
}
