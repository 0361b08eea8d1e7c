//! Linearized deputy/chief relative motion under differential drag and J2.
//!
//! State `x = [x, y, z, ẋ, ẏ, ż]` in the chief Hill frame (km, km/s), input
//! `u = σ_p` (attitude offset, MRP units), exostate `v ∈ R⁸` made of four
//! undamped oscillator pairs. All computations use km, kg, s; densities and
//! ballistic coefficients are stored in the customary m-based units and
//! converted here.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{
    bdiag, complexify, eigenvalues, rank_complex, Matrix, SymMatrix, Vector, TOL_HURWITZ,
};

pub const EARTH_RADIUS_KM: f64 = 6378.136;
pub const EARTH_MU_KM3_S2: f64 = 398600.4418;
pub const EARTH_J2: f64 = 1.08263e-3;

/// kg/m³ → kg/km³, and (m²/kg)·(kg/m³) = 1/m → 1/km.
const PER_M_TO_PER_KM: f64 = 1.0e3;

pub const STATE_DIM: usize = 6;
pub const INPUT_DIM: usize = 3;
pub const OUTPUT_DIM: usize = 3;
pub const EXO_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitalElements {
    pub semi_major_axis_km: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    pub arg_perigee_deg: f64,
    pub true_anomaly_deg: f64,
}

impl OrbitalElements {
    pub fn chief_default() -> Self {
        OrbitalElements {
            semi_major_axis_km: 6678.136,
            inclination_deg: 45.0,
            raan_deg: 20.0,
            arg_perigee_deg: 30.0,
            true_anomaly_deg: 20.0,
        }
    }

    pub fn deputy_default() -> Self {
        OrbitalElements {
            semi_major_axis_km: 6678.376,
            true_anomaly_deg: 19.75,
            ..Self::chief_default()
        }
    }

    pub fn validate(&self, label: &str, problems: &mut Vec<String>) {
        if !(self.semi_major_axis_km > EARTH_RADIUS_KM) {
            problems.push(format!(
                "{label}.semi_major_axis_km = {} must exceed the Earth radius {EARTH_RADIUS_KM}",
                self.semi_major_axis_km
            ));
        }
        for (name, val) in [
            ("inclination_deg", self.inclination_deg),
            ("raan_deg", self.raan_deg),
            ("arg_perigee_deg", self.arg_perigee_deg),
            ("true_anomaly_deg", self.true_anomaly_deg),
        ] {
            if !val.is_finite() {
                problems.push(format!("{label}.{name} must be finite"));
            }
        }
    }

    /// Keplerian mean motion (rad/s).
    pub fn mean_motion(&self) -> f64 {
        (EARTH_MU_KM3_S2 / self.semi_major_axis_km.powi(3)).sqrt()
    }
}

/// One flat drag facet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Facet {
    pub area_m2: f64,
    pub drag_coeff: f64,
    pub normal: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DragParams {
    /// ∂β_d/∂σ_p per MRP axis, m²/kg per unit σ.
    pub ballistic_sensitivity: [f64; 3],
    pub beta_chief_m2_kg: f64,
    pub beta_deputy_m2_kg: f64,
    pub density_chief_kg_m3: f64,
    pub density_deputy_kg_m3: f64,
    pub scale_height_km: f64,
    pub r_c_km: f64,
    pub mass_kg: f64,
    pub facets: Vec<Facet>,
}

impl Default for DragParams {
    fn default() -> Self {
        let facet = Facet {
            area_m2: 0.06,
            drag_coeff: 2.2,
            normal: [1.0, 0.0, 0.0],
        };
        let mass_kg = 6.0;
        let beta = facet.drag_coeff * facet.area_m2 / mass_kg;
        let facets = vec![facet];
        let magnitude = sensitivity_magnitude(&facets, mass_kg);
        DragParams {
            ballistic_sensitivity: [magnitude; 3],
            beta_chief_m2_kg: beta,
            beta_deputy_m2_kg: beta,
            density_chief_kg_m3: 2.2e-11,
            density_deputy_kg_m3: 2.2e-11,
            scale_height_km: 60.0,
            r_c_km: 300.0,
            mass_kg,
            facets,
        }
    }
}

impl DragParams {
    pub fn validate(&self, problems: &mut Vec<String>) {
        if !(self.mass_kg > 0.0) {
            problems.push(format!("drag.mass_kg = {} must be positive", self.mass_kg));
        }
        if !(self.density_chief_kg_m3 >= 0.0) || !(self.density_deputy_kg_m3 >= 0.0) {
            problems.push("drag densities must be non-negative".into());
        }
        if !(self.scale_height_km > 0.0) {
            problems.push("drag.scale_height_km must be positive".into());
        }
        for (i, f) in self.facets.iter().enumerate() {
            if !(f.area_m2 > 0.0) {
                problems.push(format!("drag.facets[{i}].area_m2 must be positive"));
            }
            let nrm = f.normal.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (nrm - 1.0).abs() > 1e-12 {
                problems.push(format!("drag.facets[{i}].normal is not a unit vector"));
            }
        }
        if self.ballistic_sensitivity.iter().any(|x| !x.is_finite()) {
            problems.push("drag.ballistic_sensitivity must be finite".into());
        }
    }

    /// β_d·P_d in 1/km.
    fn beta_density_deputy(&self) -> f64 {
        self.beta_deputy_m2_kg * self.density_deputy_kg_m3 * PER_M_TO_PER_KM
    }

    fn beta_density_chief(&self) -> f64 {
        self.beta_chief_m2_kg * self.density_chief_kg_m3 * PER_M_TO_PER_KM
    }

    /// Drag damping rate β_d P_d n̄ r_c (1/s).
    pub fn damping(&self, n_bar: f64) -> f64 {
        self.beta_density_deputy() * n_bar * self.r_c_km
    }
}

/// Σᵢ 4 C_D,i A_i / m̄, the scalar factor of the ballistic sensitivity (m²/kg).
pub fn sensitivity_magnitude(facets: &[Facet], mass_kg: f64) -> f64 {
    facets
        .iter()
        .map(|f| 4.0 * f.drag_coeff * f.area_m2)
        .sum::<f64>()
        / mass_kg
}

/// Ballistic-coefficient sensitivity `(1/m̄) Σᵢ 4 C_D,i A_i n̂ᵢᵀ [q̂]×` as a row.
///
/// `q_hat` is the body-frame flow direction at the reference attitude.
pub fn drag_sensitivity(params: &DragParams, q_hat: [f64; 3]) -> Result<[f64; 3]> {
    if !(params.mass_kg > 0.0) {
        return Err(Error::Assumption(format!(
            "drag sensitivity needs positive mass, got {}",
            params.mass_kg
        )));
    }
    if params.facets.is_empty() {
        return Err(Error::Assumption("drag sensitivity needs at least one facet".into()));
    }
    let mut row = [0.0; 3];
    for f in &params.facets {
        let w = 4.0 * f.drag_coeff * f.area_m2 / params.mass_kg;
        // nᵀ[q]× = (n × q)ᵀ
        let n = f.normal;
        let q = q_hat;
        let cross = [
            n[1] * q[2] - n[2] * q[1],
            n[2] * q[0] - n[0] * q[2],
            n[0] * q[1] - n[1] * q[0],
        ];
        for k in 0..3 {
            row[k] += w * cross[k];
        }
    }
    Ok(row)
}

/// Deputy density at radial offset `x_km` from the chief.
pub fn density_at_offset(p_c: f64, x_km: f64, h_km: f64, exponential: bool) -> f64 {
    if exponential {
        p_c * (-x_km / h_km).exp()
    } else {
        p_c * (1.0 - x_km / h_km)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct J2Params {
    pub j2: f64,
    pub r_e_km: f64,
    pub r_ref_km: f64,
    pub inclination_deg: f64,
}

impl Default for J2Params {
    fn default() -> Self {
        J2Params {
            j2: EARTH_J2,
            r_e_km: EARTH_RADIUS_KM,
            r_ref_km: EARTH_RADIUS_KM,
            inclination_deg: 45.0,
        }
    }
}

impl J2Params {
    pub fn inclination_rad(&self) -> f64 {
        self.inclination_deg.to_radians()
    }

    /// s = 3 J2 R_e² / (8 r_ref²) · (1 + 3 cos 2i)
    pub fn s(&self) -> f64 {
        3.0 * self.j2 * self.r_e_km.powi(2) / (8.0 * self.r_ref_km.powi(2))
            * (1.0 + 3.0 * (2.0 * self.inclination_rad()).cos())
    }

    pub fn c(&self) -> f64 {
        (1.0 + self.s()).sqrt()
    }

    /// Ξ = −3 n̄² J2 R_e² / r_ref (km/s²).
    pub fn disturbance_gain(&self, n_bar: f64) -> f64 {
        -3.0 * n_bar * n_bar * self.j2 * self.r_e_km.powi(2) / self.r_ref_km
    }
}

/// How the attitude offset enters the relative acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum Actuation {
    /// Only the ÿ row, `½ n̄² r_c² P_d ∂β/∂σ`.
    AlongTrack,
    /// ÿ row plus the ẍ, ÿ, z̈ velocity-dependent sensitivities linearized at
    /// a reference relative velocity (km/s).
    Extended { reference_velocity: [f64; 3] },
    /// Axis k of σ drives Hill acceleration axis k with gain
    /// `½ n̄² r_c² P_d ∂β/∂σ_k`.
    PerAxis,
}

/// Continuous-time `B` (6×3).
pub fn build_b(n_bar: f64, drag: &DragParams, actuation: Actuation) -> Matrix {
    let pd = drag.density_deputy_kg_m3 * PER_M_TO_PER_KM;
    let s = drag.ballistic_sensitivity;
    let along = 0.5 * n_bar * n_bar * drag.r_c_km * drag.r_c_km * pd;
    let mut b = Matrix::zeros(STATE_DIM, INPUT_DIM);
    match actuation {
        Actuation::AlongTrack => {
            for k in 0..3 {
                b[(4, k)] = along * s[k];
            }
        }
        Actuation::Extended { reference_velocity: v0 } => {
            let vel = 0.5 * pd * drag.r_c_km * n_bar;
            for k in 0..3 {
                b[(3, k)] = -vel * v0[0] * s[k];
                b[(4, k)] = (along - vel * v0[1]) * s[k];
                b[(5, k)] = -vel * v0[2] * s[k];
            }
        }
        Actuation::PerAxis => {
            for k in 0..3 {
                b[(3 + k, k)] = along * s[k];
            }
        }
    }
    b
}

/// Continuous-time `A = [[0, I], [Λ₁, Λ₂]]`.
///
/// Λ₁ = diag((5c²−2)n̄², 0, −n̄²): the z entry follows the scalar z̈ equation.
pub fn build_a(n_bar: f64, j2: &J2Params, drag: &DragParams) -> Matrix {
    let c = j2.c();
    let d = drag.damping(n_bar);
    let n2 = n_bar * n_bar;
    let mut a = Matrix::zeros(STATE_DIM, STATE_DIM);
    for i in 0..3 {
        a[(i, i + 3)] = 1.0;
    }
    a[(3, 0)] = (5.0 * c * c - 2.0) * n2;
    a[(5, 2)] = -n2;
    a[(3, 3)] = -0.5 * d;
    a[(3, 4)] = 2.0 * n_bar * c;
    a[(4, 3)] = -2.0 * n_bar;
    a[(4, 4)] = -d;
    a[(5, 5)] = -0.5 * d;
    a
}

/// Four undamped oscillator pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Exosystem {
    freqs: Vec<f64>,
}

pub const DEFAULT_EXO_FREQS: [f64; 4] = [0.1, 0.2, 0.3, 0.4];

impl Default for Exosystem {
    fn default() -> Self {
        Exosystem {
            freqs: DEFAULT_EXO_FREQS.to_vec(),
        }
    }
}

impl Exosystem {
    pub fn new(freqs: Vec<f64>) -> Self {
        Exosystem { freqs }
    }

    /// Recover block frequencies from a block-rotation `E`.
    pub fn from_matrix(e: &Matrix) -> Result<Self> {
        let q = e.nrows();
        if !e.is_square() || !q.is_multiple_of(2) {
            return Err(Error::dim("Exosystem", "E must be square with even order"));
        }
        let mut freqs = Vec::with_capacity(q / 2);
        for k in 0..q / 2 {
            let w = e[(2 * k, 2 * k + 1)];
            let mut expected = Matrix::zeros(q, q);
            expected[(2 * k, 2 * k + 1)] = w;
            expected[(2 * k + 1, 2 * k)] = -w;
            let blk = e.view((2 * k, 0), (2, q));
            if (blk - expected.view((2 * k, 0), (2, q))).amax() > 0.0 {
                return Err(Error::dim("Exosystem", "E is not block-diagonal rotations"));
            }
            freqs.push(w);
        }
        Ok(Exosystem { freqs })
    }

    pub fn dim(&self) -> usize {
        2 * self.freqs.len()
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn matrix(&self) -> Matrix {
        let blocks: Vec<Matrix> = self
            .freqs
            .iter()
            .map(|&w| Matrix::from_row_slice(2, 2, &[0.0, w, -w, 0.0]))
            .collect();
        bdiag(&blocks).expect("non-empty exosystem")
    }

    /// Exact propagation by `exp(E·dt)`.
    pub fn step(&self, v: &Vector, dt: f64) -> Vector {
        let mut out = v.clone();
        self.step_into(v.as_slice(), dt, out.as_mut_slice());
        out
    }

    pub fn step_into(&self, v: &[f64], dt: f64, out: &mut [f64]) {
        if dt == 0.0 {
            out[..v.len()].copy_from_slice(v);
            return;
        }
        for (k, &w) in self.freqs.iter().enumerate() {
            let (a, b) = (v[2 * k], v[2 * k + 1]);
            // polar form keeps the radius from accumulating rounding drift
            let r = a.hypot(b);
            let (sn, cs) = (b.atan2(a) - w * dt).sin_cos();
            out[2 * k] = r * cs;
            out[2 * k + 1] = r * sn;
        }
    }
}

/// Advance the exostate by `dt` using the closed-form rotation of each block.
pub fn exo_step(e: &Matrix, v: &Vector, dt: f64) -> Result<Vector> {
    if v.len() != e.nrows() {
        return Err(Error::dim("exo_step", "v length"));
    }
    Ok(Exosystem::from_matrix(e)?.step(v, dt))
}

/// `(E, C, F, D)` for the tracking/disturbance exosystem.
pub fn build_exo_and_output(
    n_bar: f64,
    j2: &J2Params,
    drag: &DragParams,
    exo: &Exosystem,
) -> (Matrix, Matrix, Matrix, Matrix) {
    let e = exo.matrix();
    let q = exo.dim();
    let mut c = Matrix::zeros(OUTPUT_DIM, STATE_DIM);
    let mut f = Matrix::zeros(OUTPUT_DIM, q);
    for i in 0..3 {
        c[(i, i)] = 1.0;
        f[(i, i)] = 1.0;
    }
    let big_xi = j2.disturbance_gain(n_bar);
    let small_xi = -n_bar * n_bar * drag.r_c_km * drag.r_c_km
        * (drag.beta_density_chief() - drag.beta_density_deputy())
        / 2.0;
    let mut d = Matrix::zeros(STATE_DIM, q);
    if q >= 8 {
        d[(3, 2)] = big_xi;
        d[(3, 5)] = big_xi;
        d[(4, 4)] = big_xi + small_xi;
        d[(5, 0)] = big_xi;
        d[(5, 6)] = big_xi;
    }
    (e, c, f, d)
}

/// The plant/exosystem/output matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
    pub e: Matrix,
    pub f: Matrix,
    pub n_bar: f64,
}

/// Everything needed to assemble a [`PlantModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlantParams {
    pub n_bar: f64,
    pub j2: J2Params,
    pub drag: DragParams,
    pub actuation: Actuation,
    /// When set, `B` is rescaled so that its largest entry has this magnitude
    /// (km/s² per unit σ).
    pub input_authority: Option<f64>,
    pub exo: Exosystem,
}

pub const DEFAULT_N_BAR: f64 = 0.00108;
pub const DEFAULT_INPUT_AUTHORITY: f64 = 3000.0;

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            n_bar: DEFAULT_N_BAR,
            j2: J2Params::default(),
            drag: DragParams::default(),
            actuation: Actuation::PerAxis,
            input_authority: Some(DEFAULT_INPUT_AUTHORITY),
            exo: Exosystem::default(),
        }
    }
}

impl PlantModel {
    pub fn build(params: &PlantParams) -> Result<Self> {
        if !(params.n_bar > 0.0) {
            return Err(Error::Config(vec![format!(
                "n_bar = {} must be positive",
                params.n_bar
            )]));
        }
        let a = build_a(params.n_bar, &params.j2, &params.drag);
        let mut b = build_b(params.n_bar, &params.drag, params.actuation);
        if let Some(target) = params.input_authority {
            let peak = b.amax();
            if peak == 0.0 {
                return Err(Error::Config(vec![
                    "input_authority set but the physical B is identically zero".into(),
                ]));
            }
            b *= target / peak;
        }
        let (e, c, f, d) =
            build_exo_and_output(params.n_bar, &params.j2, &params.drag, &params.exo);
        Ok(PlantModel {
            a,
            b,
            c,
            d,
            e,
            f,
            n_bar: params.n_bar,
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }
    pub fn q(&self) -> usize {
        self.e.nrows()
    }

    /// Sylvester map `S(X) = XE − AX`.
    pub fn sylvester(&self, x: &Matrix) -> Matrix {
        x * &self.e - &self.a * x
    }

    pub fn exosystem(&self) -> Result<Exosystem> {
        Exosystem::from_matrix(&self.e)
    }

    pub fn orbital_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n_bar
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankAtEigenvalue {
    pub lambda: Complex<f64>,
    pub rank: usize,
    pub required: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub stabilizable: bool,
    pub observable: bool,
    pub cost_observable: bool,
    pub regulator_ranks: Vec<RankAtEigenvalue>,
    pub exo_neutral: bool,
}

impl AssumptionReport {
    pub fn regulator_solvable(&self) -> bool {
        self.regulator_ranks.iter().all(|r| r.rank == r.required)
    }

    pub fn all_ok(&self) -> bool {
        self.stabilizable
            && self.observable
            && self.cost_observable
            && self.regulator_solvable()
            && self.exo_neutral
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.stabilizable {
            out.push("(A, B) is not stabilizable".to_string());
        }
        if !self.observable {
            out.push("(C, A) is not observable".to_string());
        }
        if !self.cost_observable {
            out.push("(A, sqrt(Q)) is not observable".to_string());
        }
        for r in self.regulator_ranks.iter().filter(|r| r.rank != r.required) {
            out.push(format!(
                "rank [A-λI, B; C, 0] = {} < {} at λ = {:.4}{:+.4}i",
                r.rank, r.required, r.lambda.re, r.lambda.im
            ));
        }
        if !self.exo_neutral {
            out.push("exosystem spectrum is not purely imaginary".to_string());
        }
        out
    }
}

fn shifted(a: &Matrix, lambda: Complex<f64>) -> nalgebra::DMatrix<Complex<f64>> {
    let mut m = complexify(a);
    for i in 0..a.nrows() {
        m[(i, i)] -= lambda;
    }
    m
}

/// PBH: every eigenvalue of `a` with `Re λ ≥ −tol` (all of them when
/// `all_modes`) satisfies `rank [A − λI, B] = n`.
pub fn pbh_controllable(a: &Matrix, b: &Matrix, all_modes: bool) -> Result<bool> {
    let n = a.nrows();
    let b = &unit_columns(b);
    for lambda in eigenvalues(a)? {
        if !all_modes && lambda.re < -TOL_HURWITZ {
            continue;
        }
        let s = shifted(a, lambda);
        let mut m = nalgebra::DMatrix::<Complex<f64>>::zeros(n, n + b.ncols());
        m.view_mut((0, 0), (n, n)).copy_from(&s);
        m.view_mut((0, n), (n, b.ncols())).copy_from(&complexify(b));
        if rank_complex(&m) < n {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Rank tests are invariant under column scaling; normalizing keeps tiny
/// physical input gains from being mistaken for zeros.
fn unit_columns(b: &Matrix) -> Matrix {
    let mut out = b.clone();
    for mut col in out.column_iter_mut() {
        let nrm = col.norm();
        if nrm > 0.0 {
            col /= nrm;
        }
    }
    out
}

/// PBH observability of `(C, A)`.
pub fn pbh_observable(c: &Matrix, a: &Matrix) -> Result<bool> {
    pbh_controllable(&a.transpose(), &c.transpose(), true)
}

/// Symmetric square root of a PSD matrix.
pub fn sym_sqrt(q: &SymMatrix) -> Matrix {
    let eig = q.as_matrix().clone().symmetric_eigen();
    let d = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    &eig.eigenvectors * Matrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// `rank [A − λI, B; C, 0]` for every `λ ∈ σ(E)`; solvability of the
/// regulator equations needs `n + p` at each.
pub fn regulator_ranks(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    e: &Matrix,
) -> Result<Vec<RankAtEigenvalue>> {
    let (n, m, p) = (a.nrows(), b.ncols(), c.nrows());
    let b_unit = complexify(&unit_columns(b));
    let c_cplx = complexify(c);
    eigenvalues(e)?
        .into_iter()
        .map(|lambda| {
            let mut mat = nalgebra::DMatrix::<Complex<f64>>::zeros(n + p, n + m);
            mat.view_mut((0, 0), (n, n)).copy_from(&shifted(a, lambda));
            mat.view_mut((0, n), (n, m)).copy_from(&b_unit);
            mat.view_mut((n, 0), (p, n)).copy_from(&c_cplx);
            Ok(RankAtEigenvalue {
                lambda,
                rank: rank_complex(&mat),
                required: n + p,
            })
        })
        .collect()
}

/// Check stabilizability, observability and the regulator rank condition.
pub fn validate_assumptions(plant: &PlantModel, q: &SymMatrix) -> Result<AssumptionReport> {
    let stabilizable = pbh_controllable(&plant.a, &plant.b, false)?;
    let observable = pbh_observable(&plant.c, &plant.a)?;
    let cost_observable = pbh_observable(&sym_sqrt(q), &plant.a)?;
    let exo_neutral = eigenvalues(&plant.e)?
        .iter()
        .all(|z| z.re.abs() <= 1e-12);
    let regulator_ranks = regulator_ranks(&plant.a, &plant.b, &plant.c, &plant.e)?;
    Ok(AssumptionReport {
        stabilizable,
        observable,
        cost_observable,
        regulator_ranks,
        exo_neutral,
    })
}
