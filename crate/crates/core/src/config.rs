//! Scenario files (TOML).
//!
//! Every field is optional; omitted fields take the reference-mission values.
//! See the README for the full grammar.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adp::noise::NoiseSpec;
use crate::adp::required_rank;
use crate::error::{Error, Result};
use crate::linops::{Matrix, SymMatrix};
use crate::plant::{
    Actuation, DragParams, Exosystem, J2Params, OrbitalElements, PlantParams, DEFAULT_EXO_FREQS,
    DEFAULT_INPUT_AUTHORITY, DEFAULT_N_BAR, EXO_DIM, INPUT_DIM, STATE_DIM,
};
use crate::riccati::{BoundSchedule, StepSizes, ViSchedule, DEFAULT_VI_MAX_ITER, DEFAULT_VI_THRESHOLD};
use crate::sim::{DEFAULT_SETTLING_TOL_KM, DEFAULT_STATE_CAP_KM};

/// Relative disagreement between `n̄` and the Keplerian rate that triggers a
/// warning.
pub const MEAN_MOTION_WARN: f64 = 0.05;

/// A weight matrix given as `s` (s·I), a diagonal, or full rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl WeightSpec {
    pub fn to_matrix(&self, dim: usize) -> std::result::Result<Matrix, String> {
        match self {
            WeightSpec::Scalar(s) => Ok(Matrix::identity(dim, dim) * *s),
            WeightSpec::Diagonal(d) if d.len() == dim => {
                Ok(Matrix::from_diagonal(&crate::linops::Vector::from_column_slice(d)))
            }
            WeightSpec::Diagonal(d) => Err(format!("diagonal has {} entries, need {dim}", d.len())),
            WeightSpec::Full(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(format!("full matrix must be {dim}x{dim}"));
                }
                Ok(Matrix::from_fn(dim, dim, |i, j| rows[i][j]))
            }
        }
    }

    fn check(&self, label: &str, dim: usize, definite: bool, problems: &mut Vec<String>) {
        let m = match self.to_matrix(dim) {
            Ok(m) => m,
            Err(e) => return problems.push(format!("{label}: {e}")),
        };
        let sym = match SymMatrix::new(m) {
            Ok(s) => s,
            Err(_) => return problems.push(format!("{label} must be symmetric")),
        };
        let lo = sym.min_eigenvalue();
        if definite && !(lo > 0.0) {
            problems.push(format!("{label} must be positive definite (min eigenvalue {lo:e})"));
        } else if !definite && lo < -1e-12 * sym.norm() {
            problems.push(format!(
                "{label} must be positive semidefinite (min eigenvalue {lo:e})"
            ));
        }
    }

    fn sym(&self, dim: usize) -> Result<SymMatrix> {
        let m = self.to_matrix(dim).map_err(|e| Error::Config(vec![e]))?;
        SymMatrix::new(m)
    }
}

/// How `B` is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum InputScaling {
    /// Physical drag sensitivity.
    Physical,
    /// Rescale so the largest entry of `B` equals `peak` (km/s² per unit σ).
    Authority { peak: f64 },
}

/// Which period converts orbit counts to seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodBasis {
    /// `2π/√(μ/a³)` of the chief orbit.
    Keplerian,
    /// `2π/n̄`.
    NBar,
}

/// Feedback gain applied while collecting data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum InitialGain {
    Zero,
    /// Entries uniform in `[−bound, bound]`.
    Random { bound: f64, seed: u64 },
}

impl InitialGain {
    pub fn matrix(&self) -> Matrix {
        match *self {
            InitialGain::Zero => Matrix::zeros(INPUT_DIM, STATE_DIM),
            InitialGain::Random { bound, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Matrix::from_fn(INPUT_DIM, STATE_DIM, |_, _| {
                    if bound > 0.0 {
                        rng.random_range(-bound..=bound)
                    } else {
                        0.0
                    }
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Weights {
    pub q: WeightSpec,
    pub r: WeightSpec,
    pub q_bar: WeightSpec,
    pub r_bar: WeightSpec,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            q: WeightSpec::Scalar(1.4),
            r: WeightSpec::Scalar(1e7),
            q_bar: WeightSpec::Scalar(1.0),
            r_bar: WeightSpec::Scalar(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Timing {
    pub horizon_periods: f64,
    pub learn_end_periods: f64,
    pub period_basis: PeriodBasis,
    /// Evaluation sample step (s).
    pub dt: f64,
    /// RK4 steps per evaluation sample.
    pub substeps: usize,
    /// Data-collection integrator step (s).
    pub learn_dt: f64,
    /// Window length Δt (s).
    pub window: f64,
    /// Window count ρ.
    pub rho: usize,
    pub settling_tol_km: f64,
    pub state_cap_km: f64,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            horizon_periods: 40.0,
            learn_end_periods: 15.0,
            period_basis: PeriodBasis::Keplerian,
            dt: 1.0,
            substeps: 8,
            learn_dt: 0.005,
            window: 5.0,
            rho: 120,
            settling_tol_km: DEFAULT_SETTLING_TOL_KM,
            state_cap_km: DEFAULT_STATE_CAP_KM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViSettings {
    pub threshold: f64,
    pub max_iter: usize,
    pub steps: StepSizes,
    pub bounds: BoundSchedule,
    pub p0: WeightSpec,
}

impl Default for ViSettings {
    fn default() -> Self {
        ViSettings {
            threshold: DEFAULT_VI_THRESHOLD,
            max_iter: DEFAULT_VI_MAX_ITER,
            steps: StepSizes::default(),
            bounds: BoundSchedule::default(),
            p0: WeightSpec::Scalar(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_bar: f64,
    pub exo_freqs: Vec<f64>,
    /// Initial exostate.
    pub v0: Vec<f64>,
    pub k0: InitialGain,
    pub output_dir: Option<PathBuf>,
    pub chief: OrbitalElements,
    pub deputy: OrbitalElements,
    pub drag: DragParams,
    pub j2: J2Params,
    pub actuation: Actuation,
    pub input_scaling: InputScaling,
    pub weights: Weights,
    pub timing: Timing,
    pub vi: ViSettings,
    pub noise: NoiseSpec,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_bar: DEFAULT_N_BAR,
            exo_freqs: DEFAULT_EXO_FREQS.to_vec(),
            v0: vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            k0: InitialGain::Zero,
            output_dir: None,
            chief: OrbitalElements::chief_default(),
            deputy: OrbitalElements::deputy_default(),
            drag: DragParams::default(),
            j2: J2Params::default(),
            actuation: Actuation::PerAxis,
            input_scaling: InputScaling::Authority {
                peak: DEFAULT_INPUT_AUTHORITY,
            },
            weights: Weights::default(),
            timing: Timing::default(),
            vi: ViSettings::default(),
            noise: NoiseSpec::default(),
        }
    }
}

impl ScenarioConfig {
    /// Every violated invariant, in one list.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if !(self.n_bar > 0.0 && self.n_bar.is_finite()) {
            p.push(format!("n_bar = {} must be positive", self.n_bar));
        }
        self.chief.validate("chief", &mut p);
        self.deputy.validate("deputy", &mut p);
        self.drag.validate(&mut p);
        if !(self.j2.r_ref_km > 0.0 && self.j2.r_e_km > 0.0 && self.j2.j2.is_finite()) {
            p.push("j2: radii must be positive and j2 finite".into());
        }
        if self.exo_freqs.len() * 2 != EXO_DIM {
            p.push(format!(
                "exo_freqs must list {} frequencies, got {}",
                EXO_DIM / 2,
                self.exo_freqs.len()
            ));
        }
        if self.exo_freqs.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            p.push("exo_freqs must be positive".into());
        }
        if self.v0.len() != EXO_DIM || self.v0.iter().any(|x| !x.is_finite()) {
            p.push(format!("v0 must have {EXO_DIM} finite entries"));
        } else {
            for (k, pair) in self.v0.chunks(2).enumerate() {
                if pair[0].hypot(pair[1]) > 1.0 + 1e-12 {
                    p.push(format!("v0 block {k} has norm above 1"));
                }
            }
        }
        if let InitialGain::Random { bound, .. } = self.k0 {
            if !(bound >= 0.0 && bound.is_finite()) {
                p.push("k0.bound must be finite and non-negative".into());
            }
        }
        if let InputScaling::Authority { peak } = self.input_scaling {
            if !(peak > 0.0 && peak.is_finite()) {
                p.push(format!("input_scaling.peak = {peak} must be positive"));
            }
        }
        let w = &self.weights;
        w.q.check("weights.q", STATE_DIM, false, &mut p);
        w.r.check("weights.r", INPUT_DIM, true, &mut p);
        w.q_bar.check("weights.q_bar", STATE_DIM, true, &mut p);
        w.r_bar.check("weights.r_bar", INPUT_DIM, true, &mut p);
        self.vi.p0.check("vi.p0", STATE_DIM, true, &mut p);

        let t = &self.timing;
        if !(t.horizon_periods > 0.0) {
            p.push("timing.horizon_periods must be positive".into());
        }
        if !(t.learn_end_periods > 0.0 && t.learn_end_periods < t.horizon_periods) {
            p.push(format!(
                "timing.learn_end_periods = {} must lie in (0, horizon_periods = {})",
                t.learn_end_periods, t.horizon_periods
            ));
        }
        for (name, val) in [("dt", t.dt), ("learn_dt", t.learn_dt), ("window", t.window)] {
            if !(val > 0.0 && val.is_finite()) {
                p.push(format!("timing.{name} = {val} must be positive"));
            }
        }
        if t.substeps == 0 {
            p.push("timing.substeps must be at least 1".into());
        }
        if t.learn_dt > 0.0 && t.window > 0.0 {
            let steps = (t.window / t.learn_dt).round();
            if steps < 1.0 || (steps * t.learn_dt - t.window).abs() > 1e-9 * t.window {
                p.push(format!(
                    "timing.window = {} must be a whole multiple of timing.learn_dt = {}",
                    t.window, t.learn_dt
                ));
            }
        }
        let need = required_rank(STATE_DIM, INPUT_DIM, EXO_DIM);
        if t.rho < need {
            p.push(format!("timing.rho = {} is below the minimum {need}", t.rho));
        }
        if !(t.settling_tol_km > 0.0) || !(t.state_cap_km > 0.0) {
            p.push("timing.settling_tol_km and timing.state_cap_km must be positive".into());
        }
        if p.is_empty() {
            let collect = t.rho as f64 * t.window;
            let learn_end = t.learn_end_periods * self.period_s();
            if collect > learn_end {
                p.push(format!(
                    "rho * window = {collect} s exceeds the learning phase of {learn_end:.1} s"
                ));
            }
        }
        if !(self.vi.threshold > 0.0) || self.vi.max_iter == 0 {
            p.push("vi.threshold and vi.max_iter must be positive".into());
        }
        self.vi.steps.validate(&mut p);
        self.vi.bounds.validate(&mut p);
        self.noise.validate(&mut p);
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    /// Relative gap between `n̄` and the chief's Keplerian mean motion.
    pub fn mean_motion_gap(&self) -> f64 {
        let kep = self.chief.mean_motion();
        (self.n_bar - kep).abs() / kep
    }

    pub fn period_s(&self) -> f64 {
        let rate = match self.timing.period_basis {
            PeriodBasis::Keplerian => self.chief.mean_motion(),
            PeriodBasis::NBar => self.n_bar,
        };
        std::f64::consts::TAU / rate
    }

    pub fn horizon_s(&self) -> f64 {
        self.timing.horizon_periods * self.period_s()
    }

    pub fn learn_end_s(&self) -> f64 {
        self.timing.learn_end_periods * self.period_s()
    }

    /// Length of the recorded collection run, `ρ·Δt`.
    pub fn collection_s(&self) -> f64 {
        self.timing.rho as f64 * self.timing.window
    }

    pub fn plant_params(&self) -> PlantParams {
        PlantParams {
            n_bar: self.n_bar,
            j2: self.j2,
            drag: self.drag.clone(),
            actuation: self.actuation,
            input_authority: match self.input_scaling {
                InputScaling::Physical => None,
                InputScaling::Authority { peak } => Some(peak),
            },
            exo: Exosystem::new(self.exo_freqs.clone()),
        }
    }

    pub fn q(&self) -> Result<SymMatrix> {
        self.weights.q.sym(STATE_DIM)
    }

    pub fn r(&self) -> Result<SymMatrix> {
        self.weights.r.sym(INPUT_DIM)
    }

    pub fn q_bar(&self) -> Result<SymMatrix> {
        self.weights.q_bar.sym(STATE_DIM)
    }

    pub fn r_bar(&self) -> Result<SymMatrix> {
        self.weights.r_bar.sym(INPUT_DIM)
    }

    pub fn schedule(&self) -> Result<ViSchedule> {
        Ok(ViSchedule {
            steps: self.vi.steps,
            bounds: self.vi.bounds,
            threshold: self.vi.threshold,
            p0: self.vi.p0.sym(STATE_DIM)?,
            max_iter: self.vi.max_iter,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse {
            path: "<serialize>".into(),
            message: e.to_string(),
        })
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        if cfg.mean_motion_gap() > MEAN_MOTION_WARN {
            log::warn!(
                "n_bar = {} differs from the chief's Keplerian mean motion {:.6e} by {:.1}%",
                cfg.n_bar,
                cfg.chief.mean_motion(),
                100.0 * cfg.mean_motion_gap()
            );
        }
        Ok(cfg)
    }
}

/// Read, parse and validate a scenario file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScenarioConfig::from_toml_str(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = ScenarioConfig::from_toml_str("", "empty").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_close!(cfg.horizon_s(), 217247.0, 1.0);
        assert!(cfg.mean_motion_gap() > MEAN_MOTION_WARN);
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = ScenarioConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(ScenarioConfig::from_toml_str(&text, "rt").unwrap(), cfg);
    }

    #[test]
    fn small_rho_is_rejected_with_minimum() {
        let err = ScenarioConfig::from_toml_str("[timing]\nrho = 50\n", "t").unwrap_err();
        match err {
            Error::Config(p) => assert!(p.iter().any(|s| s.contains("87")), "{p:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_problems_are_listed() {
        let text = "n_bar = -1.0\n[timing]\nrho = 10\nlearn_end_periods = 50.0\n[weights]\nr = 0.0\n";
        match ScenarioConfig::from_toml_str(text, "t").unwrap_err() {
            Error::Config(p) => assert!(p.len() >= 4, "{p:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_bad_syntax_are_parse_errors() {
        assert!(matches!(
            ScenarioConfig::from_toml_str("bogus = 1\n", "t"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            ScenarioConfig::from_toml_str("n_bar = \n", "t"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn weight_forms() {
        let cfg = ScenarioConfig::from_toml_str(
            "[weights]\nq = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]\nr = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]]\n",
            "t",
        )
        .unwrap();
        assert_eq!(cfg.q().unwrap()[(5, 5)], 6.0);
        assert_eq!(cfg.r().unwrap()[(1, 1)], 2.0);
        let text = cfg.to_toml().unwrap();
        assert_eq!(ScenarioConfig::from_toml_str(&text, "rt").unwrap(), cfg);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            parse_config("/nonexistent/scenario.toml"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn random_k0_is_seeded_and_bounded() {
        let g = InitialGain::Random {
            bound: 0.5,
            seed: 3,
        };
        assert_eq!(g.matrix(), g.matrix());
        assert!(g.matrix().amax() <= 0.5);
        assert_eq!(InitialGain::Zero.matrix().amax(), 0.0);
    }
}
