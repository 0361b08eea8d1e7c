//! End-to-end runs: collect data, learn, and compare against the model-based
//! LQR + regulator baseline.

use crate::adp::{build_xj_basis, learn_from_trajectory, ExplorationNoise, LearnedPolicy, LearningSetup};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::linops::{Matrix, SymMatrix, Vector};
use crate::plant::{PlantModel, INPUT_DIM};
use crate::regulator::{feedforward_gain, solve_regulator, RegulatorSolution};
use crate::riccati::{solve_are_exact, AreSolution};
use crate::sim::{
    hill_initial_state, integrate, metrics, Exploring, FeedbackFeedforward, RunMetrics, SimOptions,
    Trajectory,
};

/// A validated configuration with its derived model and weights.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub plant: PlantModel,
    pub q: SymMatrix,
    pub r: SymMatrix,
    pub q_bar: SymMatrix,
    pub r_bar: SymMatrix,
    pub x0: Vector,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let plant = PlantModel::build(&config.plant_params())?;
        let x0 = hill_initial_state(&config.deputy, &config.chief, config.n_bar);
        Ok(Scenario {
            q: config.q()?,
            r: config.r()?,
            q_bar: config.q_bar()?,
            r_bar: config.r_bar()?,
            plant,
            x0,
            config,
        })
    }

    fn sim_options(&self, substeps: usize) -> SimOptions {
        SimOptions {
            t0: 0.0,
            state_cap: self.config.timing.state_cap_km,
            substeps,
        }
    }

    /// Behaviour-policy run over `ρ·Δt` seconds at the learning step.
    pub fn collect(&self) -> Result<Trajectory> {
        let policy = Exploring {
            k0: self.config.k0.matrix(),
            noise: ExplorationNoise::new(&self.config.noise, INPUT_DIM)?,
        };
        integrate(
            &self.plant,
            &policy,
            self.x0.as_slice(),
            &self.config.v0,
            self.config.collection_s(),
            self.config.timing.learn_dt,
            &self.sim_options(1),
        )
    }

    pub fn learn(&self, data: &Trajectory) -> Result<LearnedPolicy> {
        let basis = build_xj_basis(&self.plant.c, &self.plant.f)?;
        let setup = LearningSetup {
            q: self.q.clone(),
            r: self.r.clone(),
            schedule: self.config.schedule()?,
            q_bar: self.q_bar.clone(),
            r_bar: self.r_bar.clone(),
            window: self.config.timing.window,
            rho: self.config.timing.rho,
        };
        learn_from_trajectory(data, &basis, &setup)
    }

    /// Model-based baseline gains.
    pub fn oracle(&self) -> Result<OracleGains> {
        let p = &self.plant;
        let are = solve_are_exact(&p.a, &p.b, &self.q, &self.r)?;
        let regulator = solve_regulator(&p.a, &p.b, &p.c, &p.d, &p.e, &p.f, &self.q_bar, &self.r_bar)?;
        let l = feedforward_gain(&regulator.u, &are.k, &regulator.x)?;
        Ok(OracleGains { are, regulator, l })
    }

    /// Noise-free closed loop `u = −Kx + Lv` from the scenario's initial
    /// state over the full horizon.
    pub fn evaluate(&self, k: &Matrix, l: &Matrix) -> Result<Trajectory> {
        let (n, m, q) = (self.plant.n(), self.plant.m(), self.plant.q());
        if k.shape() != (m, n) || l.shape() != (m, q) {
            return Err(Error::dim(
                "evaluate",
                format!("K is {:?} and L is {:?}, expected ({m}, {n}) and ({m}, {q})", k.shape(), l.shape()),
            ));
        }
        let policy = FeedbackFeedforward {
            k: k.clone(),
            l: l.clone(),
        };
        let traj = integrate(
            &self.plant,
            &policy,
            self.x0.as_slice(),
            &self.config.v0,
            self.config.horizon_s(),
            self.config.timing.dt,
            &self.sim_options(self.config.timing.substeps),
        )?;
        traj.require_complete()?;
        Ok(traj)
    }

    /// Metrics against the true regulator manifold.
    pub fn score(&self, traj: &Trajectory, oracle: &OracleGains) -> Result<RunMetrics> {
        metrics(
            traj,
            &oracle.regulator.x,
            &oracle.regulator.u,
            &self.q,
            &self.r,
            self.config.timing.settling_tol_km,
        )
    }
}

#[derive(Debug, Clone)]
pub struct OracleGains {
    pub are: AreSolution,
    pub regulator: RegulatorSolution,
    pub l: Matrix,
}

/// Learned-gain and baseline closed loops from the same initial condition.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub oracle: OracleGains,
    pub vi: Trajectory,
    pub lqr: Trajectory,
    pub vi_metrics: RunMetrics,
    pub lqr_metrics: RunMetrics,
}

/// Run `u = −Kx + Lv` and the model-based baseline side by side.
pub fn compare(sc: &Scenario, k: &Matrix, l: &Matrix) -> Result<Comparison> {
    let oracle = sc.oracle()?;
    let (vi, lqr) = rayon::join(
        || sc.evaluate(k, l),
        || sc.evaluate(&oracle.are.k, &oracle.l),
    );
    let (vi, lqr) = (vi?, lqr?);
    Ok(Comparison {
        vi_metrics: sc.score(&vi, &oracle)?,
        lqr_metrics: sc.score(&lqr, &oracle)?,
        oracle,
        vi,
        lqr,
    })
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub learned: LearnedPolicy,
    pub oracle: OracleGains,
    pub learning: Trajectory,
    pub vi: Trajectory,
    pub lqr: Trajectory,
    pub vi_metrics: RunMetrics,
    pub lqr_metrics: RunMetrics,
}

/// Collect, learn, then run the learned and baseline branches side by side.
pub fn run_scenario(config: ScenarioConfig) -> Result<ScenarioOutcome> {
    let sc = Scenario::new(config)?;
    let learning = sc.collect()?;
    let learned = sc.learn(&learning)?;
    let cmp = compare(&sc, &learned.k, &learned.l)?;
    Ok(ScenarioOutcome {
        learned,
        oracle: cmp.oracle,
        learning,
        vi: cmp.vi,
        lqr: cmp.lqr,
        vi_metrics: cmp.vi_metrics,
        lqr_metrics: cmp.lqr_metrics,
    })
}
