//! Multistart simplex search for the system frequencies `(gτ, ωτ)` that make
//! the continuous evolution track the target walk.
//!
//! The target walk uses the nominal angles: a `2π/(rd)` conditional hop and
//! the `Rx(π/2)` coin. The objective is the Hellinger distance between the
//! two phase distributions averaged over a step window.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::hellinger;
pub use crate::metrics::StepWindow;
use crate::phase_space::{PhaseBasis, PhaseSource, WalkConfig};
use crate::walk::{BlockPropagator, Dynamics, JointState, Walker};

/// `(ωτ/gτ) / ((π/2)/(2π/(rd))) = 4ωτ/(r d gτ)`.
pub fn c_ratio(g_tau: f64, omega_tau: f64, r: f64, d: usize) -> f64 {
    4.0 * omega_tau / (r * d as f64 * g_tau)
}

/// Mean Hellinger distance between the trial dynamics and the target walk.
#[derive(Debug, Clone)]
pub struct Objective {
    cfg: WalkConfig,
    window: StepWindow,
    trial: Dynamics,
    basis: PhaseBasis,
    initial: JointState,
    /// Target phase distributions for steps `window.start..=window.end`.
    target: Vec<Vec<f64>>,
}

impl Objective {
    /// Trial dynamics is the exact evolution.
    pub fn new(cfg: &WalkConfig, window: StepWindow) -> Result<Self> {
        Self::with_trial(cfg, window, Dynamics::Exact)
    }

    /// `trial` must be a pure dynamics; `Trotter` turns the objective into a
    /// self-distance check at the nominal frequencies.
    pub fn with_trial(cfg: &WalkConfig, window: StepWindow, trial: Dynamics) -> Result<Self> {
        if window.is_empty() {
            return Err(Error::InvalidConfig("objective window is empty".into()));
        }
        if trial.is_decoherent() {
            return Err(Error::InvalidConfig(
                "the objective compares pure dynamics only".into(),
            ));
        }
        let nominal = cfg.with_nominal_frequencies();
        nominal.validate()?;
        let basis = PhaseBasis::new(cfg.d);
        let mut walker = Walker::new(&nominal, Dynamics::Standard)?;
        let mut target = Vec::with_capacity(window.len());
        while walker.step() <= window.end {
            if walker.step() >= window.start {
                target.push(walker.state().phase_probs(&basis)?);
            }
            walker.advance();
        }
        Ok(Objective {
            initial: JointState::initial(cfg),
            cfg: cfg.clone(),
            window,
            trial,
            basis,
            target,
        })
    }

    pub fn window(&self) -> StepWindow {
        self.window
    }

    pub fn config(&self) -> &WalkConfig {
        &self.cfg
    }

    fn propagator(&self, g_tau: f64, omega_tau: f64) -> BlockPropagator {
        match self.trial {
            Dynamics::Exact | Dynamics::DecoherentExact => {
                BlockPropagator::exact(g_tau, omega_tau, self.cfg.d)
            }
            _ => BlockPropagator::standard(g_tau, omega_tau, self.cfg.d),
        }
    }

    /// Hellinger distance at each step of the window.
    pub fn per_step(&self, g_tau: f64, omega_tau: f64) -> Result<Vec<f64>> {
        let prop = self.propagator(g_tau, omega_tau);
        let mut state = self.initial.clone();
        let mut out = Vec::with_capacity(self.window.len());
        for step in 0..=self.window.end {
            if step >= self.window.start {
                let probs = state.phase_probs(&self.basis)?;
                out.push(hellinger(&probs, &self.target[step - self.window.start])?);
            }
            if step < self.window.end {
                prop.apply_state(&mut state);
            }
        }
        Ok(out)
    }

    pub fn evaluate(&self, g_tau: f64, omega_tau: f64) -> Result<f64> {
        let per_step = self.per_step(g_tau, omega_tau)?;
        Ok(per_step.iter().sum::<f64>() / per_step.len() as f64)
    }

    /// Objective with a penalty outside `gτ > 0`, for the local search.
    fn penalized(&self, x: &[f64; 2]) -> Result<f64> {
        if x[0] <= 0.0 {
            return Ok(1.0 + x[0].abs());
        }
        self.evaluate(x[0], x[1])
    }
}

/// Settings of the local simplex search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexSettings {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Stop once every vertex lies within this distance of the best one.
    pub diameter_tol: f64,
    pub max_iter: usize,
}

impl Default for SimplexSettings {
    fn default() -> Self {
        SimplexSettings {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            diameter_tol: 1e-6,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOutcome {
    pub x: [f64; 2],
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn distance(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn along(from: &[f64; 2], to: &[f64; 2], t: f64) -> [f64; 2] {
    [
        from[0] + t * (to[0] - from[0]),
        from[1] + t * (to[1] - from[1]),
    ]
}

/// Nelder–Mead in two dimensions. `step` sets the initial simplex edges.
pub fn nelder_mead<F>(
    mut f: F,
    x0: [f64; 2],
    step: [f64; 2],
    settings: &SimplexSettings,
) -> Result<SimplexOutcome>
where
    F: FnMut(&[f64; 2]) -> Result<f64>,
{
    let mut simplex = [x0, [x0[0] + step[0], x0[1]], [x0[0], x0[1] + step[1]]];
    let mut values = [f(&simplex[0])?, f(&simplex[1])?, f(&simplex[2])?];
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.map(|k| simplex[k]);
        values = order.map(|k| values[k]);

        let diameter = distance(&simplex[0], &simplex[1]).max(distance(&simplex[0], &simplex[2]));
        if diameter < settings.diameter_tol {
            converged = true;
            break;
        }
        if iterations >= settings.max_iter {
            break;
        }
        iterations += 1;

        let centroid = [
            (simplex[0][0] + simplex[1][0]) / 2.0,
            (simplex[0][1] + simplex[1][1]) / 2.0,
        ];
        let worst = simplex[2];
        let reflected = along(&centroid, &worst, -settings.reflection);
        let fr = f(&reflected)?;

        if fr < values[0] {
            let expanded = along(&centroid, &worst, -settings.expansion);
            let fe = f(&expanded)?;
            if fe < fr {
                simplex[2] = expanded;
                values[2] = fe;
            } else {
                simplex[2] = reflected;
                values[2] = fr;
            }
            continue;
        }
        if fr < values[1] {
            simplex[2] = reflected;
            values[2] = fr;
            continue;
        }

        // Contract toward whichever of the reflected or worst point is better.
        let (contracted, reference) = if fr < values[2] {
            (along(&centroid, &reflected, settings.contraction), fr)
        } else {
            (along(&centroid, &worst, settings.contraction), values[2])
        };
        let fc = f(&contracted)?;
        if fc < reference {
            simplex[2] = contracted;
            values[2] = fc;
            continue;
        }

        for k in 1..3 {
            simplex[k] = along(&simplex[0], &simplex[k], settings.shrink);
            values[k] = f(&simplex[k])?;
        }
    }

    Ok(SimplexOutcome {
        x: simplex[0],
        fx: values[0],
        iterations,
        converged,
    })
}

/// Box the random starts are drawn from: `gτ ∈ (0, 4π/(rd)]` and
/// `ωτ ∈ (0, π]`, widened to `(0, 5π]` at `r = 1` where the optimum sits
/// near `ωτ ≈ 10 · π/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartBox {
    pub g_tau_max: f64,
    pub omega_tau_max: f64,
}

impl StartBox {
    pub fn for_config(cfg: &WalkConfig) -> Self {
        let omega_tau_max = if (cfg.r - 1.0).abs() < 1e-12 {
            5.0 * PI
        } else {
            PI
        };
        StartBox {
            g_tau_max: 4.0 * PI / (cfg.r * cfg.d as f64),
            omega_tau_max,
        }
    }

    /// Start for restart seed `seed`, uniform on the half-open box.
    pub fn draw(&self, seed: u64) -> [f64; 2] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // random() lies in [0, 1), so 1 − u lies in (0, 1].
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        [self.g_tau_max * (1.0 - u), self.omega_tau_max * (1.0 - v)]
    }

    fn simplex_step(&self) -> [f64; 2] {
        [0.1 * self.g_tau_max, 0.1 * self.omega_tau_max]
    }
}

/// One local search of the multistart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub index: usize,
    pub seed: u64,
    pub start: [f64; 2],
    pub start_objective: Option<f64>,
    pub g_tau: Option<f64>,
    pub omega_tau: Option<f64>,
    /// `ωτ` reduced modulo `4π`, the period of the bare coin rotation.
    pub omega_tau_reduced: Option<f64>,
    pub objective: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub d: usize,
    pub r: f64,
    pub g_tau_opt: f64,
    pub omega_tau_opt: f64,
    pub omega_tau_reduced: f64,
    pub objective: f64,
    pub c_ratio: f64,
    pub window: StepWindow,
    pub restarts: usize,
    pub best_restart_index: usize,
    pub best_restart_seed: u64,
    pub start_box: StartBox,
    pub trace: Vec<RestartRecord>,
}

impl OptimizationResult {
    /// Template config with the optimized frequencies.
    pub fn apply_to(&self, cfg: &WalkConfig) -> WalkConfig {
        cfg.with_frequencies(self.g_tau_opt, self.omega_tau_opt)
    }
}

fn run_restart(
    objective: &Objective,
    index: usize,
    seed: u64,
    start: [f64; 2],
    step: [f64; 2],
    settings: &SimplexSettings,
) -> RestartRecord {
    let start_objective = objective.penalized(&start).ok();
    match nelder_mead(|x| objective.penalized(x), start, step, settings) {
        Ok(out) => RestartRecord {
            index,
            seed,
            start,
            start_objective,
            g_tau: Some(out.x[0]),
            omega_tau: Some(out.x[1]),
            omega_tau_reduced: Some(out.x[1].rem_euclid(4.0 * PI)),
            objective: Some(out.fx),
            iterations: out.iterations,
            converged: out.converged,
            error: None,
        },
        Err(e) => RestartRecord {
            index,
            seed,
            start,
            start_objective,
            g_tau: None,
            omega_tau: None,
            omega_tau_reduced: None,
            objective: None,
            iterations: 0,
            converged: false,
            error: Some(e.to_string()),
        },
    }
}

fn merge(
    cfg: &WalkConfig,
    window: StepWindow,
    start_box: StartBox,
    trace: Vec<RestartRecord>,
) -> Result<OptimizationResult> {
    let best = trace
        .iter()
        .filter(|r| r.objective.is_some() && r.g_tau.is_some_and(|g| g > 0.0))
        .min_by(|a, b| {
            a.objective
                .unwrap()
                .total_cmp(&b.objective.unwrap())
                .then(a.index.cmp(&b.index))
        })
        .ok_or_else(|| {
            let reason = trace
                .iter()
                .find_map(|r| r.error.clone())
                .unwrap_or_else(|| "no restart reached gτ > 0".into());
            Error::InvalidConfig(format!("every restart failed: {reason}"))
        })?;
    let (g, w) = (best.g_tau.unwrap(), best.omega_tau.unwrap());
    Ok(OptimizationResult {
        d: cfg.d,
        r: cfg.r,
        g_tau_opt: g,
        omega_tau_opt: w,
        omega_tau_reduced: w.rem_euclid(4.0 * PI),
        objective: best.objective.unwrap(),
        c_ratio: c_ratio(g, w, cfg.r, cfg.d),
        window,
        restarts: trace.len(),
        best_restart_index: best.index,
        best_restart_seed: best.seed,
        start_box,
        trace,
    })
}

/// Local searches from explicit starting points.
pub fn optimize_from(
    cfg: &WalkConfig,
    window: StepWindow,
    starts: &[[f64; 2]],
    settings: &SimplexSettings,
) -> Result<OptimizationResult> {
    let objective = Objective::new(cfg, window)?;
    let start_box = StartBox::for_config(cfg);
    let step = start_box.simplex_step();
    let trace: Vec<RestartRecord> = starts
        .par_iter()
        .enumerate()
        .map(|(i, &x0)| run_restart(&objective, i, i as u64, x0, step, settings))
        .collect();
    merge(cfg, window, start_box, trace)
}

/// Multistart search from `restarts` uniform random starts. Restart `i`
/// draws its start from seed `seed + i`, so results do not depend on
/// scheduling.
pub fn optimize(
    cfg: &WalkConfig,
    window: StepWindow,
    restarts: usize,
    seed: u64,
) -> Result<OptimizationResult> {
    optimize_with(cfg, window, restarts, seed, &SimplexSettings::default())
}

pub fn optimize_with(
    cfg: &WalkConfig,
    window: StepWindow,
    restarts: usize,
    seed: u64,
    settings: &SimplexSettings,
) -> Result<OptimizationResult> {
    if restarts == 0 {
        return Err(Error::InvalidConfig("restarts must be at least 1".into()));
    }
    let objective = Objective::new(cfg, window)?;
    let start_box = StartBox::for_config(cfg);
    let step = start_box.simplex_step();
    let trace: Vec<RestartRecord> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i as u64);
            run_restart(&objective, i, s, start_box.draw(s), step, settings)
        })
        .collect();
    merge(cfg, window, start_box, trace)
}
