//! Walk dynamics: standard coin/shift stepping, exact evolution of the joint
//! Hamiltonian sampled every `τ`, the first-order product formula, and the
//! density-matrix variants with a dephased coin.
//!
//! Sign convention: coin `|0⟩` rotates the walker by `+gτ` (site `m → m+1`
//! when `gτ = 2π/d`), coin `|1⟩` by `−gτ`. Steps are counted per walk step;
//! no physical time axis is kept.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    kron, number_operator, pauli_x, pauli_z, unitary_exp, ComplexMatrix, ComplexVector,
};
use crate::phase_space::{
    coherent_state, find_peaks, site_angle, PhaseBasis, PhaseDistribution, PhaseSource, WalkConfig,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Pure state of the coin ⊗ walker compound, walker in the number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    d: usize,
    amplitudes: ComplexVector,
}

impl JointState {
    pub fn from_amplitudes(d: usize, amplitudes: ComplexVector) -> Result<Self> {
        if amplitudes.len() != 2 * d {
            return Err(Error::DimensionMismatch {
                expected: 2 * d,
                found: amplitudes.len(),
            });
        }
        Ok(JointState { d, amplitudes })
    }

    /// `coin ⊗ walker`.
    pub fn product(coin: [Complex64; 2], walker: &[Complex64]) -> Self {
        let d = walker.len();
        let amplitudes = ComplexVector::from_fn(2 * d, |k, _| coin[k / d] * walker[k % d]);
        JointState { d, amplitudes }
    }

    /// Coherent walker with the configured coin.
    pub fn initial(cfg: &WalkConfig) -> Self {
        let walker = coherent_state(cfg.alpha, cfg.d).amplitudes;
        Self::product(cfg.coin_init, &walker)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }

    /// Walker amplitudes attached to coin state `c`.
    pub fn coin_component(&self, c: usize) -> ComplexVector {
        self.amplitudes.rows(c * self.d, self.d).into_owned()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Multiplies every amplitude by the same phase.
    pub fn with_global_phase(&self, phase: f64) -> Self {
        JointState {
            d: self.d,
            amplitudes: self
                .amplitudes
                .map(|z| z * Complex64::from_polar(1.0, phase)),
        }
    }
}

impl PhaseSource for JointState {
    fn phase_probs(&self, basis: &PhaseBasis) -> Result<Vec<f64>> {
        if basis.d() != self.d {
            return Err(Error::DimensionMismatch {
                expected: basis.d(),
                found: self.d,
            });
        }
        let mut probs = vec![0.0; self.d];
        for c in 0..2 {
            let phase = basis.to_phase(&self.amplitudes.as_slice()[c * self.d..(c + 1) * self.d]);
            for (p, z) in probs.iter_mut().zip(phase.iter()) {
                *p += z.norm_sqr();
            }
        }
        Ok(probs)
    }
}

/// Density operator of the compound, coin-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDensity {
    d: usize,
    matrix: ComplexMatrix,
}

impl JointDensity {
    pub fn from_matrix(d: usize, matrix: ComplexMatrix) -> Result<Self> {
        if matrix.nrows() != 2 * d || matrix.ncols() != 2 * d {
            return Err(Error::DimensionMismatch {
                expected: 2 * d,
                found: matrix.nrows(),
            });
        }
        Ok(JointDensity { d, matrix })
    }

    pub fn from_pure(state: &JointState) -> Self {
        let psi = state.amplitudes();
        JointDensity {
            d: state.d(),
            matrix: psi * psi.adjoint(),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        crate::linalg::trace(&self.matrix).re
    }

    /// Reduced walker density.
    pub fn walker(&self) -> ComplexMatrix {
        crate::linalg::partial_trace_coin(&self.matrix, self.d)
            .expect("JointDensity dimensions are checked on construction")
    }
}

impl PhaseSource for JointDensity {
    fn phase_probs(&self, basis: &PhaseBasis) -> Result<Vec<f64>> {
        if basis.d() != self.d {
            return Err(Error::DimensionMismatch {
                expected: basis.d(),
                found: self.d,
            });
        }
        Ok(basis.diagonal(&self.walker()))
    }
}

/// Either kind of compound state.
#[derive(Debug, Clone, PartialEq)]
pub enum Snapshot {
    Pure(JointState),
    Mixed(JointDensity),
}

impl Snapshot {
    pub fn d(&self) -> usize {
        match self {
            Snapshot::Pure(s) => s.d(),
            Snapshot::Mixed(r) => r.d(),
        }
    }

    pub fn to_density(&self) -> JointDensity {
        match self {
            Snapshot::Pure(s) => JointDensity::from_pure(s),
            Snapshot::Mixed(r) => r.clone(),
        }
    }
}

impl PhaseSource for Snapshot {
    fn phase_probs(&self, basis: &PhaseBasis) -> Result<Vec<f64>> {
        match self {
            Snapshot::Pure(s) => s.phase_probs(basis),
            Snapshot::Mixed(r) => r.phase_probs(basis),
        }
    }
}

/// Dense single-step operators for one frequency pair.
#[derive(Debug, Clone)]
pub struct StepOperators {
    pub d: usize,
    pub g_tau: f64,
    pub omega_tau: f64,
    /// `Rx(ωτ) = exp(−i ωτ σx / 2)`.
    pub coin_rot: ComplexMatrix,
    /// `exp(i gτ σz ⊗ a†a)`.
    pub shift: ComplexMatrix,
    /// `exp(i (gτ σz ⊗ a†a − ωτ σx ⊗ I / 2))`.
    pub exact_step: ComplexMatrix,
    /// `shift · (Rx(ωτ) ⊗ I)`.
    pub trotter_step: ComplexMatrix,
}

impl StepOperators {
    pub fn build(g_tau: f64, omega_tau: f64, d: usize) -> Result<Self> {
        let half = omega_tau / 2.0;
        let coin_rot = ComplexMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(half.cos(), 0.0),
                Complex64::new(0.0, -half.sin()),
                Complex64::new(0.0, -half.sin()),
                Complex64::new(half.cos(), 0.0),
            ],
        );
        let shift = ComplexMatrix::from_fn(2 * d, 2 * d, |i, j| {
            if i != j {
                return ZERO;
            }
            let sign = if i < d { 1.0 } else { -1.0 };
            Complex64::from_polar(1.0, sign * g_tau * (i % d) as f64)
        });
        let identity = ComplexMatrix::identity(d, d);
        let generator = kron(&pauli_z(), &number_operator(d)).scale(g_tau)
            - kron(&pauli_x(), &identity).scale(half);
        let exact_step = unitary_exp(&generator, 1.0)?;
        let trotter_step = &shift * kron(&coin_rot, &identity);
        Ok(StepOperators {
            d,
            g_tau,
            omega_tau,
            coin_rot,
            shift,
            exact_step,
            trotter_step,
        })
    }

    pub fn for_config(cfg: &WalkConfig) -> Result<Self> {
        Self::build(cfg.g_tau, cfg.omega_tau, cfg.d)
    }
}

/// Coin then shift, applied as two separate operations.
pub fn standard_step(state: &JointState, ops: &StepOperators) -> JointState {
    let d = state.d();
    let psi = state.amplitudes();
    let c = &ops.coin_rot;
    let coined = ComplexVector::from_fn(2 * d, |k, _| {
        let (row, n) = (k / d, k % d);
        c[(row, 0)] * psi[n] + c[(row, 1)] * psi[d + n]
    });
    JointState {
        d,
        amplitudes: &ops.shift * coined,
    }
}

/// One step of the continuous evolution.
pub fn exact_step(state: &JointState, ops: &StepOperators) -> JointState {
    JointState {
        d: state.d(),
        amplitudes: &ops.exact_step * state.amplitudes(),
    }
}

/// One step of the product formula, applied as a single operator.
pub fn trotter_step(state: &JointState, ops: &StepOperators) -> JointState {
    JointState {
        d: state.d(),
        amplitudes: &ops.trotter_step * state.amplitudes(),
    }
}

/// Which unitary drives a dephasing step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitaryKind {
    Exact,
    Standard,
}

/// Dephasing of the coin with strength `p`: the coin coherences are scaled by
/// `1 − p`, i.e. `ρ → (1 − p/2) ρ + (p/2) (σz ⊗ I) ρ (σz ⊗ I)`. `p = 1`
/// removes all coin coherence.
pub fn dephase_coin(matrix: &mut ComplexMatrix, d: usize, p: f64) {
    let keep = 1.0 - p;
    for n in 0..d {
        for m in 0..d {
            matrix[(n, d + m)] *= keep;
            matrix[(d + n, m)] *= keep;
        }
    }
}

/// Unitary step followed by the coin dephasing channel.
pub fn dephasing_step(
    rho: &JointDensity,
    ops: &StepOperators,
    p: f64,
    which: UnitaryKind,
) -> JointDensity {
    let u = match which {
        UnitaryKind::Exact => &ops.exact_step,
        UnitaryKind::Standard => &ops.trotter_step,
    };
    let mut matrix = u * rho.matrix() * u.adjoint();
    dephase_coin(&mut matrix, rho.d(), p);
    JointDensity { d: rho.d(), matrix }
}

type Block = [[Complex64; 2]; 2];

fn block_mul(a: &Block, b: &Block) -> Block {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// `exp(i (a σz − b σx))` in closed form.
fn su2_exp(a: f64, b: f64) -> Block {
    let theta = a.hypot(b);
    if theta == 0.0 {
        return [[ONE, ZERO], [ZERO, ONE]];
    }
    let (s, c) = theta.sin_cos();
    let (za, xb) = (s * a / theta, s * b / theta);
    [
        [Complex64::new(c, za), Complex64::new(0.0, -xb)],
        [Complex64::new(0.0, -xb), Complex64::new(c, -za)],
    ]
}

/// Every step operator here commutes with `a†a`, so it acts on each number
/// state `|n⟩` as an independent 2×2 coin unitary. The propagator stores
/// those blocks and applies steps in `O(d)` (pure) or `O(d²)` (mixed).
#[derive(Debug, Clone)]
pub struct BlockPropagator {
    blocks: Vec<Block>,
}

impl BlockPropagator {
    /// Blocks of `exp(i (gτ n σz − ωτ σx / 2))`.
    pub fn exact(g_tau: f64, omega_tau: f64, d: usize) -> Self {
        BlockPropagator {
            blocks: (0..d)
                .map(|n| su2_exp(g_tau * n as f64, omega_tau / 2.0))
                .collect(),
        }
    }

    /// Blocks of `exp(i gτ n σz) · Rx(ωτ)`.
    pub fn standard(g_tau: f64, omega_tau: f64, d: usize) -> Self {
        let coin = su2_exp(0.0, omega_tau / 2.0);
        BlockPropagator {
            blocks: (0..d)
                .map(|n| block_mul(&su2_exp(g_tau * n as f64, 0.0), &coin))
                .collect(),
        }
    }

    pub fn d(&self) -> usize {
        self.blocks.len()
    }

    /// Dense `2d × 2d` matrix of the same operator.
    pub fn to_dense(&self) -> ComplexMatrix {
        let d = self.d();
        let mut out = ComplexMatrix::zeros(2 * d, 2 * d);
        for (n, b) in self.blocks.iter().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    out[(i * d + n, j * d + n)] = b[i][j];
                }
            }
        }
        out
    }

    pub fn apply_state(&self, state: &mut JointState) {
        let d = self.d();
        let psi = &mut state.amplitudes;
        for (n, b) in self.blocks.iter().enumerate() {
            let (a0, a1) = (psi[n], psi[d + n]);
            psi[n] = b[0][0] * a0 + b[0][1] * a1;
            psi[d + n] = b[1][0] * a0 + b[1][1] * a1;
        }
    }

    pub fn apply_density(&self, rho: &mut JointDensity) {
        let d = self.d();
        let src = &rho.matrix;
        let mut out = ComplexMatrix::zeros(2 * d, 2 * d);
        for m in 0..d {
            let bm = &self.blocks[m];
            for n in 0..d {
                let bn = &self.blocks[n];
                // 2×2 coin block of ρ between number states n and m.
                let r = [
                    [src[(n, m)], src[(n, d + m)]],
                    [src[(d + n, m)], src[(d + n, d + m)]],
                ];
                for i in 0..2 {
                    for j in 0..2 {
                        let mut acc = ZERO;
                        for k in 0..2 {
                            for l in 0..2 {
                                acc += bn[i][k] * r[k][l] * bm[j][l].conj();
                            }
                        }
                        out[(i * d + n, j * d + m)] = acc;
                    }
                }
            }
        }
        rho.matrix = out;
    }
}

/// The dynamics a trajectory follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dynamics {
    Exact,
    Standard,
    Trotter,
    DecoherentExact,
    DecoherentStandard,
}

impl Dynamics {
    pub fn is_decoherent(self) -> bool {
        matches!(
            self,
            Dynamics::DecoherentExact | Dynamics::DecoherentStandard
        )
    }

    fn propagator(self, cfg: &WalkConfig) -> BlockPropagator {
        match self {
            Dynamics::Exact | Dynamics::DecoherentExact => {
                BlockPropagator::exact(cfg.g_tau, cfg.omega_tau, cfg.d)
            }
            Dynamics::Standard | Dynamics::Trotter | Dynamics::DecoherentStandard => {
                BlockPropagator::standard(cfg.g_tau, cfg.omega_tau, cfg.d)
            }
        }
    }
}

/// Step-by-step evolution of one configuration.
#[derive(Debug, Clone)]
pub struct Walker {
    state: Snapshot,
    propagator: BlockPropagator,
    dephasing: Option<f64>,
    step: usize,
}

impl Walker {
    pub fn new(cfg: &WalkConfig, dynamics: Dynamics) -> Result<Self> {
        cfg.validate()?;
        let initial = JointState::initial(cfg);
        let (state, dephasing) = if dynamics.is_decoherent() {
            (
                Snapshot::Mixed(JointDensity::from_pure(&initial)),
                Some(cfg.dephasing_p),
            )
        } else {
            (Snapshot::Pure(initial), None)
        };
        Ok(Walker {
            state,
            propagator: dynamics.propagator(cfg),
            dephasing,
            step: 0,
        })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn state(&self) -> &Snapshot {
        &self.state
    }

    pub fn advance(&mut self) {
        match &mut self.state {
            Snapshot::Pure(s) => self.propagator.apply_state(s),
            Snapshot::Mixed(rho) => {
                self.propagator.apply_density(rho);
                if let Some(p) = self.dephasing {
                    dephase_coin(&mut rho.matrix, rho.d, p);
                }
            }
        }
        self.step += 1;
    }

    pub fn distribution(&self, basis: &PhaseBasis) -> Result<PhaseDistribution> {
        Ok(PhaseDistribution::from_probs(
            self.state.phase_probs(basis)?,
        ))
    }
}

/// Tracks when the two peaks first sit π apart along the arc through the
/// initial distribution's centre.
#[derive(Debug, Clone)]
pub struct SeparationTracker {
    d: usize,
    center: f64,
    previous: f64,
    crossing: Option<f64>,
}

impl SeparationTracker {
    pub fn new(initial: &PhaseDistribution) -> Self {
        SeparationTracker {
            d: initial.d(),
            center: initial.circular_mean,
            previous: 0.0,
            crossing: None,
        }
    }

    /// Separation of the two highest peaks measured along the arc through the
    /// centre, so it can exceed π.
    pub fn unwrapped_separation(&self, probs: &[f64]) -> f64 {
        match find_peaks(probs)[..] {
            [a, b] => {
                let offset =
                    |m: usize| (site_angle(m, self.d) - self.center + PI).rem_euclid(2.0 * PI) - PI;
                (offset(a) - offset(b)).abs()
            }
            _ => 0.0,
        }
    }

    /// Feeds the distribution at `step`; returns the interpolated crossing step
    /// the first time the separation reaches π.
    pub fn observe(&mut self, step: usize, probs: &[f64]) -> Option<f64> {
        if self.crossing.is_some() {
            return self.crossing;
        }
        let sep = self.unwrapped_separation(probs);
        if step > 0 && sep >= PI {
            let frac = if sep > self.previous {
                (PI - self.previous) / (sep - self.previous)
            } else {
                1.0
            };
            self.crossing = Some(step as f64 - 1.0 + frac);
        }
        self.previous = sep;
        self.crossing
    }
}

/// Step cap for runs that stop at π separation.
pub fn auto_step_cap(cfg: &WalkConfig) -> usize {
    10 * cfg.d * (cfg.r.ceil() as usize).max(1)
}

/// Output of [`run_trajectory`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dynamics: Dynamics,
    /// Distributions for steps `0..=steps`.
    pub distributions: Vec<PhaseDistribution>,
    /// Compound state at each step, aligned with `distributions`.
    pub snapshots: Vec<Snapshot>,
    /// Interpolated step at which the peaks reached π separation, if tracked.
    pub crossing: Option<f64>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.distributions.len() - 1
    }
}

/// Runs `cfg.steps` steps, or until π peak separation when `cfg.steps == 0`.
pub fn run_trajectory(cfg: &WalkConfig, dynamics: Dynamics) -> Result<Trajectory> {
    let basis = PhaseBasis::new(cfg.d);
    let mut walker = Walker::new(cfg, dynamics)?;
    let first = walker.distribution(&basis)?;
    let mut tracker = SeparationTracker::new(&first);
    let mut distributions = vec![first];
    let mut snapshots = vec![walker.state().clone()];
    let auto = cfg.steps == 0;
    let cap = if auto { auto_step_cap(cfg) } else { cfg.steps };
    let mut crossing = None;

    while walker.step() < cap {
        walker.advance();
        let dist = walker.distribution(&basis)?;
        if auto {
            crossing = tracker.observe(walker.step(), &dist.probs);
        }
        distributions.push(dist);
        snapshots.push(walker.state().clone());
        if crossing.is_some() {
            break;
        }
    }

    if let Some(t) = crossing {
        let keep = (t.round() as usize).max(1) + 1;
        distributions.truncate(keep);
        snapshots.truncate(keep);
    }
    Ok(Trajectory {
        dynamics,
        distributions,
        snapshots,
        crossing,
    })
}

/// Steps until the target walk's peaks are π apart, with the interpolated
/// crossing. Falls back to the step cap when they never separate.
pub fn pi_separation_horizon(cfg: &WalkConfig) -> Result<(usize, Option<f64>)> {
    let target = WalkConfig {
        steps: 0,
        ..cfg.with_nominal_frequencies()
    };
    let basis = PhaseBasis::new(cfg.d);
    let mut walker = Walker::new(&target, Dynamics::Standard)?;
    let mut tracker = SeparationTracker::new(&walker.distribution(&basis)?);
    let cap = auto_step_cap(cfg);
    while walker.step() < cap {
        walker.advance();
        let probs = walker.state().phase_probs(&basis)?;
        if let Some(t) = tracker.observe(walker.step(), &probs) {
            return Ok(((t.round() as usize).max(1), Some(t)));
        }
    }
    Ok((cap, None))
}
