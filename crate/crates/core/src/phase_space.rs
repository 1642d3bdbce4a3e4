//! Truncated Fock space, coherent initial states and the phase-site basis.
//!
//! Site `m` of the circle is the phase state `|φ_m⟩ = F e_m` with
//! `φ_m = 2πm/d`, where `F` is [`dft_matrix`]. The rotation
//! `exp(iθ a†a)` with `θ = 2π/d` moves site `m` to site `m + 1`.

use std::f64::consts::PI;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dft_matrix, ComplexMatrix, ComplexVector};

/// Normalization tolerance for the initial coin amplitudes.
pub const COIN_NORM_TOL: f64 = 1e-12;
/// Probability vectors must sum to one within this tolerance.
pub const PROB_SUM_TOL: f64 = 1e-10;
/// Smoothed local maxima below this fraction of the global maximum are not peaks.
pub const PEAK_FLOOR: f64 = 0.01;

/// All parameters of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Number of sites on the circle, equal to the Fock truncation.
    pub d: usize,
    pub alpha: Complex64,
    /// Angular step divisor: the target walk moves `2π/(r d)` per step.
    pub r: f64,
    pub g_tau: f64,
    pub omega_tau: f64,
    /// `0` means run until the two peaks are π apart.
    pub steps: usize,
    pub coin_init: [Complex64; 2],
    pub dephasing_p: f64,
}

impl WalkConfig {
    /// Config with the nominal walk frequencies, coin `|0⟩` and no dephasing.
    pub fn new(d: usize, alpha: Complex64, r: f64) -> Self {
        let mut cfg = WalkConfig {
            d,
            alpha,
            r,
            g_tau: 0.0,
            omega_tau: PI / 2.0,
            steps: 0,
            coin_init: [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            dephasing_p: 0.0,
        };
        cfg.g_tau = cfg.nominal_g_tau();
        cfg
    }

    /// Site-to-site hop of the target walk, `2π/(r d)`.
    pub fn nominal_g_tau(&self) -> f64 {
        2.0 * PI / (self.r * self.d as f64)
    }

    /// Coin angle of the Hadamard-like target coin.
    pub fn nominal_omega_tau() -> f64 {
        PI / 2.0
    }

    pub fn with_frequencies(&self, g_tau: f64, omega_tau: f64) -> Self {
        WalkConfig {
            g_tau,
            omega_tau,
            ..self.clone()
        }
    }

    pub fn with_nominal_frequencies(&self) -> Self {
        self.with_frequencies(self.nominal_g_tau(), Self::nominal_omega_tau())
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidConfig(format!(
                "d must be at least 2, got {}",
                self.d
            )));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "r must be positive, got {}",
                self.r
            )));
        }
        if !(0.0..=1.0).contains(&self.dephasing_p) {
            return Err(Error::InvalidConfig(format!(
                "dephasing_p must lie in [0, 1], got {}",
                self.dephasing_p
            )));
        }
        if !self.g_tau.is_finite() || !self.omega_tau.is_finite() {
            return Err(Error::InvalidConfig("frequencies must be finite".into()));
        }
        let norm: f64 = self.coin_init.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > COIN_NORM_TOL {
            return Err(Error::InvalidConfig(format!(
                "initial coin state has squared norm {norm}, expected 1"
            )));
        }
        Ok(())
    }

    /// Warns when `d` lies outside `|α|² + |α| ≤ d ≤ 4π|α|`.
    pub fn admissibility_warning(&self) -> Option<String> {
        let a = self.alpha.norm();
        let lower = a * a + a;
        let upper = 4.0 * PI * a;
        let d = self.d as f64;
        if d < lower {
            Some(format!(
                "d = {} is below |α|² + |α| = {lower:.3}; the coherent state is poorly supported",
                self.d
            ))
        } else if d > upper {
            Some(format!(
                "d = {} exceeds 4π|α| = {upper:.3}; neighbouring sites are not distinguishable",
                self.d
            ))
        } else {
            None
        }
    }
}

/// Truncated coherent state in the number basis.
#[derive(Debug, Clone)]
pub struct CoherentState {
    /// Renormalized amplitudes `c_n ∝ αⁿ/√(n!)`, `n = 0..d`.
    pub amplitudes: Vec<Complex64>,
    /// `Σ_{n<d} |⟨n|α⟩|²` before renormalization.
    pub support: f64,
}

pub fn coherent_state(alpha: Complex64, d: usize) -> CoherentState {
    let mut amplitudes = Vec::with_capacity(d);
    let mut c = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..d {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        amplitudes.push(c);
    }
    let support: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
    let scale = 1.0 / support.sqrt();
    for z in &mut amplitudes {
        *z *= scale;
    }
    CoherentState {
        amplitudes,
        support,
    }
}

/// Site angle `2πm/d`.
pub fn site_angle(m: usize, d: usize) -> f64 {
    2.0 * PI * m as f64 / d as f64
}

/// Cached phase basis for one circle size.
#[derive(Clone)]
pub struct PhaseBasis {
    d: usize,
    fourier: ComplexMatrix,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PhaseBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhaseBasis")
            .field("d", &self.d)
            .finish_non_exhaustive()
    }
}

impl PhaseBasis {
    pub fn new(d: usize) -> Self {
        PhaseBasis {
            d,
            fourier: dft_matrix(d),
            fft: FftPlanner::new().plan_fft_forward(d),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn fourier(&self) -> &ComplexMatrix {
        &self.fourier
    }

    /// Walker amplitudes `⟨φ_m|ψ⟩ = (F†ψ)_m` from number-basis amplitudes.
    /// `F†` is a forward FFT scaled by `1/√d`.
    pub fn to_phase(&self, walker: &[Complex64]) -> Vec<Complex64> {
        let mut buf = walker.to_vec();
        self.fft.process(&mut buf);
        let scale = 1.0 / (self.d as f64).sqrt();
        for z in &mut buf {
            *z *= scale;
        }
        buf
    }

    /// Same as [`Self::to_phase`] by explicit multiplication with `F†`.
    pub fn to_phase_dense(&self, walker: &ComplexVector) -> ComplexVector {
        self.fourier.ad_mul(walker)
    }

    /// Number-basis amplitudes of `|φ_m⟩`.
    pub fn phase_state(&self, m: usize) -> ComplexVector {
        self.fourier.column(m).into_owned()
    }

    /// `⟨φ_m| ρ_w |φ_m⟩` for a reduced walker density.
    pub fn diagonal(&self, rho_walker: &ComplexMatrix) -> Vec<f64> {
        let f = &self.fourier;
        let rf = rho_walker * f;
        (0..self.d)
            .map(|m| {
                f.column(m)
                    .iter()
                    .zip(rf.column(m).iter())
                    .map(|(a, b)| (a.conj() * b).re)
                    .sum()
            })
            .collect()
    }
}

/// Anything whose walker marginal can be read out in the phase basis.
pub trait PhaseSource {
    fn phase_probs(&self, basis: &PhaseBasis) -> Result<Vec<f64>>;
}

/// Phase probabilities plus circular statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDistribution {
    pub probs: Vec<f64>,
    pub circular_mean: f64,
    pub circular_std: f64,
    pub peak_separation: Option<f64>,
}

impl PhaseDistribution {
    pub fn from_probs(probs: Vec<f64>) -> Self {
        let d = probs.len();
        let (circular_mean, circular_std) = circular_stats(&probs, d);
        let peak_separation = peak_separation(&probs, d);
        PhaseDistribution {
            probs,
            circular_mean,
            circular_std,
            peak_separation,
        }
    }

    pub fn d(&self) -> usize {
        self.probs.len()
    }
}

/// Phase distribution of a joint state after tracing out the coin.
pub fn phase_distribution<S: PhaseSource + ?Sized>(
    state: &S,
    d: usize,
) -> Result<PhaseDistribution> {
    let basis = PhaseBasis::new(d);
    Ok(PhaseDistribution::from_probs(state.phase_probs(&basis)?))
}

/// Maps `angle` onto `[center − π, center + π)`.
fn unwrap_around(angle: f64, center: f64) -> f64 {
    (angle - center + PI).rem_euclid(2.0 * PI) - PI + center
}

/// Circular mean from the first trigonometric moment, and the linear
/// standard deviation of the site angles unwrapped onto the arc centred on
/// that mean.
pub fn circular_stats(p: &[f64], d: usize) -> (f64, f64) {
    assert_eq!(p.len(), d, "distribution length must equal d");
    let (mut s, mut c) = (0.0, 0.0);
    for (m, &pm) in p.iter().enumerate() {
        let phi = site_angle(m, d);
        s += pm * phi.sin();
        c += pm * phi.cos();
    }
    let mean = s.atan2(c).rem_euclid(2.0 * PI);

    let unwrapped: Vec<f64> = (0..d)
        .map(|m| unwrap_around(site_angle(m, d), mean))
        .collect();
    let total: f64 = p.iter().sum();
    let mu: f64 = p.iter().zip(&unwrapped).map(|(pm, u)| pm * u).sum::<f64>() / total;
    let var: f64 = p
        .iter()
        .zip(&unwrapped)
        .map(|(pm, u)| pm * (u - mu) * (u - mu))
        .sum::<f64>()
        / total;
    (mean, var.max(0.0).sqrt())
}

/// Circular moving average over three neighbouring sites.
pub fn smooth3(p: &[f64]) -> Vec<f64> {
    let d = p.len();
    (0..d)
        .map(|i| (p[(i + d - 1) % d] + p[i] + p[(i + 1) % d]) / 3.0)
        .collect()
}

/// Site indices of the (at most two) highest local maxima of the smoothed
/// distribution, highest first.
///
/// A run of equal values counts as one maximum located at its middle site
/// (lower middle for even runs). Equal heights go to the smaller site index.
pub fn find_peaks(p: &[f64]) -> Vec<usize> {
    let d = p.len();
    if d < 3 {
        return Vec::new();
    }
    let s = smooth3(p);
    let top = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top <= 0.0 {
        return Vec::new();
    }

    let mut maxima: Vec<(usize, f64)> = Vec::new();
    // Start scanning right after a strict descent so no plateau straddles the origin.
    let Some(start) = (0..d)
        .find(|&i| s[i] != s[(i + 1) % d])
        .map(|i| (i + 1) % d)
    else {
        return Vec::new();
    };
    let mut k = 0;
    while k < d {
        let i = (start + k) % d;
        let mut len = 1;
        while len < d && s[(i + len) % d] == s[i] {
            len += 1;
        }
        let before = s[(i + d - 1) % d];
        let after = s[(i + len) % d];
        if s[i] > before && s[i] > after && s[i] >= PEAK_FLOOR * top {
            maxima.push(((i + (len - 1) / 2) % d, s[i]));
        }
        k += len;
    }
    maxima.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    maxima.truncate(2);
    maxima.into_iter().map(|(i, _)| i).collect()
}

/// Circular distance between sites in radians, in `[0, π]`.
pub fn site_distance(a: usize, b: usize, d: usize) -> f64 {
    let diff = a.abs_diff(b);
    site_angle(diff.min(d - diff), d)
}

/// Angular distance between the two highest peaks, `None` when unimodal.
pub fn peak_separation(p: &[f64], d: usize) -> Option<f64> {
    assert_eq!(p.len(), d, "distribution length must equal d");
    match find_peaks(p)[..] {
        [a, b] => Some(site_distance(a, b, d)),
        _ => None,
    }
}
