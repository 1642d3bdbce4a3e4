//! Comparators between the two dynamics: Hellinger distance, coin–walker
//! negativity, growth fits of the spread, and the per-step report tying them
//! together.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, partial_transpose_coin};
use crate::phase_space::{PhaseBasis, PhaseDistribution, WalkConfig};
use crate::walk::{Dynamics, JointDensity, JointState, Snapshot, Walker};

/// `(1/√2) ‖√p − √q‖₂`, clamped to `[0, 1]`.
pub fn hellinger(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    let sq: f64 = p
        .iter()
        .zip(q)
        .map(|(a, b)| {
            let diff = a.max(0.0).sqrt() - b.max(0.0).sqrt();
            diff * diff
        })
        .sum();
    Ok((0.5 * sq).sqrt().min(1.0))
}

/// Sum of the magnitudes of the negative eigenvalues of the coin partial
/// transpose. At most ½ for a qubit coupled to anything.
pub fn negativity(rho: &JointDensity) -> Result<f64> {
    let pt = partial_transpose_coin(rho.matrix(), rho.d())?;
    let spectrum = hermitian_eig(&pt)?;
    Ok(spectrum
        .eigenvalues
        .iter()
        .filter(|&&l| l < 0.0)
        .map(|l| -l)
        .sum())
}

/// Negativity of a pure state from its Schmidt weights: `√(λ₀ λ₁)` where
/// `λ` are the eigenvalues of the reduced coin state.
pub fn negativity_pure(state: &JointState) -> f64 {
    let psi0 = state.coin_component(0);
    let psi1 = state.coin_component(1);
    let a = psi0.norm_squared();
    let b = psi1.norm_squared();
    let c = psi0.dotc(&psi1).norm_sqr();
    // λ₀ λ₁ = det of the reduced coin density.
    (a * b - c).max(0.0).sqrt()
}

pub fn negativity_of(snapshot: &Snapshot) -> Result<f64> {
    match snapshot {
        Snapshot::Pure(s) => Ok(negativity_pure(s)),
        Snapshot::Mixed(r) => negativity(r),
    }
}

/// Inclusive step range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepWindow {
    pub start: usize,
    pub end: usize,
}

impl StepWindow {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if end < start {
            return Err(Error::InvalidConfig(format!(
                "empty step window [{start}, {end}]"
            )));
        }
        Ok(StepWindow { start, end })
    }

    /// `[1, ⌊d/4⌋]`, the pre-wrap-around stretch of the walk.
    pub fn pre_wrap(d: usize) -> Self {
        StepWindow {
            start: 1,
            end: (d / 4).max(1),
        }
    }

    pub fn len(&self) -> usize {
        (self.end + 1).saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn steps(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitModel {
    /// `y = a + k t`.
    Linear,
    /// `log y = log a + k log t`.
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub model: FitModel,
    /// Slope for the linear model, exponent for the power model.
    pub coef: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

const MIN_FIT_POINTS: usize = 5;

fn least_squares(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateSeries);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok((slope, intercept, r_squared))
}

/// Least-squares fit of `(step, value)` points. The power model drops
/// points with nonpositive step or value.
pub fn fit_growth(points: &[(f64, f64)], model: FitModel) -> Result<GrowthFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = match model {
        FitModel::Linear => points.iter().copied().unzip(),
        FitModel::Power => points
            .iter()
            .filter(|(t, v)| *t > 0.0 && *v > 0.0)
            .map(|(t, v)| (t.ln(), v.ln()))
            .unzip(),
    };
    if x.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: x.len(),
        });
    }
    let (coef, intercept, r_squared) = least_squares(&x, &y)?;
    Ok(GrowthFit {
        model,
        coef,
        intercept,
        r_squared,
    })
}

/// Fits `series[t]` against `t` over `window`.
pub fn fit_series(series: &[f64], window: StepWindow, model: FitModel) -> Result<GrowthFit> {
    let end = window.end.min(series.len().saturating_sub(1));
    let points: Vec<(f64, f64)> = (window.start..=end)
        .map(|t| (t as f64, series[t]))
        .collect();
    fit_growth(&points, model)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation, ties get average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx <= 0.0 || vy <= 0.0 {
        return Err(Error::DegenerateSeries);
    }
    Ok(cov / (vx * vy).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadFits {
    pub linear: Option<GrowthFit>,
    pub power: Option<GrowthFit>,
}

impl SpreadFits {
    fn of(series: &[f64], window: StepWindow) -> Self {
        SpreadFits {
            linear: fit_series(series, window, FitModel::Linear).ok(),
            power: fit_series(series, window, FitModel::Power).ok(),
        }
    }
}

/// Per-step comparison of the continuous evolution (exact) against the
/// target walk (approx).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub hellinger_per_step: Vec<f64>,
    pub std_exact: Vec<f64>,
    pub std_approx: Vec<f64>,
    /// Empty when negativity was not requested.
    pub negativity_exact: Vec<f64>,
    pub negativity_approx: Vec<f64>,
    pub fit_window: StepWindow,
    pub fits_exact: SpreadFits,
    pub fits_approx: SpreadFits,
}

impl TrajectoryReport {
    pub fn steps(&self) -> usize {
        self.hellinger_per_step.len() - 1
    }

    pub fn max_hellinger(&self, window: StepWindow) -> f64 {
        self.hellinger_per_step[window.start..=window.end.min(self.steps())]
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    pub fn mean_negativity_gap(&self) -> Option<f64> {
        if self.negativity_exact.is_empty() {
            return None;
        }
        let n = self.negativity_exact.len() as f64;
        Some(
            self.negativity_exact
                .iter()
                .zip(&self.negativity_approx)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / n,
        )
    }
}

/// Options for [`compare_dynamics`].
#[derive(Debug, Clone, Copy)]
pub struct CompareOptions {
    pub steps: usize,
    pub with_negativity: bool,
    /// Use density matrices even when `dephasing_p == 0`.
    pub force_density: bool,
    pub fit_window: StepWindow,
}

/// Both trajectories plus their report.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub exact: Vec<PhaseDistribution>,
    pub approx: Vec<PhaseDistribution>,
    pub report: TrajectoryReport,
}

/// Runs the continuous evolution at `cfg`'s frequencies against the target
/// walk at the nominal frequencies `(2π/(rd), π/2)` for `opts.steps` steps.
pub fn compare_dynamics(cfg: &WalkConfig, opts: CompareOptions) -> Result<Comparison> {
    let density = opts.force_density || cfg.dephasing_p > 0.0;
    let (exact_kind, approx_kind) = if density {
        (Dynamics::DecoherentExact, Dynamics::DecoherentStandard)
    } else {
        (Dynamics::Exact, Dynamics::Standard)
    };
    let basis = PhaseBasis::new(cfg.d);
    let mut exact = Walker::new(cfg, exact_kind)?;
    let mut approx = Walker::new(&cfg.with_nominal_frequencies(), approx_kind)?;

    let mut out_exact = Vec::with_capacity(opts.steps + 1);
    let mut out_approx = Vec::with_capacity(opts.steps + 1);
    let mut neg_exact = Vec::new();
    let mut neg_approx = Vec::new();
    loop {
        out_exact.push(exact.distribution(&basis)?);
        out_approx.push(approx.distribution(&basis)?);
        if opts.with_negativity {
            neg_exact.push(negativity_of(exact.state())?);
            neg_approx.push(negativity_of(approx.state())?);
        }
        if exact.step() == opts.steps {
            break;
        }
        exact.advance();
        approx.advance();
    }

    let hellinger_per_step = out_exact
        .iter()
        .zip(&out_approx)
        .map(|(a, b)| hellinger(&a.probs, &b.probs))
        .collect::<Result<Vec<_>>>()?;
    let std_exact: Vec<f64> = out_exact.iter().map(|p| p.circular_std).collect();
    let std_approx: Vec<f64> = out_approx.iter().map(|p| p.circular_std).collect();
    let report = TrajectoryReport {
        hellinger_per_step,
        fits_exact: SpreadFits::of(&std_exact, opts.fit_window),
        fits_approx: SpreadFits::of(&std_approx, opts.fit_window),
        std_exact,
        std_approx,
        negativity_exact: neg_exact,
        negativity_approx: neg_approx,
        fit_window: opts.fit_window,
    };
    Ok(Comparison {
        exact: out_exact,
        approx: out_approx,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn hellinger_basics() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(hellinger(&p, &p).unwrap(), 0.0);
        assert!((hellinger(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        // √(1 − 1/√2)
        assert!((hellinger(&[0.5, 0.5], &[1.0, 0.0]).unwrap() - 0.541196100146197).abs() < 1e-15);
        assert!(matches!(
            hellinger(&[1.0], &[0.5, 0.5]),
            Err(Error::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn exact_linear_and_power_series() {
        let lin: Vec<(f64, f64)> = (0..10).map(|t| (t as f64, 0.3 * t as f64)).collect();
        let fit = fit_growth(&lin, FitModel::Linear).unwrap();
        assert!((fit.coef - 0.3).abs() < 1e-12 && (fit.r_squared - 1.0).abs() < 1e-12);

        let sq: Vec<(f64, f64)> = (0..20).map(|t| (t as f64, (t as f64).sqrt())).collect();
        let fit = fit_growth(&sq, FitModel::Power).unwrap();
        assert!((fit.coef - 0.5).abs() < 1e-12 && (fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        let short = [(1.0, 1.0), (2.0, 2.0)];
        assert!(matches!(
            fit_growth(&short, FitModel::Linear),
            Err(Error::InsufficientData { .. })
        ));
        let flat: Vec<(f64, f64)> = (0..6).map(|k| (3.0, k as f64)).collect();
        assert_eq!(
            fit_growth(&flat, FitModel::Linear),
            Err(Error::DegenerateSeries)
        );
    }

    #[test]
    fn spearman_signs() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[1.0, 4.0, 9.0, 16.0, 25.0]).unwrap() - 1.0).abs() < 1e-12);
        // Ties share ranks.
        let r = spearman(&x, &[1.0, 1.0, 2.0, 2.0, 3.0]).unwrap();
        assert!(r > 0.9 && r < 1.0);
    }

    #[test]
    fn product_state_has_zero_negativity() {
        let walker = crate::phase_space::coherent_state(Complex64::new(0.8, 0.3), 6).amplitudes;
        let h = 1.0 / 2f64.sqrt();
        let s = JointState::product([Complex64::new(h, 0.0), Complex64::new(0.0, h)], &walker);
        assert!(negativity_pure(&s) < 1e-10);
        assert!(negativity(&JointDensity::from_pure(&s)).unwrap() < 1e-10);
    }

    #[test]
    fn bell_state_negativity_is_half() {
        let h = 1.0 / 2f64.sqrt();
        let amps = crate::linalg::ComplexVector::from_vec(vec![
            Complex64::new(h, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(h, 0.0),
        ]);
        let s = JointState::from_amplitudes(2, amps).unwrap();
        assert!((negativity_pure(&s) - 0.5).abs() < 1e-14);
        assert!((negativity(&JointDensity::from_pure(&s)).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn window_validation() {
        assert!(StepWindow::new(3, 2).is_err());
        assert_eq!(StepWindow::pre_wrap(31), StepWindow { start: 1, end: 7 });
        assert_eq!(StepWindow::new(1, 12).unwrap().len(), 12);
    }
}
