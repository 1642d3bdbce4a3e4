use std::path::PathBuf;

use dtqw_core::metrics::{compare_dynamics, fit_series, spearman, CompareOptions, SpreadFits};
use dtqw_core::phase_space::site_angle;
use dtqw_core::walk::pi_separation_horizon;
use dtqw_core::{
    optimize, FitModel, GrowthFit, OptimizationResult, PhaseDistribution, StepWindow,
    TrajectoryReport, WalkConfig,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{num, Command, Output, RunManifest};
use crate::svg::{line_chart, Series};

pub const R_SWEEP: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 10.0];
pub const DEFAULT_P_LIST: [f64; 4] = [0.0, 0.1, 0.5, 1.0];
const DECOHERE_DEFAULT_STEPS: usize = 100;

const METRICS_HEADER: [&str; 6] = [
    "step",
    "hellinger",
    "std_exact",
    "std_approx",
    "neg_exact",
    "neg_approx",
];

/// Options shared by the commands after config resolution.
#[derive(Debug, Clone)]
pub struct Options {
    pub out: PathBuf,
    pub optimize_first: bool,
    pub r_sweep: bool,
    pub p_list: Vec<f64>,
}

/// Replaces the configured frequencies with optimized ones when requested.
fn frequencies(
    run: &RunConfig,
    opts: &Options,
) -> Result<(WalkConfig, Option<OptimizationResult>), CliError> {
    if !opts.optimize_first {
        return Ok((run.walk.clone(), None));
    }
    let best = optimize(&run.walk, run.window, run.restarts, run.seed)?;
    Ok((best.apply_to(&run.walk), Some(best)))
}

fn distribution_rows(dists: &[PhaseDistribution]) -> impl Iterator<Item = Vec<String>> + '_ {
    dists.iter().enumerate().flat_map(|(step, dist)| {
        let d = dist.d();
        dist.probs.iter().enumerate().map(move |(site, p)| {
            vec![
                step.to_string(),
                site.to_string(),
                num(site_angle(site, d)),
                num(*p),
            ]
        })
    })
}

fn metrics_rows(rep: &TrajectoryReport) -> impl Iterator<Item = Vec<String>> + '_ {
    let neg = |v: &[f64], t: usize| v.get(t).map_or(String::new(), |x| num(*x));
    (0..=rep.steps()).map(move |t| {
        vec![
            t.to_string(),
            num(rep.hellinger_per_step[t]),
            num(rep.std_exact[t]),
            num(rep.std_approx[t]),
            neg(&rep.negativity_exact, t),
            neg(&rep.negativity_approx, t),
        ]
    })
}

fn indexed(values: &[f64]) -> Vec<(f64, f64)> {
    values
        .iter()
        .enumerate()
        .map(|(t, v)| (t as f64, *v))
        .collect()
}

fn steps_or(
    cfg: &WalkConfig,
    default: impl FnOnce() -> Result<usize, CliError>,
) -> Result<usize, CliError> {
    if cfg.steps > 0 {
        Ok(cfg.steps)
    } else {
        default()
    }
}

#[derive(Serialize)]
struct DistributionSummary {
    circular_mean: f64,
    circular_std: f64,
    peak_separation: Option<f64>,
}

impl From<&PhaseDistribution> for DistributionSummary {
    fn from(d: &PhaseDistribution) -> Self {
        DistributionSummary {
            circular_mean: d.circular_mean,
            circular_std: d.circular_std,
            peak_separation: d.peak_separation,
        }
    }
}

fn warn_admissibility(cfg: &WalkConfig) {
    if let Some(w) = cfg.admissibility_warning() {
        eprintln!("warning: {w}");
    }
}

fn compare_options(
    steps: usize,
    window: StepWindow,
    with_negativity: bool,
    force_density: bool,
) -> CompareOptions {
    CompareOptions {
        steps,
        with_negativity,
        force_density,
        fit_window: StepWindow {
            start: window.start.min(steps),
            end: window.end.min(steps),
        },
    }
}

pub fn simulate(run: &RunConfig, opts: &Options) -> Result<RunManifest, CliError> {
    warn_admissibility(&run.walk);
    let (cfg, best) = frequencies(run, opts)?;
    let (steps, crossing) = if cfg.steps > 0 {
        (cfg.steps, None)
    } else {
        pi_separation_horizon(&cfg)?
    };
    let fixed = WalkConfig {
        steps,
        ..cfg.clone()
    };
    let cmp = compare_dynamics(
        &fixed,
        compare_options(steps, StepWindow::pre_wrap(cfg.d), true, false),
    )?;

    let mut out = Output::create(&opts.out)?;
    let header = ["step", "site", "phase_rad", "prob"];
    out.csv(
        "distributions_exact.csv",
        &header,
        distribution_rows(&cmp.exact),
    )?;
    out.csv(
        "distributions_standard.csv",
        &header,
        distribution_rows(&cmp.approx),
    )?;
    out.csv("metrics.csv", &METRICS_HEADER, metrics_rows(&cmp.report))?;

    let last_exact = cmp.exact.last().unwrap();
    let last_approx = cmp.approx.last().unwrap();
    out.json(
        "summary.json",
        &json!({
            "steps": steps,
            "pi_crossing": crossing,
            "g_tau": cfg.g_tau,
            "omega_tau": cfg.omega_tau,
            "exact": DistributionSummary::from(last_exact),
            "standard": DistributionSummary::from(last_approx),
            "final_hellinger": cmp.report.hellinger_per_step[steps],
            "max_hellinger": cmp.report.hellinger_per_step.iter().copied().fold(0.0, f64::max),
            "admissibility_warning": cfg.admissibility_warning(),
            "optimization": best,
        }),
    )?;

    let curve = |dist: &PhaseDistribution| -> Vec<(f64, f64)> {
        dist.probs
            .iter()
            .enumerate()
            .map(|(m, p)| (site_angle(m, cfg.d), *p))
            .collect()
    };
    out.svg(
        "snapshot.svg",
        &line_chart(
            &format!("phase distribution at step {steps}"),
            "phase (rad)",
            "probability",
            &[
                Series::new("exact", curve(last_exact)),
                Series::new("standard walk", curve(last_approx)).dashed(),
            ],
        ),
    )?;
    out.finish(
        Command::Simulate,
        run,
        json!({ "steps": steps, "optimize_first": opts.optimize_first }),
    )
}

#[derive(Serialize)]
struct SweepPoint {
    r: f64,
    objective: f64,
    g_tau_opt: f64,
    omega_tau_opt: f64,
    c_ratio: f64,
    trace_steps: usize,
    max_hellinger: f64,
}

pub fn optimize_cmd(run: &RunConfig, opts: &Options) -> Result<RunManifest, CliError> {
    warn_admissibility(&run.walk);
    let rs: Vec<f64> = if opts.r_sweep {
        R_SWEEP.to_vec()
    } else {
        vec![run.walk.r]
    };
    let results: Vec<(f64, OptimizationResult, TrajectoryReport)> = rs
        .par_iter()
        .map(|&r| {
            let template = WalkConfig {
                r,
                ..run.walk.clone()
            }
            .with_nominal_frequencies();
            let best = optimize(&template, run.window, run.restarts, run.seed)?;
            let tuned = best.apply_to(&template);
            let steps = steps_or(&tuned, || Ok(pi_separation_horizon(&tuned)?.0))?;
            let cmp = compare_dynamics(&tuned, compare_options(steps, run.window, true, false))?;
            Ok((r, best, cmp.report))
        })
        .collect::<Result<_, CliError>>()?;

    let mut out = Output::create(&opts.out)?;
    let single = results.len() == 1;
    let mut points = Vec::new();
    let mut series = Vec::new();
    for (r, best, report) in &results {
        let (opt_name, err_name) = if single {
            ("optimization.json".to_string(), "errors.csv".to_string())
        } else {
            (
                format!("optimization_r{r}.json"),
                format!("errors_r{r}.csv"),
            )
        };
        out.json(&opt_name, best)?;
        out.csv(&err_name, &METRICS_HEADER, metrics_rows(report))?;
        points.push(SweepPoint {
            r: *r,
            objective: best.objective,
            g_tau_opt: best.g_tau_opt,
            omega_tau_opt: best.omega_tau_opt,
            c_ratio: best.c_ratio,
            trace_steps: report.steps(),
            max_hellinger: report
                .hellinger_per_step
                .iter()
                .copied()
                .fold(0.0, f64::max),
        });
        series.push(Series::new(
            format!("r = {r}"),
            indexed(&report.hellinger_per_step),
        ));
    }
    if !single {
        out.json("sweep.json", &points)?;
    }
    out.svg(
        "errors.svg",
        &line_chart(
            "Hellinger distance after optimization",
            "step",
            "Hellinger distance",
            &series,
        ),
    )?;
    for p in &points {
        println!(
            "r = {}: objective {:.6}, gτ {:.6}, ωτ {:.6}, C {:.3}, max H {:.4} over {} steps",
            p.r,
            p.objective,
            p.g_tau_opt,
            p.omega_tau_opt,
            p.c_ratio,
            p.max_hellinger,
            p.trace_steps
        );
    }
    out.finish(Command::Optimize, run, json!({ "r_values": rs }))
}

#[derive(Serialize)]
struct CompareSummary {
    steps: usize,
    pi_horizon: usize,
    g_tau: f64,
    omega_tau: f64,
    max_hellinger: f64,
    mean_hellinger: f64,
    mean_negativity_gap: Option<f64>,
    fits_exact: SpreadFits,
    fits_approx: SpreadFits,
    optimization: Option<OptimizationResult>,
}

pub fn compare(run: &RunConfig, opts: &Options) -> Result<RunManifest, CliError> {
    warn_admissibility(&run.walk);
    let (cfg, best) = frequencies(run, opts)?;
    let (horizon, _) = pi_separation_horizon(&cfg)?;
    let steps = steps_or(&cfg, || Ok(4 * horizon))?;
    let window = StepWindow::pre_wrap(cfg.d);
    let cmp = compare_dynamics(&cfg, compare_options(steps, window, true, false))?;
    let rep = &cmp.report;

    let mut out = Output::create(&opts.out)?;
    out.csv("metrics.csv", &METRICS_HEADER, metrics_rows(rep))?;
    out.csv(
        "hellinger.csv",
        &["step", "hellinger"],
        (0..=steps).map(|t| vec![t.to_string(), num(rep.hellinger_per_step[t])]),
    )?;
    out.csv(
        "std.csv",
        &["step", "std_exact", "std_approx"],
        (0..=steps).map(|t| vec![t.to_string(), num(rep.std_exact[t]), num(rep.std_approx[t])]),
    )?;
    out.csv(
        "negativity.csv",
        &["step", "neg_exact", "neg_approx"],
        (0..=steps).map(|t| {
            vec![
                t.to_string(),
                num(rep.negativity_exact[t]),
                num(rep.negativity_approx[t]),
            ]
        }),
    )?;
    let h = &rep.hellinger_per_step;
    out.json(
        "compare.json",
        &CompareSummary {
            steps,
            pi_horizon: horizon,
            g_tau: cfg.g_tau,
            omega_tau: cfg.omega_tau,
            max_hellinger: h.iter().copied().fold(0.0, f64::max),
            mean_hellinger: h[1..].iter().sum::<f64>() / steps as f64,
            mean_negativity_gap: rep.mean_negativity_gap(),
            fits_exact: rep.fits_exact,
            fits_approx: rep.fits_approx,
            optimization: best,
        },
    )?;
    out.svg(
        "hellinger.svg",
        &line_chart(
            "Hellinger distance",
            "step",
            "Hellinger distance",
            &[Series::new("exact vs standard", indexed(h))],
        ),
    )?;
    out.svg(
        "std.svg",
        &line_chart(
            "standard deviation of the phase",
            "step",
            "std (rad)",
            &[
                Series::new("exact", indexed(&rep.std_exact)),
                Series::new("standard walk", indexed(&rep.std_approx)).dashed(),
            ],
        ),
    )?;
    out.svg(
        "negativity.svg",
        &line_chart(
            "coin-walker negativity",
            "step",
            "negativity",
            &[
                Series::new("exact", indexed(&rep.negativity_exact)),
                Series::new("standard walk", indexed(&rep.negativity_approx)).dashed(),
            ],
        ),
    )?;
    out.finish(
        Command::Compare,
        run,
        json!({ "steps": steps, "optimize_first": opts.optimize_first }),
    )
}

#[derive(Serialize)]
struct DecoherencePoint {
    p: f64,
    /// Fits over the whole run.
    fits_exact: SpreadFits,
    fits_approx: SpreadFits,
    /// Linear fit of the standard-walk spread before wrap-around.
    pre_wrap_linear_approx: Option<GrowthFit>,
    /// Rank correlation of the Hellinger distance with the step index.
    hellinger_spearman: Option<f64>,
    max_hellinger: f64,
}

pub fn decohere(run: &RunConfig, opts: &Options) -> Result<RunManifest, CliError> {
    warn_admissibility(&run.walk);
    let (cfg, best) = frequencies(run, opts)?;
    let steps = steps_or(&cfg, || Ok(DECOHERE_DEFAULT_STEPS))?;
    let full = StepWindow::new(1, steps)?;
    let reports: Vec<(f64, TrajectoryReport)> = opts
        .p_list
        .par_iter()
        .map(|&p| {
            let cfg = WalkConfig {
                dephasing_p: p,
                ..cfg.clone()
            };
            cfg.validate()?;
            let cmp = compare_dynamics(&cfg, compare_options(steps, full, false, true))?;
            Ok((p, cmp.report))
        })
        .collect::<Result<_, CliError>>()?;

    let mut out = Output::create(&opts.out)?;
    out.csv(
        "decohere_std.csv",
        &["p", "step", "std_exact", "std_approx"],
        reports.iter().flat_map(|(p, rep)| {
            (0..=steps).map(move |t| {
                vec![
                    num(*p),
                    t.to_string(),
                    num(rep.std_exact[t]),
                    num(rep.std_approx[t]),
                ]
            })
        }),
    )?;
    out.csv(
        "decohere_hellinger.csv",
        &["p", "step", "hellinger"],
        reports.iter().flat_map(|(p, rep)| {
            (0..=steps).map(move |t| vec![num(*p), t.to_string(), num(rep.hellinger_per_step[t])])
        }),
    )?;
    let pre_wrap = StepWindow::pre_wrap(cfg.d);
    let t: Vec<f64> = (1..=steps).map(|t| t as f64).collect();
    let points: Vec<DecoherencePoint> = reports
        .iter()
        .map(|(p, rep)| DecoherencePoint {
            p: *p,
            fits_exact: rep.fits_exact,
            fits_approx: rep.fits_approx,
            pre_wrap_linear_approx: (pre_wrap.end <= steps)
                .then(|| fit_series(&rep.std_approx, pre_wrap, FitModel::Linear).ok())
                .flatten(),
            hellinger_spearman: spearman(&t, &rep.hellinger_per_step[1..]).ok(),
            max_hellinger: rep.hellinger_per_step.iter().copied().fold(0.0, f64::max),
        })
        .collect();
    out.json(
        "decohere.json",
        &json!({
            "steps": steps,
            "g_tau": cfg.g_tau,
            "omega_tau": cfg.omega_tau,
            "points": points,
            "optimization": best,
        }),
    )?;
    let std_series: Vec<Series> = reports
        .iter()
        .flat_map(|(p, rep)| {
            [
                Series::new(format!("exact p = {p}"), indexed(&rep.std_exact)),
                Series::new(format!("standard p = {p}"), indexed(&rep.std_approx)).dashed(),
            ]
        })
        .collect();
    out.svg(
        "decohere_std.svg",
        &line_chart("spread under dephasing", "step", "std (rad)", &std_series),
    )?;
    let h_series: Vec<Series> = reports
        .iter()
        .map(|(p, rep)| Series::new(format!("p = {p}"), indexed(&rep.hellinger_per_step)))
        .collect();
    out.svg(
        "decohere_hellinger.svg",
        &line_chart(
            "Hellinger distance under dephasing",
            "step",
            "Hellinger distance",
            &h_series,
        ),
    )?;
    for pt in &points {
        let exp = |f: &SpreadFits| f.power.map_or(f64::NAN, |g| g.coef);
        println!(
            "p = {}: power exponent standard {:.3} exact {:.3}, Hellinger Spearman {}",
            pt.p,
            exp(&pt.fits_approx),
            exp(&pt.fits_exact),
            pt.hellinger_spearman
                .map_or("n/a".into(), |s| format!("{s:.3}"))
        );
    }
    out.finish(
        Command::Decohere,
        run,
        json!({ "steps": steps, "p_list": opts.p_list, "optimize_first": opts.optimize_first }),
    )
}

/// Parses `"0,0.1,0.5,1"`.
pub fn parse_p_list(text: &str) -> Result<Vec<f64>, CliError> {
    let list = text
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|p| (0.0..=1.0).contains(p))
                .ok_or_else(|| CliError::Config(format!("invalid dephasing strength `{s}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if list.is_empty() {
        return Err(CliError::Config("empty --p-list".into()));
    }
    Ok(list)
}
