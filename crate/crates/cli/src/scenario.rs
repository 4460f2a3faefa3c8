//! The scenario pipeline: initial condition to trajectory to analyses to
//! verdict, with every artifact written as CSV or JSON.

use crate::config::{InitialKind, ScenarioConfig};
use crate::report::{Distances, ScenarioReport, Verdict};
use anyhow::{bail, Context, Result};
use lvdelay::dde::{integrate, prelude_from_pde, HistoryState, Trajectory};
use lvdelay::model::{
    classify, coexistence_equilibrium, equilibria, periodicity_index, thresholds, PartitionLabel,
};
use lvdelay::pde::{pde_history, simulate, AgeGrid, PdeState};
use lvdelay::spectral::{malthusian_rate, roots_in_rectangle, QuasiPolynomial};
use lvdelay::{lyapunov, planar};
use std::path::{Path, PathBuf};

/// Final-state distance below which (together with the energy test) a run
/// counts as converged to the coexistence equilibrium.
pub const VERDICT_DISTANCE_TOL: f64 = 1e-3;
/// Terminal Lyapunov level required for the convergence verdict.
pub const VERDICT_ENERGY_TOL: f64 = 1e-6;
/// Delay-lag autocorrelation above which a bounded oscillation counts as
/// near-periodic.
pub const VERDICT_AUTOCORR: f64 = 0.999;
/// Length of the autocorrelation window, in delays.
pub const AUTOCORR_WINDOW_DELAYS: usize = 10;
/// Minimum prey oscillation amplitude for the near-periodic verdict.
pub const OSCILLATION_MIN_AMPLITUDE: f64 = 1e-3;
/// Prey mass treated as numerically divergent when capping explosion runs.
const EXPLOSION_CAP: f64 = 1e12;

/// Collected state series, shared between the delay and transport routes.
struct StateSeries<'a> {
    x: &'a [f64],
    y: &'a [f64],
    steps_per_delay: usize,
}

/// Writes scenario artifacts under one directory and records the manifest.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir,
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

/// Runs the full pipeline for a configured scenario.
pub fn run(config: &ScenarioConfig, base_dir: &Path) -> Result<ScenarioReport> {
    let history = build_history(config, base_dir)?;
    run_with_history(config, history)
}

/// As [`run`], but with an explicit delay history (used by the preset that
/// starts on the periodic orbit, which no profile shape expresses).
pub fn run_with_history(config: &ScenarioConfig, history: HistoryState) -> Result<ScenarioReport> {
    config.validate()?;
    let params = &config.params;
    let mut out = OutputDir::create(config.resolved_output_dir())?;

    let label = classify(&history).context("stage classify")?;
    let t_end = capped_horizon(config, &history, label)?;
    let traj = integrate(params, &history, t_end, config.steps_per_delay)
        .context("stage integrate")?;

    out.write("history.csv", &history_csv(&history))?;
    out.write("trajectory.csv", &traj.to_csv())?;

    let mut distances = Distances::default();
    if config.analyses.lyapunov {
        match lyapunov::energy_series(params, &traj) {
            Ok(series) => out.write("lyapunov.csv", &series.to_csv())?,
            Err(err) => {
                // Boundary trajectories legitimately leave the functional's
                // domain; the report simply omits the series.
                let _ = err;
            }
        }
    }
    run_common_analyses(config, &mut out)?;

    if config.initial.kind == InitialKind::Pde && config.analyses.pde_crossval {
        let dev = cross_validate(config, &traj, &mut out).context("stage pde-crossval")?;
        distances.pde_crossval_max_dev = Some(dev);
    }

    let series = StateSeries {
        x: traj.x(),
        y: traj.y(),
        steps_per_delay: traj.steps_per_delay(),
    };
    let final_f = final_lyapunov(params, &traj);
    let verdict = decide_verdict(params, label, &series, final_f);
    distances.final_state_distance = final_state_distance(params, &series);
    distances.final_lyapunov = final_f;

    finish_report(config, Some(label), Some(verdict), distances, out)
}

/// Runs the transport model directly (the `simulate-pde` verb).
pub fn run_pde(config: &ScenarioConfig, base_dir: &Path) -> Result<ScenarioReport> {
    config.validate()?;
    if config.initial.kind != InitialKind::Pde {
        bail!("simulate-pde needs an initial condition of kind \"pde\"");
    }
    let params = &config.params;
    let mut out = OutputDir::create(config.resolved_output_dir())?;

    let profile = config
        .build_age_profile(base_dir)
        .context("stage initial-profile")?;
    let grid = AgeGrid::new(params, config.steps_per_delay, None)?;
    let state = PdeState::from_profile(params, grid, &profile, config.y_initial())
        .context("stage initial-state")?;

    let (reduced, at_tau) = pde_history(params, state).context("stage reduce")?;
    let label = classify(&reduced).context("stage classify")?;

    let n_steps = (((config.t_end - params.tau) / grid.da()) - 1e-9).ceil().max(1.0) as usize;
    let run = simulate(params, at_tau, n_steps, config.steps_per_delay)
        .context("stage simulate-pde")?;

    out.write("pde_series.csv", &run.series.to_csv())?;
    out.write("pde_profile_final.csv", &run.final_state.profile_csv())?;
    if config.analyses.pde_crossval {
        let traj = integrate(params, &reduced, config.t_end, config.steps_per_delay)
            .context("stage integrate")?;
        let dev = worst_prey_deviation(params, &run.series.x, traj.x());
        out.write("trajectory.csv", &traj.to_csv())?;
        let mut distances = pde_distances(params, &run.series, config.steps_per_delay);
        distances.pde_crossval_max_dev = Some(dev);
        run_common_analyses(config, &mut out)?;
        let series = StateSeries {
            x: &run.series.x,
            y: &run.series.y,
            steps_per_delay: config.steps_per_delay,
        };
        let verdict = decide_verdict(params, label, &series, distances.final_lyapunov);
        return finish_report(config, Some(label), Some(verdict), distances, out);
    }
    run_common_analyses(config, &mut out)?;

    let distances = pde_distances(params, &run.series, config.steps_per_delay);
    let series = StateSeries {
        x: &run.series.x,
        y: &run.series.y,
        steps_per_delay: config.steps_per_delay,
    };
    let verdict = decide_verdict(params, label, &series, distances.final_lyapunov);
    finish_report(config, Some(label), Some(verdict), distances, out)
}

/// Static analysis only: thresholds, equilibria, index, partition label and
/// any toggled spectrum or orbit artifacts. No integration.
pub fn analyze(config: &ScenarioConfig, base_dir: &Path) -> Result<ScenarioReport> {
    config.validate()?;
    let mut out = OutputDir::create(config.resolved_output_dir())?;
    let history = build_history(config, base_dir)?;
    let label = classify(&history).context("stage classify")?;
    out.write("history.csv", &history_csv(&history))?;
    run_common_analyses(config, &mut out)?;
    finish_report(config, Some(label), None, Distances::default(), out)
}

/// Constructs the periodic orbit when it exists (the `find-orbit` verb).
pub fn find_orbit(config: &ScenarioConfig, samples: usize) -> Result<ScenarioReport> {
    config.validate()?;
    let mut out = OutputDir::create(config.resolved_output_dir())?;
    write_orbit(&config.params, samples, &mut out)?;
    finish_report(config, None, None, Distances::default(), out)
}

/// Computes the spectrum report over one rectangle (the `spectrum` verb).
pub fn spectrum(
    config: &ScenarioConfig,
    re_range: (f64, f64),
    im_range: (f64, f64),
    grid: usize,
) -> Result<ScenarioReport> {
    config.validate()?;
    let mut out = OutputDir::create(config.resolved_output_dir())?;
    write_spectrum(&config.params, re_range, im_range, grid, &mut out)?;
    finish_report(config, None, None, Distances::default(), out)
}

fn build_history(config: &ScenarioConfig, base_dir: &Path) -> Result<HistoryState> {
    match config.initial.kind {
        InitialKind::Dde => config.build_history(base_dir).context("stage initial-history"),
        InitialKind::Pde => {
            let profile = config
                .build_age_profile(base_dir)
                .context("stage initial-profile")?;
            prelude_from_pde(
                &config.params,
                &profile,
                config.y_initial(),
                config.steps_per_delay,
            )
            .context("stage prelude")
        }
    }
}

/// Prey-explosion runs grow like `e^{alpha* t}`; cap the horizon so the
/// integration stays finite. All other labels keep the configured horizon.
fn capped_horizon(
    config: &ScenarioConfig,
    history: &HistoryState,
    label: PartitionLabel,
) -> Result<f64> {
    match label {
        PartitionLabel::S1Only | PartitionLabel::S0Only | PartitionLabel::BoundaryS2CapS0 => {
            let rate = malthusian_rate(&config.params).context("stage horizon-cap")?;
            let start = history.phi_integral().max(1e-12);
            let cap = config.params.tau + (EXPLOSION_CAP / start).ln() / rate;
            Ok(config.t_end.min(cap))
        }
        _ => Ok(config.t_end),
    }
}

fn run_common_analyses(config: &ScenarioConfig, out: &mut OutputDir) -> Result<()> {
    if config.analyses.spectrum {
        write_spectrum(&config.params, (-0.01, 5.0), (-50.0, 50.0), 24, out)?;
    }
    if config.analyses.orbit {
        write_orbit(&config.params, 1024, out)?;
    }
    Ok(())
}

fn write_spectrum(
    params: &lvdelay::ModelParams,
    re_range: (f64, f64),
    im_range: (f64, f64),
    grid: usize,
    out: &mut OutputDir,
) -> Result<()> {
    let qp = QuasiPolynomial::from_model(params).context("stage spectrum")?;
    let report = roots_in_rectangle(&qp, re_range, im_range, grid).context("stage spectrum")?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    out.write("spectrum.json", &text)
}

fn write_orbit(params: &lvdelay::ModelParams, samples: usize, out: &mut OutputDir) -> Result<()> {
    match planar::find_periodic_orbit(params, samples).context("stage orbit")? {
        Some(orbit) => {
            out.write("orbit.csv", &orbit.to_csv())?;
            let mut text = serde_json::to_string_pretty(&orbit.summary())?;
            text.push('\n');
            out.write("orbit.json", &text)
        }
        None => out.write("orbit.json", "null\n"),
    }
}

fn cross_validate(
    config: &ScenarioConfig,
    traj: &Trajectory,
    out: &mut OutputDir,
) -> Result<f64> {
    let params = &config.params;
    let profile = config.build_age_profile(Path::new("."))?;
    let grid = AgeGrid::new(params, config.steps_per_delay, None)?;
    let state = PdeState::from_profile(params, grid, &profile, config.y_initial())?;
    let (_, at_tau) = pde_history(params, state)?;
    let n_steps = traj.len() - 1;
    let run = simulate(params, at_tau, n_steps, 0)?;
    out.write("pde_series.csv", &run.series.to_csv())?;
    Ok(worst_prey_deviation(params, &run.series.x, traj.x()))
}

fn worst_prey_deviation(params: &lvdelay::ModelParams, pde_x: &[f64], dde_x: &[f64]) -> f64 {
    let scale = coexistence_equilibrium(params)
        .map(|(x_star, _)| x_star.max(1.0))
        .unwrap_or(1.0);
    pde_x
        .iter()
        .zip(dde_x)
        .fold(0.0f64, |worst, (a, b)| worst.max((a - b).abs() / scale))
}

fn history_csv(history: &HistoryState) -> String {
    let n = history.n();
    let mut out = String::with_capacity((n + 1) * 32 + 8);
    out.push_str("a,value\n");
    for (i, v) in history.phi().iter().enumerate() {
        out.push_str(&format!("{},{}\n", i as f64 * history.tau() / n as f64, v));
    }
    out
}

/// Terminal Lyapunov level: the functional evaluated on the last delay
/// window. `None` when the window leaves the functional's domain.
fn final_lyapunov(params: &lvdelay::ModelParams, traj: &Trajectory) -> Option<f64> {
    let n = traj.steps_per_delay();
    if traj.len() <= n {
        return None;
    }
    let start = traj.len() - 1 - n;
    let window = HistoryState::new(
        params.tau,
        traj.x()[start..].to_vec(),
        traj.dx()[start..].to_vec(),
        *traj.y().last().unwrap(),
    )
    .ok()?;
    lyapunov::evaluate(params, &window).ok().map(|v| v.total)
}

/// Same quantity from a scalar series (the transport route), with
/// finite-difference derivative estimates.
fn final_lyapunov_from_series(
    params: &lvdelay::ModelParams,
    x: &[f64],
    y_end: f64,
    steps_per_delay: usize,
) -> Option<f64> {
    if x.len() <= steps_per_delay {
        return None;
    }
    let window = x[x.len() - 1 - steps_per_delay..].to_vec();
    let hist = HistoryState::from_values(params.tau, window, y_end).ok()?;
    lyapunov::evaluate(params, &hist).ok().map(|v| v.total)
}

fn pde_distances(
    params: &lvdelay::ModelParams,
    series: &lvdelay::pde::ScalarSeries,
    steps_per_delay: usize,
) -> Distances {
    let state_series = StateSeries {
        x: &series.x,
        y: &series.y,
        steps_per_delay,
    };
    Distances {
        final_state_distance: final_state_distance(params, &state_series),
        final_lyapunov: final_lyapunov_from_series(
            params,
            &series.x,
            *series.y.last().unwrap_or(&0.0),
            steps_per_delay,
        ),
        pde_crossval_max_dev: None,
    }
}

fn final_state_distance(params: &lvdelay::ModelParams, series: &StateSeries) -> Option<f64> {
    let (x_star, y_star) = coexistence_equilibrium(params).ok()?;
    let xe = *series.x.last()?;
    let ye = *series.y.last()?;
    Some(((xe - x_star).powi(2) + (ye - y_star).powi(2)).sqrt())
}

/// Pearson correlation between the prey series and its delay-lagged copy over
/// the last [`AUTOCORR_WINDOW_DELAYS`] delays. `None` when the window does
/// not fit or either side is degenerate.
pub fn tau_autocorrelation(series_x: &[f64], steps_per_delay: usize) -> Option<f64> {
    let n = steps_per_delay;
    let window = AUTOCORR_WINDOW_DELAYS * n;
    if series_x.len() < window + n + 1 {
        return None;
    }
    let end = series_x.len();
    let begin = end - window;
    let pairs: Vec<(f64, f64)> = (begin..end)
        .map(|k| (series_x[k], series_x[k - n]))
        .collect();
    let m = pairs.len() as f64;
    let mean_a = pairs.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_b = pairs.iter().map(|p| p.1).sum::<f64>() / m;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (a, b) in &pairs {
        cov += (a - mean_a) * (b - mean_b);
        var_a += (a - mean_a).powi(2);
        var_b += (b - mean_b).powi(2);
    }
    if var_a <= 0.0 || var_b <= 0.0 {
        return None;
    }
    Some(cov / (var_a.sqrt() * var_b.sqrt()))
}

fn decide_verdict(
    params: &lvdelay::ModelParams,
    label: PartitionLabel,
    series: &StateSeries,
    final_f: Option<f64>,
) -> Verdict {
    match label {
        PartitionLabel::BoundaryS0 => Verdict::Extinction,
        PartitionLabel::S1Only | PartitionLabel::S0Only | PartitionLabel::BoundaryS2CapS0 => {
            Verdict::PreyExplosion
        }
        PartitionLabel::S2Only | PartitionLabel::S3 => {
            let xe = *series.x.last().unwrap_or(&f64::NAN);
            let ye = *series.y.last().unwrap_or(&f64::NAN);
            match coexistence_equilibrium(params) {
                Ok((x_star, y_star)) => {
                    let dist = ((xe - x_star).powi(2) + (ye - y_star).powi(2)).sqrt();
                    let converged = dist <= VERDICT_DISTANCE_TOL
                        && final_f.is_some_and(|f| f <= VERDICT_ENERGY_TOL);
                    if converged {
                        return Verdict::ToEStar;
                    }
                    let window = AUTOCORR_WINDOW_DELAYS * series.steps_per_delay;
                    let oscillating = series.x.len() > window && {
                        let tail = &series.x[series.x.len() - window..];
                        let max = tail.iter().cloned().fold(f64::MIN, f64::max);
                        let min = tail.iter().cloned().fold(f64::MAX, f64::min);
                        max - min > OSCILLATION_MIN_AMPLITUDE
                    };
                    match tau_autocorrelation(series.x, series.steps_per_delay) {
                        Some(corr) if oscillating && corr >= VERDICT_AUTOCORR => {
                            Verdict::NearPeriodic
                        }
                        _ => Verdict::Undecided,
                    }
                }
                // Below the reproduction threshold everything dies out.
                Err(_) => {
                    if (xe * xe + ye * ye).sqrt() <= VERDICT_DISTANCE_TOL {
                        Verdict::Extinction
                    } else {
                        Verdict::Undecided
                    }
                }
            }
        }
    }
}

fn finish_report(
    config: &ScenarioConfig,
    partition: Option<PartitionLabel>,
    verdict: Option<Verdict>,
    distances: Distances,
    mut out: OutputDir,
) -> Result<ScenarioReport> {
    let params = &config.params;
    let mut report = ScenarioReport {
        params: *params,
        thresholds: thresholds(params),
        equilibria: equilibria(params),
        periodicity_index: periodicity_index(params).ok(),
        partition,
        verdict,
        distances,
        files: out.files().to_vec(),
    };
    report.files.push("report.json".into());
    out.write("report.json", &report.to_json())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn autocorrelation_of_an_exact_delay_periodic_signal_is_one() {
        let n = 64;
        let tau = 3.0;
        let series: Vec<f64> = (0..(n * 14))
            .map(|k| (2.0 * std::f64::consts::PI * (k as f64 / n as f64) * (tau / tau)).sin())
            .collect();
        let corr = tau_autocorrelation(&series, n).unwrap();
        assert!(corr > 0.999999, "corr = {corr}");
    }

    #[test]
    fn autocorrelation_needs_a_full_window() {
        let series = vec![1.0; 100];
        assert!(tau_autocorrelation(&series, 64).is_none());
    }

    #[test]
    fn constant_series_has_no_defined_autocorrelation() {
        let series = vec![2.5; 64 * 12];
        assert!(tau_autocorrelation(&series, 64).is_none());
    }
}
