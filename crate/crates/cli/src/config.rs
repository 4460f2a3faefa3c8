//! Scenario configuration: a single JSON document holding the model
//! parameters, the initial condition, horizons and analysis toggles.

use anyhow::{bail, Context, Result};
use lvdelay::dde::AgeProfile;
use lvdelay::model::{coexistence_equilibrium, ModelParams};
use lvdelay::pde::AgeGrid;
use lvdelay::HistoryState;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Which object the initial profile describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// The profile is the prey history on `[0, tau]`.
    Dde,
    /// The profile is the age density on `[0, a_max]`; the history is built
    /// through the prelude reduction.
    Pde,
}

/// Named built-in profiles, or a CSV of `a,value` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProfileSpec {
    Constant { value: f64 },
    Indicator { from: f64, to: f64, value: f64 },
    Bump { center: f64, width: f64, amplitude: f64 },
    /// The distributed coexistence equilibrium (prey side).
    E2,
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSpec {
    pub kind: InitialKind,
    pub profile: ProfileSpec,
    /// Predator level: `y(tau)` for a history, `y(0)` for an age density.
    pub y: f64,
}

/// Analysis toggles; all independent, all off by default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Analyses {
    pub lyapunov: bool,
    pub spectrum: bool,
    pub orbit: bool,
    pub pde_crossval: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub params: ModelParams,
    pub initial: InitialSpec,
    pub t_end: f64,
    pub steps_per_delay: usize,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub analyses: Analyses,
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate().context("params")?;
        if !(self.t_end.is_finite() && self.t_end > self.params.tau) {
            bail!(
                "t_end must exceed the delay {}, got {}",
                self.params.tau,
                self.t_end
            );
        }
        if self.steps_per_delay < 8 {
            bail!("steps_per_delay must be at least 8");
        }
        if !self.y_initial().is_finite() || self.y_initial() < 0.0 {
            bail!("initial predator level must be nonnegative");
        }
        Ok(())
    }

    pub fn y_initial(&self) -> f64 {
        self.initial.y
    }

    /// Resolves the output directory against `LVDELAY_OUT_ROOT` when it is
    /// set and the configured path is relative.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os("LVDELAY_OUT_ROOT") {
            Some(root) if self.output_dir.is_relative() => {
                PathBuf::from(root).join(&self.output_dir)
            }
            _ => self.output_dir.clone(),
        }
    }

    /// Builds the delay history for a `kind = dde` initial condition.
    pub fn build_history(&self, base_dir: &Path) -> Result<HistoryState> {
        let p = &self.params;
        let n = self.steps_per_delay;
        let history = match &self.initial.profile {
            ProfileSpec::Constant { value } => {
                HistoryState::constant(p.tau, n, *value, self.initial.y)?
            }
            ProfileSpec::Indicator { from, to, value } => HistoryState::from_fn(
                p.tau,
                n,
                |theta| {
                    if (*from..=*to).contains(&theta) {
                        *value
                    } else {
                        0.0
                    }
                },
                self.initial.y,
            )?,
            ProfileSpec::Bump {
                center,
                width,
                amplitude,
            } => HistoryState::from_fn(
                p.tau,
                n,
                |theta| amplitude * (-((theta - center) / width).powi(2)).exp(),
                self.initial.y,
            )?,
            ProfileSpec::E2 => {
                let (x_star, _) = coexistence_equilibrium(p)?;
                HistoryState::constant(p.tau, n, x_star, self.initial.y)?
            }
            ProfileSpec::Csv { path } => {
                let resolved = resolve(base_dir, path);
                let text = std::fs::read_to_string(&resolved)
                    .with_context(|| format!("reading history csv {}", resolved.display()))?;
                HistoryState::from_csv(&text, self.initial.y)?
            }
        };
        Ok(history)
    }

    /// Builds the age profile for a `kind = pde` initial condition. Built-in
    /// shapes are sampled over the default grid truncation.
    pub fn build_age_profile(&self, base_dir: &Path) -> Result<AgeProfile> {
        let p = &self.params;
        let grid = AgeGrid::new(p, self.steps_per_delay, None)?;
        let a_max = grid.a_max();
        let samples = 8 * self.steps_per_delay;
        let profile = match &self.initial.profile {
            ProfileSpec::Constant { value } => AgeProfile::from_fn(a_max, samples, |_| *value)?,
            ProfileSpec::Indicator { from, to, value } => {
                AgeProfile::from_fn(a_max, samples, |a| {
                    if (*from..=*to).contains(&a) {
                        *value
                    } else {
                        0.0
                    }
                })?
            }
            ProfileSpec::Bump {
                center,
                width,
                amplitude,
            } => AgeProfile::from_fn(a_max, samples, |a| {
                amplitude * (-((a - center) / width).powi(2)).exp()
            })?,
            ProfileSpec::E2 => {
                let e2 = lvdelay::pde::equilibrium_e2(p, grid)?;
                AgeProfile::new(a_max, e2.profile().to_vec())?
            }
            ProfileSpec::Csv { path } => {
                let resolved = resolve(base_dir, path);
                let text = std::fs::read_to_string(&resolved)
                    .with_context(|| format!("reading profile csv {}", resolved.display()))?;
                AgeProfile::from_csv(&text)?
            }
        };
        Ok(profile)
    }
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_json() -> &'static str {
        r#"{
            "params": {"mu0": 0.5, "beta0": 10.0, "gamma0": 0.5, "tau": 3.0, "alpha": 0.7, "delta": 2.0},
            "initial": {"kind": "dde", "profile": {"type": "constant", "value": 8.571428571428571}, "y": 1.7313016014842982},
            "t_end": 50.0,
            "steps_per_delay": 64,
            "output_dir": "out/fig1",
            "analyses": {"lyapunov": true}
        }"#
    }

    #[test]
    fn parses_and_validates() {
        let config: ScenarioConfig = serde_json::from_str(sample_json()).unwrap();
        config.validate().unwrap();
        assert!(config.analyses.lyapunov);
        assert!(!config.analyses.spectrum);
        let hist = config.build_history(Path::new(".")).unwrap();
        assert_eq!(hist.n(), 64);
        assert_eq!(hist.phi()[0], 8.571428571428571);
    }

    #[test]
    fn rejects_bad_horizon() {
        let mut config: ScenarioConfig = serde_json::from_str(sample_json()).unwrap();
        config.t_end = 1.0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn builtin_profiles_sample_sensibly() {
        let mut config: ScenarioConfig = serde_json::from_str(sample_json()).unwrap();
        config.initial = InitialSpec {
            kind: InitialKind::Pde,
            profile: ProfileSpec::Indicator {
                from: 3.0,
                to: 6.0,
                value: 1.0,
            },
            y: 0.5,
        };
        let profile = config.build_age_profile(Path::new(".")).unwrap();
        assert!(profile.a_max() >= 6.0);
        assert_eq!(profile.eval(4.5), 1.0);
        assert_eq!(profile.eval(8.0), 0.0);

        config.initial.profile = ProfileSpec::E2;
        let e2 = config.build_age_profile(Path::new(".")).unwrap();
        assert!((e2.eval(0.0) - 57.14285714285714).abs() <= 1e-9);
    }

    #[test]
    fn output_root_override() {
        let config: ScenarioConfig = serde_json::from_str(sample_json()).unwrap();
        // Guard against parallel tests mutating the variable: set, read, clear.
        std::env::set_var("LVDELAY_OUT_ROOT", "/tmp/lvdelay-root");
        let resolved = config.resolved_output_dir();
        std::env::remove_var("LVDELAY_OUT_ROOT");
        assert_eq!(resolved, PathBuf::from("/tmp/lvdelay-root/out/fig1"));
        assert_eq!(config.resolved_output_dir(), PathBuf::from("out/fig1"));
    }
}
