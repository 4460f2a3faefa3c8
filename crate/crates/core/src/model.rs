//! Model parameters, thresholds, equilibria, the delayed vector field and the
//! initial-condition partition classifier.
//!
//! The prey population is structured by age with a juvenile class of width
//! `tau` that neither reproduces nor is hunted; integrating the adult class
//! yields a planar delay system for the adult prey mass `X` and the predator
//! density `y`:
//!
//! ```text
//! X'(t) = beta0 e^{-mu0 tau} X(t - tau) - mu0 X(t) - gamma0 X(t) y(t)
//! y'(t) = alpha gamma0 X(t) y(t) - delta y(t)
//! ```

use crate::dde::HistoryState;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Threshold below which a quadrature result counts as zero prey mass.
pub const INTEGRAL_ZERO_TOL: f64 = 1e-14;

/// The six positive constants defining the delayed predator-prey system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Prey death rate (1/time).
    pub mu0: f64,
    /// Prey birth rate (1/time).
    pub beta0: f64,
    /// Predation rate (1/(density * time)).
    pub gamma0: f64,
    /// Maturation delay (time).
    pub tau: f64,
    /// Assimilation coefficient, in (0, 1).
    pub alpha: f64,
    /// Predator death rate (1/time).
    pub delta: f64,
}

impl ModelParams {
    /// Validates positivity of all six fields and `alpha < 1`.
    pub fn new(
        mu0: f64,
        beta0: f64,
        gamma0: f64,
        tau: f64,
        alpha: f64,
        delta: f64,
    ) -> Result<Self> {
        let p = Self {
            mu0,
            beta0,
            gamma0,
            tau,
            alpha,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mu0", self.mu0),
            ("beta0", self.beta0),
            ("gamma0", self.gamma0),
            ("tau", self.tau),
            ("alpha", self.alpha),
            ("delta", self.delta),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and strictly positive, got {v}"
                )));
            }
        }
        if self.alpha >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Effective birth rate of the delayed term, `beta0 e^{-mu0 tau}`.
    pub fn delayed_birth_rate(&self) -> f64 {
        self.beta0 * (-self.mu0 * self.tau).exp()
    }
}

/// Reproduction and explosion thresholds of the structured model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Basic reproduction number `beta0 e^{-mu0 tau} / mu0`.
    pub r0: f64,
    /// Explosion threshold; identically zero for the juvenile-class rates.
    pub r_minus: f64,
    /// Minimum age of the predation support, equal to `tau`.
    pub a1: f64,
}

/// A fixed point of the delayed system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub kind: EquilibriumKind,
    /// Adult prey mass; 0 for extinction.
    pub x_star: f64,
    /// Predator density; 0 for extinction.
    pub y_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    Extinction,
    Coexistence,
}

/// Classification of an initial condition by prey mass and predator presence.
///
/// The positivity predicates are evaluated on the stored sample grid: strict
/// positivity pointwise at every node, the integral by composite trapezoid
/// with threshold [`INTEGRAL_ZERO_TOL`]. `S0Only` is retained for schema
/// completeness but is never produced by [`classify`]: the zero-integral test
/// and the predator test already tile the cone with the other five labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartitionLabel {
    /// Predators present and prey positive at every age.
    #[serde(rename = "S3")]
    S3,
    /// Predators present and positive prey mass, but prey vanishing somewhere.
    #[serde(rename = "S2_only")]
    S2Only,
    /// No predators, prey positive at every age.
    #[serde(rename = "S1_only")]
    S1Only,
    /// Positive prey mass only (no predators, prey vanishing somewhere).
    #[serde(rename = "S0_only")]
    S0Only,
    /// No predators, positive prey mass, prey vanishing somewhere.
    #[serde(rename = "boundary_S2_cap_S0")]
    BoundaryS2CapS0,
    /// Zero prey mass (any predator level).
    #[serde(rename = "boundary_S0")]
    BoundaryS0,
}

impl std::fmt::Display for PartitionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PartitionLabel::S3 => "S3",
            PartitionLabel::S2Only => "S2_only",
            PartitionLabel::S1Only => "S1_only",
            PartitionLabel::S0Only => "S0_only",
            PartitionLabel::BoundaryS2CapS0 => "boundary_S2_cap_S0",
            PartitionLabel::BoundaryS0 => "boundary_S0",
        };
        f.write_str(s)
    }
}

/// Computes the two thresholds and the predation-support minimum.
pub fn thresholds(params: &ModelParams) -> Thresholds {
    Thresholds {
        r0: params.delayed_birth_rate() / params.mu0,
        r_minus: 0.0,
        a1: params.tau,
    }
}

/// Returns the extinction equilibrium, plus the coexistence equilibrium
/// whenever `R0 > 1` (strict: at `R0 = 1` the two coincide and only
/// extinction is reported).
pub fn equilibria(params: &ModelParams) -> Vec<Equilibrium> {
    let mut eqs = vec![Equilibrium {
        kind: EquilibriumKind::Extinction,
        x_star: 0.0,
        y_star: 0.0,
    }];
    if thresholds(params).r0 > 1.0 {
        eqs.push(Equilibrium {
            kind: EquilibriumKind::Coexistence,
            x_star: params.delta / (params.alpha * params.gamma0),
            y_star: (params.delayed_birth_rate() - params.mu0) / params.gamma0,
        });
    }
    eqs
}

/// The coexistence equilibrium `(X*, y*)`, or an error when `R0 <= 1`.
pub fn coexistence_equilibrium(params: &ModelParams) -> Result<(f64, f64)> {
    if thresholds(params).r0 <= 1.0 {
        return Err(Error::Domain(format!(
            "coexistence equilibrium requires R0 > 1, got R0 = {}",
            thresholds(params).r0
        )));
    }
    Ok((
        params.delta / (params.alpha * params.gamma0),
        (params.delayed_birth_rate() - params.mu0) / params.gamma0,
    ))
}

/// Right-hand side of the delayed system at one state.
pub fn vector_field(params: &ModelParams, x_delayed: f64, x_now: f64, y_now: f64) -> (f64, f64) {
    let dx = params.delayed_birth_rate() * x_delayed
        - params.mu0 * x_now
        - params.gamma0 * x_now * y_now;
    let dy = params.alpha * params.gamma0 * x_now * y_now - params.delta * y_now;
    (dx, dy)
}

/// The quantity `tau sqrt(delta y* gamma0) / (2 pi)`: a nonconstant
/// `tau`-periodic solution exists iff this exceeds 1 (strictly), and purely
/// imaginary characteristic roots exist iff it is an integer.
pub fn periodicity_index(params: &ModelParams) -> Result<f64> {
    let (_, y_star) = coexistence_equilibrium(params)?;
    Ok(params.tau * (params.delta * y_star * params.gamma0).sqrt() / (2.0 * std::f64::consts::PI))
}

/// Classifies a history into the partition of the nonnegative cone.
///
/// Errors if any sample (or the predator level) is negative.
pub fn classify(history: &HistoryState) -> Result<PartitionLabel> {
    if history.phi().iter().any(|v| *v < 0.0) || history.y_tau() < 0.0 {
        return Err(Error::InvalidState(
            "classification requires a nonnegative history".into(),
        ));
    }
    let integral = history.phi_integral();
    if integral <= INTEGRAL_ZERO_TOL {
        return Ok(PartitionLabel::BoundaryS0);
    }
    let pointwise_positive = history.phi().iter().all(|v| *v > 0.0);
    if history.y_tau() > 0.0 {
        Ok(if pointwise_positive {
            PartitionLabel::S3
        } else {
            PartitionLabel::S2Only
        })
    } else {
        Ok(if pointwise_positive {
            PartitionLabel::S1Only
        } else {
            PartitionLabel::BoundaryS2CapS0
        })
    }
}
