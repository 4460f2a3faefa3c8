//! The delay Lyapunov functional: the convex kernel `g`, the three components
//! of the functional, the orbit energy along trajectories, and a numeric
//! check of its analytic derivative identity.

use crate::dde::{HistoryState, Trajectory};
use crate::error::{Error, Result};
use crate::model::{coexistence_equilibrium, ModelParams};
use serde::{Deserialize, Serialize};

/// Arguments of `g` below this are treated as a boundary blow-up, not noise.
pub const G_FLOOR: f64 = 1e-300;

/// The convex kernel `g(x) = x - ln(x) - 1`, nonnegative on `(0, inf)` with
/// its unique zero at `x = 1`.
///
/// Near 1 the direct formula loses digits to cancellation, so that branch is
/// evaluated as `(x-1) - ln_1p(x-1)`.
pub fn g(x: f64) -> Result<f64> {
    if !x.is_finite() || x < G_FLOOR {
        return Err(Error::Domain(format!(
            "g is defined on (0, inf); got {x}"
        )));
    }
    let u = x - 1.0;
    if u.abs() < 0.5 {
        Ok(u - u.ln_1p())
    } else {
        Ok(x - x.ln() - 1.0)
    }
}

/// Components of the functional evaluated on one history window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovValue {
    /// `alpha X* g(phi(tau)/X*)`.
    pub v1: f64,
    /// `y* g(y/y*)`.
    pub v2: f64,
    /// `alpha beta0 e^{-mu0 tau} X* int_0^tau g(phi(s)/X*) ds`.
    pub v3: f64,
    pub total: f64,
}

/// Weight of the integral component (and of the derivative identity),
/// `alpha beta0 X* e^{-mu0 tau}`.
fn integral_weight(params: &ModelParams, x_star: f64) -> f64 {
    params.alpha * params.delayed_birth_rate() * x_star
}

/// Evaluates the functional on a history window. Requires `R0 > 1`, a prey
/// window strictly positive at every node and a positive predator level.
pub fn evaluate(params: &ModelParams, window: &HistoryState) -> Result<LyapunovValue> {
    let (x_star, y_star) = coexistence_equilibrium(params)?;
    if window.y_tau() <= 0.0 {
        return Err(Error::Domain(
            "the functional blows up at zero predator density".into(),
        ));
    }
    let phi = window.phi();
    let n = window.n();
    let h = window.tau() / n as f64;

    let mut g_vals = Vec::with_capacity(phi.len());
    for v in phi {
        g_vals.push(g(v / x_star)?);
    }
    let v1 = params.alpha * x_star * g_vals[n];
    let v2 = y_star * g(window.y_tau() / y_star)?;
    let quad = h * (0.5 * (g_vals[0] + g_vals[n]) + g_vals[1..n].iter().sum::<f64>());
    let v3 = integral_weight(params, x_star) * quad;
    Ok(LyapunovValue {
        v1,
        v2,
        v3,
        total: v1 + v2 + v3,
    })
}

/// The orbit energy `F(t)` at every trajectory node from `2 tau` on, together
/// with the analytic derivative `-alpha beta0 X* e^{-mu0 tau} g(X(t-tau)/X(t))`
/// at each of those nodes.
#[derive(Debug, Clone)]
pub struct EnergySeries {
    pub times: Vec<f64>,
    pub f: Vec<f64>,
    pub analytic_df: Vec<f64>,
    /// Grid spacing, kept for finite differencing.
    h: f64,
}

impl EnergySeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.f.iter().copied())
    }

    /// CSV rendering with header `t,F,analytic_dF`, LF endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 48 + 16);
        out.push_str("t,F,analytic_dF\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.times[i], self.f[i], self.analytic_df[i]
            ));
        }
        out
    }
}

/// Computes the orbit energy along a trajectory started from a strictly
/// positive history. Reported from `t = 2 tau` so the sliding window
/// `[t - tau, t]` lies inside the trajectory.
///
/// Errors where the trajectory touches zero prey (anywhere a window needs it)
/// or zero predators (at a reporting node).
pub fn energy_series(params: &ModelParams, traj: &Trajectory) -> Result<EnergySeries> {
    let (x_star, y_star) = coexistence_equilibrium(params)?;
    let n = traj.steps_per_delay();
    if traj.len() <= n {
        return Err(Error::Domain(format!(
            "trajectory ends at {} before 2 tau = {}",
            traj.t_end(),
            2.0 * params.tau
        )));
    }

    let mut g_vals = Vec::with_capacity(traj.len());
    for (i, x) in traj.x().iter().enumerate() {
        g_vals.push(g(x / x_star).map_err(|_| {
            Error::Domain(format!(
                "prey touches zero at t = {} inside an energy window",
                traj.time(i)
            ))
        })?);
    }

    let h = traj.step();
    let weight = integral_weight(params, x_star);
    let mut times = Vec::with_capacity(traj.len() - n);
    let mut f = Vec::with_capacity(traj.len() - n);
    let mut analytic = Vec::with_capacity(traj.len() - n);
    for k in n..traj.len() {
        let y_k = traj.y()[k];
        if y_k <= 0.0 {
            return Err(Error::Domain(format!(
                "predators touch zero at t = {}",
                traj.time(k)
            )));
        }
        let window = &g_vals[k - n..=k];
        let quad = h * (0.5 * (window[0] + window[n]) + window[1..n].iter().sum::<f64>());
        let value = params.alpha * x_star * g_vals[k] + y_star * g(y_k / y_star)? + weight * quad;
        times.push(traj.time(k));
        f.push(value);
        analytic.push(-weight * g(traj.x()[k - n] / traj.x()[k])?);
    }
    Ok(EnergySeries {
        times,
        f,
        analytic_df: analytic,
        h,
    })
}

/// Compares centered finite differences of `F` against the analytic
/// derivative at the interior nodes of the series and returns the largest
/// discrepancy relative to the sup of the analytic side (floored at
/// `1e-12` of the identity's weight so the equilibrium case reads as zero).
pub fn derivative_check(params: &ModelParams, traj: &Trajectory) -> Result<f64> {
    let series = energy_series(params, traj)?;
    if series.len() < 3 {
        return Err(Error::Domain(
            "derivative check needs at least three energy nodes".into(),
        ));
    }
    let (x_star, _) = coexistence_equilibrium(params)?;
    let scale = series
        .analytic_df
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-12 * integral_weight(params, x_star));
    let mut worst = 0.0f64;
    for k in 1..series.len() - 1 {
        let fd = (series.f[k + 1] - series.f[k - 1]) / (2.0 * series.h);
        worst = worst.max((fd - series.analytic_df[k]).abs());
    }
    Ok(worst / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dde::{integrate, HistoryState};
    use crate::model::ModelParams;
    use approx::assert_relative_eq;

    fn fig1() -> ModelParams {
        ModelParams::new(0.5, 10.0, 0.5, 3.0, 0.7, 2.0).unwrap()
    }

    #[test]
    fn g_kernel_values() {
        assert_eq!(g(1.0).unwrap(), 0.0);
        assert_relative_eq!(
            g(std::f64::consts::E).unwrap(),
            std::f64::consts::E - 2.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(g(1e-8).unwrap(), 17.420680753952367, max_relative = 1e-12);
        assert!(g(0.0).is_err());
        assert!(g(-1.0).is_err());
        assert!(g(1e-305).is_err());
        // Accurate near the zero: g(1 + u) = u^2/2 - u^3/3 + ...
        let u = 1e-6;
        assert_relative_eq!(g(1.0 + u).unwrap(), u * u / 2.0 - u * u * u / 3.0, max_relative = 1e-9);
    }

    #[test]
    fn functional_vanishes_exactly_at_the_equilibrium_window() {
        let p = fig1();
        let (xs, ys) = crate::model::coexistence_equilibrium(&p).unwrap();
        let window = HistoryState::constant(p.tau, 64, xs, ys).unwrap();
        let v = evaluate(&p, &window).unwrap();
        assert_eq!(v.total, 0.0);
    }

    #[test]
    fn only_the_predator_component_survives_at_scaled_predators() {
        let p = fig1();
        let (xs, ys) = crate::model::coexistence_equilibrium(&p).unwrap();
        let window = HistoryState::constant(p.tau, 64, xs, 2.0 * ys).unwrap();
        let v = evaluate(&p, &window).unwrap();
        assert_eq!(v.v1, 0.0);
        assert_eq!(v.v3, 0.0);
        let expected = ys * (1.0 - std::f64::consts::LN_2);
        assert_relative_eq!(v.v2, expected, max_relative = 1e-13);
        assert_relative_eq!(v.total, expected, max_relative = 1e-13);
    }

    #[test]
    fn evaluate_rejects_boundary_windows() {
        let p = fig1();
        let (xs, ys) = crate::model::coexistence_equilibrium(&p).unwrap();
        let zero_pred = HistoryState::constant(p.tau, 16, xs, 0.0).unwrap();
        assert!(evaluate(&p, &zero_pred).is_err());
        let touching = HistoryState::from_values(
            p.tau,
            (0..=16).map(|i| i as f64).collect(),
            ys,
        )
        .unwrap();
        assert!(evaluate(&p, &touching).is_err());
    }

    #[test]
    fn energy_is_zero_and_flat_on_the_constant_trajectory() {
        let p = fig1();
        let (xs, ys) = crate::model::coexistence_equilibrium(&p).unwrap();
        let hist = HistoryState::constant(p.tau, 64, xs, ys).unwrap();
        let traj = integrate(&p, &hist, 30.0, 64).unwrap();
        let series = energy_series(&p, &traj).unwrap();
        assert!(series.f.iter().all(|v| v.abs() <= 1e-12));
        let disc = derivative_check(&p, &traj).unwrap();
        assert!(disc <= 1e-12, "discrepancy {disc}");
    }

    #[test]
    fn energy_decreases_from_a_perturbed_start() {
        let p = fig1();
        let (xs, ys) = crate::model::coexistence_equilibrium(&p).unwrap();
        let hist = HistoryState::constant(p.tau, 256, xs, ys + 1.0).unwrap();
        let traj = integrate(&p, &hist, 120.0, 256).unwrap();
        let series = energy_series(&p, &traj).unwrap();
        let slack = 1e-8 * series.f[0].max(1.0);
        for w in series.f.windows(2) {
            assert!(w[1] <= w[0] + slack, "energy increased: {} -> {}", w[0], w[1]);
        }
        // Decreasing overall; the asymptotic contraction is slow for these
        // rates (dominant root near -0.003), so only a coarse drop by t = 120.
        assert!(series.f[series.len() - 1] < 0.25 * series.f[0]);
        // The analytic side of the identity is nonpositive everywhere.
        assert!(series.analytic_df.iter().all(|v| *v <= 0.0));
    }

    #[test]
    fn derivative_identity_converges_at_second_order() {
        let p = fig1();
        let (xs, ys) = crate::model::coexistence_equilibrium(&p).unwrap();
        let run = |n: usize| {
            let hist = HistoryState::constant(p.tau, n, 1.5 * xs, 0.5 * ys).unwrap();
            let traj = integrate(&p, &hist, 30.0, n).unwrap();
            derivative_check(&p, &traj).unwrap()
        };
        let coarse = run(128);
        let fine = run(256);
        assert!(coarse <= 5e-3, "coarse discrepancy {coarse}");
        assert!(
            fine <= coarse / 3.5,
            "expected near-quadratic improvement: {coarse} -> {fine}"
        );
    }

    #[test]
    fn energy_series_requires_room_for_the_window() {
        let p = fig1();
        let (xs, ys) = crate::model::coexistence_equilibrium(&p).unwrap();
        let hist = HistoryState::constant(p.tau, 16, xs, ys).unwrap();
        let traj = integrate(&p, &hist, p.tau + 1.0, 16).unwrap();
        assert!(energy_series(&p, &traj).is_err());
    }

    #[test]
    fn csv_has_expected_shape() {
        let p = fig1();
        let (xs, ys) = crate::model::coexistence_equilibrium(&p).unwrap();
        let hist = HistoryState::constant(p.tau, 32, xs, 2.0 * ys).unwrap();
        let traj = integrate(&p, &hist, 12.0, 32).unwrap();
        let series = energy_series(&p, &traj).unwrap();
        let csv = series.to_csv();
        assert!(csv.starts_with("t,F,analytic_dF\n"));
        assert_eq!(csv.lines().count(), series.len() + 1);
    }
}
