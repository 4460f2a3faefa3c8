//! The classical planar Lotka-Volterra engine: conserved energy, the period
//! function `T(E)`, and construction of the delay-length periodic orbit when
//! the periodicity index exceeds one.
//!
//! A nonconstant `tau`-periodic solution of the delayed system solves the
//! undelayed planar system with prey rate `a = beta0 e^{-mu0 tau} - mu0`, so
//! existence reduces to solving `T(E) = tau` along the one-parameter family
//! of closed planar orbits.

use crate::dde::HistoryState;
use crate::error::{Error, Result};
use crate::interp::{hermite, SampledCurve};
use crate::lyapunov;
use crate::model::{coexistence_equilibrium, periodicity_index, ModelParams};
use serde::{Deserialize, Serialize};

/// Root tolerance for `T(E) = tau`.
pub const PERIOD_MATCH_TOL: f64 = 1e-10;
/// Absolute time tolerance for section-crossing location.
pub const EVENT_TIME_TOL: f64 = 1e-12;
/// Upper cap for the energy bracket expansion.
pub const ENERGY_BRACKET_CAP: f64 = 1e6;
/// Hard cap on Runge-Kutta steps within a single period measurement.
const MAX_PERIOD_STEPS: usize = 50_000_000;

/// Positive rates of the planar system `x' = ax - bxy`, `y' = cxy - dy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl PlanarParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("c", c), ("d", d)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(Self { a, b, c, d })
    }

    /// Mapping from the delayed model: `a = beta0 e^{-mu0 tau} - mu0`
    /// (equal to `gamma0 y*`), `b = gamma0`, `c = alpha gamma0`, `d = delta`.
    pub fn from_model(params: &ModelParams) -> Result<Self> {
        coexistence_equilibrium(params)?;
        Self::new(
            params.delayed_birth_rate() - params.mu0,
            params.gamma0,
            params.alpha * params.gamma0,
            params.delta,
        )
    }

    /// The planar fixed point `(d/c, a/b)`.
    pub fn fixed_point(&self) -> (f64, f64) {
        (self.d / self.c, self.a / self.b)
    }

    /// Small-oscillation period `2 pi / sqrt(a d)`, the infimum of `T`.
    pub fn base_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.a * self.d).sqrt()
    }

    fn field(&self, x: f64, y: f64) -> (f64, f64) {
        (self.a * x - self.b * x * y, self.c * x * y - self.d * y)
    }
}

/// Conserved energy `E = d g(cx/d) + a g(by/a)`, zero exactly at the fixed
/// point.
pub fn energy(pp: &PlanarParams, x: f64, y: f64) -> Result<f64> {
    if x <= 0.0 || y <= 0.0 {
        return Err(Error::Domain(format!(
            "energy is defined on the open quadrant, got ({x}, {y})"
        )));
    }
    Ok(pp.d * lyapunov::g(pp.c * x / pp.d)? + pp.a * lyapunov::g(pp.b * y / pp.a)?)
}

/// A fixed-step planar integration with stored derivatives for dense output.
#[derive(Debug, Clone)]
pub struct PlanarPath {
    pub h: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

impl PlanarPath {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn x_curve(&self) -> SampledCurve<'_> {
        SampledCurve {
            t0: 0.0,
            h: self.h,
            values: &self.x,
            derivs: &self.dx,
        }
    }

    fn y_curve(&self) -> SampledCurve<'_> {
        SampledCurve {
            t0: 0.0,
            h: self.h,
            values: &self.y,
            derivs: &self.dy,
        }
    }

    /// Hermite-interpolated state at `t` in `[0, h * (len-1)]`.
    pub fn state(&self, t: f64) -> (f64, f64) {
        (self.x_curve().eval(t), self.y_curve().eval(t))
    }
}

/// Plain RK4 on the planar system; no delayed terms, no clamping (orbits of
/// interest stay in the open quadrant).
pub fn integrate_planar(
    pp: &PlanarParams,
    x0: f64,
    y0: f64,
    h: f64,
    n_steps: usize,
) -> Result<PlanarPath> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    let mut x = Vec::with_capacity(n_steps + 1);
    let mut y = Vec::with_capacity(n_steps + 1);
    let mut dx = Vec::with_capacity(n_steps + 1);
    let mut dy = Vec::with_capacity(n_steps + 1);
    x.push(x0);
    y.push(y0);
    let (d0x, d0y) = pp.field(x0, y0);
    dx.push(d0x);
    dy.push(d0y);
    for k in 0..n_steps {
        let (xk, yk) = (x[k], y[k]);
        let (k1x, k1y) = pp.field(xk, yk);
        let (k2x, k2y) = pp.field(xk + 0.5 * h * k1x, yk + 0.5 * h * k1y);
        let (k3x, k3y) = pp.field(xk + 0.5 * h * k2x, yk + 0.5 * h * k2y);
        let (k4x, k4y) = pp.field(xk + h * k3x, yk + h * k3y);
        let xn = xk + h / 6.0 * (k1x + 2.0 * (k2x + k3x) + k4x);
        let yn = yk + h / 6.0 * (k1y + 2.0 * (k2y + k3y) + k4y);
        if !xn.is_finite() || !yn.is_finite() {
            return Err(Error::Integration(format!(
                "planar state became non-finite at step {k}"
            )));
        }
        let (dxn, dyn_) = pp.field(xn, yn);
        x.push(xn);
        y.push(yn);
        dx.push(dxn);
        dy.push(dyn_);
    }
    Ok(PlanarPath { h, x, y, dx, dy })
}

/// Solves `d g(c x0 / d) = E` for the section abscissa `x0 > d/c`.
///
/// Works in the shifted variable `w = c x0 / d - 1` so tiny energies stay
/// accurate: `g(1 + w) = w - ln_1p(w)` is strictly increasing on `(0, inf)`.
fn section_abscissa(pp: &PlanarParams, energy_level: f64) -> Result<f64> {
    let target = energy_level / pp.d;
    let g1p = |w: f64| w - w.ln_1p();
    let mut hi = 1.0;
    let mut guard = 0;
    while g1p(hi) < target {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::RootFinding(format!(
                "section abscissa bracket failed at energy {energy_level}"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g1p(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi.max(1e-30) {
            break;
        }
    }
    let w = 0.5 * (lo + hi);
    Ok((1.0 + w) * pp.d / pp.c)
}

/// One pass of section-return detection: marches from `(x0, a/b)` with step
/// `h` and returns the time of the first upward crossing of `y = a/b` with
/// `x > d/c`, located by bisection on the dense output.
fn first_return(pp: &PlanarParams, x0: f64, h: f64, horizon: f64) -> Result<f64> {
    let y_section = pp.a / pp.b;
    let x_center = pp.d / pp.c;
    let n_max = (horizon / h).ceil() as usize;
    if n_max > MAX_PERIOD_STEPS {
        return Err(Error::RootFinding(format!(
            "period measurement would need {n_max} steps; energy level out of practical range"
        )));
    }
    let (mut xk, mut yk) = (x0, y_section);
    let (mut dxk, mut dyk) = pp.field(xk, yk);
    for k in 0..n_max {
        let (k1x, k1y) = (dxk, dyk);
        let (k2x, k2y) = pp.field(xk + 0.5 * h * k1x, yk + 0.5 * h * k1y);
        let (k3x, k3y) = pp.field(xk + 0.5 * h * k2x, yk + 0.5 * h * k2y);
        let (k4x, k4y) = pp.field(xk + h * k3x, yk + h * k3y);
        let xn = xk + h / 6.0 * (k1x + 2.0 * (k2x + k3x) + k4x);
        let yn = yk + h / 6.0 * (k1y + 2.0 * (k2y + k3y) + k4y);
        let (dxn, dyn_) = pp.field(xn, yn);

        if yk < y_section && yn >= y_section {
            // Bisection on the in-step Hermite interpolant of y.
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            while (hi - lo) * h > EVENT_TIME_TOL {
                let mid = 0.5 * (lo + hi);
                let ym = hermite(mid, h, yk, dyk, yn, dyn_);
                if ym < y_section {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let s = 0.5 * (lo + hi);
            let x_at = hermite(s, h, xk, dxk, xn, dxn);
            if x_at > x_center {
                return Ok((k as f64 + s) * h);
            }
        }
        xk = xn;
        yk = yn;
        dxk = dxn;
        dyk = dyn_;
    }
    Err(Error::RootFinding(format!(
        "no section return within horizon {horizon}"
    )))
}

/// Period `T(E)` of the closed planar orbit at energy `E > 0`: measured from
/// the section `y = a/b`, `x > d/c`, first with a coarse step, then with
/// `measured period / 4096`.
pub fn period(pp: &PlanarParams, energy_level: f64) -> Result<f64> {
    if !(energy_level.is_finite() && energy_level > 0.0) {
        return Err(Error::Domain(format!(
            "period is defined for positive energies, got {energy_level}"
        )));
    }
    let x0 = section_abscissa(pp, energy_level)?;
    let t0 = pp.base_period();
    // T grows roughly linearly in E for large E; pad the horizon accordingly.
    let horizon = 50.0 * t0 + 4.0 * energy_level * (1.0 / pp.a + 1.0 / pp.d);
    let coarse = first_return(pp, x0, t0 / 1024.0, horizon)?;
    first_return(pp, x0, coarse / 4096.0, 1.5 * coarse)
}

/// Phase convention of a constructed periodic orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseConvention {
    /// `p(tau) = X*` at the lower crossing, so `q(tau) < y*`.
    LowerCrossing,
}

/// The unique nonconstant `tau`-periodic orbit, sampled uniformly over one
/// period `[tau, 2 tau]` and phase-normalized to start at the lower crossing
/// of `p = X*`.
#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    tau: f64,
    p: Vec<f64>,
    q: Vec<f64>,
    dp: Vec<f64>,
    dq: Vec<f64>,
    /// Energy of the delay functional along the orbit.
    energy: f64,
    /// Conserved planar energy solving `T(E) = tau`.
    planar_energy: f64,
    closure_residual: f64,
    phase: PhaseConvention,
}

/// Scalar summary written as the orbit's JSON sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSummary {
    pub energy: f64,
    pub period: f64,
    pub closure_residual: f64,
}

impl PeriodicOrbit {
    /// Number of sample intervals.
    pub fn samples(&self) -> usize {
        self.p.len() - 1
    }

    pub fn period(&self) -> f64 {
        self.tau
    }

    pub fn time(&self, j: usize) -> f64 {
        self.tau + j as f64 * self.tau / self.samples() as f64
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn dp(&self) -> &[f64] {
        &self.dp
    }

    pub fn dq(&self) -> &[f64] {
        &self.dq
    }

    /// Energy of the delay functional along the orbit.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Planar conserved energy at which `T(E) = tau`.
    pub fn planar_energy(&self) -> f64 {
        self.planar_energy
    }

    pub fn closure_residual(&self) -> f64 {
        self.closure_residual
    }

    pub fn phase(&self) -> PhaseConvention {
        self.phase
    }

    pub fn summary(&self) -> OrbitSummary {
        OrbitSummary {
            energy: self.energy,
            period: self.tau,
            closure_residual: self.closure_residual,
        }
    }

    /// The orbit as a delay history: `phi(theta) = p(tau + theta)` with
    /// `y_tau = q(tau)`.
    pub fn as_history(&self) -> Result<HistoryState> {
        HistoryState::new(self.tau, self.p.clone(), self.dp.clone(), self.q[0])
    }

    /// CSV rendering with header `t,p,q`, LF endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.p.len() * 48 + 8);
        out.push_str("t,p,q\n");
        for j in 0..self.p.len() {
            out.push_str(&format!("{},{},{}\n", self.time(j), self.p[j], self.q[j]));
        }
        out
    }
}

/// Constructs the `tau`-periodic orbit when the periodicity index exceeds
/// one; returns `None` otherwise (including the degenerate index-one locus,
/// where the orbit collapses to the equilibrium).
pub fn find_periodic_orbit(
    params: &ModelParams,
    samples: usize,
) -> Result<Option<PeriodicOrbit>> {
    let (x_star, y_star) = coexistence_equilibrium(params)?;
    if samples < 8 {
        return Err(Error::InvalidParameter(format!(
            "orbit needs at least 8 samples, got {samples}"
        )));
    }
    if periodicity_index(params)? <= 1.0 {
        return Ok(None);
    }
    let pp = PlanarParams::from_model(params)?;
    let tau = params.tau;

    // Bracket T(E) = tau upward from near-zero energy, where T is the base
    // period (below tau whenever the index exceeds one).
    let mut lo = 1e-8;
    let mut g_lo = period(&pp, lo)? - tau;
    if g_lo >= 0.0 {
        // Root below energy resolution: the orbit degenerates to E*.
        return Ok(None);
    }
    let mut hi = 1.0;
    let mut g_hi = period(&pp, hi)? - tau;
    while g_hi < 0.0 {
        lo = hi;
        g_lo = g_hi;
        hi *= 2.0;
        if hi > ENERGY_BRACKET_CAP {
            return Err(Error::RootFinding(format!(
                "energy bracket for T(E) = tau exceeded {ENERGY_BRACKET_CAP}"
            )));
        }
        g_hi = period(&pp, hi)? - tau;
    }

    // Bracketed secant with bisection fallback.
    let mut root = 0.5 * (lo + hi);
    for _ in 0..200 {
        let secant = lo - g_lo * (hi - lo) / (g_hi - g_lo);
        let width = hi - lo;
        root = if secant > lo + 1e-3 * width && secant < hi - 1e-3 * width {
            secant
        } else {
            0.5 * (lo + hi)
        };
        let g_mid = period(&pp, root)? - tau;
        if g_mid.abs() <= PERIOD_MATCH_TOL {
            break;
        }
        if g_mid < 0.0 {
            lo = root;
            g_lo = g_mid;
        } else {
            hi = root;
            g_hi = g_mid;
        }
        if width <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    let planar_energy = root;

    // Integrate two periods at the production step and phase-normalize at the
    // lower crossing of x = d/c (= X*), where q is at its minimum.
    let h = tau / 4096.0;
    let n_steps = (2.2 * tau / h).ceil() as usize;
    let x0 = section_abscissa(&pp, planar_energy)?;
    let path = integrate_planar(&pp, x0, pp.a / pp.b, h, n_steps)?;

    let x_center = pp.d / pp.c;
    let mut t_phase = None;
    for k in 0..path.len() - 1 {
        if path.x[k] < x_center && path.x[k + 1] >= x_center && path.dx[k] > 0.0 {
            let (mut s_lo, mut s_hi) = (0.0f64, 1.0f64);
            while (s_hi - s_lo) * h > EVENT_TIME_TOL {
                let mid = 0.5 * (s_lo + s_hi);
                let xm = hermite(mid, h, path.x[k], path.dx[k], path.x[k + 1], path.dx[k + 1]);
                if xm < x_center {
                    s_lo = mid;
                } else {
                    s_hi = mid;
                }
            }
            t_phase = Some((k as f64 + 0.5 * (s_lo + s_hi)) * h);
            break;
        }
    }
    let t_phase = t_phase.ok_or_else(|| {
        Error::RootFinding("lower crossing of the orbit not found".into())
    })?;

    let m = samples;
    let mut p = Vec::with_capacity(m + 1);
    let mut q = Vec::with_capacity(m + 1);
    let mut dp = Vec::with_capacity(m + 1);
    let mut dq = Vec::with_capacity(m + 1);
    for j in 0..=m {
        let (xj, yj) = path.state(t_phase + j as f64 * tau / m as f64);
        let (dxj, dyj) = pp.field(xj, yj);
        p.push(xj);
        q.push(yj);
        dp.push(dxj);
        dq.push(dyj);
    }
    let closure_residual = ((p[m] - p[0]).powi(2) + (q[m] - q[0]).powi(2)).sqrt();
    if q[0] >= y_star {
        return Err(Error::RootFinding(format!(
            "phase normalization failed: q(tau) = {} is not below y* = {y_star}",
            q[0]
        )));
    }
    debug_assert!((p[0] - x_star).abs() <= 1e-6 * x_star);

    let mut orbit = PeriodicOrbit {
        tau,
        p,
        q,
        dp,
        dq,
        energy: 0.0,
        planar_energy,
        closure_residual,
        phase: PhaseConvention::LowerCrossing,
    };
    orbit.energy = lyapunov::evaluate(params, &orbit.as_history()?)?.total;
    Ok(Some(orbit))
}
