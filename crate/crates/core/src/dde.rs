//! Method-of-steps integrator for the delayed system, with dense output, plus
//! the prelude ODE that builds a delay history from age-structured initial
//! data.
//!
//! The step size is always `h = tau / steps_per_delay`, so delayed reads at
//! full-step stage offsets land exactly on stored nodes and only the half-step
//! stages interpolate (cubic Hermite on stored value/derivative pairs).

use crate::error::{Error, Result};
use crate::interp::{finite_difference_derivs, SampledCurve};
use crate::model::{vector_field, ModelParams};

/// Tolerated negative undershoot before a state is declared inadmissible.
/// Anything in `[-NEGATIVE_TOL, 0)` is clamped to zero.
pub const NEGATIVE_TOL: f64 = 1e-10;

/// Minimum number of grid intervals for histories and integrations.
pub const MIN_STEPS: usize = 8;

fn check_admissible(name: &str, v: f64, t: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::Integration(format!(
            "{name} became non-finite at t = {t}"
        )));
    }
    if v < 0.0 {
        if v >= -NEGATIVE_TOL {
            return Ok(0.0);
        }
        return Err(Error::Integration(format!(
            "{name} undershot to {v} at t = {t} (tolerance {NEGATIVE_TOL})"
        )));
    }
    Ok(v)
}

/// Initial condition of the delayed system: the prey history `phi` on
/// `[0, tau]` (uniform grid, stored values and derivative estimates) together
/// with the predator level at `t = tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryState {
    tau: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
    y_tau: f64,
}

impl HistoryState {
    /// Builds a history from explicit values and derivative estimates on the
    /// uniform grid `theta_i = i * tau / n`, `i = 0..=n`.
    pub fn new(tau: f64, values: Vec<f64>, derivs: Vec<f64>, y_tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidState(format!(
                "history span must be positive, got {tau}"
            )));
        }
        if values.len() != derivs.len() {
            return Err(Error::InvalidState(format!(
                "{} values but {} derivatives",
                values.len(),
                derivs.len()
            )));
        }
        if values.len() < MIN_STEPS + 1 {
            return Err(Error::InvalidState(format!(
                "history needs at least {} nodes, got {}",
                MIN_STEPS + 1,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidState(
                "history samples must be finite and nonnegative".into(),
            ));
        }
        if derivs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState(
                "history derivative estimates must be finite".into(),
            ));
        }
        if !y_tau.is_finite() || y_tau < 0.0 {
            return Err(Error::InvalidState(format!(
                "predator level must be finite and nonnegative, got {y_tau}"
            )));
        }
        Ok(Self {
            tau,
            values,
            derivs,
            y_tau,
        })
    }

    /// Builds a history from values alone; derivatives are estimated by
    /// second-order finite differences.
    pub fn from_values(tau: f64, values: Vec<f64>, y_tau: f64) -> Result<Self> {
        if values.len() < MIN_STEPS + 1 {
            return Err(Error::InvalidState(format!(
                "history needs at least {} nodes, got {}",
                MIN_STEPS + 1,
                values.len()
            )));
        }
        let h = tau / (values.len() - 1) as f64;
        let derivs = finite_difference_derivs(&values, h);
        Self::new(tau, values, derivs, y_tau)
    }

    /// Constant history `phi = x_value` with `n` intervals.
    pub fn constant(tau: f64, n: usize, x_value: f64, y_tau: f64) -> Result<Self> {
        Self::new(tau, vec![x_value; n + 1], vec![0.0; n + 1], y_tau)
    }

    /// Samples `phi = f(theta)` on `n` intervals; derivatives by finite
    /// differences.
    pub fn from_fn(tau: f64, n: usize, f: impl Fn(f64) -> f64, y_tau: f64) -> Result<Self> {
        let values: Vec<f64> = (0..=n).map(|i| f(i as f64 * tau / n as f64)).collect();
        Self::from_values(tau, values, y_tau)
    }

    /// Parses `a,value` rows (optional header) sampled on a uniform grid over
    /// `[0, tau]`; `tau` is taken from the last abscissa.
    pub fn from_csv(text: &str, y_tau: f64) -> Result<Self> {
        let (grid, values) = parse_value_rows(text)?;
        let tau = *grid.last().unwrap();
        check_uniform_from_zero(&grid, "history")?;
        Self::from_values(tau, values, y_tau)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Number of grid intervals.
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn phi(&self) -> &[f64] {
        &self.values
    }

    pub fn phi_derivs(&self) -> &[f64] {
        &self.derivs
    }

    pub fn y_tau(&self) -> f64 {
        self.y_tau
    }

    fn curve(&self) -> SampledCurve<'_> {
        SampledCurve {
            t0: 0.0,
            h: self.tau / self.n() as f64,
            values: &self.values,
            derivs: &self.derivs,
        }
    }

    /// Dense evaluation of `phi` at any `theta` in `[0, tau]`.
    pub fn eval(&self, theta: f64) -> Result<f64> {
        if theta < 0.0 || theta > self.tau * (1.0 + 1e-12) {
            return Err(Error::OutOfRange(format!(
                "theta = {theta} outside [0, {}]",
                self.tau
            )));
        }
        Ok(self.curve().eval(theta.min(self.tau)))
    }

    pub fn eval_deriv(&self, theta: f64) -> Result<f64> {
        if theta < 0.0 || theta > self.tau * (1.0 + 1e-12) {
            return Err(Error::OutOfRange(format!(
                "theta = {theta} outside [0, {}]",
                self.tau
            )));
        }
        Ok(self.curve().eval_deriv(theta.min(self.tau)))
    }

    /// Composite-trapezoid integral of `phi` over `[0, tau]`.
    pub fn phi_integral(&self) -> f64 {
        let h = self.tau / self.n() as f64;
        trapezoid(&self.values, h)
    }

    /// Resamples onto `n` intervals, clamping interpolation undershoot to 0.
    pub fn resample(&self, n: usize) -> Result<Self> {
        if n == self.n() {
            return Ok(self.clone());
        }
        let h = self.tau / n as f64;
        let curve = self.curve();
        let values: Vec<f64> = (0..=n)
            .map(|i| curve.eval((i as f64 * h).min(self.tau)).max(0.0))
            .collect();
        let derivs: Vec<f64> = (0..=n)
            .map(|i| curve.eval_deriv((i as f64 * h).min(self.tau)))
            .collect();
        Self::new(self.tau, values, derivs, self.y_tau)
    }
}

/// Composite trapezoid with uniform spacing `h`.
pub(crate) fn trapezoid(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    h * (0.5 * (values[0] + values[values.len() - 1]) + interior)
}

fn parse_value_rows(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let a = parts.next().unwrap_or("").trim();
        let v = parts.next().unwrap_or("").trim();
        if lineno == 0 && a.parse::<f64>().is_err() {
            continue; // header row
        }
        let a: f64 = a
            .parse()
            .map_err(|_| Error::InvalidState(format!("line {}: bad abscissa {a:?}", lineno + 1)))?;
        let v: f64 = v
            .parse()
            .map_err(|_| Error::InvalidState(format!("line {}: bad value {v:?}", lineno + 1)))?;
        grid.push(a);
        values.push(v);
    }
    if grid.len() < 2 {
        return Err(Error::InvalidState("csv holds fewer than two rows".into()));
    }
    Ok((grid, values))
}

fn check_uniform_from_zero(grid: &[f64], what: &str) -> Result<()> {
    let n = grid.len() - 1;
    let span = grid[n];
    if grid[0].abs() > 1e-12 * span.max(1.0) {
        return Err(Error::InvalidState(format!("{what} grid must start at 0")));
    }
    let h = span / n as f64;
    for (i, a) in grid.iter().enumerate() {
        if (a - i as f64 * h).abs() > 1e-9 * span.max(1.0) {
            return Err(Error::InvalidState(format!(
                "{what} grid is not uniform near row {}",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Initial age density of the prey on a uniform grid over `[0, a_max]`,
/// treated as zero beyond `a_max`. Evaluation is piecewise linear.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeProfile {
    a_max: f64,
    values: Vec<f64>,
}

impl AgeProfile {
    pub fn new(a_max: f64, values: Vec<f64>) -> Result<Self> {
        if !(a_max.is_finite() && a_max > 0.0) {
            return Err(Error::InvalidState(format!(
                "truncation age must be positive, got {a_max}"
            )));
        }
        if values.len() < 2 {
            return Err(Error::InvalidState(
                "age profile needs at least two samples".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidState(
                "age profile samples must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { a_max, values })
    }

    pub fn from_fn(a_max: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = (0..=n).map(|i| f(i as f64 * a_max / n as f64)).collect();
        Self::new(a_max, values)
    }

    /// Parses `a,value` rows (optional header) on a uniform grid from zero.
    pub fn from_csv(text: &str) -> Result<Self> {
        let (grid, values) = parse_value_rows(text)?;
        check_uniform_from_zero(&grid, "age profile")?;
        Self::new(*grid.last().unwrap(), values)
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn spacing(&self) -> f64 {
        self.a_max / (self.values.len() - 1) as f64
    }

    /// Linear interpolation; zero outside `[0, a_max]`.
    pub fn eval(&self, a: f64) -> f64 {
        if a < 0.0 || a > self.a_max {
            return 0.0;
        }
        let h = self.spacing();
        let u = a / h;
        let i = (u.floor() as usize).min(self.values.len() - 2);
        let s = u - i as f64;
        self.values[i] * (1.0 - s) + self.values[i + 1] * s
    }

    /// Exact integral of the interpolant over `[lo, hi]` (clipped to the
    /// stored range; the tail beyond `a_max` contributes nothing).
    pub fn integral_range(&self, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(0.0);
        let hi = hi.min(self.a_max);
        if hi <= lo {
            return 0.0;
        }
        let h = self.spacing();
        let i_lo = ((lo / h).floor() as usize).min(self.values.len() - 2);
        let i_hi = ((hi / h).ceil() as usize).max(i_lo + 1).min(self.values.len() - 1);
        let mut total = 0.0;
        for i in i_lo..i_hi {
            let a0 = (i as f64 * h).max(lo);
            let a1 = ((i + 1) as f64 * h).min(hi);
            if a1 > a0 {
                total += 0.5 * (self.eval(a0) + self.eval(a1)) * (a1 - a0);
            }
        }
        total
    }
}

/// Dense, interpolable record of one integration of the delayed system on
/// `[tau, t_end]` with uniform spacing `h = tau / steps_per_delay`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    params: ModelParams,
    t0: f64,
    h: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl Trajectory {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    /// Number of stored nodes.
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.h
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn dy(&self) -> &[f64] {
        &self.dy
    }

    /// Grid intervals per delay; exact by construction.
    pub fn steps_per_delay(&self) -> usize {
        (self.params.tau / self.h).round() as usize
    }

    fn x_curve(&self) -> SampledCurve<'_> {
        SampledCurve {
            t0: self.t0,
            h: self.h,
            values: &self.x,
            derivs: &self.dx,
        }
    }

    fn y_curve(&self) -> SampledCurve<'_> {
        SampledCurve {
            t0: self.t0,
            h: self.h,
            values: &self.y,
            derivs: &self.dy,
        }
    }

    /// Hermite-interpolated state at any `t` in `[t0, t_end]`; exact at nodes.
    pub fn sample_state(&self, t: f64) -> Result<(f64, f64)> {
        let slack = 1e-12 * self.t_end().max(1.0);
        if t < self.t0 - slack || t > self.t_end() + slack {
            return Err(Error::OutOfRange(format!(
                "t = {t} outside [{}, {}]",
                self.t0,
                self.t_end()
            )));
        }
        let t = t.clamp(self.t0, self.t_end());
        Ok((self.x_curve().eval(t), self.y_curve().eval(t)))
    }

    /// CSV rendering with header `t,X,y,dX,dy`, one row per node, LF endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 64 + 16);
        out.push_str("t,X,y,dX,dy\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.time(i),
                self.x[i],
                self.y[i],
                self.dx[i],
                self.dy[i]
            ));
        }
        out
    }
}

/// Integrates the delayed system by the method of steps with classic
/// four-stage Runge-Kutta and step `h = tau / steps_per_delay`.
///
/// The first delay interval reads delayed values from the history; later
/// intervals read from the trajectory itself. The returned trajectory covers
/// at least `[tau, t_end]` (rounded up to a whole step).
pub fn integrate(
    params: &ModelParams,
    history: &HistoryState,
    t_end: f64,
    steps_per_delay: usize,
) -> Result<Trajectory> {
    params.validate()?;
    let tau = params.tau;
    if (history.tau() - tau).abs() > 1e-12 * tau {
        return Err(Error::InvalidState(format!(
            "history spans [0, {}] but the delay is {}",
            history.tau(),
            tau
        )));
    }
    if steps_per_delay < MIN_STEPS {
        return Err(Error::InvalidParameter(format!(
            "steps_per_delay must be at least {MIN_STEPS}, got {steps_per_delay}"
        )));
    }
    if !(t_end.is_finite() && t_end > tau) {
        return Err(Error::InvalidParameter(format!(
            "t_end must exceed the delay {tau}, got {t_end}"
        )));
    }

    let n = steps_per_delay;
    let h = tau / n as f64;
    let hist = history.resample(n)?;
    let n_steps = (((t_end - tau) / h) - 1e-9).ceil().max(1.0) as usize;

    let mut x = Vec::with_capacity(n_steps + 1);
    let mut y = Vec::with_capacity(n_steps + 1);
    let mut dx = Vec::with_capacity(n_steps + 1);
    let mut dy = Vec::with_capacity(n_steps + 1);

    x.push(hist.phi()[n]);
    y.push(hist.y_tau());
    let (d0x, d0y) = vector_field(params, hist.phi()[0], x[0], y[0]);
    dx.push(d0x);
    dy.push(d0y);

    // Delayed prey value at grid index `idx` (history units from t = 0),
    // optionally at the half point of [idx, idx+1]. Intervals never straddle
    // the history/trajectory splice because h divides tau. Interpolated reads
    // are floored at zero: prey mass cannot be negative, and Hermite
    // undershoot near kinks would otherwise inject negative births.
    let delayed = |idx: usize, half: bool, x: &[f64], dx: &[f64]| -> f64 {
        if !half {
            return if idx <= n {
                hist.phi()[idx]
            } else {
                x[idx - n]
            };
        }
        let value = if idx + 1 <= n {
            crate::interp::hermite(
                0.5,
                h,
                hist.phi()[idx],
                hist.phi_derivs()[idx],
                hist.phi()[idx + 1],
                hist.phi_derivs()[idx + 1],
            )
        } else {
            let j = idx - n;
            crate::interp::hermite(0.5, h, x[j], dx[j], x[j + 1], dx[j + 1])
        };
        value.max(0.0)
    };

    for k in 0..n_steps {
        let t_k = tau + k as f64 * h;
        let (xk, yk) = (x[k], y[k]);
        let xd0 = delayed(k, false, &x, &dx);
        let xdh = delayed(k, true, &x, &dx);
        let xd1 = delayed(k + 1, false, &x, &dx);

        let (k1x, k1y) = vector_field(params, xd0, xk, yk);
        let (k2x, k2y) = vector_field(params, xdh, xk + 0.5 * h * k1x, yk + 0.5 * h * k1y);
        let (k3x, k3y) = vector_field(params, xdh, xk + 0.5 * h * k2x, yk + 0.5 * h * k2y);
        let (k4x, k4y) = vector_field(params, xd1, xk + h * k3x, yk + h * k3y);

        let t_next = t_k + h;
        let x_next = check_admissible(
            "X",
            xk + h / 6.0 * (k1x + 2.0 * (k2x + k3x) + k4x),
            t_next,
        )?;
        let y_next = check_admissible(
            "y",
            yk + h / 6.0 * (k1y + 2.0 * (k2y + k3y) + k4y),
            t_next,
        )?;
        let (dxn, dyn_) = vector_field(params, xd1, x_next, y_next);
        x.push(x_next);
        y.push(y_next);
        dx.push(dxn);
        dy.push(dyn_);
    }

    Ok(Trajectory {
        params: *params,
        t0: tau,
        h,
        x,
        y,
        dx,
        dy,
    })
}

/// Full output of the prelude ODE on `[0, tau]`: the delay history plus the
/// juvenile mass path, kept for diagnostics only.
#[derive(Debug, Clone)]
pub struct PreludeSolution {
    pub history: HistoryState,
    /// Juvenile prey mass `psi` at the history grid nodes.
    pub psi: Vec<f64>,
    /// Predator path at the history grid nodes.
    pub y_path: Vec<f64>,
}

/// Builds the delay history from PDE initial data `(x0, y0)` by solving the
/// prelude ODE for `(phi, psi, y)` on `[0, tau]` with the same fixed-step RK4.
///
/// The forcing term is the prey density reaching maturation age,
/// `e^{-mu0 t} x0(tau - t)`, read from the profile by linear interpolation.
pub fn prelude_from_pde(
    params: &ModelParams,
    x0: &AgeProfile,
    y0: f64,
    steps_per_delay: usize,
) -> Result<HistoryState> {
    Ok(prelude_full(params, x0, y0, steps_per_delay)?.history)
}

/// As [`prelude_from_pde`], returning the juvenile mass path as well.
pub fn prelude_full(
    params: &ModelParams,
    x0: &AgeProfile,
    y0: f64,
    steps_per_delay: usize,
) -> Result<PreludeSolution> {
    params.validate()?;
    let tau = params.tau;
    if tau > x0.a_max() {
        return Err(Error::InvalidState(format!(
            "profile truncated at {} but the forcing needs ages up to tau = {tau}",
            x0.a_max()
        )));
    }
    if x0.a_max() < 2.0 * tau {
        return Err(Error::InvalidState(format!(
            "profile truncation {} below 2 tau = {}",
            x0.a_max(),
            2.0 * tau
        )));
    }
    if !y0.is_finite() || y0 < 0.0 {
        return Err(Error::InvalidState(format!(
            "predator level must be finite and nonnegative, got {y0}"
        )));
    }
    if steps_per_delay < MIN_STEPS {
        return Err(Error::InvalidParameter(format!(
            "steps_per_delay must be at least {MIN_STEPS}, got {steps_per_delay}"
        )));
    }

    let n = steps_per_delay;
    let h = tau / n as f64;
    let forcing = |t: f64| (-params.mu0 * t).exp() * x0.eval(tau - t);
    let rhs = |t: f64, phi: f64, psi: f64, y: f64| -> (f64, f64, f64) {
        let f = forcing(t);
        let dphi = f - params.mu0 * phi - params.gamma0 * phi * y;
        let dpsi = params.beta0 * phi - f - params.mu0 * psi;
        let dy = params.alpha * params.gamma0 * phi * y - params.delta * y;
        (dphi, dpsi, dy)
    };

    let mut phi = vec![0.0; n + 1];
    let mut dphi = vec![0.0; n + 1];
    let mut psi = vec![0.0; n + 1];
    let mut ys = vec![0.0; n + 1];
    phi[0] = x0.integral_range(tau, x0.a_max());
    psi[0] = x0.integral_range(0.0, tau);
    ys[0] = y0;
    dphi[0] = rhs(0.0, phi[0], psi[0], ys[0]).0;

    for k in 0..n {
        let t = k as f64 * h;
        let (p, q, yv) = (phi[k], psi[k], ys[k]);
        let (k1p, k1q, k1y) = rhs(t, p, q, yv);
        let (k2p, k2q, k2y) = rhs(
            t + 0.5 * h,
            p + 0.5 * h * k1p,
            q + 0.5 * h * k1q,
            yv + 0.5 * h * k1y,
        );
        let (k3p, k3q, k3y) = rhs(
            t + 0.5 * h,
            p + 0.5 * h * k2p,
            q + 0.5 * h * k2q,
            yv + 0.5 * h * k2y,
        );
        let (k4p, k4q, k4y) = rhs(t + h, p + h * k3p, q + h * k3q, yv + h * k3y);

        let t_next = t + h;
        phi[k + 1] = check_admissible(
            "phi",
            p + h / 6.0 * (k1p + 2.0 * (k2p + k3p) + k4p),
            t_next,
        )?;
        psi[k + 1] = check_admissible(
            "psi",
            q + h / 6.0 * (k1q + 2.0 * (k2q + k3q) + k4q),
            t_next,
        )?;
        ys[k + 1] = check_admissible(
            "y",
            yv + h / 6.0 * (k1y + 2.0 * (k2y + k3y) + k4y),
            t_next,
        )?;
        dphi[k + 1] = rhs(t_next, phi[k + 1], psi[k + 1], ys[k + 1]).0;
    }

    let y_tau = ys[n];
    Ok(PreludeSolution {
        history: HistoryState::new(tau, phi, dphi, y_tau)?,
        psi,
        y_path: ys,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{coexistence_equilibrium, ModelParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fig1() -> ModelParams {
        ModelParams::new(0.5, 10.0, 0.5, 3.0, 0.7, 2.0).unwrap()
    }

    #[test]
    fn equilibrium_history_stays_fixed() {
        let p = fig1();
        let (xs, ys) = coexistence_equilibrium(&p).unwrap();
        let hist = HistoryState::constant(p.tau, 64, xs, ys).unwrap();
        let traj = integrate(&p, &hist, 50.0, 64).unwrap();
        for i in 0..traj.len() {
            assert!((traj.x()[i] - xs).abs() <= 1e-10 * xs.max(1.0));
            assert!((traj.y()[i] - ys).abs() <= 1e-10 * ys.max(1.0));
        }
    }

    #[test]
    fn zero_prey_history_decays_predators_exponentially() {
        let p = fig1();
        let hist = HistoryState::constant(p.tau, 256, 0.0, 1.0).unwrap();
        let traj = integrate(&p, &hist, 30.0, 256).unwrap();
        for i in 0..traj.len() {
            let t = traj.time(i);
            assert_eq!(traj.x()[i], 0.0);
            let exact = (-p.delta * (t - p.tau)).exp();
            assert!(
                (traj.y()[i] - exact).abs() <= 1e-8,
                "t = {t}: y = {} vs {exact}",
                traj.y()[i]
            );
        }
    }

    #[test]
    fn predator_free_history_keeps_predators_at_zero_and_prey_grows() {
        let p = fig1();
        let hist = HistoryState::constant(p.tau, 256, 1.0, 0.0).unwrap();
        let traj = integrate(&p, &hist, 100.0, 256).unwrap();
        assert!(traj.y().iter().all(|v| *v == 0.0));

        // Independent oracle for the delayed Malthusian rate: bisection on
        // lambda + mu0 = beta0 e^{-mu0 tau} e^{-lambda tau}.
        let b = p.delayed_birth_rate();
        let f = |lam: f64| b * (-lam * p.tau).exp() - lam - p.mu0;
        let (mut lo, mut hi) = (0.0, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let alpha_star = 0.5 * (lo + hi);
        assert_relative_eq!(alpha_star, 0.3297, epsilon = 5e-4);

        let (x50, _) = traj.sample_state(50.0).unwrap();
        let (x100, _) = traj.sample_state(100.0).unwrap();
        let slope = (x100.ln() - x50.ln()) / 50.0;
        assert!(
            (slope - alpha_star).abs() <= 1e-3,
            "log-slope {slope} vs alpha* {alpha_star}"
        );
        // Eventually monotone increasing.
        let tail = &traj.x()[traj.len() - 200..];
        assert!(tail.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn fourth_order_step_convergence() {
        let p = fig1();
        let t_end = 20.0;
        let value_at = |n: usize| {
            let hist = HistoryState::constant(p.tau, n, 8.0, 1.5).unwrap();
            let traj = integrate(&p, &hist, t_end, n).unwrap();
            traj.x()[traj.len() - 1]
        };
        let (a, b, c) = (value_at(32), value_at(64), value_at(128));
        let ratio = (b - a).abs() / (c - b).abs();
        assert!(ratio >= 8.0, "observed refinement ratio {ratio}");
    }

    #[test]
    fn sample_state_matches_nodes_and_half_step_refinement() {
        let p = fig1();
        let hist = HistoryState::constant(p.tau, 64, 8.0, 1.5).unwrap();
        let traj = integrate(&p, &hist, 12.0, 64).unwrap();
        let i = traj.len() / 2;
        let (x, y) = traj.sample_state(traj.time(i)).unwrap();
        assert_eq!(x, traj.x()[i]);
        assert_eq!(y, traj.y()[i]);

        // Mid-interval values agree with a doubled-resolution run to O(h^4).
        let fine = integrate(&p, &hist.resample(128).unwrap(), 12.0, 128).unwrap();
        let t = traj.time(i) + 0.5 * traj.step();
        let (xm, _) = traj.sample_state(t).unwrap();
        let (xf, _) = fine.sample_state(t).unwrap();
        assert!((xm - xf).abs() <= 1e-5, "coarse {xm} vs fine {xf}");

        assert!(traj.sample_state(p.tau - 0.5).is_err());
        assert!(traj.sample_state(12.5).is_err());
    }

    #[test]
    fn constant_trajectory_interpolates_constant() {
        let p = fig1();
        let (xs, ys) = coexistence_equilibrium(&p).unwrap();
        let hist = HistoryState::constant(p.tau, 16, xs, ys).unwrap();
        let traj = integrate(&p, &hist, 10.0, 16).unwrap();
        let t = traj.time(3) + 0.37 * traj.step();
        let (x, y) = traj.sample_state(t).unwrap();
        assert_relative_eq!(x, xs, max_relative = 1e-9);
        assert_relative_eq!(y, ys, max_relative = 1e-9);
    }

    #[test]
    fn prelude_zero_prey_profile() {
        let p = fig1();
        let profile = AgeProfile::from_fn(4.0 * p.tau, 128, |_| 0.0).unwrap();
        let sol = prelude_full(&p, &profile, 1.0, 256).unwrap();
        assert!(sol.history.phi().iter().all(|v| *v == 0.0));
        assert_relative_eq!(
            sol.history.y_tau(),
            (-p.delta * p.tau).exp(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn prelude_indicator_profile_integrates_to_tau() {
        let p = fig1();
        let a_max = 4.0 * p.tau;
        let m = 4096;
        let profile = AgeProfile::from_fn(a_max, m, |a| {
            if (p.tau..=2.0 * p.tau).contains(&a) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let sol = prelude_full(&p, &profile, 0.0, 64).unwrap();
        let da = a_max / m as f64;
        assert!((sol.history.phi()[0] - p.tau).abs() <= da);
        assert_eq!(sol.history.y_tau(), 0.0);
    }

    #[test]
    fn prelude_equilibrium_profile_yields_equilibrium_history() {
        let p = fig1();
        let (xs, ys) = coexistence_equilibrium(&p).unwrap();
        let x2_0 = p.beta0 * xs;
        let a_max = p.tau + 30.0 / (p.mu0 + p.gamma0 * ys);
        let profile = AgeProfile::from_fn(a_max, 32768, |a| {
            if a <= p.tau {
                x2_0 * (-p.mu0 * a).exp()
            } else {
                x2_0 * (-p.mu0 * a - p.gamma0 * ys * (a - p.tau)).exp()
            }
        })
        .unwrap();
        let sol = prelude_full(&p, &profile, ys, 256).unwrap();
        for v in sol.history.phi() {
            assert!((v - xs).abs() <= 1e-6 * xs, "phi = {v} vs X* = {xs}");
        }
        assert!((sol.history.y_tau() - ys).abs() <= 1e-6 * ys);
    }

    #[test]
    fn prelude_rejects_short_profiles() {
        let p = fig1();
        let too_short = AgeProfile::from_fn(1.5 * p.tau, 64, |_| 1.0).unwrap();
        assert!(prelude_from_pde(&p, &too_short, 1.0, 64).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let p = fig1();
        let hist = HistoryState::constant(p.tau, 16, 2.0, 1.0).unwrap();
        let traj = integrate(&p, &hist, 7.0, 16).unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,X,y,dX,dy");
        assert_eq!(csv.lines().count(), traj.len() + 1);

        let profile_csv = "a,value\n0,1.0\n1,2.0\n2,0.5\n";
        let profile = AgeProfile::from_csv(profile_csv).unwrap();
        assert_eq!(profile.a_max(), 2.0);
        assert_eq!(profile.values(), &[1.0, 2.0, 0.5]);
        assert_relative_eq!(profile.eval(0.5), 1.5);

        let hist_rows: String = std::iter::once("a,value".to_string())
            .chain((0..=8).map(|i| format!("{},{}", i as f64 * 3.0 / 8.0, 1.0 + i as f64)))
            .collect::<Vec<_>>()
            .join("\n");
        let parsed = HistoryState::from_csv(&hist_rows, 0.5).unwrap();
        assert_eq!(parsed.n(), 8);
        assert_eq!(parsed.tau(), 3.0);

        let ragged = "a,value\n0,1\n0.9,2\n2,3\n";
        assert!(AgeProfile::from_csv(ragged).is_err());
    }

    #[test]
    fn integrate_rejects_bad_arguments() {
        let p = fig1();
        let hist = HistoryState::constant(p.tau, 16, 1.0, 1.0).unwrap();
        assert!(integrate(&p, &hist, 2.0, 16).is_err()); // t_end below tau
        assert!(integrate(&p, &hist, 10.0, 4).is_err()); // too few steps
        let wrong_span = HistoryState::constant(2.0, 16, 1.0, 1.0).unwrap();
        assert!(integrate(&p, &wrong_span, 10.0, 16).is_err());
    }

    #[test]
    fn age_profile_integrals_are_exact_for_the_interpolant() {
        let profile = AgeProfile::from_fn(10.0, 100, |a| a).unwrap();
        assert_relative_eq!(profile.integral_range(0.0, 10.0), 50.0, max_relative = 1e-12);
        assert_relative_eq!(profile.integral_range(2.0, 5.0), 10.5, max_relative = 1e-12);
        assert_relative_eq!(profile.integral_range(2.05, 2.15), 0.21, max_relative = 1e-10);
        assert_eq!(profile.integral_range(10.0, 20.0), 0.0);
        assert_eq!(profile.integral_range(5.0, 2.0), 0.0);
    }

    proptest! {
        #![proptest_config(proptest::test_runner::Config::with_cases(48))]

        #[test]
        fn nonnegativity_for_random_histories(
            seed_values in proptest::collection::vec(0.0f64..10.0, 17),
            y in 0.0f64..6.0,
        ) {
            let p = fig1();
            let hist = HistoryState::from_values(p.tau, seed_values, y).unwrap();
            let traj = integrate(&p, &hist, 30.0, 32).unwrap();
            prop_assert!(traj.x().iter().all(|v| *v >= 0.0));
            prop_assert!(traj.y().iter().all(|v| *v >= 0.0));
        }

        #[test]
        fn positive_prey_mass_implies_eventual_positivity(
            bump_at in 0usize..16,
            y in 0.0f64..4.0,
        ) {
            // A history that vanishes except on one node still yields
            // strictly positive prey from 3 tau on.
            let p = fig1();
            let mut values = vec![0.0; 17];
            values[bump_at] = 1.0;
            let hist = HistoryState::from_values(p.tau, values, y).unwrap();
            let traj = integrate(&p, &hist, 16.0, 32).unwrap();
            for i in 0..traj.len() {
                if traj.time(i) >= 3.0 * p.tau {
                    prop_assert!(traj.x()[i] > 0.0, "X = 0 at t = {}", traj.time(i));
                }
            }
        }
    }
}
