//! Age-structured simulation of the full transport model under the
//! juvenile-class rates, by exact exponential integration along
//! characteristics with `dt = da`, plus the distributed equilibrium and the
//! reduction handing off to the delay engine.

use crate::dde::{HistoryState, NEGATIVE_TOL};
use crate::error::{Error, Result};
use crate::model::{coexistence_equilibrium, thresholds, ModelParams};

/// Uniform age grid with `da = tau / steps_per_delay`, the maturation age on
/// a node, and truncation age `a_max = n_age * da >= 2 tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeGrid {
    da: f64,
    i_tau: usize,
    n_age: usize,
}

impl AgeGrid {
    /// Builds the grid; `a_max` defaults to `tau + 30 / (mu0 + gamma0 y*)`
    /// (so the equilibrium tail beyond it is below `e^{-30}` of its value at
    /// `tau`), rounded up to a grid multiple and floored at `2 tau`.
    pub fn new(params: &ModelParams, steps_per_delay: usize, a_max: Option<f64>) -> Result<Self> {
        params.validate()?;
        if steps_per_delay < 8 {
            return Err(Error::InvalidParameter(format!(
                "steps_per_delay must be at least 8, got {steps_per_delay}"
            )));
        }
        let da = params.tau / steps_per_delay as f64;
        let decay = if thresholds(params).r0 > 1.0 {
            params.delayed_birth_rate()
        } else {
            params.mu0
        };
        let target = match a_max {
            Some(v) => {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "truncation age must be positive, got {v}"
                    )));
                }
                v
            }
            None => params.tau + 30.0 / decay,
        };
        let n_age = ((target / da) - 1e-9).ceil() as usize;
        let n_age = n_age.max(2 * steps_per_delay);
        Ok(Self {
            da,
            i_tau: steps_per_delay,
            n_age,
        })
    }

    pub fn da(&self) -> f64 {
        self.da
    }

    /// Index of the maturation age.
    pub fn i_tau(&self) -> usize {
        self.i_tau
    }

    pub fn n_age(&self) -> usize {
        self.n_age
    }

    pub fn a_max(&self) -> f64 {
        self.n_age as f64 * self.da
    }

    pub fn age(&self, i: usize) -> f64 {
        i as f64 * self.da
    }
}

/// The renewal front: initial data generically violate the compatibility
/// condition `x0(0) = beta0 X(0)`, so a jump discontinuity rides the
/// characteristic `a = t`. With `dt = da` it sits exactly on a node; the node
/// stores the initial-data side and `left` carries the newborn-side limit, so
/// quadrature can read the correct one-sided value in the cell behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Front {
    index: usize,
    left: f64,
}

/// Prey age-density samples and the predator level at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeState {
    grid: AgeGrid,
    t: f64,
    x: Vec<f64>,
    y: f64,
    front: Option<Front>,
}

impl PdeState {
    /// Samples an initial density `f(a)` on the grid at `t = 0`.
    pub fn from_fn(
        params: &ModelParams,
        grid: AgeGrid,
        f: impl Fn(f64) -> f64,
        y0: f64,
    ) -> Result<Self> {
        let x: Vec<f64> = (0..=grid.n_age()).map(|i| f(grid.age(i))).collect();
        Self::from_samples(params, grid, x, y0)
    }

    /// Resamples an [`crate::dde::AgeProfile`] onto the grid at `t = 0`
    /// (zero beyond the profile's own truncation).
    pub fn from_profile(
        params: &ModelParams,
        grid: AgeGrid,
        profile: &crate::dde::AgeProfile,
        y0: f64,
    ) -> Result<Self> {
        Self::from_fn(params, grid, |a| profile.eval(a), y0)
    }

    pub fn from_samples(params: &ModelParams, grid: AgeGrid, x: Vec<f64>, y0: f64) -> Result<Self> {
        if x.len() != grid.n_age() + 1 {
            return Err(Error::InvalidState(format!(
                "expected {} samples, got {}",
                grid.n_age() + 1,
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidState(
                "density samples must be finite and nonnegative".into(),
            ));
        }
        if !y0.is_finite() || y0 < 0.0 {
            return Err(Error::InvalidState(format!(
                "predator level must be finite and nonnegative, got {y0}"
            )));
        }
        let mut state = Self {
            grid,
            t: 0.0,
            x,
            y: y0,
            front: None,
        };
        // Newborn-side limit at age zero, from the renewal condition.
        let left = params.beta0 * state.integral_from(grid.i_tau());
        state.front = Some(Front { index: 0, left });
        Ok(state)
    }

    pub fn grid(&self) -> &AgeGrid {
        &self.grid
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// Composite trapezoid of the density over `[start * da, a_max]`, with the
    /// front cell corrected to the newborn-side limit when the front lies
    /// strictly inside the range.
    fn integral_from(&self, start: usize) -> f64 {
        let slice = &self.x[start..];
        if slice.len() < 2 {
            return 0.0;
        }
        let interior: f64 = slice[1..slice.len() - 1].iter().sum();
        let mut total = self.grid.da * (0.5 * (slice[0] + slice[slice.len() - 1]) + interior);
        if let Some(front) = self.front {
            if front.index > start && front.index <= self.grid.n_age() {
                total += 0.5 * self.grid.da * (front.left - self.x[front.index]);
            }
        }
        total
    }

    /// Adult prey mass, the integral of the density over ages at or above
    /// maturation.
    pub fn adult_mass(&self) -> f64 {
        self.integral_from(self.grid.i_tau())
    }

    /// Juvenile prey mass, the integral below maturation age.
    pub fn juvenile_mass(&self) -> f64 {
        let i_tau = self.grid.i_tau();
        let interior: f64 = self.x[1..i_tau].iter().sum();
        let mut total = self.grid.da * (0.5 * (self.x[0] + self.x[i_tau]) + interior);
        if let Some(front) = self.front {
            if front.index > 0 && front.index <= i_tau {
                total += 0.5 * self.grid.da * (front.left - self.x[front.index]);
            }
        }
        total
    }

    /// CSV rendering of the profile with header `a,x`, LF endings.
    pub fn profile_csv(&self) -> String {
        let mut out = String::with_capacity(self.x.len() * 32 + 8);
        out.push_str("a,x\n");
        for (i, v) in self.x.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.grid.age(i), v));
        }
        out
    }
}

/// Advances one step `dt = da`: transport with exactly integrated exponential
/// decay (predator frozen at a half-step estimate), then the renewal boundary
/// from the transported profile, then a second-order Heun predator update.
pub fn step(params: &ModelParams, state: &PdeState) -> Result<PdeState> {
    let grid = state.grid;
    let da = grid.da();
    let i_tau = grid.i_tau();
    let n = grid.n_age();

    let intake_now = params.gamma0 * state.adult_mass();
    let y_half = state.y + 0.5 * da * state.y * (params.alpha * intake_now - params.delta);

    let mut x_new = vec![0.0; n + 1];
    let plain = (-params.mu0 * da).exp();
    let hunted = (-(params.mu0 + params.gamma0 * y_half) * da).exp();
    let factor_from = |departure: usize| if departure >= i_tau { hunted } else { plain };
    for i in (1..=n).rev() {
        // Predation acts on the characteristic segment iff its departure age
        // is at or above maturation (tau sits on a node, so segments never
        // straddle it).
        x_new[i] = state.x[i - 1] * factor_from(i - 1);
    }
    // The front (and its newborn-side limit) rides the same characteristic.
    let front_new = state.front.and_then(|f| {
        (f.index + 1 <= n).then(|| Front {
            index: f.index + 1,
            left: f.left * factor_from(f.index),
        })
    });

    let mut transported = PdeState {
        grid,
        t: state.t + da,
        x: x_new,
        y: state.y,
        front: front_new,
    };
    let boundary_mass = transported.integral_from(i_tau);
    transported.x[0] = params.beta0 * boundary_mass;

    let intake_next = params.gamma0 * boundary_mass;
    let k1 = state.y * (params.alpha * intake_now - params.delta);
    let k2 = (state.y + da * k1) * (params.alpha * intake_next - params.delta);
    let mut y_new = state.y + 0.5 * da * (k1 + k2);

    let t_new = transported.t;
    for v in transported
        .x
        .iter_mut()
        .chain(std::iter::once(&mut y_new))
    {
        if !v.is_finite() {
            return Err(Error::Integration(format!(
                "density became non-finite at t = {t_new}"
            )));
        }
        if *v < 0.0 {
            if *v < -NEGATIVE_TOL {
                return Err(Error::Integration(format!(
                    "density undershot to {v} at t = {t_new}"
                )));
            }
            *v = 0.0;
        }
    }
    transported.y = y_new;
    Ok(transported)
}

/// Scalar series collected along a simulation: time, adult mass, juvenile
/// mass and predator level at every step.
#[derive(Debug, Clone, Default)]
pub struct ScalarSeries {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

impl ScalarSeries {
    fn push(&mut self, state: &PdeState) {
        self.t.push(state.t());
        self.x.push(state.adult_mass());
        self.z.push(state.juvenile_mass());
        self.y.push(state.y());
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// CSV rendering with header `t,X,Z,y`, LF endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 48 + 8);
        out.push_str("t,X,Z,y\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.t[i], self.x[i], self.z[i], self.y[i]
            ));
        }
        out
    }
}

/// Result of a multi-step simulation.
#[derive(Debug, Clone)]
pub struct PdeRun {
    pub series: ScalarSeries,
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub final_state: PdeState,
}

/// Marches `n_steps` steps, collecting the scalar series at every node and a
/// profile snapshot every `snapshot_stride` steps (0 disables snapshots).
pub fn simulate(
    params: &ModelParams,
    initial: PdeState,
    n_steps: usize,
    snapshot_stride: usize,
) -> Result<PdeRun> {
    let mut series = ScalarSeries::default();
    let mut snapshots = Vec::new();
    let mut state = initial;
    series.push(&state);
    if snapshot_stride > 0 {
        snapshots.push((state.t(), state.x().to_vec()));
    }
    for k in 1..=n_steps {
        state = step(params, &state)?;
        series.push(&state);
        if snapshot_stride > 0 && k % snapshot_stride == 0 {
            snapshots.push((state.t(), state.x().to_vec()));
        }
    }
    Ok(PdeRun {
        series,
        snapshots,
        final_state: state,
    })
}

/// The distributed coexistence equilibrium on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeEquilibrium {
    grid: AgeGrid,
    profile: Vec<f64>,
    /// Predator level; equals the delayed-system `y*`.
    pub y2: f64,
    /// Renewal boundary value `beta0 X*`.
    pub x2_at_zero: f64,
}

impl PdeEquilibrium {
    pub fn grid(&self) -> &AgeGrid {
        &self.grid
    }

    pub fn profile(&self) -> &[f64] {
        &self.profile
    }

    /// The equilibrium as a simulation state at `t = 0`.
    pub fn as_state(&self, params: &ModelParams) -> Result<PdeState> {
        PdeState::from_samples(params, self.grid, self.profile.clone(), self.y2)
    }

    /// Trapezoid value of `alpha gamma0 int_tau^amax x2`, which equals
    /// `delta` up to quadrature and truncation error.
    pub fn predation_balance(&self, params: &ModelParams) -> f64 {
        let state = PdeState {
            grid: self.grid,
            t: 0.0,
            x: self.profile.clone(),
            y: self.y2,
            front: None,
        };
        params.alpha * params.gamma0 * state.adult_mass()
    }
}

/// Closed-form equilibrium profile: exponential survival below maturation,
/// survival plus predation above. Requires `R0 > 1`.
pub fn equilibrium_e2(params: &ModelParams, grid: AgeGrid) -> Result<PdeEquilibrium> {
    let (x_star, y_star) = coexistence_equilibrium(params)?;
    let x2_0 = params.beta0 * x_star;
    let tau = params.tau;
    let profile: Vec<f64> = (0..=grid.n_age())
        .map(|i| {
            let a = grid.age(i);
            if a <= tau {
                x2_0 * (-params.mu0 * a).exp()
            } else {
                x2_0 * (-params.mu0 * a - params.gamma0 * y_star * (a - tau)).exp()
            }
        })
        .collect();
    Ok(PdeEquilibrium {
        grid,
        profile,
        y2: y_star,
        x2_at_zero: x2_0,
    })
}

/// Reduces a simulated span `[0, tau]` to a delay history: the adult mass at
/// each stored step becomes `phi`, with derivatives from the flux balance
/// `phi' = x(t, tau) - mu0 phi - gamma0 y phi`, and `y(tau)` closes the pair.
pub fn reduce_to_dde(params: &ModelParams, states: &[PdeState]) -> Result<HistoryState> {
    if states.is_empty() {
        return Err(Error::InvalidState("no simulated states".into()));
    }
    let grid = states[0].grid;
    let need = grid.i_tau() + 1;
    if states.len() < need {
        return Err(Error::InvalidState(format!(
            "need {need} states to span [0, tau], got {}",
            states.len()
        )));
    }
    let mut phi = Vec::with_capacity(need);
    let mut dphi = Vec::with_capacity(need);
    for (k, state) in states.iter().take(need).enumerate() {
        if (state.t() - k as f64 * grid.da()).abs() > 1e-9 * params.tau {
            return Err(Error::InvalidState(format!(
                "state {k} at t = {} does not sit on the step grid",
                state.t()
            )));
        }
        let mass = state.adult_mass();
        phi.push(mass);
        dphi.push(
            state.x()[grid.i_tau()] - params.mu0 * mass - params.gamma0 * state.y() * mass,
        );
    }
    HistoryState::new(params.tau, phi, dphi, states[need - 1].y())
}

/// Simulates over `[0, tau]` and returns the reduced history together with
/// the state at `tau`, ready for further PDE marching.
pub fn pde_history(params: &ModelParams, initial: PdeState) -> Result<(HistoryState, PdeState)> {
    let n = initial.grid.i_tau();
    let mut states = Vec::with_capacity(n + 1);
    states.push(initial);
    for _ in 0..n {
        let next = step(params, states.last().unwrap())?;
        states.push(next);
    }
    let history = reduce_to_dde(params, &states)?;
    let last = states.pop().unwrap();
    Ok((history, last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use approx::assert_relative_eq;

    fn fig1() -> ModelParams {
        ModelParams::new(0.5, 10.0, 0.5, 3.0, 0.7, 2.0).unwrap()
    }

    #[test]
    fn grid_defaults_and_invariants() {
        let p = fig1();
        let grid = AgeGrid::new(&p, 512, None).unwrap();
        assert_eq!(grid.i_tau(), 512);
        assert_relative_eq!(grid.age(grid.i_tau()), p.tau, max_relative = 1e-14);
        assert!(grid.a_max() >= 2.0 * p.tau);
        // Default truncation keeps the equilibrium tail below 1e-8 of total.
        let rate = p.delayed_birth_rate();
        assert!(grid.a_max() >= p.tau + 30.0 / rate - grid.da());
        let e2 = equilibrium_e2(&p, grid).unwrap();
        let tail = e2.profile()[grid.n_age()] / rate;
        let total: f64 = e2.as_state(&p).unwrap().adult_mass();
        assert!(tail / total <= 1e-8, "tail fraction {}", tail / total);

        assert!(AgeGrid::new(&p, 4, None).is_err());
        let floored = AgeGrid::new(&p, 16, Some(p.tau)).unwrap();
        assert!(floored.a_max() >= 2.0 * p.tau);
    }

    #[test]
    fn equilibrium_values() {
        let p = fig1();
        let grid = AgeGrid::new(&p, 512, None).unwrap();
        let e2 = equilibrium_e2(&p, grid).unwrap();
        assert_relative_eq!(e2.x2_at_zero, 57.14285714285714, max_relative = 1e-12);
        assert_relative_eq!(e2.y2, 3.4626032029685964, max_relative = 1e-13);
        assert_relative_eq!(e2.profile()[0], e2.x2_at_zero, max_relative = 1e-14);
        // alpha gamma0 int x2 = delta up to quadrature error.
        assert_relative_eq!(e2.predation_balance(&p), p.delta, max_relative = 1e-4);
    }

    #[test]
    fn equilibrium_is_a_fixed_point_of_the_scheme() {
        let p = fig1();
        let grid = AgeGrid::new(&p, 4096, None).unwrap();
        let e2 = equilibrium_e2(&p, grid).unwrap();
        let state0 = e2.as_state(&p).unwrap();
        let n_steps = (1.0 / grid.da()).ceil() as usize;
        let run = simulate(&p, state0, n_steps, 0).unwrap();
        let state1 = &run.final_state;
        let mut sup = 0.0f64;
        for (a, b) in state1.x().iter().zip(e2.profile()) {
            sup = sup.max((a - b).abs());
        }
        assert!(
            sup <= 1e-6 * e2.x2_at_zero,
            "profile drift {} over one unit time",
            sup / e2.x2_at_zero
        );
        assert!(
            (state1.y() - e2.y2).abs() <= 1e-6 * e2.y2,
            "predator drift {}",
            (state1.y() - e2.y2).abs() / e2.y2
        );
    }

    #[test]
    fn zero_prey_decays_predators() {
        let p = fig1();
        let grid = AgeGrid::new(&p, 256, None).unwrap();
        let state = PdeState::from_fn(&p, grid, |_| 0.0, 1.0).unwrap();
        let n_steps = (3.0 / grid.da()).round() as usize;
        let run = simulate(&p, state, n_steps, 0).unwrap();
        assert!(run.final_state.x().iter().all(|v| *v == 0.0));
        let t = run.final_state.t();
        assert_relative_eq!(run.final_state.y(), (-p.delta * t).exp(), max_relative = 1e-3);
    }

    #[test]
    fn scheme_converges_at_second_order_against_the_equilibrium() {
        let p = fig1();
        let sup_err = |spd: usize| {
            let grid = AgeGrid::new(&p, spd, Some(20.0)).unwrap();
            let e2 = equilibrium_e2(&p, grid).unwrap();
            let n_steps = (2.0 / grid.da()).ceil() as usize;
            let run = simulate(&p, e2.as_state(&p).unwrap(), n_steps, 0).unwrap();
            run.final_state
                .x()
                .iter()
                .zip(e2.profile())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        };
        let coarse = sup_err(256);
        let fine = sup_err(512);
        assert!(
            coarse / fine >= 3.5,
            "refinement ratio {} ({} -> {})",
            coarse / fine,
            coarse,
            fine
        );
    }

    #[test]
    fn reduction_of_the_equilibrium_state_is_the_equilibrium_history() {
        let p = fig1();
        let grid = AgeGrid::new(&p, 256, None).unwrap();
        let e2 = equilibrium_e2(&p, grid).unwrap();
        let (hist, at_tau) = pde_history(&p, e2.as_state(&p).unwrap()).unwrap();
        let (x_star, y_star) = crate::model::coexistence_equilibrium(&p).unwrap();
        for v in hist.phi() {
            assert!((v - x_star).abs() <= 2e-4 * x_star, "phi = {v} vs {x_star}");
        }
        assert!((hist.y_tau() - y_star).abs() <= 2e-4 * y_star);
        assert_relative_eq!(at_tau.t(), p.tau, max_relative = 1e-12);
    }

    #[test]
    fn reduction_of_zero_is_zero() {
        let p = fig1();
        let grid = AgeGrid::new(&p, 64, None).unwrap();
        let state = PdeState::from_fn(&p, grid, |_| 0.0, 0.5).unwrap();
        let (hist, _) = pde_history(&p, state).unwrap();
        assert!(hist.phi().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn reduce_requires_a_full_span() {
        let p = fig1();
        let grid = AgeGrid::new(&p, 64, None).unwrap();
        let state = PdeState::from_fn(&p, grid, |_| 1.0, 0.5).unwrap();
        let short = vec![state.clone(), step(&p, &state).unwrap()];
        assert!(reduce_to_dde(&p, &short).is_err());
    }

    #[test]
    fn csv_shapes() {
        let p = fig1();
        let grid = AgeGrid::new(&p, 16, None).unwrap();
        let state = PdeState::from_fn(&p, grid, |a| (-a).exp(), 1.0).unwrap();
        assert!(state.profile_csv().starts_with("a,x\n"));
        let run = simulate(&p, state, 8, 4).unwrap();
        let csv = run.series.to_csv();
        assert!(csv.starts_with("t,X,Z,y\n"));
        assert_eq!(csv.lines().count(), 10);
        assert_eq!(run.snapshots.len(), 3);
    }
}
