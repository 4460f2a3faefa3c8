//! Cross-module checks: the planar periodic orbit against the delay
//! integrator, and the index-one locus against the spectrum.

use lvdelay::model::{coexistence_equilibrium, periodicity_index, ModelParams};
use lvdelay::planar::find_periodic_orbit;
use lvdelay::spectral::{roots_in_rectangle, QuasiPolynomial};
use lvdelay::{integrate, lyapunov};

fn fig2() -> ModelParams {
    ModelParams::new(0.5, 20.0, 0.5, 3.0, 0.7, 2.0).unwrap()
}

#[test]
fn orbit_fed_back_as_history_tracks_its_delay_shift() {
    let p = fig2();
    let m = 1024;
    let orbit = find_periodic_orbit(&p, m).unwrap().expect("orbit exists");
    let hist = orbit.as_history().unwrap();

    let periods = 5;
    let t_end = p.tau * (periods + 1) as f64;
    let traj = integrate(&p, &hist, t_end, m).unwrap();

    let mut worst = 0.0f64;
    for k in 0..traj.len() {
        let j = k % m;
        let dx = traj.x()[k] - orbit.p()[j];
        let dy = traj.y()[k] - orbit.q()[j];
        worst = worst.max(dx.hypot(dy));
    }
    assert!(
        worst <= 1e-5,
        "delay solution drifts {worst} from the periodic orbit over {periods} periods"
    );
}

#[test]
fn orbit_energy_is_constant_along_the_delay_solution() {
    let p = fig2();
    let m = 1024;
    let orbit = find_periodic_orbit(&p, m).unwrap().expect("orbit exists");
    let traj = integrate(&p, &orbit.as_history().unwrap(), 10.0 * p.tau, m).unwrap();
    let series = lyapunov::energy_series(&p, &traj).unwrap();
    for (t, f) in series.points() {
        assert!(
            (f - orbit.energy()).abs() <= 1e-6 * (1.0 + orbit.energy()),
            "t = {t}: F = {f} vs orbit energy {}",
            orbit.energy()
        );
    }
}

#[test]
fn level_set_bound_caps_prey_excursions() {
    let p = fig2();
    let (x_star, _) = coexistence_equilibrium(&p).unwrap();
    let hist = lvdelay::HistoryState::constant(p.tau, 256, 1.5 * x_star, 2.0).unwrap();
    let initial_level = lyapunov::evaluate(&p, &hist).unwrap().total;
    let traj = integrate(&p, &hist, 60.0, 256).unwrap();
    let series = lyapunov::energy_series(&p, &traj).unwrap();

    // F never exceeds its initial value.
    let f_start = series.f[0];
    assert!(f_start <= initial_level * (1.0 + 1e-6));
    for &f in &series.f {
        assert!(f <= f_start * (1.0 + 1e-8));
    }

    // Along the trajectory g(X/X*) stays within the level-set bound.
    let bound = f_start / (p.alpha * x_star) + 1e-12;
    let n = traj.steps_per_delay();
    for k in n..traj.len() {
        let gx = lyapunov::g(traj.x()[k] / x_star).unwrap();
        assert!(
            gx <= bound,
            "g(X/X*) = {gx} exceeds level-set bound {bound} at t = {}",
            traj.time(k)
        );
    }
}

#[test]
fn index_one_locus_is_where_the_spectrum_touches_the_axis() {
    // On the constructed locus the index is one and the spectrum carries a
    // purely imaginary pair; off it (both scenario parameter sets) every
    // reported root sits strictly off the axis.
    let (mu0, gamma0, tau, delta) = (0.5, 0.5, 3.0, 2.0);
    let y_star = (2.0 * std::f64::consts::PI / tau).powi(2) / (delta * gamma0);
    let beta0 = (mu0 + gamma0 * y_star) * (mu0 * tau).exp();
    let critical = ModelParams::new(mu0, beta0, gamma0, tau, 0.7, delta).unwrap();
    assert!((periodicity_index(&critical).unwrap() - 1.0).abs() <= 1e-10);
    let qp = QuasiPolynomial::from_model(&critical).unwrap();
    let report = roots_in_rectangle(&qp, (-0.01, 1.0), (-10.0, 10.0), 16).unwrap();
    assert!(report.roots.iter().any(|r| r.re.abs() <= 1e-8));

    for p in [ModelParams::new(0.5, 10.0, 0.5, 3.0, 0.7, 2.0).unwrap(), fig2()] {
        let idx = periodicity_index(&p).unwrap();
        assert!((idx - idx.round()).abs() > 1e-10);
        let qp = QuasiPolynomial::from_model(&p).unwrap();
        let report = roots_in_rectangle(&qp, (-0.01, 1.0), (-10.0, 10.0), 16).unwrap();
        for r in &report.roots {
            assert!(
                r.re.abs() > 1e-10,
                "axis root ({}, {}) despite non-integer index {idx}",
                r.re,
                r.im
            );
        }
    }
}
