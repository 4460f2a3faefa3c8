//! Numerical laboratory for a delayed predator-prey system obtained by
//! reducing an age-structured model with a juvenile class: equilibria and
//! thresholds, a method-of-steps delay integrator with dense output, the
//! delay Lyapunov functional, the planar period function and the
//! delay-length periodic orbit, quasi-polynomial spectra, and an
//! age-structured simulator cross-validating the reduction.

pub mod dde;
pub mod error;
pub mod interp;
pub mod lyapunov;
pub mod model;
pub mod pde;
pub mod planar;
pub mod spectral;

pub use dde::{integrate, prelude_from_pde, AgeProfile, HistoryState, Trajectory};
pub use error::{Error, Result};
pub use lyapunov::{derivative_check, energy_series, evaluate, g, EnergySeries, LyapunovValue};
pub use model::{
    classify, coexistence_equilibrium, equilibria, periodicity_index, thresholds, vector_field,
    Equilibrium, EquilibriumKind, ModelParams, PartitionLabel, Thresholds,
};
pub use pde::{equilibrium_e2, reduce_to_dde, AgeGrid, PdeEquilibrium, PdeState};
pub use planar::{energy, find_periodic_orbit, period, PeriodicOrbit, PlanarParams};
pub use spectral::{
    malthusian_rate, pde_det_b, roots_in_rectangle, QuasiPolynomial, SpectrumReport,
};
