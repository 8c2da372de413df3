//! Surface integrals of oscillating densities, epsilon sweeps, homogenized
//! bounds and the sandwich verdict.

pub mod bounds;
pub mod integrator;
pub mod sweep;

pub use bounds::{
    covering_diagnostic, homogenized_bounds, sandwich_check, CoveringOptions, CubeReport, HomogenizedBounds,
    HomogenizedData, PartBounds, SandwichVerdict,
};
pub use integrator::{integrate_curve, IntegralEstimate, OscillatoryQuadrature, Sample};
pub use sweep::{
    epsilon_sweep, phase_targeted_epsilon, realized_phase, surface_integral, Band, EpsilonSweep, PhaseLimit, Schedule,
    ScheduledScale,
};
