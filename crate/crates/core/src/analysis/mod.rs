//! Rate extraction from trajectories and parameter sweeps.

mod fit;
mod sweep;

pub use fit::{
    estimate_frequency, fit_damped_sine, fit_exp_decay, residual_level, DecayFit, FitError, MAX_ITERATIONS,
    MIN_EXP_LEN, MIN_SINE_LEN,
};
pub use sweep::{slope_through_origin, sweep, SweepParam, SweepRow, SweepSpec};
