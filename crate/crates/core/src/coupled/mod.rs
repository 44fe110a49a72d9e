//! Qubit ⊗ kicked-rotator Floquet evolution and detector observables.

mod fidelity;
mod husimi;

pub use fidelity::{fidelity_amplitude, fidelity_series};
pub use husimi::{
    box_integral, husimi, husimi_reduced, wd_series, ConditionalMode, HusimiGrid, WdRecord, DEFAULT_HUSIMI_GRID,
    MIN_HUSIMI_RESOLUTION,
};

use num_complex::Complex64;

use crate::detector::{free_phases, init_gaussian, kick_phases};
use crate::qstate::{wavenumber, CoupledState, QubitDensity, SimParams, Spectral};
use crate::{Error, Result};

/// Tolerance on `|α|² + |β|² = 1` for the initial qubit.
pub const QUBIT_NORM_TOL: f64 = 1e-10;

/// One-kick unitary of the coupled system with all phases precomputed.
///
/// Each [`FloquetMap::step`] applies, right to left,
/// `e^{-i(K + ε_c σ_z) cos θ/ℏ} e^{-ip²/2ℏ} e^{-iδσ_x}`.
#[derive(Debug, Clone)]
pub struct FloquetMap {
    spectral: Spectral,
    free: Vec<Complex64>,
    kick_up: Vec<Complex64>,
    kick_down: Vec<Complex64>,
    p_squared: Vec<f64>,
    cos_delta: f64,
    sin_delta: f64,
    scratch: Vec<Complex64>,
}

impl FloquetMap {
    pub fn new(params: &SimParams) -> Self {
        let n = params.n_levels();
        let hbar = params.hbar();
        Self {
            spectral: Spectral::new(n),
            free: free_phases(n, hbar),
            kick_up: kick_phases(n, hbar, params.k_up()),
            kick_down: kick_phases(n, hbar, params.k_down()),
            p_squared: (0..n)
                .map(|m| {
                    let p = hbar * wavenumber(m, n) as f64;
                    p * p
                })
                .collect(),
            cos_delta: params.delta().cos(),
            sin_delta: params.delta().sin(),
            scratch: Vec::with_capacity(n),
        }
    }

    pub fn n_levels(&self) -> usize {
        self.free.len()
    }

    /// Advances `state` by one period in place.
    pub fn step(&mut self, state: &mut CoupledState) {
        let (c, s) = (self.cos_delta, self.sin_delta);
        let mis = Complex64::new(0.0, -s);
        if s != 0.0 {
            for (u, d) in state.up.iter_mut().zip(state.down.iter_mut()) {
                let (a, b) = (*u, *d);
                *u = a * c + mis * b;
                *d = mis * a + b * c;
            }
        }
        for (component, kick) in [(&mut state.up, &self.kick_up), (&mut state.down, &self.kick_down)] {
            self.spectral.to_momentum(component);
            component.iter_mut().zip(&self.free).for_each(|(a, ph)| *a *= ph);
            self.spectral.to_angle(component);
            component.iter_mut().zip(kick).for_each(|(a, ph)| *a *= ph);
        }
    }

    /// `⟨p²⟩` traced over the qubit, evaluated in the momentum representation.
    pub fn p2(&mut self, state: &CoupledState) -> f64 {
        let mut total = 0.0;
        for component in [&state.up, &state.down] {
            self.scratch.clear();
            self.scratch.extend_from_slice(component);
            self.spectral.to_momentum(&mut self.scratch);
            total += self
                .scratch
                .iter()
                .zip(&self.p_squared)
                .map(|(a, p2)| a.norm_sqr() * p2)
                .sum::<f64>();
        }
        total
    }
}

/// One period of the coupled evolution.
pub fn coupled_step(state: &CoupledState, params: &SimParams) -> Result<CoupledState> {
    if state.n_levels() != params.n_levels() {
        return Err(Error::LengthMismatch {
            expected: params.n_levels(),
            got: state.n_levels(),
        });
    }
    let mut out = state.clone();
    FloquetMap::new(params).step(&mut out);
    Ok(out)
}

pub fn reduced_density(state: &CoupledState) -> QubitDensity {
    state.reduced_density()
}

/// Per-kick observables of a coupled run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub rho01: Complex64,
    pub rho00: f64,
    pub rho11: f64,
    /// `⟨p²⟩`; NaN when the trajectory has no detector (channel map).
    pub p2: f64,
    pub purity: f64,
}

impl TrajectoryRecord {
    pub fn from_density(t: usize, rho: &QubitDensity, p2: f64) -> Self {
        Self {
            t,
            rho01: rho.rho01,
            rho00: rho.rho00.re,
            rho11: rho.rho11.re,
            p2,
            purity: rho.purity(),
        }
    }
}

/// Records for `t = 0, 1, …, t_max`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn abs_rho01(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.rho01.norm()).collect()
    }

    pub fn rho11(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.rho11).collect()
    }

    pub fn p2(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.p2).collect()
    }
}

pub(crate) fn check_qubit(alpha: Complex64, beta: Complex64) -> Result<()> {
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > QUBIT_NORM_TOL {
        return Err(Error::InvalidParameter {
            name: "qubit_init",
            reason: format!("|alpha|^2 + |beta|^2 = {norm}, expected 1"),
        });
    }
    Ok(())
}

/// Separable initial state `(α|0⟩ + β|1⟩) ⊗ |θ0, p0⟩`.
pub fn initial_state(params: &SimParams, qubit_init: (Complex64, Complex64), detector_init: (f64, f64)) -> Result<CoupledState> {
    let (alpha, beta) = qubit_init;
    check_qubit(alpha, beta)?;
    let packet = init_gaussian(detector_init.0, detector_init.1, params)?;
    CoupledState::product(alpha, beta, &packet)
}

/// Runs `t_max` kicks from a separable state and records every step,
/// including `t = 0`.
pub fn evolve(params: &SimParams, qubit_init: (Complex64, Complex64), detector_init: (f64, f64)) -> Result<Trajectory> {
    let mut state = initial_state(params, qubit_init, detector_init)?;
    let mut map = FloquetMap::new(params);
    let mut records = Vec::with_capacity(params.t_max() + 1);
    for t in 0..=params.t_max() {
        if t > 0 {
            map.step(&mut state);
        }
        let p2 = map.p2(&state);
        records.push(TrajectoryRecord::from_density(t, &state.reduced_density(), p2));
    }
    Ok(Trajectory { records })
}
