//! Core value types: model parameters, rotator and coupled state vectors, the
//! qubit density matrix and its Bloch-sphere coordinates.
//!
//! The detector lives on the torus `0 <= θ < 2π`, `-π <= p < π` discretised
//! with `N_d = 2π/ℏ` points. Angle samples sit at `θ_j = 2πj/N_d`; momentum
//! components carry integer wavenumbers `k ∈ [-N_d/2, N_d/2)` with `p = ℏk`.
//! Momentum vectors are stored in transform order, see [`wavenumber`].

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

/// Relative tolerance on `n_levels * hbar == 2π`.
pub const PLANCK_REL_TOL: f64 = 1e-12;

/// Largest detector dimension accepted by [`dense_oracle_step`].
pub const DENSE_ORACLE_MAX_LEVELS: usize = 64;

/// Full parameter set of the qubit + kicked-rotator model.
///
/// Construction validates that `n_levels` is a power of two and that
/// `n_levels * hbar = 2π`; the fields are read through accessors so the
/// invariant cannot be broken afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    kick: f64,
    epsilon_c: f64,
    delta: f64,
    hbar: f64,
    n_levels: usize,
    t_max: usize,
}

impl SimParams {
    /// Parameters with `hbar` derived from the detector dimension.
    pub fn new(kick: f64, epsilon_c: f64, delta: f64, n_levels: usize, t_max: usize) -> Result<Self> {
        check_levels(n_levels)?;
        let params = Self {
            kick,
            epsilon_c,
            delta,
            hbar: TAU / n_levels as f64,
            n_levels,
            t_max,
        };
        params.check_finite()?;
        Ok(params)
    }

    /// Like [`SimParams::new`], with the coupling given in units of ℏ
    /// (`epsilon = epsilon_c / hbar`).
    pub fn from_epsilon(kick: f64, epsilon: f64, delta: f64, n_levels: usize, t_max: usize) -> Result<Self> {
        check_levels(n_levels)?;
        let hbar = TAU / n_levels as f64;
        Self::new(kick, epsilon * hbar, delta, n_levels, t_max)
    }

    /// Fully explicit constructor; `hbar` must agree with `2π / n_levels`.
    pub fn with_hbar(
        kick: f64,
        epsilon_c: f64,
        delta: f64,
        hbar: f64,
        n_levels: usize,
        t_max: usize,
    ) -> Result<Self> {
        check_levels(n_levels)?;
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidParameter {
                name: "hbar",
                reason: format!("must be positive and finite, got {hbar}"),
            });
        }
        let product = hbar * n_levels as f64;
        let rel_err = (product - TAU).abs() / TAU;
        if rel_err > PLANCK_REL_TOL {
            return Err(Error::PlanckMismatch { product, rel_err });
        }
        let params = Self {
            kick,
            epsilon_c,
            delta,
            hbar,
            n_levels,
            t_max,
        };
        params.check_finite()?;
        Ok(params)
    }

    fn check_finite(&self) -> Result<()> {
        for (name, value) in [("K", self.kick), ("epsilon_c", self.epsilon_c), ("delta", self.delta)] {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite, got {value}"),
                });
            }
        }
        Ok(())
    }

    /// Classical kick strength K.
    pub fn kick(&self) -> f64 {
        self.kick
    }

    /// Qubit-detector coupling ε_c.
    pub fn epsilon_c(&self) -> f64 {
        self.epsilon_c
    }

    /// Coupling in units of ℏ, ε = ε_c / ℏ.
    pub fn epsilon(&self) -> f64 {
        self.epsilon_c / self.hbar
    }

    /// Half Rabi frequency δ (ω_R = 2δ).
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    /// Kick strength seen by the rotator when the qubit is up (`+`) or down (`-`).
    pub fn k_up(&self) -> f64 {
        self.kick + self.epsilon_c
    }

    pub fn k_down(&self) -> f64 {
        self.kick - self.epsilon_c
    }

    pub fn with_kick(mut self, kick: f64) -> Result<Self> {
        self.kick = kick;
        self.check_finite().map(|_| self)
    }

    pub fn with_epsilon_c(mut self, epsilon_c: f64) -> Result<Self> {
        self.epsilon_c = epsilon_c;
        self.check_finite().map(|_| self)
    }

    pub fn with_epsilon(self, epsilon: f64) -> Result<Self> {
        let hbar = self.hbar;
        self.with_epsilon_c(epsilon * hbar)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = delta;
        self.check_finite().map(|_| self)
    }

    pub fn with_t_max(mut self, t_max: usize) -> Self {
        self.t_max = t_max;
        self
    }

    /// Changes the detector dimension, keeping ε = ε_c/ℏ fixed.
    pub fn with_n_levels(self, n_levels: usize) -> Result<Self> {
        Self::from_epsilon(self.kick, self.epsilon(), self.delta, n_levels, self.t_max)
    }
}

fn check_levels(n_levels: usize) -> Result<()> {
    if n_levels < 2 || !n_levels.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n_levels));
    }
    Ok(())
}

/// Signed wavenumber of transform index `index` on an `n`-point grid.
///
/// Indices `0..n/2` map to `0..n/2`, the upper half to `-n/2..0`.
#[inline]
pub fn wavenumber(index: usize, n: usize) -> i64 {
    if index < n / 2 {
        index as i64
    } else {
        index as i64 - n as i64
    }
}

/// Angle of grid point `j` on an `n`-point grid.
#[inline]
pub fn angle(j: usize, n: usize) -> f64 {
    TAU * j as f64 / n as f64
}

/// Whether `(theta, p)` lies on the torus `[0, 2π) × [-π, π)`.
pub fn on_torus(theta: f64, p: f64) -> bool {
    (0.0..TAU).contains(&theta) && (-PI..PI).contains(&p)
}

/// Representation a [`DetectorState`] is currently stored in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Angle,
    Momentum,
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Representation::Angle => f.write_str("angle"),
            Representation::Momentum => f.write_str("momentum"),
        }
    }
}

/// Unitary discrete Fourier pair between the angle and momentum grids.
///
/// Forward: `φ_k = N^{-1/2} Σ_j ψ_j e^{-i k θ_j}`. Both directions carry the
/// `N^{-1/2}` factor so norms are preserved exactly up to roundoff.
#[derive(Clone)]
pub struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    scale: f64,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("len", &self.forward.len()).finish()
    }
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            scale: (n as f64).sqrt().recip(),
        }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Angle → momentum, in place.
    pub fn to_momentum(&mut self, buf: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, &mut self.scratch);
        let s = self.scale;
        buf.iter_mut().for_each(|c| *c *= s);
    }

    /// Momentum → angle, in place.
    pub fn to_angle(&mut self, buf: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        let s = self.scale;
        buf.iter_mut().for_each(|c| *c *= s);
    }
}

/// Rotator wavefunction on the `N_d`-point grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorState {
    amplitudes: Vec<Complex64>,
    representation: Representation,
}

impl DetectorState {
    pub fn from_angle(amplitudes: Vec<Complex64>) -> Self {
        Self {
            amplitudes,
            representation: Representation::Angle,
        }
    }

    pub fn from_momentum(amplitudes: Vec<Complex64>) -> Self {
        Self {
            amplitudes,
            representation: Representation::Momentum,
        }
    }

    /// Momentum eigenstate `e^{ikθ}/√N` in the angle representation.
    pub fn plane_wave(k: i64, n: usize) -> Self {
        let norm = (n as f64).sqrt().recip();
        let amplitudes = (0..n)
            .map(|j| Complex64::from_polar(norm, k as f64 * angle(j, n)))
            .collect();
        Self::from_angle(amplitudes)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Rescales to unit norm; a zero vector is left untouched.
    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            let inv = n.recip();
            self.amplitudes.iter_mut().for_each(|c| *c *= inv);
        }
    }

    /// `⟨self|other⟩`, both states taken in the same representation.
    pub fn inner(&self, other: &DetectorState) -> Result<Complex64> {
        if self.representation != other.representation {
            return Err(Error::WrongRepresentation {
                expected: match self.representation {
                    Representation::Angle => "angle",
                    Representation::Momentum => "momentum",
                },
            });
        }
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(inner(&self.amplitudes, &other.amplitudes))
    }

    pub fn to_momentum(&self, spectral: &mut Spectral) -> DetectorState {
        match self.representation {
            Representation::Momentum => self.clone(),
            Representation::Angle => {
                let mut amps = self.amplitudes.clone();
                spectral.to_momentum(&mut amps);
                DetectorState::from_momentum(amps)
            }
        }
    }

    pub fn to_angle(&self, spectral: &mut Spectral) -> DetectorState {
        match self.representation {
            Representation::Angle => self.clone(),
            Representation::Momentum => {
                let mut amps = self.amplitudes.clone();
                spectral.to_angle(&mut amps);
                DetectorState::from_angle(amps)
            }
        }
    }
}

/// `Σ conj(a_i) b_i`.
pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Qubit ⊗ rotator state, both spin components in the angle representation.
///
/// `up` holds `c_{0,n}` (σ_z = +1, kick `K + ε_c`), `down` holds `c_{1,n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub up: Vec<Complex64>,
    pub down: Vec<Complex64>,
}

impl CoupledState {
    pub fn new(up: Vec<Complex64>, down: Vec<Complex64>) -> Result<Self> {
        if up.len() != down.len() {
            return Err(Error::LengthMismatch {
                expected: up.len(),
                got: down.len(),
            });
        }
        Ok(Self { up, down })
    }

    /// Separable state `(α|0⟩ + β|1⟩) ⊗ |φ⟩`.
    pub fn product(alpha: Complex64, beta: Complex64, detector: &DetectorState) -> Result<Self> {
        if detector.representation() != Representation::Angle {
            return Err(Error::WrongRepresentation { expected: "angle" });
        }
        let amps = detector.amplitudes();
        Ok(Self {
            up: amps.iter().map(|&c| alpha * c).collect(),
            down: amps.iter().map(|&c| beta * c).collect(),
        })
    }

    pub fn n_levels(&self) -> usize {
        self.up.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.up
            .iter()
            .chain(&self.down)
            .map(|c| c.norm_sqr())
            .sum()
    }

    /// Reduced qubit density matrix `ρ_ij = Σ_n c_{i,n} conj(c_{j,n})`.
    pub fn reduced_density(&self) -> QubitDensity {
        let rho00: f64 = self.up.iter().map(|c| c.norm_sqr()).sum();
        let rho11: f64 = self.down.iter().map(|c| c.norm_sqr()).sum();
        let rho01 = inner(&self.down, &self.up);
        QubitDensity {
            rho00: Complex64::new(rho00, 0.0),
            rho01,
            rho10: rho01.conj(),
            rho11: Complex64::new(rho11, 0.0),
        }
    }

    /// Interleaved `[up..., down...]` view used by the dense oracle.
    pub fn to_flat(&self) -> Vec<Complex64> {
        self.up.iter().chain(&self.down).copied().collect()
    }

    pub fn from_flat(flat: &[Complex64]) -> Result<Self> {
        if !flat.len().is_multiple_of(2) {
            return Err(Error::LengthMismatch {
                expected: flat.len() + 1,
                got: flat.len(),
            });
        }
        let (up, down) = flat.split_at(flat.len() / 2);
        Self::new(up.to_vec(), down.to_vec())
    }
}

/// Qubit density matrix in the σ_z basis (`|0⟩` = σ_z eigenvalue +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitDensity {
    pub rho00: Complex64,
    pub rho01: Complex64,
    pub rho10: Complex64,
    pub rho11: Complex64,
}

impl QubitDensity {
    /// Pure state `|ψ⟩ = α|0⟩ + β|1⟩`.
    pub fn pure(alpha: Complex64, beta: Complex64) -> Self {
        let rho01 = alpha * beta.conj();
        Self {
            rho00: Complex64::new(alpha.norm_sqr(), 0.0),
            rho01,
            rho10: rho01.conj(),
            rho11: Complex64::new(beta.norm_sqr(), 0.0),
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.rho00 + self.rho11
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        (self.rho00 * self.rho00 + self.rho01 * self.rho10 + self.rho10 * self.rho01 + self.rho11 * self.rho11).re
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (self.rho10 - self.rho01.conj()).norm() <= tol
            && self.rho00.im.abs() <= tol
            && self.rho11.im.abs() <= tol
    }

    /// Eigenvalues `(λ_min, λ_max)` of the Hermitian part.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let a = self.rho00.re;
        let d = self.rho11.re;
        let off = 0.5 * (self.rho01 + self.rho10.conj());
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + off.norm_sqr()).sqrt();
        (mean - radius, mean + radius)
    }

    pub fn to_bloch(&self) -> BlochVector {
        bloch_from_density(self)
    }
}

/// Bloch-sphere coordinates: `ρ_11 = (1 - z)/2`, `ρ_01 = (x - iy)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Bloch vector of the pure state `α|0⟩ + β|1⟩`.
    pub fn from_pure(alpha: Complex64, beta: Complex64) -> Self {
        bloch_from_density(&QubitDensity::pure(alpha, beta))
    }

    pub fn to_density(&self) -> QubitDensity {
        density_from_bloch(*self)
    }

    /// `ρ_01 = (x - iy)/2`.
    pub fn rho01(&self) -> Complex64 {
        Complex64::new(0.5 * self.x, -0.5 * self.y)
    }

    /// `ρ_11 = (1 - z)/2`.
    pub fn rho11(&self) -> f64 {
        0.5 * (1.0 - self.z)
    }
}

pub fn density_from_bloch(b: BlochVector) -> QubitDensity {
    let rho01 = b.rho01();
    QubitDensity {
        rho00: Complex64::new(0.5 * (1.0 + b.z), 0.0),
        rho01,
        rho10: rho01.conj(),
        rho11: Complex64::new(b.rho11(), 0.0),
    }
}

pub fn bloch_from_density(rho: &QubitDensity) -> BlochVector {
    BlochVector {
        x: 2.0 * rho.rho01.re,
        y: -2.0 * rho.rho01.im,
        z: (rho.rho00 - rho.rho11).re,
    }
}

/// One Floquet period applied through an explicitly assembled
/// `2N_d × 2N_d` unitary.
///
/// The matrix is the product of the conditional kick
/// `diag(e^{-i(K±ε_c)cos θ_j/ℏ})`, a dense discrete-Fourier free propagator
/// and the qubit rotation `e^{-iδσ_x}`, built by plain matrix products with no
/// FFT involved. Quadratic in memory and cubic to build, it is meant only to
/// check [`crate::coupled::FloquetMap`] on small grids.
pub fn dense_oracle_step(state: &CoupledState, params: &SimParams) -> Result<CoupledState> {
    let n = params.n_levels();
    if n > DENSE_ORACLE_MAX_LEVELS {
        return Err(Error::DimensionTooLarge {
            got: n,
            max: DENSE_ORACLE_MAX_LEVELS,
        });
    }
    if state.n_levels() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: state.n_levels(),
        });
    }
    let u = dense_floquet_matrix(params);
    let flat = state.to_flat();
    let dim = 2 * n;
    let out: Vec<Complex64> = (0..dim)
        .map(|r| (0..dim).map(|c| u[r * dim + c] * flat[c]).sum())
        .collect();
    CoupledState::from_flat(&out)
}

/// Row-major `2N_d × 2N_d` one-kick unitary (basis: spin-major, angle-minor).
pub fn dense_floquet_matrix(params: &SimParams) -> Vec<Complex64> {
    let n = params.n_levels();
    let hbar = params.hbar();
    let dim = 2 * n;
    let zero = Complex64::new(0.0, 0.0);

    // G_{jl} = (1/N) Σ_k e^{ik(θ_j - θ_l)} e^{-iℏk²/2}
    let mut free = vec![zero; n * n];
    for j in 0..n {
        for l in 0..n {
            let mut acc = zero;
            for m in 0..n {
                let k = wavenumber(m, n) as f64;
                let phase = k * (angle(j, n) - angle(l, n)) - 0.5 * hbar * k * k;
                acc += Complex64::from_polar(1.0, phase);
            }
            free[j * n + l] = acc / n as f64;
        }
    }

    let (c, s) = (params.delta().cos(), params.delta().sin());
    let rot = [
        [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
        [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
    ];
    // (I₂ ⊗ G)(R ⊗ I_N)
    let mut propagate = vec![zero; dim * dim];
    for a in 0..2 {
        for b in 0..2 {
            for j in 0..n {
                for l in 0..n {
                    propagate[(a * n + j) * dim + b * n + l] = rot[a][b] * free[j * n + l];
                }
            }
        }
    }

    // diag(D₊, D₋) · propagate
    let mut u = vec![zero; dim * dim];
    for a in 0..2 {
        let k_eff = if a == 0 { params.k_up() } else { params.k_down() };
        for j in 0..n {
            let kick = Complex64::from_polar(1.0, -k_eff * angle(j, n).cos() / hbar);
            let row = a * n + j;
            for col in 0..dim {
                u[row * dim + col] = kick * propagate[row * dim + col];
            }
        }
    }
    u
}
