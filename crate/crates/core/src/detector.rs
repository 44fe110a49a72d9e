//! The uncoupled quantum kicked rotator and its classical limit, the standard
//! map.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::qstate::{angle, on_torus, wavenumber, DetectorState, Representation, SimParams, Spectral};
use crate::{Error, Result};

/// Orbit count used when none is configured.
pub const DEFAULT_LYAPUNOV_ORBITS: usize = 100;
/// Steps per orbit used when none is configured.
pub const DEFAULT_LYAPUNOV_STEPS: usize = 10_000;

/// Wrapped Gaussian coherent state centred at `(theta0, p0)` with
/// `σ_θ = σ_p = √(ℏ/2)`, in the angle representation.
///
/// Periodic images `m ∈ {-1, 0, 1}` are summed; the result is renormalised
/// numerically.
pub fn init_gaussian(theta0: f64, p0: f64, params: &SimParams) -> Result<DetectorState> {
    if !on_torus(theta0, p0) {
        return Err(Error::OffTorus { theta: theta0, p: p0 });
    }
    let n = params.n_levels();
    let hbar = params.hbar();
    let amplitudes = (0..n)
        .map(|j| {
            let theta = angle(j, n);
            (-1..=1)
                .map(|m| {
                    let d = theta - theta0 + TAU * m as f64;
                    Complex64::from_polar((-d * d / (2.0 * hbar)).exp(), p0 * d / hbar)
                })
                .sum()
        })
        .collect();
    let mut state = DetectorState::from_angle(amplitudes);
    state.normalize();
    Ok(state)
}

/// `e^{-iℏk²/2}` for every transform index.
pub fn free_phases(n: usize, hbar: f64) -> Vec<Complex64> {
    (0..n)
        .map(|m| {
            let k = wavenumber(m, n) as f64;
            Complex64::from_polar(1.0, -0.5 * hbar * k * k)
        })
        .collect()
}

/// `e^{-i K_eff cos θ_j / ℏ}` for every angle grid point.
pub fn kick_phases(n: usize, hbar: f64, k_eff: f64) -> Vec<Complex64> {
    (0..n)
        .map(|j| Complex64::from_polar(1.0, -k_eff * angle(j, n).cos() / hbar))
        .collect()
}

/// Multiplies by the kick operator with strength `k_eff`.
pub fn kick(state: &DetectorState, k_eff: f64, params: &SimParams) -> Result<DetectorState> {
    if state.representation() != Representation::Angle {
        return Err(Error::WrongRepresentation { expected: "angle" });
    }
    let phases = kick_phases(state.len(), params.hbar(), k_eff);
    let amplitudes = state
        .amplitudes()
        .iter()
        .zip(&phases)
        .map(|(a, ph)| a * ph)
        .collect();
    Ok(DetectorState::from_angle(amplitudes))
}

/// Applies `e^{-ip²/2ℏ}`; the result is always in the angle representation.
pub fn free_propagate(state: &DetectorState, params: &SimParams) -> DetectorState {
    let mut spectral = Spectral::new(state.len());
    let mut momentum = state.to_momentum(&mut spectral);
    let phases = free_phases(state.len(), params.hbar());
    momentum
        .amplitudes_mut()
        .iter_mut()
        .zip(&phases)
        .for_each(|(a, ph)| *a *= ph);
    momentum.to_angle(&mut spectral)
}

/// Reusable one-period propagator `U_d = e^{-i K_eff cos θ/ℏ} e^{-ip²/2ℏ}`
/// for a fixed kick strength.
#[derive(Debug, Clone)]
pub struct KickedRotor {
    spectral: Spectral,
    free: Vec<Complex64>,
    kick: Vec<Complex64>,
}

impl KickedRotor {
    pub fn new(params: &SimParams, k_eff: f64) -> Self {
        let n = params.n_levels();
        Self {
            spectral: Spectral::new(n),
            free: free_phases(n, params.hbar()),
            kick: kick_phases(n, params.hbar(), k_eff),
        }
    }

    /// One free propagation followed by one kick, in place on angle amplitudes.
    pub fn step(&mut self, amplitudes: &mut [Complex64]) {
        self.spectral.to_momentum(amplitudes);
        amplitudes.iter_mut().zip(&self.free).for_each(|(a, ph)| *a *= ph);
        self.spectral.to_angle(amplitudes);
        amplitudes.iter_mut().zip(&self.kick).for_each(|(a, ph)| *a *= ph);
    }
}

/// First and second moments of a rotator state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean_theta: f64,
    pub mean_p: f64,
    pub var_theta: f64,
    pub var_p: f64,
}

/// Moments with θ taken on `[0, 2π)` and `p = ℏk` on the symmetric grid.
///
/// Meaningful for packets well localised away from the θ cut at 0.
pub fn moments(state: &DetectorState, params: &SimParams) -> Moments {
    let n = state.len();
    let mut spectral = Spectral::new(n);
    let psi = state.to_angle(&mut spectral);
    let phi = state.to_momentum(&mut spectral);
    let (w, s1, s2) = psi.amplitudes().iter().enumerate().fold((0.0, 0.0, 0.0), |acc, (j, a)| {
        let prob = a.norm_sqr();
        let th = angle(j, n);
        (acc.0 + prob, acc.1 + prob * th, acc.2 + prob * th * th)
    });
    let (wp, q1, q2) = phi.amplitudes().iter().enumerate().fold((0.0, 0.0, 0.0), |acc, (m, a)| {
        let prob = a.norm_sqr();
        let p = params.hbar() * wavenumber(m, n) as f64;
        (acc.0 + prob, acc.1 + prob * p, acc.2 + prob * p * p)
    });
    let mean_theta = s1 / w;
    let mean_p = q1 / wp;
    Moments {
        mean_theta,
        mean_p,
        var_theta: s2 / w - mean_theta * mean_theta,
        var_p: q2 / wp - mean_p * mean_p,
    }
}

/// Point of the classical standard map with its tangent vector `(δp, δθ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalPoint {
    pub theta: f64,
    pub p: f64,
    pub tangent: [f64; 2],
}

impl ClassicalPoint {
    pub fn new(theta: f64, p: f64) -> Self {
        Self {
            theta: wrap_theta(theta),
            p: wrap_p(p),
            tangent: [1.0, 0.0],
        }
    }
}

/// Wraps into `[0, 2π)`.
pub fn wrap_theta(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Wraps into `[-π, π)`.
pub fn wrap_p(p: f64) -> f64 {
    let w = (p + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// Tangent map of one standard-map step acting on `(δp, δθ)`.
pub fn jacobian(theta: f64, k_eff: f64) -> [[f64; 2]; 2] {
    let kc = k_eff * theta.cos();
    [[1.0, kc], [1.0, 1.0 + kc]]
}

/// `p' = p + K sin θ`, `θ' = θ + p'`, both wrapped onto the torus.
pub fn classical_step(pt: ClassicalPoint, k_eff: f64) -> ClassicalPoint {
    let j = jacobian(pt.theta, k_eff);
    let [dp, dth] = pt.tangent;
    let p_unwrapped = pt.p + k_eff * pt.theta.sin();
    ClassicalPoint {
        theta: wrap_theta(pt.theta + p_unwrapped),
        p: wrap_p(p_unwrapped),
        tangent: [j[0][0] * dp + j[0][1] * dth, j[1][0] * dp + j[1][1] * dth],
    }
}

/// Mean Lyapunov exponent of the standard map over `n_orbits` random orbits.
///
/// Initial points are uniform on the torus, drawn from a ChaCha8 stream per
/// orbit so the estimate does not depend on scheduling. The tangent vector
/// is renormalised after every step.
pub fn lyapunov(k_eff: f64, n_orbits: usize, n_steps: usize, seed: u64) -> Result<f64> {
    if n_orbits < 10 {
        return Err(Error::InvalidParameter {
            name: "n_orbits",
            reason: format!("need at least 10 orbits, got {n_orbits}"),
        });
    }
    if n_steps < 1000 {
        return Err(Error::InvalidParameter {
            name: "n_steps",
            reason: format!("need at least 1000 steps, got {n_steps}"),
        });
    }
    if !k_eff.is_finite() {
        return Err(Error::InvalidParameter {
            name: "K",
            reason: format!("must be finite, got {k_eff}"),
        });
    }
    let per_orbit: Vec<f64> = (0..n_orbits)
        .into_par_iter()
        .map(|orbit| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(orbit as u64);
            let theta = rng.random_range(0.0..TAU);
            let p = rng.random_range(-PI..PI);
            orbit_exponent(ClassicalPoint::new(theta, p), k_eff, n_steps)
        })
        .collect();
    Ok(per_orbit.iter().sum::<f64>() / n_orbits as f64)
}

fn orbit_exponent(mut pt: ClassicalPoint, k_eff: f64, n_steps: usize) -> f64 {
    let mut log_growth = 0.0;
    for _ in 0..n_steps {
        pt = classical_step(pt, k_eff);
        let norm = pt.tangent[0].hypot(pt.tangent[1]);
        log_growth += norm.ln();
        pt.tangent = [pt.tangent[0] / norm, pt.tangent[1] / norm];
    }
    log_growth / n_steps as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{dense_floquet_matrix, Spectral};
    use proptest::prelude::*;

    fn params(n: usize) -> SimParams {
        SimParams::new(1.0, 0.0, 0.0, n, 1).unwrap()
    }

    #[test]
    fn gaussian_is_centred_and_minimal() {
        let p = params(512);
        assert!((p.hbar() - 1.23e-2).abs() < 1e-4);
        let psi = init_gaussian(PI, 0.0, &p).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        let m = moments(&psi, &p);
        assert!((m.mean_theta - PI).abs() < 1e-6);
        assert!(m.mean_p.abs() < 1e-6);
        let product = (m.var_theta * m.var_p).sqrt();
        assert!((product / (p.hbar() / 2.0) - 1.0).abs() < 0.1, "ΔθΔp = {product}");
    }

    #[test]
    fn gaussian_rejects_off_torus_centre() {
        let p = params(64);
        assert!(matches!(init_gaussian(TAU, 0.0, &p), Err(Error::OffTorus { .. })));
        assert!(matches!(init_gaussian(1.0, PI, &p), Err(Error::OffTorus { .. })));
        assert!(init_gaussian(0.0, -PI, &p).is_ok());
    }

    #[test]
    fn gaussian_carries_requested_momentum() {
        let p = params(1024);
        let psi = init_gaussian(2.0, 0.7, &p).unwrap();
        let m = moments(&psi, &p);
        assert!((m.mean_theta - 2.0).abs() < 1e-6);
        assert!((m.mean_p - 0.7).abs() < 1e-6);
    }

    #[test]
    fn kick_matches_direct_diagonal() {
        let p = params(8);
        let mut basis = vec![Complex64::new(0.0, 0.0); 8];
        basis[0] = Complex64::new(1.0, 0.0);
        let out = kick(&DetectorState::from_angle(basis.clone()), 1.0, &p).unwrap();
        let expected = Complex64::from_polar(1.0, -1.0 / p.hbar());
        assert!((out.amplitudes()[0] - expected).norm() < 1e-15);
        assert!(out.amplitudes()[1..].iter().all(|a| a.norm() == 0.0));

        let zero = kick(&DetectorState::from_angle(basis.clone()), 0.0, &p).unwrap();
        assert_eq!(zero.amplitudes(), &basis[..]);
    }

    #[test]
    fn kick_requires_angle_representation() {
        let p = params(8);
        let psi = DetectorState::from_momentum(vec![Complex64::new(1.0, 0.0); 8]);
        assert!(kick(&psi, 1.0, &p).is_err());
    }

    #[test]
    fn plane_waves_pick_up_free_phase() {
        let p = params(32);
        for k in [-16i64, -5, 0, 3, 15] {
            let psi = DetectorState::plane_wave(k, 32);
            let out = free_propagate(&psi, &p);
            let phase = Complex64::from_polar(1.0, -0.5 * p.hbar() * (k * k) as f64);
            for (a, b) in out.amplitudes().iter().zip(psi.amplitudes()) {
                assert!((a - phase * b).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn rotor_period_matches_dense_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [8usize, 16, 32] {
            // with ε_c = δ = 0 the upper-left block of the dense unitary is U_d
            let p = SimParams::new(1.7, 0.0, 0.0, n, 1).unwrap();
            let u = dense_floquet_matrix(&p);
            let mut psi: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let norm = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            psi.iter_mut().for_each(|c| *c /= norm);
            let expected: Vec<Complex64> = (0..n)
                .map(|r| (0..n).map(|c| u[r * 2 * n + c] * psi[c]).sum())
                .collect();
            let mut rotor = KickedRotor::new(&p, 1.7);
            let mut got = psi.clone();
            rotor.step(&mut got);
            for (a, b) in got.iter().zip(&expected) {
                assert!((a - b).norm() < 1e-10);
            }
            let two = kick(&free_propagate(&DetectorState::from_angle(psi), &p), 1.7, &p).unwrap();
            for (a, b) in two.amplitudes().iter().zip(&expected) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn rotor_preserves_norm_over_many_periods() {
        let p = SimParams::new(8.0, 0.0, 0.0, 1 << 13, 1).unwrap();
        let mut psi = init_gaussian(PI, 0.0, &p).unwrap().into_amplitudes();
        let mut rotor = KickedRotor::new(&p, 8.0);
        for _ in 0..2000 {
            rotor.step(&mut psi);
        }
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_of_uniform_state_is_zero_mode() {
        let n = 16;
        let psi = DetectorState::plane_wave(0, n);
        let out = free_propagate(&psi, &params(n));
        for (a, b) in out.amplitudes().iter().zip(psi.amplitudes()) {
            assert!((a - b).norm() < 1e-14);
        }
        let mut s = Spectral::new(n);
        let phi = psi.to_momentum(&mut s);
        assert!((phi.amplitudes()[0].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fixed_point_and_free_rotation() {
        for k in [0.0, 1.0, 4.5, 8.0] {
            let pt = classical_step(ClassicalPoint::new(PI, 0.0), k);
            assert!((pt.theta - PI).abs() < 1e-12);
            assert!(pt.p.abs() < 1e-12);
            let tr = jacobian(PI, k)[0][0] + jacobian(PI, k)[1][1];
            assert!((tr - (2.0 - k)).abs() < 1e-12);
        }
        let pt = classical_step(ClassicalPoint::new(5.0, 2.0), 0.0);
        assert!((pt.theta - (7.0 - TAU)).abs() < 1e-12);
        assert!((pt.p - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_stability_boundary() {
        for k in [0.0, 1.0, 3.9, 4.0] {
            let tr: f64 = 2.0 - k;
            assert!(tr.abs() <= 2.0, "K={k}");
        }
        for k in [4.1, 4.5, 5.3, -0.1] {
            let j = jacobian(PI, k);
            assert!((j[0][0] + j[1][1]).abs() > 2.0, "K={k}");
        }
    }

    #[test]
    fn wrapping_stays_on_torus() {
        assert_eq!(wrap_p(PI), -PI);
        assert_eq!(wrap_theta(TAU), 0.0);
        assert!((wrap_p(-PI - 0.1) - (PI - 0.1)).abs() < 1e-12);
        assert!(wrap_theta(-1e-18) < TAU);
    }

    #[test]
    fn lyapunov_is_deterministic_and_validated() {
        let a = lyapunov(4.5, 10, 1000, 42).unwrap();
        let b = lyapunov(4.5, 10, 1000, 42).unwrap();
        assert_eq!(a, b);
        assert!(lyapunov(4.5, 9, 1000, 42).is_err());
        assert!(lyapunov(4.5, 10, 999, 42).is_err());
    }

    #[test]
    fn lyapunov_small_kick_is_near_zero() {
        let l = lyapunov(0.5, 20, 2000, 1).unwrap();
        assert!(l < 0.05, "λ = {l}");
    }

    #[test]
    fn lyapunov_strong_kick_follows_log_law() {
        let l = lyapunov(8.0, 20, 4000, 1).unwrap();
        assert!((l / 4f64.ln() - 1.0).abs() < 0.1, "λ = {l}");
    }

    #[test]
    fn lyapunov_converges_in_steps() {
        let a = lyapunov(4.5, 20, 2000, 9).unwrap();
        let b = lyapunov(4.5, 20, 4000, 9).unwrap();
        assert!(((a - b) / b).abs() < 0.05, "{a} vs {b}");
    }

    proptest! {
        #[test]
        fn standard_map_is_area_preserving(theta in 0.0f64..TAU, k in -10.0f64..10.0) {
            let j = jacobian(theta, k);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            prop_assert!((det - 1.0).abs() < 1e-12);
        }

        #[test]
        fn step_lands_on_torus(theta in 0.0f64..TAU, p in -PI..PI, k in -10.0f64..10.0) {
            let pt = classical_step(ClassicalPoint::new(theta, p), k);
            prop_assert!(on_torus(pt.theta, pt.p));
        }

        #[test]
        fn kick_is_unitary(k in -20.0f64..20.0, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = params(64);
            let psi: Vec<Complex64> = (0..64).map(|_| Complex64::new(rng.random(), rng.random())).collect();
            let mut s = DetectorState::from_angle(psi);
            s.normalize();
            let out = kick(&s, k, &p).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-14);
        }
    }
}
