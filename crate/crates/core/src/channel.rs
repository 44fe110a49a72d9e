//! Phase-damping qubit channel: the per-kick Bloch map, the exact average
//! over the detector angle, and the continuous-time limit.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::coupled::{Trajectory, TrajectoryRecord};
use crate::qstate::{density_from_bloch, BlochVector, QubitDensity};

/// Nodes of the periodic trapezoid rule in [`phase_kick_factor`].
pub const QUADRATURE_POINTS: usize = 256;

/// Coupling above which the small-ε expansion behind [`phase_damp`] is
/// reported as unreliable.
pub const PHASE_DAMP_WARN_EPSILON: f64 = 0.5;

/// Rotation `e^{-iδσ_x}` on the Bloch sphere: angle 2δ about x.
pub fn free_rotation(b: BlochVector, delta: f64) -> BlochVector {
    let (s, c) = (2.0 * delta).sin_cos();
    BlochVector {
        x: b.x,
        y: c * b.y - s * b.z,
        z: s * b.y + c * b.z,
    }
}

/// Shrinks the transverse components by `1 - ε²`.
pub fn phase_damp(b: BlochVector, epsilon: f64) -> BlochVector {
    if epsilon.abs() > PHASE_DAMP_WARN_EPSILON {
        log::warn!("phase_damp: epsilon = {epsilon} is outside the small-coupling regime");
    }
    let f = 1.0 - epsilon * epsilon;
    BlochVector {
        x: f * b.x,
        y: f * b.y,
        z: b.z,
    }
}

/// `(1/2π) ∫ e^{-2iε cos θ} dθ`, i.e. `J₀(2ε)`, by the periodic trapezoid
/// rule.
pub fn phase_kick_factor(epsilon: f64) -> f64 {
    let n = QUADRATURE_POINTS;
    // the sine part integrates to zero by symmetry
    (0..n)
        .map(|j| (2.0 * epsilon * (TAU * j as f64 / n as f64).cos()).cos())
        .sum::<f64>()
        / n as f64
}

/// Average of `R(θ) ρ R(θ)^†` over a uniform detector angle, with
/// `R(θ) = e^{-iε cos θ σ_z}`.
pub fn phase_kick_exact(rho: QubitDensity, epsilon: f64) -> QubitDensity {
    let f = phase_kick_factor(epsilon);
    QubitDensity {
        rho01: rho.rho01 * f,
        rho10: rho.rho10 * f,
        ..rho
    }
}

/// Iterates rotation then damping for `t_max` steps; records `t = 0..=t_max`
/// with `p2` set to NaN.
pub fn map_trajectory(b0: BlochVector, epsilon: f64, delta: f64, t_max: usize) -> Trajectory {
    let mut b = b0;
    let mut records = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        if t > 0 {
            b = phase_damp(free_rotation(b, delta), epsilon);
        }
        records.push(TrajectoryRecord::from_density(t, &density_from_bloch(b), f64::NAN));
    }
    Trajectory { records }
}

/// Bloch trajectory of the map, `t = 0..=t_max`.
pub fn map_bloch_series(b0: BlochVector, epsilon: f64, delta: f64, t_max: usize) -> Vec<BlochVector> {
    let mut out = Vec::with_capacity(t_max + 1);
    let mut b = b0;
    out.push(b);
    for _ in 0..t_max {
        b = phase_damp(free_rotation(b, delta), epsilon);
        out.push(b);
    }
    out
}

/// Damping regime of the continuous model with `Γ = ε²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DampingRegime {
    /// `Γ < 4δ`: damped oscillation at `ω = √(4δ² - Γ²/4)`.
    Underdamped,
    /// `Γ = 4δ` exactly.
    Critical,
    /// `Γ > 4δ`: two real rates `Γ±`.
    Overdamped,
}

pub fn damping_regime(epsilon: f64, delta: f64) -> DampingRegime {
    let gamma = epsilon * epsilon;
    let disc = 0.25 * gamma * gamma - 4.0 * delta * delta;
    if disc > 0.0 {
        DampingRegime::Overdamped
    } else if disc < 0.0 {
        DampingRegime::Underdamped
    } else {
        DampingRegime::Critical
    }
}

/// Characteristic rates of the `(y, z)` block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationRates {
    pub regime: DampingRegime,
    /// `Γ/2 + √(Γ²/4 - 4δ²)`, or `Γ/2` when underdamped.
    pub gamma_plus: f64,
    /// `Γ/2 - √(Γ²/4 - 4δ²)`, or `Γ/2` when underdamped.
    pub gamma_minus: f64,
    /// `√(4δ² - Γ²/4)`, zero unless underdamped.
    pub omega: f64,
}

pub fn relaxation_rates(epsilon: f64, delta: f64) -> RelaxationRates {
    let gamma = epsilon * epsilon;
    let disc = 0.25 * gamma * gamma - 4.0 * delta * delta;
    let regime = damping_regime(epsilon, delta);
    if disc >= 0.0 {
        let kappa = disc.sqrt();
        // Γ₋ = 4δ²/Γ₊ avoids cancellation deep in the Zeno regime
        let gamma_plus = 0.5 * gamma + kappa;
        let gamma_minus = if gamma_plus > 0.0 {
            4.0 * delta * delta / gamma_plus
        } else {
            0.0
        };
        RelaxationRates {
            regime,
            gamma_plus,
            gamma_minus,
            omega: 0.0,
        }
    } else {
        RelaxationRates {
            regime,
            gamma_plus: 0.5 * gamma,
            gamma_minus: 0.5 * gamma,
            omega: (-disc).sqrt(),
        }
    }
}

/// Closed-form solution of `ẋ = -Γx`, `ẏ = -Γy - 2δz`, `ż = 2δy` with `Γ = ε²`.
///
/// The `(y, z)` propagator is `e^{-Γt/2}[C·I + S·B]` with
/// `B = [[-Γ/2, -2δ], [2δ, Γ/2]]`, `B² = κ²I`, `C = cosh κt` and
/// `S = sinh(κt)/κ`; near `κ = 0` both are summed as power series in `κ²t²`,
/// so the critical case reduces to `I + tB` without a special branch.
pub fn continuous_solution(b0: BlochVector, epsilon: f64, delta: f64, t: f64) -> BlochVector {
    let gamma = epsilon * epsilon;
    let k2 = 0.25 * gamma * gamma - 4.0 * delta * delta;
    let (c, s) = propagator_coefficients(gamma, k2, t);
    let (b11, b12, b21, b22) = (-0.5 * gamma, -2.0 * delta, 2.0 * delta, 0.5 * gamma);
    BlochVector {
        x: b0.x * (-gamma * t).exp(),
        y: c * b0.y + s * (b11 * b0.y + b12 * b0.z),
        z: c * b0.z + s * (b21 * b0.y + b22 * b0.z),
    }
}

/// `(e^{-Γt/2} C, e^{-Γt/2} S)`.
fn propagator_coefficients(gamma: f64, k2: f64, t: f64) -> (f64, f64) {
    let decay = (-0.5 * gamma * t).exp();
    let s_arg = k2 * t * t;
    if s_arg.abs() < 1.0 {
        let (mut c, mut s) = (0.0, 0.0);
        let mut term = 1.0;
        for n in 0..20 {
            let two_n = 2.0 * n as f64;
            // term = s_arg^n / (2n)!
            c += term;
            s += term / (two_n + 1.0);
            term *= s_arg / ((two_n + 1.0) * (two_n + 2.0));
        }
        (decay * c, decay * s * t)
    } else if k2 > 0.0 {
        let kappa = k2.sqrt();
        let slow = (-(0.5 * gamma - kappa) * t).exp();
        let fast = (-(0.5 * gamma + kappa) * t).exp();
        (0.5 * (slow + fast), 0.5 * (slow - fast) / kappa)
    } else {
        let omega = (-k2).sqrt();
        let (sin, cos) = (omega * t).sin_cos();
        (decay * cos, decay * sin / omega)
    }
}

/// `ρ` of the continuous model at time `t`.
pub fn continuous_density(b0: BlochVector, epsilon: f64, delta: f64, t: f64) -> QubitDensity {
    density_from_bloch(continuous_solution(b0, epsilon, delta, t))
}

/// Coherence `ρ₀₁` of a Bloch vector.
pub fn coherence(b: BlochVector) -> Complex64 {
    b.rho01()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rk4(b0: BlochVector, epsilon: f64, delta: f64, t: f64, steps: usize) -> BlochVector {
        let g = epsilon * epsilon;
        let f = |v: [f64; 3]| [-g * v[0], -g * v[1] - 2.0 * delta * v[2], 2.0 * delta * v[1]];
        let h = t / steps as f64;
        let mut v = [b0.x, b0.y, b0.z];
        let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
        for _ in 0..steps {
            let k1 = f(v);
            let k2 = f(add(v, k1, 0.5 * h));
            let k3 = f(add(v, k2, 0.5 * h));
            let k4 = f(add(v, k3, h));
            for i in 0..3 {
                v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        BlochVector::new(v[0], v[1], v[2])
    }

    #[test]
    fn rotation_examples() {
        let b = BlochVector::new(0.3, 0.4, -0.5);
        assert_eq!(free_rotation(b, 0.0), b);
        let r = free_rotation(BlochVector::new(0.0, 1.0, 0.0), PI / 2.0);
        assert!((r.y + 1.0).abs() < 1e-15 && r.z.abs() < 1e-15 && r.x == 0.0);
    }

    #[test]
    fn damping_examples() {
        let b = BlochVector::new(0.3, 0.4, -0.5);
        assert_eq!(phase_damp(b, 0.0), b);
        assert_eq!(phase_damp(b, 0.3).z, b.z);
        let d = phase_damp(BlochVector::new(1.0, 0.0, 0.0), 0.225);
        assert!((d.x - 0.949375).abs() < 1e-15);
        assert_eq!((d.y, d.z), (0.0, 0.0));
    }

    #[test]
    fn exact_kick_reduces_to_damping_for_small_coupling() {
        let rho = density_from_bloch(BlochVector::new(0.6, -0.2, 0.5));
        assert_eq!(phase_kick_exact(rho, 0.0), rho);
        for eps in [0.01, 0.05, 0.1] {
            let exact = phase_kick_exact(rho, eps).to_bloch();
            let approx = phase_damp(rho.to_bloch(), eps);
            assert!((exact.x - approx.x).abs() <= eps.powi(4));
            assert!((exact.y - approx.y).abs() <= eps.powi(4));
            assert_eq!(exact.z, approx.z);
        }
    }

    #[test]
    fn exact_kick_vanishes_at_first_bessel_zero() {
        assert!(phase_kick_factor(1.2024).abs() < 1e-4);
    }

    #[test]
    fn exact_kick_matches_bessel_series() {
        // J₀(x) = Σ (-1)^m (x/2)^{2m} / (m!)²
        for eps in [0.1, 0.7, 1.5, 3.0] {
            let mut term = 1.0;
            let mut j0 = 0.0;
            for m in 0..60 {
                j0 += term;
                term *= -eps * eps / ((m + 1) as f64).powi(2);
            }
            assert!((phase_kick_factor(eps) - j0).abs() < 1e-13, "eps={eps}");
        }
    }

    #[test]
    fn map_without_coupling_preserves_length() {
        let b0 = BlochVector::new(0.8, 0.0, -0.6);
        for b in map_bloch_series(b0, 0.0, 0.2, 300) {
            assert!((b.norm() - 1.0).abs() < 1e-12);
        }
        let traj = map_trajectory(b0, 0.0, 0.2, 10);
        assert_eq!(traj.len(), 11);
        assert!(traj.records[3].p2.is_nan());
    }

    #[test]
    fn continuous_initial_value_is_exact() {
        let b0 = BlochVector::new(0.8, 0.1, -0.6);
        for (e, d) in [(0.3, 0.2), (1.0, 0.1), (2.0, 0.25), (0.0, 0.0)] {
            assert_eq!(continuous_solution(b0, e, d, 0.0), b0);
        }
    }

    #[test]
    fn zeno_rate_example() {
        let r = relaxation_rates(1.0, 0.1);
        assert_eq!(r.regime, DampingRegime::Overdamped);
        let expected = 0.5 - (0.25f64 - 0.04).sqrt();
        assert!((r.gamma_minus - expected).abs() < 1e-14);
        assert!((r.gamma_minus - 0.04174).abs() < 1e-5);
        assert!((r.gamma_minus / 0.04 - 1.0).abs() < 0.05);
    }

    #[test]
    fn transverse_decay_rates() {
        let b0 = BlochVector::new(1.0, 0.0, 0.0);
        let b = continuous_solution(b0, 0.3, 0.2, 7.0);
        assert!((b.x - (-0.09f64 * 7.0).exp()).abs() < 1e-15);

        // underdamped: the (y, z) envelope decays at Γ/2
        let (eps, delta) = (0.3, 0.2);
        let r = relaxation_rates(eps, delta);
        assert_eq!(r.regime, DampingRegime::Underdamped);
        assert!((r.gamma_plus - 0.045).abs() < 1e-15 && (r.gamma_minus - 0.045).abs() < 1e-15);
        let period = PI / r.omega;
        let y0 = BlochVector::new(0.0, 1.0, 0.0);
        let a = continuous_solution(y0, eps, delta, 10.0);
        let b = continuous_solution(y0, eps, delta, 10.0 + 2.0 * period);
        assert!((b.y / a.y - (-0.045 * 2.0 * period).exp()).abs() < 1e-12);
    }

    #[test]
    fn zeno_branch_is_decreasing() {
        let delta: f64 = 0.1;
        let start = (4.0 * delta).sqrt();
        let mut prev = f64::INFINITY;
        for i in 1..200 {
            let eps = start + 0.02 * i as f64;
            let g = relaxation_rates(eps, delta).gamma_minus;
            assert!(g < prev, "eps={eps}");
            prev = g;
        }
    }

    #[test]
    fn matches_rk4_on_both_branches() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let b0 = BlochVector::new(0.8, 0.0, -0.6);
        for i in 0..50 {
            let delta: f64 = rng.random_range(0.01..0.3);
            let eps: f64 = match i % 3 {
                0 => rng.random_range(0.0..(4.0 * delta).sqrt()),
                1 => rng.random_range((4.0 * delta).sqrt()..2.0),
                // Γ within 1e-7 of 4δ
                _ => (4.0 * delta + rng.random_range(-1e-7..1e-7)).sqrt(),
            };
            for t in [1.0, 10.0, 100.0] {
                let steps = (t * 200.0) as usize;
                let want = rk4(b0, eps, delta, t, steps);
                let got = continuous_solution(b0, eps, delta, t);
                assert!((got.x - want.x).abs() < 1e-10);
                assert!((got.y - want.y).abs() < 1e-10, "eps={eps} delta={delta} t={t}");
                assert!((got.z - want.z).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn continuous_across_critical_point() {
        let delta: f64 = 0.1;
        let crit = (4.0 * delta).sqrt();
        let b0 = BlochVector::new(0.0, 0.3, 0.9);
        for t in [0.5, 5.0, 50.0] {
            let at = continuous_solution(b0, crit, delta, t);
            for h in [1e-9, -1e-9] {
                let near = continuous_solution(b0, crit + h, delta, t);
                assert!((near.y - at.y).abs() < 1e-7 && (near.z - at.z).abs() < 1e-7);
            }
        }
    }

    proptest! {
        #[test]
        fn rotation_preserves_length(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, d in -5.0f64..5.0) {
            let b = BlochVector::new(x, y, z);
            prop_assert!((free_rotation(b, d).norm() - b.norm()).abs() < 1e-14);
        }

        #[test]
        fn map_never_leaves_the_ball(
            cos_t in -1.0f64..=1.0,
            phi in 0.0f64..TAU,
            r in 0.0f64..=1.0,
            eps in 0.0f64..1.0,
            delta in -1.0f64..1.0,
        ) {
            let s = (1.0 - cos_t * cos_t).sqrt();
            let b0 = BlochVector::new(r * s * phi.cos(), r * s * phi.sin(), r * cos_t);
            for b in map_bloch_series(b0, eps, delta, 200) {
                prop_assert!(b.norm() <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn exact_and_expanded_kick_agree_to_fourth_order(eps in 0.0f64..0.1) {
            prop_assert!((phase_kick_factor(eps) - (1.0 - eps * eps)).abs() <= eps.powi(4) + 4.0 * f64::EPSILON);
        }
    }
}
