use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::coupled::{check_qubit, initial_state, FloquetMap};
use crate::qstate::{wavenumber, CoupledState, DetectorState, SimParams, Spectral};
use crate::{Error, Result};

pub const MIN_HUSIMI_RESOLUTION: usize = 16;
pub const DEFAULT_HUSIMI_GRID: (usize, usize) = (128, 128);

/// Husimi distribution sampled at `θ_j = jΔθ`, `p_i = -π + iΔp`.
///
/// Stored row-major with `m_p` rows (momentum increasing with the row index)
/// of `m_theta` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct HusimiGrid {
    pub values: Vec<f64>,
    pub m_theta: usize,
    pub m_p: usize,
    pub hbar: f64,
}

impl HusimiGrid {
    pub fn d_theta(&self) -> f64 {
        TAU / self.m_theta as f64
    }

    pub fn d_p(&self) -> f64 {
        TAU / self.m_p as f64
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.d_theta()
    }

    pub fn p(&self, i: usize) -> f64 {
        -PI + i as f64 * self.d_p()
    }

    pub fn get(&self, i_p: usize, j_theta: usize) -> f64 {
        self.values[i_p * self.m_theta + j_theta]
    }

    pub fn row(&self, i_p: usize) -> &[f64] {
        &self.values[i_p * self.m_theta..(i_p + 1) * self.m_theta]
    }

    /// `Σ H ΔθΔp / 2πℏ`, which is 1 for a normalised state on a fine grid.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.d_theta() * self.d_p() / (TAU * self.hbar)
    }

    /// `(i_p, j_theta)` of the largest entry.
    pub fn argmax(&self) -> (usize, usize) {
        let (idx, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        (idx / self.m_theta, idx % self.m_theta)
    }

    /// Inverse participation `1 / Σ P²` of the distribution normalised to
    /// unit sum; the number of cells the state effectively occupies.
    pub fn participation(&self) -> f64 {
        let total: f64 = self.values.iter().sum();
        let sum_sq: f64 = self.values.iter().map(|v| (v / total) * (v / total)).sum();
        1.0 / sum_sq
    }
}

fn check_grid(grid: (usize, usize)) -> Result<()> {
    if grid.0 < MIN_HUSIMI_RESOLUTION || grid.1 < MIN_HUSIMI_RESOLUTION {
        return Err(Error::GridTooCoarse {
            m_theta: grid.0,
            m_p: grid.1,
        });
    }
    Ok(())
}

/// Reusable Husimi evaluator for one detector dimension and grid.
struct HusimiPlan {
    spectral: Spectral,
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    m_theta: usize,
    m_p: usize,
    hbar: f64,
    /// Coherent-state momentum profile per grid row, normalised.
    weights: Vec<Vec<f64>>,
}

impl HusimiPlan {
    fn new(n: usize, hbar: f64, grid: (usize, usize)) -> Self {
        let (m_theta, m_p) = grid;
        let weights = (0..m_p)
            .map(|i| {
                let p0 = -PI + i as f64 * TAU / m_p as f64;
                let mut w: Vec<f64> = (0..n)
                    .map(|m| {
                        let p = hbar * wavenumber(m, n) as f64;
                        (-1..=1)
                            .map(|img| {
                                let d = p - p0 + TAU * img as f64;
                                (-d * d / (2.0 * hbar)).exp()
                            })
                            .sum()
                    })
                    .collect();
                let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                w.iter_mut().for_each(|x| *x /= norm);
                w
            })
            .collect();
        Self {
            spectral: Spectral::new(n),
            fft: FftPlanner::new().plan_fft_inverse(m_theta),
            m_theta,
            m_p,
            hbar,
            weights,
        }
    }

    /// Adds `|⟨coh|ψ⟩|²` for angle amplitudes `psi` into `out`.
    fn accumulate(&mut self, psi: &[Complex64], out: &mut [f64]) {
        let n = psi.len();
        let mut phi = psi.to_vec();
        self.spectral.to_momentum(&mut phi);
        let mut folded = vec![Complex64::new(0.0, 0.0); self.m_theta];
        for (i, w) in self.weights.iter().enumerate() {
            folded.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
            for (m, (a, g)) in phi.iter().zip(w).enumerate() {
                let r = wavenumber(m, n).rem_euclid(self.m_theta as i64) as usize;
                folded[r] += a * g;
            }
            // Σ_r A_r e^{+2πi rj/M}
            self.fft.process(&mut folded);
            let row = &mut out[i * self.m_theta..(i + 1) * self.m_theta];
            row.iter_mut().zip(&folded).for_each(|(h, a)| *h += a.norm_sqr());
        }
    }

    fn grid(&self, values: Vec<f64>) -> HusimiGrid {
        HusimiGrid {
            values,
            m_theta: self.m_theta,
            m_p: self.m_p,
            hbar: self.hbar,
        }
    }
}

/// `H(θ, p) = |⟨θ, p|ψ⟩|²` against the same coherent states produced by
/// [`crate::detector::init_gaussian`]. The component is used as given; callers
/// normalise conditional components beforehand.
pub fn husimi(component: &DetectorState, grid: (usize, usize), params: &SimParams) -> Result<HusimiGrid> {
    check_grid(grid)?;
    if component.len() != params.n_levels() {
        return Err(Error::LengthMismatch {
            expected: params.n_levels(),
            got: component.len(),
        });
    }
    let mut spectral = Spectral::new(component.len());
    let psi = component.to_angle(&mut spectral);
    let mut plan = HusimiPlan::new(params.n_levels(), params.hbar(), grid);
    let mut values = vec![0.0; grid.0 * grid.1];
    plan.accumulate(psi.amplitudes(), &mut values);
    Ok(plan.grid(values))
}

/// Husimi distribution of the detector's reduced density matrix, i.e. the sum
/// over both spin components.
pub fn husimi_reduced(state: &CoupledState, grid: (usize, usize), params: &SimParams) -> Result<HusimiGrid> {
    check_grid(grid)?;
    let mut plan = HusimiPlan::new(params.n_levels(), params.hbar(), grid);
    let mut values = vec![0.0; grid.0 * grid.1];
    plan.accumulate(&state.up, &mut values);
    plan.accumulate(&state.down, &mut values);
    Ok(plan.grid(values))
}

fn circular_distance(a: f64, b: f64) -> f64 {
    ((a - b + PI).rem_euclid(TAU) - PI).abs()
}

/// Fraction of the Husimi weight in cells whose sample points fall inside the
/// square of side `side` centred at `center`, with periodic wrapping.
pub fn box_integral(grid: &HusimiGrid, center: (f64, f64), side: f64) -> Result<f64> {
    if !(side > 0.0) {
        return Err(Error::NonPositiveSide(side));
    }
    let half = 0.5 * side;
    let theta_in: Vec<bool> = (0..grid.m_theta)
        .map(|j| circular_distance(grid.theta(j), center.0) <= half)
        .collect();
    let mut inside = 0.0;
    let mut total = 0.0;
    for i in 0..grid.m_p {
        let p_in = circular_distance(grid.p(i), center.1) <= half;
        for (j, &h) in grid.row(i).iter().enumerate() {
            total += h;
            if p_in && theta_in[j] {
                inside += h;
            }
        }
    }
    Ok(inside / total)
}

/// How the "spin up" and "spin down" detector readouts are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConditionalMode {
    /// One run from the given qubit state; each spin component of the coupled
    /// state is normalised and analysed separately.
    #[default]
    SpinComponent,
    /// Two runs started from `|0⟩` and `|1⟩`; the detector's reduced state is
    /// analysed in each.
    SeparateRuns,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WdRecord {
    pub t: usize,
    pub up: f64,
    pub down: f64,
}

/// Box integral `W_D` of the conditional Husimi distributions for
/// `t = 0, …, t_max`. A component with zero weight yields NaN.
pub fn wd_series(
    params: &SimParams,
    qubit_init: (Complex64, Complex64),
    detector_init: (f64, f64),
    grid: (usize, usize),
    center: (f64, f64),
    side: f64,
    mode: ConditionalMode,
) -> Result<Vec<WdRecord>> {
    check_grid(grid)?;
    check_qubit(qubit_init.0, qubit_init.1)?;
    if !(side > 0.0) {
        return Err(Error::NonPositiveSide(side));
    }
    let mut plan = HusimiPlan::new(params.n_levels(), params.hbar(), grid);
    let mut map = FloquetMap::new(params);
    let cells = grid.0 * grid.1;
    let mut buf = vec![0.0; cells];
    let mut measure = |plan: &mut HusimiPlan, parts: &[&[Complex64]]| -> Result<f64> {
        buf.iter_mut().for_each(|x| *x = 0.0);
        for part in parts {
            plan.accumulate(part, &mut buf);
        }
        box_integral(&plan.grid(buf.clone()), center, side)
    };

    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(params.t_max() + 1);
    match mode {
        ConditionalMode::SpinComponent => {
            let mut state = initial_state(params, qubit_init, detector_init)?;
            for t in 0..=params.t_max() {
                if t > 0 {
                    map.step(&mut state);
                }
                let up = measure(&mut plan, &[&state.up])?;
                let down = measure(&mut plan, &[&state.down])?;
                out.push(WdRecord { t, up, down });
            }
        }
        ConditionalMode::SeparateRuns => {
            let mut up_run = initial_state(params, (one, zero), detector_init)?;
            let mut down_run = initial_state(params, (zero, one), detector_init)?;
            for t in 0..=params.t_max() {
                if t > 0 {
                    map.step(&mut up_run);
                    map.step(&mut down_run);
                }
                let up = measure(&mut plan, &[&up_run.up, &up_run.down])?;
                let down = measure(&mut plan, &[&down_run.up, &down_run.down])?;
                out.push(WdRecord { t, up, down });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::init_gaussian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> SimParams {
        SimParams::new(4.5, 0.8, 0.1, 512, 20).unwrap()
    }

    #[test]
    fn coherent_state_peaks_at_its_centre() {
        let p = params();
        let psi = init_gaussian(PI, 0.0, &p).unwrap();
        let h = husimi(&psi, (128, 128), &p).unwrap();
        assert_eq!(h.argmax(), (64, 64));
        assert!((h.get(64, 64) - 1.0).abs() < 1e-10);
        assert!((h.integral() - 1.0).abs() < 1e-6, "{}", h.integral());
    }

    #[test]
    fn off_centre_packet_is_located() {
        let p = params();
        let h = husimi(&init_gaussian(TAU * 0.25, PI * 0.5, &p).unwrap(), (64, 64), &p).unwrap();
        assert_eq!(h.argmax(), (48, 16));
    }

    #[test]
    fn packet_near_momentum_edge_wraps() {
        let p = params();
        let h = husimi(&init_gaussian(1.0, -PI, &p).unwrap(), (64, 64), &p).unwrap();
        assert_eq!(h.argmax().0, 0);
        assert!((h.integral() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn random_states_give_nonnegative_normalised_husimi() {
        let p = SimParams::new(1.0, 0.0, 0.0, 64, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let mut psi = DetectorState::from_angle(
                (0..64)
                    .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect(),
            );
            psi.normalize();
            let h = husimi(&psi, (16, 16), &p).unwrap();
            assert!(h.values.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let p = params();
        let psi = init_gaussian(PI, 0.0, &p).unwrap();
        assert!(matches!(husimi(&psi, (15, 128), &p), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn full_torus_box_holds_everything() {
        let p = params();
        let h = husimi(&init_gaussian(2.0, 1.0, &p).unwrap(), (128, 128), &p).unwrap();
        assert!((box_integral(&h, (PI, 0.0), TAU).unwrap() - 1.0).abs() < 1e-12);
        assert!(box_integral(&h, (PI, 0.0), 0.0).is_err());
    }

    #[test]
    fn initial_box_weight_matches_cell_count() {
        // side 0.253 on a 128 grid covers the 5 × 5 sample points within
        // ±2Δ of (π, 0); for a coherent state H factorises into Gaussians
        // exp(-(Δθ² + Δp²)/2ℏ), which gives an independent check
        let p = params();
        let h = husimi(&init_gaussian(PI, 0.0, &p).unwrap(), (128, 128), &p).unwrap();
        let step = TAU / 128.0;
        let profile = |i: i64| (-(i as f64 * step).powi(2) / (2.0 * p.hbar())).exp();
        let line: f64 = (-64..64).map(profile).sum();
        let inner: f64 = (-2..=2).map(profile).sum();
        let expected = (inner / line).powi(2);
        let got = box_integral(&h, (PI, 0.0), 0.253).unwrap();
        assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
    }

    #[test]
    fn strong_coupling_spreads_the_up_component() {
        let p = params();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut state = initial_state(&p, (Complex64::new(r, 0.0), Complex64::new(r, 0.0)), (PI, 0.0)).unwrap();
        let mut map = FloquetMap::new(&p);
        for _ in 0..20 {
            map.step(&mut state);
        }
        let norm = |v: &[Complex64]| {
            let mut s = DetectorState::from_angle(v.to_vec());
            s.normalize();
            s
        };
        let up = husimi(&norm(&state.up), (128, 128), &p).unwrap();
        let down = husimi(&norm(&state.down), (128, 128), &p).unwrap();
        assert!(up.participation() >= 4.0 * down.participation());
    }

    #[test]
    fn modes_agree_without_qubit_rotation() {
        // with δ = 0 each spin component evolves as an independent rotator, so
        // normalised components and separate σ_z runs coincide
        let p = SimParams::from_epsilon(8.0, 0.4, 0.0, 512, 4).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let q = (Complex64::new(r, 0.0), Complex64::new(r, 0.0));
        let a = wd_series(&p, q, (PI, 0.0), (64, 64), (PI, 0.0), 0.253, ConditionalMode::SpinComponent).unwrap();
        let b = wd_series(&p, q, (PI, 0.0), (64, 64), (PI, 0.0), 0.253, ConditionalMode::SeparateRuns).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.up - y.up).abs() < 1e-12 && (x.down - y.down).abs() < 1e-12);
        }
    }
}
