use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix4, Vector4};
use thiserror::Error;

pub const MIN_EXP_LEN: usize = 20;
pub const MIN_SINE_LEN: usize = 50;
pub const MAX_ITERATIONS: usize = 200;
const REL_TOL: f64 = 1e-10;
const MIN_WINDOW: usize = 5;
const PHASE_GRID: usize = 64;
const SLOW_SEED: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("series has {len} points, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("non-decaying series: {0}")]
    NonDecaying(String),
    #[error("empty averaging window [{lo}, {hi}] for a series of length {len}")]
    EmptyWindow { lo: usize, hi: usize, len: usize },
    #[error("series contains non-finite values")]
    NonFinite,
}

/// Result of an exponential or damped-sinusoid fit.
///
/// For [`fit_exp_decay`] the model is `amplitude · e^{-rate·t}` and
/// `frequency = phase = 0`; for [`fit_damped_sine`] it is
/// `amplitude · sin(frequency·t + phase) · e^{-rate·t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
    /// Inclusive `(t_lo, t_hi)` of the samples the fit used.
    pub window: (usize, usize),
    /// RMS deviation of the fitted quantity (log values for the exponential
    /// fit, raw values for the sine fit).
    pub rms_residual: f64,
    pub converged: bool,
}

fn check(series: &[f64], min: usize) -> Result<(), FitError> {
    if series.len() < min {
        return Err(FitError::TooShort { len: series.len(), min });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    Ok(())
}

fn local_maxima(y: &[f64], hi: usize) -> Vec<usize> {
    let last = hi.min(y.len().saturating_sub(2));
    (1..=last).filter(|&t| y[t] >= y[t - 1] && y[t] >= y[t + 1]).collect()
}

/// Ordinary least squares `y = m t + c`; returns `(m, c, rms)`.
fn linear_fit(t: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in t.iter().zip(y) {
        sxy += (a - mt) * (b - my);
        sxx += (a - mt) * (a - mt);
    }
    let m = sxy / sxx;
    let c = my - m * mt;
    let rms = (t.iter().zip(y).map(|(a, b)| (b - m * a - c).powi(2)).sum::<f64>() / n).sqrt();
    (m, c, rms)
}

/// Exponential decay rate of the envelope of a non-negative series such as
/// `|ρ₀₁(t)|`.
///
/// The residual floor is the mean of the final quarter; the threshold is
/// three times that floor. The window runs from `t = 1` to the first local
/// maximum below threshold (to the end if there is none), and the log of the
/// local maxima above threshold is fitted by least squares. With fewer than
/// five such maxima the running suffix maximum over the window is fitted
/// instead.
pub fn fit_exp_decay(series: &[f64]) -> Result<DecayFit, FitError> {
    check(series, MIN_EXP_LEN)?;
    let n = series.len();
    let floor = series[3 * n / 4..].iter().sum::<f64>() / (n - 3 * n / 4) as f64;
    let thr = (3.0 * floor).max(1e-12);

    let maxima = local_maxima(series, n - 2);
    let hi = maxima.iter().copied().find(|&t| series[t] < thr).unwrap_or(n - 1);
    if hi < MIN_WINDOW {
        return Err(FitError::NonDecaying(format!("series falls below threshold {thr:e} at t = {hi}")));
    }

    let peaks: Vec<usize> = maxima.into_iter().filter(|&t| t <= hi && series[t] >= thr).collect();
    let (t, ly): (Vec<f64>, Vec<f64>) = if peaks.len() >= MIN_WINDOW {
        peaks.iter().map(|&t| (t as f64, series[t].ln())).unzip()
    } else {
        let mut env = series[1..=hi].to_vec();
        for i in (0..env.len() - 1).rev() {
            env[i] = env[i].max(env[i + 1]);
        }
        if env.iter().any(|&v| v <= 0.0) {
            return Err(FitError::NonDecaying("envelope reaches zero".into()));
        }
        env.iter().enumerate().map(|(i, v)| ((i + 1) as f64, v.ln())).unzip()
    };

    let (slope, intercept, rms) = linear_fit(&t, &ly);
    if !(slope < 0.0) {
        return Err(FitError::NonDecaying(format!("fitted log slope {slope:e} is not negative")));
    }
    Ok(DecayFit {
        rate: -slope,
        amplitude: intercept.exp(),
        frequency: 0.0,
        phase: 0.0,
        window: (1, hi),
        rms_residual: rms,
        converged: true,
    })
}

/// Angular frequency from the mean spacing of sign changes about the mean.
pub fn estimate_frequency(series: &[f64]) -> Option<f64> {
    if series.len() < 3 {
        return None;
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let crossings: Vec<f64> = series
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[0] - mean) * (w[1] - mean) < 0.0 || (w[0] == mean && w[1] != mean))
        .map(|(i, w)| {
            let (a, b) = (w[0] - mean, w[1] - mean);
            i as f64 + a / (a - b)
        })
        .collect();
    if crossings.len() < 2 {
        return None;
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    Some(PI * (crossings.len() - 1) as f64 / span)
}

struct SineModel<'a> {
    t: &'a [f64],
    y: &'a [f64],
}

impl SineModel<'_> {
    fn sse(&self, p: &Vector4<f64>) -> f64 {
        self.t
            .iter()
            .zip(self.y)
            .map(|(&t, &y)| {
                let r = y - p[0] * (p[1] * t + p[2]).sin() * (-p[3] * t).exp();
                r * r
            })
            .sum()
    }

    /// Normal equations `(JᵀJ, Jᵀr)` at `p`.
    fn normal(&self, p: &Vector4<f64>) -> (Matrix4<f64>, Vector4<f64>) {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (&t, &y) in self.t.iter().zip(self.y) {
            let (s, c) = (p[1] * t + p[2]).sin_cos();
            let e = (-p[3] * t).exp();
            let row = Vector4::new(s * e, p[0] * t * c * e, p[0] * c * e, -p[0] * t * s * e);
            let r = y - p[0] * s * e;
            jtj += row * row.transpose();
            jtr += row * r;
        }
        (jtj, jtr)
    }

    /// Least-squares amplitude for fixed `(b, φ, g)`.
    fn best_amplitude(&self, b: f64, phi: f64, g: f64) -> f64 {
        let (mut sy, mut ss) = (0.0, 0.0);
        for (&t, &y) in self.t.iter().zip(self.y) {
            let s = (b * t + phi).sin() * (-g * t).exp();
            sy += s * y;
            ss += s * s;
        }
        if ss > 0.0 {
            sy / ss
        } else {
            0.0
        }
    }
}

fn solve(jtj: &Matrix4<f64>, jtr: &Vector4<f64>) -> Option<Vector4<f64>> {
    if let Some(ch) = jtj.cholesky() {
        return Some(ch.solve(jtr));
    }
    let scale = jtj.diagonal().max().max(1e-300);
    let mut lambda = 1e-12 * scale;
    for _ in 0..12 {
        let mut damped = *jtj;
        for i in 0..4 {
            damped[(i, i)] += lambda;
        }
        if let Some(ch) = damped.cholesky() {
            return Some(ch.solve(jtr));
        }
        lambda *= 100.0;
    }
    None
}

/// Best grid phase with the least-squares amplitude for fixed `(b, g)`.
fn phase_seed(model: &SineModel, b: f64, g: f64) -> Vector4<f64> {
    let mut best = Vector4::zeros();
    let mut best_sse = f64::INFINITY;
    for k in 0..PHASE_GRID {
        let phi = TAU * k as f64 / PHASE_GRID as f64;
        let p = Vector4::new(model.best_amplitude(b, phi, g), b, phi, g);
        let sse = model.sse(&p);
        if sse < best_sse {
            best = p;
            best_sse = sse;
        }
    }
    best
}

/// Gauss-Newton with step halving from `p0`; returns `(p, sse, converged)`.
fn gauss_newton(model: &SineModel, p0: Vector4<f64>) -> (Vector4<f64>, f64, bool) {
    let mut p = p0;
    let mut sse = model.sse(&p);
    for _ in 0..MAX_ITERATIONS {
        if sse <= f64::MIN_POSITIVE {
            return (p, sse, true);
        }
        let (jtj, jtr) = model.normal(&p);
        let Some(delta) = solve(&jtj, &jtr) else {
            return (p, sse, false);
        };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial = p + delta * step;
            let trial_sse = model.sse(&trial);
            if trial_sse.is_finite() && trial_sse <= sse {
                accepted = Some((trial, trial_sse));
                break;
            }
            step *= 0.5;
        }
        // no descent along the Gauss-Newton direction: a numerical minimum
        let Some((next, next_sse)) = accepted else {
            return (p, sse, true);
        };
        let change = (sse - next_sse) / sse;
        p = next;
        sse = next_sse;
        if change < REL_TOL {
            return polish(model, p, sse);
        }
    }
    (p, sse, false)
}

/// A few full Gauss-Newton steps past the stopping rule; near the minimum
/// each roughly doubles the number of correct parameter digits.
fn polish(model: &SineModel, mut p: Vector4<f64>, mut sse: f64) -> (Vector4<f64>, f64, bool) {
    for _ in 0..3 {
        let (jtj, jtr) = model.normal(&p);
        let Some(delta) = solve(&jtj, &jtr) else {
            break;
        };
        let trial = p + delta;
        let trial_sse = model.sse(&trial);
        if !(trial_sse <= sse * (1.0 + 1e-12)) {
            break;
        }
        p = trial;
        sse = trial_sse;
    }
    (p, sse, true)
}

/// Fits `½ + a sin(bt + φ) e^{-Γt}` to a population series such as
/// `ρ₁₁(t)` over `t ∈ [1, n-1]`; `rate` holds Γ.
///
/// `frequency_hint` seeds `b` (the Rabi frequency `2δ` when known). The decay
/// seed comes from an envelope fit of `|ρ₁₁ - ½|` and the phase seed from a
/// grid search. Gauss-Newton iterations with step halving stop when the
/// relative change in the residual sum falls below 1e-10; if that does not
/// happen within the iteration limit the best parameters are returned with
/// `converged = false`.
pub fn fit_damped_sine(series: &[f64], frequency_hint: f64) -> Result<DecayFit, FitError> {
    check(series, MIN_SINE_LEN)?;
    let n = series.len();
    let t: Vec<f64> = (1..n).map(|t| t as f64).collect();
    let y: Vec<f64> = series[1..].iter().map(|v| v - 0.5).collect();
    let model = SineModel { t: &t, y: &y };

    let deviation: Vec<f64> = series.iter().map(|v| (v - 0.5).abs()).collect();
    let g0 = fit_exp_decay(&deviation).map(|f| f.rate).unwrap_or(0.0);
    let b0 = if frequency_hint.is_finite() && frequency_hint > 0.0 {
        frequency_hint
    } else {
        estimate_frequency(&y).unwrap_or(0.0)
    };
    // the Rabi seed, plus a near-zero frequency seed for overdamped series
    // where ρ₁₁ relaxes without oscillating
    let mut best: Option<(Vector4<f64>, f64, bool)> = None;
    for b_seed in [b0, SLOW_SEED * b0.max(1e-3)] {
        let seed = phase_seed(&model, b_seed, g0);
        let (p, sse, converged) = gauss_newton(&model, seed);
        let better = match best {
            None => true,
            Some((_, best_sse, best_conv)) => (converged && !best_conv) || (converged == best_conv && sse < best_sse),
        };
        if better {
            best = Some((p, sse, converged));
        }
    }
    let (p, sse, converged) = best.expect("at least one seed");

    let (mut a, mut b, mut phi, g) = (p[0], p[1], p[2], p[3]);
    if b < 0.0 {
        b = -b;
        phi = PI - phi;
    }
    if a < 0.0 {
        a = -a;
        phi += PI;
    }
    phi = phi.rem_euclid(TAU);
    Ok(DecayFit {
        rate: g,
        amplitude: a,
        frequency: b,
        phase: phi,
        window: (1, n - 1),
        rms_residual: (sse / t.len() as f64).sqrt(),
        converged,
    })
}

/// Mean of `series[t_lo..=t_hi]`.
pub fn residual_level(series: &[f64], t_lo: usize, t_hi: usize) -> Result<f64, FitError> {
    if t_lo > t_hi || t_hi >= series.len() {
        return Err(FitError::EmptyWindow {
            lo: t_lo,
            hi: t_hi,
            len: series.len(),
        });
    }
    let window = &series[t_lo..=t_hi];
    Ok(window.iter().sum::<f64>() / window.len() as f64)
}
