use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::analysis::fit::{fit_damped_sine, fit_exp_decay, DecayFit};
use crate::coupled::evolve;
use crate::qstate::SimParams;
use crate::{Error, Result};

/// Parameter varied across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// ε = ε_c/ℏ, with ℏ held fixed.
    Epsilon,
    EpsilonC,
    Delta,
    Kick,
    /// N_d, keeping ε fixed.
    NLevels,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Epsilon => "epsilon",
            SweepParam::EpsilonC => "epsilon_c",
            SweepParam::Delta => "delta",
            SweepParam::Kick => "K",
            SweepParam::NLevels => "n_levels",
        }
    }

    /// `template` with this parameter set to `value`.
    pub fn apply(&self, template: &SimParams, value: f64) -> Result<SimParams> {
        match self {
            SweepParam::Epsilon => template.with_epsilon(value),
            SweepParam::EpsilonC => template.with_epsilon_c(value),
            SweepParam::Delta => template.with_delta(value),
            SweepParam::Kick => template.with_kick(value),
            SweepParam::NLevels => {
                if value.fract() != 0.0 || value < 2.0 {
                    return Err(Error::InvalidParameter {
                        name: "n_levels",
                        reason: format!("{value} is not an integer dimension"),
                    });
                }
                template.with_n_levels(value as usize)
            }
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epsilon" => Ok(SweepParam::Epsilon),
            "epsilon_c" => Ok(SweepParam::EpsilonC),
            "delta" => Ok(SweepParam::Delta),
            "K" | "kick" => Ok(SweepParam::Kick),
            "n_levels" => Ok(SweepParam::NLevels),
            other => Err(Error::InvalidParameter {
                name: "vary",
                reason: format!("unknown sweep parameter `{other}`"),
            }),
        }
    }
}

/// Everything a sweep needs besides the varied values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub template: SimParams,
    pub qubit_init: (Complex64, Complex64),
    pub detector_init: (f64, f64),
    pub vary: SweepParam,
}

/// One sweep point. Failed fits leave NaN in the rate and a note in `flag`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma1_fit: Option<DecayFit>,
    pub gamma2_fit: Option<DecayFit>,
    pub flag: String,
}

fn run_point(spec: &SweepSpec, value: f64) -> SweepRow {
    let mut row = SweepRow {
        value,
        gamma1: f64::NAN,
        gamma2: f64::NAN,
        gamma1_fit: None,
        gamma2_fit: None,
        flag: String::new(),
    };
    let params = match spec.vary.apply(&spec.template, value) {
        Ok(p) => p,
        Err(e) => {
            row.flag = format!("invalid: {e}");
            return row;
        }
    };
    let traj = match evolve(&params, spec.qubit_init, spec.detector_init) {
        Ok(t) => t,
        Err(e) => {
            row.flag = format!("invalid: {e}");
            return row;
        }
    };
    let mut notes = Vec::new();
    match fit_damped_sine(&traj.rho11(), 2.0 * params.delta()) {
        Ok(f) => {
            row.gamma1 = f.rate;
            row.gamma1_fit = Some(f);
            if !f.converged {
                notes.push("gamma1_unconverged".to_string());
            }
        }
        Err(e) => notes.push(format!("gamma1_failed: {e}")),
    }
    match fit_exp_decay(&traj.abs_rho01()) {
        Ok(f) => {
            row.gamma2 = f.rate;
            row.gamma2_fit = Some(f);
        }
        Err(e) => notes.push(format!("gamma2_failed: {e}")),
    }
    row.flag = if notes.is_empty() { "ok".into() } else { notes.join("; ") };
    row
}

/// Runs [`evolve`] and both fits for each value on `threads` workers.
///
/// Rows come back in input order and do not depend on the thread count.
pub fn sweep(spec: &SweepSpec, values: &[f64], threads: usize) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::InvalidParameter {
            name: "values",
            reason: "sweep needs at least one value".into(),
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter {
            name: "threads",
            reason: e.to_string(),
        })?;
    Ok(pool.install(|| values.par_iter().map(|&v| run_point(spec, v)).collect()))
}

/// Least-squares slope of `y = A x` through the origin, `Σxy / Σx²`.
/// Pairs with a non-finite `y` are skipped.
pub fn slope_through_origin(x: &[f64], y: &[f64]) -> Option<f64> {
    let (sxy, sxx) = x
        .iter()
        .zip(y)
        .filter(|(_, b)| b.is_finite())
        .fold((0.0, 0.0), |(sxy, sxx), (a, b)| (sxy + a * b, sxx + a * a));
    (sxx > 0.0).then(|| sxy / sxx)
}
