use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use qkr_core::analysis::SweepParam;
use qkr_core::coupled::{ConditionalMode, DEFAULT_HUSIMI_GRID};
use qkr_core::detector::{DEFAULT_LYAPUNOV_ORBITS, DEFAULT_LYAPUNOV_STEPS};
use qkr_core::qstate::SimParams;
use serde::Deserialize;

use crate::error::CliError;

/// Largest `| ‖ψ‖ - 1 |` that is silently repaired by renormalising.
pub const QUBIT_RENORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Evolve,
    Sweep,
    Husimi,
    Wd,
    Lyapunov,
    Channel,
    Fidelity,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Evolve => "evolve",
            Experiment::Sweep => "sweep",
            Experiment::Husimi => "husimi",
            Experiment::Wd => "wd",
            Experiment::Lyapunov => "lyapunov",
            Experiment::Channel => "channel",
            Experiment::Fidelity => "fidelity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    SpinComponent,
    SeparateRuns,
}

/// Run configuration as it appears on disk. Every key is at the top level.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(rename = "K")]
    pub kick: f64,
    pub epsilon_c: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: f64,
    pub hbar: Option<f64>,
    pub n_levels: usize,
    pub t_max: usize,
    /// `[Re α, Im α, Re β, Im β]`.
    pub qubit_init: [f64; 4],
    /// `[θ0, p0]`.
    pub detector_init: [f64; 2],
    pub experiment: Option<Experiment>,
    pub output: Option<PathBuf>,
    /// `[M_θ, M_p]`.
    pub grid: Option<[usize; 2]>,
    /// `[θ, p]` centre of the readout box.
    pub box_center: Option<[f64; 2]>,
    pub box_side: Option<f64>,
    pub mode: Option<ModeName>,
    pub husimi_time: Option<usize>,
    pub vary: Option<String>,
    pub values: Option<Vec<f64>>,
    /// Extra detector dimensions for which the sweep is repeated.
    pub sweep_n_levels: Option<Vec<usize>>,
    pub lyapunov_orbits: Option<usize>,
    pub lyapunov_steps: Option<usize>,
    pub seed: Option<u64>,
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: SimParams,
    pub qubit_init: (Complex64, Complex64),
    pub detector_init: (f64, f64),
    pub experiment: Option<Experiment>,
    pub output: Option<PathBuf>,
    pub grid: (usize, usize),
    pub box_center: (f64, f64),
    pub box_side: Option<f64>,
    pub mode: ConditionalMode,
    pub husimi_time: usize,
    pub vary: Option<SweepParam>,
    pub values: Vec<f64>,
    pub sweep_n_levels: Vec<usize>,
    pub lyapunov_orbits: usize,
    pub lyapunov_steps: usize,
    pub seed: u64,
    /// SHA-256 of the raw config bytes, lower-case hex.
    pub sha: String,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn build_params(raw: &RawConfig) -> Result<SimParams, CliError> {
    let epsilon_c = match (raw.epsilon_c, raw.epsilon) {
        (Some(_), Some(_)) => return Err(invalid("give either `epsilon_c` or `epsilon`, not both")),
        (None, None) => return Err(invalid("missing `epsilon_c` (or `epsilon`)")),
        (Some(ec), None) => ec,
        (None, Some(e)) => e * raw.hbar.unwrap_or(std::f64::consts::TAU / raw.n_levels.max(1) as f64),
    };
    let params = match raw.hbar {
        Some(h) => SimParams::with_hbar(raw.kick, epsilon_c, raw.delta, h, raw.n_levels, raw.t_max),
        None => SimParams::new(raw.kick, epsilon_c, raw.delta, raw.n_levels, raw.t_max),
    };
    params.map_err(|e| invalid(e.to_string()))
}

fn normalise_qubit(q: [f64; 4]) -> Result<(Complex64, Complex64), CliError> {
    if q.iter().any(|v| !v.is_finite()) {
        return Err(invalid("`qubit_init` has non-finite entries"));
    }
    let alpha = Complex64::new(q[0], q[1]);
    let beta = Complex64::new(q[2], q[3]);
    let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
    let off = (norm - 1.0).abs();
    if off >= QUBIT_RENORM_TOL {
        return Err(invalid(format!("`qubit_init` has norm {norm}, expected 1")));
    }
    if off > 0.0 {
        log::warn!("qubit_init norm is {norm}; renormalising");
    }
    Ok((alpha / norm, beta / norm))
}

impl RunConfig {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CliError> {
        let raw: RawConfig = serde_json::from_slice(bytes).map_err(|e| invalid(e.to_string()))?;
        let params = build_params(&raw)?;
        let qubit_init = normalise_qubit(raw.qubit_init)?;
        let [theta0, p0] = raw.detector_init;
        if !qkr_core::qstate::on_torus(theta0, p0) {
            return Err(invalid(format!("`detector_init` ({theta0}, {p0}) is off the torus")));
        }
        let grid = raw.grid.map_or(DEFAULT_HUSIMI_GRID, |[m_theta, m_p]| (m_theta, m_p));
        let vary = raw
            .vary
            .as_deref()
            .map(str::parse::<SweepParam>)
            .transpose()
            .map_err(|e| invalid(e.to_string()))?;
        let husimi_time = raw.husimi_time.unwrap_or(raw.t_max);
        if husimi_time > raw.t_max {
            return Err(invalid(format!("`husimi_time` {husimi_time} exceeds `t_max` {}", raw.t_max)));
        }
        if let Some(side) = raw.box_side {
            if !(side > 0.0 && side.is_finite()) {
                return Err(invalid(format!("`box_side` must be positive, got {side}")));
            }
        }
        let mode = match raw.mode {
            None | Some(ModeName::SpinComponent) => ConditionalMode::SpinComponent,
            Some(ModeName::SeparateRuns) => ConditionalMode::SeparateRuns,
        };
        Ok(Self {
            params,
            qubit_init,
            detector_init: (theta0, p0),
            experiment: raw.experiment,
            output: raw.output,
            grid,
            box_center: raw.box_center.map_or((theta0, p0), |[t, p]| (t, p)),
            box_side: raw.box_side,
            mode,
            husimi_time,
            vary,
            values: raw.values.unwrap_or_default(),
            sweep_n_levels: raw.sweep_n_levels.unwrap_or_default(),
            lyapunov_orbits: raw.lyapunov_orbits.unwrap_or(DEFAULT_LYAPUNOV_ORBITS),
            lyapunov_steps: raw.lyapunov_steps.unwrap_or(DEFAULT_LYAPUNOV_STEPS),
            seed: raw.seed.unwrap_or(0),
            sha: crate::output::sha256_hex(bytes),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    /// `--out` wins over the config's `output` key.
    pub fn output_path(&self, flag: Option<&Path>) -> Result<PathBuf, CliError> {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output.clone())
            .ok_or_else(|| invalid("no output path: pass --out or set `output`"))
    }

    pub fn require_box_side(&self) -> Result<f64, CliError> {
        self.box_side.ok_or_else(|| invalid("`box_side` is required for this experiment"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"K": 8.0, "epsilon_c": 0.001, "delta": 0.2, "n_levels": 256,
        "t_max": 10, "qubit_init": [0.4472135954999579, 0.0, 0.8944271909999159, 0.0],
        "detector_init": [3.141592653589793, 0.0]}"#;

    fn with(extra: &str) -> String {
        format!("{}, {extra}}}", BASE.trim_end().trim_end_matches('}'))
    }

    #[test]
    fn minimal_config_parses() {
        let cfg = RunConfig::from_bytes(BASE.as_bytes()).unwrap();
        assert_eq!(cfg.params.n_levels(), 256);
        assert_eq!(cfg.grid, DEFAULT_HUSIMI_GRID);
        assert_eq!(cfg.husimi_time, 10);
        assert_eq!(cfg.sha.len(), 64);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_bytes(with(r#""epsilonc": 1.0"#).as_bytes()).unwrap_err();
        assert!(err.to_string().contains("epsilonc"));
    }

    #[test]
    fn epsilon_and_epsilon_c_are_exclusive() {
        assert!(RunConfig::from_bytes(with(r#""epsilon": 1.0"#).as_bytes()).is_err());
        let only_eps = BASE.replace(r#""epsilon_c": 0.001"#, r#""epsilon": 0.5"#);
        let cfg = RunConfig::from_bytes(only_eps.as_bytes()).unwrap();
        assert!((cfg.params.epsilon() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn qubit_is_renormalised_only_when_nearly_normalised() {
        let near = BASE.replace("0.8944271909999159", "0.8944275");
        let cfg = RunConfig::from_bytes(near.as_bytes()).unwrap();
        let (a, b) = cfg.qubit_init;
        assert!((a.norm_sqr() + b.norm_sqr() - 1.0).abs() < 1e-14);
        let far = BASE.replace("0.8944271909999159", "0.9");
        assert!(RunConfig::from_bytes(far.as_bytes()).is_err());
    }

    #[test]
    fn bad_physics_is_a_config_error() {
        let bad = BASE.replace(r#""n_levels": 256"#, r#""n_levels": 300"#);
        assert!(matches!(RunConfig::from_bytes(bad.as_bytes()), Err(CliError::Config(_))));
        let off = BASE.replace("3.141592653589793, 0.0", "7.0, 0.0");
        assert!(RunConfig::from_bytes(off.as_bytes()).is_err());
        assert!(RunConfig::from_bytes(with(r#""vary": "hbar""#).as_bytes()).is_err());
    }
}
