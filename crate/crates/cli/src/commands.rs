use std::path::Path;

use anyhow::{anyhow, Context};
use num_complex::Complex64;
use qkr_core::analysis::{
    estimate_frequency, fit_damped_sine, fit_exp_decay, slope_through_origin, sweep, DecayFit, SweepParam, SweepRow,
    SweepSpec,
};
use qkr_core::channel::{continuous_solution, map_bloch_series};
use qkr_core::coupled::{
    evolve, fidelity_series, husimi, husimi_reduced, initial_state, wd_series, ConditionalMode, FloquetMap,
    HusimiGrid,
};
use qkr_core::detector::lyapunov;
use qkr_core::qstate::{BlochVector, CoupledState, DetectorState, SimParams};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{num, sibling, stem, write_json, Csv};

type CmdResult = Result<(), CliError>;

fn opt(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

fn mode_name(mode: ConditionalMode) -> &'static str {
    match mode {
        ConditionalMode::SpinComponent => "spin_component",
        ConditionalMode::SeparateRuns => "separate_runs",
    }
}

pub fn evolve_cmd(cfg: &RunConfig, out: &Path) -> CmdResult {
    let traj = evolve(&cfg.params, cfg.qubit_init, cfg.detector_init)?;
    let mut csv = Csv::new(
        &cfg.sha,
        &["t", "re_rho01", "im_rho01", "abs_rho01", "rho00", "rho11", "p2", "purity"],
    );
    for r in &traj.records {
        csv.row(&[
            r.t.to_string(),
            num(r.rho01.re),
            num(r.rho01.im),
            num(r.rho01.norm()),
            num(r.rho00),
            num(r.rho11),
            num(r.p2),
            num(r.purity),
        ]);
    }
    csv.write(out)?;
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn sweep_csv(sha: &str, rows: &[SweepRow]) -> Csv {
    let mut csv = Csv::new(sha, &["value", "gamma1", "gamma2", "flag"]);
    for r in rows {
        csv.row(&[num(r.value), num(r.gamma1), num(r.gamma2), csv_field(&r.flag)]);
    }
    csv
}

/// `ε²` for each swept value, when the sweep varies the coupling.
fn epsilon_squared(vary: SweepParam, params: &SimParams, values: &[f64]) -> Option<Vec<f64>> {
    match vary {
        SweepParam::Epsilon => Some(values.iter().map(|v| v * v).collect()),
        SweepParam::EpsilonC => Some(values.iter().map(|v| (v / params.hbar()).powi(2)).collect()),
        _ => None,
    }
}

pub fn sweep_cmd(cfg: &RunConfig, out: &Path, threads: usize) -> CmdResult {
    let vary = cfg.vary.ok_or_else(|| CliError::Config("`vary` is required for sweep".into()))?;
    if cfg.values.is_empty() {
        return Err(CliError::Config("`values` must list at least one value".into()));
    }
    let mut dims = vec![cfg.params.n_levels()];
    for &n in &cfg.sweep_n_levels {
        if !dims.contains(&n) {
            dims.push(n);
        }
    }
    let base = stem(out);
    let mut per_dim = Vec::new();
    let (mut pooled_x, mut pooled_g1, mut pooled_g2) = (Vec::new(), Vec::new(), Vec::new());
    let mut fit_trouble = false;
    let mut invalid = false;
    for (k, &n) in dims.iter().enumerate() {
        let template = cfg
            .params
            .with_n_levels(n)
            .map_err(|e| CliError::Config(format!("`sweep_n_levels` entry {n}: {e}")))?;
        let spec = SweepSpec {
            template,
            qubit_init: cfg.qubit_init,
            detector_init: cfg.detector_init,
            vary,
        };
        let rows = sweep(&spec, &cfg.values, threads)?;
        for r in &rows {
            invalid |= r.flag.starts_with("invalid");
            fit_trouble |= r.flag.contains("gamma");
        }
        let path = if k == 0 { out.to_path_buf() } else { sibling(&base, &format!("_n{n}.csv")) };
        sweep_csv(&cfg.sha, &rows).write(&path)?;
        if let Some(x) = epsilon_squared(vary, &template, &cfg.values) {
            let g1: Vec<f64> = rows.iter().map(|r| r.gamma1).collect();
            let g2: Vec<f64> = rows.iter().map(|r| r.gamma2).collect();
            per_dim.push(json!({
                "n_levels": n,
                "hbar": template.hbar(),
                "file": path.file_name().map(|f| f.to_string_lossy().into_owned()),
                "slope_gamma1": slope_through_origin(&x, &g1),
                "slope_gamma2": slope_through_origin(&x, &g2),
            }));
            pooled_x.extend(x);
            pooled_g1.extend(g1);
            pooled_g2.extend(g2);
        }
    }
    if !per_dim.is_empty() {
        write_json(
            &sibling(&base, "_slopes.json"),
            &cfg.sha,
            json!({
                "vary": vary.name(),
                "per_n_levels": per_dim,
                "pooled": {
                    "slope_gamma1": slope_through_origin(&pooled_x, &pooled_g1),
                    "slope_gamma2": slope_through_origin(&pooled_x, &pooled_g2),
                },
            }),
        )?;
    }
    if fit_trouble {
        return Err(CliError::FitNotConverged("one or more sweep fits failed or did not converge".into()));
    }
    if invalid {
        return Err(CliError::Config("one or more sweep values are invalid".into()));
    }
    Ok(())
}

fn state_at(params: &SimParams, qubit: (Complex64, Complex64), detector: (f64, f64), t: usize) -> anyhow::Result<CoupledState> {
    let mut state = initial_state(params, qubit, detector)?;
    let mut map = FloquetMap::new(params);
    for _ in 0..t {
        map.step(&mut state);
    }
    Ok(state)
}

/// Husimi distribution of one spin component renormalised to unit weight.
/// Returns the distribution and the component's weight.
fn conditional(component: &[Complex64], grid: (usize, usize), params: &SimParams) -> anyhow::Result<(HusimiGrid, f64)> {
    let mut psi = DetectorState::from_angle(component.to_vec());
    let weight = psi.norm_sqr();
    if weight == 0.0 {
        return Err(anyhow!("spin component has zero weight"));
    }
    psi.normalize();
    Ok((husimi(&psi, grid, params)?, weight))
}

fn husimi_csv(sha: &str, grid: &HusimiGrid) -> Csv {
    let columns: Vec<String> = (0..grid.m_theta).map(|j| format!("theta_{j}")).collect();
    let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut csv = Csv::new(sha, &refs);
    for i in 0..grid.m_p {
        csv.row(&grid.row(i).iter().map(|&h| num(h)).collect::<Vec<_>>());
    }
    csv
}

pub fn husimi_cmd(cfg: &RunConfig, out: &Path) -> CmdResult {
    let p = &cfg.params;
    let t = cfg.husimi_time;
    let (up, down, weights) = match cfg.mode {
        ConditionalMode::SpinComponent => {
            let state = state_at(p, cfg.qubit_init, cfg.detector_init, t)?;
            let (up, w_up) = conditional(&state.up, cfg.grid, p)?;
            let (down, w_down) = conditional(&state.down, cfg.grid, p)?;
            (up, down, (w_up, w_down))
        }
        ConditionalMode::SeparateRuns => {
            let one = Complex64::new(1.0, 0.0);
            let zero = Complex64::new(0.0, 0.0);
            let up = state_at(p, (one, zero), cfg.detector_init, t)?;
            let down = state_at(p, (zero, one), cfg.detector_init, t)?;
            (husimi_reduced(&up, cfg.grid, p)?, husimi_reduced(&down, cfg.grid, p)?, (1.0, 1.0))
        }
    };
    let base = stem(out);
    let up_path = sibling(&base, "_up.csv");
    let down_path = sibling(&base, "_down.csv");
    husimi_csv(&cfg.sha, &up).write(&up_path)?;
    husimi_csv(&cfg.sha, &down).write(&down_path)?;
    let file = |path: &Path| path.file_name().map(|f| f.to_string_lossy().into_owned());
    write_json(
        &sibling(&base, ".json"),
        &cfg.sha,
        json!({
            "t": t,
            "mode": mode_name(cfg.mode),
            "m_theta": up.m_theta,
            "m_p": up.m_p,
            "hbar": up.hbar,
            "theta_min": 0.0,
            "d_theta": up.d_theta(),
            "p_min": up.p(0),
            "d_p": up.d_p(),
            "layout": "rows are momentum p_i = p_min + i*d_p (increasing downward), columns are theta_j = j*d_theta",
            "up_file": file(&up_path),
            "down_file": file(&down_path),
            "weight_up": weights.0,
            "weight_down": weights.1,
            "integral_up": up.integral(),
            "integral_down": down.integral(),
        }),
    )?;
    Ok(())
}

pub fn wd_cmd(cfg: &RunConfig, out: &Path) -> CmdResult {
    let side = cfg.require_box_side()?;
    let records = wd_series(
        &cfg.params,
        cfg.qubit_init,
        cfg.detector_init,
        cfg.grid,
        cfg.box_center,
        side,
        cfg.mode,
    )?;
    let mut csv = Csv::new(&cfg.sha, &["t", "wd_up", "wd_down"]);
    for r in &records {
        csv.row(&[r.t.to_string(), num(r.up), num(r.down)]);
    }
    csv.write(out)?;
    Ok(())
}

pub fn lyapunov_cmd(cfg: &RunConfig, out: &Path) -> CmdResult {
    let p = &cfg.params;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .context("building worker pool")?;
    let run = |k: f64| pool.install(|| lyapunov(k, cfg.lyapunov_orbits, cfg.lyapunov_steps, cfg.seed));
    let lambda = run(p.kick()).map_err(|e| CliError::Config(e.to_string()))?;
    let lambda_up = run(p.k_up())?;
    let lambda_down = run(p.k_down())?;
    write_json(
        out,
        &cfg.sha,
        json!({
            "K": p.kick(),
            "k_up": p.k_up(),
            "k_down": p.k_down(),
            "lambda": opt(lambda),
            "lambda_up": opt(lambda_up),
            "lambda_down": opt(lambda_down),
            "orbits": cfg.lyapunov_orbits,
            "steps": cfg.lyapunov_steps,
            "seed": cfg.seed,
        }),
    )?;
    Ok(())
}

pub fn channel_cmd(cfg: &RunConfig, out: &Path) -> CmdResult {
    let p = &cfg.params;
    let b0 = BlochVector::from_pure(cfg.qubit_init.0, cfg.qubit_init.1);
    let series = map_bloch_series(b0, p.epsilon(), p.delta(), p.t_max());
    let mut csv = Csv::new(
        &cfg.sha,
        &["t", "map_x", "map_y", "map_z", "map_abs_rho01", "map_rho11", "cont_x", "cont_y", "cont_z"],
    );
    for (t, b) in series.iter().enumerate() {
        let c = continuous_solution(b0, p.epsilon(), p.delta(), t as f64);
        csv.row(&[
            t.to_string(),
            num(b.x),
            num(b.y),
            num(b.z),
            num(b.rho01().norm()),
            num(b.rho11()),
            num(c.x),
            num(c.y),
            num(c.z),
        ]);
    }
    csv.write(out)?;
    Ok(())
}

pub fn fidelity_cmd(cfg: &RunConfig, out: &Path) -> CmdResult {
    let f = fidelity_series(&cfg.params, cfg.detector_init, cfg.params.t_max())?;
    let mut csv = Csv::new(&cfg.sha, &["t", "re_f", "im_f", "abs_f"]);
    for (t, z) in f.iter().enumerate() {
        csv.row(&[t.to_string(), num(z.re), num(z.im), num(z.norm())]);
    }
    csv.write(out)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FitKind {
    Exp,
    Sine,
}

/// Reads one named column from a CSV written by this tool.
pub fn read_column(text: &str, column: &str) -> Result<Vec<f64>, CliError> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| CliError::Config("input CSV has no column line".into()))?;
    let idx = header
        .split(',')
        .position(|c| c.trim() == column)
        .ok_or_else(|| CliError::Config(format!("input CSV has no column `{column}`")))?;
    lines
        .enumerate()
        .map(|(row, line)| {
            line.split(',')
                .nth(idx)
                .and_then(|f| f.trim().parse::<f64>().ok())
                .ok_or_else(|| CliError::Config(format!("row {row}: bad or missing `{column}` field")))
        })
        .collect()
}

fn fit_json(kind: FitKind, column: &str, fit: &DecayFit) -> serde_json::Value {
    let mut v = json!({
        "kind": match kind { FitKind::Exp => "exp", FitKind::Sine => "sine" },
        "column": column,
        "rate": opt(fit.rate),
        "amplitude": opt(fit.amplitude),
        "window_lo": fit.window.0,
        "window_hi": fit.window.1,
        "rms_residual": opt(fit.rms_residual),
    });
    if kind == FitKind::Sine {
        let obj = v.as_object_mut().expect("object literal");
        obj.insert("frequency".into(), opt(fit.frequency));
        obj.insert("phase".into(), opt(fit.phase));
        obj.insert("converged".into(), fit.converged.into());
    }
    v
}

pub fn fit_cmd(input: &Path, kind: FitKind, column: Option<&str>, hint: Option<f64>, out: &Path) -> CmdResult {
    let bytes = std::fs::read(input).map_err(|e| CliError::Config(format!("cannot read {}: {e}", input.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::Config("input CSV is not UTF-8".into()))?;
    let column = column.unwrap_or(match kind {
        FitKind::Exp => "abs_rho01",
        FitKind::Sine => "rho11",
    });
    let series = read_column(&text, column)?;
    let sha = crate::output::sha256_hex(&bytes);
    let result = match kind {
        FitKind::Exp => fit_exp_decay(&series),
        FitKind::Sine => {
            let b0 = hint.or_else(|| estimate_frequency(&series)).unwrap_or(0.1);
            fit_damped_sine(&series, b0)
        }
    };
    match result {
        Ok(fit) => {
            write_json(out, &sha, fit_json(kind, column, &fit))?;
            if !fit.converged {
                return Err(CliError::FitNotConverged(format!(
                    "sine fit stopped after the iteration limit; best rate {}",
                    fit.rate
                )));
            }
            Ok(())
        }
        Err(e) => {
            write_json(out, &sha, json!({ "column": column, "error": e.to_string() }))?;
            Err(CliError::FitNotConverged(e.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_are_found_by_name() {
        let text = "# header\nt,a,b\n0,1.0,2.0\n1,3.0,4.0\n";
        assert_eq!(read_column(text, "b").unwrap(), vec![2.0, 4.0]);
        assert!(read_column(text, "c").is_err());
        assert!(read_column("t,a\n0,x\n", "a").is_err());
    }

    #[test]
    fn flags_with_commas_are_quoted() {
        assert_eq!(csv_field("ok"), "ok");
        assert_eq!(csv_field("a, b"), "\"a, b\"");
    }
}
