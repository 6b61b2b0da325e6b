use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde_json::{json, Value};

use dqm_core::focksim::{
    optimize_operating_point, oracle_comparison, prepare_input_checked, Recombiner,
};
use dqm_core::network::{
    build_optimal_network, four_mode_network, mesh_decompose, mesh_reconstruct, validate_weights,
    Scheme,
};
use dqm_core::protocols::{allocation_plan_with_prefactor, function_estimation_bound};
use dqm_core::qfim::{
    log_log_slope, qfim_assemble, qfim_coefficients, scan_point, sensitivity_bounds,
    single_input_variance, NonclassicalInput, StateFamily,
};
use dqm_core::states::{moments_of, SingleModeState};

use crate::config::{
    self, BoundConfig, FuncestConfig, NetworkConfig, ScanConfig, VerifyCheck, VerifyConfig,
};
use crate::{Cli, CliError, Command, Common};

type Failure = (CliError, Option<String>);

pub fn run(cli: &Cli) -> Result<String, Failure> {
    let (name, common) = match &cli.command {
        Command::Bound(c) => ("bound", c),
        Command::Network(c) => ("network", c),
        Command::Verify(c) => ("verify", c),
        Command::Scan(c) => ("scan", c),
        Command::Funcest(c) => ("funcest", c),
    };
    let outcome = match &cli.command {
        Command::Bound(c) => bound(c),
        Command::Network(c) => network(c),
        Command::Verify(c) => verify(c),
        Command::Scan(c) => scan(c),
        Command::Funcest(c) => funcest(c),
    };
    let (result, failure) = match outcome {
        Ok(v) => (v, None),
        Err(Outcome::Failed(e)) => return Err((e, None)),
        Err(Outcome::Report(v, e)) => (v, Some(e)),
    };
    let text = envelope(name, result, cli.no_timestamp);
    if let Some(dir) = &common.out {
        if let Err(e) = write_file(&dir.join(format!("{name}.json")), &text) {
            return Err((e, Some(text)));
        }
    }
    match failure {
        None => Ok(text),
        Some(e) => Err((e, Some(text))),
    }
}

enum Outcome {
    Failed(CliError),
    /// A complete report together with the failure it records.
    Report(Value, CliError),
}

impl<E: Into<CliError>> From<E> for Outcome {
    fn from(e: E) -> Self {
        Outcome::Failed(e.into())
    }
}

fn envelope(name: &str, result: Value, no_timestamp: bool) -> String {
    let mut v = json!({ "command": name });
    if !no_timestamp {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        v["generated_at"] = json!(secs);
    }
    v["result"] = result;
    let mut s = serde_json::to_string_pretty(&v).expect("json values serialize");
    s.push('\n');
    s
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn out_dir(c: &Common) -> PathBuf {
    c.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

/// 17 significant digits.
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn paired_or_reduced(
    weights: &[f64],
    scheme: Scheme,
) -> Result<dqm_core::network::WeightVector, CliError> {
    Ok(validate_weights(weights, scheme)?)
}

fn bound(c: &Common) -> Result<Value, Outcome> {
    let cfg: BoundConfig = config::load(&c.config)?;
    cfg.state.validate()?;
    let cutoff = c.cutoff.unwrap_or(cfg.cutoff);
    let w = paired_or_reduced(&cfg.weights, cfg.scheme)?;
    let input = NonclassicalInput::from_state(&cfg.state, cutoff)?;
    let report = sensitivity_bounds(&input, cfg.alpha.norm_sqr(), &w)?;
    Ok(json!({
        "state": to_value(&cfg.state),
        "weights": w.entries(),
        "scheme": to_value(&w.scheme()),
        "report": to_value(&report),
    }))
}

fn network(c: &Common) -> Result<Value, Outcome> {
    let cfg: NetworkConfig = config::load(&c.config)?;
    let w = paired_or_reduced(&cfg.weights, cfg.scheme)?;
    let net = match cfg.four_mode_phases {
        Some(p) => four_mode_network(&w, p)?,
        None => build_optimal_network(&w)?,
    };
    let mesh = mesh_decompose(&net);
    let back = mesh_reconstruct(&mesh, net.modes())?;
    let roundtrip = net
        .matrix()
        .iter()
        .zip(back.iter())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    let dir = out_dir(c);
    let matrix_path = dir.join("matrix.json");
    let mesh_path = dir.join("mesh.txt");
    let mut matrix_text = serde_json::to_string_pretty(&net).expect("network serializes");
    matrix_text.push('\n');
    write_file(&matrix_path, &matrix_text)?;
    write_file(&mesh_path, &mesh.to_text())?;
    Ok(json!({
        "weights": w.entries(),
        "modes": net.modes(),
        "unitarity_deviation": net.unitarity_deviation(),
        "mesh_elements": mesh.elements.len(),
        "mesh_roundtrip_deviation": roundtrip,
        "matrix_file": matrix_path.display().to_string(),
        "mesh_file": mesh_path.display().to_string(),
    }))
}

fn verify(c: &Common) -> Result<Value, Outcome> {
    let cfg: VerifyConfig = config::load(&c.config)?;
    if cfg.checks.is_empty() {
        return Err(CliError::Config("no checks given".into()).into());
    }
    let mut results = Vec::new();
    let mut failed = Vec::new();
    for (i, check) in cfg.checks.iter().enumerate() {
        let r = run_check(check, c.cutoff)?;
        if r["pass"] != json!(true) {
            failed.push(format!("{i}: {}", r["check"].as_str().unwrap_or("?")));
        }
        results.push(r);
    }
    let report = json!({ "checks": results, "all_passed": failed.is_empty() });
    if failed.is_empty() {
        Ok(report)
    } else {
        Err(Outcome::Report(
            report,
            CliError::Verification(failed.join(", ")),
        ))
    }
}

fn run_check(check: &VerifyCheck, cutoff_override: Option<usize>) -> Result<Value, CliError> {
    match check {
        VerifyCheck::Oracle {
            state,
            alpha,
            weights,
            scheme,
            cutoff,
            threshold,
            tolerance,
        } => {
            state.validate()?;
            let w = paired_or_reduced(weights, *scheme)?;
            let cutoff = cutoff_override.unwrap_or(*cutoff);
            let r = oracle_comparison(state, *alpha, &w, cutoff, *threshold)?;
            Ok(json!({
                "check": "oracle",
                "pass": r.relative_deviation <= *tolerance,
                "tolerance": tolerance,
                "relative_deviation": r.relative_deviation,
                "max_deviation": r.max_deviation,
                "cutoff": r.cutoff,
                "tail_mass": r.tail_mass,
                "analytic": r.analytic,
                "oracle": r.oracle,
            }))
        }
        VerifyCheck::NoGo {
            weights,
            photon_numbers,
            alone_range,
            paired_range,
        } => {
            let w = paired_or_reduced(weights, Scheme::Paired)?;
            if photon_numbers.len() < 2 || photon_numbers.iter().any(|n| !(*n > 1.5)) {
                return Err(CliError::Config(
                    "no_go needs at least two photon numbers above 1.5".into(),
                ));
            }
            let net = build_optimal_network(&w)?;
            let mut alone = Vec::new();
            let mut paired = Vec::new();
            for &n in photon_numbers {
                let m = moments_of(&SingleModeState::squeezed_vacuum(n.sqrt().asinh(), 0.0), 0)?;
                alone.push(single_input_variance(&m, &net, w.entries())?.sqrt());
                let st = StateFamily::SqueezedVacuum.with_mean_photons(n / 2.0)?;
                let input = NonclassicalInput::from_state(&st, 0)?;
                paired.push(sensitivity_bounds(&input, n / 2.0, &w)?.variance_q.sqrt());
            }
            let x_alone = -log_log_slope(photon_numbers, &alone);
            let x_paired = -log_log_slope(photon_numbers, &paired);
            let pr = paired_range.unwrap_or([0.9, 1.05]);
            let in_range = |x: f64, r: [f64; 2]| x >= r[0] && x <= r[1];
            Ok(json!({
                "check": "no_go",
                "pass": in_range(x_alone, *alone_range) && in_range(x_paired, pr),
                "exponent_alone": x_alone,
                "exponent_with_coherent": x_paired,
                "alone_range": alone_range,
                "paired_range": pr,
                "photon_numbers": photon_numbers,
                "delta_q_alone": alone,
                "delta_q_with_coherent": paired,
            }))
        }
        VerifyCheck::Cfi {
            state,
            alpha,
            weights,
            cutoff,
            threshold,
            grid,
            min_fraction,
        } => {
            state.validate()?;
            if state.is_mixed() {
                return Err(CliError::Config("cfi check needs a pure state".into()));
            }
            let w = paired_or_reduced(weights, Scheme::Paired)?;
            let cutoff = cutoff_override.unwrap_or(*cutoff);
            let m = moments_of(state, cutoff.max(60))?;
            let coeffs = qfim_coefficients(&m, *alpha);
            let bundle = qfim_assemble(&coeffs, &build_optimal_network(&w)?)?;
            let input = prepare_input_checked(state, coeffs.alpha, w.modes(), cutoff, *threshold)?;
            let best = optimize_operating_point(
                &input,
                &bundle.network,
                &w,
                &Recombiner::AdjointOfNetwork,
                *grid,
                1e-6,
            )?;
            let target = 4.0 * coeffs.n_total() + coeffs.c_v;
            Ok(json!({
                "check": "cfi",
                "pass": best.cfi >= min_fraction * target,
                "cfi": best.cfi,
                "offset": best.offset,
                "target": target,
                "min_fraction": min_fraction,
            }))
        }
    }
}

fn family_file(f: &StateFamily) -> String {
    match f {
        StateFamily::SqueezedThermal { thermal_ratio } => {
            format!("scan_squeezed_thermal_k{thermal_ratio}.csv")
        }
        other => format!("scan_{}.csv", other.name()),
    }
}

fn status_cell(msg: &str) -> String {
    format!("skipped: {}", msg.replace([',', '\n'], ";"))
}

fn scan(c: &Common) -> Result<Value, Outcome> {
    let cfg: ScanConfig = config::load(&c.config)?;
    let sigmas = cfg.sigma_grid.values().map_err(CliError::Config)?;
    if cfg.families.is_empty() {
        return Err(CliError::Config("no families given".into()).into());
    }
    if !(cfg.n_total > 1.0) {
        return Err(CliError::Config(format!("n_total must exceed 1, got {}", cfg.n_total)).into());
    }
    let dir = out_dir(c);
    let mut files = Vec::new();
    let mut skipped = 0usize;
    for family in &cfg.families {
        let rows: Vec<_> = sigmas
            .par_iter()
            .map(|&s| scan_point(family, s, cfg.n_total))
            .collect();
        let mut csv = String::from("sigma,s,n1,n2,W,bound_universal,status\n");
        for (sigma, row) in sigmas.iter().zip(&rows) {
            match row {
                Ok(p) => {
                    let s = p.s.map(fmt17).unwrap_or_default();
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{},ok",
                        fmt17(p.sigma),
                        s,
                        fmt17(p.n1),
                        fmt17(p.n2),
                        fmt17(p.metrological_power),
                        fmt17(p.bound_universal)
                    );
                }
                Err(e) => {
                    skipped += 1;
                    log::warn!("{} sigma={sigma}: {e}", family.name());
                    let _ = writeln!(
                        csv,
                        "{},,,,,,{}",
                        fmt17(*sigma),
                        status_cell(&e.to_string())
                    );
                }
            }
        }
        let path = dir.join(family_file(family));
        write_file(&path, &csv)?;
        files.push(path.display().to_string());
    }
    if let Some(curves) = &cfg.sensitivity {
        let ns = curves.photon_numbers.values().map_err(CliError::Config)?;
        let mut csv = String::from("curve,N,delta_q,status\n");
        for family in &cfg.families {
            for &sigma in &curves.sigmas {
                let label = format!("{}_sigma_{sigma}", family.name());
                let rows: Vec<_> = ns
                    .par_iter()
                    .map(|&n| scan_point(family, sigma, n))
                    .collect();
                for (n, row) in ns.iter().zip(rows) {
                    match row {
                        Ok(p) => {
                            let _ = writeln!(
                                csv,
                                "{label},{},{},ok",
                                fmt17(*n),
                                fmt17(p.bound_universal)
                            );
                        }
                        Err(e) => {
                            skipped += 1;
                            let _ = writeln!(
                                csv,
                                "{label},{},,{}",
                                fmt17(*n),
                                status_cell(&e.to_string())
                            );
                        }
                    }
                }
            }
        }
        let cat_label = format!("even_cat_n1_{}", curves.cat_n1);
        let cat_w = StateFamily::EvenCat.metrological_power(curves.cat_n1);
        for &n in &ns {
            match &cat_w {
                Ok(w) if n > curves.cat_n1 => {
                    let n2 = n - curves.cat_n1;
                    let _ = writeln!(
                        csv,
                        "{cat_label},{},{},ok",
                        fmt17(n),
                        fmt17(1.0 / (n + 2.0 * n2 * w).sqrt())
                    );
                }
                Ok(_) => {
                    skipped += 1;
                    let _ = writeln!(
                        csv,
                        "{cat_label},{},,{}",
                        fmt17(n),
                        status_cell("N below the fixed n1")
                    );
                }
                Err(e) => {
                    skipped += 1;
                    let _ = writeln!(
                        csv,
                        "{cat_label},{},,{}",
                        fmt17(n),
                        status_cell(&e.to_string())
                    );
                }
            }
        }
        for &n in &ns {
            let _ = writeln!(csv, "sql,{},{},ok", fmt17(n), fmt17(1.0 / n.sqrt()));
        }
        let path = dir.join("sensitivity.csv");
        write_file(&path, &csv)?;
        files.push(path.display().to_string());
    }
    Ok(json!({ "files": files, "sigma_points": sigmas.len(), "skipped_rows": skipped }))
}

fn funcest(c: &Common) -> Result<Value, Outcome> {
    let cfg: FuncestConfig = config::load(&c.config)?;
    let f = cfg.function.to_polynomial()?;
    let plan = allocation_plan_with_prefactor(cfg.n_total, cfg.s, cfg.allocation_prefactor)?;
    let est = function_estimation_bound(&f, &cfg.theta, &plan, &cfg.context, &cfg.first_step)?;
    Ok(json!({
        "function": to_value(&cfg.function),
        "theta": cfg.theta,
        "plan": to_value(&plan),
        "estimate": to_value(&est),
    }))
}
