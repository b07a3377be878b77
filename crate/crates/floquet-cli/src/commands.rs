//! The five subcommand implementations. Each returns the deterministic
//! results payload of the run record plus the process exit code.

use std::path::Path;

use nalgebra::DVector;
use serde_json::json;

use floquet_core::cocycle::{check_a1_integrability, OmegaPath};
use floquet_core::focusing::{focusing_report, verify_a5};
use floquet_core::principal::{entire_orbit, lyapunov_top, EstimatorConfig, PullbackSettings};
use floquet_core::separation::{
    compare_exponents, projection_record, second_exponent, temperedness_check,
};
use floquet_core::ConeVector;

use crate::config::{OrbitSection, RunConfig};
use crate::report::{write_growth_csv, write_orbit_csv, write_surrogate_csv};
use crate::Failure;

fn settings_for(cfg: &RunConfig, est: &EstimatorConfig) -> Result<PullbackSettings, Failure> {
    let (step, certified) = est.resolve_step(&cfg.model)?;
    Ok(PullbackSettings {
        tolerance: est.tolerance,
        depth_cap: est.depth_cap,
        step,
        certified,
    })
}

/// Top exponent over all seeds, with optional per-seed growth traces.
pub fn cmd_estimate(
    cfg: &RunConfig,
    est: &EstimatorConfig,
    out: &Path,
) -> Result<(serde_json::Value, u8), Failure> {
    let run = lyapunov_top(&cfg.model, &cfg.run.seeds, est)?;
    let mut traces = Vec::new();
    if est.keep_trace {
        for (seed, log) in cfg.run.seeds.iter().zip(&run.logs) {
            if let Some(log) = log {
                let path = write_growth_csv(out, *seed, log)?;
                traces.push(path.file_name().unwrap().to_string_lossy().into_owned());
            }
        }
    }
    let results = json!({
        "lambda1": run.estimate,
        "certified": run.certified,
        "trace_files": traces,
    });
    Ok((results, 0))
}

/// Second exponent, exponential separation and the principal pair at the
/// origin, plus a temperedness diagnostic for the projections.
pub fn cmd_separation(
    cfg: &RunConfig,
    est: &EstimatorConfig,
    out: &Path,
) -> Result<(serde_json::Value, u8), Failure> {
    let run = second_exponent(&cfg.model, &cfg.run.seeds, est)?;
    let temperedness = temperedness_check(&cfg.model, &cfg.run.seeds, est)?;
    let mut traces = Vec::new();
    if est.keep_trace {
        for (seed, trace) in cfg.run.seeds.iter().zip(&run.traces) {
            let path = write_surrogate_csv(out, *seed, trace)?;
            traces.push(path.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    let results = json!({
        "lambda1": run.lambda1,
        "lambda2": run.lambda2,
        "sigma": run.sigma,
        "sigma_se": run.sigma_se,
        "separated": run.separated,
        "zero_separation": !run.separated,
        "certified": run.certified,
        "pair": {
            "w": run.pair.w.as_slice().to_vec(),
            "w_star": run.pair.w_star.as_slice().to_vec(),
            "pairing": run.pair.pairing,
        },
        "temperedness": temperedness,
        "trace_files": traces,
    });
    Ok((results, 0))
}

/// Runs every standing-assumption diagnostic, records them all, and exits
/// 3 if any fails. A failing check is a reported outcome, not an abort.
pub fn cmd_verify(
    cfg: &RunConfig,
    est: &EstimatorConfig,
    _out: &Path,
) -> Result<(serde_json::Value, u8), Failure> {
    let seed = cfg.run.seeds[0];
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, details: serde_json::Value| {
        checks.push(json!({ "name": name, "passed": passed, "details": details }));
        passed
    };
    let mut all = true;

    let replicates = est.horizon.clamp(1024, 1 << 16);
    match check_a1_integrability(&cfg.model, seed, replicates) {
        Ok(report) => {
            let passed = !report.heavy_tail;
            all &= push("integrability", passed, serde_json::to_value(&report).unwrap());
        }
        Err(e) => {
            all &= push("integrability", false, json!({ "error": e.to_string() }));
        }
    }

    match focusing_report(&cfg.model, seed, 256) {
        Ok(report) => {
            let passed = report.passes;
            all &= push("focusing", passed, serde_json::to_value(&report).unwrap());
        }
        Err(e) => {
            all &= push("focusing", false, json!({ "error": e.to_string() }));
        }
    }

    let settings = settings_for(cfg, est)?;
    let path = OmegaPath::new(&cfg.model, seed)?;
    match projection_record(&path, 0, &settings) {
        Ok(record) => {
            let passed = record.pairing > 0.0;
            all &= push(
                "pairing",
                passed,
                json!({
                    "pairing": record.pairing,
                    "w": record.w.as_slice().to_vec(),
                    "w_star": record.w_star.as_slice().to_vec(),
                }),
            );
        }
        Err(e) => {
            all &= push("pairing", false, json!({ "error": e.to_string() }));
        }
    }

    let n = cfg.model.dim;
    let e_bar = ConeVector::from_dvector(DVector::repeat(n, 1.0 / n as f64))?;
    let sp_horizon = est.horizon.min(4096);
    match verify_a5(&path, &e_bar, sp_horizon) {
        Ok(report) => {
            all &= push(
                "strong_positivity",
                true,
                serde_json::to_value(&report).unwrap(),
            );
        }
        Err(e) => {
            all &= push("strong_positivity", false, json!({ "error": e.to_string() }));
        }
    }

    let results = json!({ "passed": all, "checks": checks });
    Ok((results, if all { 0 } else { 3 }))
}

/// Coupled comparison of the base model (lower) against the dominating
/// model from the `[compare]` section (upper).
pub fn cmd_compare(
    cfg: &RunConfig,
    est: &EstimatorConfig,
    _out: &Path,
) -> Result<(serde_json::Value, u8), Failure> {
    let upper = cfg
        .compare
        .as_ref()
        .ok_or_else(|| Failure::config("compare runs need a [compare] section".into()))?;
    let report = compare_exponents(&cfg.model, &upper.model, &cfg.run.seeds, est)?;
    Ok((serde_json::to_value(&report).unwrap(), 0))
}

/// Entire positive orbit through the principal vector at the anchor.
pub fn cmd_orbit(
    cfg: &RunConfig,
    est: &EstimatorConfig,
    out: &Path,
) -> Result<(serde_json::Value, u8), Failure> {
    let section: OrbitSection = cfg.orbit.clone().unwrap_or_default();
    let settings = settings_for(cfg, est)?;
    let path = OmegaPath::new(&cfg.model, cfg.run.seeds[0])?;
    let points = entire_orbit(
        &path,
        section.anchor,
        section.backward,
        section.forward,
        &settings,
    )?;
    let csv_path = write_orbit_csv(out, &points)?;
    let results = json!({
        "anchor": section.anchor,
        "points": points
            .iter()
            .map(|p| json!({
                "index": p.index,
                "log_scale": p.log_scale,
                "direction": p.direction.as_slice().to_vec(),
            }))
            .collect::<Vec<_>>(),
        "csv": csv_path.file_name().unwrap().to_string_lossy(),
    });
    Ok((results, 0))
}
