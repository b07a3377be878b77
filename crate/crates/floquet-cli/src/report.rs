//! Persistent run artifacts: a versioned JSON record per invocation plus
//! CSV traces for anything worth plotting.

use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use floquet_core::principal::{GrowthLog, OrbitPoint};

use crate::config::RunConfig;
use crate::Failure;

/// Bumped whenever the JSON layout changes incompatibly.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub command: String,
    /// Echo of the configuration the run actually used.
    pub config: RunConfig,
    /// Horizon after any command-line override.
    pub horizon: u64,
    pub workers: Option<usize>,
    pub wall_clock_seconds: f64,
    /// Command-specific payload; deterministic given config and seeds.
    pub results: serde_json::Value,
}

fn fail_io(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 4,
        message: format!("cannot write {}: {e}", path.display()),
    }
}

/// Write the record as pretty JSON to `<dir>/<command>.json`.
pub fn write_record(dir: &Path, record: &RunRecord) -> Result<PathBuf, Failure> {
    let path = dir.join(format!("{}.json", record.command));
    let text = serde_json::to_string_pretty(record).map_err(|e| Failure {
        code: 4,
        message: format!("cannot serialize run record: {e}"),
    })?;
    let mut file = File::create(&path).map_err(|e| fail_io(&path, e))?;
    file.write_all(text.as_bytes())
        .and_then(|_| file.write_all(b"\n"))
        .map_err(|e| fail_io(&path, e))?;
    Ok(path)
}

/// Per-step growth trace: step, one-step log growth, running sum and the
/// certified error bound at that step (infinite in uncertified mode).
pub fn write_growth_csv(dir: &Path, seed: u64, log: &GrowthLog) -> Result<PathBuf, Failure> {
    let path = dir.join(format!("trace_seed{seed}.csv"));
    let mut wtr = csv::Writer::from_path(&path).map_err(|e| Failure {
        code: 4,
        message: format!("cannot write {}: {e}", path.display()),
    })?;
    let write = (|| -> csv::Result<()> {
        wtr.write_record(["step", "ln_rho", "cumulative", "certificate"])?;
        let cumulative = log.cumulative();
        for (i, (rho, cum)) in log.ln_rho.iter().zip(&cumulative).enumerate() {
            let step = log.start + i as i64;
            let cert = log.certificate.get(i).copied().unwrap_or(f64::INFINITY);
            wtr.write_record([
                step.to_string(),
                format!("{rho:.17e}"),
                format!("{cum:.17e}"),
                format!("{cert:.17e}"),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    })();
    write.map_err(|e| Failure {
        code: 4,
        message: format!("cannot write {}: {e}", path.display()),
    })?;
    Ok(path)
}

/// Kingman-surrogate checkpoints: n, g_n = ln of the projected product norm.
pub fn write_surrogate_csv(
    dir: &Path,
    seed: u64,
    trace: &[(u64, f64)],
) -> Result<PathBuf, Failure> {
    let path = dir.join(format!("surrogate_seed{seed}.csv"));
    let mut wtr = csv::Writer::from_path(&path).map_err(|e| Failure {
        code: 4,
        message: format!("cannot write {}: {e}", path.display()),
    })?;
    let write = (|| -> csv::Result<()> {
        wtr.write_record(["n", "g_n"])?;
        for (n, g) in trace {
            wtr.write_record([n.to_string(), format!("{g:.17e}")])?;
        }
        wtr.flush()?;
        Ok(())
    })();
    write.map_err(|e| Failure {
        code: 4,
        message: format!("cannot write {}: {e}", path.display()),
    })?;
    Ok(path)
}

/// Entire-orbit samples: index, log scale and the unit direction entries
/// x0..x{n-1}.
pub fn write_orbit_csv(dir: &Path, points: &[OrbitPoint]) -> Result<PathBuf, Failure> {
    let path = dir.join("orbit.csv");
    let mut wtr = csv::Writer::from_path(&path).map_err(|e| Failure {
        code: 4,
        message: format!("cannot write {}: {e}", path.display()),
    })?;
    let dim = points.first().map_or(0, |p| p.direction.dim());
    let write = (|| -> csv::Result<()> {
        let mut header = vec!["index".to_string(), "log_scale".to_string()];
        header.extend((0..dim).map(|j| format!("x{j}")));
        wtr.write_record(&header)?;
        for p in points {
            let mut row = vec![p.index.to_string(), format!("{:.17e}", p.log_scale)];
            row.extend(p.direction.as_slice().iter().map(|x| format!("{x:.17e}")));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    })();
    write.map_err(|e| Failure {
        code: 4,
        message: format!("cannot write {}: {e}", path.display()),
    })?;
    Ok(path)
}
