//! Configuration, dispatch and reporting for the `curvlab` command line.

pub mod config;
pub mod experiments;
pub mod report;
pub mod suite;

use std::path::{Path, PathBuf};

use config::{ConfigError, ExperimentConfig};
use report::Report;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write to {path}: {reason}")]
    Output { path: PathBuf, reason: String },
}

pub(crate) fn prepare_dir(dir: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(dir).map_err(|e| RunError::Output {
        path: dir.to_path_buf(),
        reason: e.to_string(),
    })
}

pub(crate) fn write_report(report: &Report, path: &Path) -> Result<(), RunError> {
    report.write(path).map_err(|e| RunError::Output {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Validates, runs and writes `<out>/<experiment>.json`. Returns the report
/// and the path it was written to.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<(Report, PathBuf), RunError> {
    cfg.validate()?;
    prepare_dir(out)?;
    let report = experiments::execute(cfg, Some(out));
    let path = out.join(format!("{}.json", cfg.experiment.name()));
    write_report(&report, &path)?;
    Ok((report, path))
}

pub fn exit_code(passed: bool) -> i32 {
    if passed {
        EXIT_PASS
    } else {
        EXIT_VIOLATION
    }
}
