use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use curvlab_cli::config::{ConfigError, ExperimentConfig, Kind};
use curvlab_cli::suite::{run_suite, Profile};
use curvlab_cli::{exit_code, run, RunError, EXIT_CONFIG};

/// Seeded audits of curvature cones, reaction ODEs and torus flow estimates.
#[derive(Parser)]
#[command(name = "curvlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audit one of the isotropic-curvature lemmas on random samples.
    ConeAudit(Common),
    /// Check that ric(R)∧id stays in the cone.
    ConditionStar(Common),
    /// Check that Q(R) points into the cone at boundary points.
    Tangency(Common),
    /// Monitor cone margins along reaction ODE trajectories.
    OdeInvariance(Common),
    /// Gradient, Hessian and Hölder estimates for the heat flow on a torus.
    HeatEstimates(Common),
    /// Picard iteration for the Ricci–DeTurck flow near the flat torus.
    Deturck(Common),
    /// Parabolic norms of a DeTurck solution.
    Norms(Common),
    /// Run the full battery of checks.
    Suite(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    cone: Option<String>,
    #[arg(long)]
    lemma: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for reports and snapshots.
    #[arg(long, default_value = "reports")]
    out: PathBuf,
    /// File of `key = value` lines applied over the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Suite size: quick or full.
    #[arg(long)]
    profile: Option<String>,
    /// Extra `key=value` override; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn build_config(kind: Kind, c: &Common) -> Result<ExperimentConfig, ConfigError> {
    if c.profile.is_some() {
        return Err(ConfigError::Invalid("--profile applies to `suite` only".into()));
    }
    let mut cfg = ExperimentConfig::defaults(kind);
    if let Some(path) = &c.config {
        cfg.apply_file(path)?;
    }
    for kv in &c.set {
        let Some((k, v)) = kv.split_once('=') else {
            return Err(ConfigError::Invalid(format!("--set expects KEY=VALUE, got {kv:?}")));
        };
        cfg.set(k, v)?;
    }
    let flags = [
        ("n", c.n.map(|v| v.to_string())),
        ("cone", c.cone.clone()),
        ("lemma", c.lemma.clone()),
        ("trials", c.trials.map(|v| v.to_string())),
        ("seed", c.seed.map(|v| v.to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    if cfg.experiment != kind {
        return Err(ConfigError::Invalid(format!(
            "config names experiment {} but the subcommand is {kind}",
            cfg.experiment
        )));
    }
    Ok(cfg)
}

fn suite(c: &Common) -> Result<i32, RunError> {
    if c.n.is_some() || c.cone.is_some() || c.lemma.is_some() || c.trials.is_some() || c.config.is_some() || !c.set.is_empty() {
        return Err(ConfigError::Invalid("`suite` accepts only --seed, --out and --profile".into()).into());
    }
    let profile: Profile = c.profile.as_deref().unwrap_or("quick").parse()?;
    let report = run_suite(profile, c.seed.unwrap_or(0), &c.out, |s| {
        println!(
            "[{}] criterion {} {}: {} ms",
            if s.passed { "PASS" } else { "FAIL" },
            s.criterion,
            s.label,
            s.wall_time_ms
        );
    })?;
    println!(
        "suite {}: {} (report: {})",
        c.profile.as_deref().unwrap_or("quick"),
        if report.passed { "PASS" } else { "FAIL" },
        c.out.join("suite.json").display()
    );
    Ok(exit_code(report.passed))
}

fn dispatch(cmd: &Command) -> Result<i32, RunError> {
    let (kind, common) = match cmd {
        Command::ConeAudit(c) => (Kind::ConeAudit, c),
        Command::ConditionStar(c) => (Kind::ConditionStar, c),
        Command::Tangency(c) => (Kind::Tangency, c),
        Command::OdeInvariance(c) => (Kind::OdeInvariance, c),
        Command::HeatEstimates(c) => (Kind::HeatEstimates, c),
        Command::Deturck(c) => (Kind::Deturck, c),
        Command::Norms(c) => (Kind::Norms, c),
        Command::Suite(c) => return suite(c),
    };
    let cfg = build_config(kind, common)?;
    let (report, path) = run(&cfg, &common.out)?;
    for check in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("violated: {} = {:e} (limit {:e})", check.name, check.value, check.limit);
    }
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
    }
    println!(
        "{kind}: {} (report: {})",
        if report.passed { "PASS" } else { "FAIL" },
        path.display()
    );
    Ok(exit_code(report.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}
