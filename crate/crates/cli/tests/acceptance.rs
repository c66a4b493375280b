//! Acceptance battery: runs `suite --profile full` twice under a fixed seed,
//! judges criteria 1–9 from the first run (checks plus runtime budgets) and
//! criterion 10 from comparing both runs byte for byte, timing aside.
//!
//! Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

use std::path::Path;
use std::process::ExitCode;
use std::time::Duration;

use curvlab_cli::report::without_timing;
use curvlab_cli::suite::{run_suite, EntrySummary, Profile, SuiteReport};

const MASTER_SEED: u64 = 20240607;

/// Wall-clock budgets in seconds for the criteria that state one.
fn budget(criterion: u32) -> Option<u64> {
    match criterion {
        1 => Some(5),
        2 => Some(120),
        3 => Some(300),
        8 => Some(120),
        9 => Some(300),
        _ => None,
    }
}

fn describe(report: &SuiteReport, criterion: u32) -> String {
    report
        .entries
        .iter()
        .filter(|e| e.criterion == criterion)
        .flat_map(|e| {
            let failing: Vec<String> = e
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("{}: {} = {:e} vs {:e}", e.label, c.name, c.value, c.limit))
                .collect();
            let err = e.error.iter().map(|m| format!("{}: error {m}", e.label));
            failing.into_iter().chain(err).collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn headline(report: &SuiteReport, criterion: u32) -> String {
    report
        .entries
        .iter()
        .filter(|e| e.criterion == criterion)
        .flat_map(|e| e.checks.iter().take(2).map(move |c| format!("{} {}={:.3e}", e.label, c.name, c.value)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn compare_runs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<String> = std::fs::read_dir(a)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect();
    names.sort();
    for name in &names {
        let x = std::fs::read_to_string(a.join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read_to_string(b.join(name)).map_err(|e| format!("{name}: {e}"))?;
        let (x, y) = (
            without_timing(&x).map_err(|e| e.to_string())?,
            without_timing(&y).map_err(|e| e.to_string())?,
        );
        if x != y {
            return Err(format!("{name} differs"));
        }
    }
    Ok(names.len())
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temporary directory");
    let (first, second) = (dir.path().join("run1"), dir.path().join("run2"));
    let quiet = |_: &EntrySummary| {};

    eprintln!("acceptance: running the full suite (seed {MASTER_SEED})");
    let report = run_suite(Profile::Full, MASTER_SEED, &first, quiet).expect("suite runs");
    let mut all = true;
    for c in &report.criteria {
        let elapsed = Duration::from_millis(c.wall_time_ms);
        let within = budget(c.criterion).map_or(true, |b| elapsed.as_secs_f64() < b as f64);
        let ok = c.passed && within;
        all &= ok;
        let budget_note = budget(c.criterion).map_or(String::new(), |b| format!(" (budget {b} s)"));
        let detail = if ok {
            headline(&report, c.criterion)
        } else if !within {
            format!("over budget; {}", describe(&report, c.criterion))
        } else {
            describe(&report, c.criterion)
        };
        println!(
            "criterion {:>2}: {} [{:.1} s{}] {}",
            c.criterion,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget_note,
            detail
        );
    }

    eprintln!("acceptance: rerunning the full suite for the reproducibility check");
    let rerun = run_suite(Profile::Full, MASTER_SEED, &second, quiet).expect("suite reruns");
    let same_vector = report
        .entries
        .iter()
        .zip(&rerun.entries)
        .all(|(a, b)| a.passed == b.passed && a.config_hash == b.config_hash);
    let verdict = compare_runs(&first, &second);
    let ok = same_vector && verdict.is_ok();
    all &= ok;
    println!(
        "criterion 10: {} {}",
        if ok { "PASS" } else { "FAIL" },
        match &verdict {
            Ok(n) if same_vector => format!("{n} report files identical apart from wall_time_ms"),
            Ok(_) => "pass/fail vectors differ".to_string(),
            Err(e) => e.clone(),
        }
    );
    println!("acceptance: {}", if all { "PASS" } else { "FAIL" });
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
