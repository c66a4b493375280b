//! The fixed battery of experiments behind `curvlab suite`, grouped by
//! acceptance criterion.

use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use curvlab::cones::{ConeId, Lemma};
use curvlab::rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{ConfigError, ExperimentConfig, Kind};
use crate::experiments::{execute, identity_oracles, ode_closed_form};
use crate::report::{hash_value, Check, Report};
use crate::{prepare_dir, write_report, RunError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Quick,
    Full,
}

impl FromStr for Profile {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "quick" => Ok(Profile::Quick),
            "full" => Ok(Profile::Full),
            _ => Err(ConfigError::Invalid(format!("unknown profile {s:?}, expected quick or full"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Task {
    Experiment(ExperimentConfig),
    Identities { dims: Vec<usize>, samples: usize },
    OdeClosedForm,
}

#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub criterion: u32,
    pub label: String,
    pub task: Task,
}

fn experiment(kind: Kind, seed: u64, edit: impl FnOnce(&mut ExperimentConfig)) -> Task {
    let mut c = ExperimentConfig::defaults(kind);
    c.seed = seed;
    edit(&mut c);
    Task::Experiment(c)
}

/// Entries in execution order. Entry `i` draws from seed
/// `trial_seed(master, i)`.
pub fn plan(profile: Profile, master: u64) -> Vec<SuiteEntry> {
    let full = profile == Profile::Full;
    let mut out: Vec<(u32, String, Box<dyn FnOnce(u64) -> Task>)> = Vec::new();
    let (id_samples, lemma_trials, lemma_dims) = if full { (100, 1000, vec![4, 5, 6]) } else { (20, 50, vec![5]) };
    out.push((
        1,
        "identities".into(),
        Box::new(move |_| Task::Identities {
            dims: (4..=8).collect(),
            samples: id_samples,
        }),
    ));
    for (criterion, lemma, tag) in [(2, Lemma::Ric4Nonneg, "ric4"), (3, Lemma::Wedge4NonnegNnic, "wedge")] {
        for &n in &lemma_dims {
            out.push((
                criterion,
                format!("cone-audit-{tag}-n{n}"),
                Box::new(move |seed| {
                    experiment(Kind::ConeAudit, seed, |c| {
                        c.lemma = lemma;
                        c.n = n;
                        c.trials = lemma_trials;
                        c.diagonal_trials = if full { 100 } else { 10 };
                    })
                }),
            ));
        }
    }
    for (criterion, kind, trials) in [
        (4, Kind::ConditionStar, if full { 500 } else { 50 }),
        (5, Kind::Tangency, if full { 200 } else { 20 }),
    ] {
        for cone in [ConeId::NonnegOperator, ConeId::Nnic] {
            out.push((
                criterion,
                format!("{kind}-{cone}"),
                Box::new(move |seed| {
                    experiment(kind, seed, |c| {
                        c.cone = cone;
                        c.trials = trials;
                    })
                }),
            ));
        }
    }
    out.push((6, "ode-closed-form".into(), Box::new(|_| Task::OdeClosedForm)));
    out.push((
        7,
        "ode-invariance".into(),
        Box::new(move |seed| experiment(Kind::OdeInvariance, seed, |c| c.trials = if full { 100 } else { 6 })),
    ));
    out.push((
        8,
        "heat-estimates".into(),
        Box::new(move |seed| {
            experiment(Kind::HeatEstimates, seed, |c| {
                if !full {
                    c.resolution = 32;
                    c.fields = 5;
                    c.deep_fields = 2;
                    c.steps = 50;
                }
            })
        }),
    ));
    for kind in [Kind::Deturck, Kind::Norms] {
        out.push((
            9,
            kind.name().into(),
            Box::new(move |seed| {
                experiment(kind, seed, |c| {
                    if full {
                        c.resolution = if kind == Kind::Deturck { 32 } else { 16 };
                    } else {
                        c.steps_per_unit = 256;
                        c.horizon = 0.5;
                    }
                })
            }),
        ));
    }
    out.into_iter()
        .enumerate()
        .map(|(i, (criterion, label, make))| SuiteEntry {
            criterion,
            label,
            task: make(rng::trial_seed(master, i as u64)),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EntrySummary {
    pub criterion: u32,
    pub label: String,
    pub operation: String,
    pub config_hash: String,
    pub seed: u64,
    pub report: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionSummary {
    pub criterion: u32,
    pub passed: bool,
    pub entries: Vec<String>,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub operation: String,
    pub profile: Profile,
    pub seed: u64,
    pub config_hash: String,
    pub passed: bool,
    pub criteria: Vec<CriterionSummary>,
    pub entries: Vec<EntrySummary>,
    pub wall_time_ms: u64,
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Runs every entry of the plan, writing one report per entry and
/// `suite.json` into `out`. `progress` is called after each entry.
pub fn run_suite(
    profile: Profile,
    master: u64,
    out: &Path,
    mut progress: impl FnMut(&EntrySummary),
) -> Result<SuiteReport, RunError> {
    let start = Instant::now();
    prepare_dir(out)?;
    let entries = plan(profile, master);
    let mut summaries = Vec::with_capacity(entries.len());
    for (i, e) in entries.iter().enumerate() {
        let report: Report = match &e.task {
            Task::Experiment(cfg) => {
                cfg.validate()?;
                execute(cfg, None)
            }
            Task::Identities { dims, samples } => identity_oracles(dims, *samples, rng::trial_seed(master, i as u64)),
            Task::OdeClosedForm => ode_closed_form(),
        };
        let file = format!("{:02}-{}.json", i + 1, e.label);
        write_report(&report, &out.join(&file))?;
        let s = EntrySummary {
            criterion: e.criterion,
            label: e.label.clone(),
            operation: report.operation.clone(),
            config_hash: report.config_hash.clone(),
            seed: report.seed,
            report: file,
            passed: report.passed,
            checks: report.checks.clone(),
            error: report.error.clone(),
            wall_time_ms: report.wall_time_ms,
        };
        progress(&s);
        summaries.push(s);
    }
    let mut criteria: Vec<CriterionSummary> = Vec::new();
    for s in &summaries {
        match criteria.iter_mut().find(|c| c.criterion == s.criterion) {
            Some(c) => {
                c.passed &= s.passed;
                c.entries.push(s.label.clone());
                c.wall_time_ms += s.wall_time_ms;
            }
            None => criteria.push(CriterionSummary {
                criterion: s.criterion,
                passed: s.passed,
                entries: vec![s.label.clone()],
                wall_time_ms: s.wall_time_ms,
            }),
        }
    }
    let report = SuiteReport {
        operation: "suite".into(),
        profile,
        seed: master,
        config_hash: hash_value(&json!({ "profile": profile, "seed": master })),
        passed: summaries.iter().all(|s| s.passed),
        criteria,
        entries: summaries,
        wall_time_ms: start.elapsed().as_millis() as u64,
    };
    let path = out.join("suite.json");
    std::fs::write(&path, report.to_json()).map_err(|e| RunError::Output {
        path,
        reason: e.to_string(),
    })?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plans_cover_every_criterion_with_valid_configs() {
        for profile in [Profile::Quick, Profile::Full] {
            let p = plan(profile, 7);
            let mut crit: Vec<u32> = p.iter().map(|e| e.criterion).collect();
            crit.dedup();
            assert_eq!(crit, (1..=9).collect::<Vec<_>>());
            for e in &p {
                if let Task::Experiment(c) = &e.task {
                    c.validate().unwrap();
                }
            }
        }
    }

    #[test]
    fn full_plan_sizes() {
        let p = plan(Profile::Full, 0);
        let lemma_trials: usize = p
            .iter()
            .filter_map(|e| match &e.task {
                Task::Experiment(c) if c.experiment == Kind::ConeAudit => Some(c.trials),
                _ => None,
            })
            .sum();
        assert_eq!(lemma_trials, 6000);
    }

    #[test]
    fn plan_is_seed_deterministic() {
        let a: Vec<String> = plan(Profile::Quick, 3).iter().map(|e| format!("{:?}", e.task)).collect();
        let b: Vec<String> = plan(Profile::Quick, 3).iter().map(|e| format!("{:?}", e.task)).collect();
        let c: Vec<String> = plan(Profile::Quick, 4).iter().map(|e| format!("{:?}", e.task)).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
