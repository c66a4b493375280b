//! One function per experiment kind, plus the two fixed checks used only by
//! the suite (algebraic identities and the closed-form ODE solution).

use std::fs::File;
use std::path::Path;
use std::time::Instant;

use curvlab::cones::{
    audit_lemma, audit_tangency, check_condition_star, min_isotropic_curvature, random_cone_sample,
    AuditReport, Lemma, TangencyOptions, AUDIT_TOL,
};
use curvlab::curvature::{q_bilinear, q_map, ricci, wedge, CurvatureOperator, SymmetricEndomorphism};
use curvlab::ode::{
    integrate, monitor_invariance, monitoring_search, split_consistency, IntegratorControls, OdeState, Termination,
};
use curvlab::rng;
use curvlab::torus::{
    coupled_drift_heat, fixed_point_solve, parabolic_norm, pde_residual, solve_heat, verify_derivative_decay,
    verify_gradient_monotone, verify_hessian_bound, verify_holder, verify_holder_series, x_norm, FixedPointOptions,
    NormOptions, ParabolicNormSpec, ScalarField, Snapshot, SymTensorField, TensorTrajectory, TorusGrid,
};
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Kind, SnapshotFormat};
use crate::report::{Check, Relation, Report};

/// Outcome of one experiment before it is wrapped into a report.
pub struct Outcome {
    pub checks: Vec<Check>,
    pub result: Value,
}

type Run = curvlab::Result<Outcome>;

/// Runs a validated config. Library errors raised mid-run become failed
/// reports rather than configuration errors.
pub fn execute(cfg: &ExperimentConfig, out: Option<&Path>) -> Report {
    let start = Instant::now();
    let run = match cfg.experiment {
        Kind::ConeAudit => cone_audit(cfg),
        Kind::ConditionStar => condition_star(cfg),
        Kind::Tangency => tangency(cfg),
        Kind::OdeInvariance => ode_invariance(cfg, out),
        Kind::HeatEstimates => heat_estimates(cfg, out),
        Kind::Deturck => deturck(cfg, out),
        Kind::Norms => norms(cfg),
    };
    let mut report = match run {
        Ok(o) => Report::new(cfg.experiment.name(), cfg.seed, cfg.to_value(), o.checks, o.result, None),
        Err(e) => Report::new(cfg.experiment.name(), cfg.seed, cfg.to_value(), vec![], Value::Null, Some(e.to_string())),
    };
    report.wall_time_ms = start.elapsed().as_millis() as u64;
    report
}

fn audit_checks(r: &AuditReport, tol: f64) -> Vec<Check> {
    vec![
        Check::new("violations", r.violations as f64, Relation::AtMost, 0.0),
        Check::new("worst_relative_margin", r.worst_margin, Relation::AtLeast, -tol),
    ]
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn cone_audit(cfg: &ExperimentConfig) -> Run {
    let r = audit_lemma(cfg.lemma, cfg.trials, cfg.n, cfg.seed, &cfg.search())?;
    let mut checks = audit_checks(&r, AUDIT_TOL);
    let mut result = json!({ "audit": to_json(&r) });
    if cfg.lemma == Lemma::Wedge4NonnegNnic && cfg.diagonal_trials > 0 {
        let worst = diagonal_wedge_gap(cfg)?;
        checks.push(Check::new("diagonal_min_frame_gap", worst, Relation::AtMost, 1e-6));
        result["diagonal_trials"] = json!(cfg.diagonal_trials);
        result["diagonal_min_frame_gap"] = json!(worst);
    }
    Ok(Outcome { checks, result })
}

/// For diagonal `A`, the smallest isotropic curvature of `A∧id` is the sum of
/// the four smallest diagonal entries; returns the largest deviation.
fn diagonal_wedge_gap(cfg: &ExperimentConfig) -> curvlab::Result<f64> {
    let id = SymmetricEndomorphism::identity(cfg.n);
    let mut worst: f64 = 0.0;
    for t in 0..cfg.diagonal_trials {
        let tseed = rng::trial_seed(rng::splitmix64(cfg.seed ^ 0xD1A6), t as u64);
        let mut g = rng::seeded(tseed);
        let diag: Vec<f64> = (0..cfg.n).map(|_| g.sample(StandardNormal)).collect();
        let a = SymmetricEndomorphism::diagonal(&diag);
        let r = wedge(&a, &id)?;
        let m = min_isotropic_curvature(&r, &cfg.search().with_seed(rng::splitmix64(tseed)));
        let mut sorted = diag.clone();
        sorted.sort_by(f64::total_cmp);
        let exact: f64 = sorted[..4].iter().sum();
        worst = worst.max((m.value - exact).abs());
    }
    Ok(worst)
}

fn condition_star(cfg: &ExperimentConfig) -> Run {
    let r = check_condition_star(cfg.cone, cfg.trials, cfg.n, cfg.seed, &cfg.search())?;
    Ok(Outcome {
        checks: audit_checks(&r, AUDIT_TOL),
        result: json!({ "audit": to_json(&r) }),
    })
}

fn tangency(cfg: &ExperimentConfig) -> Run {
    let opts = TangencyOptions {
        search: cfg.search(),
        ..TangencyOptions::default()
    };
    let r = audit_tangency(cfg.cone, cfg.trials, cfg.n, cfg.seed, &opts)?;
    Ok(Outcome {
        checks: audit_checks(&r, r.tolerance),
        result: json!({ "audit": to_json(&r), "options": to_json(&opts) }),
    })
}

fn controls(cfg: &ExperimentConfig) -> IntegratorControls {
    IntegratorControls {
        rtol: cfg.rtol,
        atol: cfg.atol,
        blowup_norm: cfg.blowup_norm,
        ..IntegratorControls::default()
    }
}

fn ode_invariance(cfg: &ExperimentConfig, out: Option<&Path>) -> Run {
    let ctl = controls(cfg);
    let mut runs = Vec::with_capacity(cfg.trials);
    let mut worst_margin = f64::INFINITY;
    let mut worst_split: f64 = 0.0;
    for trial in 0..cfg.trials {
        let u = cfg.u[trial % cfg.u.len()];
        let tseed = rng::trial_seed(cfg.seed, trial as u64);
        let sample = random_cone_sample(cfg.cone, cfg.n, tseed, cfg.margin, &cfg.search())?;
        let s0 = OdeState::new(sample.operator.clone(), u)?;
        let search = monitoring_search().with_seed(rng::splitmix64(tseed));
        let inv = monitor_invariance(&s0, cfg.cone, cfg.horizon, &ctl, &search)?;
        let split = split_consistency(&s0.curvature(), u, cfg.horizon, &ctl)?;
        if trial == 0 && cfg.snapshots != SnapshotFormat::None {
            if let Some(dir) = out {
                inv.trajectory.write_csv(File::create(dir.join("ode-trajectory-0.csv"))?)?;
            }
        }
        worst_margin = worst_margin.min(inv.min_relative_margin);
        worst_split = worst_split.max(split.relative());
        let last = inv.trajectory.last();
        runs.push(json!({
            "trial": trial,
            "u": u,
            "initial_margin": inv.trajectory.samples[0].margins[0],
            "min_relative_margin": inv.min_relative_margin,
            "terminated": to_json(&inv.trajectory.terminated),
            "final_time": last.t,
            "final_norm": last.l.frobenius(),
            "accepted_steps": inv.trajectory.samples.len() - 1,
            "split_discrepancy": split.relative(),
        }));
    }
    Ok(Outcome {
        checks: vec![
            Check::new("min_relative_margin", worst_margin, Relation::AtLeast, -cfg.tolerance),
            Check::new("max_split_discrepancy", worst_split, Relation::AtMost, cfg.tolerance),
        ],
        result: json!({ "cone": cfg.cone, "controls": to_json(&ctl), "runs": runs }),
    })
}

fn write_snapshot(fmt: SnapshotFormat, out: Option<&Path>, name: &str, snap: &Snapshot) -> curvlab::Result<()> {
    let Some(dir) = out else { return Ok(()) };
    match fmt {
        SnapshotFormat::None => Ok(()),
        SnapshotFormat::Csv => snap.write_csv(File::create(dir.join(format!("{name}.csv")))?),
        SnapshotFormat::Raw => snap.write_raw(&dir.join(name)),
    }
}

fn heat_estimates(cfg: &ExperimentConfig, out: Option<&Path>) -> Run {
    let grid = TorusGrid::new(cfg.d, cfg.resolution)?;
    let mut worst_increase = f64::NEG_INFINITY;
    let mut hessian_ok = true;
    let mut worst_ratio: f64 = 0.0;
    let mut holder_ok = true;
    let mut max_c: f64 = 0.0;
    let mut per_field = Vec::with_capacity(cfg.fields);
    for i in 0..cfg.fields {
        let u0 = ScalarField::random_band_limited(&grid, cfg.max_mode, &mut rng::trial_rng(cfg.seed, i as u64))?;
        let mono = verify_gradient_monotone(&u0, cfg.horizon, cfg.steps)?;
        worst_increase = worst_increase.max(mono.max_increase);
        let mut entry = json!({ "field": i, "max_gradient_increase": mono.max_increase });
        if i < cfg.deep_fields {
            let h = verify_hessian_bound(&u0, cfg.alpha, cfg.horizon)?;
            let c = verify_holder(&u0, cfg.beta, cfg.horizon)?;
            hessian_ok &= h.passed;
            worst_ratio = worst_ratio.max(h.worst_ratio);
            holder_ok &= c.passed;
            max_c = max_c.max(c.fitted_c);
            entry["hessian_worst_ratio"] = json!(h.worst_ratio);
            entry["hessian_passed"] = json!(h.passed);
            entry["holder_fitted_c"] = json!(c.fitted_c);
            entry["holder_predicted_c"] = json!(c.predicted_c);
        }
        if i == 0 {
            let end = solve_heat(&u0, cfg.horizon, 1)?;
            write_snapshot(cfg.snapshots, out, "heat-field-0", &Snapshot::scalar(&end.fields[1], cfg.horizon))?;
        }
        per_field.push(entry);
    }

    // u₀ = cos x: sup|u(t) − u₀| = 1 − e^{−t} exactly, and 1 − e^{−t} ≤ t^β on (0, 1].
    let cos = ScalarField::from_fn(&grid, |x| x[0].cos());
    let cos_mono = verify_gradient_monotone(&cos, cfg.horizon, cfg.steps)?;
    let cos_hess = verify_hessian_bound(&cos, cfg.alpha, cfg.horizon)?;
    let cos_holder = verify_holder(&cos, cfg.beta, cfg.horizon.min(1.0))?;
    let mut exact_gap: f64 = 0.0;
    let mut inequality = true;
    for (t, s) in cos_holder.times.iter().zip(&cos_holder.sup_increment) {
        let exact = -(-t).exp_m1();
        exact_gap = exact_gap.max((s - exact).abs());
        inequality &= exact <= t.powf(cfg.beta);
    }
    worst_increase = worst_increase.max(cos_mono.max_increase);

    Ok(Outcome {
        checks: vec![
            Check::new("max_gradient_increase", worst_increase, Relation::AtMost, 1e-9),
            Check::flag("hessian_bound_and_lyapunov", hessian_ok && cos_hess.passed),
            Check::new("hessian_worst_ratio", worst_ratio.max(cos_hess.worst_ratio), Relation::AtMost, 1.0 + 1e-12),
            Check::flag("holder_constant_finite", holder_ok && cos_holder.passed && max_c.is_finite()),
            Check::new("cosine_increment_vs_exact", exact_gap, Relation::AtMost, 1e-12),
            Check::flag("cosine_holder_inequality", inequality && !cos_holder.times.is_empty()),
            Check::new("cosine_fitted_c", cos_holder.fitted_c, Relation::AtMost, 1.0),
        ],
        result: json!({
            "t_prime": cos_hess.t_prime,
            "fields": per_field,
            "max_fitted_c": max_c,
            "cosine": {
                "monotone": to_json(&cos_mono),
                "hessian": to_json(&cos_hess),
                "holder": to_json(&cos_holder),
            },
        }),
    })
}

fn sine_metric(grid: &TorusGrid, amplitude: f64) -> curvlab::Result<SymTensorField> {
    SymTensorField::single(grid, 0, 0, |x| amplitude * x[0].sin())
}

fn fixed_point_options(cfg: &ExperimentConfig) -> FixedPointOptions {
    FixedPointOptions {
        tol: cfg.fixed_point_tol,
        max_iters: cfg.max_iters,
        steps_per_unit: cfg.steps_per_unit,
        ..FixedPointOptions::default()
    }
}

const DECAY_SAMPLES: usize = 64;

fn deturck(cfg: &ExperimentConfig, out: Option<&Path>) -> Run {
    let grid = TorusGrid::new(cfg.d, cfg.resolution)?;
    let opts = fixed_point_options(cfg);
    let h0 = sine_metric(&grid, cfg.amplitude)?;
    let fp = match fixed_point_solve(&h0, cfg.horizon, &opts) {
        Ok(fp) => fp,
        Err(e @ curvlab::Error::NonContraction { .. }) => {
            return Ok(Outcome {
                checks: vec![Check::flag("contraction", false)],
                result: json!({ "non_contraction": e.to_string() }),
            })
        }
        Err(e) => return Err(e),
    };
    let max_factor = fp.contraction_factors.iter().copied().fold(0.0, f64::max);
    let stride = (cfg.steps_per_unit / 32).max(1);
    let residual = pde_residual(&fp.trajectory, stride)?;
    let decay = verify_derivative_decay(&fp, cfg.k_max, DECAY_SAMPLES)?;
    let mut checks = vec![
        Check::flag("converged", fp.converged),
        Check::new("max_contraction_factor", max_factor, Relation::Below, 1.0),
        Check::new("fixed_point_residual_sup", fp.residual_sup, Relation::AtMost, cfg.residual_tol),
        Check::new("pde_residual_sup", residual, Relation::AtMost, 10.0 * cfg.fixed_point_tol),
        Check::flag("decay_constants_finite", decay.passed),
    ];
    let mut result = json!({
        "iterations": fp.iterations,
        "contraction_factors": fp.contraction_factors,
        "increments": fp.increments,
        "sup_increments": fp.sup_increments,
        "pde_residual": residual,
        "final_sup": fp.trajectory.fields.last().map(SymTensorField::sup_norm),
        "decay": to_json(&decay),
    });

    // Linearity at leading order: doubling h₀ at most doubles C₁·sup|h₀|.
    if 2.0 * cfg.amplitude.abs() <= opts.epsilon0 && cfg.amplitude != 0.0 {
        let fp2 = fixed_point_solve(&sine_metric(&grid, 2.0 * cfg.amplitude)?, cfg.horizon, &opts)?;
        let d2 = verify_derivative_decay(&fp2, 1, DECAY_SAMPLES)?;
        let ratio = (d2.c_k[0] * 2.0) / decay.c_k[0].max(f64::MIN_POSITIVE);
        checks.push(Check::new("doubled_amplitude_c1_product_ratio", ratio, Relation::AtMost, 2.0 * 1.05));
        result["doubled_amplitude_c1"] = json!(d2.c_k[0]);
    }

    // Drift-heat flow driven by the solved metric, from u₀ = cos x.
    let u0 = ScalarField::from_fn(&grid, |x| x[0].cos());
    let drift = coupled_drift_heat(&u0, &fp.trajectory, cfg.horizon)?;
    let sups: Vec<f64> = drift.fields.iter().map(ScalarField::max_abs).collect();
    let max_rise = sups.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let holder = verify_holder_series(&drift.times, &drift.fields, cfg.beta, decay.b_const)?;
    checks.push(Check::new("drift_heat_sup_excess", drift.sup_excess, Relation::AtMost, 1e-8));
    checks.push(Check::new("drift_heat_sup_rise", max_rise, Relation::AtMost, 1e-12));
    checks.push(Check::flag("drift_heat_holder_finite", holder.passed));
    result["drift_heat"] = json!({
        "substeps": drift.substeps,
        "sup_excess": drift.sup_excess,
        "holder": to_json(&holder),
    });
    if let Some(last) = fp.trajectory.fields.last() {
        write_snapshot(cfg.snapshots, out, "deturck-final", &Snapshot::tensor(last, cfg.horizon))?;
    }
    Ok(Outcome { checks, result })
}

fn norms(cfg: &ExperimentConfig) -> Run {
    let grid = TorusGrid::new(cfg.d, cfg.resolution)?;
    let opts = fixed_point_options(cfg);
    let h0 = sine_metric(&grid, cfg.amplitude)?;
    let fp = fixed_point_solve(&h0, cfg.horizon, &opts)?;
    let traj = &fp.trajectory;
    let nopts = NormOptions::default();
    let x = x_norm(traj, traj, &nopts)?;
    let mut values = Vec::new();
    let mut finite = true;
    for r2 in [cfg.horizon / 4.0, cfg.horizon] {
        for p in [2.0, cfg.d as f64 + 4.0] {
            for one_sided in [false, true] {
                let spec = ParabolicNormSpec {
                    p,
                    x: 0,
                    r: r2.sqrt(),
                    one_sided,
                };
                let v = parabolic_norm(traj, traj, &spec)?;
                finite &= v.is_finite() && v >= 0.0;
                values.push(json!({ "p": p, "r": spec.r, "one_sided": one_sided, "value": v }));
            }
        }
    }
    // Oracles: a constant field has norm equal to its value, zero has X-norm 0.
    let c = if cfg.amplitude != 0.0 { cfg.amplitude.abs() } else { 0.01 };
    let constant = TensorTrajectory {
        times: traj.times.clone(),
        fields: vec![SymTensorField::single(&grid, 0, 0, |_| c)?; traj.times.len()],
    };
    let spec = ParabolicNormSpec {
        p: 3.0,
        x: grid.len() / 3,
        r: (cfg.horizon / 2.0).sqrt(),
        one_sided: false,
    };
    let const_gap = (parabolic_norm(&constant, &constant, &spec)? - c).abs() / c;
    let zero = TensorTrajectory {
        times: traj.times.clone(),
        fields: vec![SymTensorField::zeros(&grid); traj.times.len()],
    };
    let x_zero = x_norm(&zero, &zero, &nopts)?;
    Ok(Outcome {
        checks: vec![
            Check::flag("norms_finite_nonnegative", finite && x.is_finite()),
            Check::new("x_norm_minus_sup", x - traj.sup_norm(), Relation::AtLeast, -1e-15),
            Check::new("constant_field_relative_gap", const_gap, Relation::AtMost, 1e-12),
            Check::new("x_norm_of_zero", x_zero, Relation::AtMost, 0.0),
        ],
        result: json!({
            "x_norm": x,
            "sup": traj.sup_norm(),
            "parabolic_norms": values,
            "norm_options": to_json(&nopts),
        }),
    })
}

/// `Q(Id) = (n−1)Id` and `Q(L, Id) = ric(L)∧id` on random `L`, plus
/// `id∧id = Id`; returns the largest relative error per dimension.
pub fn identity_oracles(dims: &[usize], samples: usize, seed: u64) -> Report {
    let start = Instant::now();
    let config = json!({ "dims": dims, "samples": samples, "seed": seed });
    let run = || -> curvlab::Result<Outcome> {
        let mut per_dim = Vec::new();
        let mut worst: f64 = 0.0;
        for &n in dims {
            let id = CurvatureOperator::identity(n)?;
            let idn = SymmetricEndomorphism::identity(n);
            let q_id = q_map(&id).minus(&id.scaled(n as f64 - 1.0))?.frobenius() / ((n - 1) as f64 * id.frobenius());
            let wedge_id = wedge(&idn, &idn)?.minus(&id)?.frobenius() / id.frobenius();
            let mut polar: f64 = 0.0;
            let mut g = rng::trial_rng(seed, n as u64);
            for _ in 0..samples {
                let l = CurvatureOperator::random_gaussian(n, &mut g)?;
                let lhs = q_bilinear(&l, &id)?;
                let rhs = wedge(&ricci(&l), &idn)?;
                polar = polar.max(lhs.minus(&rhs)?.frobenius() / rhs.frobenius().max(l.frobenius()));
            }
            worst = worst.max(q_id).max(wedge_id).max(polar);
            per_dim.push(json!({ "n": n, "q_identity": q_id, "wedge_identity": wedge_id, "polarization": polar }));
        }
        Ok(Outcome {
            checks: vec![Check::new("max_relative_error", worst, Relation::AtMost, 1e-10)],
            result: json!({ "dims": per_dim }),
        })
    };
    finish("identity-oracles", seed, config, run(), start)
}

/// From `L₀ = Id`, `u = 0` in dimension 4 the solution is `Id/(1 − 6t)`.
pub fn ode_closed_form() -> Report {
    let start = Instant::now();
    let n = 4;
    let ctl = IntegratorControls::default();
    let config = json!({ "n": n, "horizon": 0.2, "controls": to_json(&ctl) });
    let run = || -> curvlab::Result<Outcome> {
        let id = CurvatureOperator::identity(n)?;
        let traj = integrate(&OdeState::new(id.clone(), 0.0)?, 0.2, &ctl)?;
        let mut worst: f64 = 0.0;
        let mut checked = 0usize;
        for s in &traj.samples {
            if s.state.t <= 0.15 {
                let exact = id.scaled(1.0 / (1.0 - 6.0 * s.state.t));
                worst = worst.max(s.state.l.minus(&exact)?.frobenius() / exact.frobenius());
                checked += 1;
            }
        }
        let t_end = traj.last().t;
        Ok(Outcome {
            checks: vec![
                Check::new("max_relative_error_t_le_0.15", worst, Relation::AtMost, 1e-7),
                Check::flag("blowup_detected", traj.terminated == Termination::Blowup),
                Check::new("blowup_time", t_end, Relation::Below, 1.0 / 6.0 + 1e-3),
            ],
            result: json!({
                "samples_checked": checked,
                "terminated": to_json(&traj.terminated),
                "final_time": t_end,
                "final_norm": traj.last().l.frobenius(),
            }),
        })
    };
    finish("ode-closed-form", 0, config, run(), start)
}

fn finish(op: &str, seed: u64, config: Value, run: Run, start: Instant) -> Report {
    let mut r = match run {
        Ok(o) => Report::new(op, seed, config, o.checks, o.result, None),
        Err(e) => Report::new(op, seed, config, vec![], Value::Null, Some(e.to_string())),
    };
    r.wall_time_ms = start.elapsed().as_millis() as u64;
    r
}
