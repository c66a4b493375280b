//! Heat flow on the flat torus and the gradient, Hessian and Hölder
//! estimates it satisfies.

use serde::{Deserialize, Serialize};

use super::spectral::{Spectral, C64};
use super::sup::{Quadratic, SupEngine, SupOptions};
use super::ScalarField;
use crate::error::{Error, Result};

/// Fields with more spectral energy than this outside the two-thirds box are
/// considered unresolved.
pub const RESOLUTION_TOL: f64 = 1e-10;
/// Absolute slack in the gradient monotonicity check.
pub const MONOTONE_SLACK: f64 = 1e-9;
const WINDOW_SAMPLES: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct HeatSolution {
    pub times: Vec<f64>,
    pub fields: Vec<ScalarField>,
}

/// Spectrum of `u₀` with the exact evolution `û(t) = e^{−|κ|²t} û₀`.
pub(crate) struct HeatEvolution {
    pub(crate) engine: SupEngine,
    spec0: Vec<C64>,
    symbols: Vec<f64>,
}

impl HeatEvolution {
    pub(crate) fn new(u0: &ScalarField, opts: SupOptions) -> Self {
        let g = u0.grid();
        let engine = SupEngine::new(g.resolution(), g.periods(), opts);
        let s = engine.base();
        let spec0 = s.forward(u0.values());
        let symbols = (0..s.len()).map(|i| s.laplacian_symbol(i)).collect();
        Self { engine, spec0, symbols }
    }

    pub(crate) fn spectrum_at(&self, t: f64) -> Vec<C64> {
        self.spec0
            .iter()
            .zip(&self.symbols)
            .map(|(c, k2)| c * (-k2 * t).exp())
            .collect()
    }

    /// Spectrum of `u(t) − u₀`.
    pub(crate) fn increment_at(&self, t: f64) -> Vec<C64> {
        self.spec0
            .iter()
            .zip(&self.symbols)
            .map(|(c, k2)| c * (-k2 * t).exp_m1())
            .collect()
    }

    fn spectral(&self) -> &Spectral {
        self.engine.base()
    }

    fn d(&self) -> usize {
        self.spectral().d()
    }
}

/// Exact Fourier solution sampled at `steps + 1` equally spaced times.
pub fn solve_heat(u0: &ScalarField, horizon: f64, steps: usize) -> Result<HeatSolution> {
    if !(horizon > 0.0) || steps == 0 {
        return Err(Error::InvalidParameter(format!(
            "need horizon > 0 and steps ≥ 1, got {horizon} and {steps}"
        )));
    }
    let ev = HeatEvolution::new(u0, SupOptions::default());
    let mut times = Vec::with_capacity(steps + 1);
    let mut fields = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let t = horizon * i as f64 / steps as f64;
        let values = if i == 0 {
            u0.values().to_vec()
        } else {
            ev.spectral().inverse_real(ev.spectrum_at(t))
        };
        times.push(t);
        fields.push(ScalarField::new(u0.grid().clone(), values)?);
    }
    Ok(HeatSolution { times, fields })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldNorms {
    pub sup: f64,
    pub sup_grad: f64,
    pub sup_hess: f64,
}

/// `sup|u|`, `sup|∇u|` and `sup|∇²u|` (Frobenius), from a 4× oversampled
/// evaluation refined by Newton ascent on the Fourier series.
pub fn field_norms(u: &ScalarField) -> Result<FieldNorms> {
    let g = u.grid();
    let engine = SupEngine::new(g.resolution(), g.periods(), SupOptions::default());
    let spec = engine.base().forward(u.values());
    check_resolved(engine.base(), &spec)?;
    let d = g.d();
    let s = engine.sups(&spec, &[Quadratic::value(), Quadratic::gradient(d), Quadratic::hessian(d)]);
    Ok(FieldNorms {
        sup: s[0].sqrt(),
        sup_grad: s[1].sqrt(),
        sup_hess: s[2].sqrt(),
    })
}

fn check_resolved(s: &Spectral, spec: &[C64]) -> Result<()> {
    let tail = s.tail_fraction(spec);
    if tail > RESOLUTION_TOL {
        return Err(Error::Unresolved(tail));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub times: Vec<f64>,
    pub sup_grad: Vec<f64>,
    /// Largest `sup|∇u(t_{i+1})| − sup|∇u(t_i)|`.
    pub max_increase: f64,
    pub passed: bool,
}

/// Checks that `sup|∇u(t)|` does not increase along the heat flow.
pub fn verify_gradient_monotone(u0: &ScalarField, horizon: f64, steps: usize) -> Result<MonotoneReport> {
    if !(horizon > 0.0) || steps == 0 {
        return Err(Error::InvalidParameter(format!(
            "need horizon > 0 and steps ≥ 1, got {horizon} and {steps}"
        )));
    }
    let ev = HeatEvolution::new(u0, SupOptions::default());
    check_resolved(ev.spectral(), &ev.spec0)?;
    let q = [Quadratic::gradient(ev.d())];
    let mut times = Vec::with_capacity(steps + 1);
    let mut sups = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let t = horizon * i as f64 / steps as f64;
        times.push(t);
        sups.push(ev.engine.sups(&ev.spectrum_at(t), &q)[0].sqrt());
    }
    let max_increase = sups
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(MonotoneReport {
        passed: max_increase <= MONOTONE_SLACK,
        times,
        sup_grad: sups,
        max_increase,
    })
}

/// `T′ = (2/(C·A + 1 + δ))^{1/δ}` with `δ = 2α − 1`; on the flat torus `C·A = 0`.
pub fn hessian_window(alpha: f64) -> f64 {
    let delta = 2.0 * alpha - 1.0;
    (2.0 / (1.0 + delta)).powf(1.0 / delta)
}

/// `WINDOW_SAMPLES` geometric plus `WINDOW_SAMPLES` uniform times in `(0, end]`.
fn window_times(end: f64) -> Vec<f64> {
    let mut ts: Vec<f64> = (0..WINDOW_SAMPLES)
        .map(|i| end * 1e-6f64.powf(1.0 - i as f64 / (WINDOW_SAMPLES - 1) as f64))
        .chain((1..=WINDOW_SAMPLES).map(|i| end * i as f64 / WINDOW_SAMPLES as f64))
        .collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianReport {
    pub alpha: f64,
    pub delta: f64,
    pub t_prime: f64,
    pub sup_grad0: f64,
    pub times: Vec<f64>,
    pub sup_hess: Vec<f64>,
    /// `sup|∇u(0)| / t^α` at each sampled time.
    pub bound: Vec<f64>,
    /// `sup (t^{1+δ}|∇²u|² + |∇u|²)` at each sampled time.
    pub lyapunov: Vec<f64>,
    pub worst_ratio: f64,
    pub passed: bool,
}

/// Checks `sup|∇²u(t)| ≤ sup|∇u(0)|/t^α` and the monotonicity of
/// `F(t) = t^{1+δ}|∇²u|² + |∇u|²` on `(0, min(horizon, T′))`.
pub fn verify_hessian_bound(u0: &ScalarField, alpha: f64, horizon: f64) -> Result<HessianReport> {
    if !(alpha > 0.5) {
        return Err(Error::InvalidParameter(format!("alpha must exceed 1/2, got {alpha}")));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be > 0, got {horizon}")));
    }
    let delta = 2.0 * alpha - 1.0;
    let t_prime = hessian_window(alpha);
    let ev = HeatEvolution::new(u0, SupOptions::default());
    check_resolved(ev.spectral(), &ev.spec0)?;
    let d = ev.d();
    let g0 = ev.engine.sups(&ev.spec0, &[Quadratic::gradient(d)])[0];
    let sup_grad0 = g0.sqrt();
    let times = window_times(horizon.min(t_prime));
    let mut sup_hess = Vec::new();
    let mut bound = Vec::new();
    let mut lyapunov = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    let mut passed = true;
    for &t in &times {
        let spec = ev.spectrum_at(t);
        let w = t.powf(1.0 + delta);
        let s = ev
            .engine
            .sups(&spec, &[Quadratic::hessian(d), Quadratic::hessian(d).scaled(w).plus(Quadratic::gradient(d))]);
        let h = s[0].sqrt();
        let b = sup_grad0 / t.powf(alpha);
        if b > 0.0 {
            worst_ratio = worst_ratio.max(h / b);
        }
        passed &= h <= b * (1.0 + 1e-12) + 1e-12;
        passed &= s[1] <= g0 + 1e-9;
        sup_hess.push(h);
        bound.push(b);
        lyapunov.push(s[1]);
    }
    Ok(HessianReport {
        alpha,
        delta,
        t_prime,
        sup_grad0,
        times,
        sup_hess,
        bound,
        lyapunov,
        worst_ratio,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub beta: f64,
    /// `α = 1 − β`, the Hessian exponent feeding the prediction.
    pub alpha: f64,
    pub window: f64,
    pub times: Vec<f64>,
    pub sup_increment: Vec<f64>,
    /// Smallest C with `sup|u(t) − u(0)| ≤ C t^β` on the sampled times.
    pub fitted_c: f64,
    /// `√d·C₂/(1−α) + 2·C₁·B` with `C₁ = C₂ = sup|∇u(0)|`.
    pub predicted_c: f64,
    pub within_prediction: bool,
    pub passed: bool,
}

/// Hölder-in-time estimate for the pure heat flow, on `(0, min(horizon, 1, T′(1−β)))`.
pub fn verify_holder(u0: &ScalarField, beta: f64, horizon: f64) -> Result<HolderReport> {
    let alpha = check_beta(beta)?;
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be > 0, got {horizon}")));
    }
    let ev = HeatEvolution::new(u0, SupOptions::default());
    let window = horizon.min(1.0).min(hessian_window(alpha));
    let times = window_times(window);
    let sups: Vec<f64> = times
        .iter()
        .map(|&t| ev.engine.sups(&ev.increment_at(t), &[Quadratic::value()])[0].sqrt())
        .collect();
    let c1 = ev.engine.sups(&ev.spec0, &[Quadratic::gradient(ev.d())])[0].sqrt();
    Ok(holder_report(beta, alpha, window, times, sups, c1, 0.0, ev.d()))
}

pub(crate) fn check_beta(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::InvalidParameter(format!("beta must lie in (0, 1/2), got {beta}")));
    }
    Ok(1.0 - beta)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn holder_report(
    beta: f64,
    alpha: f64,
    window: f64,
    times: Vec<f64>,
    sups: Vec<f64>,
    c1: f64,
    b: f64,
    d: usize,
) -> HolderReport {
    let fitted_c = times
        .iter()
        .zip(&sups)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, s)| s / t.powf(beta))
        .fold(0.0, f64::max);
    let predicted_c = (d as f64).sqrt() * c1 / (1.0 - alpha) + 2.0 * c1 * b;
    HolderReport {
        beta,
        alpha,
        window,
        times,
        sup_increment: sups,
        fitted_c,
        predicted_c,
        within_prediction: fitted_c <= predicted_c * (1.0 + 1e-12),
        passed: fitted_c.is_finite(),
    }
}

/// Hölder fit for a sampled trajectory (e.g. the drift-heat flow), using
/// refined sups of `u(t) − u(0)`.
pub fn verify_holder_series(
    times: &[f64],
    fields: &[ScalarField],
    beta: f64,
    b_const: f64,
) -> Result<HolderReport> {
    let alpha = check_beta(beta)?;
    let Some(u0) = fields.first() else {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    };
    let g = u0.grid();
    let engine = SupEngine::new(g.resolution(), g.periods(), SupOptions::default());
    let s = engine.base();
    let spec0 = s.forward(u0.values());
    let c1 = engine.sups(&spec0, &[Quadratic::gradient(g.d())])[0].sqrt();
    let window = times.last().copied().unwrap_or(0.0).min(1.0).min(hessian_window(alpha));
    let mut ts = Vec::new();
    let mut sups = Vec::new();
    for (t, f) in times.iter().zip(fields) {
        if *t <= 0.0 || *t > window {
            continue;
        }
        let spec = s.forward(f.minus(u0)?.values());
        ts.push(*t);
        sups.push(engine.sups(&spec, &[Quadratic::value()])[0].sqrt());
    }
    Ok(holder_report(beta, alpha, window, ts, sups, c1, b_const, g.d()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::torus::TorusGrid;

    #[test]
    fn cosine_decays_exactly() {
        let g = TorusGrid::new(1, 32).unwrap();
        let u0 = ScalarField::from_fn(&g, |x| x[0].cos());
        let sol = solve_heat(&u0, 2.0, 10).unwrap();
        for (t, f) in sol.times.iter().zip(&sol.fields) {
            for i in 0..g.len() {
                let x = g.coords(i)[0];
                assert!((f.values()[i] - (-t).exp() * x.cos()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn two_mode_decay_and_constants() {
        let g = TorusGrid::new(2, 16).unwrap();
        let u0 = ScalarField::from_fn(&g, |x| x[0].cos() + (2.0 * x[1]).sin());
        let sol = solve_heat(&u0, 1.0, 4).unwrap();
        let t = sol.times[3];
        for i in 0..g.len() {
            let x = g.coords(i);
            let exact = (-t).exp() * x[0].cos() + (-4.0 * t).exp() * (2.0 * x[1]).sin();
            assert!((sol.fields[3].values()[i] - exact).abs() < 1e-12);
        }
        let c = ScalarField::constant(&g, 2.5);
        let sol = solve_heat(&c, 1.0, 3).unwrap();
        for f in &sol.fields {
            assert!(f.values().iter().all(|v| (v - 2.5).abs() < 1e-14));
        }
    }

    #[test]
    fn mass_and_max_principle() {
        let g = TorusGrid::new(2, 32).unwrap();
        let u0 = ScalarField::random_band_limited(&g, 6, &mut rng::seeded(3)).unwrap();
        let sol = solve_heat(&u0, 1.0, 20).unwrap();
        for f in &sol.fields {
            assert!((f.mean() - u0.mean()).abs() < 1e-14);
            assert!(f.max() <= u0.max() + 1e-12 && f.min() >= u0.min() - 1e-12);
        }
    }

    #[test]
    fn heat_commutes_with_translation() {
        let g = TorusGrid::new(2, 32).unwrap();
        let u0 = ScalarField::random_band_limited(&g, 5, &mut rng::seeded(4)).unwrap();
        let shift = [3, -5];
        let a = solve_heat(&u0.translated(&shift), 0.5, 1).unwrap();
        let b = solve_heat(&u0, 0.5, 1).unwrap();
        let bt = b.fields[1].translated(&shift);
        assert!(a.fields[1].minus(&bt).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn norms_of_simple_fields() {
        let g = TorusGrid::new(2, 32).unwrap();
        let n = field_norms(&ScalarField::from_fn(&g, |x| x[0].cos())).unwrap();
        for v in [n.sup, n.sup_grad, n.sup_hess] {
            assert!((v - 1.0).abs() < 1e-13, "{n:?}");
        }
        let n = field_norms(&ScalarField::constant(&g, -3.0)).unwrap();
        assert!((n.sup - 3.0).abs() < 1e-14 && n.sup_grad < 1e-13 && n.sup_hess < 1e-13);
        let n = field_norms(&ScalarField::from_fn(&g, |x| x[0].cos() + x[1].cos())).unwrap();
        assert!((n.sup_grad - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn unresolved_field_is_flagged() {
        let g = TorusGrid::new(1, 16).unwrap();
        let u = ScalarField::from_fn(&g, |x| (7.0 * x[0]).cos());
        assert!(matches!(field_norms(&u), Err(Error::Unresolved(_))));
    }

    #[test]
    fn gradient_monotone_examples() {
        let g = TorusGrid::new(2, 32).unwrap();
        let rep = verify_gradient_monotone(&ScalarField::from_fn(&g, |x| x[0].cos()), 2.0, 20).unwrap();
        assert!(rep.passed);
        for (t, s) in rep.times.iter().zip(&rep.sup_grad) {
            assert!((s - (-t).exp()).abs() < 1e-13);
        }
        let rep = verify_gradient_monotone(&ScalarField::constant(&g, 1.0), 1.0, 5).unwrap();
        assert!(rep.sup_grad.iter().all(|&s| s < 1e-13));
        let u0 = ScalarField::random_band_limited(&g, 8, &mut rng::seeded(5)).unwrap();
        assert!(verify_gradient_monotone(&u0, 1.0, 50).unwrap().passed);
    }

    #[test]
    fn hessian_bound_examples() {
        let g = TorusGrid::new(2, 32).unwrap();
        assert!((hessian_window(0.6) - (2.0f64 / 1.2).powi(5)).abs() < 1e-12);
        let rep = verify_hessian_bound(&ScalarField::from_fn(&g, |x| x[0].cos()), 0.6, 100.0).unwrap();
        assert!(rep.passed, "{rep:?}");
        for (t, h) in rep.times.iter().zip(&rep.sup_hess) {
            assert!((h - (-t).exp()).abs() < 1e-12);
        }
        assert!(verify_hessian_bound(&ScalarField::constant(&g, 1.0), 0.6, 1.0).unwrap().passed);
        assert!(verify_hessian_bound(&ScalarField::constant(&g, 1.0), 0.5, 1.0).is_err());
        let u0 = ScalarField::random_band_limited(&g, 8, &mut rng::seeded(6)).unwrap();
        assert!(verify_hessian_bound(&u0, 0.6, 100.0).unwrap().passed);
    }

    #[test]
    fn holder_examples() {
        let g = TorusGrid::new(2, 32).unwrap();
        let rep = verify_holder(&ScalarField::from_fn(&g, |x| x[0].cos()), 0.25, 1.0).unwrap();
        assert!(rep.passed && rep.within_prediction);
        assert!(rep.fitted_c <= 1.0);
        for (t, s) in rep.times.iter().zip(&rep.sup_increment) {
            assert!((s - (-(-t).exp_m1())).abs() < 1e-14);
        }
        let rep = verify_holder(&ScalarField::constant(&g, 4.0), 0.25, 1.0).unwrap();
        assert_eq!(rep.fitted_c, 0.0);
        assert!(verify_holder(&ScalarField::constant(&g, 4.0), 0.5, 1.0).is_err());
    }
}
