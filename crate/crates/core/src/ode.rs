//! Pointwise reaction system for `L = R − u·Id`:
//!
//! dL/dt = 2Q(L) + 4u·ric(L)∧id + 2(n−1)u²·Id,  du/dt = 0,
//!
//! integrated with an adaptive Dormand–Prince 5(4) pair, plus cone monitoring
//! along the trajectory.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cones::{minimize_frames, ConeId, FourFrame, FrameSearchOptions};
use crate::curvature::{q_map, ricci, wedge, CurvatureOperator, SymmetricEndomorphism};
use crate::error::{Error, Result};
use crate::lambda2::Lambda2Basis;

#[derive(Debug, Clone, PartialEq)]
pub struct OdeState {
    pub l: CurvatureOperator,
    pub u: f64,
    pub t: f64,
}

impl OdeState {
    pub fn new(l: CurvatureOperator, u: f64) -> Result<Self> {
        if !(u >= 0.0) {
            return Err(Error::InvalidParameter(format!("u must be ≥ 0, got {u}")));
        }
        Ok(Self { l, u, t: 0.0 })
    }

    /// `R = L + u·Id`.
    pub fn curvature(&self) -> CurvatureOperator {
        self.l.shifted(self.u)
    }
}

/// Derivative of the state; `du/dt` is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeDerivative {
    pub dl: CurvatureOperator,
    pub du: f64,
}

pub fn reaction_rhs(s: &OdeState) -> OdeDerivative {
    OdeDerivative {
        dl: CurvatureOperator::from_parts_unchecked(s.l.basis(), l_rhs(s.l.basis(), s.l.matrix(), s.u)),
        du: 0.0,
    }
}

fn l_rhs(basis: Lambda2Basis, l: &DMatrix<f64>, u: f64) -> DMatrix<f64> {
    let n = basis.n();
    let op = CurvatureOperator::from_parts_unchecked(basis, l.clone());
    let mut out = q_map(&op).into_matrix() * 2.0;
    if u != 0.0 {
        let w = wedge(&ricci(&op), &SymmetricEndomorphism::identity(n)).expect("same dimension");
        out += w.matrix() * (4.0 * u);
        let c = 2.0 * (n as f64 - 1.0) * u * u;
        for a in 0..basis.dim() {
            out[(a, a)] += c;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorControls {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    /// Integration stops once ‖L‖_F exceeds this value.
    pub blowup_norm: f64,
    /// Smallest admissible step, relative to max(1, |t|).
    pub min_step: f64,
}

impl Default for IntegratorControls {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_step: f64::INFINITY,
            blowup_norm: 1e8,
            min_step: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TimeHorizon,
    Blowup,
    StepFloor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub state: OdeState,
    /// One entry per monitored cone, in the order of `Trajectory::cones`.
    pub margins: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub cones: Vec<ConeId>,
    pub samples: Vec<TrajectorySample>,
    pub terminated: Termination,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &OdeState {
        &self.samples.last().expect("trajectory has its initial sample").state
    }

    /// CSV with columns `t`, every `L(i,j|k,l)` with `(i,j) ≤ (k,l)`, `u` and
    /// one `margin_<cone>` per monitored cone.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let Some(first) = self.samples.first() else {
            return Ok(());
        };
        let basis = first.state.l.basis();
        let dim = basis.dim();
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        for a in 0..dim {
            for b in a..dim {
                header.push(format!("L({}|{})", basis.label(a), basis.label(b)));
            }
        }
        header.push("u".into());
        for c in &self.cones {
            header.push(format!("margin_{c}"));
        }
        out.write_record(&header).map_err(csv_err)?;
        for s in &self.samples {
            let m = s.state.l.matrix();
            let mut row = vec![fmt_f64(s.state.t)];
            for a in 0..dim {
                for b in a..dim {
                    row.push(fmt_f64(m[(a, b)]));
                }
            }
            row.push(fmt_f64(s.state.u));
            row.extend(s.margins.iter().map(|&v| fmt_f64(v)));
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

// Dormand–Prince 5(4) tableau. The system is autonomous, so the nodes are
// not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive DOPRI5 on a tuple of matrices. `rhs` fills the derivative of
/// every component; `accept` sees each accepted step and may stop the run.
pub(crate) fn dopri5<F, G>(
    y0: Vec<DMatrix<f64>>,
    horizon: f64,
    ctl: &IntegratorControls,
    mut rhs: F,
    mut accept: G,
) -> Result<(Termination, usize)>
where
    F: FnMut(&[DMatrix<f64>]) -> Vec<DMatrix<f64>>,
    G: FnMut(f64, &[DMatrix<f64>]) -> bool,
{
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be > 0, got {horizon}")));
    }
    let mut y = y0;
    let mut t = 0.0;
    let mut k1 = rhs(&y);
    let mut h = initial_step(&y, &k1, ctl).min(ctl.max_step).min(horizon);
    let mut rejected = 0;
    let stages = |y: &[DMatrix<f64>], coeffs: &[f64], ks: &[Vec<DMatrix<f64>>], h: f64| {
        y.iter()
            .enumerate()
            .map(|(c, yc)| {
                let mut out = yc.clone();
                for (j, &a) in coeffs.iter().enumerate() {
                    if a != 0.0 && j < ks.len() {
                        out += &ks[j][c] * (h * a);
                    }
                }
                out
            })
            .collect::<Vec<_>>()
    };
    loop {
        if t >= horizon {
            return Ok((Termination::TimeHorizon, rejected));
        }
        if h < ctl.min_step * t.abs().max(1.0) {
            return Ok((Termination::StepFloor, rejected));
        }
        let last = horizon - t <= h * (1.0 + 1e-12);
        if last {
            h = horizon - t;
        }
        let mut ks = vec![k1.clone()];
        for s in 1..7 {
            let ys = stages(&y, &A[s], &ks, h);
            ks.push(rhs(&ys));
        }
        let y5 = stages(&y, &B5, &ks, h);
        // FSAL: stage 7 was evaluated at y5.
        let mut err_sq = 0.0;
        let mut count = 0usize;
        let mut finite = true;
        for c in 0..y.len() {
            for i in 0..y[c].len() {
                let mut e = 0.0;
                for s in 0..7 {
                    e += (B5[s] - B4[s]) * ks[s][c][i];
                }
                e *= h;
                let sc = ctl.atol + ctl.rtol * y[c][i].abs().max(y5[c][i].abs());
                let q = e / sc;
                finite &= q.is_finite();
                err_sq += q * q;
                count += 1;
            }
        }
        let err = if finite { (err_sq / count as f64).sqrt() } else { f64::INFINITY };
        if err <= 1.0 {
            t = if last { horizon } else { t + h };
            y = y5;
            k1 = ks.pop().expect("seven stages");
            if !accept(t, &y) {
                return Ok((Termination::Blowup, rejected));
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(ctl.max_step);
        } else {
            rejected += 1;
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h *= fac;
        }
    }
}

/// Starting step from the usual two-derivative estimate.
fn initial_step(y: &[DMatrix<f64>], f: &[DMatrix<f64>], ctl: &IntegratorControls) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    let mut count = 0usize;
    for (yc, fc) in y.iter().zip(f) {
        for (a, b) in yc.iter().zip(fc.iter()) {
            let sc = ctl.atol + ctl.rtol * a.abs();
            d0 += (a / sc).powi(2);
            d1 += (b / sc).powi(2);
            count += 1;
        }
    }
    let (d0, d1) = ((d0 / count as f64).sqrt(), (d1 / count as f64).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.max(1e-10)
}

/// Integrates the (L, u) system without cone monitoring.
pub fn integrate(s0: &OdeState, horizon: f64, ctl: &IntegratorControls) -> Result<Trajectory> {
    integrate_monitored(s0, horizon, ctl, &[], &FrameSearchOptions::default())
}

/// Integrates and records the margin of `L` in each of `cones` at every
/// accepted step. Frame-based margins are warm-started from the local minima
/// of the previous step.
pub fn integrate_monitored(
    s0: &OdeState,
    horizon: f64,
    ctl: &IntegratorControls,
    cones: &[ConeId],
    search: &FrameSearchOptions,
) -> Result<Trajectory> {
    let basis = s0.l.basis();
    let u = s0.u;
    let mut monitor = Monitor::new(cones, search);
    let mut samples = vec![TrajectorySample {
        margins: monitor.margins(&s0.l),
        state: s0.clone(),
    }];
    let t0 = s0.t;
    let (terminated, rejected_steps) = dopri5(
        vec![s0.l.matrix().clone()],
        horizon,
        ctl,
        |y| vec![l_rhs(basis, &y[0], u)],
        |t, y| {
            let l = CurvatureOperator::from_parts_unchecked(basis, y[0].clone());
            let norm = l.frobenius();
            samples.push(TrajectorySample {
                margins: monitor.margins(&l),
                state: OdeState { l, u, t: t0 + t },
            });
            norm.is_finite() && norm <= ctl.blowup_norm
        },
    )?;
    Ok(Trajectory {
        cones: cones.to_vec(),
        samples,
        terminated,
        rejected_steps,
    })
}

/// Warm frames carried between steps.
const WARM_FRAMES: usize = 6;

struct Monitor<'a> {
    cones: &'a [ConeId],
    search: &'a FrameSearchOptions,
    warm: Vec<Vec<FourFrame>>,
    calls: u64,
}

impl<'a> Monitor<'a> {
    fn new(cones: &'a [ConeId], search: &'a FrameSearchOptions) -> Self {
        Self {
            cones,
            search,
            warm: vec![Vec::new(); cones.len()],
            calls: 0,
        }
    }

    fn margins(&mut self, l: &CurvatureOperator) -> Vec<f64> {
        self.calls += 1;
        let mut out = Vec::with_capacity(self.cones.len());
        for (c, &cone) in self.cones.iter().enumerate() {
            match (cone.eigen_k(), cone.weighting()) {
                (Some(k), _) => out.push(l.k_smallest_eigen_sum(k).expect("k ≤ dim")),
                (_, Some(mode)) => {
                    let opts = self.search.clone().with_seed(self.search.seed.wrapping_add(self.calls));
                    let res = minimize_frames(l, mode, &opts, &self.warm[c]);
                    let mut minima = res.minima;
                    minima.sort_by(|a, b| a.3.total_cmp(&b.3));
                    self.warm[c] = minima.into_iter().take(WARM_FRAMES).map(|m| m.0).collect();
                    out.push(res.margin.value);
                }
                (None, None) => unreachable!("every cone is either spectral or frame based"),
            }
        }
        out
    }
}

/// Frame search used at every accepted step: warm starts carry most of the
/// work, so only a handful of fresh starts are added.
pub fn monitoring_search() -> FrameSearchOptions {
    FrameSearchOptions {
        restarts: 4,
        lattice_starts: 2,
        ..FrameSearchOptions::default()
    }
}

#[derive(Debug, Clone)]
pub struct InvarianceReport {
    pub cone: ConeId,
    pub min_margin: f64,
    /// min over samples of margin / max(1, ‖L(t)‖_F).
    pub min_relative_margin: f64,
    pub trajectory: Trajectory,
}

/// Integrates from an initial state inside `cone` and reports the lowest
/// margin reached.
pub fn monitor_invariance(
    s0: &OdeState,
    cone: ConeId,
    horizon: f64,
    ctl: &IntegratorControls,
    search: &FrameSearchOptions,
) -> Result<InvarianceReport> {
    let traj = integrate_monitored(s0, horizon, ctl, &[cone], search)?;
    let m0 = traj.samples[0].margins[0];
    if m0 < -1e-12 * s0.l.frobenius().max(1.0) {
        return Err(Error::OutsideCone(m0));
    }
    let mut min_margin = f64::INFINITY;
    let mut min_rel = f64::INFINITY;
    for s in &traj.samples {
        let m = s.margins[0];
        min_margin = min_margin.min(m);
        min_rel = min_rel.min(m / s.state.l.frobenius().max(1.0));
    }
    Ok(InvarianceReport {
        cone,
        min_margin,
        min_relative_margin: min_rel,
        trajectory: traj,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConsistency {
    /// sup_t ‖R(t) − (L(t) + u·Id)‖_F.
    pub discrepancy: f64,
    /// sup_t ‖R(t)‖_F.
    pub max_norm: f64,
    pub terminated: Termination,
}

impl SplitConsistency {
    pub fn relative(&self) -> f64 {
        self.discrepancy / self.max_norm.max(1.0)
    }
}

/// Integrates `dR/dt = 2Q(R)` and the (L, u) system side by side on shared
/// steps, with `L(0) = R(0) − u·Id`.
pub fn split_consistency(
    r0: &CurvatureOperator,
    u0: f64,
    horizon: f64,
    ctl: &IntegratorControls,
) -> Result<SplitConsistency> {
    if !(u0 >= 0.0) {
        return Err(Error::InvalidParameter(format!("u must be ≥ 0, got {u0}")));
    }
    let basis = r0.basis();
    let l0 = r0.shifted(-u0);
    let mut discrepancy = 0.0f64;
    let mut max_norm = r0.frobenius();
    let (terminated, _) = dopri5(
        vec![r0.matrix().clone(), l0.into_matrix()],
        horizon,
        ctl,
        |y| vec![l_rhs(basis, &y[0], 0.0), l_rhs(basis, &y[1], u0)],
        |_, y| {
            let mut d = &y[0] - &y[1];
            for a in 0..basis.dim() {
                d[(a, a)] -= u0;
            }
            let norm = y[0].norm();
            discrepancy = discrepancy.max(d.norm());
            max_norm = max_norm.max(norm);
            norm.is_finite() && norm <= ctl.blowup_norm && y[1].norm() <= ctl.blowup_norm
        },
    )?;
    Ok(SplitConsistency {
        discrepancy,
        max_norm,
        terminated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::{cone_margin, random_cone_sample};
    use crate::rng;

    fn id(n: usize) -> CurvatureOperator {
        CurvatureOperator::identity(n).unwrap()
    }

    fn rhs_matrix(l: CurvatureOperator, u: f64) -> DMatrix<f64> {
        reaction_rhs(&OdeState::new(l, u).unwrap()).dl.into_matrix()
    }

    #[test]
    fn rhs_examples() {
        let z = CurvatureOperator::zero(4).unwrap();
        assert!((rhs_matrix(z.clone(), 1.0) - id(4).matrix() * 6.0).amax() < 1e-14);
        assert!((rhs_matrix(id(4), 0.0) - id(4).matrix() * 6.0).amax() < 1e-13);
        assert_eq!(rhs_matrix(z, 0.0).amax(), 0.0);
    }

    #[test]
    fn rhs_matches_expansion_of_q() {
        // 2Q(L + u Id) is the (L, u) right-hand side.
        let mut g = rng::seeded(5);
        for n in 4..=6 {
            let l = CurvatureOperator::random_gaussian(n, &mut g).unwrap();
            let u = 0.7;
            let direct = q_map(&l.shifted(u)).into_matrix() * 2.0;
            let split = rhs_matrix(l, u);
            assert!((direct - &split).amax() < 1e-11 * split.amax());
        }
    }

    #[test]
    fn rhs_preserves_bianchi() {
        let mut g = rng::seeded(6);
        let l = CurvatureOperator::random_gaussian(6, &mut g).unwrap();
        let d = reaction_rhs(&OdeState::new(l, 0.4).unwrap()).dl;
        assert!(d.bianchi_defect() < 1e-12 * d.frobenius());
    }

    #[test]
    fn identity_closed_form() {
        let ctl = IntegratorControls::default();
        let traj = integrate(&OdeState::new(id(4), 0.0).unwrap(), 0.15, &ctl).unwrap();
        assert_eq!(traj.terminated, Termination::TimeHorizon);
        for s in &traj.samples {
            let expect = id(4).scaled(1.0 / (1.0 - 6.0 * s.state.t));
            let rel = (s.state.l.matrix() - expect.matrix()).norm() / expect.frobenius();
            assert!(rel < 1e-7, "t={} rel={rel}", s.state.t);
        }
        assert!((traj.last().t - 0.15).abs() < 1e-15);
    }

    #[test]
    fn identity_blows_up_before_one_sixth() {
        let ctl = IntegratorControls { blowup_norm: 1e6, ..Default::default() };
        let traj = integrate(&OdeState::new(id(4), 0.0).unwrap(), 0.2, &ctl).unwrap();
        assert_eq!(traj.terminated, Termination::Blowup);
        let t = traj.last().t;
        assert!(t < 1.0 / 6.0 && t > 1.0 / 6.0 - 1e-5, "{t}");
        for w in traj.samples.windows(2) {
            assert!(w[1].state.t > w[0].state.t);
        }
    }

    #[test]
    fn taylor_start_from_zero() {
        let ctl = IntegratorControls::default();
        let s0 = OdeState::new(CurvatureOperator::zero(4).unwrap(), 1.0).unwrap();
        let traj = integrate(&s0, 1e-4, &ctl).unwrap();
        let expect = id(4).scaled(6e-4);
        let err = (traj.last().l.matrix() - expect.matrix()).amax();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn quadratic_scaling() {
        let mut g = rng::seeded(8);
        let l0 = CurvatureOperator::random_gaussian(5, &mut g).unwrap().scaled(0.1);
        let ctl = IntegratorControls { rtol: 1e-11, atol: 1e-14, ..Default::default() };
        let lam = 3.0;
        let t = 0.01;
        let a = integrate(&OdeState::new(l0.scaled(lam), 0.0).unwrap(), t, &ctl).unwrap();
        let b = integrate(&OdeState::new(l0.clone(), 0.0).unwrap(), lam * t, &ctl).unwrap();
        let lhs = a.last().l.matrix();
        let rhs = b.last().l.matrix() * lam;
        assert!((lhs - &rhs).norm() < 1e-8 * rhs.norm());
    }

    #[test]
    fn u_constant_and_bianchi_along_trajectory() {
        let mut g = rng::seeded(9);
        let l0 = CurvatureOperator::random_gaussian(5, &mut g).unwrap().scaled(0.2);
        let traj = integrate(&OdeState::new(l0, 0.5).unwrap(), 0.05, &IntegratorControls::default()).unwrap();
        for s in &traj.samples {
            assert_eq!(s.state.u, 0.5);
            assert!(s.state.l.bianchi_defect() < 1e-9 * s.state.l.frobenius().max(1.0));
        }
    }

    #[test]
    fn identity_stays_nonnegative() {
        let ctl = IntegratorControls::default();
        let rep = monitor_invariance(
            &OdeState::new(id(4), 0.0).unwrap(),
            ConeId::NonnegOperator,
            0.16,
            &ctl,
            &monitoring_search(),
        )
        .unwrap();
        assert!(rep.min_margin > 0.0);
    }

    #[test]
    fn nnic_boundary_start_is_preserved() {
        let opts = FrameSearchOptions::audit();
        let s = random_cone_sample(ConeId::Nnic, 5, 12, 0.0, &opts).unwrap();
        let l0 = s.operator.scaled(1.0 / s.operator.frobenius());
        let ctl = IntegratorControls::default();
        let rep = monitor_invariance(&OdeState::new(l0, 0.5).unwrap(), ConeId::Nnic, 0.1, &ctl, &monitoring_search())
            .unwrap();
        assert!(rep.min_relative_margin >= -1e-6, "{}", rep.min_relative_margin);
    }

    #[test]
    fn monitor_rejects_outside_start() {
        let l0 = id(5).shifted(-1.1);
        let err = monitor_invariance(
            &OdeState::new(l0, 0.0).unwrap(),
            ConeId::NonnegOperator,
            0.1,
            &IntegratorControls::default(),
            &monitoring_search(),
        );
        assert!(matches!(err, Err(Error::OutsideCone(_))));
    }

    #[test]
    fn split_consistency_examples() {
        let ctl = IntegratorControls::default();
        let r0 = id(4).scaled(2.0);
        let sc = split_consistency(&r0, 1.0, 0.2, &ctl).unwrap();
        assert_eq!(sc.terminated, Termination::Blowup);
        assert!(sc.relative() <= 1e-8, "{sc:?}");

        let mut g = rng::seeded(10);
        let r = CurvatureOperator::random_gaussian(5, &mut g).unwrap();
        let sc0 = split_consistency(&r.scaled(0.1), 0.0, 0.05, &ctl).unwrap();
        assert_eq!(sc0.discrepancy, 0.0);

        let opts = FrameSearchOptions::audit();
        let s = random_cone_sample(ConeId::Nnic, 5, 3, 0.5, &opts).unwrap();
        assert!(cone_margin(&s.operator, ConeId::Nnic, &opts).value >= 0.5 - 1e-9);
        let sc = split_consistency(&s.operator, 0.3, 0.01, &ctl).unwrap();
        assert!(sc.relative() <= 1e-6, "{sc:?}");
    }

    #[test]
    fn csv_dump() {
        let traj = integrate_monitored(
            &OdeState::new(id(4), 0.25).unwrap(),
            0.01,
            &IntegratorControls::default(),
            &[ConeId::NonnegOperator, ConeId::Nnic],
            &monitoring_search(),
        )
        .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let mut rd = csv::Reader::from_reader(buf.as_slice());
        let header = rd.headers().unwrap().clone();
        assert_eq!(header.len(), 1 + 21 + 1 + 2);
        assert_eq!(&header[1], "L(1,2|1,2)");
        assert_eq!(&header[header.len() - 1], "margin_NNIC");
        let rows: Vec<_> = rd.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), traj.samples.len());
        assert_eq!(rows[0][1].parse::<f64>().unwrap(), 1.0);
    }
}
