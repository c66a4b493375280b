//! Space-time averaged norms over parabolic cylinders `B_ḡ(s)(x, R) × (0, R²)`
//! and the norm `‖h‖_X` built from them.
//!
//! Distances use the straight coordinate segment measured with the average
//! of `ḡ` at its two end points; volumes use `√det ḡ`. Time integrals are
//! exact for the piecewise-linear interpolant of the per-snapshot ball sums.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::spectral::Spectral;
use super::{sym_index, SymTensorField, TensorTrajectory, TorusGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParabolicNormSpec {
    pub p: f64,
    /// Flat index of the base node.
    pub x: usize,
    pub r: f64,
    /// Average over `(R²/2, R²)` instead of `(0, R²)`.
    pub one_sided: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormOptions {
    /// Base points form the sub-lattice of every `base_stride`-th node.
    pub base_stride: usize,
    /// Radii with `R² = horizon·2^{−j}`, `j < r_levels`.
    pub r_levels: usize,
    /// Upper bound on the number of time snapshots used.
    pub max_snapshots: usize,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            base_stride: 8,
            r_levels: 6,
            max_snapshots: 64,
        }
    }
}

/// Metric data of `ḡ = g + h` at one time.
struct MetricSnapshot {
    g: Vec<Matrix3<f64>>,
    dv: Vec<f64>,
    min_eig: f64,
}

impl MetricSnapshot {
    fn new(h: &SymTensorField) -> Result<Self> {
        let grid = h.grid();
        let d = grid.d();
        let cell = grid.cell_volume();
        let mut g = Vec::with_capacity(grid.len());
        let mut dv = Vec::with_capacity(grid.len());
        let mut min_eig = f64::INFINITY;
        for idx in 0..grid.len() {
            let m = metric_at(h, idx);
            let (lo, det) = min_eig_det(&m, d);
            if !(lo > 0.0) {
                return Err(Error::MetricDegeneration {
                    min_eig: lo,
                    floor: 0.0,
                });
            }
            min_eig = min_eig.min(lo);
            dv.push(det.sqrt() * cell);
            g.push(m);
        }
        Ok(Self { g, dv, min_eig })
    }
}

/// `δ + h` at a node, with unused axes padded by the identity.
pub(crate) fn metric_at(h: &SymTensorField, idx: usize) -> Matrix3<f64> {
    let d = h.grid().d();
    let mut m = Matrix3::identity();
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] += h.components()[sym_index(d, i, j)][idx];
        }
    }
    m
}

/// Smallest eigenvalue and determinant of the leading `d × d` block.
pub(crate) fn min_eig_det(m: &Matrix3<f64>, d: usize) -> (f64, f64) {
    match d {
        1 => (m[(0, 0)], m[(0, 0)]),
        2 => {
            let (a, b, c) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
            let mean = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            (mean - rad, a * c - b * b)
        }
        _ => {
            let e = SymmetricEigen::new(*m).eigenvalues;
            (e.min(), m.determinant())
        }
    }
}

/// Minimal-image coordinate offset from node `x` to node `y`.
fn offset(grid: &TorusGrid, x: &[usize; 3], y: &[usize; 3]) -> [f64; 3] {
    let mut v = [0.0; 3];
    for a in 0..grid.d() {
        let n = grid.resolution()[a] as i64;
        let mut k = y[a] as i64 - x[a] as i64;
        if k > n / 2 {
            k -= n;
        } else if k < -n / 2 {
            k += n;
        }
        v[a] = k as f64 * grid.spacing(a);
    }
    v
}

/// Nodes of `B(x, R)` at one snapshot, as `(flat index, dv)`.
fn ball(grid: &TorusGrid, snap: &MetricSnapshot, lam_min: f64, x: usize, r: f64, out: &mut Vec<(usize, f64)>) {
    out.clear();
    let d = grid.d();
    let xm = grid.multi_index(x);
    let mut reach = [0i64; 3];
    for a in 0..d {
        let n = grid.resolution()[a] as i64;
        let steps = (r / lam_min.sqrt() / grid.spacing(a)).ceil() as i64;
        reach[a] = steps.min(n / 2);
    }
    let gx = &snap.g[x];
    let r2 = r * r;
    let mut cur = [0i64; 3];
    let counts: Vec<i64> = (0..d).map(|a| 2 * reach[a] + 1).collect();
    let total: i64 = counts.iter().product();
    for flat in 0..total {
        let mut rest = flat;
        for a in (0..d).rev() {
            cur[a] = rest % counts[a] - reach[a];
            rest /= counts[a];
        }
        let mut ym = [0usize; 3];
        for a in 0..d {
            let n = grid.resolution()[a] as i64;
            // With the reach capped at N/2 both ±N/2 map to the same node.
            if reach[a] == n / 2 && cur[a] == -(n / 2) {
                ym[a] = usize::MAX;
                break;
            }
            ym[a] = (xm[a] as i64 + cur[a]).rem_euclid(n) as usize;
        }
        if ym[..d].contains(&usize::MAX) {
            continue;
        }
        let y = grid.flat_index(&ym);
        let v = offset(grid, &xm, &ym);
        let gy = &snap.g[y];
        let mut q = 0.0;
        for i in 0..d {
            for j in 0..d {
                q += 0.5 * (gx[(i, j)] + gy[(i, j)]) * v[i] * v[j];
            }
        }
        if q <= r2 * (1.0 + 1e-12) {
            out.push((y, snap.dv[y]));
        }
    }
}

/// `∫_a^b` of the piecewise-linear interpolant of `(ts, vs)`.
fn integrate_linear(ts: &[f64], vs: &[f64], a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    for w in 0..ts.len().saturating_sub(1) {
        let (t0, t1) = (ts[w], ts[w + 1]);
        let lo = a.max(t0);
        let hi = b.min(t1);
        if hi <= lo {
            continue;
        }
        let slope = (vs[w + 1] - vs[w]) / (t1 - t0);
        let at = |t: f64| vs[w] + slope * (t - t0);
        total += 0.5 * (at(lo) + at(hi)) * (hi - lo);
    }
    total
}

fn snapshot_indices(len: usize, max: usize) -> Vec<usize> {
    if len == 0 {
        return Vec::new();
    }
    let step = ((len - 1) as f64 / max.max(1) as f64).ceil().max(1.0) as usize;
    let mut out: Vec<usize> = (0..len).step_by(step).collect();
    if *out.last().unwrap() != len - 1 {
        out.push(len - 1);
    }
    out
}

fn check_pair(h: &TensorTrajectory, metric: &TensorTrajectory) -> Result<()> {
    if h.times.is_empty() || h.times.len() != h.fields.len() {
        return Err(Error::InvalidParameter("empty or inconsistent trajectory".into()));
    }
    if h.times != metric.times {
        return Err(Error::InvalidParameter("field and metric use different time nodes".into()));
    }
    Ok(())
}

/// `‖h‖_{p,x,R}` (or `‖h‖⁺` when `one_sided`) for `ḡ(s) = g + metric(s)`.
pub fn parabolic_norm(h: &TensorTrajectory, metric: &TensorTrajectory, spec: &ParabolicNormSpec) -> Result<f64> {
    check_pair(h, metric)?;
    if !(spec.p >= 1.0) || !(spec.r > 0.0) {
        return Err(Error::InvalidParameter(format!("need p ≥ 1 and R > 0, got {spec:?}")));
    }
    let horizon = h.horizon();
    if spec.r * spec.r > horizon * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "R² = {} exceeds the solved horizon {horizon}",
            spec.r * spec.r
        )));
    }
    let grid = h.grid().clone();
    if spec.x >= grid.len() {
        return Err(Error::InvalidParameter(format!("base node {} out of range", spec.x)));
    }
    let snaps: Vec<MetricSnapshot> = metric.fields.iter().map(MetricSnapshot::new).collect::<Result<_>>()?;
    let lam = snaps.iter().map(|s| s.min_eig).fold(f64::INFINITY, f64::min);
    let mags: Vec<Vec<f64>> = h.fields.iter().map(SymTensorField::pointwise_norm).collect();
    let mut nodes = Vec::new();
    let mut num = Vec::with_capacity(snaps.len());
    let mut den = Vec::with_capacity(snaps.len());
    for (snap, mag) in snaps.iter().zip(&mags) {
        ball(&grid, snap, lam, spec.x, spec.r, &mut nodes);
        num.push(nodes.iter().map(|&(y, dv)| mag[y].powf(spec.p) * dv).sum::<f64>());
        den.push(nodes.iter().map(|&(_, dv)| dv).sum::<f64>());
    }
    let r2 = spec.r * spec.r;
    let a = if spec.one_sided { 0.5 * r2 } else { 0.0 };
    let n = integrate_linear(&h.times, &num, a, r2);
    let dn = integrate_linear(&h.times, &den, a, r2);
    Ok(if dn > 0.0 { (n / dn).powf(1.0 / spec.p) } else { 0.0 })
}

/// Pointwise `|∇h|` (flat connection, Frobenius) from Fourier derivatives.
pub(crate) fn gradient_magnitude(s: &Spectral, h: &SymTensorField) -> Vec<f64> {
    let d = h.grid().d();
    let mut acc = vec![0.0; h.grid().len()];
    for i in 0..d {
        for j in i..d {
            let spec = s.forward(h.component(i, j));
            let w = if i == j { 1.0 } else { 2.0 };
            for a in 0..d {
                let mut o = [0; 3];
                o[a] = 1;
                for (v, x) in acc.iter_mut().zip(s.derivative_values(&spec, o)) {
                    *v += w * x * x;
                }
            }
        }
    }
    acc.into_iter().map(f64::sqrt).collect()
}

/// `‖h‖_X = sup|h| + sup_{x,R} (R‖∇h‖_{2,x,R} + ‖√t ∇h‖⁺_{d+4,x,R})` with
/// `x` on a sub-lattice and `R² = horizon·2^{−j}`.
pub fn x_norm(h: &TensorTrajectory, metric: &TensorTrajectory, opts: &NormOptions) -> Result<f64> {
    check_pair(h, metric)?;
    let sup = h.sup_norm();
    if sup == 0.0 {
        return Ok(0.0);
    }
    let grid = h.grid().clone();
    let d = grid.d();
    let s = Spectral::for_grid(&grid);
    let idx = snapshot_indices(h.times.len(), opts.max_snapshots);
    let times: Vec<f64> = idx.iter().map(|&i| h.times[i]).collect();
    let snaps: Vec<MetricSnapshot> = idx
        .iter()
        .map(|&i| MetricSnapshot::new(&metric.fields[i]))
        .collect::<Result<_>>()?;
    let lam = snaps.iter().map(|s| s.min_eig).fold(f64::INFINITY, f64::min);
    let grads: Vec<Vec<f64>> = idx.iter().map(|&i| gradient_magnitude(&s, &h.fields[i])).collect();
    let p_plus = d as f64 + 4.0;
    let horizon = h.horizon();
    let stride = opts.base_stride.max(1);
    let bases: Vec<usize> = (0..grid.len())
        .filter(|&i| grid.multi_index(i)[..d].iter().all(|&m| m % stride == 0))
        .collect();
    let mut best: f64 = 0.0;
    let mut nodes = Vec::new();
    let n_snap = snaps.len();
    let mut v2 = vec![0.0; n_snap];
    let mut vp = vec![0.0; n_snap];
    let mut vol = vec![0.0; n_snap];
    for level in 0..opts.r_levels.max(1) {
        let r2 = horizon * 0.5f64.powi(level as i32);
        let r = r2.sqrt();
        for &x in &bases {
            for k in 0..n_snap {
                ball(&grid, &snaps[k], lam, x, r, &mut nodes);
                let st = times[k].sqrt();
                let (mut a2, mut ap, mut dvs) = (0.0, 0.0, 0.0);
                for &(y, dv) in &nodes {
                    let g = grads[k][y];
                    a2 += g * g * dv;
                    ap += (st * g).powf(p_plus) * dv;
                    dvs += dv;
                }
                v2[k] = a2;
                vp[k] = ap;
                vol[k] = dvs;
            }
            let full = integrate_linear(&times, &v2, 0.0, r2) / integrate_linear(&times, &vol, 0.0, r2);
            let half = integrate_linear(&times, &vp, 0.5 * r2, r2) / integrate_linear(&times, &vol, 0.5 * r2, r2);
            best = best.max(r * full.sqrt() + half.powf(1.0 / p_plus));
        }
    }
    Ok(sup + best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn static_traj(f: &SymTensorField, horizon: f64, n: usize) -> TensorTrajectory {
        TensorTrajectory {
            times: (0..=n).map(|i| horizon * i as f64 / n as f64).collect(),
            fields: vec![f.clone(); n + 1],
        }
    }

    #[test]
    fn constant_field_has_its_value() {
        let g = TorusGrid::new(2, 16).unwrap();
        let c = SymTensorField::single(&g, 0, 0, |_| 0.3).unwrap();
        let h = static_traj(&c, 1.0, 8);
        let flat = static_traj(&SymTensorField::zeros(&g), 1.0, 8);
        for p in [1.0, 2.0, 6.0] {
            for one_sided in [false, true] {
                let spec = ParabolicNormSpec { p, x: 37, r: 0.7, one_sided };
                assert!((parabolic_norm(&h, &flat, &spec).unwrap() - 0.3).abs() < 1e-14);
                assert!((parabolic_norm(&h, &h, &spec).unwrap() - 0.3).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn full_torus_average_of_sine() {
        let g = TorusGrid::new(1, 64).unwrap();
        let h = static_traj(&SymTensorField::single(&g, 0, 0, |x| x[0].sin()).unwrap(), 10.0, 4);
        let flat = static_traj(&SymTensorField::zeros(&g), 10.0, 4);
        let spec = ParabolicNormSpec { p: 2.0, x: 0, r: PI, one_sided: false };
        let v = parabolic_norm(&h, &flat, &spec).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-14, "{v}");
    }

    #[test]
    fn radius_beyond_horizon_is_rejected() {
        let g = TorusGrid::new(1, 16).unwrap();
        let z = static_traj(&SymTensorField::zeros(&g), 1.0, 2);
        let spec = ParabolicNormSpec { p: 2.0, x: 0, r: 1.5, one_sided: false };
        assert!(parabolic_norm(&z, &z, &spec).is_err());
    }

    #[test]
    fn x_norm_of_zero_and_scaling() {
        let g = TorusGrid::new(2, 16).unwrap();
        let z = static_traj(&SymTensorField::zeros(&g), 1.0, 8);
        assert_eq!(x_norm(&z, &z, &NormOptions::default()).unwrap(), 0.0);
        let f = SymTensorField::single(&g, 0, 1, |x| 0.01 * (x[0] + x[1]).sin()).unwrap();
        let h = static_traj(&f, 1.0, 8);
        let a = x_norm(&h, &z, &NormOptions::default()).unwrap();
        let b = x_norm(&static_traj(&f.scaled(2.0), 1.0, 8), &z, &NormOptions::default()).unwrap();
        assert!(a > f.sup_norm());
        assert!((b - 2.0 * a).abs() < 1e-12 * a);
    }

    #[test]
    fn ball_volume_matches_disc_area() {
        let g = TorusGrid::new(2, 128).unwrap();
        let snap = MetricSnapshot::new(&SymTensorField::zeros(&g)).unwrap();
        let mut nodes = Vec::new();
        ball(&g, &snap, 1.0, 0, 1.0, &mut nodes);
        let area: f64 = nodes.iter().map(|n| n.1).sum();
        assert!((area - PI).abs() < 0.05, "{area}");
        // A conformal factor 4 halves distances' reach: area π/4 in coordinates, π in ḡ-volume.
        let snap = MetricSnapshot::new(&SymTensorField::scaled_identity(&g, 3.0)).unwrap();
        ball(&g, &snap, 4.0, 0, 1.0, &mut nodes);
        let area: f64 = nodes.iter().map(|n| n.1).sum();
        assert!((area - PI).abs() < 0.1, "{area}");
    }

    #[test]
    fn linear_integral() {
        let ts = [0.0, 1.0, 2.0];
        let vs = [0.0, 1.0, 0.0];
        assert!((integrate_linear(&ts, &vs, 0.0, 2.0) - 1.0).abs() < 1e-15);
        assert!((integrate_linear(&ts, &vs, 0.5, 1.5) - 0.75).abs() < 1e-15);
    }
}
