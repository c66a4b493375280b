//! Ricci–DeTurck flow `∂ₜḡ = −2Ric(ḡ) + L_W ḡ` around the flat metric,
//! written for `h = ḡ − g`, its Picard iteration, and the drift-heat flow
//! driven by the solution.
//!
//! With `g` Euclidean in coordinates, `Γ(g) = 0`, so
//! `W^k = g^{ij} Γ̄^k_{ij}` and every term is an explicit expression in
//! `h`, `∂h` and `∂²h`.

use serde::{Deserialize, Serialize};

use super::norms::{gradient_magnitude, metric_at, min_eig_det, x_norm, NormOptions};
use super::spectral::{Spectral, C64};
use super::{sym_components, sym_index, ScalarField, SymTensorField, TensorTrajectory, TorusGrid};
use crate::error::{Error, Result};

/// `ḡ` must keep its smallest eigenvalue above this at every node.
pub const METRIC_FLOOR: f64 = 0.05;
/// Picard inputs must satisfy `sup|h₀| ≤` this.
pub const PICARD_H0_MAX: f64 = 0.1;

type M3 = [[f64; 3]; 3];
type T3 = [[[f64; 3]; 3]; 3];

/// Pointwise geometry of `ḡ = δ + h`.
struct NodeGeometry {
    gi: M3,
    /// Γ̄^k_ij as `gamma[k][i][j]`.
    gamma: T3,
    /// ∂_m Γ̄^k_ij as `dgamma[m][k][i][j]`.
    dgamma: [T3; 3],
    w: [f64; 3],
}

fn inverse(m: &M3, d: usize) -> M3 {
    let mut out = [[0.0; 3]; 3];
    match d {
        1 => out[0][0] = 1.0 / m[0][0],
        2 => {
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            out[0][0] = m[1][1] / det;
            out[1][1] = m[0][0] / det;
            out[0][1] = -m[0][1] / det;
            out[1][0] = -m[1][0] / det;
        }
        _ => {
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            for i in 0..3 {
                for j in 0..3 {
                    let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                    let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                    out[i][j] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
                }
            }
        }
    }
    out
}

impl NodeGeometry {
    /// `dh[a][i][j] = ∂_a h_ij`, `ddh[a][b][i][j] = ∂_a∂_b h_ij`.
    fn new(d: usize, g: &M3, dh: &T3, ddh: &[T3; 3]) -> Self {
        let gi = inverse(g, d);
        // Christoffel symbols of the first kind and their derivatives.
        let mut low = [[[0.0; 3]; 3]; 3];
        let mut dlow = [[[[0.0; 3]; 3]; 3]; 3];
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    low[k][i][j] = 0.5 * (dh[i][j][k] + dh[j][i][k] - dh[k][i][j]);
                    for m in 0..d {
                        dlow[m][k][i][j] = 0.5 * (ddh[m][i][j][k] + ddh[m][j][i][k] - ddh[m][k][i][j]);
                    }
                }
            }
        }
        // ∂_m g^{lk} = −g^{la} ∂_m h_ab g^{bk}.
        let mut dgi = [[[0.0; 3]; 3]; 3];
        for m in 0..d {
            for l in 0..d {
                for k in 0..d {
                    let mut s = 0.0;
                    for a in 0..d {
                        for b in 0..d {
                            s -= gi[l][a] * dh[m][a][b] * gi[b][k];
                        }
                    }
                    dgi[m][l][k] = s;
                }
            }
        }
        let mut gamma = [[[0.0; 3]; 3]; 3];
        let mut dgamma = [[[[0.0; 3]; 3]; 3]; 3];
        for l in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut s = 0.0;
                    for k in 0..d {
                        s += gi[l][k] * low[k][i][j];
                    }
                    gamma[l][i][j] = s;
                    for m in 0..d {
                        let mut s = 0.0;
                        for k in 0..d {
                            s += dgi[m][l][k] * low[k][i][j] + gi[l][k] * dlow[m][k][i][j];
                        }
                        dgamma[m][l][i][j] = s;
                    }
                }
            }
        }
        let mut w = [0.0; 3];
        for k in 0..d {
            for i in 0..d {
                w[k] += gamma[k][i][i];
            }
        }
        Self { gi, gamma, dgamma, w }
    }

    fn ricci(&self, d: usize) -> M3 {
        let (g, dg) = (&self.gamma, &self.dgamma);
        let mut ric = [[0.0; 3]; 3];
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += dg[k][k][i][j] - dg[j][k][i][k];
                    for l in 0..d {
                        s += g[k][k][l] * g[l][i][j] - g[k][j][l] * g[l][i][k];
                    }
                }
                ric[i][j] = s;
            }
        }
        ric
    }

    /// `−2Ric + L_W ḡ`.
    fn deturck(&self, d: usize, g: &M3, dh: &T3) -> M3 {
        let ric = self.ricci(d);
        let mut dw = [[0.0; 3]; 3];
        for m in 0..d {
            for k in 0..d {
                for i in 0..d {
                    dw[m][k] += self.dgamma[m][k][i][i];
                }
            }
        }
        let mut out = [[0.0; 3]; 3];
        for i in 0..d {
            for j in 0..d {
                let mut lw = 0.0;
                for k in 0..d {
                    lw += self.w[k] * dh[k][i][j] + g[k][j] * dw[i][k] + g[i][k] * dw[j][k];
                }
                out[i][j] = -2.0 * ric[i][j] + lw;
            }
        }
        out
    }

    /// `|Rm(ḡ)|` measured with `ḡ`.
    fn riemann_norm(&self, d: usize, g: &M3) -> f64 {
        let (gm, dg) = (&self.gamma, &self.dgamma);
        // R^l_{ijk} = ∂_iΓ^l_jk − ∂_jΓ^l_ik + Γ^l_im Γ^m_jk − Γ^l_jm Γ^m_ik.
        let mut up = [[[[0.0; 3]; 3]; 3]; 3];
        for l in 0..d {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        let mut s = dg[i][l][j][k] - dg[j][l][i][k];
                        for m in 0..d {
                            s += gm[l][i][m] * gm[m][j][k] - gm[l][j][m] * gm[m][i][k];
                        }
                        up[l][i][j][k] = s;
                    }
                }
            }
        }
        let mut low = [[[[0.0; 3]; 3]; 3]; 3];
        for a in 0..d {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        low[a][i][j][k] = (0..d).map(|l| g[a][l] * up[l][i][j][k]).sum();
                    }
                }
            }
        }
        let gi = &self.gi;
        let mut s = 0.0;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        let mut raised = 0.0;
                        for a2 in 0..d {
                            for b2 in 0..d {
                                for c2 in 0..d {
                                    for e2 in 0..d {
                                        raised += gi[a][a2] * gi[b][b2] * gi[c][c2] * gi[e][e2] * low[a2][b2][c2][e2];
                                    }
                                }
                            }
                        }
                        s += low[a][b][c][e] * raised;
                    }
                }
            }
        }
        s.max(0.0).sqrt()
    }
}

/// Spectral first and second derivatives of every component of `h`.
struct Derivatives {
    first: Vec<Vec<Vec<f64>>>,
    /// `second[a][b][c]`, filled for `a ≤ b` and mirrored.
    second: Vec<Vec<Vec<Vec<f64>>>>,
}

impl Derivatives {
    fn new(s: &Spectral, h: &SymTensorField) -> Self {
        let d = h.grid().d();
        let nc = sym_components(d);
        let specs: Vec<Vec<C64>> = h.components().iter().map(|c| s.forward(c)).collect();
        let mut first = vec![Vec::with_capacity(nc); d];
        let mut second = vec![vec![Vec::new(); d]; d];
        for a in 0..d {
            let mut o = [0; 3];
            o[a] = 1;
            for sp in &specs {
                first[a].push(s.derivative_values(sp, o));
            }
            for b in a..d {
                let mut o2 = o;
                o2[b] += 1;
                second[a][b] = specs.iter().map(|sp| s.derivative_values(sp, o2)).collect();
            }
        }
        for a in 0..d {
            for b in 0..a {
                second[a][b] = second[b][a].clone();
            }
        }
        Self { first, second }
    }

    fn at(&self, d: usize, idx: usize) -> (T3, [T3; 3]) {
        let mut dh = [[[0.0; 3]; 3]; 3];
        let mut ddh = [[[[0.0; 3]; 3]; 3]; 3];
        for i in 0..d {
            for j in 0..d {
                let c = sym_index(d, i, j);
                for a in 0..d {
                    dh[a][i][j] = self.first[a][c][idx];
                    for b in 0..d {
                        ddh[a][b][i][j] = self.second[a][b][c][idx];
                    }
                }
            }
        }
        (dh, ddh)
    }
}

fn metric_matrix(h: &SymTensorField, idx: usize) -> M3 {
    let m = metric_at(h, idx);
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[(i, j)];
        }
    }
    out
}

fn check_metric(h: &SymTensorField, idx: usize) -> Result<M3> {
    let d = h.grid().d();
    let m = metric_at(h, idx);
    let (lo, _) = min_eig_det(&m, d);
    if !(lo >= METRIC_FLOOR) {
        return Err(Error::MetricDegeneration {
            min_eig: lo,
            floor: METRIC_FLOOR,
        });
    }
    Ok(metric_matrix(h, idx))
}

/// Node-wise data derived from `h` in one pass.
struct GeometryFields {
    rhs: Option<SymTensorField>,
    /// `|W|_ḡ` per node.
    w_norm: Vec<f64>,
    rm_norm: Option<Vec<f64>>,
    /// Coefficients of `Δ_ḡ u + W·∇u − Δu`: `(ḡ^{ij} − δ^{ij})` per sym slot,
    /// and the first-order drift `W^k − ḡ^{ij}Γ̄^k_ij`.
    drift: Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)>,
}

#[derive(Clone, Copy)]
struct Want {
    rhs: bool,
    rm: bool,
    drift: bool,
}

fn geometry(s: &Spectral, h: &SymTensorField, want: Want) -> Result<GeometryFields> {
    let grid = h.grid();
    let d = grid.d();
    let n = grid.len();
    let nc = sym_components(d);
    let der = Derivatives::new(s, h);
    let mut rhs = want.rhs.then(|| vec![vec![0.0; n]; nc]);
    let mut rm = want.rm.then(|| vec![0.0; n]);
    let mut drift = want.drift.then(|| (vec![vec![0.0; n]; nc], vec![vec![0.0; n]; d]));
    let mut w_norm = vec![0.0; n];
    for idx in 0..n {
        let g = check_metric(h, idx)?;
        let (dh, ddh) = der.at(d, idx);
        let geo = NodeGeometry::new(d, &g, &dh, &ddh);
        let mut wn = 0.0;
        for i in 0..d {
            for j in 0..d {
                wn += g[i][j] * geo.w[i] * geo.w[j];
            }
        }
        w_norm[idx] = wn.max(0.0).sqrt();
        if let Some(r) = rhs.as_mut() {
            let v = geo.deturck(d, &g, &dh);
            for i in 0..d {
                for j in i..d {
                    r[sym_index(d, i, j)][idx] = 0.5 * (v[i][j] + v[j][i]);
                }
            }
        }
        if let Some(r) = rm.as_mut() {
            r[idx] = geo.riemann_norm(d, &g);
        }
        if let Some((a, b)) = drift.as_mut() {
            for i in 0..d {
                for j in i..d {
                    a[sym_index(d, i, j)][idx] = geo.gi[i][j] - if i == j { 1.0 } else { 0.0 };
                }
            }
            for k in 0..d {
                let mut contracted = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        contracted += geo.gi[i][j] * geo.gamma[k][i][j];
                    }
                }
                b[k][idx] = geo.w[k] - contracted;
            }
        }
    }
    Ok(GeometryFields {
        rhs: rhs.map(|c| SymTensorField::new(grid.clone(), c)).transpose()?,
        w_norm,
        rm_norm: rm,
        drift,
    })
}

/// `∂ₜh = −2Ric(g + h) + L_W(g + h)` on the flat torus.
pub fn deturck_rhs(h: &SymTensorField) -> Result<SymTensorField> {
    let s = Spectral::for_grid(h.grid());
    let want = Want {
        rhs: true,
        rm: false,
        drift: false,
    };
    Ok(geometry(&s, h, want)?.rhs.expect("requested"))
}

/// Nonlinear source `𝓕[k] = deturck_rhs(k) − Δk`, dealiased, per component spectrum.
fn source_spectra(s: &Spectral, k: &SymTensorField, symbols: &[f64]) -> Result<Vec<Vec<C64>>> {
    let rhs = deturck_rhs_with(s, k)?;
    let mut out = Vec::with_capacity(rhs.components().len());
    for (rc, kc) in rhs.components().iter().zip(k.components()) {
        let mut fr = s.forward(rc);
        let fk = s.forward(kc);
        for ((f, kk), lam) in fr.iter_mut().zip(&fk).zip(symbols) {
            // Δ has symbol −|κ|², so subtracting Δk adds |κ|² k̂.
            *f += kk * *lam;
        }
        s.dealias(&mut fr);
        out.push(fr);
    }
    Ok(out)
}

fn deturck_rhs_with(s: &Spectral, h: &SymTensorField) -> Result<SymTensorField> {
    let want = Want {
        rhs: true,
        rm: false,
        drift: false,
    };
    Ok(geometry(s, h, want)?.rhs.expect("requested"))
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 || times[0] != 0.0 {
        return Err(Error::InvalidParameter("time nodes must start at 0 and have ≥ 2 entries".into()));
    }
    let dt = times[1] - times[0];
    for (i, t) in times.iter().enumerate() {
        if (t - i as f64 * dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::InvalidParameter("time nodes must be equally spaced".into()));
        }
    }
    Ok(dt)
}

/// Solves `(∂ₜ − Δ)h = 𝓕[k]`, `h(0) = h₀` on the time nodes of `k` with the
/// exponential trapezoid rule
/// `ĥ_{n+1} = e^{−|κ|²Δt} ĥ_n + Δt/2 (e^{−|κ|²Δt} 𝓕̂_n + 𝓕̂_{n+1})`.
pub fn picard_map(k: &TensorTrajectory, h0: &SymTensorField) -> Result<TensorTrajectory> {
    let sup0 = h0.sup_norm();
    if sup0 > PICARD_H0_MAX {
        return Err(Error::InvalidParameter(format!(
            "sup|h0| = {sup0} exceeds {PICARD_H0_MAX}"
        )));
    }
    let dt = uniform_step(&k.times)?;
    let grid = h0.grid().clone();
    let s = Spectral::for_grid(&grid);
    let symbols: Vec<f64> = (0..s.len()).map(|i| s.laplacian_symbol(i)).collect();
    let decay: Vec<f64> = symbols.iter().map(|l| (-l * dt).exp()).collect();
    let mut hs: Vec<Vec<C64>> = h0.components().iter().map(|c| s.forward(c)).collect();
    let mut f_prev = source_spectra(&s, &k.fields[0], &symbols)?;
    let mut fields = Vec::with_capacity(k.times.len());
    fields.push(h0.clone());
    for n in 1..k.times.len() {
        let f_next = source_spectra(&s, &k.fields[n], &symbols)?;
        for c in 0..hs.len() {
            for i in 0..s.len() {
                hs[c][i] = decay[i] * (hs[c][i] + 0.5 * dt * f_prev[c][i]) + 0.5 * dt * f_next[c][i];
            }
        }
        let comps = hs.iter().map(|sp| s.inverse_real(sp.clone())).collect();
        fields.push(SymTensorField::new(grid.clone(), comps)?);
        f_prev = f_next;
    }
    Ok(TensorTrajectory {
        times: k.times.clone(),
        fields,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub steps_per_unit: usize,
    /// Largest admissible `sup|h₀|`.
    pub epsilon0: f64,
    pub norm: NormOptions,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 30,
            steps_per_unit: 512,
            epsilon0: 0.05,
            norm: NormOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub trajectory: TensorTrajectory,
    /// `‖h_{n+1} − h_n‖_X` per iteration.
    pub increments: Vec<f64>,
    /// `sup|h_{n+1} − h_n|` per iteration.
    pub sup_increments: Vec<f64>,
    /// Ratios of consecutive increments.
    pub contraction_factors: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `sup|Φ(h) − h|` for the returned trajectory's predecessor.
    pub residual_sup: f64,
}

/// Picard iteration `h_{n+1} = Φ(h_n)` from `h_0 ≡ 0`, stopping once
/// `‖h_{n+1} − h_n‖_X ≤ tol`.
pub fn fixed_point_solve(h0: &SymTensorField, horizon: f64, opts: &FixedPointOptions) -> Result<FixedPointResult> {
    let sup0 = h0.sup_norm();
    if sup0 > opts.epsilon0 {
        return Err(Error::InvalidParameter(format!(
            "sup|h0| = {sup0} exceeds the small-data threshold {}",
            opts.epsilon0
        )));
    }
    if !(horizon > 0.0) || opts.steps_per_unit == 0 {
        return Err(Error::InvalidParameter(format!("invalid horizon {horizon}")));
    }
    let steps = (horizon * opts.steps_per_unit as f64).ceil().max(1.0) as usize;
    let times: Vec<f64> = (0..=steps).map(|i| horizon * i as f64 / steps as f64).collect();
    let grid = h0.grid();
    let mut k = TensorTrajectory {
        times: times.clone(),
        fields: vec![SymTensorField::zeros(grid); steps + 1],
    };
    let mut increments = Vec::new();
    let mut sup_increments = Vec::new();
    let mut factors = Vec::new();
    let mut converged = false;
    let mut h = k.clone();
    for iter in 1..=opts.max_iters {
        h = picard_map(&k, h0)?;
        let diff = h.minus(&k)?;
        let inc = x_norm(&diff, &h, &opts.norm)?;
        sup_increments.push(diff.sup_norm());
        if let Some(&prev) = increments.last() {
            let factor = if prev > 0.0 { inc / prev } else { 0.0 };
            factors.push(factor);
            if factor >= 1.0 {
                return Err(Error::NonContraction { iteration: iter, factor });
            }
        }
        increments.push(inc);
        if inc <= opts.tol {
            converged = true;
            break;
        }
        k = h.clone();
    }
    let iterations = increments.len();
    Ok(FixedPointResult {
        trajectory: h,
        residual_sup: *sup_increments.last().unwrap_or(&0.0),
        increments,
        sup_increments,
        contraction_factors: factors,
        iterations,
        converged,
    })
}

/// `sup |∂ₜh − deturck_rhs(h)|` at every `stride`-th interior node, with a
/// fourth-order central difference in time.
pub fn pde_residual(traj: &TensorTrajectory, stride: usize) -> Result<f64> {
    let dt = uniform_step(&traj.times)?;
    let n = traj.times.len();
    if n < 5 {
        return Err(Error::InvalidParameter("need at least five time nodes".into()));
    }
    let s = Spectral::for_grid(traj.grid());
    let mut worst: f64 = 0.0;
    for m in (2..n - 2).step_by(stride.max(1)) {
        let rhs = deturck_rhs_with(&s, &traj.fields[m])?;
        let f = |j: usize| &traj.fields[j];
        for c in 0..rhs.components().len() {
            for i in 0..traj.grid().len() {
                let dtv = (-f(m + 2).components()[c][i] + 8.0 * f(m + 1).components()[c][i]
                    - 8.0 * f(m - 1).components()[c][i]
                    + f(m - 2).components()[c][i])
                    / (12.0 * dt);
                worst = worst.max((dtv - rhs.components()[c][i]).abs());
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub times: Vec<f64>,
    /// `ratios[k−1][i] = t_i^{k/2} sup|∇ᵏh(t_i)| / sup|h₀|`.
    pub ratios: Vec<Vec<f64>>,
    /// `C_k = max_i ratios[k−1][i]`.
    pub c_k: Vec<f64>,
    /// `sup_t t·sup|Rm(ḡ(t))|`.
    pub a_const: f64,
    /// `sup_t √t·sup|W(t)|`.
    pub b_const: f64,
    pub passed: bool,
}

fn tensor_derivative_sup(s: &Spectral, h: &SymTensorField, k: usize) -> f64 {
    let d = h.grid().d();
    if k == 1 {
        return gradient_magnitude(s, h).into_iter().fold(0.0, f64::max);
    }
    let mut acc = vec![0.0; h.grid().len()];
    let tuples = d.pow(k as u32);
    for i in 0..d {
        for j in i..d {
            let spec = s.forward(h.component(i, j));
            let w = if i == j { 1.0 } else { 2.0 };
            let mut cache: Vec<([usize; 3], Vec<f64>)> = Vec::new();
            for t in 0..tuples {
                let mut o = [0usize; 3];
                let mut rest = t;
                for _ in 0..k {
                    o[rest % d] += 1;
                    rest /= d;
                }
                let pos = match cache.iter().position(|(c, _)| *c == o) {
                    Some(p) => p,
                    None => {
                        cache.push((o, s.derivative_values(&spec, o)));
                        cache.len() - 1
                    }
                };
                for (a, v) in acc.iter_mut().zip(&cache[pos].1) {
                    *a += w * v * v;
                }
            }
        }
    }
    acc.into_iter().fold(0.0, f64::max).sqrt()
}

/// Scale-invariant derivative bounds and the curvature and `W` decay
/// constants along a solved trajectory, sampled at up to `max_samples` times.
pub fn verify_derivative_decay(sol: &FixedPointResult, k_max: usize, max_samples: usize) -> Result<DecayReport> {
    if !sol.converged {
        return Err(Error::InvalidParameter("fixed-point iteration did not converge".into()));
    }
    let traj = &sol.trajectory;
    let s = Spectral::for_grid(traj.grid());
    let sup0 = traj.fields[0].sup_norm();
    let n = traj.times.len();
    let step = ((n - 1) as f64 / max_samples.max(1) as f64).ceil().max(1.0) as usize;
    let want = Want {
        rhs: false,
        rm: true,
        drift: false,
    };
    let mut times = Vec::new();
    let mut ratios = vec![Vec::new(); k_max];
    let mut a_const: f64 = 0.0;
    let mut b_const: f64 = 0.0;
    for m in (step..n).step_by(step) {
        let t = traj.times[m];
        let h = &traj.fields[m];
        times.push(t);
        for k in 1..=k_max {
            let v = tensor_derivative_sup(&s, h, k);
            ratios[k - 1].push(if sup0 > 0.0 { t.powf(k as f64 / 2.0) * v / sup0 } else { 0.0 });
        }
        let geo = geometry(&s, h, want)?;
        let rm = geo.rm_norm.expect("requested").into_iter().fold(0.0, f64::max);
        let w = geo.w_norm.iter().copied().fold(0.0, f64::max);
        a_const = a_const.max(t * rm);
        b_const = b_const.max(t.sqrt() * w);
    }
    let c_k: Vec<f64> = ratios.iter().map(|r| r.iter().copied().fold(0.0, f64::max)).collect();
    let passed = c_k.iter().all(|c| c.is_finite()) && a_const.is_finite() && b_const.is_finite();
    Ok(DecayReport {
        times,
        ratios,
        c_k,
        a_const,
        b_const,
        passed,
    })
}

#[derive(Debug, Clone)]
pub struct DriftHeatSolution {
    pub times: Vec<f64>,
    pub fields: Vec<ScalarField>,
    /// Sub-steps per metric time step chosen by the stability check.
    pub substeps: usize,
    /// `max_t sup|u(t)| − sup|u₀|`.
    pub sup_excess: f64,
}

/// `∂ₜu = Δ_ḡ u + ⟨W, ∇u⟩` with `ḡ = g + h(t)` taken from `metric`, on
/// `[0, horizon]`. The flat Laplacian is integrated exactly, the remainder
/// with an exponential Heun step; coefficients are linear in time between
/// metric nodes.
pub fn coupled_drift_heat(u0: &ScalarField, metric: &TensorTrajectory, horizon: f64) -> Result<DriftHeatSolution> {
    let grid: TorusGrid = u0.grid().clone();
    if metric.grid() != &grid {
        return Err(Error::InvalidParameter("field and metric live on different grids".into()));
    }
    if !(horizon > 0.0) || horizon > metric.horizon() * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} outside the metric trajectory (0, {}]",
            metric.horizon()
        )));
    }
    let dt = uniform_step(&metric.times)?;
    let d = grid.d();
    let s = Spectral::for_grid(&grid);
    let want = Want {
        rhs: false,
        rm: false,
        drift: true,
    };
    let last = metric.times.iter().position(|&t| t >= horizon * (1.0 - 1e-12)).unwrap_or(metric.times.len() - 1);
    let coeffs: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = metric.fields[..=last]
        .iter()
        .map(|h| geometry(&s, h, want).map(|g| g.drift.expect("requested")))
        .collect::<Result<_>>()?;
    // Explicit part: |a|·κ² + |b|·κ per unit time with κ the dealiased cutoff.
    let kmax = (0..d)
        .map(|a| (grid.resolution()[a] / 3) as f64 * 2.0 * std::f64::consts::PI / grid.periods()[a])
        .fold(0.0, f64::max);
    let amax = coeffs
        .iter()
        .flat_map(|(a, _)| a.iter().flatten())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let bmax = coeffs
        .iter()
        .flat_map(|(_, b)| b.iter().flatten())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let rate = d as f64 * (amax * kmax * kmax + bmax * kmax);
    let substeps = ((dt * rate / 0.5).ceil() as usize).max(1);
    let h = dt / substeps as f64;
    let symbols: Vec<f64> = (0..s.len()).map(|i| s.laplacian_symbol(i)).collect();
    let decay: Vec<f64> = symbols.iter().map(|l| (-l * h).exp()).collect();

    let explicit = |spec: &[C64], theta: f64, n: usize| -> Vec<C64> {
        let (a0, b0) = &coeffs[n];
        let (a1, b1) = &coeffs[(n + 1).min(last)];
        let mix = |x: &[f64], y: &[f64], i: usize| (1.0 - theta) * x[i] + theta * y[i];
        let mut out = vec![0.0; s.len()];
        for i in 0..d {
            for j in i..d {
                let mut o = [0; 3];
                o[i] += 1;
                o[j] += 1;
                let v = s.derivative_values(spec, o);
                let c = sym_index(d, i, j);
                let w = if i == j { 1.0 } else { 2.0 };
                for (idx, acc) in out.iter_mut().enumerate() {
                    *acc += w * mix(&a0[c], &a1[c], idx) * v[idx];
                }
            }
            let mut o = [0; 3];
            o[i] = 1;
            let v = s.derivative_values(spec, o);
            for (idx, acc) in out.iter_mut().enumerate() {
                *acc += mix(&b0[i], &b1[i], idx) * v[idx];
            }
        }
        let mut f = s.forward(&out);
        s.dealias(&mut f);
        f
    };

    let sup0 = u0.max_abs();
    let mut spec = s.forward(u0.values());
    let mut times = vec![0.0];
    let mut fields = vec![u0.clone()];
    let mut sup_excess: f64 = 0.0;
    for n in 0..last {
        for sub in 0..substeps {
            let th0 = sub as f64 / substeps as f64;
            let th1 = (sub + 1) as f64 / substeps as f64;
            let n0 = explicit(&spec, th0, n);
            let pred: Vec<C64> = spec
                .iter()
                .zip(&n0)
                .zip(&decay)
                .map(|((u, f), e)| e * (u + h * f))
                .collect();
            let n1 = explicit(&pred, th1, n);
            spec = spec
                .iter()
                .zip(&n0)
                .zip(&n1)
                .zip(&decay)
                .map(|(((u, f0), f1), e)| e * (u + 0.5 * h * f0) + 0.5 * h * f1)
                .collect();
        }
        let field = ScalarField::new(grid.clone(), s.inverse_real(spec.clone()))?;
        sup_excess = sup_excess.max(field.max_abs() - sup0);
        times.push(metric.times[n + 1]);
        fields.push(field);
    }
    Ok(DriftHeatSolution {
        times,
        fields,
        substeps,
        sup_excess,
    })
}
